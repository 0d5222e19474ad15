#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dendrite/dendritic.hpp"
#include "dendrite/patterns.hpp"
#include "dendrite/spike_engine.hpp"

namespace dendrite::detail {

struct Contact {
  std::uint32_t state;  // neuron * m + branch
  double weight;        // synapse multiplicity
};

struct Event {
  std::size_t step;
  std::uint32_t afferent;
  double fall;  // pre-decay increments, exact after the step's decay
  double rise;
};

// afferent -> branches it contacts, within one pattern's state block.
std::vector<std::vector<Contact>> invert(const Connectome& c);

// Spikes sorted by (step, afferent). Step n covers (n dt, (n + 1) dt].
std::vector<Event> bin_events(const SpikePattern& sp, const LifParams& lif);

}  // namespace dendrite::detail
