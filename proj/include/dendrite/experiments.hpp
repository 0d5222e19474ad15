#pragma once

// Experiment protocols shared by the command-line runner and the acceptance
// checks, plus the flat key=value settings they are configured with.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dendrite/bstdsp.hpp"
#include "dendrite/datasets.hpp"
#include "dendrite/dendritic.hpp"
#include "dendrite/patterns.hpp"
#include "dendrite/spike_engine.hpp"
#include "dendrite/structural.hpp"

namespace dendrite {

/// Bad experiment name, unknown key or unparsable value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numeric result table; column names carry units.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row);
  /// Throws std::out_of_range for an unknown column.
  std::size_t column(std::string_view name) const;
  void write_csv(std::ostream& out) const;
};

struct ParamSpec {
  std::string key;
  std::string fallback;
  std::string help;
};

struct ExperimentInfo {
  std::string name;
  std::string target;
  std::string summary;
  std::vector<ParamSpec> params;
};

std::span<const ExperimentInfo> experiment_catalog();
/// Entries whose name or target contains `filter` (case-insensitive); all for an empty filter.
std::vector<const ExperimentInfo*> list_experiments(std::string_view filter);
const ExperimentInfo* find_experiment(std::string_view name);

/// Values for one experiment: defaults overlaid with explicit entries.
class Settings {
 public:
  /// Throws ConfigError for keys the experiment does not declare.
  Settings(const ExperimentInfo& info, const std::map<std::string, std::string>& values);

  std::string text(const std::string& key) const;
  double real(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<std::size_t> counts(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  const std::map<std::string, std::string>& all() const noexcept { return values_; }

 private:
  const std::string& raw(const std::string& key) const;
  std::map<std::string, std::string> values_;
};

/// Parses "key=value" lines; '#' starts a comment. Throws ConfigError.
std::map<std::string, std::string> parse_config(std::istream& in);

struct RunOptions {
  std::uint64_t seed = 1;
  /// Multiplies pattern counts and trial counts (each at least 1); 1 is full scale.
  double scale = 1.0;
  std::size_t threads = 1;
};

/// Pattern and trial counts after scaling.
std::size_t scaled(std::size_t n, double scale, std::size_t min = 1);

/// Runs fn(0) .. fn(n-1) on up to `threads` workers; results in index order.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

// ---- protocols -----------------------------------------------------------

enum class Trainer { RM, RMWM };

/// Gaussian receptive-field task of trial t.
std::vector<BinaryPattern> task_patterns(std::size_t patterns, std::uint64_t seed, std::size_t trial,
                                         std::size_t d_o = 40, std::size_t n_rf = 10);
/// Random initial wiring of trial t; independent of the pattern stream.
Connectome initial_connectome(std::size_t m, std::size_t k, std::size_t d, std::uint64_t seed,
                              std::size_t trial);

/// RM: g and b. RMWM: g_margin from delta0 and b_leak with z_leak = p_on k.
LearnConfig learn_config(Trainer trainer, ModelKind kind, std::size_t k, std::uint64_t seed,
                         std::size_t trial, double delta0 = 25.0, double p_on = 0.1);

struct ReducedRun {
  TrainTrace trace;
  LearnConfig cfg;
  double train_mae = 0.0;
};

ReducedRun train_reduced(std::span<const BinaryPattern> patterns, const Connectome& init,
                         const LearnConfig& cfg);

/// Rate-coded (jitter < 0) or single-spike test of a trained run on `patterns`.
SpikeTestResult spike_test_run(std::span<const BinaryPattern> patterns, const ReducedRun& run,
                               bool differential, double jitter_ms, std::uint64_t seed,
                               std::size_t trial);

struct BstdspRun {
  BstdspSetup setup;
  TrainTrace trace;
  double delta = 0.0;
  double train_mae = 0.0;
  double test_error = 0.0;
};

/// Margin as a fraction of V_thr (0 trains without margin); test on jittered
/// copies of the training patterns.
BstdspRun bstdsp_run(std::size_t patterns, std::size_t m, std::size_t k, double margin_fraction,
                     double jitter_ms, std::uint64_t seed, std::size_t trial,
                     std::size_t n_min = 100);

struct BenchmarkRun {
  double train_accuracy = 0.0;
  double binary_accuracy = 0.0;
  double spike_accuracy = 0.0;
  EncodedDataset data;
};

/// RMWM on the encoded training split, tested with g and with rate-coded spikes.
BenchmarkRun benchmark_run(const DatasetSpec& spec, const std::filesystem::path& dir,
                           std::uint64_t seed, std::size_t trial, double delta0 = 25.0);

// ---- runner --------------------------------------------------------------

struct ExperimentOutput {
  /// File name -> table.
  std::vector<std::pair<std::string, Table>> tables;
  /// Free-form lines for the manifest.
  std::vector<std::string> notes;
};

/// Throws ConfigError, DataError or std::runtime_error.
ExperimentOutput run_experiment(const ExperimentInfo& info, const Settings& settings,
                                const RunOptions& options);

}  // namespace dendrite
