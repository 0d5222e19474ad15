#include "dendrite/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <exception>
#include <istream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "dendrite/analysis.hpp"
#include "dendrite/capacity.hpp"
#include "dendrite/csv.hpp"
#include "dendrite/rng.hpp"

namespace dendrite {

// ---- tables and settings ---------------------------------------------------

void Table::add(std::vector<double> row) {
  if (row.size() != columns.size()) throw std::logic_error("Table::add: row width mismatch");
  rows.push_back(std::move(row));
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw std::out_of_range("Table: no column " + std::string(name));
}

void Table::write_csv(std::ostream& out) const {
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << csv::fmt(r[i]);
    out << '\n';
  }
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

const std::vector<ExperimentInfo>& catalog() {
  static const std::vector<ExperimentInfo> c = {
      {"fig7", "training curves", "MAE during training of L- and NL-neurons",
       {{"patterns", "500,1000", "training set sizes"},
        {"m", "20", "branches of the NL-neuron"},
        {"s", "200", "synapses per neuron"},
        {"trials", "5", "independent trials"},
        {"n_min", "100", "local minima before stopping"}}},
      {"fig8", "wiring correlations", "input correlations captured by the learned wiring",
       {{"d_o", "2", "original dimensions"},
        {"n_rf", "10", "receptive fields per dimension"},
        {"patterns", "100", "training patterns"},
        {"m", "10", "branches"},
        {"k", "5", "synapses per branch"},
        {"n_min", "100", "local minima before stopping"}}},
      {"fig9", "m sweep", "MAE and ln-capacity against m at fixed s (m = 1 is the L-neuron)",
       {{"patterns", "500,1000", "training set sizes"},
        {"s", "200", "synapses per neuron"},
        {"ms", "1,2,4,5,10,20,25,40,50,100,200", "branch counts (each divides s)"},
        {"trials", "5", "independent trials"},
        {"n_min", "100", "local minima before stopping"}}},
      {"fig10", "k sweep", "MAE and inverse capacity against k",
       {{"patterns", "500,700,1000", "training set sizes"},
        {"ms", "10,20,50", "branch counts"},
        {"ks", "5,10,15,25,50", "synapses per branch"},
        {"trials", "5", "independent trials"},
        {"n_min", "100", "local minima before stopping"}}},
      {"fig12", "margin calibration", "alpha of misclassified rate-coded inputs (delta0 calibration)",
       {{"patterns", "500", "training patterns"},
        {"m", "20", "branches"},
        {"ks", "5,15,50", "synapses per branch"},
        {"trials", "1", "independent trials"}}},
      {"fig13", "rate-coded test", "RM: rate-coded spike test against binary training error",
       {{"patterns", "1000", "training patterns"},
        {"ms", "10,20,50", "branch counts"},
        {"ks", "5,10,15,25,50", "synapses per branch"},
        {"trials", "5", "independent trials"}}},
      {"fig14", "noise robustness", "noise suite: differential input, g_margin, b_leak",
       {{"patterns", "1000", "training patterns"},
        {"ms", "10,20,50", "branch counts"},
        {"ks", "5,10,15,25,50", "synapses per branch"},
        {"delta0", "25", "initial margin"},
        {"trials", "5", "independent trials"}}},
      {"single_spike", "jitter robustness", "RMWM on single-spike patterns with jitter",
       {{"patterns", "1000", "training patterns"},
        {"m", "20", "branches"},
        {"ks", "5,10,15,25,50", "synapses per branch"},
        {"jitters_ms", "4,8,16,24", "spike time windows"},
        {"delta0", "25", "initial margin"},
        {"trials", "5", "independent trials"}}},
      {"bstdsp", "spike-timing learning", "spike-timing structural plasticity with and without margin",
       {{"patterns", "500", "training patterns"},
        {"m", "20", "branches"},
        {"ks", "5,10,15,25,50", "synapses per branch"},
        {"margin_fraction", "0.5", "delta_spike / V_thr of the margin runs"},
        {"jitter_ms", "8", "test spike time window"},
        {"trials", "3", "independent trials"},
        {"n_min", "100", "local minima before stopping"}}},
      {"table5", "UCI benchmarks", "UCI benchmarks with density-matched receptive fields",
       {{"datasets", "BC,HEART,ION", "dataset names"},
        {"data_dir", "", "directory of the vendored CSVs (empty: default)"},
        {"delta0", "25", "initial margin"},
        {"trials", "5", "independent splits"}}},
      {"capacity", "theoretical capacity", "ln-capacity sweeps",
       {{"d", "400", "input lines"},
        {"s", "200", "synapses for the m sweep"},
        {"ms", "2,4,5,10,20,25,40,50,100,200", "branch counts of the m sweep"},
        {"k_ms", "10,20,50", "branch counts of the k sweep"},
        {"ks", "5,10,15,25,50", "synapses per branch of the k sweep"}}},
      {"validity", "rate approximation", "time-averaged vs actual branch current",
       {{"synapses", "10", "active synapses on the branch"},
        {"f_tau", "0.5,2,8,20", "f_high x tau_f products"},
        {"tau_f_ms", "8", "PSC fall time"},
        {"x_thr", "2", "branch threshold"},
        {"trials", "20", "windows pooled per point"}}},
  };
  return c;
}

}  // namespace

std::span<const ExperimentInfo> experiment_catalog() { return catalog(); }

std::vector<const ExperimentInfo*> list_experiments(std::string_view filter) {
  const std::string f = lower(filter);
  std::vector<const ExperimentInfo*> out;
  for (const auto& e : catalog()) {
    if (f.empty() || lower(e.name).find(f) != std::string::npos ||
        lower(e.target).find(f) != std::string::npos) {
      out.push_back(&e);
    }
  }
  return out;
}

const ExperimentInfo* find_experiment(std::string_view name) {
  const std::string n = lower(name);
  for (const auto& e : catalog())
    if (e.name == n) return &e;
  return nullptr;
}

Settings::Settings(const ExperimentInfo& info, const std::map<std::string, std::string>& values) {
  for (const auto& p : info.params) values_[p.key] = p.fallback;
  for (const auto& [k, v] : values) {
    if (!values_.count(k)) throw ConfigError("unknown key '" + k + "' for experiment " + info.name);
    values_[k] = v;
  }
}

const std::string& Settings::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing key '" + key + "'");
  return it->second;
}

std::string Settings::text(const std::string& key) const { return raw(key); }

double Settings::real(const std::string& key) const {
  const std::string& s = raw(key);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError(key + ": not a number: '" + s + "'");
  }
  return v;
}

std::size_t Settings::count(const std::string& key) const {
  const std::string& s = raw(key);
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(key + ": not a non-negative integer: '" + s + "'");
  }
  return v;
}

bool Settings::flag(const std::string& key) const {
  const std::string s = lower(raw(key));
  if (s == "1" || s == "true" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "no") return false;
  throw ConfigError(key + ": not a boolean: '" + s + "'");
}

std::vector<std::size_t> Settings::counts(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& part : csv::split(raw(key))) {
    const std::string t = trim(part);
    std::size_t v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
      throw ConfigError(key + ": not a list of integers: '" + raw(key) + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<double> Settings::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& part : csv::split(raw(key))) {
    const std::string t = trim(part);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
      throw ConfigError(key + ": not a list of numbers: '" + raw(key) + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::map<std::string, std::string> parse_config(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("config line " + std::to_string(n) + ": expected key=value");
    }
    out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return out;
}

std::size_t scaled(std::size_t n, double scale, std::size_t min) {
  if (!(scale > 0.0)) throw ConfigError("scale must be > 0");
  const auto v = static_cast<std::size_t>(std::llround(static_cast<double>(n) * scale));
  return std::max(v, min);
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---- protocols -------------------------------------------------------------

namespace {

constexpr std::uint64_t kTaskStream = 0x7461736b;   // "task"
constexpr std::uint64_t kInitStream = 0x696e6974;   // "init"
constexpr std::uint64_t kLearnStream = 0x6c726e;    // "lrn"
constexpr std::uint64_t kSpikeStream = 0x73706b;    // "spk"
constexpr std::uint64_t kBstdspStream = 0x627374;   // "bst"

double mean(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stdev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

std::vector<BinaryPattern> task_patterns(std::size_t patterns, std::uint64_t seed, std::size_t trial,
                                         std::size_t d_o, std::size_t n_rf) {
  TaskSpec spec;
  spec.d_o = d_o;
  spec.n_rf = n_rf;
  spec.patterns = patterns;
  spec.seed = derive_seed(seed, kTaskStream, trial);
  return generate_random_task(spec);
}

Connectome initial_connectome(std::size_t m, std::size_t k, std::size_t d, std::uint64_t seed,
                              std::size_t trial) {
  Rng rng(derive_seed(derive_seed(seed, kInitStream, trial), m, k));
  return Connectome::random(m, k, d, rng);
}

LearnConfig learn_config(Trainer trainer, ModelKind kind, std::size_t k, std::uint64_t seed,
                         std::size_t trial, double delta0, double p_on) {
  LearnConfig cfg;
  cfg.kind = kind;
  cfg.seed = derive_seed(seed, kLearnStream, trial);
  if (trainer == Trainer::RMWM) {
    cfg.use_margin = true;
    cfg.use_leak = true;
    cfg.delta0 = delta0;
    cfg.nl.z_leak = p_on * static_cast<double>(k);
  }
  return cfg;
}

ReducedRun train_reduced(std::span<const BinaryPattern> patterns, const Connectome& init,
                         const LearnConfig& cfg) {
  ReducedRun r;
  r.cfg = cfg;
  r.trace = train(patterns, init, cfg);
  r.train_mae = r.trace.best_mae;
  return r;
}

SpikeTestResult spike_test_run(std::span<const BinaryPattern> patterns, const ReducedRun& run,
                               bool differential, double jitter_ms, std::uint64_t seed,
                               std::size_t trial) {
  SpikeTestConfig st;
  st.differential = differential;
  st.seed = derive_seed(seed, kSpikeStream, trial);
  if (jitter_ms >= 0.0) {
    st.coding.kind = SpikeCoding::Kind::Single;
    st.coding.jitter_ms = jitter_ms;
  }
  return spike_test(patterns, run.trace.best, run.cfg.nl, run.cfg.kind, run.cfg.use_leak, st);
}

BstdspRun bstdsp_run(std::size_t patterns, std::size_t m, std::size_t k, double margin_fraction,
                     double jitter_ms, std::uint64_t seed, std::size_t trial, std::size_t n_min) {
  if (!(margin_fraction >= 0.0 && margin_fraction < 1.0)) {
    throw ConfigError("margin_fraction must be in [0, 1)");
  }
  const auto pats = task_patterns(patterns, seed, trial);
  const Connectome init = initial_connectome(m, k, pats.front().size(), seed, trial);
  const BstdspParams base;
  const auto branch = bstdsp_nonlinearity(NonlinearityConfig{}, ModelKind::Nonlinear, base);

  BstdspRun r;
  r.setup = prepare_bstdsp(pats, init, base, branch, 0.0);
  if (margin_fraction > 0.0) {
    r.delta = margin_fraction * base.v_thr_mv / r.setup.margin.eta;
    r.setup = prepare_bstdsp(pats, init, base, branch, r.delta);
  }
  LearnConfig cfg;
  cfg.n_min = n_min;
  cfg.seed = derive_seed(seed, kBstdspStream, trial);
  r.trace = train_bstdsp(pats, init, r.setup.params, branch, cfg);
  r.train_mae = r.trace.best_mae;
  r.test_error = test_bstdsp(pats, r.trace.best, r.setup.params, branch, jitter_ms,
                             derive_seed(seed, kSpikeStream, trial))
                     .error;
  return r;
}

BenchmarkRun benchmark_run(const DatasetSpec& spec, const std::filesystem::path& dir,
                           std::uint64_t seed, std::size_t trial, double delta0) {
  BenchmarkRun r;
  r.data = prepare_dataset(spec, dir, derive_seed(seed, kTaskStream, trial));
  const auto& train_set = r.data.train;
  const Connectome init = initial_connectome(spec.m, spec.k, r.data.encoder.width(), seed, trial);
  LearnConfig cfg = learn_config(Trainer::RMWM, ModelKind::Nonlinear, spec.k, seed, trial, delta0);
  cfg.n_R = std::min(cfg.n_R, r.data.encoder.width());
  const ReducedRun run = train_reduced(train_set, init, cfg);
  r.train_accuracy = 1.0 - run.train_mae;

  std::size_t right = 0;
  for (const auto& x : r.data.test) {
    right += classify(x, run.trace.best, cfg.nl, cfg.kind, cfg.use_leak) == x.label;
  }
  r.binary_accuracy = static_cast<double>(right) / static_cast<double>(r.data.test.size());

  SpikeTestConfig st;
  st.differential = true;
  st.seed = derive_seed(seed, kSpikeStream, trial);
  st.gain = calibrate_gain(train_set, run.trace.best, cfg.nl, cfg.kind, cfg.use_leak,
                           st.coding.unit_current(st.lif), true, st.lif, st.target_rate_hz);
  const auto res = spike_test(r.data.test, run.trace.best, cfg.nl, cfg.kind, cfg.use_leak, st);
  r.spike_accuracy = 1.0 - res.error;
  return r;
}

// ---- experiments -----------------------------------------------------------

namespace {

struct Ctx {
  const Settings& s;
  const RunOptions& o;
  ExperimentOutput out;

  std::size_t trials() const { return scaled(s.count("trials"), o.scale); }
  std::size_t patterns(std::size_t p) const { return scaled(p, o.scale, 2); }
  std::size_t n_min() const { return s.count("n_min"); }
};

void require_divides(std::size_t s, std::size_t m) {
  if (m == 0 || s % m != 0) throw ConfigError("m=" + std::to_string(m) + " does not divide s");
}

ReducedRun reduced_cell(std::size_t P, std::size_t m, std::size_t k, ModelKind kind, Trainer trainer,
                        double delta0, std::size_t n_min, std::uint64_t seed, std::size_t trial,
                        std::vector<BinaryPattern>* keep = nullptr) {
  auto pats = task_patterns(P, seed, trial);
  const Connectome init = initial_connectome(m, k, pats.front().size(), seed, trial);
  LearnConfig cfg = learn_config(trainer, kind, k, seed, trial, delta0);
  cfg.n_min = n_min;
  ReducedRun r = train_reduced(pats, init, cfg);
  if (keep) *keep = std::move(pats);
  return r;
}

void run_fig7(Ctx& c) {
  const auto ps = c.s.counts("patterns");
  const std::size_t m = c.s.count("m"), s = c.s.count("s"), trials = c.trials();
  require_divides(s, m);
  struct Job { std::size_t P; int neuron; std::size_t trial; };
  std::vector<Job> jobs;
  for (std::size_t P : ps)
    for (int neuron = 0; neuron < 2; ++neuron)
      for (std::size_t t = 0; t < trials; ++t) jobs.push_back({c.patterns(P), neuron, t});
  std::vector<ReducedRun> runs(jobs.size());
  parallel_for(jobs.size(), c.o.threads, [&](std::size_t i) {
    const Job& j = jobs[i];
    const bool nl = j.neuron == 1;
    runs[i] = reduced_cell(j.P, nl ? m : 1, nl ? s / m : s, nl ? ModelKind::Nonlinear : ModelKind::Linear,
                           Trainer::RM, 25.0, c.n_min(), c.o.seed, j.trial);
  });
  Table trace{{"patterns", "neuron_nl", "trial", "proposal", "mae_fraction", "local_minima"}, {}};
  Table summary{{"patterns", "neuron_nl", "trial", "best_mae_fraction", "proposals"}, {}};
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Job& j = jobs[i];
    for (const auto& row : runs[i].trace.rows) {
      trace.add({double(j.P), double(j.neuron), double(j.trial), double(row.proposal), row.mae,
                 double(row.local_minima)});
    }
    summary.add({double(j.P), double(j.neuron), double(j.trial), runs[i].train_mae,
                 double(runs[i].trace.proposals)});
  }
  c.out.tables.push_back({"fig7_trace.csv", std::move(trace)});
  c.out.tables.push_back({"fig7_summary.csv", std::move(summary)});
  c.out.notes.push_back("L-neuron: one identity branch with all s synapses");
}

void run_fig8(Ctx& c) {
  const std::size_t d_o = c.s.count("d_o"), n_rf = c.s.count("n_rf");
  const std::size_t P = c.patterns(c.s.count("patterns"));
  const std::size_t m = c.s.count("m"), k = c.s.count("k");
  const auto pats = task_patterns(P, c.o.seed, 0, d_o, n_rf);
  const std::size_t d = d_o * n_rf;
  const CorrelationRanking order = input_correlation_ranking(pats);
  const Connectome init = initial_connectome(m, k, d, c.o.seed, 0);
  LearnConfig cfg = learn_config(Trainer::RM, ModelKind::Nonlinear, k, c.o.seed, 0);
  cfg.n_min = c.n_min();
  cfg.n_R = std::min(cfg.n_R, d);
  cfg.n_T = std::min(cfg.n_T, m * k);
  const ReducedRun run = train_reduced(pats, init, cfg);

  Table ranking{{"rank", "row", "col", "r_value"}, {}};
  for (std::size_t r = 0; r < order.pairs.size(); ++r) {
    ranking.add({double(r), double(order.pairs[r].row), double(order.pairs[r].col), order.values[r]});
  }
  c.out.tables.push_back({"fig8_ranking.csv", std::move(ranking)});
  Table summary{{"neuron_plus", "trained", "concentration_rank"}, {}};
  const char* names[2][2] = {{"fig8_minus_before.csv", "fig8_minus_after.csv"},
                             {"fig8_plus_before.csv", "fig8_plus_after.csv"}};
  for (int plus = 1; plus >= 0; --plus) {
    for (int trained = 0; trained < 2; ++trained) {
      const Connectome& w = trained ? run.trace.best : init;
      const WeightProjection proj =
          weight_correlation_projection(plus ? w.plus : w.minus, d, order);
      Table t{{"branch", "rank", "weight_product"}, {}};
      for (std::size_t j = 0; j < proj.branches.size(); ++j)
        for (std::size_t r = 0; r < proj.branches[j].size(); ++r)
          if (proj.branches[j][r] != 0.0) t.add({double(j), double(r), proj.branches[j][r]});
      for (std::size_t r = 0; r < proj.histogram.size(); ++r) t.add({-1.0, double(r), proj.histogram[r]});
      c.out.tables.push_back({names[plus][trained], std::move(t)});
      summary.add({double(plus), double(trained), concentration(proj.histogram)});
    }
  }
  c.out.tables.push_back({"fig8_summary.csv", std::move(summary)});
  c.out.notes.push_back("branch -1 rows hold the per-rank histogram summed over branches");
  c.out.notes.push_back("train_mae=" + csv::fmt(run.train_mae));
}

void run_fig9(Ctx& c) {
  const auto ps = c.s.counts("patterns");
  const auto ms = c.s.counts("ms");
  const std::size_t s = c.s.count("s"), trials = c.trials();
  for (std::size_t m : ms) require_divides(s, m);
  struct Job { std::size_t P, m, trial; };
  std::vector<Job> jobs;
  for (std::size_t P : ps)
    for (std::size_t m : ms)
      for (std::size_t t = 0; t < trials; ++t) jobs.push_back({c.patterns(P), m, t});
  std::vector<double> mae(jobs.size());
  parallel_for(jobs.size(), c.o.threads, [&](std::size_t i) {
    const Job& j = jobs[i];
    const ModelKind kind = j.m == 1 ? ModelKind::Linear : ModelKind::Nonlinear;
    mae[i] = reduced_cell(j.P, j.m, s / j.m, kind, Trainer::RM, 25.0, c.n_min(), c.o.seed, j.trial)
                 .train_mae;
  });
  Table per{{"patterns", "m", "k", "trial", "mae_fraction"}, {}};
  Table mean_t{{"patterns", "m", "k", "mean_mae_fraction", "sd_mae_fraction", "ln_capacity"}, {}};
  for (std::size_t i = 0; i < jobs.size(); i += trials) {
    const Job& j = jobs[i];
    per.rows.reserve(per.rows.size() + trials);
    for (std::size_t t = 0; t < trials; ++t) per.add({double(j.P), double(j.m), double(s / j.m), double(t), mae[i + t]});
    const std::span<const double> cell(mae.data() + i, trials);
    const double lnc = j.m == 1 ? linear_capacity(400, s, 0).ln : nonlinear_capacity(400, j.m, s / j.m, 0).ln;
    mean_t.add({double(j.P), double(j.m), double(s / j.m), mean(cell), stdev(cell), lnc});
  }
  c.out.tables.push_back({"fig9_trials.csv", std::move(per)});
  c.out.tables.push_back({"fig9.csv", std::move(mean_t)});
}

void run_fig10(Ctx& c) {
  const auto ps = c.s.counts("patterns"), ms = c.s.counts("ms"), ks = c.s.counts("ks");
  const std::size_t trials = c.trials();
  struct Job { std::size_t P, m, k, trial; };
  std::vector<Job> jobs;
  for (std::size_t P : ps)
    for (std::size_t m : ms)
      for (std::size_t k : ks)
        for (std::size_t t = 0; t < trials; ++t) jobs.push_back({c.patterns(P), m, k, t});
  std::vector<double> mae(jobs.size());
  parallel_for(jobs.size(), c.o.threads, [&](std::size_t i) {
    const Job& j = jobs[i];
    mae[i] = reduced_cell(j.P, j.m, j.k, ModelKind::Nonlinear, Trainer::RM, 25.0, c.n_min(), c.o.seed,
                          j.trial)
                 .train_mae;
  });
  Table t{{"patterns", "m", "k", "mean_mae_fraction", "sd_mae_fraction", "ln_inverse_capacity"}, {}};
  for (std::size_t i = 0; i < jobs.size(); i += trials) {
    const Job& j = jobs[i];
    const std::span<const double> cell(mae.data() + i, trials);
    t.add({double(j.P), double(j.m), double(j.k), mean(cell), stdev(cell),
           -nonlinear_capacity(400, j.m, j.k, 0).ln});
  }
  c.out.tables.push_back({"fig10.csv", std::move(t)});
}

void run_fig12(Ctx& c) {
  const std::size_t P = c.patterns(c.s.count("patterns")), m = c.s.count("m");
  const auto ks = c.s.counts("ks");
  const std::size_t trials = c.trials();
  Table alphas{{"k", "trial", "alpha"}, {}};
  Table summary{{"k", "trial", "misclassified", "delta0"}, {}};
  for (std::size_t k : ks) {
    for (std::size_t t = 0; t < trials; ++t) {
      std::vector<BinaryPattern> pats;
      const ReducedRun run = reduced_cell(P, m, k, ModelKind::Nonlinear, Trainer::RM, 25.0, 100, c.o.seed, t, &pats);
      SpikeTestConfig st;
      st.seed = derive_seed(c.o.seed, kSpikeStream, t);
      const auto a = misclassified_alphas(pats, run.trace.best, run.cfg, st);
      double d0 = 0.0;
      for (double x : a) {
        alphas.add({double(k), double(t), x});
        d0 = std::max(d0, std::fabs(x));
      }
      summary.add({double(k), double(t), double(a.size()), d0});
    }
  }
  c.out.tables.push_back({"fig12_alpha.csv", std::move(alphas)});
  c.out.tables.push_back({"fig12_delta0.csv", std::move(summary)});
}

void run_fig13(Ctx& c) {
  const std::size_t P = c.patterns(c.s.count("patterns"));
  const auto ms = c.s.counts("ms"), ks = c.s.counts("ks");
  const std::size_t trials = c.trials();
  struct Job { std::size_t m, k, trial; };
  std::vector<Job> jobs;
  for (std::size_t m : ms)
    for (std::size_t k : ks)
      for (std::size_t t = 0; t < trials; ++t) jobs.push_back({m, k, t});
  std::vector<std::pair<double, double>> res(jobs.size());
  parallel_for(jobs.size(), c.o.threads, [&](std::size_t i) {
    const Job& j = jobs[i];
    std::vector<BinaryPattern> pats;
    const ReducedRun run = reduced_cell(P, j.m, j.k, ModelKind::Nonlinear, Trainer::RM, 25.0, 100, c.o.seed, j.trial, &pats);
    res[i] = {run.train_mae, spike_test_run(pats, run, false, -1.0, c.o.seed, j.trial).error};
  });
  Table t{{"m", "k", "trial", "train_mae_fraction", "spike_error_fraction"}, {}};
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    t.add({double(jobs[i].m), double(jobs[i].k), double(jobs[i].trial), res[i].first, res[i].second});
  }
  c.out.tables.push_back({"fig13.csv", std::move(t)});
}

void run_fig14(Ctx& c) {
  const std::size_t P = c.patterns(c.s.count("patterns"));
  const auto ms = c.s.counts("ms"), ks = c.s.counts("ks");
  const double delta0 = c.s.real("delta0");
  const std::size_t trials = c.trials();
  // variant 0: RM; 1: RM + differential; 2: g_margin + differential; 3: RMWM (+ b_leak)
  struct Job { std::size_t m, k, trial; int variant; };
  std::vector<Job> jobs;
  for (std::size_t m : ms)
    for (std::size_t k : ks)
      for (std::size_t t = 0; t < trials; ++t)
        for (int v : {0, 2, 3}) jobs.push_back({m, k, t, v});
  struct Res { double train, spike, spike_diff; };
  std::vector<Res> res(jobs.size());
  parallel_for(jobs.size(), c.o.threads, [&](std::size_t i) {
    const Job& j = jobs[i];
    auto pats = task_patterns(P, c.o.seed, j.trial);
    const Connectome init = initial_connectome(j.m, j.k, pats.front().size(), c.o.seed, j.trial);
    LearnConfig cfg = learn_config(j.variant == 0 ? Trainer::RM : Trainer::RMWM, ModelKind::Nonlinear,
                                   j.k, c.o.seed, j.trial, delta0);
    if (j.variant == 2) {
      cfg.use_leak = false;
      cfg.nl.z_leak = 0.0;
    }
    const ReducedRun run = train_reduced(pats, init, cfg);
    res[i].train = run.train_mae;
    res[i].spike_diff = spike_test_run(pats, run, true, -1.0, c.o.seed, j.trial).error;
    res[i].spike = j.variant == 0 ? spike_test_run(pats, run, false, -1.0, c.o.seed, j.trial).error
                                  : res[i].spike_diff;
  });
  Table t{{"variant", "m", "k", "trial", "train_mae_fraction", "spike_error_fraction"}, {}};
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Job& j = jobs[i];
    if (j.variant == 0) {
      t.add({0.0, double(j.m), double(j.k), double(j.trial), res[i].train, res[i].spike});
      t.add({1.0, double(j.m), double(j.k), double(j.trial), res[i].train, res[i].spike_diff});
    } else {
      t.add({double(j.variant), double(j.m), double(j.k), double(j.trial), res[i].train, res[i].spike});
    }
  }
  c.out.tables.push_back({"fig14.csv", std::move(t)});
  c.out.notes.push_back("variant 0: RM; 1: RM, differential input; 2: g_margin, differential; "
                        "3: g_margin + b_leak, differential (RMWM)");
}

void run_single_spike(Ctx& c) {
  const std::size_t P = c.patterns(c.s.count("patterns")), m = c.s.count("m");
  const auto ks = c.s.counts("ks");
  const auto jitters = c.s.reals("jitters_ms");
  const double delta0 = c.s.real("delta0");
  const std::size_t trials = c.trials();
  struct Job { std::size_t k, trial; };
  std::vector<Job> jobs;
  for (std::size_t k : ks)
    for (std::size_t t = 0; t < trials; ++t) jobs.push_back({k, t});
  std::vector<std::vector<double>> res(jobs.size());
  parallel_for(jobs.size(), c.o.threads, [&](std::size_t i) {
    std::vector<BinaryPattern> pats;
    const ReducedRun run = reduced_cell(P, m, jobs[i].k, ModelKind::Nonlinear, Trainer::RMWM, delta0,
                                        100, c.o.seed, jobs[i].trial, &pats);
    res[i].push_back(run.train_mae);
    for (double j : jitters) res[i].push_back(spike_test_run(pats, run, true, j, c.o.seed, jobs[i].trial).error);
  });
  Table t{{"k", "trial", "jitter_ms", "train_mae_fraction", "test_error_fraction"}, {}};
  for (std::size_t i = 0; i < jobs.size(); ++i)
    for (std::size_t q = 0; q < jitters.size(); ++q)
      t.add({double(jobs[i].k), double(jobs[i].trial), jitters[q], res[i][0], res[i][q + 1]});
  c.out.tables.push_back({"single_spike.csv", std::move(t)});
}

void run_bstdsp(Ctx& c) {
  const std::size_t P = c.patterns(c.s.count("patterns")), m = c.s.count("m");
  const auto ks = c.s.counts("ks");
  const double frac = c.s.real("margin_fraction"), jitter = c.s.real("jitter_ms");
  const std::size_t trials = c.trials();
  struct Job { std::size_t k, trial; bool margin; };
  std::vector<Job> jobs;
  for (std::size_t k : ks)
    for (std::size_t t = 0; t < trials; ++t)
      for (bool mg : {false, true}) jobs.push_back({k, t, mg});
  std::vector<BstdspRun> runs(jobs.size());
  parallel_for(jobs.size(), c.o.threads, [&](std::size_t i) {
    const Job& j = jobs[i];
    runs[i] = bstdsp_run(P, m, j.k, j.margin ? frac : 0.0, jitter, c.o.seed, j.trial, c.n_min());
  });
  Table t{{"k", "trial", "margin", "train_mae_fraction", "test_error_fraction", "delta", "v_st_mV",
           "v_reset_mV", "eta_mV", "gamma", "gain_mV_per_nA"},
          {}};
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& r = runs[i];
    t.add({double(jobs[i].k), double(jobs[i].trial), jobs[i].margin ? 1.0 : 0.0, r.train_mae,
           r.test_error, r.delta, r.setup.params.v_st_mv, r.setup.params.v_reset_mv, r.setup.margin.eta,
           r.setup.params.gamma, r.setup.params.gain});
  }
  c.out.tables.push_back({"bstdsp.csv", std::move(t)});
}

void run_table5(Ctx& c) {
  std::vector<DatasetSpec> specs;
  for (const auto& name : csv::split(c.s.text("datasets"))) {
    const auto spec = find_dataset(trim(name));
    if (!spec) throw ConfigError("unknown dataset '" + trim(name) + "'");
    specs.push_back(*spec);
  }
  const std::string dir_text = c.s.text("data_dir");
  const std::filesystem::path dir = dir_text.empty() ? default_data_dir() : std::filesystem::path(dir_text);
  const double delta0 = c.s.real("delta0");
  const std::size_t trials = c.trials();
  struct Job { std::size_t ds, trial; };
  std::vector<Job> jobs;
  for (std::size_t d = 0; d < specs.size(); ++d)
    for (std::size_t t = 0; t < trials; ++t) jobs.push_back({d, t});
  std::vector<BenchmarkRun> runs(jobs.size());
  parallel_for(jobs.size(), c.o.threads, [&](std::size_t i) {
    runs[i] = benchmark_run(specs[jobs[i].ds], dir, c.o.seed, jobs[i].trial, delta0);
  });
  Table t{{"dataset", "trial", "m", "k", "encoded_width", "train_accuracy_pct", "binary_accuracy_pct",
           "spike_accuracy_pct"},
          {}};
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& r = runs[i];
    const auto& sp = specs[jobs[i].ds];
    t.add({double(jobs[i].ds), double(jobs[i].trial), double(sp.m), double(sp.k),
           double(r.data.encoder.width()), 100.0 * r.train_accuracy, 100.0 * r.binary_accuracy,
           100.0 * r.spike_accuracy});
  }
  for (std::size_t d = 0; d < specs.size(); ++d) {
    c.out.notes.push_back("dataset " + std::to_string(d) + "=" + specs[d].name + " file=" + specs[d].file +
                          " sha1=" + runs[d * trials].data.raw.sha1 + " (" + specs[d].provenance + ")");
  }
  c.out.tables.push_back({"table5.csv", std::move(t)});
}

void run_capacity(Ctx& c) {
  const std::size_t d = c.s.count("d"), s = c.s.count("s");
  const auto ms = c.s.counts("ms"), k_ms = c.s.counts("k_ms"), ks = c.s.counts("ks");
  for (std::size_t m : ms) require_divides(s, m);
  Table sweep{{"m", "k", "ln_capacity"}, {}};
  for (const auto& p : capacity_sweep(d, s, ms)) sweep.add({double(p.m), double(p.k), p.ln_capacity});
  Table vs_k{{"m", "k", "ln_capacity", "ln_inverse_capacity"}, {}};
  for (std::size_t m : k_ms)
    for (const auto& p : capacity_vs_k(d, m, ks))
      vs_k.add({double(p.m), double(p.k), p.ln_capacity, -p.ln_capacity});
  c.out.notes.push_back("ln_capacity of the L-neuron (s synapses)=" + csv::fmt(linear_capacity(d, s, 0).ln));
  c.out.tables.push_back({"capacity_m.csv", std::move(sweep)});
  c.out.tables.push_back({"capacity_k.csv", std::move(vs_k)});
}

void run_validity(Ctx& c) {
  const auto syn = c.s.counts("synapses");
  const auto f_tau = c.s.reals("f_tau");
  const double tau_f = c.s.real("tau_f_ms"), x_thr = c.s.real("x_thr");
  const std::size_t trials = c.trials();
  std::vector<double> f_high;
  for (double ft : f_tau) f_high.push_back(ft / tau_f * 1000.0);
  const double taus[] = {tau_f};
  LifParams lif;
  const auto pts = validity_check(syn, f_high, taus, lif, x_thr, trials, c.o.seed);
  Table t{{"f_tau", "synapses", "predicted_nA", "actual_nA", "relative_deviation"}, {}};
  for (const auto& p : pts) t.add({p.f_tau, double(p.synapses), p.predicted, p.actual, p.relative_deviation()});
  c.out.tables.push_back({"validity.csv", std::move(t)});
}

}  // namespace

ExperimentOutput run_experiment(const ExperimentInfo& info, const Settings& settings,
                                const RunOptions& options) {
  Ctx c{settings, options, {}};
  const std::string& n = info.name;
  if (n == "fig7") run_fig7(c);
  else if (n == "fig8") run_fig8(c);
  else if (n == "fig9") run_fig9(c);
  else if (n == "fig10") run_fig10(c);
  else if (n == "fig12") run_fig12(c);
  else if (n == "fig13") run_fig13(c);
  else if (n == "fig14") run_fig14(c);
  else if (n == "single_spike") run_single_spike(c);
  else if (n == "bstdsp") run_bstdsp(c);
  else if (n == "table5") run_table5(c);
  else if (n == "capacity") run_capacity(c);
  else if (n == "validity") run_validity(c);
  else throw ConfigError("unknown experiment '" + n + "'");
  return std::move(c.out);
}

}  // namespace dendrite
