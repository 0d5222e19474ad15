// dendrite: runs the named experiments and writes CSV tables plus a manifest.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dendrite/csv.hpp"
#include "dendrite/datasets.hpp"
#include "dendrite/experiments.hpp"

namespace fs = std::filesystem;
using namespace dendrite;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kRuntime = 4 };

void print_catalog(const std::string& filter) {
  for (const ExperimentInfo* e : list_experiments(filter)) {
    std::cout << e->name << '\t' << e->target << '\t' << e->summary << '\n';
  }
}

void print_params(const ExperimentInfo& e) {
  std::cout << e.name << " (" << e.target << "): " << e.summary << '\n';
  for (const auto& p : e.params) {
    std::cout << "  " << p.key << '=' << p.fallback << "\t" << p.help << '\n';
  }
}

struct Manifest {
  std::string experiment;
  RunOptions options;
  std::map<std::string, std::string> settings;
  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<std::string> outputs;
  std::vector<std::string> notes;
  std::string status = "running";
  std::string error;
  double seconds = 0.0;

  void write(const fs::path& path) const {
    std::ofstream out(path);
    out << "# dendrite run manifest; the [config] block is a valid --config file\n"
        << "experiment=" << experiment << '\n'
        << "seed=" << options.seed << '\n'
        << "scale=" << csv::fmt(options.scale) << '\n'
        << "full_scale=" << (options.scale == 1.0 ? "yes" : "no (desk scale)") << '\n'
        << "threads=" << options.threads << '\n'
        << "status=" << status << '\n';
    if (!error.empty()) out << "error=" << error << '\n';
    out << "seconds=" << csv::fmt(seconds) << '\n';
    out << "[config]\n";
    for (const auto& [k, v] : settings) out << k << '=' << v << '\n';
    out << "[inputs]\n";
    for (const auto& [name, sha] : inputs) out << name << '=' << sha << '\n';
    out << "[outputs]\n";
    for (const auto& o : outputs) out << o << '\n';
    out << "[notes]\n";
    for (const auto& n : notes) out << n << '\n';
  }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dendritic structural-plasticity experiments"};
  app.require_subcommand(0, 1);

  std::string experiment, config_path, out_dir = "results";
  std::vector<std::string> overrides;
  RunOptions options;
  bool show_params = false;
  app.add_option("--experiment,-e", experiment, "Experiment name (see 'list')");
  app.add_option("--config,-c", config_path, "key=value settings file")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Extra key=value setting (repeatable, wins over --config)");
  app.add_option("--seed", options.seed, "Master seed")->capture_default_str();
  app.add_option("--scale", options.scale, "Multiplier on pattern and trial counts; 1 is full scale")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--out,-o", out_dir, "Output directory")->capture_default_str();
  app.add_option("--threads,-j", options.threads, "Worker threads")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1024}))
      ->capture_default_str();
  app.add_flag("--params", show_params, "Print the experiment's keys and defaults, then exit");

  std::string filter;
  CLI::App* list = app.add_subcommand("list", "List experiments whose name or target matches a filter");
  list->add_option("filter", filter, "Case-insensitive substring");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  if (list->parsed()) {
    print_catalog(filter);
    return kOk;
  }
  if (experiment.empty()) {
    std::cerr << "error: --experiment is required (try 'list')\n";
    return kUsage;
  }
  const ExperimentInfo* info = find_experiment(experiment);
  if (!info) {
    std::cerr << "error: unknown experiment '" << experiment << "' (try 'list')\n";
    return kUsage;
  }
  if (show_params) {
    print_params(*info);
    return kOk;
  }

  Manifest manifest;
  manifest.experiment = info->name;
  manifest.options = options;
  std::map<std::string, std::string> values;
  try {
    if (!config_path.empty()) {
      const std::string text = read_file(config_path);
      std::istringstream in(text);
      values = parse_config(in);
      manifest.inputs.emplace_back("config:" + fs::path(config_path).filename().string(),
                                   git_blob_sha1(text));
    }
    for (const auto& kv : overrides) {
      std::istringstream in(kv);
      for (const auto& [k, v] : parse_config(in)) values[k] = v;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }

  std::optional<Settings> settings;
  try {
    settings.emplace(*info, values);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    print_params(*info);
    return kUsage;
  }
  manifest.settings = settings->all();

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << "error: cannot create " << out_dir << ": " << ec.message() << '\n';
    return kRuntime;
  }
  const fs::path manifest_path = fs::path(out_dir) / (info->name + "_manifest.txt");
  manifest.write(manifest_path);

  const auto t0 = std::chrono::steady_clock::now();
  int rc = kOk;
  try {
    ExperimentOutput result = run_experiment(*info, *settings, options);
    for (const auto& [name, table] : result.tables) {
      std::ofstream f(fs::path(out_dir) / name);
      table.write_csv(f);
      if (!f) throw std::runtime_error("cannot write " + name);
      manifest.outputs.push_back(name);
    }
    manifest.notes = std::move(result.notes);
    if (info->name == "table5") {
      const std::string dir = settings->text("data_dir");
      for (const auto& name : csv::split(settings->text("datasets"))) {
        if (const auto spec = find_dataset(name)) {
          const fs::path p = (dir.empty() ? default_data_dir() : fs::path(dir)) / spec->file;
          manifest.inputs.emplace_back("data:" + spec->file, git_blob_sha1(read_file(p)));
        }
      }
    }
    manifest.status = "complete";
  } catch (const ConfigError& e) {
    manifest.status = "failed";
    manifest.error = e.what();
    rc = kUsage;
  } catch (const DataError& e) {
    manifest.status = "failed";
    manifest.error = e.what();
    rc = kData;
  } catch (const std::exception& e) {
    manifest.status = "failed";
    manifest.error = e.what();
    rc = kRuntime;
  }
  manifest.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest.write(manifest_path);
  if (rc != kOk) {
    std::cerr << "error: " << manifest.error << '\n';
  } else {
    std::cout << "wrote " << manifest.outputs.size() << " tables and " << manifest_path.string() << '\n';
  }
  return rc;
}
