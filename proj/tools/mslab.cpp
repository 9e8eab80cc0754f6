#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mslab/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string spec;
  std::string n;
  std::string samples;
};

void cap_threads() {
  const char* env = std::getenv("MSLAB_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw mslab::ValidationError("MSLAB_THREADS must be a positive integer");
#ifdef _OPENMP
  omp_set_num_threads(static_cast<int>(std::min<long>(v, omp_get_max_threads())));
#endif
}

void write_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out.flush()) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path);
}

mslab::ExperimentConfig build_config(const std::string& kind, const Options& o) {
  json j = json::object();
  fs::path base = fs::current_path();
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw mslab::ValidationError("cannot open config '" + o.config + "'");
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw mslab::ValidationError("config '" + o.config + "' is not valid JSON: " + e.what());
    }
    base = fs::absolute(o.config).parent_path();
  }
  if (!j.is_object()) throw mslab::ValidationError("config: expected a JSON object");
  if (!o.spec.empty() || !o.n.empty() || !o.samples.empty()) {
    if (kind != "entropy") throw mslab::ValidationError("--spec, --n and --samples apply to entropy only");
    json& params = j["params"];
    if (params.is_null()) params = json::object();
    if (!o.spec.empty()) params["spec"] = o.spec;
    if (!o.n.empty()) params["n"] = o.n;
    if (!o.samples.empty()) {
      std::size_t used = 0;
      double s = 0.0;
      try {
        s = std::stod(o.samples, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != o.samples.size()) throw mslab::ValidationError("--samples: cannot read '" + o.samples + "'");
      params["samples"] = s;
    }
  }
  auto cfg = mslab::config_from_json(j, kind, base);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output_path = o.out;
  return cfg;
}

int do_run(const std::string& kind, const Options& o) {
  const auto cfg = build_config(kind, o);
  const auto report = mslab::run_experiment(cfg);
  fs::path json_path = cfg.output_path.empty() ? fs::path(cfg.kind + ".json") : fs::path(cfg.output_path);
  if (!cfg.output_path.empty() && fs::path(cfg.output_path).is_relative() && !o.config.empty() && o.out.empty()) {
    json_path = fs::absolute(o.config).parent_path() / cfg.output_path;
  }
  fs::path csv_path = json_path;
  csv_path.replace_extension(".csv");
  write_atomic(json_path, mslab::render(report.json));
  write_atomic(csv_path, report.csv);
  std::cerr << "mslab: wrote " << json_path.string() << " and " << csv_path.string() << "\n";
  return 0;
}

int do_validate(const std::string& kind, const Options& o) {
  const auto cfg = build_config(kind, o);
  const auto d = mslab::validate_experiment(cfg);
  for (const auto& n : d.notes) std::cout << "note: " << n << "\n";
  for (const auto& e : d.errors) std::cerr << "error: " << e << "\n";
  if (d.ok()) std::cout << "ok: " << cfg.kind << " config is valid\n";
  return d.ok() ? 0 : 2;
}

void add_common(CLI::App* cmd, Options& o, bool entropy_flags) {
  cmd->add_option("--config,-c", o.config, "experiment config (JSON)");
  cmd->add_option("--seed", o.seed, "override the config seed");
  cmd->add_option("--out,-o", o.out, "report path; the CSV goes next to it");
  if (entropy_flags) {
    cmd->add_option("--spec", o.spec, "neighborhood spec file (entropy)");
    cmd->add_option("--n", o.n, "matrix sizes, e.g. 4..12 or 4..12:2 (entropy)");
    cmd->add_option("--samples", o.samples, "proposal draws per n, e.g. 1e6 (entropy)");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mslab: matrix microstate experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mslab::version());

  Options opts;
  std::string run_kind;
  std::string validate_kind;
  std::string chosen;

  for (const auto& kind : mslab::experiment_kinds()) {
    auto* cmd = app.add_subcommand(kind, "run the " + kind + " experiment");
    add_common(cmd, opts, kind == "entropy");
    cmd->callback([&chosen, kind] { chosen = kind; });
  }
  auto* run = app.add_subcommand("run", "run an experiment: run <kind> [options]");
  run->add_option("kind", run_kind, "experiment kind")->required();
  add_common(run, opts, true);
  auto* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("kind", validate_kind, "experiment kind (defaults to the config's)");
  add_common(validate, opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    cap_threads();
    if (*validate) return do_validate(validate_kind, opts);
    if (*run) return do_run(run_kind, opts);
    return do_run(chosen, opts);
  } catch (const mslab::ValidationError& e) {
    std::cerr << "mslab: invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const mslab::NumericalFailure& e) {
    std::cerr << "mslab: numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "mslab: error: " << e.what() << "\n";
    return 3;
  }
}
