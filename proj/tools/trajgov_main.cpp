#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trajgov/error.hpp"
#include "trajgov/report.hpp"
#include "trajgov/synth.hpp"

#ifndef TRAJGOV_DEFAULT_PROBES
#define TRAJGOV_DEFAULT_PROBES ""
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace trajgov;

namespace {

struct Globals {
  std::string config;
  std::string out;
  bool no_timestamp = false;
};

AnalysisConfig config_of(const Globals& g) { return g.config.empty() ? AnalysisConfig{} : load_config(g.config); }

void emit(const Globals& g, const std::string& name, const json& j) {
  std::cout << j.dump(2) << '\n';
  if (g.out.empty()) return;
  fs::create_directories(g.out);
  std::ofstream out(fs::path(g.out) / (name + ".json"));
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + (fs::path(g.out) / (name + ".json")).string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
  }
}

std::vector<std::string> patterns_for(const RunManifest& m, const std::string& probe_dir) {
  if (probe_dir.empty()) return {kNumberPattern};
  const ProbeCatalog catalog = load_catalog(probe_dir);
  return find_probe(catalog, m.probe_id).answer_patterns;
}

std::optional<Interval> band_of(const std::string& text) {
  if (text.empty()) return std::nullopt;
  return parse_interval(text);
}

struct PairArgs {
  std::string aligned;
  std::string misaligned;
  std::string band;
  std::string probes;
};

void add_pair_options(CLI::App* cmd, PairArgs& a) {
  cmd->add_option("--aligned", a.aligned, "Aligned run manifest")->required()->check(CLI::ExistingFile);
  cmd->add_option("--misaligned", a.misaligned, "Misaligned run manifest")->required()->check(CLI::ExistingFile);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory tension analysis over recorded hidden-state runs"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Analysis config JSON")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--no-timestamp", g.no_timestamp, "Omit the generation timestamp from reports");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate runs and print their shapes");
  std::vector<std::string> ingest_paths;
  ingest->add_option("paths", ingest_paths, "Manifests or run-set files")->required()->check(CLI::ExistingFile);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate synthetic runs from a profile or the fixture suite");
  std::string synth_profile;
  bool synth_suite = false;
  std::string synth_probes = TRAJGOV_DEFAULT_PROBES;
  auto* synth_profile_opt = synth->add_option("--profile", synth_profile, "Profile JSON")->check(CLI::ExistingFile);
  auto* synth_suite_flag = synth->add_flag("--suite", synth_suite, "Emit the calibrated fixture suite");
  synth_profile_opt->excludes(synth_suite_flag);
  synth->add_option("--probes", synth_probes, "Probe catalog copied next to the suite");

  // flip / sweep / energy
  PairArgs flip_args, sweep_args, energy_args;
  double theta = kDefaultTheta;
  int k = kDefaultPersistence;
  auto* flip = app.add_subcommand("flip", "Spike onset, commit token and margin for one pair");
  add_pair_options(flip, flip_args);
  flip->add_option("--band", flip_args.band, "Layer band a:b (default: full interior stack)");
  flip->add_option("--probes", flip_args.probes, "Probe catalog for answer patterns");
  flip->add_option("--theta", theta, "Spike threshold multiple of baseline");
  flip->add_option("--k", k, "Persistence in tokens");

  auto* sweep = app.add_subcommand("sweep", "Per-layer ratio profile and spatial pattern for one pair");
  add_pair_options(sweep, sweep_args);

  auto* energy = app.add_subcommand("energy", "Full-stack and band tension sums for one pair");
  add_pair_options(energy, energy_args);
  energy->add_option("--band", energy_args.band, "Layer band a:b");

  // halluc
  auto* halluc = app.add_subcommand("halluc", "Hallucination battery over unpaired hallucination runs");
  std::string halluc_runset;
  double halluc_theta = kDefaultTheta;
  int halluc_k = kDefaultPersistence;
  halluc->add_option("--runs,--runset", halluc_runset, "Run-set file")->required()->check(CLI::ExistingFile);
  halluc->add_option("--theta", halluc_theta, "Spike threshold multiple of baseline");
  halluc->add_option("--k", halluc_k, "Persistence in tokens");

  // gatecheck
  auto* gatecheck = app.add_subcommand("gatecheck", "Capability gate for an aligned run");
  std::string gc_aligned;
  std::string gc_probe;
  std::string gc_probes = TRAJGOV_DEFAULT_PROBES;
  gatecheck->add_option("--aligned", gc_aligned, "Aligned run manifest")->required()->check(CLI::ExistingFile);
  gatecheck->add_option("--probe", gc_probe, "Probe id (default: the run's probe_id)");
  gatecheck->add_option("--probes", gc_probes, "Probe catalog directory");

  // classify
  auto* classify = app.add_subcommand("classify", "Regime verdict from saved sweep, energy and flip reports");
  std::string evidence;
  classify->add_option("--evidence", evidence, "Directory holding sweep.json, energy.json, flip.json")
      ->required()
      ->check(CLI::ExistingDirectory);

  // gate
  auto* gate = app.add_subcommand("gate", "Regime-aware monitoring verdict for a token series");
  std::string series_path;
  std::string regime_name;
  double gate_theta = kDefaultTheta;
  int gate_k = kDefaultPersistence;
  gate->add_option("--series", series_path, "Series CSV (token,value)")->required()->check(CLI::ExistingFile);
  gate->add_option("--regime", regime_name, "Regime name")->required();
  gate->add_option("--theta", gate_theta, "Threshold multiple of baseline");
  gate->add_option("--k", gate_k, "Persistence in tokens");

  // report
  auto* report = app.add_subcommand("report", "Full pipeline over a run-set");
  std::string report_runset;
  report->add_option("--runset", report_runset, "Run-set file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      json rows = json::array();
      std::vector<fs::path> manifests;
      for (const fs::path p : ingest_paths) {
        const json j = read_json(p);
        if (j.contains("runs")) {
          for (const auto& e : load_runset(p).runs) manifests.push_back(e.manifest);
        } else {
          manifests.push_back(p);
        }
      }
      int failed = 0;
      for (const auto& m : manifests) {
        try {
          const HiddenTrajectory t = load_run(m);
          const TensionField f = tension_field(t);
          rows.push_back(json{{"run_id", t.manifest().run_id},
                              {"shape", {t.tokens(), t.layers(), t.dim()}},
                              {"dtype", t.manifest().dtype == DType::F16 ? "f16" : "f32"},
                              {"invalid_cells", invalid_count(f, {0, f.tokens() - 1}, f.layer_span())}});
        } catch (const Error& e) {
          ++failed;
          rows.push_back(json{{"manifest", m.string()}, {"code", std::string(error_code_name(e.code()))},
                              {"message", e.what()}});
        }
      }
      emit(g, "ingest", rows);
      return failed == 0 ? 0 : 1;
    }

    if (*synth) {
      if (g.out.empty()) throw Error(ErrorCode::ConfigError, "synth needs --out");
      if (synth_suite) {
        const fs::path runset = write_fixture_suite(g.out, synth_probes);
        std::cout << runset.string() << '\n';
      } else if (!synth_profile.empty()) {
        const HiddenTrajectory t = generate(profile_from_json(read_json(synth_profile)));
        std::cout << save_run(t, fs::path(g.out) / t.manifest().run_id).string() << '\n';
      } else {
        throw Error(ErrorCode::ConfigError, "synth needs --profile or --suite");
      }
      return 0;
    }

    if (*flip) {
      AnalysisConfig cfg = config_of(g);
      if (flip->count("--theta")) cfg.flip.theta = theta;
      if (flip->count("--k")) cfg.flip.k = k;
      cfg.flip.epsilon = cfg.epsilon;
      const HiddenTrajectory a = load_run(flip_args.aligned);
      const HiddenTrajectory m = load_run(flip_args.misaligned);
      const auto patterns = patterns_for(m.manifest(), flip_args.probes);
      const FlipReport r = analyze_flip(a, m, band_of(flip_args.band), cfg.flip, patterns);
      if (!g.out.empty()) {
        write_series_csv(token_series(tension_field(a, cfg.epsilon), r.band), fs::path(g.out) / "series_aligned.csv");
        write_series_csv(token_series(tension_field(m, cfg.epsilon), r.band),
                         fs::path(g.out) / "series_misaligned.csv");
      }
      emit(g, "flip", to_json(r));
      return 0;
    }

    if (*sweep) {
      const AnalysisConfig cfg = config_of(g);
      const HiddenTrajectory a = load_run(sweep_args.aligned);
      const HiddenTrajectory m = load_run(sweep_args.misaligned);
      check_pair(a.manifest(), m.manifest());
      const LayerProfile profile = layer_profile(tension_field(a, cfg.epsilon), tension_field(m, cfg.epsilon));
      if (!g.out.empty()) write_profile_csv(profile, fs::path(g.out) / "profile.csv");
      emit(g, "sweep", to_json(classify_spatial(profile, cfg.sweep)));
      return 0;
    }

    if (*energy) {
      const AnalysisConfig cfg = config_of(g);
      const HiddenTrajectory a = load_run(energy_args.aligned);
      const HiddenTrajectory m = load_run(energy_args.misaligned);
      check_pair(a.manifest(), m.manifest());
      const EnergyReport r =
          energy_ratio(tension_field(a, cfg.epsilon), tension_field(m, cfg.epsilon), band_of(energy_args.band), cfg.energy);
      json j = to_json(r);
      j["disclaimer"] = kGeometricDisclaimer;
      emit(g, "energy", j);
      return 0;
    }

    if (*halluc) {
      AnalysisConfig cfg = config_of(g);
      if (halluc->count("--theta")) cfg.flip.theta = halluc_theta;
      if (halluc->count("--k")) cfg.flip.k = halluc_k;
      const RunSet set = load_runset(halluc_runset);
      std::optional<ProbeCatalog> catalog;
      if (set.probe_dir) catalog = load_catalog(*set.probe_dir);
      std::vector<HiddenTrajectory> runs;
      for (const auto& e : set.runs) {
        if (e.pair) continue;
        HiddenTrajectory t = load_run(e.manifest);
        if (t.manifest().condition == Condition::Hallucination) runs.push_back(std::move(t));
      }
      std::sort(runs.begin(), runs.end(),
                [](const auto& x, const auto& y) { return x.manifest().run_id < y.manifest().run_id; });
      emit(g, "halluc",
           to_json(hallucination_battery(runs, cfg.flip.theta, cfg.flip.k, cfg.epsilon, catalog ? &*catalog : nullptr)));
      return 0;
    }

    if (*gatecheck) {
      const HiddenTrajectory run = load_run(gc_aligned);
      const ProbeCatalog catalog = load_catalog(gc_probes);
      const ProbeSpec& probe = find_probe(catalog, gc_probe.empty() ? run.manifest().probe_id : gc_probe);
      const GateResult result = capability_gate(run, probe);
      const auto answer = score_answer(run.manifest().generated_text, probe.answer_patterns);
      emit(g, "gatecheck", json{{"run_id", run.manifest().run_id},
                                {"probe_id", probe.probe_id},
                                {"answer", answer ? json(*answer) : json(nullptr)},
                                {"result", to_string(result)}});
      return result == GateResult::Pass ? 0 : 1;
    }

    if (*classify) {
      const AnalysisConfig cfg = config_of(g);
      const fs::path dir = evidence;
      const BandReport spatial = band_report_from_json(read_json(dir / "sweep.json"));
      const EnergyReport en = energy_report_from_json(read_json(dir / "energy.json"));
      const FlipReport fl = flip_report_from_json(read_json(dir / "flip.json"));
      bool scaffold_valid = true;
      if (fs::exists(dir / "scaffold.json")) scaffold_valid = read_json(dir / "scaffold.json").at("scaffold_valid").get<bool>();
      json j = to_json(classify_regime(spatial, en, fl, scaffold_valid, cfg.regime));
      j["disclaimers"] = {{"geometry", kGeometricDisclaimer}, {"thresholds", kIllustrativeThresholdDisclaimer}};
      emit(g, "classify", j);
      return 0;
    }

    if (*gate) {
      const AnalysisConfig cfg = config_of(g);
      const TokenSeries series = read_series_csv(series_path);
      const Regime regime = regime_from_string(regime_name);
      json j = to_json(evaluate_gate(series, regime, gate_theta, gate_k));
      j["naive_blocks"] = naive_gate(series, cfg.naive_threshold);
      emit(g, "gate", j);
      return 0;
    }

    if (*report) {
      const AnalysisReport r = run_pipeline(report_runset, config_of(g), g.out, !g.no_timestamp);
      if (g.out.empty()) std::cout << report_to_json(r).dump(2) << '\n';
      for (const auto& e : r.errors) std::cerr << e.pair << ": " << e.message << '\n';
      return r.ok() ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", std::string(error_code_name(e.code()))}, {"message", e.what()}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}
