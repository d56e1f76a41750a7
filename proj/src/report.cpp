#include "trajgov/report.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <functional>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "trajgov/error.hpp"

namespace trajgov {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json opt(const std::optional<Interval>& v) { return v ? to_json(*v) : json(nullptr); }

std::optional<Interval> interval_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  if (j.is_string()) return parse_interval(j.get<std::string>());
  return Interval{j.at("first").get<int>(), j.at("last").get<int>()};
}

template <typename T>
std::optional<T> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

// Shortest round-trip representation, independent of locale.
std::string num(double v) {
  json j = v;
  return j.dump();
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

json config_to_json(const AnalysisConfig& c) {
  return json{
      {"epsilon", c.epsilon},
      {"theta", c.flip.theta},
      {"persistence_k", c.flip.k},
      {"band_threshold", c.sweep.band_threshold},
      {"authority_peak", c.sweep.authority_peak},
      {"inversion_threshold", c.sweep.inversion_threshold},
      {"weak_band_threshold", c.sweep.weak_threshold},
      {"late_start_fraction", c.sweep.late_start},
      {"min_inversion_zone", c.sweep.min_zone},
      {"zero_energy", c.energy.zero_energy},
      {"low_confidence_fraction", c.energy.low_confidence_fraction},
      {"governable_ratio", c.regime.governable_ratio},
      {"inverted_ratio", c.regime.inverted_ratio},
      {"decoupling_tolerance", c.decoupling_tolerance},
      {"naive_threshold", c.naive_threshold},
      {"workers", c.workers},
  };
}

AnalysisConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
  AnalysisConfig c;
  const std::map<std::string, std::function<void(const json&)>> setters{
      {"epsilon", [&](const json& v) { c.epsilon = v.get<double>(); }},
      {"theta", [&](const json& v) { c.flip.theta = v.get<double>(); }},
      {"persistence_k", [&](const json& v) { c.flip.k = v.get<int>(); }},
      {"band_threshold", [&](const json& v) { c.sweep.band_threshold = v.get<double>(); }},
      {"authority_peak", [&](const json& v) { c.sweep.authority_peak = v.get<double>(); }},
      {"inversion_threshold", [&](const json& v) { c.sweep.inversion_threshold = v.get<double>(); }},
      {"weak_band_threshold", [&](const json& v) { c.sweep.weak_threshold = v.get<double>(); }},
      {"late_start_fraction", [&](const json& v) { c.sweep.late_start = v.get<double>(); }},
      {"min_inversion_zone", [&](const json& v) { c.sweep.min_zone = v.get<int>(); }},
      {"zero_energy", [&](const json& v) { c.energy.zero_energy = v.get<double>(); }},
      {"low_confidence_fraction", [&](const json& v) { c.energy.low_confidence_fraction = v.get<double>(); }},
      {"governable_ratio", [&](const json& v) { c.regime.governable_ratio = v.get<double>(); }},
      {"inverted_ratio", [&](const json& v) { c.regime.inverted_ratio = v.get<double>(); }},
      {"decoupling_tolerance", [&](const json& v) { c.decoupling_tolerance = v.get<double>(); }},
      {"naive_threshold", [&](const json& v) { c.naive_threshold = v.get<double>(); }},
      {"workers", [&](const json& v) { c.workers = v.get<int>(); }},
  };
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigError, "config key '" + key + "': " + e.what());
    }
  }
  c.flip.epsilon = c.epsilon;
  if (!(c.epsilon > 0.0)) throw Error(ErrorCode::ConfigError, "epsilon must be > 0");
  if (!(c.flip.theta > 0.0)) throw Error(ErrorCode::ConfigError, "theta must be > 0");
  if (c.flip.k < 1) throw Error(ErrorCode::ConfigError, "persistence_k must be >= 1");
  if (c.workers < 1) throw Error(ErrorCode::ConfigError, "workers must be >= 1");
  return c;
}

AnalysisConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "config " + path.string());
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// JSON views

json to_json(const Interval& i) { return format_interval(i); }

json to_json(const FlipReport& r) {
  return json{{"commit_token", r.commit_token},
              {"spike_onset", opt(r.spike_onset)},
              {"spike_margin", opt(r.spike_margin)},
              {"tss_ratio", r.tss_ratio},
              {"classification", to_string(r.classification)},
              {"threshold_used", r.threshold_used},
              {"k_used", r.k_used},
              {"band", to_json(r.band)},
              {"baseline", r.baseline}};
}

json to_json(const BandReport& r) {
  return json{{"pattern", to_string(r.pattern)},
              {"band", opt(r.band)},
              {"peak_ratio", r.peak_ratio},
              {"peak_layer", r.peak_layer},
              {"inversion_zone", opt(r.inversion_zone)},
              {"min_ratio", r.min_ratio},
              {"min_layer", r.min_layer},
              {"relative_start", r.relative_start},
              {"weak_band", opt(r.weak_band)},
              {"config",
               {{"band_threshold", r.config.band_threshold},
                {"authority_peak", r.config.authority_peak},
                {"inversion_threshold", r.config.inversion_threshold},
                {"weak_band_threshold", r.config.weak_threshold},
                {"late_start_fraction", r.config.late_start},
                {"min_inversion_zone", r.config.min_zone}}}};
}

json to_json(const EnergyReport& r) {
  return json{{"sum_aligned", r.sum_aligned},
              {"sum_misaligned", r.sum_misaligned},
              {"ratio", r.ratio},
              {"band", opt(r.band)},
              {"band_sum_aligned", opt(r.band_sum_aligned)},
              {"band_sum_misaligned", opt(r.band_sum_misaligned)},
              {"band_ratio", opt(r.band_ratio)},
              {"decoupling_flag", r.decoupling_flag},
              {"cells", r.cells},
              {"invalid_aligned", r.invalid_aligned},
              {"invalid_misaligned", r.invalid_misaligned},
              {"low_confidence", r.low_confidence}};
}

json to_json(const RegimeVerdict& v) {
  return json{{"regime", to_string(v.regime)},
              {"governable", v.governable},
              {"scaffold_valid", v.scaffold_valid},
              {"spatial", to_json(v.spatial)},
              {"energy", to_json(v.energy)},
              {"flip", to_json(v.flip)},
              {"config", {{"governable_ratio", v.config.governable_ratio}, {"inverted_ratio", v.config.inverted_ratio}}}};
}

json to_json(const GateVerdict& v) {
  return json{{"action", to_string(v.action)},
              {"trigger_token", opt(v.trigger_token)},
              {"regime", to_string(v.regime)},
              {"threshold", v.threshold},
              {"reason", v.reason}};
}

json to_json(const BatteryReport& b) {
  json probes = json::array();
  for (const auto& p : b.probes) {
    probes.push_back(json{{"run_id", p.run_id},
                          {"probe_id", p.probe_id},
                          {"model_id", p.model_id},
                          {"chat_template", p.chat_template},
                          {"max_q", p.max_q},
                          {"max_ratio", p.max_ratio},
                          {"spike_onset", opt(p.spike_onset)},
                          {"commit_token", p.commit_token},
                          {"predictive", p.predictive},
                          {"outcome", p.outcome},
                          {"generated_text", p.generated_text}});
  }
  return json{{"probes", probes},
              {"predictive_count", b.predictive_count},
              {"probe_count", b.probes.size()},
              {"theta", b.theta},
              {"k", b.k}};
}

json to_json(const ScaffoldMatrix& m) {
  json columns = json::array();
  for (const auto& c : m.columns) {
    columns.push_back(json{{"model_id", c.model_id},
                           {"chat_template", c.chat_template},
                           {"valid", m.valid_count(c)},
                           {"scored", m.scored_count(c)}});
  }
  json cells = json::array();
  for (const auto& row : m.rows) {
    for (const auto& c : m.columns) {
      if (const auto cell = m.cell(row, c)) {
        cells.push_back(json{{"scaffold_id", row},
                             {"model_id", c.model_id},
                             {"chat_template", c.chat_template},
                             {"cell", to_string(*cell)}});
      }
    }
  }
  return json{{"rows", m.rows}, {"columns", columns}, {"cells", cells}};
}

FlipReport flip_report_from_json(const json& j) {
  try {
    FlipReport r;
    r.commit_token = j.at("commit_token").get<int>();
    r.spike_onset = opt_from<int>(j, "spike_onset");
    r.spike_margin = opt_from<int>(j, "spike_margin");
    r.tss_ratio = j.at("tss_ratio").get<double>();
    r.classification = flip_class_from_string(j.at("classification").get<std::string>());
    r.threshold_used = j.value("threshold_used", kDefaultTheta);
    r.k_used = j.value("k_used", kDefaultPersistence);
    if (j.contains("band")) r.band = interval_from(j.at("band")).value_or(Interval{});
    r.baseline = j.value("baseline", 0.0);
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("flip report: ") + e.what());
  }
}

BandReport band_report_from_json(const json& j) {
  try {
    BandReport r;
    r.pattern = spatial_pattern_from_string(j.at("pattern").get<std::string>());
    r.band = j.contains("band") ? interval_from(j.at("band")) : std::nullopt;
    r.peak_ratio = j.value("peak_ratio", 0.0);
    r.peak_layer = j.value("peak_layer", 0);
    r.inversion_zone = j.contains("inversion_zone") ? interval_from(j.at("inversion_zone")) : std::nullopt;
    r.min_ratio = j.value("min_ratio", 0.0);
    r.min_layer = j.value("min_layer", 0);
    r.relative_start = j.value("relative_start", 0.0);
    r.weak_band = j.contains("weak_band") ? interval_from(j.at("weak_band")) : std::nullopt;
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("band report: ") + e.what());
  }
}

EnergyReport energy_report_from_json(const json& j) {
  try {
    EnergyReport r;
    r.sum_aligned = j.at("sum_aligned").get<double>();
    r.sum_misaligned = j.at("sum_misaligned").get<double>();
    r.ratio = j.at("ratio").get<double>();
    r.band = j.contains("band") ? interval_from(j.at("band")) : std::nullopt;
    r.band_sum_aligned = opt_from<double>(j, "band_sum_aligned");
    r.band_sum_misaligned = opt_from<double>(j, "band_sum_misaligned");
    r.band_ratio = opt_from<double>(j, "band_ratio");
    r.decoupling_flag = j.value("decoupling_flag", false);
    r.cells = j.value("cells", std::size_t{0});
    r.invalid_aligned = j.value("invalid_aligned", std::size_t{0});
    r.invalid_misaligned = j.value("invalid_misaligned", std::size_t{0});
    r.low_confidence = j.value("low_confidence", false);
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("energy report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV

void write_tension_csv(const TensionField& field, const fs::path& path) {
  std::ostringstream out;
  out << "token,layer,q,valid\n";
  for (int t = 1; t < field.tokens(); ++t) {
    for (int l = field.first_layer(); l <= field.last_layer(); ++l) {
      out << t - 1 << ',' << l << ',' << num(field.at(t, l)) << ',' << (field.is_valid(t, l) ? 1 : 0) << '\n';
    }
  }
  write_text(path, out.str());
}

void write_profile_csv(const LayerProfile& profile, const fs::path& path) {
  std::ostringstream out;
  out << "layer,ratio,valid\n";
  for (int l = profile.first_layer(); l <= profile.last_layer(); ++l) {
    out << l << ',' << num(profile.at(l)) << ',' << (profile.is_valid(l) ? 1 : 0) << '\n';
  }
  write_text(path, out.str());
}

void write_series_csv(const TokenSeries& series, const fs::path& path) {
  std::ostringstream out;
  out << "token,value\n";
  out << "-1," << num(series.baseline) << '\n';
  for (std::size_t i = 0; i < series.values.size(); ++i) out << i << ',' << num(series.values[i]) << '\n';
  write_text(path, out.str());
}

TokenSeries read_series_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "series " + path.string());
  TokenSeries s;
  std::optional<double> baseline;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.find_first_of("0123456789") != 0 && line[0] != '-') continue;  // header
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::FormatError, path.string() + ":" + std::to_string(line_no));
    try {
      std::size_t used = 0;
      const std::string tok_text = line.substr(0, comma);
      const std::string val_text = line.substr(comma + 1);
      const int token = std::stoi(tok_text, &used);
      if (used != tok_text.size()) throw std::invalid_argument("token");
      const double value = std::stod(val_text, &used);
      if (used != val_text.size() || !std::isfinite(value)) throw std::invalid_argument("value");
      if (token == -1) {
        baseline = value;
      } else if (token != static_cast<int>(s.values.size())) {
        throw std::invalid_argument("tokens must be consecutive from 0");
      } else {
        s.values.push_back(value);
      }
    } catch (const std::exception&) {
      throw Error(ErrorCode::FormatError, path.string() + ":" + std::to_string(line_no) + ": bad row '" + line + "'");
    }
  }
  s.baseline = baseline.value_or(1.0);
  if (!(s.baseline > 0.0)) throw Error(ErrorCode::ZeroBaseline, path.string() + ": anchor value must be > 0");
  s.band = Interval{0, 0};
  return s;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

struct PairInput {
  std::string label;
  std::vector<fs::path> manifests;
};

json pair_to_json(const PairResult& p) {
  json warnings = p.warnings;
  return json{{"pair", p.pair},
              {"aligned_run_id", p.aligned_run_id},
              {"misaligned_run_id", p.misaligned_run_id},
              {"model_id", p.model_id},
              {"probe_id", p.probe_id},
              {"chat_template", p.chat_template},
              {"capability", p.capability ? json(to_string(*p.capability)) : json(nullptr)},
              {"scaffold", p.scaffold ? json(to_string(*p.scaffold)) : json(nullptr)},
              {"verdict", to_json(p.verdict)},
              {"gate_misaligned", to_json(p.gate_misaligned)},
              {"gate_aligned", to_json(p.gate_aligned)},
              {"naive_gate", {{"blocks_misaligned", p.naive_blocks_misaligned},
                              {"blocks_aligned", p.naive_blocks_aligned}}},
              {"warnings", warnings}};
}

PairResult analyze_pair(const std::string& label, const HiddenTrajectory& x, const HiddenTrajectory& y,
                        const AnalysisConfig& cfg, const ProbeCatalog* catalog) {
  const bool x_aligned = x.manifest().condition == Condition::Aligned;
  const HiddenTrajectory& aligned = x_aligned ? x : y;
  const HiddenTrajectory& misaligned = x_aligned ? y : x;
  check_pair(aligned.manifest(), misaligned.manifest());

  PairResult r;
  r.pair = label;
  r.aligned_run_id = aligned.manifest().run_id;
  r.misaligned_run_id = misaligned.manifest().run_id;
  r.model_id = aligned.manifest().model_id;
  r.probe_id = aligned.manifest().probe_id;
  r.chat_template = aligned.manifest().chat_template;

  std::vector<std::string> patterns{kNumberPattern};
  const ProbeSpec* probe = nullptr;
  if (catalog) {
    probe = &find_probe(*catalog, r.probe_id);
    patterns = probe->answer_patterns;
    r.capability = capability_gate(aligned, *probe);
    if (*r.capability != GateResult::Pass) {
      throw Error(ErrorCode::PreconditionViolation, "capability gate: aligned run " + r.aligned_run_id +
                                                        " did not produce the expected answer");
    }
  } else {
    r.warnings.push_back("no probe catalog: capability gate and scaffold validity not checked");
  }

  const TensionField fa = tension_field(aligned, cfg.epsilon);
  const TensionField fm = tension_field(misaligned, cfg.epsilon);
  r.profile = layer_profile(fa, fm);
  const BandReport spatial = classify_spatial(r.profile, cfg.sweep);
  const std::optional<Interval> flip_band = spatial.band ? spatial.band : spatial.inversion_zone;
  FlipParams fp = cfg.flip;
  fp.epsilon = cfg.epsilon;
  const FlipReport flip = analyze_flip(aligned, fa, misaligned, fm, flip_band, fp, patterns);
  const EnergyReport energy = energy_ratio(fa, fm, spatial.band, cfg.energy);

  bool scaffold_valid = true;
  if (probe) {
    r.scaffold = scaffold_validity(misaligned, *probe);
    scaffold_valid = *r.scaffold != ScaffoldCell::Refused;
    if (*r.scaffold == ScaffoldCell::Uncontrolled) {
      r.warnings.push_back("scaffold uncontrolled: misaligned answer is neither expected nor target");
    }
  }
  r.verdict = classify_regime(spatial, energy, flip, scaffold_valid, cfg.regime);

  r.series_aligned = token_series(fa, flip.band);
  r.series_misaligned = token_series(fm, flip.band);
  r.gate_misaligned = evaluate_gate(r.series_misaligned, r.verdict.regime, fp.theta, fp.k);
  r.gate_aligned = evaluate_gate(r.series_aligned, r.verdict.regime, fp.theta, fp.k);
  r.naive_blocks_misaligned = naive_gate(r.series_misaligned, cfg.naive_threshold);
  r.naive_blocks_aligned = naive_gate(r.series_aligned, cfg.naive_threshold);

  if (energy.low_confidence) {
    const double frac = static_cast<double>(std::max(energy.invalid_aligned, energy.invalid_misaligned)) /
                        static_cast<double>(std::max<std::size_t>(energy.cells, 1));
    r.warnings.push_back("low confidence: invalid-cell fraction " + num(frac));
  }
  if (r.series_aligned.empty_tokens + r.series_misaligned.empty_tokens > 0) {
    r.warnings.push_back("tokens with no valid cell in band: " +
                         std::to_string(r.series_aligned.empty_tokens + r.series_misaligned.empty_tokens));
  }
  return r;
}

void export_pair(const PairResult& r, const HiddenTrajectory& aligned, const HiddenTrajectory& misaligned,
                 const AnalysisConfig& cfg, const fs::path& dir) {
  write_tension_csv(tension_field(aligned, cfg.epsilon), dir / "tension_aligned.csv");
  write_tension_csv(tension_field(misaligned, cfg.epsilon), dir / "tension_misaligned.csv");
  write_profile_csv(r.profile, dir / "profile.csv");
  write_series_csv(r.series_aligned, dir / "series_aligned.csv");
  write_series_csv(r.series_misaligned, dir / "series_misaligned.csv");
}

struct ScaffoldEntry {
  std::string scaffold_id;
  ScaffoldColumn column;
  ScaffoldCell cell;
};

const ProbeSpec* scaffold_probe(const ProbeCatalog* catalog, const RunManifest& m) {
  if (!catalog) return nullptr;
  const auto it = catalog->find(m.probe_id);
  if (it == catalog->end() || !it->second.scaffold_id) return nullptr;
  return &it->second;
}

// Rows and columns in sorted order so the report does not depend on run order.
ScaffoldMatrix assemble_matrix(const std::vector<ScaffoldEntry>& entries) {
  ScaffoldMatrix m;
  for (const auto& e : entries) {
    m.rows.push_back(e.scaffold_id);
    m.columns.push_back(e.column);
    m.cells[{e.scaffold_id, e.column}] = e.cell;
  }
  std::sort(m.rows.begin(), m.rows.end());
  m.rows.erase(std::unique(m.rows.begin(), m.rows.end()), m.rows.end());
  std::sort(m.columns.begin(), m.columns.end());
  m.columns.erase(std::unique(m.columns.begin(), m.columns.end()), m.columns.end());
  return m;
}

std::string now_iso8601() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

json report_to_json(const AnalysisReport& report) {
  json pairs = json::array();
  for (const auto& p : report.pairs) pairs.push_back(pair_to_json(p));
  json decoupling = json::array();
  for (const auto& d : report.decoupling) {
    decoupling.push_back(json{{"model_id", d.model_id},
                              {"probe_id", d.probe_id},
                              {"pair_on", d.pair_on},
                              {"pair_off", d.pair_off},
                              {"profile_max_delta", d.profile_max_delta},
                              {"tss_on", d.tss_on},
                              {"tss_off", d.tss_off},
                              {"decoupling_flag", d.decoupled}});
  }
  json errors = json::array();
  for (const auto& e : report.errors) {
    errors.push_back(json{{"pair", e.pair}, {"code", std::string(error_code_name(e.code))}, {"message", e.message}});
  }
  json j{{"tool_version", report.tool_version},
         {"config", config_to_json(report.config)},
         {"pairs", pairs},
         {"decoupling", decoupling},
         {"hallucination_battery", report.battery ? to_json(*report.battery) : json(nullptr)},
         {"scaffold_matrix", report.scaffold_matrix ? to_json(*report.scaffold_matrix) : json(nullptr)},
         {"errors", errors},
         {"warnings", report.warnings},
         {"disclaimers", {{"geometry", kGeometricDisclaimer}, {"thresholds", kIllustrativeThresholdDisclaimer}}}};
  if (report.timestamp) j["generated_at"] = *report.timestamp;
  return j;
}

AnalysisReport run_pipeline(const fs::path& runset_path, const AnalysisConfig& cfg, const fs::path& out_dir,
                            bool timestamp) {
  AnalysisReport report;
  report.config = cfg;
  if (timestamp) report.timestamp = now_iso8601();

  const RunSet set = load_runset(runset_path);
  std::optional<ProbeCatalog> catalog;
  if (set.probe_dir) catalog = load_catalog(*set.probe_dir);
  const ProbeCatalog* cat = catalog ? &*catalog : nullptr;

  std::map<std::string, PairInput> grouped;
  std::vector<HiddenTrajectory> halluc_runs;
  std::vector<ScaffoldEntry> scaffold_cells;
  for (const auto& entry : set.runs) {
    if (entry.pair) {
      auto& in = grouped[*entry.pair];
      in.label = *entry.pair;
      in.manifests.push_back(entry.manifest);
      continue;
    }
    try {
      HiddenTrajectory run = load_run(entry.manifest);
      const RunManifest& m = run.manifest();
      if (m.condition == Condition::Hallucination) {
        halluc_runs.push_back(std::move(run));
      } else if (const ProbeSpec* probe = scaffold_probe(cat, m); probe && m.condition == Condition::Misaligned) {
        scaffold_cells.push_back({*probe->scaffold_id, {m.model_id, m.chat_template}, scaffold_validity(run, *probe)});
      } else {
        report.warnings.push_back("unpaired run " + run.manifest().run_id + " ignored");
      }
    } catch (const Error& e) {
      report.errors.push_back({entry.manifest.filename().string(), e.code(), e.what()});
    }
  }

  if (grouped.empty() && halluc_runs.empty()) {
    report.errors.push_back({"*", ErrorCode::PreconditionViolation, "no pairs"});
  }

  std::vector<PairInput> inputs;
  for (auto& [label, in] : grouped) inputs.push_back(std::move(in));
  std::vector<std::optional<PairResult>> results(inputs.size());
  std::vector<std::optional<PairFailure>> failures(inputs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      const PairInput& in = inputs[i];
      try {
        if (in.manifests.size() != 2) {
          throw Error(ErrorCode::PairMismatch, "pair '" + in.label + "' lists " + std::to_string(in.manifests.size()) +
                                                   " runs, expected 2");
        }
        const HiddenTrajectory x = load_run(in.manifests[0]);
        const HiddenTrajectory y = load_run(in.manifests[1]);
        PairResult r = analyze_pair(in.label, x, y, cfg, cat);
        if (!out_dir.empty()) {
          const bool x_aligned = x.manifest().condition == Condition::Aligned;
          export_pair(r, x_aligned ? x : y, x_aligned ? y : x, cfg, out_dir / "pairs" / in.label);
        }
        results[i] = std::move(r);
      } catch (const Error& e) {
        failures[i] = PairFailure{in.label, e.code(), e.what()};
      } catch (const std::exception& e) {
        failures[i] = PairFailure{in.label, ErrorCode::IoError, e.what()};
      }
    }
  };
  {
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(std::max(cfg.workers, 1)), inputs.size());
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
  }

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (results[i]) report.pairs.push_back(std::move(*results[i]));
    if (failures[i]) report.errors.push_back(std::move(*failures[i]));
  }
  std::sort(report.pairs.begin(), report.pairs.end(), [](const PairResult& a, const PairResult& b) {
    return std::tie(a.aligned_run_id, a.pair) < std::tie(b.aligned_run_id, b.pair);
  });

  for (const auto& p : report.pairs) {
    const auto it = cat ? cat->find(p.probe_id) : ProbeCatalog::const_iterator{};
    if (cat && it != cat->end() && it->second.scaffold_id && p.scaffold) {
      scaffold_cells.push_back({*it->second.scaffold_id, {p.model_id, p.chat_template}, *p.scaffold});
    }
  }
  if (!scaffold_cells.empty()) report.scaffold_matrix = assemble_matrix(scaffold_cells);

  // Same model and probe measured with and without the chat template.
  for (auto& on : report.pairs) {
    if (!on.chat_template) continue;
    for (auto& off : report.pairs) {
      if (off.chat_template || off.model_id != on.model_id || off.probe_id != on.probe_id) continue;
      DecouplingResult d;
      d.model_id = on.model_id;
      d.probe_id = on.probe_id;
      d.pair_on = on.pair;
      d.pair_off = off.pair;
      d.profile_max_delta = profile_max_delta(on.profile, off.profile);
      d.tss_on = on.verdict.flip.tss_ratio;
      d.tss_off = off.verdict.flip.tss_ratio;
      d.decoupled = classify_decoupling(on.profile, off.profile, d.tss_on, d.tss_off, cfg.decoupling_tolerance);
      if (d.decoupled) {
        on.verdict.energy.decoupling_flag = true;
        off.verdict.energy.decoupling_flag = true;
      }
      report.decoupling.push_back(d);
    }
  }

  if (!halluc_runs.empty()) {
    std::sort(halluc_runs.begin(), halluc_runs.end(), [](const HiddenTrajectory& a, const HiddenTrajectory& b) {
      return a.manifest().run_id < b.manifest().run_id;
    });
    try {
      report.battery = hallucination_battery(halluc_runs, cfg.flip.theta, cfg.flip.k, cfg.epsilon, cat);
    } catch (const Error& e) {
      report.errors.push_back({"hallucination_battery", e.code(), e.what()});
    }
  }

  if (!out_dir.empty()) write_text(out_dir / "report.json", report_to_json(report).dump(2) + "\n");
  return report;
}

}  // namespace trajgov
