#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajgov/energy.hpp"
#include "trajgov/error.hpp"
#include "trajgov/flip_analyzer.hpp"
#include "trajgov/gate.hpp"
#include "trajgov/kinematics.hpp"
#include "trajgov/probe_harness.hpp"
#include "trajgov/regime.hpp"
#include "trajgov/spatial_sweep.hpp"

namespace trajgov {

inline constexpr const char* kToolVersion = "trajgov 1.0.0";

/// Every tunable threshold of the pipeline. Serialised verbatim into each
/// report so verdicts carry the settings that produced them.
struct AnalysisConfig {
  double epsilon = kDefaultEpsilon;
  FlipParams flip;
  SweepConfig sweep;
  EnergyParams energy;
  RegimeConfig regime;
  double decoupling_tolerance = 1e-3;
  double naive_threshold = kDefaultTheta;
  int workers = 2;
};

nlohmann::json config_to_json(const AnalysisConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected (ConfigError).
AnalysisConfig config_from_json(const nlohmann::json& j);
AnalysisConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const Interval& i);
nlohmann::json to_json(const FlipReport& r);
nlohmann::json to_json(const BandReport& r);
nlohmann::json to_json(const EnergyReport& r);
nlohmann::json to_json(const RegimeVerdict& v);
nlohmann::json to_json(const GateVerdict& v);
nlohmann::json to_json(const BatteryReport& b);
nlohmann::json to_json(const ScaffoldMatrix& m);

FlipReport flip_report_from_json(const nlohmann::json& j);
BandReport band_report_from_json(const nlohmann::json& j);
EnergyReport energy_report_from_json(const nlohmann::json& j);

// CSV exports. Tension rows are generated tokens only (token = generated
// position); the series file starts with the prompt anchor as token -1.
void write_tension_csv(const TensionField& field, const std::filesystem::path& path);
void write_profile_csv(const LayerProfile& profile, const std::filesystem::path& path);
void write_series_csv(const TokenSeries& series, const std::filesystem::path& path);
/// Reads a series file written by write_series_csv. A file without the -1
/// anchor row gets baseline 1 (values already normalised).
TokenSeries read_series_csv(const std::filesystem::path& path);

struct PairResult {
  std::string pair;
  std::string aligned_run_id;
  std::string misaligned_run_id;
  std::string model_id;
  std::string probe_id;
  bool chat_template = false;
  std::optional<GateResult> capability;
  std::optional<ScaffoldCell> scaffold;
  LayerProfile profile;
  RegimeVerdict verdict;
  GateVerdict gate_misaligned;
  GateVerdict gate_aligned;
  bool naive_blocks_misaligned = false;
  bool naive_blocks_aligned = false;
  TokenSeries series_aligned;
  TokenSeries series_misaligned;
  std::vector<std::string> warnings;
};

struct PairFailure {
  std::string pair;
  ErrorCode code = ErrorCode::PreconditionViolation;
  std::string message;
};

struct DecouplingResult {
  std::string model_id;
  std::string probe_id;
  std::string pair_on;
  std::string pair_off;
  double profile_max_delta = 0.0;
  double tss_on = 0.0;
  double tss_off = 0.0;
  bool decoupled = false;
};

struct AnalysisReport {
  std::string tool_version = kToolVersion;
  AnalysisConfig config;
  std::vector<PairResult> pairs;
  std::vector<DecouplingResult> decoupling;
  std::optional<BatteryReport> battery;
  std::optional<ScaffoldMatrix> scaffold_matrix;
  std::vector<PairFailure> errors;
  std::vector<std::string> warnings;
  std::optional<std::string> timestamp;

  bool ok() const noexcept { return errors.empty(); }
};

nlohmann::json report_to_json(const AnalysisReport& report);

/// Runs every pair of the run-set through capability gate, kinematics,
/// sweep, flip, energy, scaffold validity, regime and gate; then the
/// on/off decoupling check, the scaffold matrix (paired and unpaired
/// misaligned runs of scaffold probes) and the hallucination battery. Per-pair failures
/// are recorded and do not stop the other pairs. When out_dir is non-empty,
/// writes report.json and per-pair CSV files there.
AnalysisReport run_pipeline(const std::filesystem::path& runset, const AnalysisConfig& config,
                            const std::filesystem::path& out_dir, bool timestamp);

}  // namespace trajgov
