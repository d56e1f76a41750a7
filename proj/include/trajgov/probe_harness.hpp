#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <span>
#include <tuple>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajgov/flip_analyzer.hpp"
#include "trajgov/trajectory_store.hpp"

namespace trajgov {

/// Extracts standalone decimal numbers; the default answer extractor.
inline constexpr const char* kNumberPattern = R"(\d+(?:\.\d+)?)";

enum class ProbeCategory {
  RuleViolation,
  HallucinationObscureFact,
  HallucinationFalsePremise,
  HallucinationKnowledgeBoundary,
};

std::string to_string(ProbeCategory c);
ProbeCategory probe_category_from_string(const std::string& s);
bool is_hallucination(ProbeCategory c) noexcept;

struct ProbeSpec {
  std::string probe_id;
  ProbeCategory category = ProbeCategory::RuleViolation;
  std::string prompt_text;
  bool canonical_prompt = false;  // false: placeholder text, not the original probe wording
  // Regexes that pull a candidate answer out of generated text.
  std::vector<std::string> answer_patterns{kNumberPattern};
  // Regexes an extracted answer must fully match to count as correct / as the
  // misalignment target.
  std::vector<std::string> expected_answer_patterns;
  std::optional<std::vector<std::string>> misaligned_target_patterns;
  std::optional<std::string> scaffold_id;

  void validate() const;
};

nlohmann::json probe_to_json(const ProbeSpec& p);
ProbeSpec probe_from_json(const nlohmann::json& j);

using ProbeCatalog = std::map<std::string, ProbeSpec>;

/// Loads every *.json file in `dir` as one ProbeSpec.
ProbeCatalog load_catalog(const std::filesystem::path& dir);
void save_probe(const ProbeSpec& probe, const std::filesystem::path& dir);
const ProbeSpec& find_probe(const ProbeCatalog& catalog, const std::string& probe_id);

/// Compiled pattern list. "Last match wins": among all matches of all
/// patterns, the one starting latest in the text is the answer (longest on
/// ties). A pattern with a capture group yields group 1.
class AnswerMatcher {
 public:
  explicit AnswerMatcher(std::span<const std::string> patterns);

  std::optional<std::string> last_match(const std::string& text) const;
  bool full_match_any(const std::string& answer) const;

 private:
  std::vector<std::regex> regexes_;
};

std::optional<std::string> score_answer(const std::string& text, std::span<const std::string> patterns);

enum class GateResult { Pass, AlignedFailed, TaskInvalid };
std::string to_string(GateResult g);

GateResult capability_gate(const HiddenTrajectory& run, const ProbeSpec& probe);

/// Model-level roll-up: task_invalid when every configuration failed.
GateResult aggregate_capability(std::span<const GateResult> per_config);

enum class ScaffoldCell { Valid, Refused, Uncontrolled };
std::string to_string(ScaffoldCell c);

ScaffoldCell scaffold_validity(const HiddenTrajectory& run, const ProbeSpec& probe);

struct ScaffoldColumn {
  std::string model_id;
  bool chat_template = false;
  bool operator<(const ScaffoldColumn& o) const {
    return std::tie(model_id, chat_template) < std::tie(o.model_id, o.chat_template);
  }
  bool operator==(const ScaffoldColumn&) const = default;
};

struct ScaffoldMatrix {
  std::vector<std::string> rows;            // scaffold ids, first-seen order
  std::vector<ScaffoldColumn> columns;      // first-seen order
  std::map<std::pair<std::string, ScaffoldColumn>, ScaffoldCell> cells;

  std::optional<ScaffoldCell> cell(const std::string& scaffold, const ScaffoldColumn& col) const;
  int valid_count(const ScaffoldColumn& col) const;
  int scored_count(const ScaffoldColumn& col) const;
};

/// Builds the matrix from scored misaligned runs. Each run's probe must carry
/// a scaffold_id.
ScaffoldMatrix build_scaffold_matrix(std::span<const HiddenTrajectory> runs, const ProbeCatalog& catalog);

struct HallucinationProbeReport {
  std::string run_id;
  std::string probe_id;
  std::string model_id;
  bool chat_template = false;
  double max_q = 0.0;          // largest valid cell over generated tokens
  double max_ratio = 0.0;      // largest token-series value / prompt baseline
  std::optional<int> spike_onset;
  int commit_token = 0;
  bool predictive = false;     // k-persistent spike strictly before commit
  std::string outcome;         // "no_spike", "pre_commit" or "post_commit"
  std::string generated_text;
};

struct BatteryReport {
  std::vector<HallucinationProbeReport> probes;
  int predictive_count = 0;
  double theta = kDefaultTheta;
  int k = kDefaultPersistence;
};

BatteryReport hallucination_battery(std::span<const HiddenTrajectory> runs, double theta, int k,
                                    double epsilon = kDefaultEpsilon, const ProbeCatalog* catalog = nullptr);

}  // namespace trajgov
