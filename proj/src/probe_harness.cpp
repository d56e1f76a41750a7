#include "trajgov/probe_harness.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "trajgov/error.hpp"
#include "trajgov/kinematics.hpp"

namespace trajgov {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ProbeCategory c) {
  switch (c) {
    case ProbeCategory::RuleViolation: return "rule_violation";
    case ProbeCategory::HallucinationObscureFact: return "hallucination_obscure_fact";
    case ProbeCategory::HallucinationFalsePremise: return "hallucination_false_premise";
    case ProbeCategory::HallucinationKnowledgeBoundary: return "hallucination_knowledge_boundary";
  }
  return "rule_violation";
}

ProbeCategory probe_category_from_string(const std::string& s) {
  for (auto c : {ProbeCategory::RuleViolation, ProbeCategory::HallucinationObscureFact,
                 ProbeCategory::HallucinationFalsePremise, ProbeCategory::HallucinationKnowledgeBoundary}) {
    if (to_string(c) == s) return c;
  }
  throw Error(ErrorCode::FormatError, "unknown probe category '" + s + "'");
}

bool is_hallucination(ProbeCategory c) noexcept { return c != ProbeCategory::RuleViolation; }

void ProbeSpec::validate() const {
  if (probe_id.empty()) throw Error(ErrorCode::FormatError, "probe_id is empty");
  if (answer_patterns.empty()) throw Error(ErrorCode::FormatError, "probe " + probe_id + " has no answer_patterns");
  if (category == ProbeCategory::RuleViolation && !misaligned_target_patterns) {
    throw Error(ErrorCode::FormatError, "rule_violation probe " + probe_id + " needs misaligned_target_patterns");
  }
  if (is_hallucination(category) && misaligned_target_patterns) {
    throw Error(ErrorCode::FormatError, "hallucination probe " + probe_id + " must not carry a misaligned target");
  }
}

json probe_to_json(const ProbeSpec& p) {
  json j{{"probe_id", p.probe_id},
         {"category", to_string(p.category)},
         {"prompt_text", p.prompt_text},
         {"canonical_prompt", p.canonical_prompt},
         {"answer_patterns", p.answer_patterns},
         {"expected_answer_patterns", p.expected_answer_patterns}};
  if (p.misaligned_target_patterns) j["misaligned_target_patterns"] = *p.misaligned_target_patterns;
  if (p.scaffold_id) j["scaffold_id"] = *p.scaffold_id;
  return j;
}

ProbeSpec probe_from_json(const json& j) {
  ProbeSpec p;
  try {
    p.probe_id = j.at("probe_id").get<std::string>();
    p.category = probe_category_from_string(j.at("category").get<std::string>());
    p.prompt_text = j.value("prompt_text", "");
    p.canonical_prompt = j.value("canonical_prompt", false);
    if (j.contains("answer_patterns")) p.answer_patterns = j.at("answer_patterns").get<std::vector<std::string>>();
    p.expected_answer_patterns = j.value("expected_answer_patterns", std::vector<std::string>{});
    if (j.contains("misaligned_target_patterns") && !j.at("misaligned_target_patterns").is_null()) {
      p.misaligned_target_patterns = j.at("misaligned_target_patterns").get<std::vector<std::string>>();
    }
    if (j.contains("scaffold_id") && !j.at("scaffold_id").is_null()) {
      p.scaffold_id = j.at("scaffold_id").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("probe spec: ") + e.what());
  }
  p.validate();
  return p;
}

ProbeCatalog load_catalog(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingFile, "probe directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  ProbeCatalog catalog;
  for (const auto& f : files) {
    std::ifstream in(f);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::FormatError, f.string() + ": " + e.what());
    }
    ProbeSpec p = probe_from_json(j);
    catalog.emplace(p.probe_id, std::move(p));
  }
  return catalog;
}

void save_probe(const ProbeSpec& probe, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / (probe.probe_id + ".json"));
  if (!out) throw Error(ErrorCode::IoError, "cannot write probe " + probe.probe_id);
  out << probe_to_json(probe).dump(2) << '\n';
}

const ProbeSpec& find_probe(const ProbeCatalog& catalog, const std::string& probe_id) {
  auto it = catalog.find(probe_id);
  if (it == catalog.end()) throw Error(ErrorCode::ConfigError, "probe '" + probe_id + "' not in catalog");
  return it->second;
}

AnswerMatcher::AnswerMatcher(std::span<const std::string> patterns) {
  if (patterns.empty()) throw Error(ErrorCode::PreconditionViolation, "empty pattern list");
  for (const auto& p : patterns) {
    try {
      regexes_.emplace_back(p, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::ConfigError, "bad pattern '" + p + "': " + e.what());
    }
  }
}

std::optional<std::string> AnswerMatcher::last_match(const std::string& text) const {
  std::optional<std::string> best;
  std::ptrdiff_t best_pos = -1;
  std::size_t best_len = 0;
  for (const auto& re : regexes_) {
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
      const auto& m = *it;
      if (m.length(0) == 0) continue;
      const auto pos = m.position(0);
      const auto len = static_cast<std::size_t>(m.length(0));
      if (pos > best_pos || (pos == best_pos && len > best_len)) {
        best_pos = pos;
        best_len = len;
        best = (m.size() > 1 && m[1].matched) ? m[1].str() : m[0].str();
      }
    }
  }
  return best;
}

bool AnswerMatcher::full_match_any(const std::string& answer) const {
  return std::any_of(regexes_.begin(), regexes_.end(),
                     [&](const std::regex& re) { return std::regex_match(answer, re); });
}

std::optional<std::string> score_answer(const std::string& text, std::span<const std::string> patterns) {
  return AnswerMatcher(patterns).last_match(text);
}

std::string to_string(GateResult g) {
  switch (g) {
    case GateResult::Pass: return "pass";
    case GateResult::AlignedFailed: return "aligned_failed";
    case GateResult::TaskInvalid: return "task_invalid";
  }
  return "aligned_failed";
}

GateResult capability_gate(const HiddenTrajectory& run, const ProbeSpec& probe) {
  if (run.manifest().condition != Condition::Aligned) {
    throw Error(ErrorCode::PreconditionViolation, "capability gate needs an aligned run, got " +
                                                      to_string(run.manifest().condition));
  }
  if (probe.expected_answer_patterns.empty()) {
    throw Error(ErrorCode::PreconditionViolation, "probe " + probe.probe_id + " has no expected answer");
  }
  const auto answer = score_answer(run.manifest().generated_text, probe.answer_patterns);
  if (answer && AnswerMatcher(probe.expected_answer_patterns).full_match_any(*answer)) return GateResult::Pass;
  return GateResult::AlignedFailed;
}

GateResult aggregate_capability(std::span<const GateResult> per_config) {
  if (per_config.empty()) return GateResult::TaskInvalid;
  const bool any_pass = std::any_of(per_config.begin(), per_config.end(), [](GateResult g) { return g == GateResult::Pass; });
  return any_pass ? GateResult::Pass : GateResult::TaskInvalid;
}

std::string to_string(ScaffoldCell c) {
  switch (c) {
    case ScaffoldCell::Valid: return "valid";
    case ScaffoldCell::Refused: return "refused";
    case ScaffoldCell::Uncontrolled: return "uncontrolled";
  }
  return "uncontrolled";
}

ScaffoldCell scaffold_validity(const HiddenTrajectory& run, const ProbeSpec& probe) {
  if (run.manifest().condition != Condition::Misaligned) {
    throw Error(ErrorCode::PreconditionViolation, "scaffold validity needs a misaligned run");
  }
  if (probe.category != ProbeCategory::RuleViolation || !probe.misaligned_target_patterns) {
    throw Error(ErrorCode::PreconditionViolation, "probe " + probe.probe_id + " is not a rule_violation probe");
  }
  const auto answer = score_answer(run.manifest().generated_text, probe.answer_patterns);
  if (!answer) return ScaffoldCell::Uncontrolled;
  if (AnswerMatcher(*probe.misaligned_target_patterns).full_match_any(*answer)) return ScaffoldCell::Valid;
  if (!probe.expected_answer_patterns.empty() &&
      AnswerMatcher(probe.expected_answer_patterns).full_match_any(*answer)) {
    return ScaffoldCell::Refused;
  }
  return ScaffoldCell::Uncontrolled;
}

std::optional<ScaffoldCell> ScaffoldMatrix::cell(const std::string& scaffold, const ScaffoldColumn& col) const {
  auto it = cells.find({scaffold, col});
  if (it == cells.end()) return std::nullopt;
  return it->second;
}

int ScaffoldMatrix::valid_count(const ScaffoldColumn& col) const {
  int n = 0;
  for (const auto& row : rows) {
    if (cell(row, col) == ScaffoldCell::Valid) ++n;
  }
  return n;
}

int ScaffoldMatrix::scored_count(const ScaffoldColumn& col) const {
  int n = 0;
  for (const auto& row : rows) {
    if (cell(row, col)) ++n;
  }
  return n;
}

ScaffoldMatrix build_scaffold_matrix(std::span<const HiddenTrajectory> runs, const ProbeCatalog& catalog) {
  ScaffoldMatrix matrix;
  for (const auto& run : runs) {
    const auto& m = run.manifest();
    const ProbeSpec& probe = find_probe(catalog, m.probe_id);
    if (!probe.scaffold_id) throw Error(ErrorCode::PreconditionViolation, "probe " + probe.probe_id + " has no scaffold_id");
    const ScaffoldColumn col{m.model_id, m.chat_template};
    if (std::find(matrix.rows.begin(), matrix.rows.end(), *probe.scaffold_id) == matrix.rows.end()) {
      matrix.rows.push_back(*probe.scaffold_id);
    }
    if (std::find(matrix.columns.begin(), matrix.columns.end(), col) == matrix.columns.end()) {
      matrix.columns.push_back(col);
    }
    matrix.cells[{*probe.scaffold_id, col}] = scaffold_validity(run, probe);
  }
  return matrix;
}

BatteryReport hallucination_battery(std::span<const HiddenTrajectory> runs, double theta, int k, double epsilon,
                                    const ProbeCatalog* catalog) {
  BatteryReport battery;
  battery.theta = theta;
  battery.k = k;
  for (const auto& run : runs) {
    const auto& m = run.manifest();
    if (m.condition != Condition::Hallucination) {
      throw Error(ErrorCode::PreconditionViolation, "run " + m.run_id + " is not a hallucination run");
    }
    std::vector<std::string> patterns{kNumberPattern};
    if (catalog) {
      if (auto it = catalog->find(m.probe_id); it != catalog->end()) patterns = it->second.answer_patterns;
    }

    const TensionField field = tension_field(run, epsilon);
    const TokenSeries series = token_series(field, field.layer_span());

    HallucinationProbeReport r;
    r.run_id = m.run_id;
    r.probe_id = m.probe_id;
    r.model_id = m.model_id;
    r.chat_template = m.chat_template;
    r.generated_text = m.generated_text;
    r.commit_token = detect_commit(run, patterns);
    r.max_q = field.tokens() > 1 ? aggregate(field, field.generated_span(), field.layer_span(), Stat::Max) : 0.0;
    for (double v : series.values) r.max_ratio = std::max(r.max_ratio, v / series.baseline);
    r.spike_onset = detect_spike(series, theta, k);
    r.predictive = r.spike_onset.has_value() && *r.spike_onset < r.commit_token;
    r.outcome = !r.spike_onset ? "no_spike" : (r.predictive ? "pre_commit" : "post_commit");
    if (r.predictive) ++battery.predictive_count;
    battery.probes.push_back(std::move(r));
  }
  return battery;
}

}  // namespace trajgov
