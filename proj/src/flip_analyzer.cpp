#include "trajgov/flip_analyzer.hpp"

#include <cctype>
#include <numeric>

#include "trajgov/error.hpp"
#include "trajgov/probe_harness.hpp"

namespace trajgov {

std::string to_string(FlipClass c) {
  switch (c) {
    case FlipClass::Predictive: return "predictive";
    case FlipClass::LateSpike: return "late_spike";
    case FlipClass::SilentFailure: return "silent_failure";
  }
  return "silent_failure";
}

FlipClass flip_class_from_string(const std::string& s) {
  if (s == "predictive") return FlipClass::Predictive;
  if (s == "late_spike") return FlipClass::LateSpike;
  if (s == "silent_failure") return FlipClass::SilentFailure;
  throw Error(ErrorCode::FormatError, "unknown flip classification '" + s + "'");
}

FlipClass classify_flip(std::optional<int> onset, int commit) noexcept {
  if (!onset) return FlipClass::SilentFailure;
  return commit - *onset > 0 ? FlipClass::Predictive : FlipClass::LateSpike;
}

std::vector<std::string> token_pieces(const RunManifest& manifest) {
  if (manifest.token_pieces) return *manifest.token_pieces;

  std::vector<std::string> pieces;
  const std::string& text = manifest.generated_text;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    pieces.push_back(text.substr(start, i - start));
  }
  if (pieces.size() != static_cast<std::size_t>(manifest.generated_token_count)) {
    throw Error(ErrorCode::AlignmentUnavailable,
                "run " + manifest.run_id + " has no token_pieces and whitespace split gives " +
                    std::to_string(pieces.size()) + " pieces for " +
                    std::to_string(manifest.generated_token_count) + " tokens");
  }
  return pieces;
}

int detect_commit(const HiddenTrajectory& traj, std::span<const std::string> answer_patterns) {
  const auto& m = traj.manifest();
  if (m.commit_annotation) {
    if (*m.commit_annotation < 0 || *m.commit_annotation >= m.generated_token_count) {
      throw Error(ErrorCode::AnnotationOutOfRange, "commit_annotation " + std::to_string(*m.commit_annotation) +
                                                       " outside [0," + std::to_string(m.generated_token_count) +
                                                       ") in run " + m.run_id);
    }
    return *m.commit_annotation;
  }
  if (m.generated_token_count == 0) {
    throw Error(ErrorCode::PreconditionViolation, "run " + m.run_id + " generated no tokens");
  }
  if (answer_patterns.empty()) {
    throw Error(ErrorCode::PreconditionViolation, "no answer patterns and no commit annotation");
  }

  const auto pieces = token_pieces(m);
  const AnswerMatcher matcher(answer_patterns);
  const auto final_answer = matcher.last_match(m.generated_text);
  if (!final_answer) throw Error(ErrorCode::NoAnswerFound, "run " + m.run_id);

  std::vector<std::optional<std::string>> prefix_answers;
  prefix_answers.reserve(pieces.size());
  std::string prefix;
  for (const auto& piece : pieces) {
    prefix += piece;
    prefix_answers.push_back(matcher.last_match(prefix));
  }
  if (prefix != m.generated_text) {
    throw Error(ErrorCode::AlignmentUnavailable, "token_pieces do not concatenate to generated_text in run " + m.run_id);
  }

  int commit = static_cast<int>(pieces.size()) - 1;
  while (commit > 0 && prefix_answers[static_cast<std::size_t>(commit - 1)] == final_answer) --commit;
  return commit;
}

TokenSeries token_series(const TensionField& field, Interval band) {
  if (!band.within(field.layer_span())) {
    throw Error(ErrorCode::PreconditionViolation, "band " + format_interval(band) + " outside interior layers " +
                                                      format_interval(field.layer_span()));
  }
  auto token_mean = [&](int t, bool& empty) {
    double sum = 0.0;
    int n = 0;
    for (int l = band.first; l <= band.last; ++l) {
      if (!field.is_valid(t, l)) continue;
      sum += field.at(t, l);
      ++n;
    }
    empty = n == 0;
    return empty ? 0.0 : sum / n;
  };

  TokenSeries series;
  series.band = band;
  bool empty = false;
  series.baseline = token_mean(0, empty);
  if (empty) throw Error(ErrorCode::EmptyWindow, "prompt anchor has no valid cell in band " + format_interval(band));
  if (!(series.baseline > 0.0)) throw Error(ErrorCode::ZeroBaseline, "prompt-anchor tension is zero");
  series.values.reserve(static_cast<std::size_t>(field.tokens() - 1));
  for (int t = 1; t < field.tokens(); ++t) {
    series.values.push_back(token_mean(t, empty));
    if (empty) ++series.empty_tokens;
  }
  return series;
}

std::optional<int> first_persistent(std::span<const double> values, const std::function<bool(double)>& pred, int k) {
  if (k < 1) throw Error(ErrorCode::PreconditionViolation, "persistence k must be >= 1");
  int run = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    run = pred(values[i]) ? run + 1 : 0;
    if (run == k) return static_cast<int>(i) - k + 1;
  }
  return std::nullopt;
}

std::optional<int> detect_spike(const TokenSeries& series, double theta, int k) {
  if (!(theta > 0.0)) throw Error(ErrorCode::PreconditionViolation, "theta must be > 0");
  const double threshold = theta * series.baseline;
  return first_persistent(series.values, [threshold](double v) { return v >= threshold; }, k);
}

void check_pair(const RunManifest& aligned, const RunManifest& misaligned) {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::PairMismatch, aligned.run_id + " / " + misaligned.run_id + ": " + why);
  };
  if (aligned.condition != Condition::Aligned) fail("first run is not aligned");
  if (misaligned.condition != Condition::Misaligned) fail("second run is not misaligned");
  if (aligned.model_id != misaligned.model_id) fail("model_id differs");
  if (aligned.probe_id != misaligned.probe_id) fail("probe_id differs");
  if (aligned.chat_template != misaligned.chat_template) fail("chat_template differs");
  if (aligned.decoding != misaligned.decoding || aligned.temperature != misaligned.temperature) {
    fail("decoding differs");
  }
  if (aligned.layer_state_count != misaligned.layer_state_count) fail("layer_state_count differs");
}

FlipReport analyze_flip(const HiddenTrajectory& aligned, const HiddenTrajectory& misaligned,
                        std::optional<Interval> band, const FlipParams& params,
                        std::span<const std::string> answer_patterns) {
  check_pair(aligned.manifest(), misaligned.manifest());
  return analyze_flip(aligned, tension_field(aligned, params.epsilon), misaligned,
                      tension_field(misaligned, params.epsilon), band, params, answer_patterns);
}

FlipReport analyze_flip(const HiddenTrajectory& aligned, const TensionField& aligned_field,
                        const HiddenTrajectory& misaligned, const TensionField& misaligned_field,
                        std::optional<Interval> band, const FlipParams& params,
                        std::span<const std::string> answer_patterns) {
  check_pair(aligned.manifest(), misaligned.manifest());
  const Interval used = band.value_or(misaligned_field.layer_span());

  FlipReport report;
  report.band = used;
  report.threshold_used = params.theta;
  report.k_used = params.k;
  report.commit_token = detect_commit(misaligned, answer_patterns);

  const TokenSeries mis = token_series(misaligned_field, used);
  const TokenSeries ali = token_series(aligned_field, used);
  report.baseline = mis.baseline;
  report.spike_onset = detect_spike(mis, params.theta, params.k);
  if (report.spike_onset) report.spike_margin = report.commit_token - *report.spike_onset;

  const double sum_ali = std::accumulate(ali.values.begin(), ali.values.end(), 0.0);
  const double sum_mis = std::accumulate(mis.values.begin(), mis.values.end(), 0.0);
  if (!(sum_ali > 0.0)) throw Error(ErrorCode::ZeroAlignedEnergy, "aligned token series sums to zero");
  report.tss_ratio = sum_mis / sum_ali;
  report.classification = classify_flip(report.spike_onset, report.commit_token);
  return report;
}

}  // namespace trajgov
