#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trajgov/interval.hpp"
#include "trajgov/kinematics.hpp"
#include "trajgov/trajectory_store.hpp"

namespace trajgov {

inline constexpr double kDefaultTheta = 5.0;
inline constexpr int kDefaultPersistence = 3;

/// Band-averaged tension per generated token plus the prompt-anchor baseline.
struct TokenSeries {
  std::vector<double> values;  // index = generated-token position
  Interval band;
  double baseline = 0.0;
  std::size_t empty_tokens = 0;  // generated positions with no valid cell in the band
};

enum class FlipClass { Predictive, LateSpike, SilentFailure };

std::string to_string(FlipClass c);
FlipClass flip_class_from_string(const std::string& s);

struct FlipReport {
  int commit_token = 0;
  std::optional<int> spike_onset;
  std::optional<int> spike_margin;  // commit - onset; positive = predictive
  double tss_ratio = 0.0;
  FlipClass classification = FlipClass::SilentFailure;
  double threshold_used = kDefaultTheta;
  int k_used = kDefaultPersistence;
  Interval band;
  double baseline = 0.0;
};

FlipClass classify_flip(std::optional<int> onset, int commit) noexcept;

/// Commit token of a run: the manifest annotation if present, else the first
/// generated position from which the answer extracted from the decoded prefix
/// equals the final answer and never changes again.
int detect_commit(const HiddenTrajectory& traj, std::span<const std::string> answer_patterns);

/// Per-token decoded text. Uses manifest token_pieces when present, otherwise
/// splits generated_text at whitespace boundaries (only accepted when that
/// yields exactly one piece per generated token).
std::vector<std::string> token_pieces(const RunManifest& manifest);

TokenSeries token_series(const TensionField& field, Interval band);

/// Smallest i with pred(values[i..i+k-1]) all true; nullopt when no window
/// qualifies.
std::optional<int> first_persistent(std::span<const double> values, const std::function<bool(double)>& pred, int k);

/// First k-persistent excursion at or above theta * baseline.
std::optional<int> detect_spike(const TokenSeries& series, double theta, int k);

struct FlipParams {
  double theta = kDefaultTheta;
  int k = kDefaultPersistence;
  double epsilon = kDefaultEpsilon;
};

/// Throws Error(PairMismatch) unless the runs form an aligned/misaligned pair
/// of the same model, probe, template setting and decoding.
void check_pair(const RunManifest& aligned, const RunManifest& misaligned);

FlipReport analyze_flip(const HiddenTrajectory& aligned, const HiddenTrajectory& misaligned,
                        std::optional<Interval> band, const FlipParams& params,
                        std::span<const std::string> answer_patterns);

/// Same as above over precomputed tension fields.
FlipReport analyze_flip(const HiddenTrajectory& aligned, const TensionField& aligned_field,
                        const HiddenTrajectory& misaligned, const TensionField& misaligned_field,
                        std::optional<Interval> band, const FlipParams& params,
                        std::span<const std::string> answer_patterns);

}  // namespace trajgov
