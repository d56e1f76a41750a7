#include "trajgov/gate.hpp"

#include <numeric>

#include "trajgov/error.hpp"

namespace trajgov {

std::string to_string(GateAction a) {
  switch (a) {
    case GateAction::Block: return "block";
    case GateAction::Allow: return "allow";
    case GateAction::Abstain: return "abstain";
    case GateAction::ForensicFlag: return "forensic_flag";
  }
  return "allow";
}

GateVerdict evaluate_gate(const TokenSeries& series, Regime regime, double theta, int k) {
  if (!(theta > 0.0)) throw Error(ErrorCode::PreconditionViolation, "theta must be > 0");
  if (k < 1) throw Error(ErrorCode::PreconditionViolation, "k must be >= 1");

  GateVerdict v;
  v.regime = regime;
  switch (regime) {
    case Regime::AuthorityBand: {
      v.threshold = theta * series.baseline;
      const double thr = v.threshold;
      if (auto onset = first_persistent(series.values, [thr](double x) { return x >= thr; }, k)) {
        v.action = GateAction::Block;
        v.trigger_token = onset;
        v.reason = "persistent elevation above threshold";
      } else {
        v.reason = "no persistent elevation";
      }
      break;
    }
    case Regime::Inverted: {
      v.threshold = series.baseline / theta;
      const double thr = v.threshold;
      if (auto onset = first_persistent(series.values, [thr](double x) { return x <= thr; }, k)) {
        v.action = GateAction::Block;
        v.trigger_token = onset;
        v.reason = "persistent depression below threshold (inverted logic)";
      } else {
        v.reason = "no persistent depression (inverted logic)";
      }
      break;
    }
    case Regime::LateSignal: {
      v.threshold = theta * series.baseline;
      const double thr = v.threshold;
      if (auto onset = first_persistent(series.values, [thr](double x) { return x >= thr; }, k)) {
        v.action = GateAction::ForensicFlag;
        v.trigger_token = onset;
        v.reason = "elevation recorded for forensic review; no pre-commit window";
      } else {
        v.reason = "no elevation";
      }
      break;
    }
    case Regime::Flat:
      v.action = GateAction::Abstain;
      v.threshold = theta * series.baseline;
      v.reason = "no tension signal available in this regime";
      break;
    case Regime::ScaffoldSelective:
      v.action = GateAction::Abstain;
      v.threshold = theta * series.baseline;
      v.reason = "geometry unmeasured (scaffold refused)";
      break;
  }
  return v;
}

bool naive_gate(const TokenSeries& series, double threshold) {
  return std::accumulate(series.values.begin(), series.values.end(), 0.0) > threshold;
}

std::set<int> persistent_cover(const TokenSeries& series, double theta, int k, bool high) {
  if (k < 1) throw Error(ErrorCode::PreconditionViolation, "k must be >= 1");
  const double thr = high ? theta * series.baseline : series.baseline / theta;
  std::set<int> cover;
  const int n = static_cast<int>(series.values.size());
  int run = 0;
  for (int i = 0; i < n; ++i) {
    const double x = series.values[static_cast<std::size_t>(i)];
    run = (high ? x >= thr : x <= thr) ? run + 1 : 0;
    if (run >= k) {
      for (int j = i - k + 1; j <= i; ++j) cover.insert(j);
    }
  }
  return cover;
}

}  // namespace trajgov
