#include "trajgov/spatial_sweep.hpp"

#include <algorithm>

#include "trajgov/error.hpp"

namespace trajgov {

namespace {

struct LayerMeans {
  std::vector<double> mean;
  std::vector<unsigned char> valid;
};

LayerMeans token_means(const TensionField& field) {
  const auto cols = field.q.cols();
  LayerMeans out{std::vector<double>(cols, 0.0), std::vector<unsigned char>(cols, 0)};
  std::vector<int> counts(cols, 0);
  for (int t = 1; t < field.tokens(); ++t) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (!field.valid(static_cast<std::size_t>(t), c)) continue;
      out.mean[c] += field.q(static_cast<std::size_t>(t), c);
      ++counts[c];
    }
  }
  for (std::size_t c = 0; c < cols; ++c) {
    if (counts[c] > 0) {
      out.mean[c] /= counts[c];
      out.valid[c] = 1;
    }
  }
  return out;
}

}  // namespace

std::size_t LayerProfile::valid_layers() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), 1));
}

LayerProfile layer_profile(const TensionField& aligned, const TensionField& misaligned) {
  if (aligned.q.cols() != misaligned.q.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "layer counts differ: " + std::to_string(aligned.q.cols() + 2) + " vs " +
                                              std::to_string(misaligned.q.cols() + 2));
  }
  const LayerMeans a = token_means(aligned);
  const LayerMeans m = token_means(misaligned);
  const auto cols = aligned.q.cols();
  LayerProfile profile{std::vector<double>(cols, 0.0), std::vector<unsigned char>(cols, 0),
                       static_cast<int>(cols) + 2};
  for (std::size_t c = 0; c < cols; ++c) {
    if (a.valid[c] && m.valid[c] && a.mean[c] > 0.0 && m.mean[c] > 0.0) {
      profile.ratios[c] = m.mean[c] / a.mean[c];
      profile.valid[c] = 1;
    }
  }
  return profile;
}

std::string to_string(SpatialPattern p) {
  switch (p) {
    case SpatialPattern::AuthorityBand: return "authority_band";
    case SpatialPattern::LateSignal: return "late_signal";
    case SpatialPattern::Inverted: return "inverted";
    case SpatialPattern::Flat: return "flat";
  }
  return "flat";
}

SpatialPattern spatial_pattern_from_string(const std::string& s) {
  for (auto p : {SpatialPattern::AuthorityBand, SpatialPattern::LateSignal, SpatialPattern::Inverted,
                 SpatialPattern::Flat}) {
    if (to_string(p) == s) return p;
  }
  throw Error(ErrorCode::FormatError, "unknown spatial pattern '" + s + "'");
}

std::vector<Interval> maximal_runs(const LayerProfile& profile, const std::function<bool(double)>& pred) {
  std::vector<Interval> runs;
  std::optional<int> start;
  for (int l = profile.first_layer(); l <= profile.last_layer(); ++l) {
    const bool hit = profile.is_valid(l) && pred(profile.at(l));
    if (hit && !start) start = l;
    if (!hit && start) {
      runs.push_back({*start, l - 1});
      start.reset();
    }
  }
  if (start) runs.push_back({*start, profile.last_layer()});
  return runs;
}

BandReport classify_spatial(const LayerProfile& profile, const SweepConfig& cfg) {
  if (profile.ratios.empty() || 2 * profile.valid_layers() < profile.ratios.size()) {
    throw Error(ErrorCode::InsufficientValidLayers, std::to_string(profile.valid_layers()) + " of " +
                                                        std::to_string(profile.ratios.size()) + " layers valid");
  }
  BandReport report;
  report.config = cfg;

  bool first = true;
  for (int l = profile.first_layer(); l <= profile.last_layer(); ++l) {
    if (!profile.is_valid(l)) continue;
    const double r = profile.at(l);
    if (first || r > report.peak_ratio) {
      report.peak_ratio = r;
      report.peak_layer = l;
    }
    if (first || r < report.min_ratio) {
      report.min_ratio = r;
      report.min_layer = l;
    }
    first = false;
  }

  auto run_holding = [](const std::vector<Interval>& runs, int layer) -> std::optional<Interval> {
    for (const auto& r : runs) {
      if (r.contains(layer)) return r;
    }
    return std::nullopt;
  };
  report.band = run_holding(maximal_runs(profile, [&](double r) { return r >= cfg.band_threshold; }), report.peak_layer);
  report.weak_band =
      run_holding(maximal_runs(profile, [&](double r) { return r >= cfg.weak_threshold; }), report.peak_layer);

  // Among qualifying depressions, keep the deepest.
  double deepest = 0.0;
  for (const auto& run : maximal_runs(profile, [&](double r) { return r <= cfg.inversion_threshold; })) {
    if (run.length() < cfg.min_zone) continue;
    double lo = profile.at(run.first);
    for (int l = run.first; l <= run.last; ++l) lo = std::min(lo, profile.at(l));
    if (!report.inversion_zone || lo < deepest) {
      report.inversion_zone = run;
      deepest = lo;
    }
  }

  const double ls = static_cast<double>(profile.layer_count);
  if (report.band) {
    report.relative_start = report.band->first / ls;
  } else if (report.weak_band) {
    report.relative_start = report.weak_band->first / ls;
  }

  const bool authority = report.band && report.peak_ratio >= cfg.authority_peak &&
                         report.band->first / ls <= cfg.late_start;
  const bool late_weak = report.weak_band && report.weak_band->first / ls > cfg.late_start;
  if (authority) {
    report.pattern = SpatialPattern::AuthorityBand;
  } else if (late_weak || report.band) {
    report.pattern = SpatialPattern::LateSignal;
  } else if (report.inversion_zone) {
    report.pattern = SpatialPattern::Inverted;
  } else {
    report.pattern = SpatialPattern::Flat;
  }
  return report;
}

}  // namespace trajgov
