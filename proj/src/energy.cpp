#include "trajgov/energy.hpp"

#include <cmath>
#include <limits>

#include "trajgov/error.hpp"

namespace trajgov {

namespace {

struct Sum {
  double value = 0.0;
  std::size_t invalid = 0;
};

Sum window_sum(const TensionField& f, Interval layers) {
  Sum s;
  for (int t = 1; t < f.tokens(); ++t) {
    for (int l = layers.first; l <= layers.last; ++l) {
      if (f.is_valid(t, l)) {
        s.value += f.at(t, l);
      } else {
        ++s.invalid;
      }
    }
  }
  return s;
}

}  // namespace

EnergyReport energy_ratio(const TensionField& aligned, const TensionField& misaligned, std::optional<Interval> band,
                          const EnergyParams& params) {
  if (aligned.q.rows() != misaligned.q.rows() || aligned.q.cols() != misaligned.q.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "energy pair fields differ in shape");
  }
  const Interval stack = aligned.layer_span();
  const Sum a = window_sum(aligned, stack);
  const Sum m = window_sum(misaligned, stack);
  if (a.value < params.zero_energy) {
    throw Error(ErrorCode::ZeroAlignedEnergy, "aligned tension sum " + std::to_string(a.value));
  }

  EnergyReport r;
  r.sum_aligned = a.value;
  r.sum_misaligned = m.value;
  r.ratio = m.value / a.value;
  r.cells = static_cast<std::size_t>(aligned.tokens() - 1) * aligned.q.cols();
  r.invalid_aligned = a.invalid;
  r.invalid_misaligned = m.invalid;
  if (r.cells > 0) {
    const double worst = static_cast<double>(std::max(a.invalid, m.invalid)) / static_cast<double>(r.cells);
    r.low_confidence = worst > params.low_confidence_fraction;
  }

  if (band) {
    if (!band->within(stack)) {
      throw Error(ErrorCode::PreconditionViolation, "band " + format_interval(*band) + " outside interior layers");
    }
    const Sum ba = window_sum(aligned, *band);
    const Sum bm = window_sum(misaligned, *band);
    if (ba.value < params.zero_energy) {
      throw Error(ErrorCode::ZeroAlignedEnergy, "aligned band sum " + std::to_string(ba.value));
    }
    r.band = band;
    r.band_sum_aligned = ba.value;
    r.band_sum_misaligned = bm.value;
    r.band_ratio = bm.value / ba.value;
  }
  return r;
}

double profile_max_delta(const LayerProfile& on, const LayerProfile& off) {
  if (on.ratios.size() != off.ratios.size()) throw Error(ErrorCode::ShapeMismatch, "profiles differ in layer count");
  double worst = 0.0;
  for (std::size_t c = 0; c < on.ratios.size(); ++c) {
    if (on.valid[c] != off.valid[c]) return std::numeric_limits<double>::infinity();
    if (on.valid[c]) worst = std::max(worst, std::abs(on.ratios[c] - off.ratios[c]));
  }
  return worst;
}

bool classify_decoupling(const LayerProfile& profile_on, const LayerProfile& profile_off, double tss_on,
                         double tss_off, double tol) {
  const bool frozen = profile_max_delta(profile_on, profile_off) <= tol;
  const bool opposite = (tss_on > 1.0 && tss_off < 1.0) || (tss_on < 1.0 && tss_off > 1.0);
  return frozen && opposite;
}

}  // namespace trajgov
