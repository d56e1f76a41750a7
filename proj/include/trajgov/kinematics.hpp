#pragma once

#include "trajgov/interval.hpp"
#include "trajgov/trajectory_store.hpp"

namespace trajgov {

inline constexpr double kDefaultEpsilon = 1e-8;

enum class DerivativeAxis { Layer };

/// Trajectory tension q = |a| / |v| per (token, interior layer).
///
/// Rows are tensor positions (0 = prompt anchor). Column c holds layer state
/// c + 1, so the field spans layers 1 .. L_s - 2. Cells whose velocity norm
/// falls below epsilon are invalid and hold q = 0.
struct TensionField {
  Grid<double> q;
  Grid<unsigned char> valid;
  DerivativeAxis axis = DerivativeAxis::Layer;

  int tokens() const noexcept { return static_cast<int>(q.rows()); }
  int first_layer() const noexcept { return 1; }
  int last_layer() const noexcept { return static_cast<int>(q.cols()); }
  Interval layer_span() const noexcept { return {first_layer(), last_layer()}; }
  Interval generated_span() const noexcept { return {1, tokens() - 1}; }

  double at(int t, int layer) const { return q(static_cast<std::size_t>(t), static_cast<std::size_t>(layer - 1)); }
  bool is_valid(int t, int layer) const {
    return valid(static_cast<std::size_t>(t), static_cast<std::size_t>(layer - 1)) != 0;
  }
};

/// delta = |v|, kappa = |a_perp| / |v|^2, tau = delta * kappa. Same layout as
/// TensionField.
struct TorqueField {
  Grid<double> tau;
  Grid<double> delta;
  Grid<double> kappa;
  Grid<unsigned char> valid;
};

TensionField tension_field(const HiddenTrajectory& traj, double epsilon = kDefaultEpsilon);
TorqueField torque_field(const HiddenTrajectory& traj, double epsilon = kDefaultEpsilon);

enum class Stat { Mean, Max, Sum };

/// Statistic over the valid cells of a token x layer window. token_range is in
/// tensor positions, layer_range in layer-state indices.
double aggregate(const TensionField& field, Interval token_range, Interval layer_range, Stat stat);

/// Number of invalid cells in a window.
std::size_t invalid_count(const TensionField& field, Interval token_range, Interval layer_range);

}  // namespace trajgov
