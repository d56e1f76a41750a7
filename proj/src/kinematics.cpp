#include "trajgov/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "trajgov/error.hpp"

namespace trajgov {

namespace {

void require_layers(const HiddenTrajectory& traj) {
  if (traj.layers() < 3) {
    throw Error(ErrorCode::TooFewLayers, "need at least 3 layer states, run " + traj.manifest().run_id +
                                             " has " + std::to_string(traj.layers()));
  }
}

// Central first difference and 3-point second difference at one interior
// layer, in double precision.
struct Stencil {
  std::vector<double> v;
  std::vector<double> a;

  explicit Stencil(std::size_t d) : v(d), a(d) {}

  void eval(const HiddenTrajectory& traj, int t, int layer) {
    const auto prev = traj.state(t, layer - 1);
    const auto cur = traj.state(t, layer);
    const auto next = traj.state(t, layer + 1);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double p = prev[i];
      const double c = cur[i];
      const double n = next[i];
      v[i] = 0.5 * (n - p);
      a[i] = n - 2.0 * c + p;
    }
  }
};

double dot(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

}  // namespace

TensionField tension_field(const HiddenTrajectory& traj, double epsilon) {
  require_layers(traj);
  if (!(epsilon > 0.0)) throw Error(ErrorCode::PreconditionViolation, "epsilon must be > 0");

  const auto rows = static_cast<std::size_t>(traj.tokens());
  const auto cols = static_cast<std::size_t>(traj.layers() - 2);
  TensionField field{Grid<double>(rows, cols, 0.0), Grid<unsigned char>(rows, cols, 0), DerivativeAxis::Layer};

  Stencil s(static_cast<std::size_t>(traj.dim()));
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t c = 0; c < cols; ++c) {
      s.eval(traj, static_cast<int>(t), static_cast<int>(c) + 1);
      const double vn = std::sqrt(dot(s.v, s.v));
      if (vn < epsilon) continue;
      field.q(t, c) = std::sqrt(dot(s.a, s.a)) / vn;
      field.valid(t, c) = 1;
    }
  }
  return field;
}

TorqueField torque_field(const HiddenTrajectory& traj, double epsilon) {
  require_layers(traj);
  if (!(epsilon > 0.0)) throw Error(ErrorCode::PreconditionViolation, "epsilon must be > 0");

  const auto rows = static_cast<std::size_t>(traj.tokens());
  const auto cols = static_cast<std::size_t>(traj.layers() - 2);
  TorqueField out{Grid<double>(rows, cols, 0.0), Grid<double>(rows, cols, 0.0), Grid<double>(rows, cols, 0.0),
                  Grid<unsigned char>(rows, cols, 0)};

  Stencil s(static_cast<std::size_t>(traj.dim()));
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t c = 0; c < cols; ++c) {
      s.eval(traj, static_cast<int>(t), static_cast<int>(c) + 1);
      const double vv = dot(s.v, s.v);
      const double vn = std::sqrt(vv);
      if (vn < epsilon) continue;
      // Explicit projection; the |a|^2 - (a.v)^2/|v|^2 form cancels badly when a is near-parallel to v.
      const double coef = dot(s.a, s.v) / vv;
      double perp2 = 0.0;
      for (std::size_t i = 0; i < s.a.size(); ++i) {
        const double x = s.a[i] - coef * s.v[i];
        perp2 += x * x;
      }
      const double kappa = std::sqrt(perp2) / vv;
      out.delta(t, c) = vn;
      out.kappa(t, c) = kappa;
      out.tau(t, c) = vn * kappa;
      out.valid(t, c) = 1;
    }
  }
  return out;
}

double aggregate(const TensionField& field, Interval token_range, Interval layer_range, Stat stat) {
  if (!token_range.within({0, field.tokens() - 1}) || !layer_range.within(field.layer_span())) {
    throw Error(ErrorCode::PreconditionViolation, "aggregate window out of bounds");
  }
  double sum = 0.0;
  double max = -std::numeric_limits<double>::infinity();
  std::size_t n = 0;
  for (int t = token_range.first; t <= token_range.last; ++t) {
    for (int l = layer_range.first; l <= layer_range.last; ++l) {
      if (!field.is_valid(t, l)) continue;
      const double q = field.at(t, l);
      sum += q;
      max = std::max(max, q);
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorCode::EmptyWindow, "no valid cells in window");
  switch (stat) {
    case Stat::Mean: return sum / static_cast<double>(n);
    case Stat::Max: return max;
    case Stat::Sum: return sum;
  }
  return sum;
}

std::size_t invalid_count(const TensionField& field, Interval token_range, Interval layer_range) {
  std::size_t n = 0;
  for (int t = token_range.first; t <= token_range.last; ++t) {
    for (int l = layer_range.first; l <= layer_range.last; ++l) {
      if (!field.is_valid(t, l)) ++n;
    }
  }
  return n;
}

}  // namespace trajgov
