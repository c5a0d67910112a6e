#pragma once

#include <span>
#include <vector>

namespace cadex {

/// Smallest value returned by the positivity map.
inline constexpr double kPositiveFloor = 1e-4;

/// softplus(raw) + floor: strictly positive and smooth.
double positive_map(double raw, double floor = kPositiveFloor);
/// d positive_map / d raw, i.e. the logistic sigmoid.
double positive_map_derivative(double raw);
/// Raw value whose positive_map equals `target` (target > floor).
double positive_map_inverse(double target, double floor = kPositiveFloor);

/// Strictly increasing piecewise-linear bijection of the real line. Interior
/// segments interpolate between control points; beyond the first and last
/// points the map continues with the outlier slopes.
struct MonotonePiecewiseLinear {
  std::vector<double> alpha;
  std::vector<double> beta;
  double k_left = 1.0;
  double k_right = 1.0;

  int size() const { return static_cast<int>(alpha.size()); }
};

/// Builds the map from 2B+2 strictly positive values laid out as
/// [dAlpha_neg(B/2), dAlpha_pos(B/2), dBeta_neg(B/2), dBeta_pos(B/2), k_left, k_right].
/// Negative-side points are minus the running sums of the negative deltas,
/// positive-side points are the running sums of the positive deltas.
/// Throws std::logic_error if any value is not strictly positive or B is odd.
MonotonePiecewiseLinear plf_build(std::span<const double> positive);

double plf_forward(const MonotonePiecewiseLinear& f, double z);
double plf_inverse(const MonotonePiecewiseLinear& f, double z_out);

namespace plf_detail {

/// Segment code: -1 left outlier, B-1 right outlier, otherwise the interior
/// segment [alpha[s], alpha[s+1]). Breakpoints belong to the segment on
/// their right.
int locate(const double* knots, int count, double z);

/// Cumulative construction of control points from positive deltas.
void build_points(const double* positive, int count, double* alpha, double* beta);

/// Evaluates f at z given a located segment.
double evaluate(const double* alpha, const double* beta, int count, double k_left, double k_right,
                int segment, double z);
/// Evaluates the inverse at z_out given a segment located on beta.
double evaluate_inverse(const double* alpha, const double* beta, int count, double k_left,
                        double k_right, int segment, double z_out);

/// Partial derivatives of f at z. Fills d/dalpha, d/dbeta (length count, only
/// touched entries written, the rest zeroed), and returns df/dz.
double partials(const double* alpha, const double* beta, int count, double k_left, double k_right,
                int segment, double z, double* d_alpha, double* d_beta, double* d_k_left,
                double* d_k_right);

/// Chains d/dalpha, d/dbeta of the control points back onto the positive deltas
/// (same layout as plf_build input, first 2B entries).
void points_backward(const double* d_alpha, const double* d_beta, int count, double* d_positive);

}  // namespace plf_detail

}  // namespace cadex
