#include "cadex/plf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cadex {

double positive_map(double raw, double floor) {
  const double sp = raw > 0.0 ? raw + std::log1p(std::exp(-raw)) : std::log1p(std::exp(raw));
  return sp + floor;
}

double positive_map_derivative(double raw) {
  if (raw >= 0.0) return 1.0 / (1.0 + std::exp(-raw));
  const double e = std::exp(raw);
  return e / (1.0 + e);
}

double positive_map_inverse(double target, double floor) {
  const double y = target - floor;
  if (!(y > 0.0)) throw std::invalid_argument("positive_map_inverse: target must exceed the floor");
  // log(expm1(y)) with a guard for large y
  return y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y));
}

namespace plf_detail {

int locate(const double* knots, int count, double z) {
  if (z < knots[0]) return -1;
  if (z >= knots[count - 1]) return count - 1;
  // first knot strictly greater than z, minus one
  const double* it = std::upper_bound(knots, knots + count, z);
  return static_cast<int>(it - knots) - 1;
}

void build_points(const double* positive, int count, double* alpha, double* beta) {
  const int half = count / 2;
  const double* da_neg = positive;
  const double* da_pos = positive + half;
  const double* db_neg = positive + 2 * half;
  const double* db_pos = positive + 3 * half;
  double sa = 0.0;
  double sb = 0.0;
  for (int k = 0; k < half; ++k) {
    sa += da_neg[k];
    sb += db_neg[k];
    alpha[half - 1 - k] = -sa;
    beta[half - 1 - k] = -sb;
  }
  sa = 0.0;
  sb = 0.0;
  for (int k = 0; k < half; ++k) {
    sa += da_pos[k];
    sb += db_pos[k];
    alpha[half + k] = sa;
    beta[half + k] = sb;
  }
}

double evaluate(const double* alpha, const double* beta, int count, double k_left, double k_right,
                int segment, double z) {
  if (segment < 0) return beta[0] + k_left * (z - alpha[0]);
  if (segment >= count - 1) return beta[count - 1] + k_right * (z - alpha[count - 1]);
  const double a0 = alpha[segment];
  const double a1 = alpha[segment + 1];
  const double b0 = beta[segment];
  const double b1 = beta[segment + 1];
  return (z - a0) / (a1 - a0) * (b1 - b0) + b0;
}

double evaluate_inverse(const double* alpha, const double* beta, int count, double k_left,
                        double k_right, int segment, double z_out) {
  if (segment < 0) return alpha[0] + (z_out - beta[0]) / k_left;
  if (segment >= count - 1) return alpha[count - 1] + (z_out - beta[count - 1]) / k_right;
  const double a0 = alpha[segment];
  const double a1 = alpha[segment + 1];
  const double b0 = beta[segment];
  const double b1 = beta[segment + 1];
  return (z_out - b0) / (b1 - b0) * (a1 - a0) + a0;
}

double partials(const double* alpha, const double* beta, int count, double k_left, double k_right,
                int segment, double z, double* d_alpha, double* d_beta, double* d_k_left,
                double* d_k_right) {
  std::fill(d_alpha, d_alpha + count, 0.0);
  std::fill(d_beta, d_beta + count, 0.0);
  *d_k_left = 0.0;
  *d_k_right = 0.0;
  if (segment < 0) {
    d_beta[0] = 1.0;
    d_alpha[0] = -k_left;
    *d_k_left = z - alpha[0];
    return k_left;
  }
  if (segment >= count - 1) {
    d_beta[count - 1] = 1.0;
    d_alpha[count - 1] = -k_right;
    *d_k_right = z - alpha[count - 1];
    return k_right;
  }
  const double a0 = alpha[segment];
  const double a1 = alpha[segment + 1];
  const double da = a1 - a0;
  const double slope = (beta[segment + 1] - beta[segment]) / da;
  const double r = (z - a0) / da;
  d_beta[segment] = 1.0 - r;
  d_beta[segment + 1] = r;
  d_alpha[segment] = -slope * (1.0 - r);
  d_alpha[segment + 1] = -slope * r;
  return slope;
}

void points_backward(const double* d_alpha, const double* d_beta, int count, double* d_positive) {
  const int half = count / 2;
  double* da_neg = d_positive;
  double* da_pos = d_positive + half;
  double* db_neg = d_positive + 2 * half;
  double* db_pos = d_positive + 3 * half;
  // alpha[half-1-k] = -sum_{i<=k} da_neg[i]  =>  d da_neg[i] = -sum_{k>=i} d alpha[half-1-k]
  double acc_a = 0.0;
  double acc_b = 0.0;
  for (int i = half - 1; i >= 0; --i) {
    acc_a += d_alpha[half - 1 - i];
    acc_b += d_beta[half - 1 - i];
    da_neg[i] = -acc_a;
    db_neg[i] = -acc_b;
  }
  acc_a = 0.0;
  acc_b = 0.0;
  for (int i = half - 1; i >= 0; --i) {
    acc_a += d_alpha[half + i];
    acc_b += d_beta[half + i];
    da_pos[i] = acc_a;
    db_pos[i] = acc_b;
  }
}

}  // namespace plf_detail

MonotonePiecewiseLinear plf_build(std::span<const double> positive) {
  if (positive.size() < 4 || (positive.size() - 2) % 4 != 0) {
    throw std::logic_error("plf_build: expected 2B+2 values with even B, got " +
                           std::to_string(positive.size()));
  }
  for (std::size_t k = 0; k < positive.size(); ++k) {
    if (!(positive[k] > 0.0)) {
      throw std::logic_error("plf_build: non-positive delta at index " + std::to_string(k));
    }
  }
  const int count = static_cast<int>(positive.size() - 2) / 2;
  MonotonePiecewiseLinear f;
  f.alpha.resize(count);
  f.beta.resize(count);
  plf_detail::build_points(positive.data(), count, f.alpha.data(), f.beta.data());
  f.k_left = positive[2 * count];
  f.k_right = positive[2 * count + 1];
  return f;
}

double plf_forward(const MonotonePiecewiseLinear& f, double z) {
  const int n = f.size();
  const int s = plf_detail::locate(f.alpha.data(), n, z);
  return plf_detail::evaluate(f.alpha.data(), f.beta.data(), n, f.k_left, f.k_right, s, z);
}

double plf_inverse(const MonotonePiecewiseLinear& f, double z_out) {
  const int n = f.size();
  const int s = plf_detail::locate(f.beta.data(), n, z_out);
  return plf_detail::evaluate_inverse(f.alpha.data(), f.beta.data(), n, f.k_left, f.k_right, s,
                                      z_out);
}

}  // namespace cadex
