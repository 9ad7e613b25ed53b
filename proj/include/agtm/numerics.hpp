#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "agtm/matrix.hpp"
#include "agtm/random.hpp"

namespace agtm {

/// Softmax with max-subtraction. Throws on empty input.
std::vector<double> softmax_stable(std::span<const double> logits);

/// Given softmax output p and upstream gradient g, returns dL/dlogits
/// = p * (g - <p, g>).
std::vector<double> softmax_backward(std::span<const double> probs,
                                     std::span<const double> grad_out);

constexpr double kLayerNormEps = 1e-5;

/// Layer normalization without affine parameters: (x - mean) / sqrt(var + eps)
/// using the population variance. A constant vector maps to zeros.
std::vector<double> layer_norm(std::span<const double> x, double eps = kLayerNormEps);

/// Adjoint of layer_norm at x.
std::vector<double> layer_norm_backward(std::span<const double> x,
                                        std::span<const double> grad_out,
                                        double eps = kLayerNormEps);

/// How L2 regularization is realized.
enum class RegMode {
  decoupled,  // AdamW weight decay
  loss_term,  // lambda * ||theta||^2 added to the loss, decay disabled
};

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step_count = 0;

  explicit AdamWState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One decoupled AdamW update of a parameter block in place:
///   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)
/// Throws if any gradient entry is non-finite; the message names `block`.
void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                const AdamWOptions& options, std::string_view block = "params");

struct GradCheckOptions {
  double step = 1e-3;
  double tol = 1e-4;
  /// Coordinates to probe; 0 checks every coordinate.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
  /// Lower bound on the relative-error denominator, so coordinates whose true
  /// gradient is ~0 are judged on absolute error at this scale.
  double denom_floor = 1e-8;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

using LossFn = std::function<double(std::span<const double>)>;

/// Central-difference comparison of `analytic` against `loss` at `params`.
/// Relative error per coordinate is |a - n| / max(|a|, |n|, denom_floor).
GradCheckReport finite_diff_check(const LossFn& loss, std::span<const double> params,
                                  std::span<const double> analytic,
                                  const GradCheckOptions& options = {});

/// Glorot/Xavier uniform: U(-r, r), r = sqrt(6 / (rows + cols)).
void glorot_uniform(Matrix& m, Rng& rng);
void glorot_uniform(std::span<double> values, std::size_t fan_in, std::size_t fan_out,
                    Rng& rng);

double softplus(double x);
double sigmoid(double x);

}  // namespace agtm
