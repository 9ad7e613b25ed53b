#include "agtm/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace agtm {

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double squared_norm(std::span<const double> x) { return dot(x, x); }

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

std::vector<double> softmax_stable(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax of empty vector");
  const double max = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> softmax_backward(std::span<const double> probs,
                                     std::span<const double> grad_out) {
  const double inner = dot(probs, grad_out);
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] * (grad_out[i] - inner);
  return out;
}

namespace {

struct Moments {
  double mean;
  double inv_std;
};

Moments moments(std::span<const double> x, double eps) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  return {mean, 1.0 / std::sqrt(var + eps)};
}

}  // namespace

std::vector<double> layer_norm(std::span<const double> x, double eps) {
  if (x.size() < 2) throw std::invalid_argument("layer_norm needs dimension >= 2");
  const auto [mean, inv_std] = moments(x, eps);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) * inv_std;
  return out;
}

std::vector<double> layer_norm_backward(std::span<const double> x,
                                        std::span<const double> grad_out, double eps) {
  if (x.size() < 2) throw std::invalid_argument("layer_norm needs dimension >= 2");
  const auto [mean, inv_std] = moments(x, eps);
  const double n = static_cast<double>(x.size());
  std::vector<double> y(x.size());
  double mean_g = 0.0;
  double mean_gy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = (x[i] - mean) * inv_std;
    mean_g += grad_out[i];
    mean_gy += grad_out[i] * y[i];
  }
  mean_g /= n;
  mean_gy /= n;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = inv_std * (grad_out[i] - mean_g - y[i] * mean_gy);
  }
  return out;
}

void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state,
                const AdamWOptions& options, std::string_view block) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw std::invalid_argument("adamw_step: shape mismatch in block " + std::string(block));
  }
  if (!all_finite(grads)) {
    throw std::runtime_error("adamw_step: non-finite gradient in block " + std::string(block));
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bias1 = 1.0 - std::pow(options.beta1, t);
  const double bias2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = options.beta1 * state.m[i] + (1.0 - options.beta1) * g;
    state.v[i] = options.beta2 * state.v[i] + (1.0 - options.beta2) * g * g;
    const double m_hat = state.m[i] / bias1;
    const double v_hat = state.v[i] / bias2;
    params[i] -= options.lr *
                 (m_hat / (std::sqrt(v_hat) + options.eps) + options.weight_decay * params[i]);
  }
}

GradCheckReport finite_diff_check(const LossFn& loss, std::span<const double> params,
                                  std::span<const double> analytic,
                                  const GradCheckOptions& options) {
  if (params.size() != analytic.size()) {
    throw std::invalid_argument("finite_diff_check: gradient size mismatch");
  }
  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coords != 0 && options.max_coords < coords.size()) {
    Rng rng(options.seed);
    rng.shuffle(std::span(coords));
    coords.resize(options.max_coords);
    std::sort(coords.begin(), coords.end());
  }

  std::vector<double> probe(params.begin(), params.end());
  GradCheckReport report;
  for (std::size_t c : coords) {
    const double original = probe[c];
    probe[c] = original + options.step;
    const double up = loss(probe);
    probe[c] = original - options.step;
    const double down = loss(probe);
    probe[c] = original;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::runtime_error("finite_diff_check: non-finite loss at coordinate " +
                               std::to_string(c));
    }
    const double numeric = (up - down) / (2.0 * options.step);
    const double denom =
        std::max({std::abs(analytic[c]), std::abs(numeric), options.denom_floor});
    const double rel = std::abs(analytic[c] - numeric) / denom;
    if (rel > report.max_rel_error || report.checked == 0) {
      report.max_rel_error = rel;
      report.worst_index = c;
      report.worst_analytic = analytic[c];
      report.worst_numeric = numeric;
    }
    ++report.checked;
  }
  report.passed = report.max_rel_error < options.tol;
  return report;
}

void glorot_uniform(std::span<double> values, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : values) v = rng.uniform(-limit, limit);
}

void glorot_uniform(Matrix& m, Rng& rng) { glorot_uniform(m.data(), m.cols(), m.rows(), rng); }

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace agtm
