#include "agtm/condenser.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "agtm/parallel.hpp"
#include "agtm/random.hpp"

namespace agtm {
namespace {

// y = W x + b
void affine(const Matrix& w, std::span<const double> b, std::span<const double> x,
            std::span<double> y) {
  for (std::size_t r = 0; r < w.rows(); ++r) y[r] = dot(w.row(r), x) + b[r];
}

void relu_inplace(std::span<double> v) {
  for (double& x : v) x = std::max(0.0, x);
}

// Backprop through y = W x + b: accumulates dW, db and returns dx.
void affine_backward(const Matrix& w, std::span<const double> x, std::span<const double> dy,
                     Matrix& dw, std::span<double> db, std::span<double> dx) {
  std::fill(dx.begin(), dx.end(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    axpy(g, x, dw.row(r));
    db[r] += g;
    axpy(g, w.row(r), dx);
  }
}

struct Activations {
  std::vector<double> h_pre, h, code, g_pre, g, recon;
};

void run_forward(std::span<const double> x, const AutoencoderParams& p, Activations& a) {
  a.h_pre.resize(p.hidden_dim());
  a.code.resize(p.code_dim());
  a.g_pre.resize(p.hidden_dim());
  a.recon.resize(p.input_dim());
  affine(p.enc_w1, p.enc_b1, x, a.h_pre);
  a.h = a.h_pre;
  relu_inplace(a.h);
  affine(p.enc_w2, p.enc_b2, a.h, a.code);
  affine(p.dec_w1, p.dec_b1, a.code, a.g_pre);
  a.g = a.g_pre;
  relu_inplace(a.g);
  affine(p.dec_w2, p.dec_b2, a.g, a.recon);
}

double sum_squares(const AutoencoderParams& p) {
  double s = 0.0;
  p.for_each_block([&](const char*, std::span<const double> b) { s += squared_norm(b); });
  return s;
}

void check_input(const Matrix& batch, const AutoencoderParams& params) {
  if (batch.cols() != params.input_dim()) {
    throw std::invalid_argument("autoencoder input dimension " + std::to_string(batch.cols()) +
                                " does not match d_o = " + std::to_string(params.input_dim()));
  }
}

// Rows per gradient chunk; chunks are reduced in order so results do not
// depend on the worker count.
constexpr std::size_t kChunkRows = 16;

}  // namespace

AutoencoderParams::AutoencoderParams(std::size_t input_dim, std::size_t hidden_dim,
                                     std::size_t code_dim)
    : enc_w1(hidden_dim, input_dim),
      enc_b1(hidden_dim, 0.0),
      enc_w2(code_dim, hidden_dim),
      enc_b2(code_dim, 0.0),
      dec_w1(hidden_dim, code_dim),
      dec_b1(hidden_dim, 0.0),
      dec_w2(input_dim, hidden_dim),
      dec_b2(input_dim, 0.0) {}

std::size_t AutoencoderParams::parameter_count() const {
  std::size_t n = 0;
  for_each_block([&](const char*, std::span<const double> b) { n += b.size(); });
  return n;
}

std::vector<double> AutoencoderParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for_each_block(
      [&](const char*, std::span<const double> b) { out.insert(out.end(), b.begin(), b.end()); });
  return out;
}

void AutoencoderParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("assign: size mismatch");
  std::size_t offset = 0;
  for_each_block([&](const char*, std::span<double> b) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), b.size(), b.begin());
    offset += b.size();
  });
}

Checkpoint AutoencoderParams::to_checkpoint() const {
  Checkpoint cp;
  cp.descriptor = "autoencoder;d_o=" + std::to_string(input_dim()) +
                  ";d_h=" + std::to_string(hidden_dim()) + ";d=" + std::to_string(code_dim());
  cp.blocks.emplace_back("enc_w1", enc_w1);
  cp.blocks.emplace_back("enc_w2", enc_w2);
  cp.blocks.emplace_back("dec_w1", dec_w1);
  cp.blocks.emplace_back("dec_w2", dec_w2);
  const auto as_column = [](const std::vector<double>& v) {
    Matrix m(v.size(), 1);
    std::copy(v.begin(), v.end(), m.data().begin());
    return m;
  };
  cp.blocks.emplace_back("enc_b1", as_column(enc_b1));
  cp.blocks.emplace_back("enc_b2", as_column(enc_b2));
  cp.blocks.emplace_back("dec_b1", as_column(dec_b1));
  cp.blocks.emplace_back("dec_b2", as_column(dec_b2));
  return cp;
}

AutoencoderParams AutoencoderParams::from_checkpoint(const Checkpoint& cp) {
  const auto need = [&](const char* name) -> const Matrix& {
    const Matrix* m = cp.find(name);
    if (m == nullptr) throw std::runtime_error(std::string("autoencoder checkpoint lacks ") + name);
    return *m;
  };
  const Matrix& w1 = need("enc_w1");
  const Matrix& w2 = need("enc_w2");
  AutoencoderParams p(w1.cols(), w1.rows(), w2.rows());
  std::size_t i = 0;
  p.for_each_block([&](const char* name, std::span<double> block) {
    const Matrix& src = need(name);
    if (src.size() != block.size()) {
      throw std::runtime_error(std::string("autoencoder checkpoint block ") + name +
                               " has the wrong shape");
    }
    std::copy(src.data().begin(), src.data().end(), block.begin());
    ++i;
  });
  return p;
}

AutoencoderParams init_autoencoder(std::size_t input_dim, std::size_t hidden_dim,
                                   std::size_t code_dim, std::uint64_t seed) {
  AutoencoderParams p(input_dim, hidden_dim, code_dim);
  Rng rng(Rng::derive(seed, 0xae));
  glorot_uniform(p.enc_w1, rng);
  glorot_uniform(p.enc_w2, rng);
  glorot_uniform(p.dec_w1, rng);
  glorot_uniform(p.dec_w2, rng);
  return p;
}

std::vector<double> encode(std::span<const double> x, const AutoencoderParams& params) {
  if (x.size() != params.input_dim()) {
    throw std::invalid_argument("encode: expected dimension " +
                                std::to_string(params.input_dim()) + ", got " +
                                std::to_string(x.size()));
  }
  std::vector<double> h(params.hidden_dim());
  affine(params.enc_w1, params.enc_b1, x, h);
  relu_inplace(h);
  std::vector<double> code(params.code_dim());
  affine(params.enc_w2, params.enc_b2, h, code);
  return code;
}

std::vector<double> decode(std::span<const double> code, const AutoencoderParams& params) {
  if (code.size() != params.code_dim()) {
    throw std::invalid_argument("decode: expected dimension " + std::to_string(params.code_dim()) +
                                ", got " + std::to_string(code.size()));
  }
  std::vector<double> g(params.hidden_dim());
  affine(params.dec_w1, params.dec_b1, code, g);
  relu_inplace(g);
  std::vector<double> recon(params.input_dim());
  affine(params.dec_w2, params.dec_b2, g, recon);
  return recon;
}

Matrix encode_rows(const Matrix& x, const AutoencoderParams& params) {
  check_input(x, params);
  Matrix out(x.rows(), params.code_dim());
  parallel_for(x.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const auto code = encode(x.row(r), params);
      std::copy(code.begin(), code.end(), out.row(r).begin());
    }
  });
  return out;
}

void CondenserConfig::validate() const {
  if (!(lr > 0) || !(weight_decay >= 0) || batch_size == 0 || hidden == 0 || dim == 0) {
    throw std::invalid_argument(
        "condenser config: lr, batch_size, hidden and dim must be positive, weight_decay >= 0");
  }
}

double ae_loss(const Matrix& batch, std::span<const std::size_t> rows,
               const AutoencoderParams& params, RegMode reg_mode, double weight_decay) {
  check_input(batch, params);
  Activations a;
  double loss = 0.0;
  for (std::size_t r : rows) {
    const auto x = batch.row(r);
    run_forward(x, params, a);
    for (std::size_t j = 0; j < x.size(); ++j) loss += (a.recon[j] - x[j]) * (a.recon[j] - x[j]);
  }
  if (reg_mode == RegMode::loss_term) loss += weight_decay * sum_squares(params);
  return loss;
}

double ae_loss(const Matrix& batch, const AutoencoderParams& params, RegMode reg_mode,
               double weight_decay) {
  std::vector<std::size_t> rows(batch.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return ae_loss(batch, rows, params, reg_mode, weight_decay);
}

double ae_loss_and_grad(const Matrix& batch, std::span<const std::size_t> rows,
                        const AutoencoderParams& params, RegMode reg_mode, double weight_decay,
                        AutoencoderParams& grad) {
  check_input(batch, params);
  const std::size_t n_chunks = (rows.size() + kChunkRows - 1) / kChunkRows;
  std::vector<AutoencoderParams> chunk_grads(n_chunks);
  std::vector<double> chunk_loss(n_chunks, 0.0);

  parallel_for(n_chunks, [&](std::size_t begin, std::size_t end) {
    Activations a;
    std::vector<double> d_recon(params.input_dim()), d_g(params.hidden_dim()),
        d_code(params.code_dim()), d_h(params.hidden_dim()), d_x(params.input_dim());
    for (std::size_t c = begin; c < end; ++c) {
      AutoencoderParams& g =
          chunk_grads[c] = AutoencoderParams(params.input_dim(), params.hidden_dim(),
                                             params.code_dim());
      const std::size_t stop = std::min(rows.size(), (c + 1) * kChunkRows);
      for (std::size_t k = c * kChunkRows; k < stop; ++k) {
        const auto x = batch.row(rows[k]);
        run_forward(x, params, a);
        for (std::size_t j = 0; j < x.size(); ++j) {
          const double diff = a.recon[j] - x[j];
          chunk_loss[c] += diff * diff;
          d_recon[j] = 2.0 * diff;
        }
        affine_backward(params.dec_w2, a.g, d_recon, g.dec_w2, g.dec_b2, d_g);
        for (std::size_t j = 0; j < d_g.size(); ++j) {
          if (a.g_pre[j] <= 0.0) d_g[j] = 0.0;
        }
        affine_backward(params.dec_w1, a.code, d_g, g.dec_w1, g.dec_b1, d_code);
        affine_backward(params.enc_w2, a.h, d_code, g.enc_w2, g.enc_b2, d_h);
        for (std::size_t j = 0; j < d_h.size(); ++j) {
          if (a.h_pre[j] <= 0.0) d_h[j] = 0.0;
        }
        affine_backward(params.enc_w1, x, d_h, g.enc_w1, g.enc_b1, d_x);
      }
    }
  });

  grad = AutoencoderParams(params.input_dim(), params.hidden_dim(), params.code_dim());
  double loss = 0.0;
  auto flat = grad.flatten();
  for (std::size_t c = 0; c < n_chunks; ++c) {
    loss += chunk_loss[c];
    const auto part = chunk_grads[c].flatten();
    for (std::size_t j = 0; j < flat.size(); ++j) flat[j] += part[j];
  }
  if (reg_mode == RegMode::loss_term) {
    loss += weight_decay * sum_squares(params);
    const auto theta = params.flatten();
    for (std::size_t j = 0; j < flat.size(); ++j) flat[j] += 2.0 * weight_decay * theta[j];
  }
  grad.assign(flat);
  return loss;
}

CondenserResult train_autoencoder(const Matrix& x, const CondenserConfig& config) {
  config.validate();
  if (x.rows() == 0 || x.cols() == 0) throw std::invalid_argument("no embeddings to condense");

  CondenserResult result;
  result.params = init_autoencoder(x.cols(), config.hidden, config.dim, config.seed);
  AutoencoderParams& params = result.params;
  const double n = static_cast<double>(x.rows());
  result.epoch_loss.push_back(ae_loss(x, params, RegMode::decoupled, 0.0) / n);

  AdamWOptions options;
  options.lr = config.lr;
  options.weight_decay = config.reg_mode == RegMode::decoupled ? config.weight_decay : 0.0;
  std::vector<AdamWState> states;
  params.for_each_block(
      [&](const char*, std::span<const double> b) { states.emplace_back(b.size()); });

  std::vector<std::size_t> order(x.rows());
  AutoencoderParams grad;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(Rng::derive(config.seed, epoch));
    rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      const double loss =
          ae_loss_and_grad(x, rows, params, config.reg_mode, config.weight_decay, grad);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "autoencoder loss became non-finite at epoch " << epoch << ", batch starting at "
            << start << " (lr=" << config.lr << ")";
        throw std::runtime_error(msg.str());
      }
      std::size_t s = 0;
      std::vector<std::span<const double>> grads;
      grad.for_each_block([&](const char*, std::span<const double> b) { grads.push_back(b); });
      params.for_each_block([&](const char* name, std::span<double> b) {
        adamw_step(b, grads[s], states[s], options, name);
        ++s;
      });
    }
    result.epoch_loss.push_back(ae_loss(x, params, RegMode::decoupled, 0.0) / n);
  }
  result.condensed = encode_rows(x, params);
  return result;
}

}  // namespace agtm
