#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "agtm/checkpoint.hpp"
#include "agtm/matrix.hpp"
#include "agtm/numerics.hpp"

namespace agtm {

/// Two-layer encoder d_o -> d_h -> d and its mirror decoder d -> d_h -> d_o.
/// Hidden layers use ReLU; both output layers are linear.
struct AutoencoderParams {
  Matrix enc_w1;  // d_h x d_o
  std::vector<double> enc_b1;
  Matrix enc_w2;  // d x d_h
  std::vector<double> enc_b2;
  Matrix dec_w1;  // d_h x d
  std::vector<double> dec_b1;
  Matrix dec_w2;  // d_o x d_h
  std::vector<double> dec_b2;

  AutoencoderParams() = default;
  AutoencoderParams(std::size_t input_dim, std::size_t hidden_dim, std::size_t code_dim);

  std::size_t input_dim() const { return enc_w1.cols(); }
  std::size_t hidden_dim() const { return enc_w1.rows(); }
  std::size_t code_dim() const { return enc_w2.rows(); }
  std::size_t parameter_count() const;

  template <typename F>
  void for_each_block(F&& fn) {
    fn("enc_w1", enc_w1.data());
    fn("enc_b1", std::span<double>(enc_b1));
    fn("enc_w2", enc_w2.data());
    fn("enc_b2", std::span<double>(enc_b2));
    fn("dec_w1", dec_w1.data());
    fn("dec_b1", std::span<double>(dec_b1));
    fn("dec_w2", dec_w2.data());
    fn("dec_b2", std::span<double>(dec_b2));
  }
  template <typename F>
  void for_each_block(F&& fn) const {
    const_cast<AutoencoderParams*>(this)->for_each_block(
        [&](const char* name, std::span<double> s) { fn(name, std::span<const double>(s)); });
  }

  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  Checkpoint to_checkpoint() const;
  static AutoencoderParams from_checkpoint(const Checkpoint& checkpoint);

  bool operator==(const AutoencoderParams&) const = default;
};

/// Glorot-uniform weights, zero biases.
AutoencoderParams init_autoencoder(std::size_t input_dim, std::size_t hidden_dim,
                                   std::size_t code_dim, std::uint64_t seed);

std::vector<double> encode(std::span<const double> x, const AutoencoderParams& params);
std::vector<double> decode(std::span<const double> code, const AutoencoderParams& params);

/// Encodes every row of `x`.
Matrix encode_rows(const Matrix& x, const AutoencoderParams& params);

struct CondenserConfig {
  double lr = 1e-3;
  double weight_decay = 1e-2;
  std::size_t batch_size = 128;
  std::size_t epochs = 50;
  std::size_t hidden = 384;  // d_h
  std::size_t dim = 64;      // d
  std::uint64_t seed = 0;
  RegMode reg_mode = RegMode::decoupled;

  void validate() const;
  bool operator==(const CondenserConfig&) const = default;
};

/// Summed squared reconstruction error over the rows of `batch` listed in
/// `rows`, plus weight_decay * ||theta||^2 when reg_mode is loss_term.
double ae_loss(const Matrix& batch, std::span<const std::size_t> rows,
               const AutoencoderParams& params, RegMode reg_mode, double weight_decay);
double ae_loss(const Matrix& batch, const AutoencoderParams& params, RegMode reg_mode,
               double weight_decay);

/// Loss and its gradient (same layout as params).
double ae_loss_and_grad(const Matrix& batch, std::span<const std::size_t> rows,
                        const AutoencoderParams& params, RegMode reg_mode, double weight_decay,
                        AutoencoderParams& grad);

struct CondenserResult {
  AutoencoderParams params;
  Matrix condensed;
  /// Mean per-item reconstruction error over all rows; entry 0 is before training.
  std::vector<double> epoch_loss;
};

/// Shuffled minibatch AdamW on the reconstruction loss, `config.epochs` passes.
CondenserResult train_autoencoder(const Matrix& x, const CondenserConfig& config);

}  // namespace agtm
