#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agtm/dataset.hpp"
#include "agtm/graph.hpp"
#include "agtm/model.hpp"
#include "agtm/numerics.hpp"

namespace agtm {

struct BprTriple {
  std::uint32_t user = 0;
  std::uint32_t pos = 0;
  std::uint32_t neg = 0;

  bool operator==(const BprTriple&) const = default;
};

struct SampledEpoch {
  std::vector<BprTriple> triples;
  std::size_t skipped = 0;  // pairs whose user has interacted with every item
};

/// One triple per training pair in a seeded shuffled order; the negative is
/// drawn uniformly among items the user has no training pair with.
SampledEpoch sample_epoch(const InteractionSet& train, const InteractionGraph& graph,
                          std::uint64_t seed, std::size_t epoch);

/// -sum ln sigmoid(pos - neg), computed as sum softplus(neg - pos).
double bpr_loss(std::span<const double> pos_scores, std::span<const double> neg_scores);

/// As above plus weight_decay * ||theta||^2 when reg_mode is loss_term.
double bpr_loss(std::span<const double> pos_scores, std::span<const double> neg_scores,
                const ModelParams& params, RegMode reg_mode, double weight_decay);

/// BPR loss of `triples` under final embeddings; accumulates gradients on the
/// final embeddings when the outputs are non-null.
double bpr_batch_loss(const Matrix& final_user, const Matrix& final_item,
                      std::span<const BprTriple> triples, Matrix* grad_user, Matrix* grad_item);

double l2_penalty(const ModelParams& params);

/// Composite training objective for a batch: forward, BPR, optional L2 term.
/// Fills `grad` when non-null.
double bpr_objective(const InteractionGraph& graph, const ModelParams& params,
                     const VariantSpec& variant, std::span<const BprTriple> triples,
                     RegMode reg_mode, double weight_decay, ModelParams* grad);

struct TrainConfig {
  VariantSpec variant;
  double lr = 1e-3;
  double weight_decay = 1e-3;
  std::size_t batch_size = 1024;
  std::size_t max_epochs = 1000;
  std::size_t eval_every = 10;
  std::size_t patience = 100;  // in epochs
  std::uint64_t seed = 0;
  RegMode reg_mode = RegMode::decoupled;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct TrainLogRow {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean objective per triple
  std::optional<double> val_recall;
  std::optional<double> val_ndcg;
};

struct TrainResult {
  VariantSpec variant;
  ModelParams best;
  std::vector<TrainLogRow> log;
  double best_val_ndcg = 0.0;
  std::size_t best_epoch = 0;
  std::size_t evaluations = 0;
  bool stopped_early = false;
  bool aborted = false;
  std::string abort_reason;
  std::size_t skipped_pairs = 0;
};

/// BPR training with AdamW, validation NDCG@20 every eval_every epochs and
/// patience-based early stopping. Returns the best validated parameters (the
/// final ones when no validation pairs exist). A non-finite loss stops the run
/// with aborted = true and the last good parameters.
TrainResult train(const DatasetSplit& split, const ModelInputs& inputs, const TrainConfig& config,
                  std::ostream* progress = nullptr);

/// TSV: epoch, loss, val_recall20, val_ndcg20 (empty metric cells on non-eval epochs).
void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& file);

}  // namespace agtm
