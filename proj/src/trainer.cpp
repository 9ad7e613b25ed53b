#include "agtm/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "agtm/eval.hpp"
#include "agtm/random.hpp"
#include "text_format.hpp"

namespace agtm {

SampledEpoch sample_epoch(const InteractionSet& train, const InteractionGraph& graph,
                          std::uint64_t seed, std::size_t epoch) {
  if (train.empty()) throw std::invalid_argument("sample_epoch: empty training set");
  if (graph.n_users() != train.n_users() || graph.n_items() != train.n_items()) {
    throw std::invalid_argument("sample_epoch: graph does not match the training set");
  }
  const auto& pairs = train.pairs();
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(Rng::derive(Rng::derive(seed, 0x5a5a), epoch));
  rng.shuffle(std::span(order));

  SampledEpoch out;
  out.triples.reserve(pairs.size());
  const std::size_t n_items = train.n_items();
  for (std::size_t idx : order) {
    const auto& p = pairs[idx];
    if (graph.user_degree(p.user) >= n_items) {
      ++out.skipped;
      continue;
    }
    std::uint32_t neg = 0;
    do {
      neg = static_cast<std::uint32_t>(rng.below(n_items));
    } while (graph.has_edge(p.user, neg));
    out.triples.push_back({p.user, p.item, neg});
  }
  return out;
}

double bpr_loss(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  if (pos_scores.size() != neg_scores.size()) {
    throw std::invalid_argument("bpr_loss: score vectors differ in length");
  }
  double loss = 0.0;
  for (std::size_t n = 0; n < pos_scores.size(); ++n) {
    loss += softplus(neg_scores[n] - pos_scores[n]);
  }
  return loss;
}

double l2_penalty(const ModelParams& params) {
  double s = 0.0;
  params.for_each_block([&](const char*, const Matrix& m) { s += squared_norm(m.data()); });
  return s;
}

double bpr_loss(std::span<const double> pos_scores, std::span<const double> neg_scores,
                const ModelParams& params, RegMode reg_mode, double weight_decay) {
  double loss = bpr_loss(pos_scores, neg_scores);
  if (reg_mode == RegMode::loss_term) loss += weight_decay * l2_penalty(params);
  return loss;
}

double bpr_batch_loss(const Matrix& final_user, const Matrix& final_item,
                      std::span<const BprTriple> triples, Matrix* grad_user, Matrix* grad_item) {
  double loss = 0.0;
  for (const auto& t : triples) {
    const auto eu = final_user.row(t.user);
    const auto ei = final_item.row(t.pos);
    const auto ej = final_item.row(t.neg);
    const double margin = dot(eu, ei) - dot(eu, ej);
    loss += softplus(-margin);
    if (grad_user == nullptr || grad_item == nullptr) continue;
    // d softplus(-x) / dx = -sigmoid(-x)
    const double g = -sigmoid(-margin);
    auto gu = grad_user->row(t.user);
    axpy(g, ei, gu);
    axpy(-g, ej, gu);
    axpy(g, eu, grad_item->row(t.pos));
    axpy(-g, eu, grad_item->row(t.neg));
  }
  return loss;
}

double bpr_objective(const InteractionGraph& graph, const ModelParams& params,
                     const VariantSpec& variant, std::span<const BprTriple> triples,
                     RegMode reg_mode, double weight_decay, ModelParams* grad) {
  const auto cache = forward(graph, params, variant);
  Matrix gu;
  Matrix gi;
  if (grad != nullptr) {
    gu = Matrix(cache.final_user.rows(), cache.final_user.cols());
    gi = Matrix(cache.final_item.rows(), cache.final_item.cols());
  }
  double loss = bpr_batch_loss(cache.final_user, cache.final_item, triples,
                               grad != nullptr ? &gu : nullptr, grad != nullptr ? &gi : nullptr);
  if (reg_mode == RegMode::loss_term) loss += weight_decay * l2_penalty(params);
  if (grad != nullptr) {
    *grad = backward(gu, gi, cache, graph, params, variant);
    if (reg_mode == RegMode::loss_term) {
      const auto theta = params.flatten();
      auto flat = grad->flatten();
      for (std::size_t n = 0; n < flat.size(); ++n) flat[n] += 2.0 * weight_decay * theta[n];
      grad->assign(flat);
    }
  }
  return loss;
}

void TrainConfig::validate() const {
  variant.validate();
  if (!(lr > 0) || !(weight_decay >= 0)) {
    throw std::invalid_argument("train config: lr must be positive and weight_decay >= 0");
  }
  if (batch_size == 0 || eval_every == 0 || patience == 0) {
    throw std::invalid_argument("train config: batch_size, eval_every and patience must be positive");
  }
  if (patience % eval_every != 0) {
    throw std::invalid_argument("train config: eval_every must divide patience");
  }
}

TrainResult train(const DatasetSplit& split, const ModelInputs& inputs, const TrainConfig& config,
                  std::ostream* progress) {
  config.validate();
  if (split.train.empty()) throw std::invalid_argument("train: empty training set");
  const InteractionGraph graph(split.train);
  const VariantSpec& variant = config.variant;

  TrainResult result;
  result.variant = variant;
  ModelParams params = init_params(variant, graph, inputs, config.seed);
  result.best = params;
  if (config.max_epochs == 0) return result;

  AdamWOptions options;
  options.lr = config.lr;
  options.weight_decay = config.reg_mode == RegMode::decoupled ? config.weight_decay : 0.0;
  std::vector<AdamWState> states;
  params.for_each_block([&](const char*, const Matrix& m) { states.emplace_back(m.size()); });

  const bool has_validation = !split.validation.empty();
  double best_ndcg = -std::numeric_limits<double>::infinity();
  ModelParams grad;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto sampled = sample_epoch(split.train, graph, config.seed, epoch);
    if (epoch == 1) result.skipped_pairs = sampled.skipped;
    if (epoch == 1 && sampled.skipped > 0 && progress != nullptr) {
      *progress << "warning: " << sampled.skipped
                << " training pairs skipped (user has interacted with every item)\n";
    }
    const std::span<const BprTriple> triples(sampled.triples);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < triples.size(); start += config.batch_size) {
      const auto batch = triples.subspan(start, std::min(config.batch_size, triples.size() - start));
      const double loss =
          bpr_objective(graph, params, variant, batch, config.reg_mode, config.weight_decay, &grad);
      if (!std::isfinite(loss) || !all_finite(grad.flatten())) {
        result.aborted = true;
        result.abort_reason = "non-finite loss at epoch " + std::to_string(epoch) +
                              ", batch starting at triple " + std::to_string(start);
        if (result.evaluations == 0) result.best = params;
        if (progress != nullptr) *progress << "error: " << result.abort_reason << '\n';
        return result;
      }
      epoch_loss += loss;
      std::size_t s = 0;
      std::vector<const Matrix*> grads;
      grad.for_each_block([&](const char*, const Matrix& m) { grads.push_back(&m); });
      params.for_each_block([&](const char* name, Matrix& m) {
        adamw_step(m.data(), grads[s]->data(), states[s], options, name);
        ++s;
      });
    }

    TrainLogRow row;
    row.epoch = epoch;
    row.loss = triples.empty() ? 0.0 : epoch_loss / static_cast<double>(triples.size());
    const bool eval_now =
        has_validation && (epoch % config.eval_every == 0 || epoch == config.max_epochs);
    if (eval_now) {
      const auto cache = forward(graph, params, variant);
      const auto metrics =
          evaluate(cache.final_user, cache.final_item, split, EvalTarget::validation, 20);
      row.val_recall = metrics.mean_recall;
      row.val_ndcg = metrics.mean_ndcg;
      ++result.evaluations;
      if (metrics.mean_ndcg > best_ndcg) {
        best_ndcg = metrics.mean_ndcg;
        result.best = params;
        result.best_epoch = epoch;
        result.best_val_ndcg = metrics.mean_ndcg;
      }
      if (progress != nullptr) {
        *progress << "epoch " << epoch << " loss " << detail::format_g(row.loss, 6)
                  << " val_recall@20 " << detail::format_g(metrics.mean_recall, 6)
                  << " val_ndcg@20 " << detail::format_g(metrics.mean_ndcg, 6) << '\n';
      }
    }
    result.log.push_back(row);
    if (eval_now && epoch - result.best_epoch >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  if (!has_validation) {
    result.best = params;
    result.best_epoch = result.log.empty() ? 0 : result.log.back().epoch;
  }
  return result;
}

void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "epoch\tloss\tval_recall20\tval_ndcg20\n";
  for (const auto& row : log) {
    out << row.epoch << '\t' << detail::format_g(row.loss) << '\t';
    if (row.val_recall) out << detail::format_g(*row.val_recall);
    out << '\t';
    if (row.val_ndcg) out << detail::format_g(*row.val_ndcg);
    out << '\n';
  }
}

}  // namespace agtm
