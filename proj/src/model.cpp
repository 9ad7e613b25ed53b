#include "agtm/model.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "agtm/numerics.hpp"
#include "agtm/parallel.hpp"
#include "agtm/random.hpp"

namespace agtm {
namespace {

std::vector<std::string_view> split_list(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (!s.empty()) {
    const auto pos = s.find(sep);
    out.push_back(s.substr(0, pos));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::size_t parse_count(std::string_view s, const char* what) {
  std::size_t v = 0;
  try {
    std::size_t used = 0;
    v = std::stoul(std::string(s), &used);
    if (used != s.size()) throw std::invalid_argument("");
  } catch (...) {
    throw std::invalid_argument(std::string("invalid ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

void expect_rows(const Matrix& m, std::size_t rows, std::size_t cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw std::invalid_argument(std::string("parameter block ") + name + " is " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void expect_absent(const Matrix& m, const char* name) {
  if (!m.empty()) {
    throw std::invalid_argument(std::string("parameter block ") + name +
                                " is not used by this variant");
  }
}

// item0 = raw_x * proj_w^T
Matrix project_items(const Matrix& raw_x, const Matrix& proj_w) {
  Matrix out(raw_x.rows(), proj_w.rows());
  parallel_for(raw_x.rows(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t r = 0; r < proj_w.rows(); ++r) out(i, r) = dot(proj_w.row(r), raw_x.row(i));
    }
  });
  return out;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::agtm: return "agtm";
    case ModelKind::mf_bpr: return "mf_bpr";
    case ModelKind::lightgcn: return "lightgcn";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  name = trim(name);
  if (name == "agtm") return ModelKind::agtm;
  if (name == "mf_bpr") return ModelKind::mf_bpr;
  if (name == "lightgcn") return ModelKind::lightgcn;
  throw std::invalid_argument("unknown model '" + std::string(name) + "'");
}

std::string ablations_to_string(const Ablations& a) {
  std::string out;
  const auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += name;
  };
  add(a.no_tcm, "no_tcm");
  add(a.no_aaum, "no_aaum");
  add(a.no_ipm, "no_ipm");
  add(a.no_ae, "no_ae");
  return out;
}

Ablations parse_ablations(std::string_view text) {
  Ablations a;
  text = trim(text);
  if (text.empty() || text == "none") return a;
  for (auto name : split_list(text, ',')) {
    name = trim(name);
    if (name == "no_tcm") a.no_tcm = true;
    else if (name == "no_aaum") a.no_aaum = true;
    else if (name == "no_ipm") a.no_ipm = true;
    else if (name == "no_ae") a.no_ae = true;
    else throw std::invalid_argument("unknown ablation '" + std::string(name) + "'");
  }
  return a;
}

std::string_view to_string(CombineMode mode) {
  return mode == CombineMode::mean ? "mean_Lplus1" : "paper_literal_L";
}

CombineMode parse_combine_mode(std::string_view name) {
  name = trim(name);
  if (name == "mean_Lplus1") return CombineMode::mean;
  if (name == "paper_literal_L") return CombineMode::paper_literal;
  throw std::invalid_argument("unknown combine_mode '" + std::string(name) + "'");
}

ItemSource VariantSpec::item_source() const {
  if (model != ModelKind::agtm) return ItemSource::random;
  if (ablations.no_ae) return ItemSource::projected;
  if (ablations.no_tcm) return ItemSource::random;
  return ItemSource::condensed;
}

bool VariantSpec::attention_users() const {
  return model == ModelKind::agtm && !ablations.no_aaum && !ablations.no_ipm;
}

bool VariantSpec::propagates() const {
  switch (model) {
    case ModelKind::agtm: return !ablations.no_ipm;
    case ModelKind::lightgcn: return true;
    case ModelKind::mf_bpr: return false;
  }
  return false;
}

void VariantSpec::validate() const {
  if (model != ModelKind::agtm && ablations != Ablations{}) {
    throw std::invalid_argument("ablations apply to model=agtm only");
  }
  if (ablations.no_ae && ablations.no_tcm) {
    throw std::invalid_argument("no_ae and no_tcm are mutually exclusive");
  }
  if (attention_users() && heads == 0) throw std::invalid_argument("heads must be >= 1");
  if (propagates() && layers == 0 && combine == CombineMode::paper_literal) {
    throw std::invalid_argument("combine_mode=paper_literal_L requires layers >= 1");
  }
}

std::string VariantSpec::descriptor() const {
  return "model=" + std::string(to_string(model)) + ";ablations=" + ablations_to_string(ablations) +
         ";layers=" + std::to_string(layers) + ";heads=" + std::to_string(heads) +
         ";combine_mode=" + std::string(to_string(combine));
}

VariantSpec VariantSpec::from_descriptor(std::string_view text) {
  VariantSpec v;
  for (auto field : split_list(text, ';')) {
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("malformed variant descriptor '" + std::string(text) + "'");
    }
    const auto key = field.substr(0, eq);
    const auto value = field.substr(eq + 1);
    if (key == "model") v.model = parse_model_kind(value);
    else if (key == "ablations") v.ablations = parse_ablations(value);
    else if (key == "layers") v.layers = parse_count(value, "layers");
    else if (key == "heads") v.heads = parse_count(value, "heads");
    else if (key == "combine_mode") v.combine = parse_combine_mode(value);
    else throw std::invalid_argument("unknown descriptor key '" + std::string(key) + "'");
  }
  v.validate();
  return v;
}

std::size_t ModelParams::embedding_dim() const {
  if (!item_emb.empty()) return item_emb.cols();
  if (!proj_w.empty()) return proj_w.rows();
  if (!user_emb.empty()) return user_emb.cols();
  return attn.cols();
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_block([&](const char*, const Matrix& m) { n += m.size(); });
  return n;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams out;
  out.item_emb = Matrix(item_emb.rows(), item_emb.cols());
  out.attn = Matrix(attn.rows(), attn.cols());
  out.user_emb = Matrix(user_emb.rows(), user_emb.cols());
  out.proj_w = Matrix(proj_w.rows(), proj_w.cols());
  out.raw_x = Matrix(raw_x.rows(), raw_x.cols());
  return out;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for_each_block([&](const char*, const Matrix& m) {
    out.insert(out.end(), m.data().begin(), m.data().end());
  });
  return out;
}

void ModelParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("assign: size mismatch");
  std::size_t offset = 0;
  for_each_block([&](const char*, Matrix& m) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), m.size(), m.data().begin());
    offset += m.size();
  });
}

ModelParams init_params(const VariantSpec& variant, const InteractionGraph& graph,
                        const ModelInputs& inputs, std::uint64_t seed) {
  variant.validate();
  ModelParams p;
  std::size_t d = inputs.dim;
  switch (variant.item_source()) {
    case ItemSource::condensed:
      if (inputs.condensed == nullptr) {
        throw std::invalid_argument("variant requires condensed item embeddings");
      }
      if (inputs.condensed->rows() != graph.n_items()) {
        throw std::invalid_argument("condensed embeddings have " +
                                    std::to_string(inputs.condensed->rows()) + " rows, expected " +
                                    std::to_string(graph.n_items()));
      }
      p.item_emb = *inputs.condensed;
      d = p.item_emb.cols();
      break;
    case ItemSource::random: {
      p.item_emb = Matrix(graph.n_items(), d);
      Rng rng(Rng::derive(seed, 1));
      glorot_uniform(p.item_emb, rng);
      break;
    }
    case ItemSource::projected: {
      if (inputs.raw == nullptr) {
        throw std::invalid_argument("variant no_ae requires raw text embeddings");
      }
      if (inputs.raw->rows() != graph.n_items()) {
        throw std::invalid_argument("raw embeddings have " + std::to_string(inputs.raw->rows()) +
                                    " rows, expected " + std::to_string(graph.n_items()));
      }
      p.raw_x = *inputs.raw;
      p.proj_w = Matrix(d, p.raw_x.cols());
      Rng rng(Rng::derive(seed, 2));
      glorot_uniform(p.proj_w, rng);
      break;
    }
  }
  if (d == 0) throw std::invalid_argument("embedding dimension must be positive");
  if (variant.attention_users()) {
    p.attn = Matrix(variant.heads, d);
    Rng rng(Rng::derive(seed, 3));
    glorot_uniform(p.attn, rng);
  } else {
    p.user_emb = Matrix(graph.n_users(), d);
    Rng rng(Rng::derive(seed, 4));
    glorot_uniform(p.user_emb, rng);
  }
  check_params(variant, graph, p);
  return p;
}

void check_params(const VariantSpec& variant, const InteractionGraph& graph,
                  const ModelParams& params) {
  variant.validate();
  const std::size_t d = params.embedding_dim();
  if (d == 0) throw std::invalid_argument("model parameters are empty");
  if (variant.item_source() == ItemSource::projected) {
    expect_absent(params.item_emb, "item_emb");
    if (params.raw_x.empty() || params.proj_w.empty()) {
      throw std::invalid_argument("variant no_ae needs raw_x and proj_w blocks");
    }
    expect_rows(params.raw_x, graph.n_items(), params.raw_x.cols(), "raw_x");
    expect_rows(params.proj_w, d, params.raw_x.cols(), "proj_w");
  } else {
    expect_absent(params.raw_x, "raw_x");
    expect_absent(params.proj_w, "proj_w");
    expect_rows(params.item_emb, graph.n_items(), d, "item_emb");
  }
  if (variant.attention_users()) {
    expect_absent(params.user_emb, "user_emb");
    expect_rows(params.attn, variant.heads, d, "attn");
    if (d < 2) throw std::invalid_argument("attention user modeling needs dimension >= 2");
  } else {
    expect_absent(params.attn, "attn");
    expect_rows(params.user_emb, graph.n_users(), d, "user_emb");
  }
}

Matrix user_init_attention(const InteractionGraph& graph, const Matrix& item_emb,
                           const Matrix& attn, ForwardCache* cache) {
  if (item_emb.rows() != graph.n_items() || attn.cols() != item_emb.cols() || attn.rows() == 0) {
    throw std::invalid_argument("attention: inconsistent item/attention shapes");
  }
  if (item_emb.cols() < 2) throw std::invalid_argument("attention: dimension must be >= 2");
  for (std::size_t u = 0; u < graph.n_users(); ++u) {
    if (graph.user_degree(u) == 0) {
      throw std::invalid_argument("user " + std::to_string(u) +
                                  " has no training neighbors; attention is undefined");
    }
  }
  const std::size_t heads = attn.rows();
  const std::size_t d = item_emb.cols();
  const double head_weight = 1.0 / static_cast<double>(heads);
  std::vector<std::vector<double>> alpha(heads, std::vector<double>(graph.n_edges()));
  Matrix pooled(graph.n_users(), d);
  Matrix user0(graph.n_users(), d);

  parallel_for(graph.n_users(), [&](std::size_t begin, std::size_t end) {
    std::vector<double> logits;
    for (std::size_t u = begin; u < end; ++u) {
      const auto items = graph.user_neighbors(u);
      const std::size_t offset = graph.user_edge_offset(u);
      auto out = pooled.row(u);
      logits.resize(items.size());
      for (std::size_t k = 0; k < heads; ++k) {
        for (std::size_t n = 0; n < items.size(); ++n) {
          logits[n] = dot(attn.row(k), item_emb.row(items[n]));
        }
        const auto weights = softmax_stable(logits);
        for (std::size_t n = 0; n < items.size(); ++n) {
          alpha[k][offset + n] = weights[n];
          axpy(head_weight * weights[n], item_emb.row(items[n]), out);
        }
      }
      const auto normed = layer_norm(out);
      std::copy(normed.begin(), normed.end(), user0.row(u).begin());
    }
  });

  if (cache != nullptr) {
    cache->alpha = std::move(alpha);
    cache->pooled = std::move(pooled);
  }
  return user0;
}

ForwardCache forward(const InteractionGraph& graph, const ModelParams& params,
                     const VariantSpec& variant) {
  check_params(variant, graph, params);
  ForwardCache cache;
  cache.item0 = variant.item_source() == ItemSource::projected
                    ? project_items(params.raw_x, params.proj_w)
                    : params.item_emb;
  cache.user0 = variant.attention_users()
                    ? user_init_attention(graph, cache.item0, params.attn, &cache)
                    : params.user_emb;
  cache.stack = propagate_layers(cache.user0, cache.item0, graph, variant.effective_layers());
  if (variant.propagates()) {
    std::tie(cache.final_user, cache.final_item) = combine_layers(cache.stack, variant.combine);
  } else {
    cache.final_user = cache.user0;
    cache.final_item = cache.item0;
  }
  return cache;
}

double predict(const Matrix& final_user, const Matrix& final_item, std::size_t u, std::size_t i) {
  if (u >= final_user.rows() || i >= final_item.rows()) {
    throw std::out_of_range("predict: user or item index out of range");
  }
  return dot(final_user.row(u), final_item.row(i));
}

ModelParams backward(const Matrix& grad_final_user, const Matrix& grad_final_item,
                     const ForwardCache& cache, const InteractionGraph& graph,
                     const ModelParams& params, const VariantSpec& variant) {
  if (cache.final_user.empty() || cache.stack.user_layers.empty()) {
    throw std::invalid_argument("backward: missing forward cache");
  }
  if (!grad_final_user.same_shape(cache.final_user) ||
      !grad_final_item.same_shape(cache.final_item)) {
    throw std::invalid_argument("backward: gradient shapes do not match the forward pass");
  }
  ModelParams grad = params.zeros_like();

  // Layer combination and propagation adjoints down to layer 0.
  Matrix grad_user0;
  Matrix grad_item0;
  if (variant.propagates()) {
    const std::size_t layers = cache.stack.layers();
    const double w = combine_weight(layers, variant.combine);
    Matrix gu = grad_final_user;
    Matrix gi = grad_final_item;
    for (double& v : gu.data()) v *= w;
    for (double& v : gi.data()) v *= w;
    for (std::size_t l = layers; l > 0; --l) {
      auto [pu, pi] = propagate_backward(gu, gi, graph);
      axpy(w, grad_final_user.data(), pu.data());
      axpy(w, grad_final_item.data(), pi.data());
      gu = std::move(pu);
      gi = std::move(pi);
    }
    grad_user0 = std::move(gu);
    grad_item0 = std::move(gi);
  } else {
    grad_user0 = grad_final_user;
    grad_item0 = grad_final_item;
  }

  if (variant.attention_users()) {
    if (cache.alpha.size() != params.attn.rows() || cache.pooled.empty()) {
      throw std::invalid_argument("backward: forward cache lacks attention state");
    }
    const std::size_t heads = params.attn.rows();
    const std::size_t d = cache.item0.cols();
    const double head_weight = 1.0 / static_cast<double>(heads);
    Matrix grad_pooled(graph.n_users(), d);
    std::vector<std::vector<double>> grad_logits(heads, std::vector<double>(graph.n_edges()));

    parallel_for(graph.n_users(), [&](std::size_t begin, std::size_t end) {
      std::vector<double> probs, d_alpha;
      for (std::size_t u = begin; u < end; ++u) {
        const auto gp = layer_norm_backward(cache.pooled.row(u), grad_user0.row(u));
        std::copy(gp.begin(), gp.end(), grad_pooled.row(u).begin());
        const auto items = graph.user_neighbors(u);
        const std::size_t offset = graph.user_edge_offset(u);
        probs.resize(items.size());
        d_alpha.resize(items.size());
        for (std::size_t k = 0; k < heads; ++k) {
          for (std::size_t n = 0; n < items.size(); ++n) {
            probs[n] = cache.alpha[k][offset + n];
            d_alpha[n] = head_weight * dot(gp, cache.item0.row(items[n]));
          }
          const auto ds = softmax_backward(probs, d_alpha);
          std::copy(ds.begin(), ds.end(), grad_logits[k].begin() + static_cast<std::ptrdiff_t>(offset));
        }
      }
    });

    // Attention vectors: sum of dlogit * e_i over every edge.
    for (std::size_t k = 0; k < heads; ++k) {
      auto ga = grad.attn.row(k);
      for (std::size_t u = 0; u < graph.n_users(); ++u) {
        const auto items = graph.user_neighbors(u);
        const std::size_t offset = graph.user_edge_offset(u);
        for (std::size_t n = 0; n < items.size(); ++n) {
          axpy(grad_logits[k][offset + n], cache.item0.row(items[n]), ga);
        }
      }
    }

    // Items: gather over their users, pooling weights and logit terms.
    parallel_for(graph.n_items(), [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        auto gi = grad_item0.row(i);
        for (const auto u : graph.item_neighbors(i)) {
          const auto items = graph.user_neighbors(u);
          const auto pos = static_cast<std::size_t>(
              std::lower_bound(items.begin(), items.end(), static_cast<std::uint32_t>(i)) -
              items.begin());
          const std::size_t edge = graph.user_edge_offset(u) + pos;
          for (std::size_t k = 0; k < heads; ++k) {
            axpy(head_weight * cache.alpha[k][edge], grad_pooled.row(u), gi);
            axpy(grad_logits[k][edge], params.attn.row(k), gi);
          }
        }
      }
    });
  } else {
    grad.user_emb = std::move(grad_user0);
  }

  if (variant.item_source() == ItemSource::projected) {
    // item0[i] = W raw_x[i]
    for (std::size_t i = 0; i < grad_item0.rows(); ++i) {
      const auto g = grad_item0.row(i);
      const auto x = params.raw_x.row(i);
      auto gx = grad.raw_x.row(i);
      for (std::size_t r = 0; r < g.size(); ++r) {
        if (g[r] == 0.0) continue;
        axpy(g[r], x, grad.proj_w.row(r));
        axpy(g[r], params.proj_w.row(r), gx);
      }
    }
  } else {
    grad.item_emb = std::move(grad_item0);
  }
  return grad;
}

Checkpoint to_checkpoint(const VariantSpec& variant, const ModelParams& params) {
  Checkpoint cp;
  cp.descriptor = variant.descriptor();
  params.for_each_block([&](const char* name, const Matrix& m) { cp.blocks.emplace_back(name, m); });
  return cp;
}

std::pair<VariantSpec, ModelParams> from_checkpoint(const Checkpoint& checkpoint) {
  auto variant = VariantSpec::from_descriptor(checkpoint.descriptor);
  ModelParams params;
  for (const auto& [name, m] : checkpoint.blocks) {
    Matrix* target = nullptr;
    if (name == "item_emb") target = &params.item_emb;
    else if (name == "attn") target = &params.attn;
    else if (name == "user_emb") target = &params.user_emb;
    else if (name == "proj_w") target = &params.proj_w;
    else if (name == "raw_x") target = &params.raw_x;
    else throw std::runtime_error("checkpoint has unknown block '" + name + "'");
    if (!target->empty()) throw std::runtime_error("checkpoint repeats block '" + name + "'");
    *target = m;
  }
  // Graph-independent part of check_params: which blocks exist and their widths.
  const bool projected = variant.item_source() == ItemSource::projected;
  const bool attention = variant.attention_users();
  if (projected != !params.raw_x.empty() || projected != !params.proj_w.empty() ||
      projected == !params.item_emb.empty() || attention == params.attn.empty() ||
      attention != params.user_emb.empty()) {
    throw std::runtime_error("checkpoint blocks do not match variant '" + variant.descriptor() +
                             "'");
  }
  if (attention && params.attn.rows() != variant.heads) {
    throw std::runtime_error("checkpoint attn block has " + std::to_string(params.attn.rows()) +
                             " heads, variant expects " + std::to_string(variant.heads));
  }
  return {variant, std::move(params)};
}

}  // namespace agtm
