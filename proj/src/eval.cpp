#include "agtm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <boost/math/special_functions/beta.hpp>

#include "agtm/digest.hpp"
#include "agtm/graph.hpp"
#include "agtm/model.hpp"
#include "agtm/parallel.hpp"
#include "text_format.hpp"

namespace agtm {

std::vector<std::uint32_t> rank_topk(std::span<const double> scores,
                                     std::span<const std::uint32_t> mask, std::size_t k) {
  std::vector<std::uint32_t> candidates;
  candidates.reserve(scores.size());
  std::size_t m = 0;
  for (std::uint32_t i = 0; i < scores.size(); ++i) {
    while (m < mask.size() && mask[m] < i) ++m;
    if (m < mask.size() && mask[m] == i) continue;
    candidates.push_back(i);
  }
  if (candidates.empty()) throw std::invalid_argument("rank_topk: every item is masked");
  const std::size_t take = std::min(k, candidates.size());
  const auto better = [&](std::uint32_t a, std::uint32_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), better);
  candidates.resize(take);
  return candidates;
}

std::vector<std::uint32_t> rank_topk(const Matrix& final_user, const Matrix& final_item,
                                     std::size_t user, std::span<const std::uint32_t> mask,
                                     std::size_t k) {
  if (user >= final_user.rows()) throw std::out_of_range("rank_topk: user out of range");
  std::vector<double> scores(final_item.rows());
  const auto eu = final_user.row(user);
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = dot(eu, final_item.row(i));
  return rank_topk(scores, mask, k);
}

double recall_at_k(std::span<const std::uint32_t> topk, std::span<const std::uint32_t> test_items,
                   std::size_t k) {
  if (test_items.empty()) throw std::invalid_argument("recall_at_k: empty test set");
  std::size_t hits = 0;
  for (std::size_t r = 0; r < std::min(k, topk.size()); ++r) {
    if (std::binary_search(test_items.begin(), test_items.end(), topk[r])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test_items.size());
}

double ndcg_at_k(std::span<const std::uint32_t> topk, std::span<const std::uint32_t> test_items,
                 std::size_t k) {
  if (test_items.empty()) throw std::invalid_argument("ndcg_at_k: empty test set");
  double dcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, topk.size()); ++r) {
    if (std::binary_search(test_items.begin(), test_items.end(), topk[r])) {
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, test_items.size()); ++r) {
    idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg / idcg;
}

EvalResult evaluate(const Matrix& final_user, const Matrix& final_item, const DatasetSplit& split,
                    EvalTarget target, std::size_t k) {
  const std::size_t n_users = split.train.n_users();
  if (final_user.rows() != n_users || final_item.rows() != split.train.n_items()) {
    throw std::invalid_argument("evaluate: embeddings do not match the split");
  }
  if (k == 0) throw std::invalid_argument("evaluate: k must be positive");
  const auto& targets_set = target == EvalTarget::test ? split.test : split.validation;
  const auto targets = targets_set.items_by_user();
  auto masks = split.train.items_by_user();
  if (target == EvalTarget::test) {
    const auto val = split.validation.items_by_user();
    for (std::size_t u = 0; u < n_users; ++u) {
      auto& m = masks[u];
      m.insert(m.end(), val[u].begin(), val[u].end());
      std::sort(m.begin(), m.end());
      m.erase(std::unique(m.begin(), m.end()), m.end());
    }
  }

  EvalResult result;
  result.k = k;
  Fnv1a digest;
  digest.update(target == EvalTarget::test ? "mask:train+validation" : "mask:train");
  for (std::size_t u = 0; u < n_users; ++u) {
    digest.update_value(static_cast<std::uint64_t>(masks[u].size()));
    if (!masks[u].empty()) digest.update(masks[u].data(), masks[u].size() * sizeof(std::uint32_t));
    if (targets[u].empty()) {
      ++result.n_skipped_users;
    } else {
      result.users.push_back(static_cast<std::uint32_t>(u));
    }
  }
  result.masked_sets_digest = digest.hex();
  if (result.users.empty()) throw std::runtime_error("evaluate: no users with target interactions");

  const std::size_t n = result.users.size();
  result.per_user_recall.assign(n, 0.0);
  result.per_user_ndcg.assign(n, 0.0);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const auto u = result.users[idx];
      const auto topk = rank_topk(final_user, final_item, u, masks[u], k);
      result.per_user_recall[idx] = recall_at_k(topk, targets[u], k);
      result.per_user_ndcg[idx] = ndcg_at_k(topk, targets[u], k);
    }
  });
  result.n_evaluated_users = n;
  result.mean_recall =
      std::accumulate(result.per_user_recall.begin(), result.per_user_recall.end(), 0.0) /
      static_cast<double>(n);
  result.mean_ndcg = std::accumulate(result.per_user_ndcg.begin(), result.per_user_ndcg.end(), 0.0) /
                     static_cast<double>(n);
  return result;
}

EvalResult evaluate_checkpoint(const Checkpoint& checkpoint, const DatasetSplit& split,
                               std::size_t k) {
  const auto [variant, params] = from_checkpoint(checkpoint);
  const InteractionGraph graph(split.train);
  const auto cache = forward(graph, params, variant);
  return evaluate(cache.final_user, cache.final_item, split, EvalTarget::test, k);
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0)) throw std::invalid_argument("degrees of freedom must be positive");
  if (!std::isfinite(t)) return 0.0;
  // P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2)
  return boost::math::ibeta(df / 2.0, 0.5, df / (df + t * t));
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired t-test: length mismatch");
  if (a.size() < 2) throw std::invalid_argument("paired t-test: need at least 2 pairs");
  const std::size_t n = a.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const double var = ss / static_cast<double>(n - 1);
  if (!(var > 0.0)) throw std::domain_error("degenerate t-test: differences have zero variance");
  TTestResult r;
  r.n = n;
  r.t = mean / std::sqrt(var / static_cast<double>(n));
  r.p = student_t_two_sided_p(r.t, static_cast<double>(n - 1));
  return r;
}

MetricsReport make_report(const EvalResult& result, const std::vector<std::string>& user_ids) {
  MetricsReport report;
  report.k = result.k;
  for (std::size_t idx = 0; idx < result.users.size(); ++idx) {
    report.users.push_back(user_ids.at(result.users[idx]));
  }
  report.recall = result.per_user_recall;
  report.ndcg = result.per_user_ndcg;
  return report;
}

void write_report(const MetricsReport& report, const EvalResult& result,
                  const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "user\trecall@" << report.k << "\tndcg@" << report.k << '\n';
  for (std::size_t n = 0; n < report.users.size(); ++n) {
    out << report.users[n] << '\t' << detail::format_g(report.recall[n], 17) << '\t'
        << detail::format_g(report.ndcg[n], 17) << '\n';
  }
  out << "# summary k=" << result.k << " users=" << result.n_evaluated_users
      << " skipped=" << result.n_skipped_users << " recall@" << result.k << '='
      << detail::format_g(result.mean_recall, 17) << " ndcg@" << result.k << '='
      << detail::format_g(result.mean_ndcg, 17) << " mask_digest=" << result.masked_sets_digest
      << '\n';
}

MetricsReport read_report(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  MetricsReport report;
  std::string line;
  if (!std::getline(in, line) || line.rfind("user\trecall@", 0) != 0) {
    throw std::runtime_error(file.string() + ": not a metrics report (bad header)");
  }
  {
    const auto at = line.find('@');
    report.k = std::stoul(line.substr(at + 1, line.find('\t', at) - at - 1));
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream fields(line);
    std::string user, recall, ndcg;
    if (!std::getline(fields, user, '\t') || !std::getline(fields, recall, '\t') ||
        !std::getline(fields, ndcg, '\t')) {
      throw std::runtime_error(file.string() + ": malformed line " + std::to_string(lineno));
    }
    report.users.push_back(user);
    try {
      report.recall.push_back(std::stod(recall));
      report.ndcg.push_back(std::stod(ndcg));
    } catch (const std::exception&) {
      throw std::runtime_error(file.string() + ": malformed number on line " +
                               std::to_string(lineno));
    }
  }
  return report;
}

ReportComparison compare_reports(const MetricsReport& a, const MetricsReport& b) {
  std::unordered_map<std::string, std::size_t> index_b;
  for (std::size_t n = 0; n < b.users.size(); ++n) index_b.emplace(b.users[n], n);
  if (a.users.size() != b.users.size()) {
    throw std::invalid_argument("alignment error: reports cover different user sets");
  }
  std::vector<double> ra, rb, na, nb;
  for (std::size_t n = 0; n < a.users.size(); ++n) {
    const auto it = index_b.find(a.users[n]);
    if (it == index_b.end()) {
      throw std::invalid_argument("alignment error: user '" + a.users[n] +
                                  "' missing from the second report");
    }
    ra.push_back(a.recall[n]);
    rb.push_back(b.recall[it->second]);
    na.push_back(a.ndcg[n]);
    nb.push_back(b.ndcg[it->second]);
  }
  return {paired_t_test(ra, rb), paired_t_test(na, nb)};
}

}  // namespace agtm
