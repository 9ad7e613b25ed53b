#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "agtm/checkpoint.hpp"
#include "agtm/dataset.hpp"
#include "agtm/matrix.hpp"

namespace agtm {

/// Top-k unmasked items by descending score, ties broken by ascending index.
/// `mask` must be sorted. Returns fewer than k items only when fewer remain;
/// throws if every item is masked.
std::vector<std::uint32_t> rank_topk(std::span<const double> scores,
                                     std::span<const std::uint32_t> mask, std::size_t k);

std::vector<std::uint32_t> rank_topk(const Matrix& final_user, const Matrix& final_item,
                                     std::size_t user, std::span<const std::uint32_t> mask,
                                     std::size_t k);

/// `test_items` must be sorted and nonempty.
double recall_at_k(std::span<const std::uint32_t> topk, std::span<const std::uint32_t> test_items,
                   std::size_t k);

/// Binary-relevance NDCG with IDCG truncated at min(|test|, k).
double ndcg_at_k(std::span<const std::uint32_t> topk, std::span<const std::uint32_t> test_items,
                 std::size_t k);

enum class EvalTarget {
  validation,  // rank against validation pairs, mask train
  test,        // rank against test pairs, mask train + validation
};

struct EvalResult {
  std::size_t k = 20;
  std::vector<std::uint32_t> users;
  std::vector<double> per_user_recall;
  std::vector<double> per_user_ndcg;
  double mean_recall = 0.0;
  double mean_ndcg = 0.0;
  std::size_t n_evaluated_users = 0;
  std::size_t n_skipped_users = 0;
  std::string masked_sets_digest;
};

/// All-ranking evaluation over users with at least one target pair.
EvalResult evaluate(const Matrix& final_user, const Matrix& final_item, const DatasetSplit& split,
                    EvalTarget target, std::size_t k = 20);

/// Rebuilds the model from a checkpoint on split.train and evaluates on test.
EvalResult evaluate_checkpoint(const Checkpoint& checkpoint, const DatasetSplit& split,
                               std::size_t k = 20);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

/// Paired two-sided Student t-test on a - b. Throws on length mismatch, n < 2
/// or zero-variance differences.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Two-sided p-value of Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

/// Per-user metrics file: header, one `user<TAB>recall@k<TAB>ndcg@k` row per
/// user, then a `#`-prefixed summary line.
struct MetricsReport {
  std::size_t k = 20;
  std::vector<std::string> users;
  std::vector<double> recall;
  std::vector<double> ndcg;
};

MetricsReport make_report(const EvalResult& result, const std::vector<std::string>& user_ids);
void write_report(const MetricsReport& report, const EvalResult& result,
                  const std::filesystem::path& file);
MetricsReport read_report(const std::filesystem::path& file);

struct ReportComparison {
  TTestResult recall;
  TTestResult ndcg;
};

/// Aligns by user id; the two reports must cover the same users.
ReportComparison compare_reports(const MetricsReport& a, const MetricsReport& b);

}  // namespace agtm
