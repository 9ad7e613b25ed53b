#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace agtm {

struct Interaction {
  std::uint32_t user = 0;
  std::uint32_t item = 0;

  auto operator<=>(const Interaction&) const = default;
};

/// Deduplicated implicit-feedback pairs over dense 0-based user/item indices.
///
/// Id maps may list users or items that have no pair in this set; the
/// validation and test parts of a split share the training part's maps.
class InteractionSet {
 public:
  InteractionSet() = default;

  /// Validates index bounds, pair uniqueness and id uniqueness.
  InteractionSet(std::vector<std::string> user_ids, std::vector<std::string> item_ids,
                 std::vector<Interaction> pairs);

  std::size_t n_users() const { return user_ids_.size(); }
  std::size_t n_items() const { return item_ids_.size(); }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }

  const std::vector<Interaction>& pairs() const { return pairs_; }
  const std::vector<std::string>& user_ids() const { return user_ids_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }

  std::vector<std::size_t> user_degrees() const;
  std::vector<std::size_t> item_degrees() const;

  /// Items per user, each list sorted ascending.
  std::vector<std::vector<std::uint32_t>> items_by_user() const;

  bool operator==(const InteractionSet&) const = default;

 private:
  std::vector<std::string> user_ids_;
  std::vector<std::string> item_ids_;
  std::vector<Interaction> pairs_;
};

/// Builds a set from external-id pairs, dropping exact duplicates and assigning
/// indices in first-seen order.
InteractionSet from_id_pairs(const std::vector<std::pair<std::string, std::string>>& pairs);

enum class RawFormat { tsv, amazon_json_lines, movielens_dat };

RawFormat parse_raw_format(std::string_view name);

InteractionSet parse_interactions(std::istream& in, RawFormat format);
InteractionSet ingest_interactions(const std::filesystem::path& path, RawFormat format);

/// Iteratively removes users and items with degree < k until every survivor has
/// degree >= k. Survivors are re-indexed in first-seen order.
InteractionSet k_core_filter(const InteractionSet& data, std::size_t k);

struct SplitRatios {
  double train = 0.75;
  double validation = 0.05;
  double test = 0.20;

  bool operator==(const SplitRatios&) const = default;
};

SplitRatios parse_ratios(std::string_view text);

struct DatasetSplit {
  InteractionSet train;
  InteractionSet validation;
  InteractionSet test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
  std::size_t dropped_validation = 0;  // cold-start pairs removed
  std::size_t dropped_test = 0;
  std::size_t dropped_users = 0;  // users/items with no training pair
  std::size_t dropped_items = 0;

  bool operator==(const DatasetSplit&) const = default;
};

/// Global seeded shuffle of all pairs, cut by ratios. Validation and test pairs
/// whose user or item has no training pair are dropped and counted. All three
/// parts are indexed by the training part's first-seen order.
DatasetSplit split(const InteractionSet& data, const SplitRatios& ratios, std::uint64_t seed);

/// Canonical TSV, `user_id<TAB>item_id` per line in pair order.
void write_canonical(const InteractionSet& data, const std::filesystem::path& file);
InteractionSet read_canonical(const std::filesystem::path& file);

/// Split directory: train.tsv, valid.tsv, test.tsv, meta.txt.
void write_canonical(const DatasetSplit& split, const std::filesystem::path& dir);
DatasetSplit read_canonical_split(const std::filesystem::path& dir);

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  double density = 0.0;
};

/// Counts only users/items that occur in at least one pair.
DatasetStats dataset_stats(const InteractionSet& data);

}  // namespace agtm
