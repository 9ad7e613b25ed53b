#include "agtm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "agtm/random.hpp"
#include "json.hpp"

namespace agtm {
namespace {

std::uint64_t pair_key(std::uint32_t u, std::uint32_t i) {
  return (static_cast<std::uint64_t>(u) << 32) | i;
}

std::runtime_error line_error(std::size_t line, const std::string& what) {
  return std::runtime_error("line " + std::to_string(line) + ": " + what);
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_on(std::string_view s, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + sep.size();
  }
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

// Assigns dense indices to ids in first-seen order.
class IdIndex {
 public:
  std::uint32_t intern(const std::string& id) {
    const auto [it, inserted] = index_.try_emplace(id, static_cast<std::uint32_t>(ids_.size()));
    if (inserted) ids_.push_back(id);
    return it->second;
  }
  const std::uint32_t* find(const std::string& id) const {
    const auto it = index_.find(id);
    return it == index_.end() ? nullptr : &it->second;
  }
  std::vector<std::string> take() { return std::move(ids_); }
  std::size_t size() const { return ids_.size(); }

 private:
  std::unordered_map<std::string, std::uint32_t> index_;
  std::vector<std::string> ids_;
};

void write_pairs(std::ostream& out, const InteractionSet& data) {
  for (const auto& p : data.pairs()) {
    out << data.user_ids()[p.user] << '\t' << data.item_ids()[p.item] << '\n';
  }
}

void check_writable_id(const std::string& id) {
  if (id.empty() || id.find_first_of("\t\n\r") != std::string::npos) {
    throw std::invalid_argument("id cannot be written to TSV: '" + id + "'");
  }
}

std::vector<std::pair<std::string, std::string>> read_tsv_pairs(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = strip_cr(line);
    if (view.empty()) continue;
    const auto fields = split_on(view, "\t");
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw std::runtime_error(file.string() + ": " +
                               line_error(lineno, "expected user<TAB>item").what());
    }
    out.emplace_back(std::string(fields[0]), std::string(fields[1]));
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

InteractionSet::InteractionSet(std::vector<std::string> user_ids,
                               std::vector<std::string> item_ids, std::vector<Interaction> pairs)
    : user_ids_(std::move(user_ids)), item_ids_(std::move(item_ids)), pairs_(std::move(pairs)) {
  std::unordered_set<std::string_view> seen;
  for (const auto& id : user_ids_) {
    if (!seen.insert(id).second) throw std::invalid_argument("duplicate user id " + id);
  }
  seen.clear();
  for (const auto& id : item_ids_) {
    if (!seen.insert(id).second) throw std::invalid_argument("duplicate item id " + id);
  }
  std::unordered_set<std::uint64_t> keys;
  keys.reserve(pairs_.size());
  for (const auto& p : pairs_) {
    if (p.user >= user_ids_.size() || p.item >= item_ids_.size()) {
      throw std::invalid_argument("interaction index out of range");
    }
    if (!keys.insert(pair_key(p.user, p.item)).second) {
      throw std::invalid_argument("duplicate interaction (" + user_ids_[p.user] + ", " +
                                  item_ids_[p.item] + ")");
    }
  }
}

std::vector<std::size_t> InteractionSet::user_degrees() const {
  std::vector<std::size_t> deg(n_users(), 0);
  for (const auto& p : pairs_) ++deg[p.user];
  return deg;
}

std::vector<std::size_t> InteractionSet::item_degrees() const {
  std::vector<std::size_t> deg(n_items(), 0);
  for (const auto& p : pairs_) ++deg[p.item];
  return deg;
}

std::vector<std::vector<std::uint32_t>> InteractionSet::items_by_user() const {
  std::vector<std::vector<std::uint32_t>> out(n_users());
  for (const auto& p : pairs_) out[p.user].push_back(p.item);
  for (auto& items : out) std::sort(items.begin(), items.end());
  return out;
}

InteractionSet from_id_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
  IdIndex users;
  IdIndex items;
  std::unordered_set<std::uint64_t> seen;
  std::vector<Interaction> out;
  out.reserve(pairs.size());
  for (const auto& [user, item] : pairs) {
    const auto u = users.intern(user);
    const auto i = items.intern(item);
    if (seen.insert(pair_key(u, i)).second) out.push_back({u, i});
  }
  return InteractionSet(users.take(), items.take(), std::move(out));
}

RawFormat parse_raw_format(std::string_view name) {
  if (name == "tsv") return RawFormat::tsv;
  if (name == "amazon_json_lines" || name == "amazon") return RawFormat::amazon_json_lines;
  if (name == "movielens_dat" || name == "movielens") return RawFormat::movielens_dat;
  throw std::invalid_argument("unknown input format '" + std::string(name) + "'");
}

InteractionSet parse_interactions(std::istream& in, RawFormat format) {
  std::vector<std::pair<std::string, std::string>> raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = strip_cr(line);
    if (view.find_first_not_of(" \t") == std::string_view::npos) continue;
    switch (format) {
      case RawFormat::tsv: {
        const auto fields = split_on(view, "\t");
        if (fields.size() < 2 || fields[0].empty() || fields[1].empty()) {
          throw line_error(lineno, "expected user<TAB>item");
        }
        raw.emplace_back(std::string(fields[0]), std::string(fields[1]));
        break;
      }
      case RawFormat::amazon_json_lines: {
        nlohmann::json record;
        try {
          record = nlohmann::json::parse(view);
        } catch (const nlohmann::json::exception& e) {
          throw line_error(lineno, std::string("invalid JSON: ") + e.what());
        }
        const auto user = record.find("reviewerID");
        const auto item = record.find("asin");
        if (!record.is_object() || user == record.end() || item == record.end() ||
            !user->is_string() || !item->is_string() || user->get_ref<const std::string&>().empty() ||
            item->get_ref<const std::string&>().empty()) {
          throw line_error(lineno, "missing string fields reviewerID/asin");
        }
        raw.emplace_back(user->get<std::string>(), item->get<std::string>());
        break;
      }
      case RawFormat::movielens_dat: {
        const auto fields = split_on(view, "::");
        double rating = 0.0;
        long long timestamp = 0;
        if (fields.size() != 4 || fields[0].empty() || fields[1].empty() ||
            !parse_number(fields[2], rating) || !parse_number(fields[3], timestamp)) {
          throw line_error(lineno, "expected user::item::rating::timestamp");
        }
        raw.emplace_back(std::string(fields[0]), std::string(fields[1]));
        break;
      }
    }
  }
  if (raw.empty()) throw std::runtime_error("no interactions");
  return from_id_pairs(raw);
}

InteractionSet ingest_interactions(const std::filesystem::path& path, RawFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return parse_interactions(in, format);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

InteractionSet k_core_filter(const InteractionSet& data, std::size_t k) {
  if (k == 0) throw std::invalid_argument("k-core requires k >= 1");
  const auto n_users = data.n_users();
  const auto n_items = data.n_items();
  const auto& pairs = data.pairs();

  std::vector<std::vector<std::size_t>> user_edges(n_users);
  std::vector<std::vector<std::size_t>> item_edges(n_items);
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    user_edges[pairs[e].user].push_back(e);
    item_edges[pairs[e].item].push_back(e);
  }
  std::vector<std::size_t> user_deg(n_users);
  std::vector<std::size_t> item_deg(n_items);
  for (std::size_t u = 0; u < n_users; ++u) user_deg[u] = user_edges[u].size();
  for (std::size_t i = 0; i < n_items; ++i) item_deg[i] = item_edges[i].size();

  // Peeling queue; node ids < n_users are users, the rest items.
  std::vector<bool> removed(n_users + n_items, false);
  std::vector<bool> edge_alive(pairs.size(), true);
  std::vector<std::size_t> queue;
  for (std::size_t u = 0; u < n_users; ++u) {
    if (user_deg[u] < k) {
      removed[u] = true;
      queue.push_back(u);
    }
  }
  for (std::size_t i = 0; i < n_items; ++i) {
    if (item_deg[i] < k) {
      removed[n_users + i] = true;
      queue.push_back(n_users + i);
    }
  }
  while (!queue.empty()) {
    const std::size_t node = queue.back();
    queue.pop_back();
    const bool is_user = node < n_users;
    const auto& edges = is_user ? user_edges[node] : item_edges[node - n_users];
    for (std::size_t e : edges) {
      if (!edge_alive[e]) continue;
      edge_alive[e] = false;
      if (is_user) {
        const std::size_t i = pairs[e].item;
        if (--item_deg[i] < k && !removed[n_users + i]) {
          removed[n_users + i] = true;
          queue.push_back(n_users + i);
        }
      } else {
        const std::size_t u = pairs[e].user;
        if (--user_deg[u] < k && !removed[u]) {
          removed[u] = true;
          queue.push_back(u);
        }
      }
    }
  }

  std::vector<std::pair<std::string, std::string>> survivors;
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    if (edge_alive[e]) {
      survivors.emplace_back(data.user_ids()[pairs[e].user], data.item_ids()[pairs[e].item]);
    }
  }
  if (survivors.empty()) throw std::runtime_error("k-core eliminated all data");
  return from_id_pairs(survivors);
}

SplitRatios parse_ratios(std::string_view text) {
  const auto fields = split_on(text, ",");
  if (fields.size() != 3) throw std::invalid_argument("ratios must be train,validation,test");
  SplitRatios r;
  double* out[3] = {&r.train, &r.validation, &r.test};
  for (std::size_t i = 0; i < 3; ++i) {
    std::string s(fields[i]);
    char* end = nullptr;
    *out[i] = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
      throw std::invalid_argument("invalid ratio '" + s + "'");
    }
  }
  return r;
}

DatasetSplit split(const InteractionSet& data, const SplitRatios& ratios, std::uint64_t seed) {
  if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0) {
    throw std::invalid_argument("split ratios must be non-negative");
  }
  if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
  if (data.empty()) throw std::invalid_argument("cannot split an empty interaction set");

  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(order));

  const auto count = [n](double frac) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * frac + 0.5));
  };
  const std::size_t n_train = std::min(n, count(ratios.train));
  const std::size_t n_val = std::min(n - n_train, count(ratios.validation));

  // part[e]: 0 train, 1 validation, 2 test
  std::vector<int> part(n, 2);
  for (std::size_t r = 0; r < n_train; ++r) part[order[r]] = 0;
  for (std::size_t r = n_train; r < n_train + n_val; ++r) part[order[r]] = 1;

  // Parts are written in input order; indices follow first appearance in train.
  IdIndex users;
  IdIndex items;
  std::vector<Interaction> train_pairs;
  for (std::size_t e = 0; e < n; ++e) {
    if (part[e] != 0) continue;
    const auto& p = data.pairs()[e];
    train_pairs.push_back(
        {users.intern(data.user_ids()[p.user]), items.intern(data.item_ids()[p.item])});
  }

  DatasetSplit out;
  out.seed = seed;
  out.ratios = ratios;
  std::vector<Interaction> held_out[2];
  for (std::size_t e = 0; e < n; ++e) {
    if (part[e] == 0) continue;
    const auto& p = data.pairs()[e];
    const auto* u = users.find(data.user_ids()[p.user]);
    const auto* i = items.find(data.item_ids()[p.item]);
    if (u == nullptr || i == nullptr) {
      ++(part[e] == 1 ? out.dropped_validation : out.dropped_test);
      continue;
    }
    held_out[part[e] - 1].push_back({*u, *i});
  }
  out.dropped_users = data.n_users() - users.size();
  out.dropped_items = data.n_items() - items.size();

  auto user_ids = users.take();
  auto item_ids = items.take();
  out.validation = InteractionSet(user_ids, item_ids, std::move(held_out[0]));
  out.test = InteractionSet(user_ids, item_ids, std::move(held_out[1]));
  out.train = InteractionSet(std::move(user_ids), std::move(item_ids), std::move(train_pairs));
  return out;
}

void write_canonical(const InteractionSet& data, const std::filesystem::path& file) {
  for (const auto& id : data.user_ids()) check_writable_id(id);
  for (const auto& id : data.item_ids()) check_writable_id(id);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  write_pairs(out, data);
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

InteractionSet read_canonical(const std::filesystem::path& file) {
  const auto pairs = read_tsv_pairs(file);
  if (pairs.empty()) throw std::runtime_error(file.string() + ": no interactions");
  return from_id_pairs(pairs);
}

namespace {

constexpr const char* kSplitFormat = "agtm-split";
constexpr int kSplitVersion = 1;

}  // namespace

void write_canonical(const DatasetSplit& split, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_canonical(split.train, dir / "train.tsv");
  write_canonical(split.validation, dir / "valid.tsv");
  write_canonical(split.test, dir / "test.tsv");

  std::ofstream meta(dir / "meta.txt", std::ios::binary);
  if (!meta) throw std::runtime_error("cannot write " + (dir / "meta.txt").string());
  meta << "format=" << kSplitFormat << '\n'
       << "version=" << kSplitVersion << '\n'
       << "seed=" << split.seed << '\n'
       << "ratios=" << format_double(split.ratios.train) << ','
       << format_double(split.ratios.validation) << ',' << format_double(split.ratios.test)
       << '\n'
       << "n_users=" << split.train.n_users() << '\n'
       << "n_items=" << split.train.n_items() << '\n'
       << "n_train=" << split.train.size() << '\n'
       << "n_validation=" << split.validation.size() << '\n'
       << "n_test=" << split.test.size() << '\n'
       << "dropped_validation=" << split.dropped_validation << '\n'
       << "dropped_test=" << split.dropped_test << '\n'
       << "dropped_users=" << split.dropped_users << '\n'
       << "dropped_items=" << split.dropped_items << '\n';
}

DatasetSplit read_canonical_split(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "meta.txt");
  if (!meta_in) throw std::runtime_error("missing " + (dir / "meta.txt").string());
  std::map<std::string, std::string> meta;
  std::string line;
  while (std::getline(meta_in, line)) {
    const auto view = strip_cr(line);
    if (view.empty() || view.front() == '#') continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw std::runtime_error("meta.txt: malformed line");
    meta[std::string(view.substr(0, eq))] = std::string(view.substr(eq + 1));
  }
  if (meta["format"] != kSplitFormat) {
    throw std::runtime_error("meta.txt: not an agtm split directory (format mismatch)");
  }
  if (meta["version"] != std::to_string(kSplitVersion)) {
    throw std::runtime_error("meta.txt: unsupported split version '" + meta["version"] + "'");
  }
  const auto count = [&](const char* key) {
    std::size_t v = 0;
    const auto it = meta.find(key);
    if (it == meta.end() || !parse_number(std::string_view(it->second), v)) {
      throw std::runtime_error(std::string("meta.txt: missing or invalid ") + key);
    }
    return v;
  };

  DatasetSplit out;
  {
    std::uint64_t seed = 0;
    if (!parse_number(std::string_view(meta["seed"]), seed)) {
      throw std::runtime_error("meta.txt: invalid seed");
    }
    out.seed = seed;
  }
  out.ratios = parse_ratios(meta["ratios"]);
  out.dropped_validation = count("dropped_validation");
  out.dropped_test = count("dropped_test");
  out.dropped_users = count("dropped_users");
  out.dropped_items = count("dropped_items");

  IdIndex users;
  IdIndex items;
  std::vector<Interaction> train_pairs;
  std::unordered_set<std::uint64_t> seen;
  for (const auto& [u, i] : read_tsv_pairs(dir / "train.tsv")) {
    const Interaction p{users.intern(u), items.intern(i)};
    if (seen.insert(pair_key(p.user, p.item)).second) train_pairs.push_back(p);
  }
  const auto read_part = [&](const char* name) {
    std::vector<Interaction> part;
    for (const auto& [u, i] : read_tsv_pairs(dir / name)) {
      const auto* ui = users.find(u);
      const auto* ii = items.find(i);
      if (ui == nullptr || ii == nullptr) {
        throw std::runtime_error(std::string(name) + ": pair (" + u + ", " + i +
                                 ") references an id absent from train.tsv");
      }
      part.push_back({*ui, *ii});
    }
    return part;
  };
  auto val_pairs = read_part("valid.tsv");
  auto test_pairs = read_part("test.tsv");
  auto user_ids = users.take();
  auto item_ids = items.take();
  out.validation = InteractionSet(user_ids, item_ids, std::move(val_pairs));
  out.test = InteractionSet(user_ids, item_ids, std::move(test_pairs));
  out.train = InteractionSet(std::move(user_ids), std::move(item_ids), std::move(train_pairs));

  if (out.train.n_users() != count("n_users") || out.train.n_items() != count("n_items") ||
      out.train.size() != count("n_train") || out.validation.size() != count("n_validation") ||
      out.test.size() != count("n_test")) {
    throw std::runtime_error("split files disagree with meta.txt counts");
  }
  return out;
}

DatasetStats dataset_stats(const InteractionSet& data) {
  DatasetStats s;
  const auto ud = data.user_degrees();
  const auto id = data.item_degrees();
  s.users = static_cast<std::size_t>(std::count_if(ud.begin(), ud.end(), [](auto d) { return d > 0; }));
  s.items = static_cast<std::size_t>(std::count_if(id.begin(), id.end(), [](auto d) { return d > 0; }));
  s.interactions = data.size();
  if (s.users > 0 && s.items > 0) {
    s.density = static_cast<double>(s.interactions) /
                (static_cast<double>(s.users) * static_cast<double>(s.items));
  }
  return s;
}

}  // namespace agtm
