// agtm: prepare -> condense -> train -> evaluate -> compare.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "agtm/checkpoint.hpp"
#include "agtm/condenser.hpp"
#include "agtm/config.hpp"
#include "agtm/dataset.hpp"
#include "agtm/digest.hpp"
#include "agtm/embedding_io.hpp"
#include "agtm/eval.hpp"
#include "agtm/model.hpp"
#include "agtm/synthetic.hpp"
#include "agtm/trainer.hpp"

namespace fs = std::filesystem;
using namespace agtm;

namespace {

std::string fmt(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

// Records what a command read and wrote; artifacts carry content digests.
class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)) {}

  void set(const std::string& key, const std::string& value) { fields_.emplace_back(key, value); }
  void input(const fs::path& p) { inputs_.push_back(p); }
  void artifact(const fs::path& p) { artifacts_.push_back(p); }

  void write(const fs::path& file) const {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    out << "command=" << command_ << '\n';
    for (const auto& [k, v] : fields_) out << k << '=' << v << '\n';
    for (const auto& p : inputs_) out << "input=" << p.string() << ' ' << file_digest(p) << '\n';
    out << "wall_time_s=" << fmt(secs, 4) << '\n';
    for (const auto& p : artifacts_) {
      out << "artifact=" << p.filename().string() << ' ' << file_digest(p) << '\n';
    }
  }

 private:
  std::string command_;
  std::vector<std::pair<std::string, std::string>> fields_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> artifacts_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw std::runtime_error(std::string(what) + " not found: " + p.string());
}

KeyValues parse_overrides(const std::vector<std::string>& items) {
  KeyValues out;
  for (const auto& s : items) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

// Embedding rows reordered to the split's item order. Missing items get zero
// rows and a warning.
Matrix load_aligned(const fs::path& file, const std::vector<std::string>& item_ids, const char* what) {
  require_file(file, what);
  const auto table = read_embeddings(file);
  std::vector<std::size_t> missing;
  Matrix m = align_rows(table, item_ids, &missing);
  if (!missing.empty()) {
    std::cerr << "warning: " << missing.size() << " of " << item_ids.size() << " items have no row in "
              << file.string() << "; using zero vectors\n";
  }
  return m;
}

struct PrepareArgs {
  std::string input, format = "tsv", ratios = "0.75,0.05,0.20", out;
  std::size_t k_core = 10;
  std::uint64_t seed = 0;
};

int cmd_prepare(const PrepareArgs& a) {
  require_file(a.input, "input");
  Manifest manifest("prepare");
  manifest.input(a.input);
  const auto raw = ingest_interactions(a.input, parse_raw_format(a.format));
  const auto filtered = a.k_core > 0 ? k_core_filter(raw, a.k_core) : raw;
  const auto s = split(filtered, parse_ratios(a.ratios), a.seed);
  fs::create_directories(a.out);
  write_canonical(s, a.out);

  const auto st = dataset_stats(filtered);
  std::cout << "users\titems\tinteractions\tdensity\n"
            << st.users << '\t' << st.items << '\t' << st.interactions << '\t' << fmt(st.density, 4) << '\n';
  std::cout << "train " << s.train.size() << ", validation " << s.validation.size() << ", test "
            << s.test.size() << " (dropped cold-start: validation " << s.dropped_validation << ", test "
            << s.dropped_test << ")\n";

  manifest.set("format", a.format);
  manifest.set("k_core", std::to_string(a.k_core));
  manifest.set("ratios", a.ratios);
  manifest.set("seed", std::to_string(a.seed));
  manifest.set("output_dir", a.out);
  for (const char* f : {"train.tsv", "valid.tsv", "test.tsv", "meta.txt"}) manifest.artifact(fs::path(a.out) / f);
  manifest.write(fs::path(a.out) / "manifest.txt");
  return 0;
}

struct CondenseArgs {
  std::string embeddings, config, out;
  std::vector<std::string> overrides;
};

int cmd_condense(const CondenseArgs& a) {
  require_file(a.embeddings, "embeddings");
  Manifest manifest("condense");
  manifest.input(a.embeddings);
  CondenserConfig cfg = condenser_preset();
  if (!a.config.empty()) {
    require_file(a.config, "config");
    manifest.input(a.config);
    cfg = condenser_config_from(read_key_values(a.config), cfg);
  }
  cfg = condenser_config_from(parse_overrides(a.overrides), cfg);
  const auto table = read_embeddings(a.embeddings);
  std::cout << "condensing " << table.values.rows() << " items from d_o=" << table.values.cols()
            << " to d=" << cfg.dim << " (d_h=" << cfg.hidden << ", " << cfg.epochs << " epochs)\n";
  const auto result = train_autoencoder(table.values, cfg);

  const fs::path out(a.out);
  fs::create_directories(out);
  write_embeddings(out / "condensed.agtm", {table.ids, result.condensed});
  write_checkpoint(out / "autoencoder.agtc", result.params.to_checkpoint());
  {
    std::ofstream log(out / "condense_log.tsv", std::ios::binary);
    log << "epoch\tmean_reconstruction_error\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) log << e << '\t' << fmt(result.epoch_loss[e], 10) << '\n';
  }
  {
    std::ofstream c(out / "config.txt", std::ios::binary);
    c << to_config_text(cfg);
  }
  std::cout << "reconstruction error per item: " << fmt(result.epoch_loss.front()) << " -> "
            << fmt(result.epoch_loss.back()) << '\n';

  manifest.set("seed", std::to_string(cfg.seed));
  manifest.set("output_dir", a.out);
  for (const char* f : {"condensed.agtm", "items.txt", "autoencoder.agtc", "condense_log.tsv", "config.txt"})
    manifest.artifact(out / f);
  manifest.write(out / "manifest.txt");
  return 0;
}

struct TrainArgs {
  std::string split_dir, condensed, raw, config, preset, out;
  std::vector<std::string> overrides;
  std::size_t dim = 64;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  Manifest manifest("train");
  TrainConfig cfg;
  if (!a.preset.empty()) {
    const auto p = train_preset(a.preset);
    if (!p) throw std::invalid_argument("unknown preset '" + a.preset + "'");
    cfg = *p;
    manifest.set("preset", a.preset);
  }
  if (!a.config.empty()) {
    require_file(a.config, "config");
    manifest.input(a.config);
    cfg = train_config_from(read_key_values(a.config), cfg);
  }
  cfg = train_config_from(parse_overrides(a.overrides), cfg);
  cfg.validate();

  const auto s = read_canonical_split(a.split_dir);
  for (const char* f : {"train.tsv", "valid.tsv", "test.tsv", "meta.txt"}) manifest.input(fs::path(a.split_dir) / f);

  ModelInputs inputs;
  inputs.dim = a.dim;
  Matrix condensed, raw;
  switch (cfg.variant.item_source()) {
    case ItemSource::condensed:
      if (a.condensed.empty()) throw std::invalid_argument("this variant needs --condensed");
      condensed = load_aligned(a.condensed, s.train.item_ids(), "condensed embeddings");
      inputs.condensed = &condensed;
      manifest.input(a.condensed);
      break;
    case ItemSource::projected:
      if (a.raw.empty()) throw std::invalid_argument("ablation no_ae needs --raw (raw text embeddings)");
      raw = load_aligned(a.raw, s.train.item_ids(), "raw embeddings");
      inputs.raw = &raw;
      manifest.input(a.raw);
      break;
    case ItemSource::random:
      break;
  }

  std::cout << "training " << cfg.variant.descriptor() << " on " << s.train.size() << " pairs\n";
  const auto result = train(s, inputs, cfg, a.quiet ? nullptr : &std::cout);

  const fs::path out(a.out);
  fs::create_directories(out);
  write_checkpoint(out / "model.agtc", to_checkpoint(cfg.variant, result.best));
  write_train_log(result.log, out / "train_log.tsv");
  {
    std::ofstream c(out / "config.txt", std::ios::binary);
    c << to_config_text(cfg);
  }
  manifest.set("variant", cfg.variant.descriptor());
  manifest.set("seed", std::to_string(cfg.seed));
  manifest.set("output_dir", a.out);
  manifest.set("epochs_run", std::to_string(result.log.size()));
  manifest.set("best_epoch", std::to_string(result.best_epoch));
  manifest.set("best_val_ndcg20", fmt(result.best_val_ndcg, 10));
  manifest.set("stopped_early", result.stopped_early ? "true" : "false");
  manifest.set("aborted", result.aborted ? "true" : "false");
  for (const char* f : {"model.agtc", "train_log.tsv", "config.txt"}) manifest.artifact(out / f);
  manifest.write(out / "manifest.txt");

  if (result.aborted) {
    std::cerr << "error: training aborted: " << result.abort_reason << "; wrote last good checkpoint\n";
    return 1;
  }
  std::cout << "best validation ndcg@20 " << fmt(result.best_val_ndcg) << " at epoch " << result.best_epoch
            << (result.stopped_early ? " (early stop)" : "") << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string checkpoint, split_dir, out;
  std::size_t k = 20;
};

int cmd_evaluate(const EvaluateArgs& a) {
  require_file(a.checkpoint, "checkpoint");
  Manifest manifest("evaluate");
  manifest.input(a.checkpoint);
  const auto s = read_canonical_split(a.split_dir);
  for (const char* f : {"train.tsv", "valid.tsv", "test.tsv", "meta.txt"}) manifest.input(fs::path(a.split_dir) / f);
  const auto result = evaluate_checkpoint(read_checkpoint(a.checkpoint), s, a.k);
  const auto report = make_report(result, s.train.user_ids());
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_report(report, result, out);
  std::cout << "users " << result.n_evaluated_users << " (skipped " << result.n_skipped_users << ")  recall@"
            << a.k << ' ' << fmt(result.mean_recall) << "  ndcg@" << a.k << ' ' << fmt(result.mean_ndcg) << '\n';
  manifest.set("k", std::to_string(a.k));
  manifest.artifact(out);
  fs::path mf = out;
  mf += ".manifest.txt";
  manifest.write(mf);
  return 0;
}

int cmd_compare(const std::string& file_a, const std::string& file_b) {
  require_file(file_a, "report");
  require_file(file_b, "report");
  const auto cmp = compare_reports(read_report(file_a), read_report(file_b));
  for (const auto& [name, t] : {std::pair{"recall", cmp.recall}, std::pair{"ndcg", cmp.ndcg}}) {
    std::cout << "metric=" << name << " t=" << fmt(t.t, 8) << " p=" << fmt(t.p, 8) << " n=" << t.n << '\n';
  }
  return 0;
}

struct SynthArgs {
  PlantedConfig planted;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  const auto p = make_planted(a.planted);
  const fs::path out(a.out);
  fs::create_directories(out);
  write_canonical(p.data, out / "interactions.tsv");
  write_embeddings(out / "text.agtm", p.text);
  Manifest manifest("synth");
  manifest.set("seed", std::to_string(a.planted.seed));
  for (const char* f : {"interactions.tsv", "text.agtm", "items.txt"}) manifest.artifact(out / f);
  manifest.write(out / "manifest.txt");
  std::cout << p.data.n_users() << " users, " << p.data.n_items() << " items, " << p.data.size() << " pairs\n";
  return 0;
}

int cmd_synth_embeddings(const std::string& ids_file, std::size_t dim, std::uint64_t seed, const std::string& out) {
  require_file(ids_file, "id list");
  std::ifstream in(ids_file);
  std::vector<std::string> ids;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  const fs::path file(out);
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  write_embeddings(file, synth_embeddings(ids, dim, seed));
  std::cout << ids.size() << " x " << dim << " unit-norm rows\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AGTM text-aware graph recommender"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* p = app.add_subcommand("prepare", "ingest, k-core filter and split interactions");
  p->add_option("--input", prep.input, "raw interaction file")->required();
  p->add_option("--format", prep.format, "tsv | amazon | movielens")->capture_default_str();
  p->add_option("--k-core", prep.k_core, "minimum degree (0 disables)")->capture_default_str();
  p->add_option("--ratios", prep.ratios, "train,validation,test")->capture_default_str();
  p->add_option("--seed", prep.seed)->capture_default_str();
  p->add_option("--out", prep.out, "split directory")->required();

  CondenseArgs cond;
  auto* c = app.add_subcommand("condense", "train the autoencoder and write condensed item vectors");
  c->add_option("--embeddings", cond.embeddings, "AGTM embedding file (items.txt alongside)")->required();
  c->add_option("--config", cond.config, "key=value config; defaults to the autoencoder preset");
  c->add_option("--set", cond.overrides, "override a config key, key=value");
  c->add_option("--out", cond.out, "output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a preference model");
  t->add_option("--split-dir", tr.split_dir)->required();
  t->add_option("--condensed", tr.condensed, "condensed item embeddings");
  t->add_option("--raw", tr.raw, "raw text embeddings (ablation no_ae)");
  t->add_option("--preset", tr.preset, "amazon-musics | amazon-movies | amazon-electronics");
  t->add_option("--config", tr.config, "key=value config, applied after --preset");
  t->add_option("--set", tr.overrides, "override a config key, key=value");
  t->add_option("--dim", tr.dim, "embedding size for randomly initialized tables")->capture_default_str();
  t->add_flag("--quiet", tr.quiet, "no per-evaluation progress");
  t->add_option("--out", tr.out, "output directory")->required();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "all-ranking Recall/NDCG on the test split");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--split-dir", ev.split_dir)->required();
  e->add_option("--k", ev.k)->capture_default_str();
  e->add_option("--out", ev.out, "per-user report TSV")->required();

  std::string report_a, report_b;
  auto* cmp = app.add_subcommand("compare", "paired t-test between two per-user reports");
  cmp->add_option("--report-a", report_a)->required();
  cmp->add_option("--report-b", report_b)->required();

  SynthArgs sy;
  auto* s = app.add_subcommand("synth", "planted block-structure dataset with correlated text vectors");
  s->add_option("--users", sy.planted.users)->capture_default_str();
  s->add_option("--items", sy.planted.items)->capture_default_str();
  s->add_option("--blocks", sy.planted.blocks)->capture_default_str();
  s->add_option("--per-user", sy.planted.per_user)->capture_default_str();
  s->add_option("--in-block", sy.planted.in_block)->capture_default_str();
  s->add_option("--text-dim", sy.planted.text_dim)->capture_default_str();
  s->add_option("--text-noise", sy.planted.text_noise)->capture_default_str();
  s->add_option("--seed", sy.planted.seed)->capture_default_str();
  s->add_option("--out", sy.out)->required();

  std::string ids_file, emb_out;
  std::size_t emb_dim = 768;
  std::uint64_t emb_seed = 0;
  auto* se = app.add_subcommand("synth-embeddings", "seeded unit-norm vectors for a list of item ids");
  se->add_option("--ids", ids_file, "one item id per line")->required();
  se->add_option("--dim", emb_dim)->capture_default_str();
  se->add_option("--seed", emb_seed)->capture_default_str();
  se->add_option("--out", emb_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*p) return cmd_prepare(prep);
    if (*c) return cmd_condense(cond);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_evaluate(ev);
    if (*cmp) return cmd_compare(report_a, report_b);
    if (*s) return cmd_synth(sy);
    if (*se) return cmd_synth_embeddings(ids_file, emb_dim, emb_seed, emb_out);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 1;
}
