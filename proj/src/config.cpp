#include "agtm/config.hpp"

#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "text_format.hpp"

namespace agtm {
namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (...) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw std::invalid_argument("config: invalid number for " + key + ": '" + value + "'");
  }
  return v;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!value.empty() && value.front() == '-') throw std::invalid_argument("");
    v = std::stoull(value, &used);
  } catch (...) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw std::invalid_argument("config: invalid non-negative integer for " + key + ": '" +
                                value + "'");
  }
  return v;
}

void reject_duplicates(const KeyValues& values) {
  std::set<std::string> seen;
  for (const auto& [k, v] : values) {
    if (!seen.insert(k).second) throw std::invalid_argument("config: duplicate key '" + k + "'");
  }
}

TrainConfig preference_preset(double lr, double weight_decay, std::size_t batch_size) {
  TrainConfig c;
  c.variant.model = ModelKind::agtm;
  c.variant.layers = 3;
  c.variant.heads = 4;
  c.lr = lr;
  c.weight_decay = weight_decay;
  c.batch_size = batch_size;
  c.max_epochs = 1000;
  c.eval_every = 10;
  c.patience = 100;
  return c;
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
    }
    auto key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    }
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config " + file.string());
  try {
    return parse_key_values(in);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(file.string() + ": " + e.what());
  }
}

std::string_view to_string(RegMode mode) {
  return mode == RegMode::decoupled ? "decoupled" : "loss_term";
}

RegMode parse_reg_mode(std::string_view name) {
  if (name == "decoupled") return RegMode::decoupled;
  if (name == "loss_term") return RegMode::loss_term;
  throw std::invalid_argument("unknown reg_mode '" + std::string(name) + "'");
}

TrainConfig train_config_from(const KeyValues& values, TrainConfig base) {
  reject_duplicates(values);
  for (const auto& [key, value] : values) {
    if (key == "model") base.variant.model = parse_model_kind(value);
    else if (key == "ablations") base.variant.ablations = parse_ablations(value);
    else if (key == "layers") base.variant.layers = to_unsigned(key, value);
    else if (key == "heads") base.variant.heads = to_unsigned(key, value);
    else if (key == "combine_mode") base.variant.combine = parse_combine_mode(value);
    else if (key == "lr") base.lr = to_double(key, value);
    else if (key == "weight_decay") base.weight_decay = to_double(key, value);
    else if (key == "batch_size") base.batch_size = to_unsigned(key, value);
    else if (key == "max_epochs") base.max_epochs = to_unsigned(key, value);
    else if (key == "eval_every") base.eval_every = to_unsigned(key, value);
    else if (key == "patience") base.patience = to_unsigned(key, value);
    else if (key == "seed") base.seed = to_unsigned(key, value);
    else if (key == "reg_mode") base.reg_mode = parse_reg_mode(value);
    else throw std::invalid_argument("config: unknown training key '" + key + "'");
  }
  base.validate();
  return base;
}

CondenserConfig condenser_config_from(const KeyValues& values, CondenserConfig base) {
  reject_duplicates(values);
  for (const auto& [key, value] : values) {
    if (key == "lr") base.lr = to_double(key, value);
    else if (key == "weight_decay") base.weight_decay = to_double(key, value);
    else if (key == "batch_size") base.batch_size = to_unsigned(key, value);
    else if (key == "epochs") base.epochs = to_unsigned(key, value);
    else if (key == "hidden") base.hidden = to_unsigned(key, value);
    else if (key == "dim") base.dim = to_unsigned(key, value);
    else if (key == "seed") base.seed = to_unsigned(key, value);
    else if (key == "reg_mode") base.reg_mode = parse_reg_mode(value);
    else throw std::invalid_argument("config: unknown autoencoder key '" + key + "'");
  }
  base.validate();
  return base;
}

std::string to_config_text(const TrainConfig& c) {
  std::ostringstream out;
  out << "model=" << to_string(c.variant.model) << '\n'
      << "ablations=" << ablations_to_string(c.variant.ablations) << '\n'
      << "layers=" << c.variant.layers << '\n'
      << "heads=" << c.variant.heads << '\n'
      << "lr=" << detail::format_g(c.lr) << '\n'
      << "weight_decay=" << detail::format_g(c.weight_decay) << '\n'
      << "batch_size=" << c.batch_size << '\n'
      << "max_epochs=" << c.max_epochs << '\n'
      << "eval_every=" << c.eval_every << '\n'
      << "patience=" << c.patience << '\n'
      << "seed=" << c.seed << '\n'
      << "reg_mode=" << to_string(c.reg_mode) << '\n'
      << "combine_mode=" << to_string(c.variant.combine) << '\n';
  return out.str();
}

std::string to_config_text(const CondenserConfig& c) {
  std::ostringstream out;
  out << "lr=" << detail::format_g(c.lr) << '\n'
      << "weight_decay=" << detail::format_g(c.weight_decay) << '\n'
      << "batch_size=" << c.batch_size << '\n'
      << "epochs=" << c.epochs << '\n'
      << "hidden=" << c.hidden << '\n'
      << "dim=" << c.dim << '\n'
      << "seed=" << c.seed << '\n'
      << "reg_mode=" << to_string(c.reg_mode) << '\n';
  return out.str();
}

std::optional<TrainConfig> train_preset(std::string_view name) {
  if (name == "amazon-musics") return preference_preset(3e-3, 1e-2, 1024);
  if (name == "amazon-movies") return preference_preset(1e-3, 1e-3, 1024);
  if (name == "amazon-electronics") return preference_preset(1e-3, 1e-3, 2048);
  return std::nullopt;
}

std::vector<std::string> train_preset_names() {
  return {"amazon-musics", "amazon-movies", "amazon-electronics"};
}

CondenserConfig condenser_preset() {
  CondenserConfig c;
  c.lr = 1e-3;
  c.weight_decay = 1e-2;
  c.batch_size = 128;
  c.epochs = 50;
  c.hidden = 384;
  c.dim = 64;
  return c;
}

}  // namespace agtm
