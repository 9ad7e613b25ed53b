#include <sstream>

#include "agtm/config.hpp"
#include "doctest.h"

using namespace agtm;

namespace {

const std::filesystem::path kConfigDir = AGTM_CONFIG_DIR;

TrainConfig expected_train(double lr, double wd, std::size_t batch) {
  TrainConfig c;
  c.variant.model = ModelKind::agtm;
  c.variant.layers = 3;
  c.variant.heads = 4;
  c.lr = lr;
  c.weight_decay = wd;
  c.batch_size = batch;
  c.max_epochs = 1000;
  c.eval_every = 10;
  c.patience = 100;
  return c;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("shipped autoencoder config equals the preset table") {
  const auto c = condenser_config_from(read_key_values(kConfigDir / "autoencoder.conf"));
  CHECK(c.lr == 1e-3);
  CHECK(c.weight_decay == 1e-2);
  CHECK(c.batch_size == 128);
  CHECK(c.epochs == 50);
  CHECK(c.hidden == 384);
  CHECK(c.dim == 64);
  CHECK(c == condenser_preset());
}

TEST_CASE("shipped training configs equal the preset table") {
  const std::vector<std::pair<std::string, TrainConfig>> rows{
      {"amazon-musics", expected_train(3e-3, 1e-2, 1024)},
      {"amazon-movies", expected_train(1e-3, 1e-3, 1024)},
      {"amazon-electronics", expected_train(1e-3, 1e-3, 2048)},
  };
  CHECK(train_preset_names().size() == rows.size());
  for (const auto& [name, want] : rows) {
    INFO(name);
    const auto file = train_config_from(read_key_values(kConfigDir / (name + ".conf")));
    CHECK(file == want);
    REQUIRE(train_preset(name).has_value());
    CHECK(*train_preset(name) == want);
  }
  CHECK_FALSE(train_preset("amazon-grocery").has_value());
}

TEST_CASE("config text round trips") {
  for (const auto& name : train_preset_names()) {
    const auto c = *train_preset(name);
    std::istringstream in(to_config_text(c));
    CHECK(train_config_from(parse_key_values(in)) == c);
  }
  std::istringstream in(to_config_text(condenser_preset()));
  CHECK(condenser_config_from(parse_key_values(in)) == condenser_preset());
}

TEST_CASE("config parsing errors") {
  const auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return train_config_from(parse_key_values(in));
  };
  CHECK_THROWS_WITH(parse("lr=1e-3\nlearning_rate=2\n"), doctest::Contains("learning_rate"));
  CHECK_THROWS(parse("lr=1e-3\nlr=2e-3\n"));
  CHECK_THROWS(parse("lr\n"));
  CHECK_THROWS(parse("lr=fast\n"));
  CHECK_THROWS(parse("eval_every=7\npatience=100\n"));
  CHECK_THROWS(parse("model=agtm\nablations=no_tcm,no_ae\n"));
  const auto c = parse("# comment\n\nmodel=lightgcn  # trailing\nlayers=2\nreg_mode=loss_term\n");
  CHECK(c.variant.model == ModelKind::lightgcn);
  CHECK(c.variant.layers == 2);
  CHECK(c.reg_mode == RegMode::loss_term);
}

}  // TEST_SUITE
