#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "agtm/condenser.hpp"
#include "agtm/trainer.hpp"

namespace agtm {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// `key=value` lines; `#` starts a comment; blank lines ignored.
KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::filesystem::path& file);

std::string_view to_string(RegMode mode);
RegMode parse_reg_mode(std::string_view name);

/// Applies recognized keys on top of `base`; unknown keys are an error.
TrainConfig train_config_from(const KeyValues& values, TrainConfig base = {});
CondenserConfig condenser_config_from(const KeyValues& values, CondenserConfig base = {});

std::string to_config_text(const TrainConfig& config);
std::string to_config_text(const CondenserConfig& config);

/// Named preference-stage presets (Amazon-Musics, -Movies, -Electronics).
std::optional<TrainConfig> train_preset(std::string_view name);
std::vector<std::string> train_preset_names();

/// Autoencoder preset: lr 1e-3, weight decay 1e-2, batch 128, 50 epochs, hidden 384.
CondenserConfig condenser_preset();

}  // namespace agtm
