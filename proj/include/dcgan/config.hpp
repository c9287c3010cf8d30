#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dcgan/train.hpp"

namespace dcgan {

// Flat UTF-8 "key = value" lines. Blank lines and lines starting with '#'
// are ignored; keys mirror TrainConfig field names.

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/// Throws ParseError naming the offending line.
ConfigEntries parse_config_text(std::string_view text);
ConfigEntries read_config_file(const std::filesystem::path& path);

const std::vector<std::string>& train_config_keys();

/// Throws ValidationError on an unknown key or an unparsable value.
void apply_config_entry(TrainConfig& config, const std::string& key, const std::string& value);
TrainConfig train_config_from_entries(const ConfigEntries& entries, TrainConfig base = {});

/// Every key with its effective value, in train_config_keys() order. Feeding
/// the text back through parse_config_text reproduces the same config.
std::string render_config(const TrainConfig& config);

}  // namespace dcgan
