#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "neurogrow/trainer.hpp"

namespace neurogrow {

/// Parse a strict-schema JSON config into a TrainConfig. Unknown keys are
/// rejected (typo guard); numeric ranges are validated before any work.
TrainConfig parse_train_config(const nlohmann::json& j);

nlohmann::json load_config_file(const std::string& path);

/// Apply one `--set key.path=value` override; value is parsed as JSON when
/// possible, else taken as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Fill in every defaulted field so the frozen copy is self-contained.
nlohmann::json resolve_config(const nlohmann::json& j);

}  // namespace neurogrow
