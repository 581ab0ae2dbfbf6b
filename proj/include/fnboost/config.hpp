#pragma once

#include <json.hpp>

#include "fnboost/boosting.hpp"

namespace fnboost {

/// Parse one learner clause, e.g. {"type":"bsignal","x":"NIR","knots":20,"df":4}.
/// `where` prefixes diagnostics with the clause location (e.g. "formula[2]").
BaseLearnerSpec learner_from_json(const nlohmann::json& clause, const std::string& where);
nlohmann::json learner_to_json(const BaseLearnerSpec& spec);

/// Parse a full model configuration (family, control, offset, formula, ...).
ModelSpec model_spec_from_json(const nlohmann::json& config);
nlohmann::json model_spec_to_json(const ModelSpec& spec);

}  // namespace fnboost
