#pragma once

#include <string>

#include "fnboost/boosting.hpp"

namespace fnboost {

/// Versioned JSON serialization of a fitted model: spec, learner transforms and
/// smoothing parameters, offset, and the full increment path — enough for
/// bit-exact prediction and truncation (to smaller iteration counts) after
/// reloading. The training data are not stored.
void save_model(const FittedModel& model, const std::string& path);
FittedModel load_model(const std::string& path);

}  // namespace fnboost
