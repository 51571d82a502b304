#pragma once

#include <string>

#include "mgcsl/eval.hpp"
#include "mgcsl/optimizer.hpp"

namespace mgcsl::io {

/// JSON text of every HyperParams field.
std::string hyperparams_to_json(const opt::HyperParams& hp);
/// Starts from defaults and overrides the keys present; throws ParseError.
opt::HyperParams hyperparams_from_json(const std::string& text);

/// FitResult as JSON: C, S, A as nested arrays, trace, timings, reason,
/// hyperparameters, and the SAE / MLP checkpoints. Keys of the `extra`
/// object (JSON text) are merged at top level.
std::string fit_result_to_json(const opt::FitResult& r, const std::string& extra = "{}");

/// The five report fields plus edge counts; `extra` merged as above.
std::string metrics_to_json(const eval::MetricsReport& m, const std::string& extra = "{}");
eval::MetricsReport metrics_from_json(const std::string& text);

}  // namespace mgcsl::io
