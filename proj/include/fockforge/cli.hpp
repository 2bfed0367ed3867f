#pragma once
// Command-line front end: model loading with cutoff/parameter overrides,
// state literals, and the batch subcommands. Kept as a library so the slope
// fit and parsing helpers are unit-testable.

#include <string>
#include <vector>

#include "fockforge/model_spec.hpp"

namespace fockforge {

struct SlopeFit {
  std::vector<std::pair<double, double>> points;  // (K, count)
  std::vector<std::pair<double, double>> window;  // fitted subset (log-log)
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS residual of the window fit
};

// Least-squares slope of log(count) vs log(K) over the top `window_fraction`
// of the K values (default: top half). Throws Error on fewer than 4 points,
// nonpositive values, or a degenerate (constant-K) series.
SlopeFit fit_slope(const std::vector<std::pair<double, double>>& points,
                   double window_fraction = 0.5);

// `(species,momentum,occupancy)` tuples, concatenated; multi-dimensional
// momenta use `;` between components. Example: "(phi,1,3)(phi,2,1)".
FockState parse_state_literal(const std::string& text, const ParticleRegistry& registry);
std::string state_literal(const FockState& state, const ParticleRegistry& registry);

// Resolves "builtin:NAME" or a model file path, applying the K-derived
// cutoffs (light front: momenta [1,K]; equal time: Lambda = ceil(K/2)-1,
// I = K, W = K unless overridden) and parameter overrides.
ModelSpec load_model(const std::string& source, int K,
                     const std::map<std::string, double>& param_overrides = {},
                     int lambda_override = -1, int I_override = -1,
                     int W_override = -1);

// Exit codes: 0 ok, 2 usage, 3 validation, 4 sector cap exceeded.
int run_cli(int argc, const char* const* argv);

}  // namespace fockforge
