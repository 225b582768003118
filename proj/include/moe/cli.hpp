#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "moe/divergence.hpp"
#include "moe/estimator.hpp"
#include "moe/experiments.hpp"
#include "moe/io.hpp"
#include "moe/polysys.hpp"
#include "moe/voronoi.hpp"

namespace moe::cli {

enum ExitCode { kSuccess = 0, kUsageError = 1, kNumericFailure = 2 };

/// One documented configuration key.
struct KeyInfo {
  std::string key;
  std::string default_value;
  std::string help;
};

/// Every key accepted in config files and --set overrides.
const std::vector<KeyInfo>& known_keys();

/// Config file (if any) with --set overrides applied; unknown keys rejected.
KeyValueDocument load_settings(const std::string& config_path,
                               const std::vector<std::string>& overrides);

ThetaBox theta_from(const KeyValueDocument& doc, std::size_t dim);
FitConfig fit_from(const KeyValueDocument& doc);
TranslationSolverConfig solver_from(const KeyValueDocument& doc);
QuadratureSpec quadrature_from(const KeyValueDocument& doc);
polysys::SearchConfig search_from(const KeyValueDocument& doc);
/// `base_dir` resolves a relative experiment.truth path.
ExperimentConfig experiment_from(const KeyValueDocument& doc, const std::string& base_dir);

/// Routes argv to a subcommand. Results go to `out`, diagnostics to `err`.
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int parse_and_dispatch(int argc, const char* const* argv);

}  // namespace moe::cli
