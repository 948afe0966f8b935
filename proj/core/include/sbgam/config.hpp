#pragma once

#include <cstddef>

namespace sbgam {

enum class Initializer { constant_mle, user_supplied };

/// Stopping rules and step control shared by both estimators.
struct FitConfig {
  double tol_outer = 1e-6;  ///< relative sup-norm change of the additive predictor
  double tol_inner = 1e-8;  ///< sup-norm change per backfitting sweep
  std::size_t max_outer = 30;
  std::size_t max_inner = 100;
  double damping = 1.0;  ///< step factor in (0, 1]
  Initializer initializer = Initializer::constant_mle;

  /// Throws ConfigError on non-positive tolerances, zero iteration caps or damping outside (0, 1].
  void validate() const;
};

}  // namespace sbgam
