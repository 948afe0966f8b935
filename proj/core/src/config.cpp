#include "sbgam/config.hpp"

#include <cmath>
#include <string>

#include "sbgam/errors.hpp"

namespace sbgam {

void FitConfig::validate() const {
  if (!(tol_outer > 0.0) || !std::isfinite(tol_outer)) throw ConfigError("tol_outer must be positive");
  if (!(tol_inner > 0.0) || !std::isfinite(tol_inner)) throw ConfigError("tol_inner must be positive");
  if (max_outer < 1) throw ConfigError("max_outer must be at least 1");
  if (max_inner < 1) throw ConfigError("max_inner must be at least 1");
  if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("damping " + std::to_string(damping) + " outside (0, 1]");
}

}  // namespace sbgam
