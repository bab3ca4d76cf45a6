#include <cmath>
#include <stdexcept>
#include <string>

#include "nuts_gauss/samplers.hpp"

namespace nuts_gauss {

std::string_view to_string(Kernel k) {
  switch (k) {
    case Kernel::NUTS: return "nuts";
    case Kernel::MultinoulliHMC: return "multinoulli";
    case Kernel::UniformHMC: return "uniform";
  }
  return "unknown";
}

std::string_view to_string(Jitter j) {
  switch (j) {
    case Jitter::None: return "none";
    case Jitter::PerTransition: return "transition";
    case Jitter::PerLeapfrogStep: return "leapfrog";
  }
  return "unknown";
}

Kernel parse_kernel(std::string_view name) {
  if (name == "nuts") return Kernel::NUTS;
  if (name == "multinoulli") return Kernel::MultinoulliHMC;
  if (name == "uniform") return Kernel::UniformHMC;
  throw std::invalid_argument("unknown kernel '" + std::string(name) + "' (expected nuts, multinoulli, uniform)");
}

Jitter parse_jitter(std::string_view name) {
  if (name == "none") return Jitter::None;
  if (name == "transition") return Jitter::PerTransition;
  if (name == "leapfrog") return Jitter::PerLeapfrogStep;
  throw std::invalid_argument("unknown jitter mode '" + std::string(name) + "' (expected none, transition, leapfrog)");
}

int resolve_fixed_k(const SamplerConfig& cfg, long d) {
  if (cfg.fixed_k >= 0) return cfg.fixed_k;
  const double dd = static_cast<double>(d);
  const double scale = std::min(3.0 * std::sqrt(dd), dd);
  if (auto k = k_star(cfg.h, shell_delta(scale, scale, dd, cfg.h))) return std::min(*k, cfg.k_max);
  if (auto k = k_star(cfg.h, 0.0)) return std::min(*k, cfg.k_max);
  throw std::invalid_argument("no k* exists for this step size; set fixed_k explicitly");
}

}  // namespace nuts_gauss
