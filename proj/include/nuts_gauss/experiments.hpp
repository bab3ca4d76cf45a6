#pragma once

#include <cstdint>
#include <vector>

#include "nuts_gauss/orbit.hpp"
#include "nuts_gauss/samplers.hpp"

namespace nuts_gauss {

enum class StartMode { Gaussian, Fixed };

struct SimulateOptions {
  long dimension = 100;
  long n_chains = 1;
  long n_iters = 1;
  long burn_in = 0;  // rows with iter <= burn_in are dropped
  StartMode start = StartMode::Gaussian;
  unsigned workers = 1;
};

struct ChainRow {
  long chain = 0;
  long iter = 0;
  double norm_sq = 0;
  StopReason stop_reason = StopReason::MaxDepth;
  int orbit_k = 0;
  long grad_evals = 0;
  long L = 0;
  double path_time = 0;
  bool a_index_accept = false;
};

/// Independent chains on the Gaussian target of the given dimension. Chain c
/// draws from RandomStream(seed, c); with StartMode::Fixed every chain starts
/// from one shared draw. Rows are ordered by (chain, iter) whatever the
/// worker count.
std::vector<ChainRow> simulate_chains(const SamplerConfig& cfg, const SimulateOptions& opts);

/// The shared start used by StartMode::Fixed.
Eigen::VectorXd fixed_start(std::uint64_t seed, long dimension);

}  // namespace nuts_gauss
