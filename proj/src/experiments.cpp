#include "nuts_gauss/experiments.hpp"

#include <stdexcept>

#include "nuts_gauss/parallel.hpp"

namespace nuts_gauss {

namespace {
constexpr std::uint64_t kFixedStartStream = 0x6669786564ULL;
}

Eigen::VectorXd fixed_start(std::uint64_t seed, long dimension) {
  RandomStream rng(seed, kFixedStartStream);
  return rng.standard_normal(dimension);
}

std::vector<ChainRow> simulate_chains(const SamplerConfig& cfg, const SimulateOptions& opts) {
  cfg.validate();
  if (opts.dimension < 1 || opts.n_chains < 1 || opts.n_iters < 0 || opts.burn_in < 0) {
    throw std::invalid_argument("simulate: need d >= 1, n_chains >= 1, n_iters >= 0, burn_in >= 0");
  }
  const GaussianTarget<double> target(opts.dimension);
  const long kept = std::max(0L, opts.n_iters - opts.burn_in);
  std::vector<ChainRow> rows(static_cast<std::size_t>(opts.n_chains * kept));
  const Eigen::VectorXd shared = opts.start == StartMode::Fixed ? fixed_start(cfg.seed, opts.dimension)
                                                                 : Eigen::VectorXd();

  parallel_for(opts.n_chains, opts.workers, [&](long c) {
    RandomStream root(cfg.seed, static_cast<std::uint64_t>(c));
    Eigen::VectorXd x0 = opts.start == StartMode::Fixed ? shared : root.substream(1).standard_normal(opts.dimension);
    if (opts.n_iters == 0) return;
    ChainRunner<double, GaussianTarget<double>> runner(target, cfg, std::move(x0), root.substream(2));
    for (long it = 1; it <= opts.n_iters; ++it) {
      const TransitionRecord<double>& rec = runner.step();
      if (it <= opts.burn_in) continue;
      ChainRow& row = rows[static_cast<std::size_t>(c * kept + (it - opts.burn_in - 1))];
      row.chain = c;
      row.iter = it;
      row.norm_sq = rec.norm_sq();
      row.stop_reason = rec.stop_reason;
      row.orbit_k = rec.orbit.log2_length;
      row.grad_evals = rec.gradient_evals;
      row.L = rec.L;
      row.path_time = rec.path_length_time;
      row.a_index_accept = rec.a_index_accept;
    }
  });
  return rows;
}

}  // namespace nuts_gauss
