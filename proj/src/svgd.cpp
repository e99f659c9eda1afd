#include "stlplan/svgd.hpp"

#include "stlplan/parallel.hpp"
#include "stlplan/semantics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace stlplan {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

Population evaluate_all(const Objective& objective, ParticleMatrix particles, bool with_gradient, unsigned workers,
                        long& evaluations) {
  const Eigen::Index n = particles.rows();
  Population pop;
  pop.hard.resize(n);
  pop.smooth.resize(n);
  pop.grads = ParticleMatrix::Zero(n, particles.cols());
  std::vector<long> evals(n, 0);
  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    ObjectiveSample s = objective.evaluate({particles.row(row).data(), static_cast<std::size_t>(particles.cols())},
                                           with_gradient);
    pop.hard(row) = s.score;
    pop.smooth(row) = s.smooth;
    if (with_gradient) pop.grads.row(row) = s.gradient;
    evals[i] = s.evaluations;
  });
  for (long e : evals) evaluations += e;
  pop.particles = std::move(particles);
  return pop;
}

}  // namespace

void check_config(const SvpioConfig& cfg) {
  if (cfg.particles < 1) throw std::invalid_argument("svpio: particle count must be >= 1");
  if (cfg.iterations < 0) throw std::invalid_argument("svpio: iterations must be >= 0");
  if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon)) throw std::invalid_argument("svpio: epsilon must be > 0");
  if (!(cfg.lambda > 0.0) || !std::isfinite(cfg.lambda)) throw std::invalid_argument("svpio: lambda must be > 0");
  if (!(cfg.bandwidth_floor > 0.0)) throw std::invalid_argument("svpio: bandwidth_floor must be > 0");
}

double median_bandwidth(const ParticleMatrix& particles, double bandwidth_floor) {
  const Eigen::Index n = particles.rows();
  if (n < 2) return bandwidth_floor;
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) dists.push_back((particles.row(i) - particles.row(j)).norm());
  }
  const double med = median(std::move(dists));
  return std::max(med * med, bandwidth_floor) / std::log(static_cast<double>(n));
}

KernelMatrices rbf_kernel_with_bandwidth(const ParticleMatrix& particles, double bandwidth) {
  const Eigen::Index n = particles.rows();
  KernelMatrices out;
  out.bandwidth = bandwidth;
  out.K = Eigen::MatrixXd::Ones(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double k = std::exp(-(particles.row(i) - particles.row(j)).squaredNorm() / bandwidth);
      out.K(i, j) = k;
      out.K(j, i) = k;
    }
  }
  out.repulsion = ParticleMatrix::Zero(n, particles.cols());
  const double scale = 2.0 / bandwidth;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      out.repulsion.row(i) += (scale * out.K(j, i)) * (particles.row(i) - particles.row(j));
    }
  }
  return out;
}

KernelMatrices rbf_kernel(const ParticleMatrix& particles, double bandwidth_floor) {
  return rbf_kernel_with_bandwidth(particles, median_bandwidth(particles, bandwidth_floor));
}

Eigen::RowVectorXd kernel_gradient(const ParticleMatrix& particles, const KernelMatrices& kernel, Eigen::Index j,
                                   Eigen::Index i) {
  return (-2.0 / kernel.bandwidth * kernel.K(j, i)) * (particles.row(j) - particles.row(i));
}

ParticleMatrix svgd_direction(const Population& pop, const KernelMatrices& kernel, double lambda) {
  const Eigen::Index n = pop.particles.rows();
  const double inv_lambda = 1.0 / lambda;
  const double inv_n = 1.0 / static_cast<double>(n);
  ParticleMatrix phi = kernel.repulsion;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) phi.row(i) += (kernel.K(j, i) * inv_lambda) * pop.grads.row(j);
    phi.row(i) *= inv_n;
  }
  return phi;
}

Population svgd_step(const Population& pop, const KernelMatrices& kernel, const SvpioConfig& cfg,
                     const ControlBox& box, int iteration) {
  ParticleMatrix phi = svgd_direction(pop, kernel, cfg.lambda);
  Population next = pop;
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    auto row = next.particles.row(i);
    row += cfg.epsilon * phi.row(i);
    if (!row.allFinite()) {
      throw EvaluationError("non-finite update for particle " + std::to_string(i) + " at iteration " +
                            std::to_string(iteration));
    }
    if (cfg.clamp_after_step) row = row.cwiseMax(box.lower).cwiseMin(box.upper);
  }
  return next;
}

Population svgd_step(const Population& pop, const SvpioConfig& cfg, const ControlBox& box, int iteration) {
  return svgd_step(pop, rbf_kernel(pop.particles, cfg.bandwidth_floor), cfg, box, iteration);
}

ParticleMatrix sample_uniform(const ControlBox& box, int count, std::uint64_t seed) {
  ParticleMatrix out(count, box.dim());
  for (int i = 0; i < count; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    for (Eigen::Index d = 0; d < box.dim(); ++d) {
      std::uniform_real_distribution<double> dist(box.lower(d), box.upper(d));
      out(i, d) = dist(rng);
    }
  }
  return out;
}

double mean_pairwise_distance(const ParticleMatrix& particles) {
  const Eigen::Index n = particles.rows();
  if (n < 2) return 0.0;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) sum += (particles.row(i) - particles.row(j)).norm();
  }
  return sum / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

Eigen::Index argmax_first(const Eigen::VectorXd& values) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values(i) > values(best)) best = i;
  }
  return best;
}

SvgdRun run_svgd(const Objective& objective, const ControlBox& box, const SvpioConfig& cfg, ParticleMatrix initial) {
  check_config(cfg);
  if (initial.cols() != objective.dimension() || box.dim() != objective.dimension()) {
    throw std::invalid_argument("svgd: particle dimension does not match the objective");
  }
  const auto start = Clock::now();
  SvgdRun run;
  ParticleMatrix particles = std::move(initial);
  for (int m = 0; m < cfg.iterations; ++m) {
    const auto iter_start = Clock::now();
    Population pop = evaluate_all(objective, std::move(particles), true, cfg.workers, run.evaluations);
    KernelMatrices kernel = rbf_kernel(pop.particles, cfg.bandwidth_floor);

    IterationDiag diag;
    diag.iteration = m;
    diag.best = pop.hard.maxCoeff();
    diag.mean = pop.hard.mean();
    diag.min = pop.hard.minCoeff();
    diag.mean_pairwise_distance = mean_pairwise_distance(pop.particles);
    diag.bandwidth = kernel.bandwidth;

    particles = svgd_step(pop, kernel, cfg, box, m).particles;
    diag.wall_ms = elapsed_ms(iter_start);
    run.diagnostics.push_back(diag);
  }
  run.final = evaluate_all(objective, std::move(particles), false, cfg.workers, run.evaluations);
  run.best = argmax_first(run.final.hard);
  run.wall_ms = elapsed_ms(start);
  return run;
}

SvgdRun run_svgd(const Objective& objective, const ControlBox& box, const SvpioConfig& cfg) {
  check_config(cfg);
  return run_svgd(objective, box, cfg, sample_uniform(box, cfg.particles, cfg.seed));
}

}  // namespace stlplan
