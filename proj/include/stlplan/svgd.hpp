#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace stlplan {

using ParticleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Hyperparameters of the particle transport.
struct SvpioConfig {
  int particles = 10;          // N
  int iterations = 20;         // M
  double epsilon = 0.2;        // step size
  double lambda = 0.1;         // temperature
  std::uint64_t seed = 0;
  double bandwidth_floor = 1e-6;
  bool clamp_after_step = true;
  unsigned workers = 1;        // 0 = hardware concurrency
};

/// Throws std::invalid_argument unless N >= 1, M >= 0, epsilon > 0, lambda > 0, floor > 0.
void check_config(const SvpioConfig& cfg);

/// Axis-aligned support of the uniform prior over flattened particles.
struct ControlBox {
  Eigen::RowVectorXd lower;
  Eigen::RowVectorXd upper;

  Eigen::Index dim() const { return lower.size(); }
};

struct KernelMatrices {
  Eigen::MatrixXd K;         // K(i, j) = exp(-||u_i - u_j||^2 / h)
  ParticleMatrix repulsion;  // row i: sum_j grad_{u_j} K(u_j, u_i)
  double bandwidth = 1.0;
};

/// Median heuristic: max(median pairwise distance^2, floor) / log N; N = 1 gives floor.
double median_bandwidth(const ParticleMatrix& particles, double bandwidth_floor);

KernelMatrices rbf_kernel(const ParticleMatrix& particles, double bandwidth_floor);
KernelMatrices rbf_kernel_with_bandwidth(const ParticleMatrix& particles, double bandwidth);

/// grad_{u_j} K(u_j, u_i) = -2 (u_j - u_i) / h * K(u_j, u_i).
Eigen::RowVectorXd kernel_gradient(const ParticleMatrix& particles, const KernelMatrices& kernel, Eigen::Index j,
                                   Eigen::Index i);

struct Population {
  ParticleMatrix particles;
  Eigen::VectorXd hard;     // selection score per particle
  Eigen::VectorXd smooth;   // differentiable potential per particle
  ParticleMatrix grads;     // gradient of the potential per particle
};

/// phi*(u_i) = 1/N sum_j [ K(u_j,u_i) grads_j / lambda + grad_{u_j} K(u_j,u_i) ].
ParticleMatrix svgd_direction(const Population& pop, const KernelMatrices& kernel, double lambda);

/// u_i += epsilon * phi*(u_i), then projection onto the box when clamp_after_step.
/// Throws EvaluationError naming the particle and iteration on non-finite updates.
Population svgd_step(const Population& pop, const KernelMatrices& kernel, const SvpioConfig& cfg,
                     const ControlBox& box, int iteration = 0);
Population svgd_step(const Population& pop, const SvpioConfig& cfg, const ControlBox& box, int iteration = 0);

/// Value and gradient of the attraction potential for one particle. Must be thread-safe.
struct ObjectiveSample {
  double score = 0.0;   // used for selection (hard robustness for STL objectives)
  double smooth = 0.0;  // potential whose gradient is returned
  Eigen::RowVectorXd gradient;
  long evaluations = 1;  // forward evaluations spent on this sample
};

class Objective {
 public:
  virtual ~Objective() = default;
  virtual Eigen::Index dimension() const = 0;
  virtual ObjectiveSample evaluate(std::span<const double> u, bool with_gradient) const = 0;
};

struct IterationDiag {
  int iteration = 0;
  double best = 0.0;
  double mean = 0.0;
  double min = 0.0;
  double mean_pairwise_distance = 0.0;
  double bandwidth = 0.0;
  double wall_ms = 0.0;
};

struct SvgdRun {
  Population final;
  Eigen::Index best = 0;
  std::vector<IterationDiag> diagnostics;
  long evaluations = 0;
  double wall_ms = 0.0;
};

/// Particle i draws from its own stream seeded by (seed, i).
ParticleMatrix sample_uniform(const ControlBox& box, int count, std::uint64_t seed);

double mean_pairwise_distance(const ParticleMatrix& particles);

/// Index of the largest value; the lowest index wins ties.
Eigen::Index argmax_first(const Eigen::VectorXd& values);

/// Full transport loop: evaluate, build the kernel, step; M times. Returns the final
/// population evaluated once more and its best particle.
SvgdRun run_svgd(const Objective& objective, const ControlBox& box, const SvpioConfig& cfg,
                 ParticleMatrix initial);

/// Seeds the population by sample_uniform(box, cfg.particles, cfg.seed).
SvgdRun run_svgd(const Objective& objective, const ControlBox& box, const SvpioConfig& cfg);

}  // namespace stlplan
