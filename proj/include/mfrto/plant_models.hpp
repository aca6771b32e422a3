#pragma once

// Simulators used as plant (ground truth, noisy) and model (cheap,
// structurally mismatched): the photobioreactor, the x sin(x) example and a
// small convex benchmark with a known constrained optimum.

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include "mfrto/numerics.hpp"

namespace mfrto {

/// Generic problem handed to the RTO loop. Both evaluators return
/// [cost, g_1, ..., g_ng]; constraints are satisfied when g_i <= 0.
struct RtoProblem {
  std::string name;
  BoxDomain domain;
  Eigen::Index n_constraints = 0;
  /// Expensive, possibly noisy measurement. Throws EvaluationFailed.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, Rng&)> plant;
  /// Deterministic process model.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> model;
  /// Noise-free plant response, for reporting only.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> plant_noiseless;
  /// Known measurement noise variance per output in raw units; empty when unknown.
  Eigen::VectorXd measurement_noise_variance;
};

// ---------------------------------------------------------------------------
// Photobioreactor

/// Kinetic parameters. Units: u_m, u_d [1/h]; k_d [mg L^-1 h^-1]; k_s, k_i, k_sq, k_iq
/// [uE m^-2 s^-1]; k_m [mg g^-1 h^-1]; K_N, K_Np [mg L^-1]; Y_NX [mg g^-1].
struct PbrParameters {
  double u_m = 0.0;
  double u_d = 0.0;
  double k_s = 0.0;
  double k_i = 0.0;
  double k_sq = 0.0;
  double k_iq = 0.0;
  double k_m = 0.0;
  double k_d = 0.0;
  double K_N = 0.0;
  double K_Np = 0.0;
  double Y_NX = 0.0;

  /// All strictly positive except the death rate u_d, which may be zero.
  void validate() const;
};

/// Parses a JSON object holding exactly the PbrParameters field names.
PbrParameters parse_pbr_parameters(std::string_view json_text);
PbrParameters load_pbr_parameters(const std::filesystem::path& path);

/// State order: [C_X (g/L), C_N (mg/L), C_P (mg/L)]; negative components are
/// clamped to zero before evaluation.
Eigen::Vector3d pbr_plant_rhs(const Eigen::Vector3d& state, double light, double nitrate_inflow,
                              const PbrParameters& p);
/// Mismatched model: no light inhibition, nitrate-limited production.
Eigen::Vector3d pbr_model_rhs(const Eigen::Vector3d& state, double light, double nitrate_inflow,
                              const PbrParameters& p);

inline constexpr int kPbrStages = 6;
inline constexpr double kPbrBatchHours = 240.0;
inline constexpr double kLightMin = 120.0;
inline constexpr double kLightMax = 400.0;
inline constexpr double kInflowMin = 0.0;
inline constexpr double kInflowMax = 40.0;

/// Six equal stages of light and nitrate inflow. The flat 12-vector is
/// [I_1..I_6, F_1..F_6].
struct ControlSchedule {
  std::array<double, kPbrStages> light{};
  std::array<double, kPbrStages> inflow{};

  static ControlSchedule from_vector(const Eigen::Ref<const Eigen::VectorXd>& u);
  static ControlSchedule constant(double light, double inflow);
  Eigen::VectorXd to_vector() const;
  PiecewiseConstantSchedule to_piecewise() const;
  bool within_bounds() const;
};

BoxDomain pbr_domain();

struct NoiseSpec {
  double sigma_cx = 0.02;
  double sigma_cn = 0.316;
  double sigma_cp = 0.001;
  bool enabled = true;
};

enum class Fidelity { Plant, Model };

struct PbrOptions {
  /// Adds C_N(240) <= 150 as a 13th constraint.
  bool end_nitrate_constraint = false;
  double ode_step = kDefaultOdeStep;
};

struct BatchOutcome {
  double cost = 0.0;                // -C_P(240)
  Eigen::VectorXd constraints;      // per stage: C_P - 0.011 C_X, C_N - 800
  Eigen::MatrixXd stage_samples;    // 6 x 3 (possibly noisy) measurements
  OdeTrajectory trajectory;         // noise-free, hourly
};

/// Integrates from C_X = 1, C_N = 150, C_P = 0 over the batch. Noise is added
/// to stage-end samples of the plant only. Throws EvaluationFailed on blow-up.
BatchOutcome evaluate_batch(const ControlSchedule& schedule, Fidelity which, const NoiseSpec& noise,
                            const PbrParameters& params, Rng& rng, const PbrOptions& options = {});

Eigen::VectorXd outcome_vector(const BatchOutcome& outcome);

RtoProblem make_pbr_problem(const PbrParameters& params, const NoiseSpec& noise,
                            const PbrOptions& options = {});

// ---------------------------------------------------------------------------
// Motivating example

inline constexpr double kXsinxNoiseStd = 0.01;

double xsinx(double x);
double xsinx_sample(double x, double noise_std, Rng& rng);

/// Unconstrained 1-D problem on [0, 12]: the plant is noisy x sin(x), the
/// model 0.9 x sin(x) + 0.5.
RtoProblem xsinx_problem(double noise_std = kXsinxNoiseStd);

// ---------------------------------------------------------------------------
// Convex benchmark

/// Plant: cost (u1-1)^2 + (u2-1)^2, constraint u1 + u2 - 1 <= 0 on
/// [-2, 2]^2. The model differs by affine terms scaled by `mismatch`.
struct SyntheticBenchmark {
  RtoProblem problem;
  Eigen::Vector2d optimum;
  double optimal_cost = 0.0;
};

SyntheticBenchmark synthetic_benchmark(double mismatch = 1.0, double noise_std = 0.0);

}  // namespace mfrto
