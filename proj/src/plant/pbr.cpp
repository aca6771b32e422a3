#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mfrto/plant_models.hpp"

namespace mfrto {

namespace {

struct ParamField {
  const char* name;
  double PbrParameters::*member;
};

constexpr ParamField kParamFields[] = {
    {"u_m", &PbrParameters::u_m},   {"u_d", &PbrParameters::u_d},   {"k_s", &PbrParameters::k_s},
    {"k_i", &PbrParameters::k_i},   {"k_sq", &PbrParameters::k_sq}, {"k_iq", &PbrParameters::k_iq},
    {"k_m", &PbrParameters::k_m},   {"k_d", &PbrParameters::k_d},   {"K_N", &PbrParameters::K_N},
    {"K_Np", &PbrParameters::K_Np}, {"Y_NX", &PbrParameters::Y_NX},
};

constexpr double kRatioLimit = 0.011;    // C_P <= 0.011 C_X
constexpr double kNitrateLimit = 800.0;  // C_N <= 800
constexpr double kEndNitrateLimit = 150.0;

}  // namespace

void PbrParameters::validate() const {
  for (const auto& f : kParamFields) {
    const double v = this->*f.member;
    const bool ok = (f.member == &PbrParameters::u_d) ? (v >= 0.0) : (v > 0.0);
    if (!ok || !std::isfinite(v)) {
      throw ConfigError(std::string("PBR parameter '") + f.name + "' out of range");
    }
  }
}

PbrParameters parse_pbr_parameters(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("PBR parameters: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("PBR parameters: expected a JSON object");

  std::set<std::string> known;
  PbrParameters p;
  for (const auto& f : kParamFields) {
    known.insert(f.name);
    const auto it = doc.find(f.name);
    if (it == doc.end()) throw ConfigError(std::string("PBR parameters: missing '") + f.name + "'");
    if (!it->is_number()) throw ConfigError(std::string("PBR parameters: '") + f.name + "' must be a number");
    p.*f.member = it->get<double>();
  }
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw ConfigError("PBR parameters: unknown key '" + key + "'");
  }
  p.validate();
  return p;
}

PbrParameters load_pbr_parameters(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open PBR parameter file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_pbr_parameters(buf.str());
}

Eigen::Vector3d pbr_plant_rhs(const Eigen::Vector3d& state, double light, double nitrate_inflow,
                              const PbrParameters& p) {
  const double cx = std::max(0.0, state(0));
  const double cn = std::max(0.0, state(1));
  const double cp = std::max(0.0, state(2));
  const double growth_light = light / (light + p.k_s + light * light / p.k_i);
  const double product_light = light / (light + p.k_sq + light * light / p.k_iq);
  const double monod = cn / (cn + p.K_N);
  const double growth = p.u_m * growth_light * monod * cx;
  return {growth - p.u_d * cx,
          -p.Y_NX * growth + nitrate_inflow,
          p.k_m * product_light * cx - p.k_d * cp / (cn + p.K_Np)};
}

Eigen::Vector3d pbr_model_rhs(const Eigen::Vector3d& state, double light, double nitrate_inflow,
                              const PbrParameters& p) {
  const double cx = std::max(0.0, state(0));
  const double cn = std::max(0.0, state(1));
  const double cp = std::max(0.0, state(2));
  const double growth_light = light / (light + p.k_s);
  const double product_light = light / (light + p.k_sq);
  const double monod = cn / (cn + p.K_N);
  const double growth = p.u_m * growth_light * monod * cx;
  return {growth - p.u_d * cx,
          -p.Y_NX * growth + nitrate_inflow,
          p.k_m * product_light * monod * cx - p.k_d * cp / (cn + p.K_Np)};
}

// ---------------------------------------------------------------------------

ControlSchedule ControlSchedule::from_vector(const Eigen::Ref<const Eigen::VectorXd>& u) {
  if (u.size() != 2 * kPbrStages) throw DimensionMismatch("ControlSchedule: expected 12 inputs");
  ControlSchedule s;
  for (int i = 0; i < kPbrStages; ++i) {
    s.light[static_cast<std::size_t>(i)] = u(i);
    s.inflow[static_cast<std::size_t>(i)] = u(kPbrStages + i);
  }
  return s;
}

ControlSchedule ControlSchedule::constant(double light, double inflow) {
  ControlSchedule s;
  s.light.fill(light);
  s.inflow.fill(inflow);
  return s;
}

Eigen::VectorXd ControlSchedule::to_vector() const {
  Eigen::VectorXd u(2 * kPbrStages);
  for (int i = 0; i < kPbrStages; ++i) {
    u(i) = light[static_cast<std::size_t>(i)];
    u(kPbrStages + i) = inflow[static_cast<std::size_t>(i)];
  }
  return u;
}

PiecewiseConstantSchedule ControlSchedule::to_piecewise() const {
  PiecewiseConstantSchedule s;
  s.boundaries = Eigen::VectorXd::LinSpaced(kPbrStages + 1, 0.0, kPbrBatchHours);
  s.inputs.resize(kPbrStages, 2);
  for (int i = 0; i < kPbrStages; ++i) {
    s.inputs(i, 0) = light[static_cast<std::size_t>(i)];
    s.inputs(i, 1) = inflow[static_cast<std::size_t>(i)];
  }
  return s;
}

bool ControlSchedule::within_bounds() const {
  for (int i = 0; i < kPbrStages; ++i) {
    const double l = light[static_cast<std::size_t>(i)];
    const double f = inflow[static_cast<std::size_t>(i)];
    if (!(l >= kLightMin && l <= kLightMax && f >= kInflowMin && f <= kInflowMax)) return false;
  }
  return true;
}

BoxDomain pbr_domain() {
  Eigen::VectorXd lo(2 * kPbrStages), hi(2 * kPbrStages);
  lo << Eigen::VectorXd::Constant(kPbrStages, kLightMin), Eigen::VectorXd::Constant(kPbrStages, kInflowMin);
  hi << Eigen::VectorXd::Constant(kPbrStages, kLightMax), Eigen::VectorXd::Constant(kPbrStages, kInflowMax);
  return BoxDomain(lo, hi);
}

BatchOutcome evaluate_batch(const ControlSchedule& schedule, Fidelity which, const NoiseSpec& noise,
                            const PbrParameters& params, Rng& rng, const PbrOptions& options) {
  if (!schedule.within_bounds()) throw OutOfRange("evaluate_batch: schedule outside input bounds");

  const auto rhs_fn = (which == Fidelity::Plant) ? &pbr_plant_rhs : &pbr_model_rhs;
  const OdeRhs rhs = [&](double, const Eigen::VectorXd& x, const Eigen::VectorXd& in) {
    return Eigen::VectorXd(rhs_fn(Eigen::Vector3d(x), in(0), in(1), params));
  };
  const Eigen::VectorXd x0 = Eigen::Vector3d(1.0, 150.0, 0.0);
  const auto hours = static_cast<Eigen::Index>(kPbrBatchHours);
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(hours + 1, 0.0, kPbrBatchHours);

  BatchOutcome out;
  try {
    out.trajectory = integrate_ode(rhs, x0, schedule.to_piecewise(), grid, options.ode_step);
  } catch (const NonFiniteState& e) {
    throw EvaluationFailed(std::string("PBR simulation diverged: ") + e.what());
  }

  const Eigen::Index per_stage = hours / kPbrStages;
  out.stage_samples.resize(kPbrStages, 3);
  for (int s = 0; s < kPbrStages; ++s) {
    out.stage_samples.row(s) = out.trajectory.states.row((s + 1) * per_stage);
  }
  if (which == Fidelity::Plant && noise.enabled) {
    const std::array<double, 3> sd{noise.sigma_cx, noise.sigma_cn, noise.sigma_cp};
    for (int s = 0; s < kPbrStages; ++s) {
      for (int c = 0; c < 3; ++c) {
        std::normal_distribution<double> n(0.0, sd[static_cast<std::size_t>(c)]);
        if (sd[static_cast<std::size_t>(c)] > 0.0) out.stage_samples(s, c) += n(rng);
      }
    }
  }

  const Eigen::Index n_con = 2 * kPbrStages + (options.end_nitrate_constraint ? 1 : 0);
  out.constraints.resize(n_con);
  for (int s = 0; s < kPbrStages; ++s) {
    const double cx = out.stage_samples(s, 0);
    const double cn = out.stage_samples(s, 1);
    const double cp = out.stage_samples(s, 2);
    out.constraints(2 * s) = cp - kRatioLimit * cx;
    out.constraints(2 * s + 1) = cn - kNitrateLimit;
  }
  if (options.end_nitrate_constraint) {
    out.constraints(n_con - 1) = out.stage_samples(kPbrStages - 1, 1) - kEndNitrateLimit;
  }
  out.cost = -out.stage_samples(kPbrStages - 1, 2);
  if (!std::isfinite(out.cost) || !out.constraints.allFinite()) {
    throw EvaluationFailed("PBR simulation produced non-finite outputs");
  }
  return out;
}

Eigen::VectorXd outcome_vector(const BatchOutcome& outcome) {
  Eigen::VectorXd v(1 + outcome.constraints.size());
  v << outcome.cost, outcome.constraints;
  return v;
}

RtoProblem make_pbr_problem(const PbrParameters& params, const NoiseSpec& noise,
                            const PbrOptions& options) {
  params.validate();
  RtoProblem problem;
  problem.name = "pbr";
  problem.domain = pbr_domain();
  problem.n_constraints = 2 * kPbrStages + (options.end_nitrate_constraint ? 1 : 0);
  problem.measurement_noise_variance = Eigen::VectorXd::Zero(1 + problem.n_constraints);
  if (noise.enabled) {
    const double vx = noise.sigma_cx * noise.sigma_cx;
    const double vn = noise.sigma_cn * noise.sigma_cn;
    const double vp = noise.sigma_cp * noise.sigma_cp;
    auto& v = problem.measurement_noise_variance;
    v(0) = vp;
    for (int s = 0; s < kPbrStages; ++s) {
      v(1 + 2 * s) = vp + kRatioLimit * kRatioLimit * vx;
      v(2 + 2 * s) = vn;
    }
    if (options.end_nitrate_constraint) v(problem.n_constraints) = vn;
  }
  problem.plant = [params, noise, options](const Eigen::VectorXd& u, Rng& rng) {
    return outcome_vector(
        evaluate_batch(ControlSchedule::from_vector(u), Fidelity::Plant, noise, params, rng, options));
  };
  problem.model = [params, options](const Eigen::VectorXd& u) {
    Rng unused(0);
    return outcome_vector(evaluate_batch(ControlSchedule::from_vector(u), Fidelity::Model,
                                         NoiseSpec{}, params, unused, options));
  };
  problem.plant_noiseless = [params, options](const Eigen::VectorXd& u) {
    Rng unused(0);
    NoiseSpec off;
    off.enabled = false;
    return outcome_vector(evaluate_batch(ControlSchedule::from_vector(u), Fidelity::Plant, off,
                                         params, unused, options));
  };
  return problem;
}

}  // namespace mfrto
