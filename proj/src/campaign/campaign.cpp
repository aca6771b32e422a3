#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "mfrto/campaign.hpp"

namespace mfrto {

ProblemKind parse_problem(std::string_view name) {
  if (name == "pbr") return ProblemKind::Pbr;
  if (name == "synthetic") return ProblemKind::Synthetic;
  if (name == "xsinx") return ProblemKind::Xsinx;
  throw ConfigError("unknown problem '" + std::string(name) + "' (expected pbr, synthetic or xsinx)");
}

std::string_view to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::Pbr: return "pbr";
    case ProblemKind::Synthetic: return "synthetic";
    case ProblemKind::Xsinx: return "xsinx";
  }
  return "unknown";
}

Scenario parse_scenario(std::string_view name) {
  if (name == "proposed") return Scenario::Proposed;
  if (name == "a") return Scenario::A;
  if (name == "b") return Scenario::B;
  if (name == "c") return Scenario::C;
  throw ConfigError("unknown scenario '" + std::string(name) + "' (expected proposed, a, b or c)");
}

std::string_view to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::Proposed: return "proposed";
    case Scenario::A: return "a";
    case Scenario::B: return "b";
    case Scenario::C: return "c";
  }
  return "unknown";
}

ScenarioFlags flags_for(Scenario scenario) {
  switch (scenario) {
    case Scenario::Proposed: return {true, true, true};
    case Scenario::A: return {true, false, true};
    case Scenario::B: return {false, true, true};
    case Scenario::C: return {true, true, false};
  }
  return {};
}

void CampaignConfig::finalize() {
  rto.flags = flags_for(scenario);
  rto.risk = RiskSpec(alpha, multiplier_override);
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  if (n_initial < 1) throw ConfigError("n_initial must be >= 1");
  if (initial_attempts < n_initial) throw ConfigError("initial_attempts must be >= n_initial");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (noise.sigma_cx < 0 || noise.sigma_cn < 0 || noise.sigma_cp < 0) {
    throw ConfigError("noise standard deviations must be >= 0");
  }
  if (synthetic_noise < 0) throw ConfigError("synthetic.noise_std must be >= 0");
  rto.validate();
}

nlohmann::json CampaignConfig::to_json() const {
  nlohmann::json j;
  j["problem"] = to_string(problem);
  j["scenario"] = to_string(scenario);
  j["replicates"] = replicates;
  j["seed"] = seed;
  j["max_iterations"] = rto.max_iterations;
  j["n_initial"] = n_initial;
  j["initial_attempts"] = initial_attempts;
  j["alpha"] = alpha;
  j["multiplier_override"] = multiplier_override ? nlohmann::json(*multiplier_override) : nlohmann::json();
  j["acquisition"] = to_string(rto.acquisition);
  j["beta"] = rto.beta;
  j["n_starts"] = rto.n_starts;
  j["subproblem_budget"] = rto.subproblem_budget;
  j["n_model_samples"] = rto.n_model_samples;
  j["gp_restarts"] = rto.gp_restarts;
  j["gp_budget"] = rto.gp_budget;
  j["kernel"] = to_string(rto.kernel);
  j["neighborhood_inflation"] = rto.neighborhood_inflation;
  j["trust_region"] = {{"delta_max", rto.trust_region.delta_max},
                       {"eta1", rto.trust_region.eta1},
                       {"eta2", rto.trust_region.eta2},
                       {"gamma_red", rto.trust_region.gamma_red},
                       {"gamma_inc", rto.trust_region.gamma_inc}};
  j["noise"] = {{"enabled", noise.enabled},
                {"sigma_cx", noise.sigma_cx},
                {"sigma_cn", noise.sigma_cn},
                {"sigma_cp", noise.sigma_cp}};
  j["end_nitrate_constraint"] = end_nitrate_constraint;
  j["pbr_parameters"] = pbr_parameters.string();
  j["synthetic"] = {{"mismatch", synthetic_mismatch}, {"noise_std", synthetic_noise}};
  j["output_dir"] = output_dir.string();
  j["jobs"] = jobs;
  return j;
}

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(std::string("'") + key + "' must be a boolean");
    } else if constexpr (std::is_arithmetic_v<T>) {
      if (!it->is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
      if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError(std::string("'") + key + "' must be an integer");
      }
    }
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("'") + key + "': " + e.what());
  }
}

std::string read_string(const json& obj, const char* key, const std::string& fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_string()) throw ConfigError(std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

CampaignConfig parse_campaign_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  check_keys(doc,
             {"problem", "scenario", "replicates", "seed", "max_iterations", "n_initial",
              "initial_attempts", "alpha", "multiplier_override", "acquisition", "beta", "n_starts",
              "subproblem_budget", "n_model_samples", "gp_restarts", "gp_budget", "kernel",
              "neighborhood_inflation", "trust_region", "noise", "end_nitrate_constraint",
              "pbr_parameters", "synthetic", "output_dir", "jobs"},
             "config");

  CampaignConfig c;
  c.problem = parse_problem(read_string(doc, "problem", "pbr"));
  c.scenario = parse_scenario(read_string(doc, "scenario", "proposed"));
  read(doc, "replicates", c.replicates);
  read(doc, "seed", c.seed);
  read(doc, "max_iterations", c.rto.max_iterations);
  read(doc, "n_initial", c.n_initial);
  read(doc, "initial_attempts", c.initial_attempts);
  read(doc, "alpha", c.alpha);
  if (const auto it = doc.find("multiplier_override"); it != doc.end() && !it->is_null()) {
    if (!it->is_number()) throw ConfigError("'multiplier_override' must be a number or null");
    c.multiplier_override = it->get<double>();
  }
  c.rto.acquisition = parse_acquisition(read_string(doc, "acquisition", "ei"));
  read(doc, "beta", c.rto.beta);
  read(doc, "n_starts", c.rto.n_starts);
  read(doc, "subproblem_budget", c.rto.subproblem_budget);
  read(doc, "n_model_samples", c.rto.n_model_samples);
  read(doc, "gp_restarts", c.rto.gp_restarts);
  read(doc, "gp_budget", c.rto.gp_budget);
  c.rto.kernel = parse_kernel_family(read_string(doc, "kernel", "matern32"));
  read(doc, "neighborhood_inflation", c.rto.neighborhood_inflation);
  if (const auto it = doc.find("trust_region"); it != doc.end()) {
    check_keys(*it, {"delta_max", "eta1", "eta2", "gamma_red", "gamma_inc"}, "trust_region");
    read(*it, "delta_max", c.rto.trust_region.delta_max);
    read(*it, "eta1", c.rto.trust_region.eta1);
    read(*it, "eta2", c.rto.trust_region.eta2);
    read(*it, "gamma_red", c.rto.trust_region.gamma_red);
    read(*it, "gamma_inc", c.rto.trust_region.gamma_inc);
  }
  if (const auto it = doc.find("noise"); it != doc.end()) {
    check_keys(*it, {"enabled", "sigma_cx", "sigma_cn", "sigma_cp"}, "noise");
    read(*it, "enabled", c.noise.enabled);
    read(*it, "sigma_cx", c.noise.sigma_cx);
    read(*it, "sigma_cn", c.noise.sigma_cn);
    read(*it, "sigma_cp", c.noise.sigma_cp);
  }
  read(doc, "end_nitrate_constraint", c.end_nitrate_constraint);
  if (const auto it = doc.find("synthetic"); it != doc.end()) {
    check_keys(*it, {"mismatch", "noise_std"}, "synthetic");
    read(*it, "mismatch", c.synthetic_mismatch);
    read(*it, "noise_std", c.synthetic_noise);
  }
  std::filesystem::path params = read_string(doc, "pbr_parameters", c.pbr_parameters.string());
  c.pbr_parameters = (params.is_absolute() ? params : base_dir / params).lexically_normal();
  std::filesystem::path out = read_string(doc, "output_dir", c.output_dir.string());
  c.output_dir = (out.is_absolute() ? out : base_dir / out).lexically_normal();
  read(doc, "jobs", c.jobs);
  try {
    c.finalize();
  } catch (const OutOfRange& e) {
    throw ConfigError(e.what());
  }
  return c;
}

CampaignConfig load_campaign_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_campaign_config(buf.str(), path.parent_path().empty() ? "." : path.parent_path());
}

RtoProblem make_problem(const CampaignConfig& config) {
  switch (config.problem) {
    case ProblemKind::Pbr: {
      PbrOptions opts;
      opts.end_nitrate_constraint = config.end_nitrate_constraint;
      return make_pbr_problem(load_pbr_parameters(config.pbr_parameters), config.noise, opts);
    }
    case ProblemKind::Synthetic:
      return synthetic_benchmark(config.synthetic_mismatch, config.synthetic_noise).problem;
    case ProblemKind::Xsinx:
      return xsinx_problem();
  }
  throw ConfigError("unknown problem");
}

Rng replicate_rng(std::uint64_t master_seed, int replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed & 0xffffffffu),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(replicate), 0x6d66u};
  return Rng(seq);
}

InitialData feasible_initial_design(const RtoProblem& problem, int n_points, int max_attempts,
                                    Rng& rng) {
  struct Candidate {
    Eigen::VectorXd u;
    double violation;
  };
  std::vector<Eigen::VectorXd> accepted;
  std::vector<Candidate> rejected;
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(accepted.size()) < n_points;
       ++attempt) {
    Eigen::VectorXd u = problem.domain.sample(rng);
    Eigen::VectorXd screen;
    try {
      screen = problem.model(u);
    } catch (const EvaluationFailed&) {
      continue;
    }
    const double worst =
        problem.n_constraints > 0 ? screen.tail(problem.n_constraints).maxCoeff() : -1.0;
    if (worst <= 0.0) {
      accepted.push_back(std::move(u));
    } else {
      rejected.push_back({std::move(u), worst});
    }
  }
  if (static_cast<int>(accepted.size()) < n_points) {
    std::stable_sort(rejected.begin(), rejected.end(),
                     [](const Candidate& a, const Candidate& b) { return a.violation < b.violation; });
    for (std::size_t i = 0; i < rejected.size() && static_cast<int>(accepted.size()) < n_points; ++i) {
      accepted.push_back(rejected[i].u);
    }
  }
  if (accepted.empty()) throw EvaluationFailed("initial design: no model evaluation succeeded");

  InitialData data;
  data.inputs.resize(static_cast<Eigen::Index>(accepted.size()), problem.domain.dimension());
  data.outputs.resize(static_cast<Eigen::Index>(accepted.size()), 1 + problem.n_constraints);
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    data.inputs.row(row) = accepted[i].transpose();
    data.outputs.row(row) = problem.plant(accepted[i], rng).transpose();
  }
  return data;
}

namespace {

// Lowest measured cost among plant-feasible rows, else the least violating row.
Eigen::Index pick_start(const InitialData& data) {
  Eigen::Index best = -1;
  for (Eigen::Index i = 0; i < data.outputs.rows(); ++i) {
    const bool ok = data.outputs.cols() == 1 ||
                    (data.outputs.row(i).tail(data.outputs.cols() - 1).array() <= 0.0).all();
    if (ok && (best < 0 || data.outputs(i, 0) < data.outputs(best, 0))) best = i;
  }
  if (best >= 0) return best;
  double least = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < data.outputs.rows(); ++i) {
    const double v = data.outputs.row(i).tail(data.outputs.cols() - 1).maxCoeff();
    if (v < least) {
      least = v;
      best = i;
    }
  }
  return best;
}

ReplicateResult run_replicate(const CampaignConfig& config, const RtoProblem& problem, int replicate) {
  const auto t0 = std::chrono::steady_clock::now();
  ReplicateResult rep;
  rep.replicate = replicate;
  Rng rng = replicate_rng(config.seed, replicate);
  try {
    rep.initial = feasible_initial_design(problem, config.n_initial, config.initial_attempts, rng);
    const Eigen::Index start = pick_start(rep.initial);
    rep.u0 = rep.initial.inputs.row(start).transpose();
    rep.delta0 = enclosing_radius(rep.initial.inputs, rep.u0, problem.domain);
    if (!(rep.delta0 > 0.0)) rep.delta0 = 0.1 * config.rto.trust_region.delta_max;
    rep.delta0 = std::min(rep.delta0, config.rto.trust_region.delta_max);
    rep.rto = run_rto(problem, config.rto, rep.initial, rep.u0, rep.delta0, rng);
  } catch (const std::exception& e) {
    rep.error = e.what();
  }
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace

CampaignResult run_campaign(const CampaignConfig& config) {
  CampaignResult result;
  result.config = config;
  result.replicates.resize(static_cast<std::size_t>(config.replicates));
  const RtoProblem problem = make_problem(config);

  std::atomic<int> next{0};
  std::mutex log_mutex;
  const auto worker = [&]() {
    for (int r = next++; r < config.replicates; r = next++) {
      result.replicates[static_cast<std::size_t>(r)] = run_replicate(config, problem, r);
      const std::lock_guard<std::mutex> lock(log_mutex);
      const auto& rep = result.replicates[static_cast<std::size_t>(r)];
      std::cerr << "replicate " << r << (rep.error ? " failed: " + *rep.error : " done") << " ("
                << rep.wall_time_s << " s)\n";
    }
  };
  const int n_threads = std::min(config.jobs, config.replicates);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return result;
}

// ---------------------------------------------------------------------------

void write_results_csv(const CampaignResult& result, std::ostream& out) {
  out << kResultsHeader << '\n';
  for (const auto& rep : result.replicates) {
    const BoxDomain domain = make_problem(result.config).domain;
    double incumbent = std::numeric_limits<double>::quiet_NaN();
    if (rep.initial.inputs.rows() > 0 && rep.u0.size() > 0) {
      const Eigen::Index row = find_row(rep.initial.inputs, rep.u0);
      if (row >= 0) incumbent = rep.initial.outputs(row, 0);
    }
    for (const auto& rec : rep.rto.records) {
      if (rec.accepted && rec.plant_ok) incumbent = rec.measured(0);
      int n_violated = 0;
      std::string flags;
      for (const bool v : rec.violations) {
        n_violated += v ? 1 : 0;
        flags += v ? '1' : '0';
      }
      std::string point;
      for (Eigen::Index i = 0; i < rec.point.size(); ++i) {
        if (i > 0) point += ';';
        point += fmt(rec.point(i));
      }
      const bool measured = rec.plant_ok && rec.measured.size() > 0;
      out << rep.replicate << ',' << rec.iteration << ',' << int(rec.subproblem_feasible) << ','
          << int(rec.plant_ok) << ',' << int(rec.accepted) << ',' << to_string(rec.branch) << ','
          << (rec.rho ? fmt(*rec.rho) : std::string()) << ',' << fmt(rec.radius) << ','
          << (rec.subproblem_feasible ? fmt(rec.predicted_cost) : std::string()) << ','
          << (measured ? fmt(rec.measured(0)) : std::string()) << ',' << fmt(incumbent) << ','
          << fmt(rec.best_feasible_cost) << ',' << n_violated << ',' << flags << ','
          << (rec.step.size() > 0 ? fmt(normalized_step_norm(rec.step, domain)) : std::string())
          << ',' << point << '\n';
    }
  }
}

namespace {

json stats(const std::vector<double>& values) {
  std::vector<double> v;
  for (const double x : values) {
    if (std::isfinite(x)) v.push_back(x);
  }
  if (v.empty()) return {{"count", 0}, {"mean", nullptr}, {"std", nullptr}, {"min", nullptr}, {"max", nullptr}};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  return {{"count", v.size()},
          {"mean", mean},
          {"std", std::sqrt(ss / static_cast<double>(v.size()))},
          {"min", *std::min_element(v.begin(), v.end())},
          {"max", *std::max_element(v.begin(), v.end())}};
}

}  // namespace

nlohmann::json summarize(const CampaignResult& result) {
  const ScenarioFlags flags = result.config.rto.flags;
  int measured = 0;
  int violated = 0;
  int iterations = 0;
  int failed = 0;
  std::vector<double> final_incumbent, final_best, initial_best;
  double wall = 0.0;
  for (const auto& rep : result.replicates) {
    wall += rep.wall_time_s;
    if (rep.error) ++failed;
    double incumbent = std::numeric_limits<double>::quiet_NaN();
    if (rep.u0.size() > 0) {
      const Eigen::Index row = find_row(rep.initial.inputs, rep.u0);
      if (row >= 0) incumbent = rep.initial.outputs(row, 0);
    }
    for (const auto& rec : rep.rto.records) {
      ++iterations;
      if (rec.plant_ok) {
        ++measured;
        if (std::find(rec.violations.begin(), rec.violations.end(), true) != rec.violations.end()) {
          ++violated;
        }
        if (rec.accepted) incumbent = rec.measured(0);
      }
    }
    if (rep.error) continue;
    final_incumbent.push_back(incumbent);
    final_best.push_back(rep.rto.records.empty() ? rep.rto.initial_best_feasible_cost
                                                 : rep.rto.records.back().best_feasible_cost);
    initial_best.push_back(rep.rto.initial_best_feasible_cost);
  }

  json j;
  j["schema_version"] = 1;
  j["problem"] = to_string(result.config.problem);
  j["scenario"] = to_string(result.config.scenario);
  j["replicates"] = result.config.replicates;
  j["failed_replicates"] = failed;
  j["max_iterations"] = result.config.rto.max_iterations;
  j["iterations_run"] = iterations;
  j["seed"] = result.config.seed;
  j["flags"] = {{"use_trust_region", flags.use_trust_region},
                {"use_chance_constraints", flags.use_chance_constraints},
                {"use_prior_model", flags.use_prior_model}};
  j["risk_multiplier"] = result.config.rto.risk.multiplier();
  j["measured_iterations"] = measured;
  j["violation_count"] = violated;
  j["violation_fraction"] = measured > 0 ? static_cast<double>(violated) / measured : 0.0;
  j["final_incumbent_cost"] = stats(final_incumbent);
  j["final_best_feasible_cost"] = stats(final_best);
  j["initial_best_feasible_cost"] = stats(initial_best);
  j["wall_time_s"] = wall;
  j["config"] = result.config.to_json();
  return j;
}

std::vector<std::string> summary_required_keys() {
  return {"schema_version", "problem", "scenario", "replicates", "failed_replicates",
          "max_iterations", "iterations_run", "seed", "flags", "risk_multiplier",
          "measured_iterations", "violation_count", "violation_fraction",
          "final_incumbent_cost", "final_best_feasible_cost", "initial_best_feasible_cost",
          "wall_time_s", "config"};
}

int write_campaign(const CampaignResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "results.csv", std::ios::binary);
    write_results_csv(result, csv);
  }
  {
    std::ofstream js(dir / "summary.json", std::ios::binary);
    js << summarize(result).dump(2) << '\n';
  }
  const bool any_failed = std::any_of(result.replicates.begin(), result.replicates.end(),
                                      [](const ReplicateResult& r) { return r.error.has_value(); });
  return any_failed ? kExitRuntime : kExitOk;
}

}  // namespace mfrto
