/*
 Copyright 2026 The robust-dp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "robust_dp/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "robust_dp/acceptance.hpp"
#include "robust_dp/csv.hpp"
#include "robust_dp/ensemble.hpp"

namespace robust_dp {

namespace fs = std::filesystem;

// --- configuration -----------------------------------------------------------

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"portfolio", "kinematics", "timeseries",
                                              "random-suite", "custom"};
  return names;
}

Json default_params(std::string_view experiment) {
  if (experiment == "kinematics") {
    return Json::parse(R"({
      "plant": {"mass": 1.0, "damping": 5.0, "time_constant": 0.1},
      "cost": {"q": 1.0, "r": 1.0},
      "observation_noise": {"position": 0.01, "velocity": 0.02, "force": 0.1},
      "exploration": {"components": 12, "amplitude": 20.0, "freq_min": 0.1, "freq_max": 20.0},
      "sampling": {"dt": 0.001, "update_interval": 0.02},
      "vi": {"h0": 0.05, "alpha": 0.3, "eps_bar": 1e-6, "max_iters": 100000, "trace_stride": 10},
      "rls": {"lambda_init": 1.0, "map_trace_stride": 0},
      "validation": {"horizon": 20.0, "x0": [1.0, 0.0, 0.0], "sample_stride": 10},
      "reference": {
        "p_star": [[7.4044, 1.4311, 0.1000], [1.4311, 0.3801, 0.0248], [0.1000, 0.0248, 0.0431]],
        "tolerance": 5e-4,
        "max_relative_error": 0.05
      }
    })");
  }
  if (experiment == "timeseries") {
    return Json::parse(R"({
      "model": {"a1": -4.0, "a2": -1.0, "a3": -4.0,
                "sigma0": 1.0, "sigma1": 0.6, "sigma2": 0.4, "sigma3": 0.5},
      "cost": {"q": 0.1, "r": 0.01},
      "exploration": {"k0": [0.0, 1.0, 0.0], "sigma_u": 0.5},
      "sampling": {"dt": 0.001, "t0": 5.0, "update_interval": 1.0, "updates": 2000},
      "vi": {"h0": 0.2, "alpha": 0.5, "eps_bar": 1e-6, "trace_stride": 1},
      "evaluation": {"horizon": 1000.0, "sample_stride": 100},
      "ensemble": {"seeds": 10},
      "reference": {
        "p_star": [[0.2859, 0.1492, 0.0110], [0.1492, 0.3366, 0.0539], [0.0110, 0.0539, 0.0206]],
        "tolerance": 5e-4,
        "max_median_error": 0.10,
        "cost_tolerance": 0.15
      }
    })");
  }
  if (experiment == "portfolio") {
    return Json::parse(R"({
      "market": {"stocks": 20, "rate": 0.025, "b_max": 0.15, "volatility": 0.2},
      "game": {"q": 1e-3, "r_own": 2e-2, "r_cross": 1e-4, "coupled": true},
      "estimation": {"sigma": 0.2, "iterations": 1000},
      "vi": {"h0": 2.0, "alpha": 0.1, "eps_bar": 1e-9, "max_iters": 200000, "trace_stride": 10},
      "simulation": {"wealth0": 100.0, "gamma": 200.0, "horizon": 1.0, "steps_per_unit": 252},
      "checks": {"variance_ratio": 1.2, "closed_form_tolerance": 1e-6, "oracle_tolerance": 1e-5}
    })");
  }
  if (experiment == "random-suite") {
    return Json::parse(R"({
      "systems": 100,
      "criteria": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
    })");
  }
  if (experiment == "custom") {
    return Json::parse(R"({
      "system": {"A": [[0.0, 1.0], [-2.0, -3.0]], "B": [[0.0], [1.0]]},
      "cost": {"Q": [[1.0, 0.0], [0.0, 1.0]], "R": [[1.0]]},
      "vi": {"h0": 0.1, "alpha": 0.6, "eps_bar": 1e-6, "max_iters": 1000000, "trace_stride": 1},
      "checks": {"max_relative_error": 1e-4}
    })");
  }
  throw ConfigError("unknown experiment '" + std::string(experiment) + "'");
}

namespace {

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t dot = std::min(path.find('.', start), path.size());
    out.emplace_back(path.substr(start, dot - start));
    if (out.back().empty()) throw ConfigError("malformed key '" + std::string(path) + "'");
    start = dot + 1;
  }
  return out;
}

void assign_checked(Json& dst, const Json& src, const std::string& where) {
  if (dst.is_object()) {
    if (!src.is_object()) throw ConfigError("'" + where + "' must be an object");
    for (auto it = src.begin(); it != src.end(); ++it) {
      const std::string child = where.empty() ? it.key() : where + "." + it.key();
      if (!dst.contains(it.key())) throw ConfigError("unknown key '" + child + "'");
      assign_checked(dst[it.key()], it.value(), child);
    }
    return;
  }
  if (dst.is_number_integer()) {
    if (!src.is_number_integer()) throw ConfigError("'" + where + "' must be an integer");
    dst = src;
  } else if (dst.is_number()) {
    if (!src.is_number()) throw ConfigError("'" + where + "' must be a number");
    dst = src.get<double>();
  } else if (dst.is_boolean()) {
    if (!src.is_boolean()) throw ConfigError("'" + where + "' must be a boolean");
    dst = src;
  } else if (dst.is_string()) {
    if (!src.is_string()) throw ConfigError("'" + where + "' must be a string");
    dst = src;
  } else if (dst.is_array()) {
    if (!src.is_array()) throw ConfigError("'" + where + "' must be an array");
    dst = src;
  } else {
    throw ConfigError("'" + where + "' cannot be set");
  }
}

const Json& lookup(const Json& params, std::string_view path) {
  const Json* node = &params;
  for (const auto& part : split_path(path)) {
    if (!node->is_object() || !node->contains(part)) {
      throw ConfigError("missing parameter '" + std::string(path) + "'");
    }
    node = &(*node)[part];
  }
  return *node;
}

}  // namespace

void apply_override(Json& params, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json* node = &params;
  const auto parts = split_path(key);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) throw ConfigError("unknown key '" + key + "'");
    node = &(*node)[parts[i]];
  }
  if (!node->is_object() || !node->contains(parts.back())) {
    throw ConfigError("unknown key '" + key + "'");
  }
  assign_checked((*node)[parts.back()], value, key);
}

Json ExperimentConfig::to_json() const {
  Json out;
  out["experiment"] = experiment;
  out["seed"] = seed;
  out["output_dir"] = output_dir.generic_string();
  out["params"] = params;
  return out;
}

ExperimentConfig resolve_config(std::string_view experiment,
                                const std::optional<fs::path>& config_file,
                                std::optional<std::uint64_t> seed,
                                const std::optional<fs::path>& output_dir,
                                const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  cfg.experiment = std::string(experiment);
  cfg.params = default_params(experiment);
  cfg.output_dir = fs::path("runs") / cfg.experiment;
  if (config_file) {
    std::ifstream in(*config_file);
    if (!in) throw ConfigError("cannot open config file " + config_file->string());
    Json file = Json::parse(in, nullptr, false);
    if (file.is_discarded() || !file.is_object()) {
      throw ConfigError("config file " + config_file->string() + " is not a JSON object");
    }
    for (auto it = file.begin(); it != file.end(); ++it) {
      const std::string& key = it.key();
      if (key == "experiment") {
        if (!it->is_string() || it->get<std::string>() != cfg.experiment) {
          throw ConfigError("config file is for experiment " + it->dump());
        }
      } else if (key == "seed") {
        if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
          throw ConfigError("'seed' must be a non-negative integer");
        }
        cfg.seed = it->get<std::uint64_t>();
      } else if (key == "output_dir") {
        if (!it->is_string()) throw ConfigError("'output_dir' must be a string");
        cfg.output_dir = it->get<std::string>();
      } else if (key == "params") {
        assign_checked(cfg.params, *it, "");
      } else {
        throw ConfigError("unknown key '" + key + "'");
      }
    }
  }
  if (seed) cfg.seed = *seed;
  if (output_dir) cfg.output_dir = *output_dir;
  for (const auto& o : overrides) apply_override(cfg.params, o);
  return cfg;
}

double param_double(const Json& params, std::string_view path) {
  const Json& v = lookup(params, path);
  if (!v.is_number()) throw ConfigError("'" + std::string(path) + "' must be a number");
  return v.get<double>();
}

std::int64_t param_int(const Json& params, std::string_view path) {
  const Json& v = lookup(params, path);
  if (!v.is_number_integer()) throw ConfigError("'" + std::string(path) + "' must be an integer");
  return v.get<std::int64_t>();
}

bool param_bool(const Json& params, std::string_view path) {
  const Json& v = lookup(params, path);
  if (!v.is_boolean()) throw ConfigError("'" + std::string(path) + "' must be a boolean");
  return v.get<bool>();
}

Matrix param_matrix(const Json& params, std::string_view path) {
  const Json& v = lookup(params, path);
  const std::string name(path);
  if (!v.is_array() || v.empty() || !v[0].is_array() || v[0].empty()) {
    throw ConfigError("'" + name + "' must be a non-empty array of rows");
  }
  const auto rows = static_cast<Index>(v.size());
  const auto cols = static_cast<Index>(v[0].size());
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const Json& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ConfigError("'" + name + "' has ragged rows");
    }
    for (Index j = 0; j < cols; ++j) {
      const Json& e = row[static_cast<std::size_t>(j)];
      if (!e.is_number()) throw ConfigError("'" + name + "' must contain numbers");
      out(i, j) = e.get<double>();
    }
  }
  return out;
}

Vector param_vector(const Json& params, std::string_view path) {
  const Json& v = lookup(params, path);
  const std::string name(path);
  if (!v.is_array() || v.empty()) throw ConfigError("'" + name + "' must be a non-empty array");
  Vector out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError("'" + name + "' must contain numbers");
    out(static_cast<Index>(i)) = v[i].get<double>();
  }
  return out;
}

bool RunArtifact::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

// --- shared helpers ----------------------------------------------------------

namespace {

std::size_t param_count(const Json& params, std::string_view path) {
  const std::int64_t v = param_int(params, path);
  if (v < 0) throw ConfigError("'" + std::string(path) + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

double positive(const Json& params, std::string_view path) {
  const double v = param_double(params, path);
  if (!(v > 0.0)) throw ConfigError("'" + std::string(path) + "' must be positive");
  return v;
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json checks_json(const std::vector<Check>& checks) {
  Json out = Json::array();
  for (const auto& c : checks) {
    out.push_back(Json{{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double relative_error(const SymMatrix& a, const SymMatrix& ref) { return (a - ref).norm() / ref.norm(); }

ViConfig vi_config_from(const Json& params, Index n, std::size_t max_iters) {
  ViConfig cfg{.P0 = SymMatrix::zero(n)};
  cfg.step = power_step_schedule(positive(params, "vi.h0"), param_double(params, "vi.alpha"));
  cfg.eps_bar = param_double(params, "vi.eps_bar");
  cfg.max_iters = max_iters;
  cfg.trace_stride = param_count(params, "vi.trace_stride");
  return cfg;
}

Check reference_check(const std::string& name, const SymMatrix& p, const Json& params) {
  const Matrix ref = param_matrix(params, "reference.p_star");
  const double tol = param_double(params, "reference.tolerance");
  if (ref.rows() != p.dim() || ref.cols() != p.dim()) {
    return Check{name, false, "reference matrix has the wrong size"};
  }
  const double gap = (p.dense() - ref).cwiseAbs().maxCoeff();
  return Check{name, gap <= tol, "max elementwise gap " + fmt(gap) + " (tolerance " + fmt(tol) + ")"};
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// RK4 step of dx/dt = A x + B u(t) with u given at t, t + h/2, t + h.
Vector rk4_step(const LtiSystem& sys, const Vector& x, double h, const Vector& u0, const Vector& um,
                const Vector& u1) {
  const Matrix& a = sys.A();
  const Matrix& b = sys.B();
  const Vector k1 = a * x + b * u0;
  const Vector k2 = a * (x + (0.5 * h) * k1) + b * um;
  const Vector k3 = a * (x + (0.5 * h) * k2) + b * um;
  const Vector k4 = a * (x + h * k3) + b * u1;
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

// --- kinematics --------------------------------------------------------------

namespace {

// Exploration input: a sum of sinusoids with seeded frequencies and phases.
struct SineExploration {
  std::vector<double> freq;
  std::vector<double> phase;
  double amplitude;

  double operator()(double t) const {
    double s = 0.0;
    for (std::size_t i = 0; i < freq.size(); ++i) s += std::sin(freq[i] * t + phase[i]);
    return amplitude * s;
  }
};

// Plant simulation with noisy state observations, cut into one regressor
// pair per policy update.
class KinematicsStream {
 public:
  KinematicsStream(const LtiSystem& sys, SineExploration explore, Vector noise, double dt,
                   std::size_t sub, std::uint64_t seed, std::vector<TrajectorySample>* record)
      : sys_(sys),
        explore_(std::move(explore)),
        noise_(std::move(noise)),
        dt_(dt),
        sub_(sub),
        rng_(seed),
        x_(Vector::Zero(sys.n())),
        acc_(AdpDims{sys.n(), sys.m()}),
        record_(record) {
    TrajectorySample s = observe();
    if (record_) record_->push_back(s);
    acc_.start(s);
  }

  RegressorPair next() {
    TrajectorySample last{};
    for (std::size_t s = 0; s < sub_; ++s) {
      const double t = static_cast<double>(steps_) * dt_;
      x_ = rk4_step(sys_, x_, dt_, Vector::Constant(1, explore_(t)),
                    Vector::Constant(1, explore_(t + 0.5 * dt_)), Vector::Constant(1, explore_(t + dt_)));
      ++steps_;
      if (!x_.allFinite()) throw BlowUpError("kinematics: non-finite state", t);
      last = observe();
      acc_.add(last);
    }
    if (record_) record_->push_back(last);
    return acc_.cut();
  }

 private:
  TrajectorySample observe() {
    const double t = static_cast<double>(steps_) * dt_;
    Vector xo = x_;
    for (Index i = 0; i < xo.size(); ++i) xo(i) += noise_(i) * normal_(rng_);
    return TrajectorySample{t, std::move(xo), Vector::Constant(1, explore_(t))};
  }

  const LtiSystem& sys_;
  SineExploration explore_;
  Vector noise_;
  double dt_;
  std::size_t sub_;
  Rng rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  Vector x_;
  std::size_t steps_ = 0;
  RegressorAccumulator acc_;
  std::vector<TrajectorySample>* record_;
};

}  // namespace

KinematicsResult compute_kinematics(const Json& params, std::uint64_t seed) {
  const LtiSystem sys = kinematics_plant(KinematicsParams{positive(params, "plant.mass"),
                                                          param_double(params, "plant.damping"),
                                                          positive(params, "plant.time_constant")});
  const CostWeights cost(SymMatrix::identity(3) * positive(params, "cost.q"),
                         SymMatrix::identity(1) * positive(params, "cost.r"));
  AreSolution oracle = oracle_are(sys, cost);

  Rng rng(seed);
  SineExploration explore{{}, {}, param_double(params, "exploration.amplitude")};
  const std::size_t comps = param_count(params, "exploration.components");
  std::uniform_real_distribution<double> freq(param_double(params, "exploration.freq_min"),
                                              param_double(params, "exploration.freq_max"));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < comps; ++i) {
    explore.freq.push_back(freq(rng));
    explore.phase.push_back(phase(rng));
  }
  Vector noise(3);
  noise << param_double(params, "observation_noise.position"),
      param_double(params, "observation_noise.velocity"),
      param_double(params, "observation_noise.force");
  const double dt = positive(params, "sampling.dt");
  const auto sub = static_cast<std::size_t>(std::llround(positive(params, "sampling.update_interval") / dt));
  if (sub < 1) throw ConfigError("sampling.update_interval must be at least one dt");

  std::vector<TrajectorySample> exploration;
  KinematicsStream stream(sys, explore, noise, dt, sub, rng(), &exploration);
  const AdpDims dims{3, 1};
  ViConfig vi = vi_config_from(params, 3, param_count(params, "vi.max_iters"));
  AdpOptions opts;
  opts.lambda_init = positive(params, "rls.lambda_init");
  opts.map_trace_stride = param_count(params, "rls.map_trace_stride");
  AdpRun adp = adp_vi_run([&](std::size_t) { return std::optional<RegressorPair>(stream.next()); },
                          dims, cost, vi, opts);

  // Learned gain from the data-driven B^T P term at the final P.
  const Vector theta = compact_from_block(adp.rls.M * vecs(adp.run.final), dims);
  const Matrix gain = extract_model_terms(theta, dims, cost).k_term;

  // Closed loop on the true plant with noisy state feedback.
  Rng vrng(rng());
  std::normal_distribution<double> normal(0.0, 1.0);
  const double horizon = positive(params, "validation.horizon");
  const Vector x0 = param_vector(params, "validation.x0");
  if (x0.size() != 3) throw ConfigError("validation.x0 must have three entries");
  const std::size_t stride = std::max<std::size_t>(1, param_count(params, "validation.sample_stride"));
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  std::vector<TrajectorySample> closed;
  std::vector<double> energy;
  Vector x = x0;
  for (std::size_t s = 0; s <= steps; ++s) {
    Vector xo = x;
    for (Index i = 0; i < 3; ++i) xo(i) += noise(i) * normal(vrng);
    const Vector u = -gain * xo;
    energy.push_back(x.squaredNorm());
    if (s % stride == 0) closed.push_back(TrajectorySample{static_cast<double>(s) * dt, x, u});
    if (s < steps) x = rk4_step(sys, x, dt, u, u, u);
  }
  const std::size_t quarter = std::max<std::size_t>(1, energy.size() / 4);
  double early = 0.0;
  double late = 0.0;
  for (std::size_t i = 0; i < quarter; ++i) {
    early += energy[i];
    late += energy[energy.size() - 1 - i];
  }
  early /= static_cast<double>(quarter);
  late /= static_cast<double>(quarter);

  const double err = relative_error(adp.run.final, oracle.P_star);
  return KinematicsResult{std::move(oracle), std::move(adp), err, gain, std::move(exploration),
                          std::move(closed), early, late};
}

RunArtifact run_example_kinematics(const ExperimentConfig& cfg) {
  KinematicsResult r = compute_kinematics(cfg.params, cfg.seed);
  RunArtifact art{cfg.output_dir, Json::object(), {}};
  ensure_dir(art.dir);
  write_trace_csv(art.dir / "trace.csv", r.adp.run);
  write_trajectory_csv(art.dir / "exploration.csv", r.exploration);
  write_trajectory_csv(art.dir / "closed_loop.csv", r.closed_loop);
  if (!r.adp.M_trace.empty()) {
    write_matrix_trace_csv(art.dir / "m_trace.csv", r.adp.M_trace,
                           param_count(cfg.params, "rls.map_trace_stride"));
  }

  art.checks.push_back(reference_check("oracle_matches_reference", r.oracle.P_star, cfg.params));
  const double max_err = param_double(cfg.params, "reference.max_relative_error");
  art.checks.push_back(Check{"adp_relative_error", r.relative_error <= max_err,
                             fmt(r.relative_error) + " (limit " + fmt(max_err) + ")"});
  art.checks.push_back(Check{"closed_loop_energy_decreases", r.late_energy < r.early_energy,
                             "first quarter " + fmt(r.early_energy) + ", last quarter " +
                                 fmt(r.late_energy)});

  art.summary["oracle_P"] = matrix_json(r.oracle.P_star.dense());
  art.summary["learned_P"] = matrix_json(r.adp.run.final.dense());
  art.summary["learned_gain"] = matrix_json(r.learned_gain);
  art.summary["relative_error"] = r.relative_error;
  art.summary["iterations"] = r.adp.run.iterations;
  art.summary["restarts"] = r.adp.run.restarts;
  art.summary["terminated"] = std::string(to_string(r.adp.run.terminated));
  return art;
}

// --- time series -------------------------------------------------------------

namespace {

// Paired closed-loop and open-loop runs on the same noise realization.
void evaluate_variance(const SdeSystem& sde, const Matrix& gain, double horizon, double dt,
                       std::size_t stride, std::uint64_t seed, TimeSeriesSeedResult& out) {
  const ExplorationPolicy controlled{gain, {}};
  const ExplorationPolicy open{Matrix::Zero(gain.rows(), gain.cols()), {}};
  auto run = [&](const ExplorationPolicy& pol, std::vector<TrajectorySample>& samples) {
    SdeStepper st(sde, pol, dt, seed, Vector::Zero(sde.plant.n()));
    const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t s = 0; s <= steps; ++s) {
      const double y = st.x()(0);
      sum += y;
      sum_sq += y * y;
      if (s % stride == 0) samples.push_back(TrajectorySample{st.t(), st.x(), st.u()});
      if (s < steps) st.step();
    }
    const double count = static_cast<double>(steps + 1);
    const double mean = sum / count;
    return sum_sq / count - mean * mean;
  };
  out.controlled_variance = run(controlled, out.controlled);
  out.uncontrolled_variance = run(open, out.uncontrolled);
}

}  // namespace

TimeSeriesResult compute_timeseries(const Json& params, std::uint64_t seed) {
  const SdeSystem sde = timeseries_sde(TimeSeriesParams{
      param_double(params, "model.a1"), param_double(params, "model.a2"),
      param_double(params, "model.a3"), param_double(params, "model.sigma0"),
      param_double(params, "model.sigma1"), param_double(params, "model.sigma2"),
      param_double(params, "model.sigma3")});
  const CostWeights cost(SymMatrix::identity(3) * positive(params, "cost.q"),
                         SymMatrix::identity(1) * positive(params, "cost.r"));
  AreSolution oracle = oracle_are(sde.plant, cost);
  const double optimal_cost = ergodic_cost(sde, oracle.P_star);

  const Vector k0 = param_vector(params, "exploration.k0");
  if (k0.size() != 3) throw ConfigError("exploration.k0 must have three entries");
  const ExplorationPolicy pol{k0.transpose(),
                              {Vector::Constant(1, param_double(params, "exploration.sigma_u"))}};
  ErgodicConfig ecfg{.dt = positive(params, "sampling.dt"),
                     .t_schedule = uniform_schedule(positive(params, "sampling.t0"),
                                                    positive(params, "sampling.update_interval"),
                                                    param_count(params, "sampling.updates")),
                     .vi = vi_config_from(params, 3, param_count(params, "sampling.updates"))};
  const double horizon = positive(params, "evaluation.horizon");
  const std::size_t stride = std::max<std::size_t>(1, param_count(params, "evaluation.sample_stride"));
  const std::size_t count = std::max<std::size_t>(1, param_count(params, "ensemble.seeds"));

  auto seeds = parallel_map(count, [&](std::size_t i) {
    const std::uint64_t s = seed + i;
    ViRun run = ergodic_adp_run(sde, pol, cost, ecfg, s);
    const double err = relative_error(run.final, oracle.P_star);
    const Matrix gain = closed_loop_gain(run.final, sde.plant, cost);
    TimeSeriesSeedResult out{s, std::move(run), err, 0.0, 0.0, 0.0, {}, {}};
    out.learned_cost = ergodic_cost(sde, out.run.final);
    // A separate noise stream for the evaluation runs.
    evaluate_variance(sde, gain, horizon, ecfg.dt, stride, s ^ 0x9e3779b97f4a7c15ULL, out);
    return out;
  });
  std::vector<double> errs;
  for (const auto& s : seeds) errs.push_back(s.relative_error);
  std::sort(errs.begin(), errs.end());
  const std::size_t mid = errs.size() / 2;
  const double median = errs.size() % 2 ? errs[mid] : 0.5 * (errs[mid - 1] + errs[mid]);
  return TimeSeriesResult{std::move(oracle), optimal_cost, std::move(seeds), median};
}

RunArtifact run_example_timeseries(const ExperimentConfig& cfg) {
  TimeSeriesResult r = compute_timeseries(cfg.params, cfg.seed);
  RunArtifact art{cfg.output_dir, Json::object(), {}};
  ensure_dir(art.dir);
  const bool many = r.seeds.size() > 1;
  const double cost_tol = param_double(cfg.params, "reference.cost_tolerance");
  bool cost_ok = true;
  bool variance_ok = true;
  Json per_seed = Json::array();
  CsvWriter table(art.dir / "seeds.csv", {"seed", "relative_error", "learned_cost", "optimal_cost",
                                          "controlled_variance", "uncontrolled_variance",
                                          "iterations"});
  for (const auto& s : r.seeds) {
    const fs::path dir = many ? art.dir / ("seed_" + std::to_string(s.seed)) : art.dir;
    ensure_dir(dir);
    write_trace_csv(dir / "trace.csv", s.run);
    write_trajectory_csv(dir / "controlled.csv", s.controlled);
    write_trajectory_csv(dir / "uncontrolled.csv", s.uncontrolled);
    const double cost_gap = std::abs(s.learned_cost - r.optimal_cost) / r.optimal_cost;
    cost_ok = cost_ok && cost_gap <= cost_tol;
    variance_ok = variance_ok && s.controlled_variance < s.uncontrolled_variance;
    table.row(std::vector<double>{static_cast<double>(s.seed), s.relative_error, s.learned_cost,
                                  r.optimal_cost, s.controlled_variance, s.uncontrolled_variance,
                                  static_cast<double>(s.run.iterations)});
    per_seed.push_back(Json{{"seed", s.seed},
                            {"learned_P", matrix_json(s.run.final.dense())},
                            {"relative_error", s.relative_error},
                            {"terminated", std::string(to_string(s.run.terminated))}});
  }
  art.checks.push_back(reference_check("oracle_matches_reference", r.oracle.P_star, cfg.params));
  const double max_median = param_double(cfg.params, "reference.max_median_error");
  art.checks.push_back(Check{"median_relative_error", r.median_error <= max_median,
                             fmt(r.median_error) + " over " + std::to_string(r.seeds.size()) +
                                 " seeds (limit " + fmt(max_median) + ")"});
  art.checks.push_back(Check{"ergodic_cost", cost_ok, "every seed within " + fmt(cost_tol) +
                                                          " of " + fmt(r.optimal_cost)});
  art.checks.push_back(Check{"variance_reduced", variance_ok,
                             "controlled output variance below uncontrolled on every seed"});
  art.summary["oracle_P"] = matrix_json(r.oracle.P_star.dense());
  art.summary["optimal_cost"] = r.optimal_cost;
  art.summary["median_relative_error"] = r.median_error;
  art.summary["seeds"] = per_seed;
  return art;
}

// --- portfolio ---------------------------------------------------------------

PortfolioResult compute_portfolio(const Json& params, std::uint64_t seed) {
  const std::size_t stocks = param_count(params, "market.stocks");
  const double rate = param_double(params, "market.rate");
  Market market = random_market(seed, stocks, rate, param_double(params, "market.b_max"),
                                param_double(params, "market.volatility"));
  const std::vector<double> excess = market.excess();
  const GameWeights weights{positive(params, "game.q"), positive(params, "game.r_own"),
                            positive(params, "game.r_cross"), param_bool(params, "game.coupled")};
  const std::size_t max_iters = param_count(params, "vi.max_iters");

  // Rates estimated node by node from noisy samples with a running mean.
  const double est_sigma = param_double(params, "estimation.sigma");
  const std::size_t est_iters = param_count(params, "estimation.iterations");
  std::vector<double> estimated = excess;
  if (est_iters > 0) {
    auto runs = parallel_map(stocks, [&](std::size_t i) {
      const LtiSystem plant(Matrix::Constant(1, 1, rate), Matrix::Constant(1, 1, excess[i]));
      const CostWeights cost(SymMatrix::identity(1) * weights.q, SymMatrix::identity(1) * weights.r_own);
      ViConfig cfg = vi_config_from(params, 1, est_iters);
      cfg.eps_bar = 0.0;
      cfg.trace_stride = 0;
      const ModelNoise noise{{}, {Matrix::Ones(1, 1)}, est_sigma};
      return noisy_model_vi(plant, cost, noise, cfg, ModelNoiseMode::time_averaged, seed + 1 + i)
          .B_used(0, 0);
    });
    estimated = runs;
  }

  const Network game = portfolio_game(rate, estimated, weights);
  std::vector<ViConfig> configs;
  for (std::size_t i = 0; i < stocks; ++i) configs.push_back(vi_config_from(params, 1, max_iters));
  NetworkRun network = network_vi_run(game, configs);

  std::vector<double> gains;
  std::vector<double> closed_form;
  for (std::size_t i = 0; i < stocks; ++i) {
    gains.push_back(estimated[i] * network.nodes[i].final(0, 0) / weights.r_own);
    closed_form.push_back(scalar_are_root(rate, estimated[i], weights.q, weights.r_own));
  }
  std::optional<CoupledSolution> oracle;
  std::string oracle_error;
  try {
    CoupledOracleOptions oo;
    for (std::size_t i = 0; i < stocks; ++i) {
      oo.k0.push_back(bass_stabilizing_gain(game.nodes[i].plant));
    }
    oracle = solve_coupled_oracle(game, oo);
  } catch (const Error& e) {
    oracle_error = e.what();
  }

  // Paired wealth simulation: learned feedback allocation vs equal weights.
  const double x0 = param_double(params, "simulation.wealth0");
  const double gamma = param_double(params, "simulation.gamma");
  const double horizon = positive(params, "simulation.horizon");
  const std::size_t per_unit = std::max<std::size_t>(1, param_count(params, "simulation.steps_per_unit"));
  const double dt = 1.0 / static_cast<double>(per_unit);
  const auto steps = static_cast<std::size_t>(std::llround(horizon * static_cast<double>(per_unit)));
  Rng rng(seed ^ 0x5851f42d4c957f2dULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  PortfolioResult out{std::move(market), estimated, std::move(network), gains, closed_form,
                      std::move(oracle), oracle_error, {}, {}, {}, {}, 0, 0, 0, 0};
  const Market& mk = out.market;
  std::vector<double> prices(stocks + 1, 1.0);
  double xl = x0;
  double xu = x0;
  std::vector<double> ret_l;
  std::vector<double> ret_u;
  std::vector<double> dw(stocks);
  const double sq = std::sqrt(dt);
  for (std::size_t s = 0;; ++s) {
    out.t.push_back(static_cast<double>(s) * dt);
    out.prices.push_back(prices);
    out.wealth_learned.push_back(xl);
    out.wealth_uniform.push_back(xu);
    if (s == steps) break;
    for (auto& w : dw) w = sq * normal(rng);
    double drift_l = rate * xl;
    double drift_u = rate * xu;
    double noise_l = 0.0;
    double noise_u = 0.0;
    const double equal = xu / static_cast<double>(stocks + 1);
    for (std::size_t i = 0; i < stocks; ++i) {
      const double ul = gains[i] * (gamma - xl);
      drift_l += excess[i] * ul;
      drift_u += excess[i] * equal;
      noise_l += mk.volatility[i] * ul * dw[i];
      noise_u += mk.volatility[i] * equal * dw[i];
      prices[i + 1] *= 1.0 + mk.returns[i] * dt + mk.volatility[i] * dw[i];
    }
    prices[0] *= 1.0 + rate * dt;
    const double nl = xl + drift_l * dt + noise_l;
    const double nu = xu + drift_u * dt + noise_u;
    ret_l.push_back((nl - xl) / xl);
    ret_u.push_back((nu - xu) / xu);
    xl = nl;
    xu = nu;
  }
  auto moments = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return std::pair{mean, var / static_cast<double>(v.size() > 1 ? v.size() - 1 : 1)};
  };
  if (!ret_l.empty()) {
    std::tie(out.mean_learned, out.var_learned) = moments(ret_l);
    std::tie(out.mean_uniform, out.var_uniform) = moments(ret_u);
  }
  return out;
}

RunArtifact run_example_portfolio(const ExperimentConfig& cfg) {
  PortfolioResult r = compute_portfolio(cfg.params, cfg.seed);
  RunArtifact art{cfg.output_dir, Json::object(), {}};
  ensure_dir(art.dir);
  const std::size_t stocks = r.gains.size();
  {
    std::vector<std::string> header{"t", "bond"};
    for (std::size_t i = 0; i < stocks; ++i) header.push_back("stock" + std::to_string(i + 1));
    CsvWriter prices(art.dir / "prices.csv", header);
    CsvWriter wealth(art.dir / "wealth.csv", {"t", "learned", "uniform"});
    for (std::size_t s = 0; s < r.t.size(); ++s) {
      std::vector<double> row{r.t[s]};
      row.insert(row.end(), r.prices[s].begin(), r.prices[s].end());
      prices.row(row);
      wealth.row(std::vector<double>{r.t[s], r.wealth_learned[s], r.wealth_uniform[s]});
    }
  }
  const fs::path nodes = art.dir / "nodes";
  ensure_dir(nodes);
  CsvWriter summary(art.dir / "network_summary.csv",
                    {"node", "status", "iterations", "residual", "P", "gain", "true_excess",
                     "estimated_excess"});
  std::vector<SymMatrix> finals;
  for (const auto& n : r.network.nodes) finals.push_back(n.final);
  const Network game = portfolio_game(r.market.rate, r.estimated_excess,
                                      GameWeights{param_double(cfg.params, "game.q"),
                                                  param_double(cfg.params, "game.r_own"),
                                                  param_double(cfg.params, "game.r_cross"),
                                                  param_bool(cfg.params, "game.coupled")});
  const std::vector<double> residuals = coupled_residuals(game, finals);
  const std::vector<double> excess = r.market.excess();
  for (std::size_t i = 0; i < stocks; ++i) {
    const ViRun& run = r.network.nodes[i];
    write_trace_csv(nodes / ("node_" + std::to_string(i + 1) + "_trace.csv"), run);
    summary.row(std::vector<std::string>{
        std::to_string(i + 1), std::string(to_string(run.terminated)), std::to_string(run.iterations),
        format_double(residuals[i]), format_double(run.final(0, 0)), format_double(r.gains[i]),
        format_double(excess[i]), format_double(r.estimated_excess[i])});
  }

  art.checks.push_back(Check{"network_converged", r.network.all_converged(),
                             std::to_string(r.network.iterations) + " iterations" +
                                 (r.network.step_halved ? " (step halved)" : "")});
  if (!param_bool(cfg.params, "game.coupled")) {
    const double tol = param_double(cfg.params, "checks.closed_form_tolerance");
    double gap = 0.0;
    for (std::size_t i = 0; i < stocks; ++i) {
      gap = std::max(gap, std::abs(r.network.nodes[i].final(0, 0) - r.closed_form[i]));
    }
    art.checks.push_back(Check{"closed_form", gap <= tol, "max gap " + fmt(gap)});
  } else {
    const double tol = param_double(cfg.params, "checks.oracle_tolerance");
    if (r.oracle) {
      double gap = 0.0;
      for (std::size_t i = 0; i < stocks; ++i) {
        gap = std::max(gap, (r.network.nodes[i].final - r.oracle->P_star[i]).norm());
      }
      art.checks.push_back(Check{"coupled_oracle", gap <= tol, "max gap " + fmt(gap)});
    } else {
      art.checks.push_back(Check{"coupled_oracle", false, r.oracle_error});
    }
  }
  const double ratio = param_double(cfg.params, "checks.variance_ratio");
  art.checks.push_back(Check{"higher_mean_return", r.mean_learned >= r.mean_uniform,
                             "learned " + fmt(r.mean_learned) + ", uniform " + fmt(r.mean_uniform)});
  art.checks.push_back(Check{"comparable_variance", r.var_learned <= ratio * r.var_uniform,
                             "learned " + fmt(r.var_learned) + ", uniform " + fmt(r.var_uniform)});

  Json nodes_json = Json::array();
  for (std::size_t i = 0; i < stocks; ++i) {
    nodes_json.push_back(Json{{"P", r.network.nodes[i].final(0, 0)},
                              {"gain", r.gains[i]},
                              {"closed_form_decoupled", r.closed_form[i]},
                              {"status", std::string(to_string(r.network.nodes[i].terminated))}});
  }
  art.summary["nodes"] = nodes_json;
  art.summary["mean_return"] = Json{{"learned", r.mean_learned}, {"uniform", r.mean_uniform}};
  art.summary["return_variance"] = Json{{"learned", r.var_learned}, {"uniform", r.var_uniform}};
  art.summary["final_wealth"] = Json{{"learned", r.wealth_learned.back()},
                                     {"uniform", r.wealth_uniform.back()}};
  return art;
}

// --- custom ------------------------------------------------------------------

RunArtifact run_custom(const ExperimentConfig& cfg) {
  const LtiSystem sys(param_matrix(cfg.params, "system.A"), param_matrix(cfg.params, "system.B"));
  const CostWeights cost(SymMatrix(param_matrix(cfg.params, "cost.Q")),
                         SymMatrix(param_matrix(cfg.params, "cost.R")));
  cost.check_against(sys);
  const AreSolution oracle = oracle_are(sys, cost);
  const ViConfig vi = vi_config_from(cfg.params, sys.n(), param_count(cfg.params, "vi.max_iters"));
  const ViRun run = vi_run(sys, cost, vi);
  RunArtifact art{cfg.output_dir, Json::object(), {}};
  ensure_dir(art.dir);
  write_trace_csv(art.dir / "trace.csv", run);
  const double err = relative_error(run.final, oracle.P_star);
  const double limit = param_double(cfg.params, "checks.max_relative_error");
  art.checks.push_back(Check{"converged", run.terminated == Termination::converged,
                             std::string(to_string(run.terminated))});
  art.checks.push_back(Check{"relative_error", err <= limit, fmt(err) + " (limit " + fmt(limit) + ")"});
  art.summary["oracle_P"] = matrix_json(oracle.P_star.dense());
  art.summary["vi_P"] = matrix_json(run.final.dense());
  art.summary["oracle_residual"] = oracle.residual_norm;
  art.summary["relative_error"] = err;
  art.summary["iterations"] = run.iterations;
  art.summary["restarts"] = run.restarts;
  return art;
}

// --- suite -------------------------------------------------------------------

RunArtifact run_random_suite(const ExperimentConfig& cfg) {
  AcceptanceOptions opts;
  opts.seed = cfg.seed;
  opts.systems = param_count(cfg.params, "systems");
  for (const auto& c : lookup(cfg.params, "criteria")) {
    if (!c.is_number_integer() || c.get<int>() < 1 || c.get<int>() > kCriterionCount) {
      throw ConfigError("criteria must list integers 1 to " + std::to_string(kCriterionCount));
    }
    opts.only.push_back(c.get<int>());
  }
  RunArtifact art{cfg.output_dir, Json::object(), {}};
  ensure_dir(art.dir);

  const std::vector<SystemRow> rows = random_system_rows(cfg.seed, opts.systems, true);
  CsvWriter systems(art.dir / "systems.csv", {"seed", "n", "m", "p_norm", "kleinman_residual",
                                              "closed_loop_hurwitz", "vi_error", "restarts",
                                              "iterations", "terminated"});
  for (const auto& r : rows) {
    systems.row(std::vector<std::string>{
        std::to_string(r.seed), std::to_string(r.n), std::to_string(r.m), format_double(r.p_norm),
        format_double(r.kleinman_residual), r.closed_loop_hurwitz ? "1" : "0",
        format_double(r.vi_error), std::to_string(r.restarts), std::to_string(r.iterations),
        r.terminated});
  }

  CsvWriter table(art.dir / "suite.csv", {"criterion", "name", "passed"});
  Json timings = Json::array();
  for (const auto& r : run_acceptance(opts)) {
    table.row(std::vector<std::string>{std::to_string(r.id), r.name, r.passed ? "1" : "0"});
    art.checks.push_back(Check{"criterion_" + std::to_string(r.id) + "_" + r.name, r.passed, r.detail});
    timings.push_back(Json{{"criterion", r.id}, {"seconds", r.seconds}, {"budget", r.budget_seconds}});
  }
  art.summary["timings"] = timings;
  return art;
}

RunArtifact run_experiment(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  RunArtifact art = [&] {
    if (cfg.experiment == "kinematics") return run_example_kinematics(cfg);
    if (cfg.experiment == "timeseries") return run_example_timeseries(cfg);
    if (cfg.experiment == "portfolio") return run_example_portfolio(cfg);
    if (cfg.experiment == "custom") return run_custom(cfg);
    if (cfg.experiment == "random-suite") return run_random_suite(cfg);
    throw ConfigError("unknown experiment '" + cfg.experiment + "'");
  }();
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_artifact_metadata(cfg, art, wall);
  return art;
}

void write_artifact_metadata(const ExperimentConfig& cfg, RunArtifact& artifact,
                             double wall_seconds) {
  ensure_dir(artifact.dir);
  write_json(artifact.dir / "config.json", cfg.to_json());
  Json summary;
  summary["experiment"] = cfg.experiment;
  summary["seed"] = cfg.seed;
  summary["passed"] = artifact.passed();
  summary["checks"] = checks_json(artifact.checks);
  summary["results"] = artifact.summary;
  summary["config"] = cfg.to_json();
  summary["wall_seconds"] = wall_seconds;
  write_json(artifact.dir / "summary.json", summary);
}

}  // namespace robust_dp
