#pragma once

#include "ptflow/config.hpp"
#include "ptflow/diagnostics.hpp"
#include "ptflow/integrate.hpp"
#include "ptflow/svg.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace ptflow::cli {

using objectives::Objective;

namespace fmt_detail {

inline std::string sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

inline std::string gen(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string vec(const Eigen::VectorXd& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += gen(v[i]);
  }
  return s + "]";
}

}  // namespace fmt_detail

/// Everything needed to execute one run (or one sweep member).
struct ExperimentSpec {
  flows::FlowSpec flow;
  std::optional<Objective> objective;  ///< absent for the regulator
  std::vector<Eigen::VectorXd> inits;  ///< one entry for run, many for sweep
  integrate::IntegratorConfig icfg;
  diagnostics::EnvelopeKind env_kind = diagnostics::EnvelopeKind::none;
  double env_modulus = 0.0;
  double env_gain = 1.0;
  double settling_eps = 1e-3;
  std::string csv_path, json_path, svg_path, per_run_prefix;
  bool include_wall_time = false;

  [[nodiscard]] const Objective* obj_ptr() const {
    return objective ? &*objective : nullptr;
  }
  [[nodiscard]] std::optional<Eigen::VectorXd> equilibrium() const {
    if (objective) return objective->minimizer;
    return Eigen::VectorXd::Zero(1);  // the regulator drives x to 0
  }
};

struct RunResult {
  integrate::Trajectory traj;
  bool envelope_holds = false;
  double max_violation = 0.0;
  std::optional<double> settling;
  double wall_seconds = 0.0;
};

namespace build_detail {

[[nodiscard]] inline flows::FlowSpec build_flow(KeyValues& kv) {
  const std::string name = kv.get_string("flow.name");
  const auto positive = [&](const char* key) {
    const double v = kv.get_double(key);
    if (!(v > 0.0)) throw ConfigError(key, "must be > 0");
    return v;
  };
  const auto timescale_of = [&]() {
    const double Tp = positive("flow.Tp");
    const double t0 = kv.get_double("flow.t0", 0.0);
    const auto r = kv.get_int("flow.r", 1);
    if (r < 1) throw ConfigError("flow.r", "must be an integer >= 1");
    return timescale::TimeScaleParams::make(t0, Tp, static_cast<int>(r));
  };
  if (name == "gf") return flows::make_vanilla(positive("flow.c"));
  if (name == "qrgf" || name == "qsgf") {
    const double c = positive("flow.c");
    const double q = kv.get_double("flow.q");
    if (!(q > 1.0)) throw ConfigError("flow.q", "must be > 1");
    return name == "qrgf" ? flows::make_qrgf(c, q) : flows::make_qsgf(c, q);
  }
  if (name == "ptgf") {
    const double k = positive("flow.k");
    return flows::make_ptgf(k, timescale_of());
  }
  if (name == "ptreg") {
    const double rho0 = positive("flow.rho0");
    return flows::make_ptreg(rho0, timescale_of());
  }
  throw ConfigError("flow.name", "unknown flow '" + name +
                                     "' (expected gf, qrgf, qsgf, ptgf or ptreg)");
}

[[nodiscard]] inline Objective build_objective(KeyValues& kv) {
  const std::string name = kv.get_string("objective.name");
  if (name == "trid" || name == "rosenbrock") {
    const auto n = kv.get_int("objective.dim", 2);
    if (n < 2) throw ConfigError("objective.dim", "must be >= 2");
    return name == "trid" ? objectives::make_trid(static_cast<int>(n))
                          : objectives::make_rosenbrock(static_cast<int>(n));
  }
  if (name == "quadratic") {
    const Eigen::MatrixXd A = kv.get_matrix("objective.A");
    Eigen::VectorXd b = Eigen::VectorXd::Zero(A.rows());
    if (kv.has("objective.b")) b = kv.get_vector("objective.b");
    try {
      return objectives::make_quadratic(A, b);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("objective.A", e.what());
    }
  }
  throw ConfigError("objective.name", "unknown objective '" + name +
                                          "' (expected trid, rosenbrock or quadratic)");
}

[[nodiscard]] inline integrate::IntegratorConfig build_integrator(KeyValues& kv, bool time_varying) {
  integrate::IntegratorConfig c;
  const std::string method = kv.get_string("integrator.method", "rk45");
  if (method == "rk45")
    c.method = integrate::Method::rk45;
  else if (method == "rk4")
    c.method = integrate::Method::rk4;
  else
    throw ConfigError("integrator.method", "expected rk45 or rk4, got '" + method + "'");
  c.rel_tol = kv.get_double("integrator.rel_tol", c.rel_tol);
  c.abs_tol = kv.get_double("integrator.abs_tol", c.abs_tol);
  if (!(c.rel_tol > 0.0)) throw ConfigError("integrator.rel_tol", "must be > 0");
  if (!(c.abs_tol > 0.0)) throw ConfigError("integrator.abs_tol", "must be > 0");
  c.initial_step = kv.get_double("integrator.initial_step", 0.0);
  c.max_steps = kv.get_int("integrator.max_steps", c.max_steps);
  if (c.max_steps < 1) throw ConfigError("integrator.max_steps", "must be >= 1");
  c.delta_rel = kv.get_double("integrator.delta_rel", c.delta_rel);
  if (!(c.delta_rel > 0.0 && c.delta_rel < 1.0))
    throw ConfigError("integrator.delta_rel", "must lie in (0, 1)");
  const auto samples = kv.get_int("integrator.sample_count", c.sample_count);
  if (samples < 2 || samples > 10'000'000)
    throw ConfigError("integrator.sample_count", "must be in [2, 1e7]");
  c.sample_count = static_cast<int>(samples);
  c.equilibrium_eps = kv.get_double("integrator.equilibrium_eps", c.equilibrium_eps);
  const std::string mode = kv.get_string("integrator.mode", "auto");
  if (mode == "auto")
    c.mode = integrate::Mode::auto_select;
  else if (mode == "raw")
    c.mode = integrate::Mode::raw;
  else if (mode == "stretched")
    c.mode = integrate::Mode::stretched;
  else
    throw ConfigError("integrator.mode", "expected auto, raw or stretched, got '" + mode + "'");
  if (time_varying) {
    if (kv.has("integrator.t_end"))
      throw ConfigError("integrator.t_end",
                        "not applicable to time-scaled flows (the horizon sets the stop time)");
  } else {
    c.t_end = kv.get_double("integrator.t_end");
    if (!(c.t_end > 0.0)) throw ConfigError("integrator.t_end", "must be > 0");
  }
  return c;
}

inline void build_diagnostics(KeyValues& kv, ExperimentSpec& spec) {
  spec.settling_eps = kv.get_double("diagnostics.settling_eps", 1e-3);
  if (!(spec.settling_eps > 0.0)) throw ConfigError("diagnostics.settling_eps", "must be > 0");
  const std::string kind = kv.get_string("diagnostics.envelope", "none");
  if (kind == "none") {
    spec.env_kind = diagnostics::EnvelopeKind::none;
    return;
  }
  const bool is_ptgf = std::holds_alternative<flows::PrescribedTimeGF>(spec.flow);
  const bool is_ptreg = std::holds_alternative<flows::PTRegulator>(spec.flow);
  if (kind == "pl" || kind == "sc") {
    if (!is_ptgf)
      throw ConfigError("diagnostics.envelope",
                        "'" + kind + "' envelope applies to the ptgf flow only");
    spec.env_gain = std::get<flows::PrescribedTimeGF>(spec.flow).k;
    if (kind == "pl") {
      spec.env_kind = diagnostics::EnvelopeKind::pl;
      if (kv.has("diagnostics.sigma"))
        spec.env_modulus = kv.get_double("diagnostics.sigma");
      else if (spec.objective && spec.objective->pl_modulus)
        spec.env_modulus = *spec.objective->pl_modulus;
      else
        throw ConfigError("diagnostics.sigma",
                          "required (objective carries no gradient-dominance modulus)");
      if (!(spec.env_modulus > 0.0)) throw ConfigError("diagnostics.sigma", "must be > 0");
      if (!spec.objective || !spec.objective->min_value)
        throw ConfigError("diagnostics.envelope", "pl envelope needs a known minimum value");
    } else {
      spec.env_kind = diagnostics::EnvelopeKind::sc;
      if (kv.has("diagnostics.mu"))
        spec.env_modulus = kv.get_double("diagnostics.mu");
      else if (spec.objective && spec.objective->sc_modulus)
        spec.env_modulus = *spec.objective->sc_modulus;
      else
        throw ConfigError("diagnostics.mu",
                          "required (objective carries no strong-convexity modulus)");
      if (!(spec.env_modulus > 0.0)) throw ConfigError("diagnostics.mu", "must be > 0");
      if (!spec.objective || !spec.objective->minimizer)
        throw ConfigError("diagnostics.envelope", "sc envelope needs a known minimizer");
    }
    return;
  }
  if (kind == "regulator") {
    if (!is_ptreg)
      throw ConfigError("diagnostics.envelope", "'regulator' envelope applies to ptreg only");
    spec.env_kind = diagnostics::EnvelopeKind::regulator;
    spec.env_modulus = std::get<flows::PTRegulator>(spec.flow).rho0;
    return;
  }
  throw ConfigError("diagnostics.envelope",
                    "expected none, pl, sc or regulator, got '" + kind + "'");
}

inline void build_inits(KeyValues& kv, ExperimentSpec& spec, bool sweep) {
  const auto dim = spec.objective ? spec.objective->dim : 1;
  const auto check_dim = [&](const Eigen::VectorXd& v, const char* key) {
    if (v.size() != dim)
      throw ConfigError(key, "expected dimension " + std::to_string(dim) + ", got " +
                                 std::to_string(v.size()));
  };
  if (!sweep) {
    if (!kv.has("init.x0")) throw ConfigError("init.x0", "missing required key");
    Eigen::VectorXd x0 = kv.get_vector("init.x0");
    check_dim(x0, "init.x0");
    spec.inits.push_back(std::move(x0));
    return;
  }
  const bool has_sweep = kv.has("init.sweep");
  const bool has_grid = kv.has("init.grid_axis");
  if (has_sweep && has_grid)
    throw ConfigError("init.sweep", "give either init.sweep or init.grid_axis, not both");
  if (has_sweep) {
    auto list = kv.get_vector_list("init.sweep");
    if (list.empty()) throw ConfigError("init.sweep", "must not be empty");
    for (const auto& v : list) check_dim(v, "init.sweep");
    spec.inits = std::move(list);
    return;
  }
  if (has_grid) {
    const Eigen::VectorXd axis = kv.get_vector("init.grid_axis");
    if (axis.size() == 0) throw ConfigError("init.grid_axis", "must not be empty");
    const double total = std::pow(static_cast<double>(axis.size()), dim);
    if (total > 1e6) throw ConfigError("init.grid_axis", "grid too large");
    std::vector<int> idx(static_cast<size_t>(dim), 0);
    while (true) {
      Eigen::VectorXd x(dim);
      for (int i = 0; i < dim; ++i) x[i] = axis[idx[static_cast<size_t>(i)]];
      spec.inits.push_back(std::move(x));
      int i = 0;
      for (; i < dim; ++i) {
        if (++idx[static_cast<size_t>(i)] < axis.size()) break;
        idx[static_cast<size_t>(i)] = 0;
      }
      if (i == dim) break;
    }
    return;
  }
  throw ConfigError("init.sweep", "sweep needs init.sweep or init.grid_axis");
}

}  // namespace build_detail

/// Assembles a full experiment from parsed key-values. Unread keys are
/// rejected by name afterwards, so typos and keys inapplicable to the
/// chosen flow/mode surface as config errors.
[[nodiscard]] inline ExperimentSpec build_experiment(KeyValues& kv, bool sweep) {
  ExperimentSpec spec;
  spec.flow = build_detail::build_flow(kv);
  if (flows::needs_objective(spec.flow)) spec.objective = build_detail::build_objective(kv);
  spec.icfg = build_detail::build_integrator(kv, flows::is_time_varying(spec.flow));
  build_detail::build_diagnostics(kv, spec);
  build_detail::build_inits(kv, spec, sweep);
  spec.csv_path = kv.get_string("output.csv", "");
  spec.json_path = kv.get_string("output.json", "");
  spec.svg_path = kv.get_string("output.svg", "");
  if (sweep) spec.per_run_prefix = kv.get_string("output.per_run_prefix", "");
  spec.include_wall_time = kv.get_bool("output.include_wall_time", false);
  kv.check_all_consumed();
  return spec;
}

/// Integrates one initial condition and runs the configured diagnostics.
[[nodiscard]] inline RunResult run_one(const ExperimentSpec& spec, const Eigen::VectorXd& x0) {
  RunResult res;
  const auto start = std::chrono::steady_clock::now();
  res.traj = integrate::integrate(spec.flow, spec.obj_ptr(), x0, spec.icfg);
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const timescale::TimeScaleParams* ts = flows::time_scale_of(spec.flow);
  diagnostics::EnvelopeSpec env;
  env.kind = spec.env_kind;
  env.modulus = spec.env_kind == diagnostics::EnvelopeKind::none ? 1.0 : spec.env_modulus;
  env.gain = spec.env_gain;
  if (ts != nullptr) env.ts = *ts;
  diagnostics::EnvelopeReport rep;
  if (spec.objective)
    rep = diagnostics::check_envelope(res.traj, *spec.objective, env);
  else
    rep = diagnostics::check_envelope_values(res.traj, env);
  res.envelope_holds = rep.holds;
  res.max_violation = rep.max_violation;

  if (const auto xs = spec.equilibrium())
    res.settling = integrate::settling_time(res.traj, *xs, spec.settling_eps);
  return res;
}

namespace io_detail {

inline void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

inline std::ofstream open_out(const std::string& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
  return out;
}

/// Provenance comments shared by the CSV writers: enough to re-run the
/// experiment without the original config file.
inline void write_comment_header(std::ostream& out, const ExperimentSpec& spec,
                                 const char* command) {
  using fmt_detail::gen;
  out << "# ptflow " << command << "\n";
  out << "# flow: " << flows::flow_name(spec.flow);
  std::visit(
      [&](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, flows::VanillaGF>) {
          out << " c=" << gen(f.c);
        } else if constexpr (std::is_same_v<F, flows::QRescaledGF> ||
                             std::is_same_v<F, flows::QSignedGF>) {
          out << " c=" << gen(f.c) << " q=" << gen(f.q);
        } else if constexpr (std::is_same_v<F, flows::PrescribedTimeGF>) {
          out << " k=" << gen(f.k) << " Tp=" << gen(f.ts.Tp) << " r=" << f.ts.r
              << " t0=" << gen(f.ts.t0);
        } else {
          out << " rho0=" << gen(f.rho0) << " Tp=" << gen(f.ts.Tp) << " r=" << f.ts.r
              << " t0=" << gen(f.ts.t0);
        }
      },
      spec.flow);
  out << "\n";
  if (spec.objective)
    out << "# objective: " << spec.objective->name << " n=" << spec.objective->dim << "\n";
  const auto& c = spec.icfg;
  out << "# integrator: method=" << (c.method == integrate::Method::rk45 ? "rk45" : "rk4")
      << " mode="
      << (c.mode == integrate::Mode::auto_select
              ? "auto"
              : (c.mode == integrate::Mode::raw ? "raw" : "stretched"))
      << " rel_tol=" << gen(c.rel_tol) << " abs_tol=" << gen(c.abs_tol)
      << " delta_rel=" << gen(c.delta_rel) << " samples=" << c.sample_count;
  if (!flows::is_time_varying(spec.flow)) out << " t_end=" << gen(c.t_end);
  out << "\n";
  switch (spec.env_kind) {
    case diagnostics::EnvelopeKind::none: out << "# envelope: none\n"; break;
    case diagnostics::EnvelopeKind::pl:
      out << "# envelope: pl sigma=" << gen(spec.env_modulus) << " gain=" << gen(spec.env_gain)
          << "\n";
      break;
    case diagnostics::EnvelopeKind::sc:
      out << "# envelope: sc mu=" << gen(spec.env_modulus) << " gain=" << gen(spec.env_gain)
          << "\n";
      break;
    case diagnostics::EnvelopeKind::regulator:
      out << "# envelope: regulator rho0=" << gen(spec.env_modulus) << "\n";
      break;
    default: break;
  }
}

inline void write_trajectory_csv(const std::string& path, const ExperimentSpec& spec,
                                 const Eigen::VectorXd& x0, const integrate::Trajectory& traj) {
  using fmt_detail::sci;
  auto out = open_out(path);
  write_comment_header(out, spec, "run");
  out << "# x0: " << fmt_detail::vec(x0) << "\n";
  out << "t";
  for (Eigen::Index d = 0; d < traj.states.cols(); ++d) out << ",x" << d;
  out << ",f,grad_norm,V,envelope\n";
  for (size_t j = 0; j < traj.times.size(); ++j) {
    const auto ji = static_cast<Eigen::Index>(j);
    out << sci(traj.times[j]);
    for (Eigen::Index d = 0; d < traj.states.cols(); ++d) out << "," << sci(traj.states(ji, d));
    out << "," << sci(traj.f_vals[ji]) << "," << sci(traj.grad_norms[ji]) << ","
        << sci(traj.lyap_vals[ji]) << "," << sci(traj.envelope_vals[ji]) << "\n";
  }
}

inline nlohmann::json summary_json(const ExperimentSpec& spec, const RunResult& res) {
  nlohmann::json j;
  const auto last = static_cast<Eigen::Index>(res.traj.times.size()) - 1;
  j["final_state"] = std::vector<double>(res.traj.states.row(last).begin(),
                                         res.traj.states.row(last).end());
  j["final_f"] = res.traj.f_vals[last];
  if (res.settling)
    j["settling_time"] = *res.settling;
  else
    j["settling_time"] = nullptr;
  j["envelope_holds"] = res.envelope_holds;
  j["max_violation"] = res.max_violation;
  j["stop_reason"] = integrate::to_string(res.traj.stop_reason);
  // Wall time is nondeterministic; it is serialized only on request so that
  // identical configs produce byte-identical summaries by default.
  if (spec.include_wall_time)
    j["wall_time"] = res.wall_seconds;
  else
    j["wall_time"] = nullptr;
  return j;
}

inline double tp_of(const ExperimentSpec& spec) {
  const auto* ts = flows::time_scale_of(spec.flow);
  return ts ? ts->t0 + ts->Tp : std::numeric_limits<double>::quiet_NaN();
}

inline std::string svg_title(const ExperimentSpec& spec) {
  std::string t = flows::flow_name(spec.flow);
  if (spec.objective) t += " on " + spec.objective->name;
  return t;
}

}  // namespace io_detail

/// `ptflow run <config>`: one integration, CSV/JSON/SVG as configured.
inline int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
                   std::ostream& out) {
  KeyValues kv = KeyValues::parse_file(config_path);
  for (const auto& o : overrides) kv.apply_override(o);
  const ExperimentSpec spec = build_experiment(kv, /*sweep=*/false);
  const RunResult res = run_one(spec, spec.inits.front());

  if (!spec.csv_path.empty())
    io_detail::write_trajectory_csv(spec.csv_path, spec, spec.inits.front(), res.traj);
  if (!spec.json_path.empty()) {
    auto f = io_detail::open_out(spec.json_path);
    f << io_detail::summary_json(spec, res).dump(2) << "\n";
  }
  if (!spec.svg_path.empty()) {
    auto f = io_detail::open_out(spec.svg_path);
    f << render_svg(res.traj.times, res.traj.states, io_detail::tp_of(spec),
                    io_detail::svg_title(spec));
  }

  const auto last = static_cast<Eigen::Index>(res.traj.times.size()) - 1;
  out << "final_f = " << fmt_detail::gen(res.traj.f_vals[last])
      << "  stop_reason = " << integrate::to_string(res.traj.stop_reason);
  if (res.settling) out << "  settling_time = " << fmt_detail::gen(*res.settling);
  out << "  envelope_holds = " << (res.envelope_holds ? "true" : "false") << "\n";
  return 0;
}

namespace sweep_detail {

[[nodiscard]] inline unsigned thread_budget(size_t runs) {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("PTFLOW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) n = static_cast<unsigned>(v);
  }
  return static_cast<unsigned>(std::min<size_t>(n, runs));
}

struct Row {
  Eigen::VectorXd x0;
  std::optional<double> settling;
  std::optional<double> final_error;
  bool envelope_holds = false;
  std::string status = "ok";
  std::optional<integrate::Trajectory> traj;
};

}  // namespace sweep_detail

/// `ptflow sweep <config>`: one run per initial condition (init.sweep or
/// init.grid_axis), executed concurrently up to PTFLOW_THREADS, aggregated
/// in config order. Per-run failures are recorded in the row's status
/// column instead of aborting the sweep.
inline int cmd_sweep(const std::string& config_path, const std::vector<std::string>& overrides,
                     std::ostream& out) {
  KeyValues kv = KeyValues::parse_file(config_path);
  for (const auto& o : overrides) kv.apply_override(o);
  const ExperimentSpec spec = build_experiment(kv, /*sweep=*/true);

  const size_t n = spec.inits.size();
  std::vector<sweep_detail::Row> rows(n);
  std::atomic<size_t> cursor{0};
  const auto worker = [&] {
    while (true) {
      const size_t i = cursor.fetch_add(1);
      if (i >= n) return;
      sweep_detail::Row& row = rows[i];
      row.x0 = spec.inits[i];
      try {
        RunResult res = run_one(spec, spec.inits[i]);
        row.settling = res.settling;
        row.envelope_holds = res.envelope_holds;
        if (const auto xs = spec.equilibrium()) {
          const auto last = static_cast<Eigen::Index>(res.traj.times.size()) - 1;
          row.final_error = (res.traj.states.row(last).transpose() - *xs).norm();
        }
        row.traj = std::move(res.traj);
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
    }
  };
  const unsigned threads = sweep_detail::thread_budget(n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  const auto dim = spec.objective ? spec.objective->dim : 1;
  if (!spec.csv_path.empty()) {
    auto f = io_detail::open_out(spec.csv_path);
    io_detail::write_comment_header(f, spec, "sweep");
    for (int d = 0; d < dim; ++d) f << "x" << d << ",";
    f << "settling_time,final_error,envelope_holds,status\n";
    for (const auto& row : rows) {
      for (int d = 0; d < dim; ++d) f << fmt_detail::sci(row.x0[d]) << ",";
      if (row.settling) f << fmt_detail::sci(*row.settling);
      f << ",";
      if (row.final_error) f << fmt_detail::sci(*row.final_error);
      f << "," << (row.envelope_holds ? "true" : "false") << "," << row.status << "\n";
    }
  }
  if (!spec.per_run_prefix.empty()) {
    for (size_t i = 0; i < n; ++i)
      if (rows[i].traj)
        io_detail::write_trajectory_csv(spec.per_run_prefix + std::to_string(i) + ".csv", spec,
                                        rows[i].x0, *rows[i].traj);
  }

  size_t failures = 0;
  for (const auto& row : rows)
    if (row.status != "ok") ++failures;
  out << n << " runs, " << failures << " failed\n";
  return failures == 0 ? 0 : 3;
}

/// `ptflow verify <config>`: grid/sampling verification of a gradient-
/// dominance or strong-convexity modulus. Exit 0 when the requested modulus
/// is upheld, 1 when violations were found (still a successful program run).
inline int cmd_verify(const std::string& config_path, const std::vector<std::string>& overrides,
                      std::ostream& out) {
  KeyValues kv = KeyValues::parse_file(config_path);
  for (const auto& o : overrides) kv.apply_override(o);
  const Objective obj = build_detail::build_objective(kv);
  const std::string kind = kv.get_string("verify.kind");
  if (kind != "pl" && kind != "sc")
    throw ConfigError("verify.kind", "expected pl or sc, got '" + kind + "'");

  objectives::BoxDomain box = [&] {
    if (kv.has("verify.lower") || kv.has("verify.upper")) {
      Eigen::VectorXd lo = kv.get_vector("verify.lower");
      Eigen::VectorXd hi = kv.get_vector("verify.upper");
      if (lo.size() != obj.dim || hi.size() != obj.dim)
        throw ConfigError("verify.lower", "domain dimension must match the objective");
      try {
        return objectives::BoxDomain::make(std::move(lo), std::move(hi));
      } catch (const std::invalid_argument& e) {
        throw ConfigError("verify.lower", e.what());
      }
    }
    if (obj.pl_domain) return *obj.pl_domain;
    throw ConfigError("verify.lower", "missing domain (objective has no default)");
  }();

  if (kind == "pl") {
    const auto grid = static_cast<int>(kv.get_int("verify.grid", 51));
    if (grid < 2) throw ConfigError("verify.grid", "must be >= 2");
    std::optional<double> sigma;
    if (kv.has("verify.sigma"))
      sigma = kv.get_double("verify.sigma");
    else if (obj.pl_modulus)
      sigma = *obj.pl_modulus;
    kv.check_all_consumed();
    const auto rep = objectives::verify_pl(obj, box, grid, sigma);
    out << "pl verification: objective=" << obj.name << " grid=" << grid << "^" << obj.dim
        << "\n";
    if (std::isfinite(rep.sigma_hat))
      out << "sigma_hat = " << fmt_detail::sci(rep.sigma_hat) << "\n";
    else
      out << "sigma_hat = +inf (no grid point clears the tie region)\n";
    if (!sigma) return 0;
    out << "requested sigma = " << fmt_detail::gen(*sigma) << ": " << rep.violations.size()
        << " violations\n";
    for (size_t i = 0; i < std::min<size_t>(rep.violations.size(), 5); ++i)
      out << "  at x = " << fmt_detail::vec(rep.violations[i]) << "\n";
    return rep.violations.empty() ? 0 : 1;
  }

  const auto samples = static_cast<int>(kv.get_int("verify.samples", 1000));
  if (samples < 1) throw ConfigError("verify.samples", "must be >= 1");
  const auto seed = static_cast<std::uint32_t>(kv.get_int("verify.seed", 12345));
  double mu = 0.0;
  if (kv.has("verify.mu"))
    mu = kv.get_double("verify.mu");
  else if (obj.sc_modulus)
    mu = *obj.sc_modulus;
  else
    throw ConfigError("verify.mu", "required (objective carries no strong-convexity modulus)");
  if (!(mu > 0.0)) throw ConfigError("verify.mu", "must be > 0");
  kv.check_all_consumed();
  const auto violations = objectives::verify_strong_convexity(obj, box, samples, mu, seed);
  out << "sc verification: objective=" << obj.name << " samples=" << samples
      << " mu=" << fmt_detail::gen(mu) << ": " << violations.size() << " violations\n";
  for (size_t i = 0; i < std::min<size_t>(violations.size(), 5); ++i)
    out << "  pair a = " << fmt_detail::vec(violations[i].first)
        << ", b = " << fmt_detail::vec(violations[i].second) << "\n";
  return violations.empty() ? 0 : 1;
}

/// `ptflow plot <csv> -o <svg>`: re-renders a trajectory CSV written by
/// `run` as an SVG chart. The horizon marker is recovered from the CSV's
/// comment header when present (override with --tp).
inline int cmd_plot(const std::string& csv_path, const std::string& svg_path, double tp_override,
                    std::ostream& out) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open '" + csv_path + "'");
  std::string line;
  double file_tp = std::numeric_limits<double>::quiet_NaN();
  double file_t0 = 0.0;
  std::string header;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("Tp=");
      if (pos != std::string::npos) file_tp = std::strtod(line.c_str() + pos + 3, nullptr);
      const auto t0pos = line.find("t0=");
      if (t0pos != std::string::npos) file_t0 = std::strtod(line.c_str() + t0pos + 3, nullptr);
      continue;
    }
    header = line;
    break;
  }
  double tp = tp_override;
  if (std::isnan(tp) && !std::isnan(file_tp)) tp = file_tp + file_t0;
  if (header.empty()) throw std::runtime_error("'" + csv_path + "' has no header row");
  // Count the state columns: header is t,x0,...,x{n-1},f,grad_norm,V,envelope.
  int dims = 0;
  {
    std::istringstream hs(header);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(hs, col, ',')) cols.push_back(col);
    if (cols.size() < 6 || cols.front() != "t")
      throw std::runtime_error("'" + csv_path + "' is not a ptflow trajectory CSV");
    dims = static_cast<int>(cols.size()) - 5;
  }
  std::vector<double> times;
  std::vector<std::vector<double>> coords(static_cast<size_t>(dims));
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ls, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
    if (vals.size() < static_cast<size_t>(dims) + 1) continue;
    times.push_back(vals[0]);
    for (int d = 0; d < dims; ++d) coords[static_cast<size_t>(d)].push_back(vals[static_cast<size_t>(d) + 1]);
  }
  if (times.size() < 2) throw std::runtime_error("'" + csv_path + "' has fewer than two rows");
  Eigen::MatrixXd states(static_cast<Eigen::Index>(times.size()), dims);
  for (size_t j = 0; j < times.size(); ++j)
    for (int d = 0; d < dims; ++d)
      states(static_cast<Eigen::Index>(j), d) = coords[static_cast<size_t>(d)][j];

  auto f = io_detail::open_out(svg_path);
  f << render_svg(times, states, tp, std::filesystem::path(csv_path).stem().string());
  out << "wrote " << svg_path << "\n";
  return 0;
}

}  // namespace ptflow::cli
