#include "ptflow/experiment.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace ptflow;
using cli::ConfigError;
using cli::KeyValues;

std::string tmp_path(const std::string& name) { return ::testing::TempDir() + name; }

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  ASSERT_TRUE(out.good()) << path;
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << path;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> data_lines(const std::string& csv) {
  std::vector<std::string> out;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') out.push_back(line);
  return out;
}

cli::ExperimentSpec build_from(const std::string& text, bool sweep = false) {
  auto kv = KeyValues::parse_string(text);
  return cli::build_experiment(kv, sweep);
}

const char* kQuadraticRun = R"(
flow.name = ptgf
flow.k = 0.1
flow.Tp = 10
objective.name = quadratic
objective.A = [[1, 0], [0, 4]]
init.x0 = [3, 1]
integrator.sample_count = 200
diagnostics.envelope = pl
)";

TEST(BuildExperiment, DefaultsAndScalarPromotion) {
  const auto spec = build_from(
      "flow.name = gf\n"
      "flow.c = 1\n"
      "objective.name = quadratic\n"
      "objective.A = [[1]]\n"
      "integrator.t_end = 20\n"
      "init.x0 = 2\n");
  EXPECT_TRUE(std::holds_alternative<flows::VanillaGF>(spec.flow));
  ASSERT_TRUE(spec.objective.has_value());
  EXPECT_EQ(spec.objective->dim, 1);
  ASSERT_EQ(spec.inits.size(), 1u);
  EXPECT_DOUBLE_EQ(spec.inits[0][0], 2.0);  // bare scalar became a 1-vector
  EXPECT_EQ(spec.icfg.method, integrate::Method::rk45);
  EXPECT_DOUBLE_EQ(spec.icfg.rel_tol, 1e-8);
  EXPECT_DOUBLE_EQ(spec.icfg.t_end, 20.0);
  EXPECT_EQ(spec.icfg.sample_count, 1000);
  EXPECT_EQ(spec.env_kind, diagnostics::EnvelopeKind::none);
  EXPECT_DOUBLE_EQ(spec.settling_eps, 1e-3);
  EXPECT_TRUE(spec.csv_path.empty());
  EXPECT_FALSE(spec.include_wall_time);
}

TEST(BuildExperiment, EveryFlowIsConstructible) {
  const char* tail =
      "objective.name = trid\n"
      "integrator.t_end = 5\n"
      "init.x0 = [-2, 3]\n";
  const auto qr = build_from(std::string("flow.name = qrgf\nflow.c = 1\nflow.q = 3\n") + tail);
  EXPECT_TRUE(std::holds_alternative<flows::QRescaledGF>(qr.flow));
  const auto qs = build_from(std::string("flow.name = qsgf\nflow.c = 1\nflow.q = 3\n") + tail);
  EXPECT_TRUE(std::holds_alternative<flows::QSignedGF>(qs.flow));
  const auto pt = build_from(
      "flow.name = ptgf\nflow.k = 0.5\nflow.Tp = 4\nflow.r = 2\nflow.t0 = 1\n"
      "objective.name = trid\ninit.x0 = [-2, 3]\n");
  const auto* ts = flows::time_scale_of(pt.flow);
  ASSERT_NE(ts, nullptr);
  EXPECT_EQ(ts->r, 2);
  EXPECT_DOUBLE_EQ(ts->t0, 1.0);
  const auto reg = build_from(
      "flow.name = ptreg\nflow.rho0 = 1\nflow.Tp = 10\ninit.x0 = 5\n"
      "diagnostics.envelope = regulator\n");
  EXPECT_FALSE(reg.objective.has_value());
  EXPECT_EQ(reg.env_kind, diagnostics::EnvelopeKind::regulator);
  EXPECT_DOUBLE_EQ(reg.env_modulus, 1.0);
  ASSERT_TRUE(reg.equilibrium().has_value());
  EXPECT_DOUBLE_EQ((*reg.equilibrium())[0], 0.0);
}

TEST(BuildExperiment, EnvelopeModulusFromMetadataAndKey) {
  const auto spec = build_from(kQuadraticRun);
  EXPECT_EQ(spec.env_kind, diagnostics::EnvelopeKind::pl);
  EXPECT_DOUBLE_EQ(spec.env_modulus, 1.0);  // lambda_min of diag(1,4)
  EXPECT_DOUBLE_EQ(spec.env_gain, 0.1);
  const auto spec2 = build_from(std::string(kQuadraticRun) + "diagnostics.sigma = 0.5\n");
  EXPECT_DOUBLE_EQ(spec2.env_modulus, 0.5);
  const auto spec3 = build_from(std::string(kQuadraticRun) + "diagnostics.mu = 2\n" +
                                    "diagnostics.envelope = sc\n" /* later key wins */);
  EXPECT_EQ(spec3.env_kind, diagnostics::EnvelopeKind::sc);
  EXPECT_DOUBLE_EQ(spec3.env_modulus, 2.0);
}

void expect_config_error(const std::string& text, const std::string& key, bool sweep = false) {
  try {
    (void)build_from(text, sweep);
    FAIL() << "expected ConfigError for key " << key;
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key, key) << e.what();
  }
}

TEST(BuildExperiment, RejectsBadConfigsNamingTheKey) {
  const std::string ptgf_head =
      "flow.name = ptgf\nflow.k = 0.1\nflow.Tp = 10\nobjective.name = trid\n";
  // Flow family.
  expect_config_error("flow.name = sgd\n", "flow.name");
  expect_config_error("flow.name = gf\nflow.c = 0\n", "flow.c");
  expect_config_error("flow.name = qrgf\nflow.c = 1\n", "flow.q");
  expect_config_error("flow.name = qrgf\nflow.c = 1\nflow.q = 1\n", "flow.q");
  expect_config_error("flow.name = ptgf\nflow.k = 0.1\nflow.Tp = 10\nflow.r = 0\n", "flow.r");
  // Objective family.
  expect_config_error("flow.name = ptgf\nflow.k = 1\nflow.Tp = 1\nobjective.name = sphere\n",
                      "objective.name");
  expect_config_error(
      "flow.name = ptgf\nflow.k = 1\nflow.Tp = 1\nobjective.name = trid\nobjective.dim = 1\n",
      "objective.dim");
  expect_config_error(
      "flow.name = gf\nflow.c = 1\nintegrator.t_end = 1\nobjective.name = quadratic\n"
      "objective.A = [[1, 2], [2, 1]]\ninit.x0 = [0, 0]\n",
      "objective.A");  // indefinite matrix
  // Integrator block.
  expect_config_error("flow.name = gf\nflow.c = 1\nobjective.name = trid\ninit.x0 = [0, 0]\n",
                      "integrator.t_end");  // autonomous flows need a stop time
  expect_config_error(ptgf_head + "integrator.t_end = 5\ninit.x0 = [0, 0]\n",
                      "integrator.t_end");  // ... while time-scaled flows reject one
  expect_config_error(ptgf_head + "integrator.delta_rel = 1\ninit.x0 = [0, 0]\n",
                      "integrator.delta_rel");
  expect_config_error(ptgf_head + "integrator.sample_count = 1\ninit.x0 = [0, 0]\n",
                      "integrator.sample_count");
  expect_config_error(ptgf_head + "integrator.method = euler\ninit.x0 = [0, 0]\n",
                      "integrator.method");
  expect_config_error(ptgf_head + "integrator.mode = fast\ninit.x0 = [0, 0]\n",
                      "integrator.mode");
  // Diagnostics block.
  expect_config_error(
      "flow.name = gf\nflow.c = 1\nintegrator.t_end = 1\nobjective.name = trid\n"
      "init.x0 = [0, 0]\ndiagnostics.envelope = pl\n",
      "diagnostics.envelope");  // pl/sc wrap the time-scaled flow only
  expect_config_error(ptgf_head + "init.x0 = [0, 0]\ndiagnostics.envelope = pl\n",
                      "diagnostics.sigma");  // trid carries no modulus metadata
  expect_config_error(ptgf_head + "init.x0 = [0, 0]\ndiagnostics.envelope = regulator\n",
                      "diagnostics.envelope");
  // Init block.
  expect_config_error(ptgf_head, "init.x0");
  expect_config_error(ptgf_head + "init.x0 = [1, 2, 3]\n", "init.x0");
  expect_config_error(ptgf_head + "init.sweep = [[1, 2]]\ninit.grid_axis = [0, 1]\n",
                      "init.sweep", /*sweep=*/true);
  expect_config_error(ptgf_head + "init.sweep = []\n", "init.sweep", /*sweep=*/true);
  expect_config_error(ptgf_head, "init.sweep", /*sweep=*/true);
  // Unknown/inapplicable keys are named too.
  expect_config_error(ptgf_head + "init.x0 = [0, 0]\nintegrator.xyz = 1\n", "integrator.xyz");
  expect_config_error(
      "flow.name = ptreg\nflow.rho0 = 1\nflow.Tp = 10\ninit.x0 = 5\nobjective.name = trid\n",
      "objective.name");  // the regulator takes no objective
  expect_config_error(ptgf_head + "init.x0 = [0, 0]\ninit.sweep = [[1, 2]]\n", "init.sweep");
}

TEST(BuildExperiment, GridAxisExpandsInRowMajorOrder) {
  const auto spec = build_from(
      "flow.name = gf\nflow.c = 1\nintegrator.t_end = 5\n"
      "objective.name = quadratic\nobjective.A = [[1, 0], [0, 1]]\n"
      "init.grid_axis = [-1, 0, 1]\n",
      /*sweep=*/true);
  ASSERT_EQ(spec.inits.size(), 9u);
  EXPECT_DOUBLE_EQ(spec.inits[0][0], -1.0);
  EXPECT_DOUBLE_EQ(spec.inits[0][1], -1.0);
  // First coordinate varies fastest.
  EXPECT_DOUBLE_EQ(spec.inits[1][0], 0.0);
  EXPECT_DOUBLE_EQ(spec.inits[1][1], -1.0);
  EXPECT_DOUBLE_EQ(spec.inits[3][0], -1.0);
  EXPECT_DOUBLE_EQ(spec.inits[3][1], 0.0);
  EXPECT_DOUBLE_EQ(spec.inits[8][0], 1.0);
  EXPECT_DOUBLE_EQ(spec.inits[8][1], 1.0);
}

TEST(RunOne, QuadraticEnvelopeHoldsAndSettles) {
  const auto spec = build_from(kQuadraticRun);
  const auto res = cli::run_one(spec, spec.inits.front());
  EXPECT_TRUE(res.envelope_holds);
  EXPECT_LT(res.max_violation, 1e-8);
  ASSERT_TRUE(res.settling.has_value());
  EXPECT_LE(*res.settling, 10.0 * (1.0 - 1e-6));
  EXPECT_LT(res.traj.f_vals[res.traj.f_vals.size() - 1], 1e-10);
  EXPECT_GT(res.wall_seconds, 0.0);
}

TEST(CmdRun, WritesCsvJsonSvgDeterministically) {
  const std::string cfg = tmp_path("ptflow_run_test.cfg");
  const std::string csv = tmp_path("ptflow_run_test.csv");
  const std::string json = tmp_path("ptflow_run_test.json");
  const std::string svg = tmp_path("ptflow_run_test.svg");
  write_file(cfg, std::string(kQuadraticRun) + "output.csv = " + csv + "\noutput.json = " +
                      json + "\noutput.svg = " + svg + "\n");
  std::ostringstream out;
  ASSERT_EQ(cli::cmd_run(cfg, {}, out), 0);
  EXPECT_NE(out.str().find("stop_reason = reached_t_stop"), std::string::npos);
  EXPECT_NE(out.str().find("envelope_holds = true"), std::string::npos);

  const std::string csv1 = slurp(csv);
  EXPECT_EQ(csv1.rfind("# ptflow run\n", 0), 0u);
  EXPECT_NE(csv1.find("# flow: ptgf k=0.1"), std::string::npos);
  EXPECT_NE(csv1.find("# objective: quadratic n=2"), std::string::npos);
  EXPECT_NE(csv1.find("# envelope: pl sigma=1 gain=0.1"), std::string::npos);
  const auto rows = data_lines(csv1);
  ASSERT_EQ(rows.size(), 201u);  // header + sample_count rows
  EXPECT_EQ(rows[0], "t,x0,x1,f,grad_norm,V,envelope");
  // Full-precision scientific cells.
  EXPECT_EQ(rows[1].rfind("0.0000000000000000e+00,3.0000000000000000e+00", 0), 0u);

  const auto j = nlohmann::json::parse(slurp(json));
  ASSERT_TRUE(j["final_state"].is_array());
  EXPECT_EQ(j["final_state"].size(), 2u);
  EXPECT_TRUE(j["settling_time"].is_number());
  EXPECT_TRUE(j["envelope_holds"].get<bool>());
  EXPECT_EQ(j["stop_reason"].get<std::string>(), "reached_t_stop");
  EXPECT_TRUE(j["wall_time"].is_null());  // deterministic by default

  EXPECT_EQ(slurp(svg).rfind("<svg", 0), 0u);

  // Byte-identical on a second invocation.
  const std::string json1 = slurp(json);
  const std::string svg1 = slurp(svg);
  std::ostringstream out2;
  ASSERT_EQ(cli::cmd_run(cfg, {}, out2), 0);
  EXPECT_EQ(out.str(), out2.str());
  EXPECT_EQ(csv1, slurp(csv));
  EXPECT_EQ(json1, slurp(json));
  EXPECT_EQ(svg1, slurp(svg));

  // --set overrides reach the run; wall_time appears on request.
  std::ostringstream out3;
  ASSERT_EQ(cli::cmd_run(cfg, {"output.include_wall_time=true", "output.svg="}, out3), 0);
  EXPECT_TRUE(nlohmann::json::parse(slurp(json))["wall_time"].is_number());
}

TEST(CmdSweep, ListOrderPerRunFilesAndThreadInvariance) {
  const std::string cfg = tmp_path("ptflow_sweep_list.cfg");
  const std::string csv = tmp_path("ptflow_sweep_list.csv");
  const std::string prefix = tmp_path("ptflow_sweep_run_");
  write_file(cfg,
             "flow.name = ptgf\nflow.k = 0.1\nflow.Tp = 10\n"
             "objective.name = trid\n"
             "init.sweep = [[5, -5], [-10, -10], [1, 1]]\n"
             "integrator.sample_count = 50\n"
             "output.csv = " + csv + "\noutput.per_run_prefix = " + prefix + "\n");
  ::setenv("PTFLOW_THREADS", "1", 1);
  std::ostringstream out;
  ASSERT_EQ(cli::cmd_sweep(cfg, {}, out), 0);
  EXPECT_NE(out.str().find("3 runs, 0 failed"), std::string::npos);

  const std::string body = slurp(csv);
  const auto rows = data_lines(body);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "x0,x1,settling_time,final_error,envelope_holds,status");
  // Aggregate rows stay in config order whatever the execution order.
  EXPECT_EQ(rows[1].rfind("5.0000000000000000e+00,-5.0000000000000000e+00", 0), 0u);
  EXPECT_EQ(rows[2].rfind("-1.0000000000000000e+01", 0), 0u);
  for (size_t i = 1; i <= 3; ++i) {
    EXPECT_NE(rows[i].find(",ok"), std::string::npos);
    EXPECT_EQ(rows[i].find("error"), std::string::npos);
  }
  for (int i = 0; i < 3; ++i) {
    const std::string per = slurp(prefix + std::to_string(i) + ".csv");
    EXPECT_NE(per.find("t,x0,x1,f,grad_norm,V,envelope"), std::string::npos);
  }

  ::setenv("PTFLOW_THREADS", "2", 1);
  const std::string csv2 = tmp_path("ptflow_sweep_list2.csv");
  std::ostringstream out2;
  ASSERT_EQ(cli::cmd_sweep(cfg, {"output.csv=" + csv2, "output.per_run_prefix="}, out2), 0);
  EXPECT_EQ(body, slurp(csv2));  // parallelism never changes the bytes
  ::unsetenv("PTFLOW_THREADS");
}

TEST(CmdSweep, SettlingGrowsWithMagnitudeForVanillaButNotPtgf) {
  // On f = x^2/2, vanilla-flow settling grows like ln|x0|; the time-scaled
  // flow settles before its horizon from any magnitude.
  const auto settles = [&](const std::string& flow_lines, const std::string& tag) {
    const std::string cfg = tmp_path("ptflow_sweep_mag_" + tag + ".cfg");
    const std::string csv = tmp_path("ptflow_sweep_mag_" + tag + ".csv");
    write_file(cfg, flow_lines +
                        "objective.name = quadratic\nobjective.A = [[1]]\n"
                        "init.sweep = [1, 10, 100]\n"
                        "integrator.sample_count = 400\n"
                        "output.csv = " + csv + "\n");
    std::ostringstream out;
    EXPECT_EQ(cli::cmd_sweep(cfg, {}, out), 0);
    std::vector<double> s;
    for (const auto& row : data_lines(slurp(csv))) {
      if (row.rfind("x0,", 0) == 0) continue;
      const auto c1 = row.find(',');
      s.push_back(std::strtod(row.c_str() + c1 + 1, nullptr));
    }
    return s;
  };
  const auto gf = settles("flow.name = gf\nflow.c = 1\nintegrator.t_end = 16\n", "gf");
  ASSERT_EQ(gf.size(), 3u);
  EXPECT_GT(gf[1], gf[0] + 2.0);  // ~ln(10) apart
  EXPECT_GT(gf[2], gf[1] + 2.0);
  const auto pt = settles("flow.name = ptgf\nflow.k = 0.5\nflow.Tp = 10\n", "pt");
  ASSERT_EQ(pt.size(), 3u);
  for (double v : pt) EXPECT_LE(v, 10.0 * (1.0 - 1e-6));
}

TEST(CmdSweep, PerRunFailureIsReportedNotFatal) {
  const std::string cfg = tmp_path("ptflow_sweep_err.cfg");
  const std::string csv = tmp_path("ptflow_sweep_err.csv");
  write_file(cfg,
             "flow.name = gf\nflow.c = 1\nintegrator.t_end = 2\n"
             "objective.name = quadratic\nobjective.A = [[1]]\n"
             "init.sweep = [nan, 1]\n"
             "output.csv = " + csv + "\n");
  std::ostringstream out;
  EXPECT_EQ(cli::cmd_sweep(cfg, {}, out), 3);
  EXPECT_NE(out.str().find("2 runs, 1 failed"), std::string::npos);
  const auto rows = data_lines(slurp(csv));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NE(rows[1].find("error:"), std::string::npos);
  EXPECT_NE(rows[2].find(",ok"), std::string::npos);
}

TEST(CmdVerify, PlGridAndScSampling) {
  const std::string cfg = tmp_path("ptflow_verify_pl.cfg");
  write_file(cfg,
             "objective.name = quadratic\nobjective.A = [[1, 0], [0, 4]]\n"
             "verify.kind = pl\nverify.grid = 21\n"
             "verify.lower = [-1, -1]\nverify.upper = [1, 1]\n");
  std::ostringstream out;
  EXPECT_EQ(cli::cmd_verify(cfg, {}, out), 0);  // metadata sigma = lambda_min holds
  EXPECT_NE(out.str().find("sigma_hat"), std::string::npos);
  std::ostringstream out2;
  EXPECT_EQ(cli::cmd_verify(cfg, {"verify.sigma=2"}, out2), 1);  // overclaimed modulus
  EXPECT_NE(out2.str().find("violations"), std::string::npos);

  const std::string cfg2 = tmp_path("ptflow_verify_sc.cfg");
  write_file(cfg2,
             "objective.name = quadratic\nobjective.A = [[1, 0], [0, 4]]\n"
             "verify.kind = sc\nverify.samples = 400\n"
             "verify.lower = [-1, -1]\nverify.upper = [1, 1]\n");
  std::ostringstream out3;
  EXPECT_EQ(cli::cmd_verify(cfg2, {}, out3), 0);
  std::ostringstream out4;
  EXPECT_EQ(cli::cmd_verify(cfg2, {"verify.mu=4.5"}, out4), 1);
}

TEST(CmdVerify, ReportOnlyAndMetadataDomain) {
  // Trid has no recorded modulus: without verify.sigma the command only
  // reports sigma_hat and succeeds.
  const std::string cfg = tmp_path("ptflow_verify_trid.cfg");
  write_file(cfg,
             "objective.name = trid\nverify.kind = pl\nverify.grid = 15\n"
             "verify.lower = [-4, -1]\nverify.upper = [0, 5]\n");
  std::ostringstream out;
  EXPECT_EQ(cli::cmd_verify(cfg, {}, out), 0);
  EXPECT_NE(out.str().find("sigma_hat"), std::string::npos);
  // Rosenbrock supplies both its certificate box and sigma = 0.1.
  const std::string cfg2 = tmp_path("ptflow_verify_rb.cfg");
  write_file(cfg2, "objective.name = rosenbrock\nverify.kind = pl\nverify.grid = 31\n");
  std::ostringstream out2;
  EXPECT_EQ(cli::cmd_verify(cfg2, {}, out2), 0);
  // Unknown verify kinds are config errors.
  const std::string cfg3 = tmp_path("ptflow_verify_bad.cfg");
  write_file(cfg3, "objective.name = rosenbrock\nverify.kind = hessian\n");
  std::ostringstream out3;
  EXPECT_THROW((void)cli::cmd_verify(cfg3, {}, out3), ConfigError);
}

TEST(CmdPlot, RendersTrajectoryCsv) {
  const std::string cfg = tmp_path("ptflow_plot_src.cfg");
  const std::string csv = tmp_path("ptflow_plot_src.csv");
  write_file(cfg, std::string(kQuadraticRun) + "output.csv = " + csv + "\n");
  std::ostringstream out;
  ASSERT_EQ(cli::cmd_run(cfg, {}, out), 0);

  const std::string svg = tmp_path("ptflow_plot_out.svg");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::ostringstream pout;
  ASSERT_EQ(cli::cmd_plot(csv, svg, nan, pout), 0);
  const std::string s1 = slurp(svg);
  EXPECT_EQ(s1.rfind("<svg", 0), 0u);
  std::ostringstream pout2;
  ASSERT_EQ(cli::cmd_plot(csv, svg, nan, pout2), 0);
  EXPECT_EQ(s1, slurp(svg));  // deterministic re-render
  // An explicit horizon override is accepted too.
  std::ostringstream pout3;
  EXPECT_EQ(cli::cmd_plot(csv, tmp_path("ptflow_plot_out2.svg"), 7.0, pout3), 0);

  EXPECT_THROW((void)cli::cmd_plot(tmp_path("no_such_file.csv"), svg, nan, pout), std::exception);
  const std::string not_traj = tmp_path("ptflow_plot_bad.csv");
  write_file(not_traj, "x0,settling_time,final_error,envelope_holds,status\n1,2,3,true,ok\n");
  EXPECT_THROW((void)cli::cmd_plot(not_traj, svg, nan, pout), std::runtime_error);
}

}  // namespace
