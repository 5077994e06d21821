#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>

#include "chiralxfer/harness.hpp"

using namespace chiralxfer;

TEST_CASE("registry covers all experiments and defaults validate") {
  const auto& reg = experiment_registry();
  REQUIRE(reg.size() == 14);
  std::set<std::string> names;
  for (const auto& e : reg) {
    names.insert(e.name);
    CHECK_FALSE(e.reproduces.empty());
    INFO(e.name);
    auto report = validate_config(Json{{"experiment", e.name}});
    CHECK(report.empty());
  }
  CHECK(names.size() == reg.size());
  CHECK(names.count("fig1c") == 1);
  CHECK(names.count("noise_leakage") == 1);
  CHECK_THROWS_AS(experiment_info("fig9z"), std::invalid_argument);
}

TEST_CASE("validation rejects bad configurations without running physics") {
  Json cfg{{"experiment", "fig2c"}, {"physics", {{"beta", 1.2}}}};
  auto report = validate_config(cfg);
  REQUIRE_FALSE(report.empty());

  Json wrong_engine{{"experiment", "beamsplitter4"}, {"engine", "mps"}};
  report = validate_config(wrong_engine);
  REQUIRE(report.size() == 1);
  CHECK(report[0].find("unsupported") != std::string::npos);

  Json empty_grid{{"experiment", "fig2a"},
                  {"sweep", {{"kappa_T", Json::array()},
                             {"n_th", {0.0}}}}};
  CHECK_FALSE(validate_config(empty_grid).empty());

  CHECK_FALSE(validate_config(Json{{"experiment", "nope"}}).empty());
  CHECK_FALSE(validate_config(Json::array()).empty());
}

TEST_CASE("config merging and dotted overrides") {
  Json cfg = default_config("fig2a");
  apply_override(cfg, "numerics.fock_cutoff=6");
  apply_override(cfg, "sweep.n_th=[0.5]");
  apply_override(cfg, "format=json");
  CHECK(cfg["numerics"]["fock_cutoff"] == 6);
  CHECK(cfg["sweep"]["n_th"] == Json({0.5}));
  CHECK(cfg["format"] == "json");
  CHECK_THROWS_AS(apply_override(cfg, "no_equals_sign"),
                  std::invalid_argument);

  Json user{{"experiment", "fig2a"},
            {"numerics", {{"fock_cutoff", 4}}}};
  Json resolved = resolve_config(user);
  CHECK(resolved["numerics"]["fock_cutoff"] == 4);
  CHECK(resolved["numerics"]["dt_factor"] == 0.01);  // untouched default
  CHECK(resolved["sweep"]["kappa_T"].size() == 7);
}

TEST_CASE("csv emission: header, 12 significant digits, stability") {
  std::vector<ResultRow> rows;
  CHECK(emit_string(rows, "csv") == "experiment,fidelity\n");

  ResultRow r;
  r.experiment = "demo";
  r.params = Json{{"a", 0.5}, {"name", "x"}};
  r.fidelity = 0.123456789012345;
  r.diagnostics = Json{{"d", 2}};
  rows.push_back(r);
  std::string out = emit_string(rows, "csv");
  CHECK(out == "experiment,a,name,fidelity,d\ndemo,0.5,x,0.123456789012,2\n");
  CHECK(emit_string(rows, "csv") == out);  // byte-stable
  CHECK_THROWS_AS(emit_string(rows, "yaml"), std::invalid_argument);
}

TEST_CASE("json emission round-trips losslessly") {
  ResultRow r;
  r.experiment = "demo";
  r.params = Json{{"P", 0.12}, {"code", "parity"}};
  r.fidelity = 0.987654321;
  r.diagnostics = Json{{"note", "ok"}, {"k", 3.25}};
  std::vector<ResultRow> rows{r, r};
  rows[1].fidelity = 1.0;

  Json j = Json::parse(emit_string(rows, "json"));
  auto back = rows_from_json(j);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == rows[0]);
  CHECK(back[1] == rows[1]);
}

TEST_CASE("noise_leakage experiment: rows in sweep order, quadrature "
          "matches closed forms") {
  auto rows = run_experiment(Json{{"experiment", "noise_leakage"}});
  REQUIRE(rows.size() == 12);
  CHECK(rows[0].params["family"] == "exp_pair");
  CHECK(rows[0].params["kappa_T"] == 5.0);
  CHECK(rows[1].params["kappa_T"] == 10.0);
  CHECK(rows[6].params["family"] == "const_exp_pair");
  for (const auto& r : rows) {
    // the clamp residual becomes visible once e^{-kT} nears the cutoff
    double tol = r.params["family"] == "exp_pair"
                     ? 1e-8
                     : (r.params["kappa_T"].get<double>() <= 20.0 ? 1e-6
                                                                  : 1e-3);
    CHECK(r.diagnostics["rel_error"].get<double>() < tol);
  }
  // leakage crosses 1e-4 near kappa_T = 17 for the exponential pair
  CHECK(rows[2].fidelity > 1e-4);   // kappa_T = 15
  CHECK(rows[4].fidelity < 1e-4);   // kappa_T = 20
}

TEST_CASE("parallel execution preserves sweep order and values") {
  Json cfg{{"experiment", "noise_leakage"}};
  auto serial = run_experiment(cfg, 1);
  auto parallel = run_experiment(cfg, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i)
    CHECK(serial[i] == parallel[i]);
  CHECK(emit_string(serial, "csv") == emit_string(parallel, "csv"));
}

TEST_CASE("jobs resolution falls back to the environment") {
  CHECK(resolve_jobs(3) == 3);
  setenv("CHIRALXFER_JOBS", "5", 1);
  CHECK(resolve_jobs(0) == 5);
  unsetenv("CHIRALXFER_JOBS");
  CHECK(resolve_jobs(0) == 1);
}

TEST_CASE("mismatch experiment: the two detuning routes agree") {
  Json cfg{{"experiment", "mismatch"},
           {"physics", {{"n_th", 0.0}}},
           {"numerics", {{"fock_cutoff", 2}}},
           {"sweep", {{"delta_over_kappa", {0.0, 0.025}},
                      {"route", {"hamiltonian", "phase"}}}}};
  auto rows = run_experiment(cfg);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].fidelity > 0.99);  // no mismatch
  CHECK(std::abs(rows[0].fidelity - rows[1].fidelity) < 1e-8);
  CHECK(std::abs(rows[2].fidelity - rows[3].fidelity) < 1e-8);
  CHECK(rows[2].fidelity < rows[0].fidelity);
}

TEST_CASE("beamsplitter experiment reproduces the rotation at pi/4") {
  auto rows = run_experiment(Json{{"experiment", "beamsplitter4"}});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].diagnostics["pop_2"].get<double>() ==
        Catch::Approx(1.0).margin(1e-3));
  CHECK(rows[1].diagnostics["pop_2"].get<double>() ==
        Catch::Approx(0.5).margin(1e-3));
  CHECK(rows[1].diagnostics["coherence_re"].get<double>() ==
        Catch::Approx(0.5).margin(1e-3));
  CHECK(rows[1].diagnostics["max_abs_error"].get<double>() < 1e-3);
}

TEST_CASE("loss-code experiment: corrected beats bare at moderate loss") {
  Json cfg{{"experiment", "fig2e"},
           {"sweep", {{"code", {"none", "parity"}}, {"P", {0.0, 0.1}}}}};
  auto rows = run_experiment(cfg);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].fidelity == Catch::Approx(1.0).margin(1e-6));  // none, P=0
  CHECK(rows[3].fidelity > rows[1].fidelity);  // parity wins at P=0.1
}

TEST_CASE("small end-to-end run is deterministic") {
  Json cfg{{"experiment", "fig1c"},
           {"sweep", {{"setup", {"cavity", "qubit"}}, {"n_th", {0.25}}}},
           {"numerics", {{"fock_cutoff", 4}, {"dt_factor", 0.02}}}};
  auto a = run_experiment(cfg);
  auto b = run_experiment(cfg);
  REQUIRE(a.size() == 2);
  CHECK(a[0].params["setup"] == "cavity");
  CHECK(a[0].fidelity > 0.9);
  CHECK(a[1].fidelity < a[0].fidelity);  // qubit route suffers from noise
  CHECK(emit_string(a, "csv") == emit_string(b, "csv"));
  CHECK(emit_string(a, "json") == emit_string(b, "json"));
}

TEST_CASE("closed sweep helper rejects empty grids") {
  ClosedSpec spec;
  spec.pulses.family = PulseFamily::exp_pair;
  spec.pulses.kappa_max = 0.3;
  spec.pulses.t_i = -40.0;
  spec.pulses.t_f = 40.0;
  CHECK_THROWS_AS(closed_fidelity_sweep(spec, {}, {0.0}),
                  std::invalid_argument);
}
