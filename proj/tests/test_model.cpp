#include <catch2/catch_amalgamated.hpp>

#include "facts/model.hpp"

using namespace facts;

TEST_CASE("model: variable and row registry") {
  Model m("reg");
  int x = m.add_continuous("x", 0, 10);
  int b = m.add_binary("pick");
  CHECK(m.n_vars() == 2);
  CHECK(m.n_binary() == 1);
  CHECK(m.var_id("x") == x);
  CHECK(m.var(b).kind == VarKind::Binary);
  int r = m.add_row("cap", LinExpr().add(x, 1.0).add(b, 5.0), RowSense::LE, 8.0);
  CHECK(m.n_rows() == 1);
  CHECK(m.rows_with_tag("cap") == std::vector<int>{r});
  CHECK(m.n_ineq_rows() == 1);
  CHECK(m.n_eq_rows() == 0);

  CHECK_THROWS_AS(m.add_continuous("x", 0, 1), Error);
  CHECK_THROWS_AS(m.add_row("bad", LinExpr().add(99, 1.0), RowSense::LE, 0.0), Error);
  LinExpr e;
  CHECK_THROWS_AS(e.add(x, std::nan("")), Error);
  CHECK_THROWS_AS(m.add_row("bad", LinExpr().add(x, 1.0), RowSense::LE,
                            std::numeric_limits<double>::quiet_NaN()),
                  Error);
}

TEST_CASE("model: one-variable LP with known dual") {
  Model m("tiny");
  int x = m.add_continuous("x", -kInf, kInf);
  m.add_row("floor", LinExpr().add(x, 1.0), RowSense::GE, 3.0);
  m.set_objective(LinExpr().add(x, 1.0));
  auto r = m.solve();
  REQUIRE(r.status == SolveStatus::Optimal);
  CHECK(r.objective == Catch::Approx(3.0));
  CHECK(r.var_values[x] == Catch::Approx(3.0));
  REQUIRE(r.has_duals);
  CHECK(r.row_duals[0] == Catch::Approx(1.0));
}

TEST_CASE("model: statuses surface") {
  Model m("infeas");
  int x = m.add_continuous("x", -kInf, kInf);
  m.add_row("lo", LinExpr().add(x, 1.0), RowSense::GE, 1.0);
  m.add_row("hi", LinExpr().add(x, 1.0), RowSense::LE, 0.0);
  m.set_objective(LinExpr().add(x, -1.0));
  CHECK(m.solve().status == SolveStatus::Infeasible);

  Model u("unbd");
  int y = u.add_continuous("y", -kInf, kInf);
  u.set_objective(LinExpr().add(y, 1.0));
  CHECK(u.solve().status == SolveStatus::Unbounded);
}

TEST_CASE("model: unknown backend is a configuration error") {
  Model m("b");
  m.add_continuous("x", 0, 1);
  SolveOptions opt;
  opt.backend = "commercial";
  CHECK_THROWS_AS(m.solve(opt), ConfigError);
}

TEST_CASE("model: duals present exactly when integrality is gone") {
  Model m("mix");
  int x = m.add_continuous("x", 0, 10);
  int u = m.add_binary("u");
  m.add_row("link", LinExpr().add(x, 1.0).add(u, -10.0), RowSense::LE, 0.0);
  m.set_objective(LinExpr().add(x, -1.0).add(u, 2.0));
  auto mip = m.solve();
  REQUIRE(mip.status == SolveStatus::Optimal);
  CHECK_FALSE(mip.has_duals);
  CHECK(mip.objective == Catch::Approx(-8.0));  // u=1, x=10

  auto lp = m.fix_and_dualize({{u, 1.0}});
  REQUIRE(lp.status == SolveStatus::Optimal);
  CHECK(lp.has_duals);
  CHECK(lp.objective == Catch::Approx(-8.0));

  Model m2 = m;
  CHECK_THROWS_AS(m2.fix_and_dualize({}), Error);  // u left unfixed
}

TEST_CASE("model: parameters fold into right-hand sides") {
  Model m("param");
  int x = m.add_continuous("x", 0, kInf);
  int d = m.add_parameter("delta");
  // x <= 2 + 5*delta  becomes  x - 5*delta <= 2
  m.add_row("cap", LinExpr().add(x, 1.0), RowSense::LE, 2.0, LinExpr().add(d, -5.0));
  m.set_objective(LinExpr().add(x, -1.0));
  CHECK_THROWS_AS(m.solve(), Error);  // unbound parameter

  auto off = m.instantiate({0.0}).solve();
  REQUIRE(off.status == SolveStatus::Optimal);
  CHECK(off.objective == Catch::Approx(-2.0));
  auto on = m.instantiate({1.0}).solve();
  CHECK(on.objective == Catch::Approx(-7.0));
}

TEST_CASE("model: dump is deterministic and tagged") {
  Model m("dump");
  int x = m.add_continuous("flow_line7", -kInf, kInf);
  int u = m.add_binary("u_line7");
  m.add_row("eq12f_line7", LinExpr().add(x, 1.0).add(u, -2.5), RowSense::EQ, 4.0);
  m.set_objective(LinExpr().add(x, 10.0));
  const std::string a = m.write_lp();
  const std::string b = m.write_lp();
  CHECK(a == b);
  CHECK(a.find("eq12f_line7:") != std::string::npos);
  CHECK(a.find("Binaries") != std::string::npos);
  CHECK(a.find("u_line7") != std::string::npos);
  CHECK(a.find("Minimize") != std::string::npos);
}

TEST_CASE("model: strong duality is asserted on every dual extraction") {
  // solve a batch of random LPs through the model layer; the internal
  // certificate must never fire on correct solves
  Rng rng(42);
  for (int trial = 0; trial < 40; ++trial) {
    Model m("rand");
    const int n = 3 + rng.uniform_int(8);
    std::vector<int> ids;
    std::vector<double> x0;
    for (int j = 0; j < n; ++j) {
      const double v = rng.uniform(-4, 4);
      x0.push_back(v);
      ids.push_back(m.add_continuous("v" + std::to_string(j), v - rng.uniform(0.1, 6),
                                     v + rng.uniform(0.1, 6)));
    }
    const int rows = 2 + rng.uniform_int(10);
    for (int i = 0; i < rows; ++i) {
      LinExpr e;
      double act = 0;
      for (int j = 0; j < n; ++j) {
        if (rng.uniform01() < 0.5) continue;
        const double c = rng.uniform(-2, 2);
        e.add(ids[j], c);
        act += c * x0[j];
      }
      const double slack = rng.uniform(0, 5);
      const int kind = rng.uniform_int(3);
      if (e.empty()) continue;
      if (kind == 0) m.add_row("r" + std::to_string(i), e, RowSense::LE, act + slack);
      else if (kind == 1) m.add_row("r" + std::to_string(i), e, RowSense::GE, act - slack);
      else m.add_row("r" + std::to_string(i), e, RowSense::EQ, act);
    }
    LinExpr obj;
    for (int j = 0; j < n; ++j) obj.add(ids[j], rng.uniform(-1, 1));
    m.set_objective(obj);
    auto r = m.solve();
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.has_duals);
  }
}

TEST_CASE("model: row counts for accounting") {
  Model m("counts");
  int a = m.add_continuous("a", 0, 1);
  int b = m.add_binary("b");
  m.add_row("e1", LinExpr().add(a, 1.0), RowSense::EQ, 0.5);
  m.add_row("i1", LinExpr().add(a, 1.0).add(b, 1.0), RowSense::LE, 1.0);
  m.add_row("i2", LinExpr().add(b, 1.0), RowSense::GE, 0.0);
  CHECK(m.n_vars() == 2);
  CHECK(m.n_binary() == 1);
  CHECK(m.n_eq_rows() == 1);
  CHECK(m.n_ineq_rows() == 2);
}
