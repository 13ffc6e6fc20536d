#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "jbflow/metric.hpp"

using namespace jbflow;

namespace {

std::vector<std::vector<int>> structures_up_to(int nmax) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  auto rec = [&](auto&& self, int left) -> void {
    if (!cur.empty()) out.push_back(cur);
    for (int m = 1; m <= left; ++m) {
      cur.push_back(m);
      self(self, left - m);
      cur.pop_back();
    }
  };
  rec(rec, nmax);
  return out;
}

DefiningField jb3_linear(double eps1) {
  ExprEnv env{BlockStructure({3}), {{"eps1", eps1}}};
  return DefiningField(env, std::vector<std::string>{"u1 - eps1*u1", "u2", "u3"});
}

ThetaField jb3_family_field(double eps1) {
  ExprEnv env{BlockStructure({3}), {}};
  auto f1 = parse("2 + sin(u1)");
  auto f2 = parse("u1*u1 + u2*(1 + 0.5*u1) + cos(u2)");
  auto f3 = parse("u1 + 0.7*u2*u2 + exp(0.3*u1)");
  return expr_theta_field(env, jb3_theta_family(env, f1, f2, f3, eps1));
}

std::vector<double> random_point(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> d(1.0, 2.0);
  std::vector<double> p(n);
  for (auto& x : p) x = d(rng);
  return p;
}

}  // namespace

TEST_CASE("Hankel metric layout and inverse") {
  BlockStructure b3({3});
  auto h = hankel_metric(b3, std::vector<double>{2, 5, 7});
  CHECK(h.g == std::vector<std::vector<double>>{{2, 5, 7}, {5, 7, 0}, {7, 0, 0}});

  auto anti = hankel_metric(b3, std::vector<double>{0, 0, 1});
  CHECK(anti.g == std::vector<std::vector<double>>{{0, 0, 1}, {0, 1, 0}, {1, 0, 0}});
  CHECK(anti.g_inv == anti.g);

  BlockStructure b11({1, 1});
  auto d = hankel_metric(b11, std::vector<double>{3, 4});
  CHECK(d.g == std::vector<std::vector<double>>{{3, 0}, {0, 4}});
  CHECK(d.g_inv[0][0] == Catch::Approx(1.0 / 3));

  CHECK_THROWS_AS(hankel_metric(b3, std::vector<double>{1, 1, 0}), singular_metric);
}

TEST_CASE("assembled inverse equals the matrix inverse for every structure up to n=6") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> d(-2, 2);
  for (const auto& sizes : structures_up_to(6)) {
    BlockStructure bs(sizes);
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<double> theta(bs.n());
      for (auto& x : theta) {
        x = d(rng);
        if (std::abs(x) < 0.2) x += 0.5;
      }
      auto h = hankel_metric(bs, theta);
      for (int i = 0; i < bs.n(); ++i)
        for (int j = 0; j < bs.n(); ++j) {
          double acc = 0;
          for (int k = 0; k < bs.n(); ++k) acc += h.g[i][k] * h.g_inv[k][j];
          REQUIRE(std::abs(acc - (i == j ? 1.0 : 0.0)) <= 1e-12);
        }
    }
  }
}

TEST_CASE("Hankel times same-block Toeplitz is always symmetric") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> d(-2, 2);
  for (const auto& sizes : structures_up_to(4)) {
    BlockStructure bs(sizes);
    std::vector<double> theta(bs.n()), x(bs.n());
    for (auto& v : theta) v = d(rng) + 3;
    for (auto& v : x) v = d(rng);
    auto h = hankel_metric(bs, theta);
    CHECK(dn1_residual(h.g, mult_operator(bs, x)) <= 1e-13);
  }
  // negative control: identity metric with a non-symmetric operator
  std::vector<std::vector<double>> id{{1, 0}, {0, 1}};
  std::vector<std::vector<double>> v{{1, 2}, {0, 1}};
  CHECK(dn1_residual(id, v) > 1.0);
}

TEST_CASE("block Levi-Civita formula agrees with the dense textbook formula") {
  std::mt19937_64 rng(10);
  for (const auto& sizes : {std::vector<int>{3}, {2, 1}, {2, 2}, {1, 1, 1}, {3, 2}}) {
    BlockStructure bs(sizes);
    ExprEnv env{bs, {}};
    // a generic smooth nondegenerate generator field
    std::vector<ExprPtr> comps;
    for (int s = 1; s <= bs.n(); ++s) {
      std::string src = "3 + sin(" + std::to_string(0.3 * s) + "*u1) + 0.2*u" + std::to_string(s);
      if (s >= 2) src += " + 0.1*u" + std::to_string(s - 1) + "*u" + std::to_string(s);
      comps.push_back(parse(src));
    }
    auto th = expr_theta_field(env, comps);
    for (int rep = 0; rep < 5; ++rep) {
      auto p = random_point(rng, bs.n());
      auto a = levi_civita(th, p);
      auto b = levi_civita_dense(th, p);
      for (int i = 0; i < bs.n(); ++i)
        for (int j = 0; j < bs.n(); ++j)
          for (int k = 0; k < bs.n(); ++k) REQUIRE(std::abs(a(i, j, k) - b(i, j, k)) <= 1e-11);
    }
  }
}

TEST_CASE("metric compatibility residuals vanish on the closed-form family") {
  std::mt19937_64 rng(11);
  for (double eps1 : {3.0, 1.0}) {
    auto df = jb3_linear(eps1);
    auto th = jb3_family_field(eps1);
    for (int rep = 0; rep < 10; ++rep) {
      auto p = random_point(rng, 3);
      CHECK(check_dn1(th, df, p) <= 1e-12);
      CHECK(check_dn2(th, df, p) <= 1e-8);
      CHECK(check_ch_sym(th, df, p) <= 1e-8);
      CHECK(check_eq_for_g(th, df, p) <= 1e-8);
      CHECK(check_reduced_eq_for_g(th, df, p) <= 1e-8);
      CHECK(theta_zero_pattern_residual(th, p).residual <= 1e-9);
    }
  }
  SECTION("paper point (1,2,3) with eps1 = 3") {
    auto df = jb3_linear(3.0);
    auto th = jb3_family_field(3.0);
    CHECK(check_dn2(th, df, {1, 2, 3}) <= 1e-8);
  }
}

TEST_CASE("constant generators with a constant field give zero residuals") {
  ExprEnv env{BlockStructure({3}), {}};
  DefiningField df(env, std::vector<std::string>{"3", "5", "7"});
  auto th = expr_theta_field(env, {parse("2"), parse("1"), parse("4")});
  CHECK(check_dn2(th, df, {1.2, 1.5, 1.8}) <= 1e-14);
  CHECK(check_ch_sym(th, df, {1.2, 1.5, 1.8}) <= 1e-14);
}

TEST_CASE("generators unrelated to the field are flagged") {
  auto df = jb3_linear(3.0);
  ExprEnv env{BlockStructure({3}), {}};
  auto th = expr_theta_field(env, {parse("1 + u3*u3"), parse("2 + u1*u2"), parse("3 + sin(u2 + u3)")});
  std::vector<double> p{1.2, 1.4, 1.6};
  CHECK(check_dn2(th, df, p) > 1e-3);
  CHECK(check_ch_sym(th, df, p) > 1e-3);
  CHECK(check_eq_for_g(th, df, p) > 1e-3);
}

TEST_CASE("equivalent formulations agree in both directions") {
  // positive: the closed-form family passes all three; negative: a generic
  // generator field fails all three.  The three conditions never disagree.
  std::mt19937_64 rng(12);
  auto df = jb3_linear(3.0);
  auto good = jb3_family_field(3.0);
  ExprEnv env{BlockStructure({3}), {}};
  auto bad = expr_theta_field(env, {parse("1 + u3*u3"), parse("2 + u1*u2"), parse("3 + sin(u2 + u3)")});
  for (int rep = 0; rep < 10; ++rep) {
    auto p = random_point(rng, 3);
    for (const auto& th : {good, bad}) {
      const bool dn2_ok = check_dn2(th, df, p) <= 1e-7;
      const bool ch_ok = check_ch_sym(th, df, p) <= 1e-7;
      const bool eq_ok = check_eq_for_g(th, df, p) <= 1e-7;
      CHECK(dn2_ok == ch_ok);
      CHECK(ch_ok == eq_ok);
    }
  }
}

TEST_CASE("generator zero patterns and connection zero patterns imply each other") {
  // On the family both pattern sets vanish; perturbing theta_2 with a
  // u3^2 term breaks the generator pattern and the derived connection
  // difference simultaneously.
  auto df = jb3_linear(3.0);
  auto good = jb3_family_field(3.0);
  std::vector<double> p{1.3, 1.6, 1.2};
  CHECK(theta_zero_pattern_residual(good, p).residual <= 1e-10);
  CHECK(check_ch_sym(good, df, p) <= 1e-8);

  ExprEnv env{BlockStructure({3}), {}};
  auto f1 = parse("2 + sin(u1)");
  auto f2 = parse("u1*u1 + u2");
  auto f3 = parse("u1");
  auto comps = jb3_theta_family(env, f1, f2, f3, 3.0);
  comps[2] = Expr::make(Expr::Kind::Add, {comps[2], parse("0.1*u2*u3")});
  auto bad = expr_theta_field(env, comps);
  CHECK(theta_zero_pattern_residual(bad, p).residual > 1e-3);
  CHECK(check_ch_sym(bad, df, p) > 1e-3);
}

TEST_CASE("curvature anchor of the generator metric") {
  std::mt19937_64 rng(13);
  for (double eps1 : {1.0, 3.0}) {
    auto th = jb3_family_field(eps1);
    for (int rep = 0; rep < 10; ++rep) {
      auto p = random_point(rng, 3);
      auto r = riemann_of_metric(th, p);
      CHECK(r(0, 1, 0, 1) == Catch::Approx(eps1 * (eps1 - 3.0) / (9.0 * p[1] * p[1])).margin(1e-8));
    }
  }
  // eps1 = 1 at u2 = 3 gives -2/81
  ExprEnv env{BlockStructure({3}), {}};
  auto th1 = expr_theta_field(env, jb3_theta_family(env, parse("1"), parse("0.2*u1 + 0.1*u2"), parse("u1"), 1.0));
  auto r = riemann_of_metric(th1, {1.0, 3.0, 1.5});
  CHECK(r(0, 1, 0, 1) == Catch::Approx(-2.0 / 81.0).margin(1e-10));
}

TEST_CASE("flat family") {
  ExprEnv env{BlockStructure({3}), {}};
  auto f1 = parse("2 + sin(u1)");
  auto f4 = parse("u1");
  auto f5 = parse("0.5*u1*u1");
  auto f6 = parse("1 + u1");
  auto f7 = parse("cos(u1)");
  auto th = expr_theta_field(env, jb3_flat_family(env, f1, f4, f5, f6, f7));
  std::mt19937_64 rng(14);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = random_point(rng, 3);
    CHECK(max_abs_riemann(riemann_of_metric(th, p)) <= 1e-8);
  }
  SECTION("trivial data") {
    auto th0 = expr_theta_field(env, jb3_flat_family(env, parse("1"), parse("0"), parse("0"), parse("0"), parse("0")));
    CHECK(max_abs_riemann(riemann_of_metric(th0, {1.3, 1.8, 1.1})) <= 1e-10);
  }
  SECTION("generic F2 at eps1 = 3 is caught by the mixed component") {
    auto generic = expr_theta_field(env, jb3_theta_family(env, f1, parse("u1 + u2"), parse("u1"), 3.0));
    auto r = riemann_of_metric(generic, {1.2, 1.5, 1.7});
    CHECK(std::abs(r(0, 0, 0, 1)) > 1e-3);
  }
  SECTION("eps1 = 1 cannot be flat") {
    auto th1 = expr_theta_field(env, jb3_theta_family(env, f1, parse("u1 + u2"), parse("u1"), 1.0));
    auto r = riemann_of_metric(th1, {1.2, 1.5, 1.7});
    CHECK(std::abs(r(0, 1, 0, 1) - (1.0 * (1.0 - 3.0) / (9.0 * 1.5 * 1.5))) <= 1e-9);
    CHECK(std::abs(r(0, 1, 0, 1)) > 1e-3);
  }
}

TEST_CASE("Hamiltonian necessary conditions on the defining field") {
  {  // eps2 != 0 trips the dependence conditions
    ExprEnv env{BlockStructure({3}), {{"eps1", 3.0}, {"eps2", 0.5}}};
    DefiningField df(env, std::vector<std::string>{"u1 - (eps1*u1 + eps2*u2)", "u2", "u3"});
    CHECK(jb3_necessary_conditions_residual(df, {1.1, 1.4, 1.7}) == Catch::Approx(0.5));
  }
  {
    auto df = jb3_linear(3.0);
    CHECK(jb3_necessary_conditions_residual(df, {1.1, 1.4, 1.7}) <= 1e-15);
  }
}
