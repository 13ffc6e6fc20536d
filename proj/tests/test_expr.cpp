#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "jbflow/expr.hpp"

using namespace jbflow;

namespace {

ExprEnv env3(std::map<std::string, double> params = {}) {
  return ExprEnv{BlockStructure({3}), std::move(params)};
}

double eval_at(const std::string& src, const ExprEnv& env, std::vector<double> p) {
  return evaluate(parse(src), env, p);
}

}  // namespace

TEST_CASE("parsing and evaluation basics") {
  auto env = env3({{"eps1", 3.0}});
  CHECK(eval_at("u1 - 3*u1", env, {2, 0, 0}) == Catch::Approx(-4.0));
  CHECK(eval_at("u2^(-4)", env, {0, 2, 0}) == Catch::Approx(0.0625));
  CHECK(eval_at("u2^(-4/3*eps1)", env, {0, 2, 0}) == Catch::Approx(std::pow(2.0, -4.0)));
  CHECK(eval_at("2^3^2", env, {0, 0, 0}) == Catch::Approx(512.0));  // right-associative
  CHECK(eval_at("-u1^2", env, {3, 0, 0}) == Catch::Approx(-9.0));   // ^ binds tighter than unary -
  CHECK(eval_at("1 - 2 - 3", env, {0, 0, 0}) == Catch::Approx(-4.0));
  CHECK(eval_at("2*u1 + u2*u3", env, {1, 2, 3}) == Catch::Approx(8.0));
  CHECK(eval_at("pow(u1, 2) + sqrt(u2)", env, {3, 4, 0}) == Catch::Approx(11.0));
  CHECK(eval_at("u2_1", env, {0, 5, 0}) == 5.0);  // in-block alias for flat u2
  CHECK(eval_at(" sin( u1 ) ", env, {0.5, 0, 0}) == Catch::Approx(std::sin(0.5)));
  CHECK(eval_at("0^0", env, {0, 0, 0}) == 1.0);
}

TEST_CASE("parse errors carry offsets; unknown names are rejected") {
  CHECK_THROWS_AS(parse(""), parse_error);
  CHECK_THROWS_AS(parse("u1 + "), parse_error);
  CHECK_THROWS_AS(parse("(u1"), parse_error);
  CHECK_THROWS_MATCHES(parse("F1(u1)"), parse_error,
                       Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("unknown function")));
  try {
    parse("u1 + @");
    FAIL("expected parse error");
  } catch (const parse_error& e) {
    CHECK(e.offset == 5);
  }
  auto env = env3();
  CHECK_THROWS_AS(evaluate(parse("eps9"), env, std::vector<double>{0, 0, 0}), bind_error);
  CHECK_THROWS_AS(bind_check(parse("u7"), env), bind_error);
  CHECK_NOTHROW(bind_check(parse("u3_1 + 2"), env));
  CHECK_THROWS_AS(bind_check(parse("u4_1"), env), std::out_of_range);
}

TEST_CASE("domain errors name the offending subexpression") {
  auto env = env3();
  CHECK_THROWS_MATCHES(eval_at("log(u2)", env, {0, 0, 0}), domain_error,
                       Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("log(u2)")));
  CHECK_THROWS_AS(eval_at("1/(u1 - u1)", env, {1, 0, 0}), domain_error);
  CHECK_THROWS_AS(eval_at("(-2)^(1/2)", env, {0, 0, 0}), domain_error);
}

TEST_CASE("symbolic differentiation") {
  auto env = env3({{"eps1", 2.0}});
  std::vector<double> p{1.3, 0.7, -0.4};

  auto d = [&](const std::string& src, int var) { return differentiate(parse(src), env, var); };

  CHECK(evaluate(d("u2^2", 2), env, p) == Catch::Approx(2 * p[1]));
  CHECK(print(d("u2^2", 2)) == "2*u2^1");
  CHECK(evaluate(d("sin(u1)*u3", 1), env, p) == Catch::Approx(std::cos(p[0]) * p[2]));
  CHECK(d("u1 - eps1*u1", 3)->is_number(0));
  CHECK(evaluate(d("u1/u2", 2), env, p) == Catch::Approx(-p[0] / (p[1] * p[1])));
  CHECK(evaluate(d("u2^eps1", 2), env, p) == Catch::Approx(2.0 * p[1]));
  CHECK(evaluate(d("exp(u1^2)", 1), env, p) == Catch::Approx(2 * p[0] * std::exp(p[0] * p[0])));
}

TEST_CASE("free variables after folding") {
  auto env = env3({{"eps1", 1.0}});
  CHECK(free_variables(parse("u1 + u2*u2"), env) == std::set<int>{1, 2});
  CHECK(free_variables(parse("eps1"), env).empty());
  CHECK(free_variables(parse("u3*0 + u2"), env) == std::set<int>{2});
}

TEST_CASE("jet evaluation examples") {
  auto env = env3({{"eps1", 3.0}});
  Jet j = eval_jet(parse("u1*u2"), env, {2, 5, 0}, 1);
  CHECK(j.value() == Catch::Approx(10.0));
  CHECK(j.grad(0) == Catch::Approx(5.0));
  CHECK(j.grad(1) == Catch::Approx(2.0));

  Jet h = eval_jet(parse("u1*u2^2 + sin(u3)"), env, {1, 2, 0.3}, 2);
  CHECK(h.hess(0, 1) == Catch::Approx(4.0));
  CHECK(h.hess(1, 1) == Catch::Approx(2.0));
  CHECK(h.hess(2, 2) == Catch::Approx(-std::sin(0.3)));

  CHECK(eval_jet(parse("u2^(-4/3*eps1)"), env, {0, 2, 0}, 0).value() == Catch::Approx(std::pow(2.0, -4.0)));
  CHECK_THROWS_AS(eval_jet(parse("log(u2)"), env, {1, 0, 1}, 0), domain_error);
}

namespace {

// random expression generator for the property tests
ExprPtr random_expr(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, 9);
  std::uniform_real_distribution<double> num(0.2, 2.5);
  std::uniform_int_distribution<int> coord(1, 3);
  if (depth == 0) {
    switch (pick(rng) % 3) {
      case 0: return Expr::make_number(num(rng));
      case 1: return Expr::make_param("eps1");
      default: return Expr::make_coord(coord(rng), 0);
    }
  }
  auto a = random_expr(rng, depth - 1);
  auto b = random_expr(rng, depth - 1);
  switch (pick(rng)) {
    case 0: return Expr::make(Expr::Kind::Add, {a, b});
    case 1: return Expr::make(Expr::Kind::Sub, {a, b});
    case 2: return Expr::make(Expr::Kind::Mul, {a, b});
    case 3: return Expr::make(Expr::Kind::Neg, {a});
    case 4: return Expr::make(Expr::Kind::Call, {a}, "sin");
    case 5: return Expr::make(Expr::Kind::Call, {a}, "cos");
    case 6: return Expr::make(Expr::Kind::Call, {a}, "exp");
    case 7: return Expr::make(Expr::Kind::Pow, {a, Expr::make_number(double(pick(rng) % 4))});
    case 8: return Expr::make(Expr::Kind::Div, {a, Expr::make(Expr::Kind::Add, {b, Expr::make_number(3.0)})});
    default: return Expr::make(Expr::Kind::Mul, {a, b});
  }
}

}  // namespace

TEST_CASE("gradients match central finite differences on random expressions") {
  auto env = env3({{"eps1", 1.7}});
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> pd(0.4, 1.6);
  int checked = 0;
  for (int it = 0; it < 200; ++it) {
    auto e = random_expr(rng, 1 + it % 6);
    std::vector<double> p{pd(rng), pd(rng), pd(rng)};
    Jet j;
    try {
      j = eval_jet(e, env, p, 1);
    } catch (const domain_error&) {
      continue;
    }
    if (std::abs(j.value()) > 1e6) continue;  // steep exp stacks: FD step underflows
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
      auto pp = p, pm = p;
      pp[k] += h;
      pm[k] -= h;
      double fd;
      try {
        fd = (evaluate(e, env, pp) - evaluate(e, env, pm)) / (2 * h);
      } catch (const domain_error&) {
        continue;
      }
      const double scale = std::max({1.0, std::abs(fd), std::abs(j.grad(k))});
      if (std::abs(fd) > 1e5) continue;
      CHECK(std::abs(j.grad(k) - fd) / scale <= 1e-6);
      ++checked;
    }
  }
  CHECK(checked > 200);
}

TEST_CASE("second derivatives commute (Schwarz)") {
  auto env = env3({{"eps1", 0.9}});
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pd(0.4, 1.6);
  for (int it = 0; it < 60; ++it) {
    auto e = random_expr(rng, 1 + it % 5);
    std::vector<double> p{pd(rng), pd(rng), pd(rng)};
    for (int a = 1; a <= 3; ++a)
      for (int b = 1; b <= 3; ++b) {
        auto dab = differentiate(differentiate(e, env, a), env, b);
        auto dba = differentiate(differentiate(e, env, b), env, a);
        double va, vb;
        try {
          va = evaluate(dab, env, p);
          vb = evaluate(dba, env, p);
        } catch (const domain_error&) {
          continue;
        }
        if (std::abs(va) > 1e8) continue;
        CHECK(std::abs(va - vb) <= 1e-10 * std::max(1.0, std::abs(va)));
      }
  }
}

TEST_CASE("print -> parse -> print is a fixed point") {
  std::mt19937_64 rng(31337);
  for (int it = 0; it < 300; ++it) {
    auto e = random_expr(rng, 1 + it % 6);
    const std::string s1 = print(e);
    const std::string s2 = print(parse(s1));
    CHECK(s1 == s2);
  }
  for (const std::string s : {"u1 - 3*u1", "u2^(-4)", "-(u1 + u2)/u3", "sin(u1)*cos(u2)^2",
                              "pow(u1, 2.5) + 1e-05", "u2_1*u1 - -u3"}) {
    CHECK(print(parse(print(parse(s)))) == print(parse(s)));
  }
}
