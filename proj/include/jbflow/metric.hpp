#pragma once

#include <functional>
#include <vector>

#include "jbflow/blocks.hpp"
#include "jbflow/connection.hpp"
#include "jbflow/expr.hpp"

namespace jbflow {

struct singular_metric : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Block-Hankel metric built from the generators theta:
/// g_{i(a)j(b)} = delta_{ab(} theta_{(i+j-1)(a)}, entries past the block size
/// are zero; the inverse has the reversed-Hankel form gbar^{(i+j-m_a)(a)}.
template <class T>
struct HankelMetric {
  std::vector<std::vector<T>> g;
  std::vector<std::vector<T>> g_inv;
  std::vector<T> gbar;  // flat per-block list gbar^{i(a)}
};

template <class T>
HankelMetric<T> hankel_metric(const BlockStructure& bs, const std::vector<T>& theta) {
  if (int(theta.size()) != bs.n()) throw std::invalid_argument("hankel_metric: theta length must equal n");
  const int n = bs.n();
  HankelMetric<T> h;
  h.g.assign(n, std::vector<T>(n, T(0)));
  h.g_inv.assign(n, std::vector<T>(n, T(0)));
  h.gbar.assign(n, T(0));
  for (int a = 1; a <= bs.blocks(); ++a) {
    const int m = bs.size(a);
    if (std::abs(scalar_value(theta[bs.flat0(m, a)])) < 1e-14)
      throw singular_metric("theta_" + std::to_string(m) + "(" + std::to_string(a) + ") vanishes: metric is singular");
    for (int i = 1; i <= m; ++i)
      for (int j = 1; j <= m; ++j)
        if (i + j - 1 <= m) h.g[bs.flat0(i, a)][bs.flat0(j, a)] = theta[bs.flat0(i + j - 1, a)];
    // solve the lower-triangular Toeplitz system V gbar = e with
    // V^i_j = theta_{(m+j-i)(a)} for j <= i
    for (int i = 1; i <= m; ++i) {
      T acc = i == 1 ? T(1) : T(0);
      for (int j = 1; j < i; ++j) acc -= theta[bs.flat0(m + j - i, a)] * h.gbar[bs.flat0(j, a)];
      h.gbar[bs.flat0(i, a)] = acc / theta[bs.flat0(m, a)];
    }
    for (int i = 1; i <= m; ++i)
      for (int j = 1; j <= m; ++j)
        if (i + j - m >= 1) h.g_inv[bs.flat0(i, a)][bs.flat0(j, a)] = h.gbar[bs.flat0(i + j - m, a)];
  }
  return h;
}

/// Metric generators as a field: jets of theta_1..theta_n at a point.
struct ThetaField {
  BlockStructure bs;
  std::function<std::vector<Jet>(const std::vector<double>&, int)> eval;

  std::vector<Jet> operator()(const std::vector<double>& p, int order) const { return eval(p, order); }
  std::vector<double> values(const std::vector<double>& p) const {
    auto js = eval(p, 0);
    std::vector<double> v(js.size());
    for (std::size_t i = 0; i < js.size(); ++i) v[i] = js[i].value();
    return v;
  }
};

inline ThetaField expr_theta_field(const ExprEnv& env, std::vector<ExprPtr> comps) {
  if (int(comps.size()) != env.bs.n()) throw std::invalid_argument("theta field needs n components");
  for (const auto& c : comps) bind_check(c, env);
  return ThetaField{env.bs, [env, comps](const std::vector<double>& p, int order) {
                      std::vector<Jet> out;
                      out.reserve(comps.size());
                      for (const auto& c : comps) out.push_back(eval_jet(c, env, p, order));
                      return out;
                    }};
}

namespace detail {

template <class T>
struct ThetaTables {
  std::vector<T> theta;                // theta_s
  std::vector<std::vector<T>> dtheta;  // dtheta[s][j] = d_j theta_s
};

inline ThetaTables<double> theta_tables(const ThetaField& th, const std::vector<double>& p) {
  auto js = th(p, 1);
  const int n = int(js.size());
  ThetaTables<double> t;
  t.theta.resize(n);
  t.dtheta.assign(n, std::vector<double>(n));
  for (int s = 0; s < n; ++s) {
    t.theta[s] = js[s].value();
    for (int j = 0; j < n; ++j) t.dtheta[s][j] = js[s].grad(j);
  }
  return t;
}

inline ThetaTables<Jet> theta_tables_jet(const ThetaField& th, const std::vector<double>& p, int order) {
  auto js = th(p, order + 1);
  const int n = int(js.size());
  ThetaTables<Jet> t;
  t.theta.resize(n);
  t.dtheta.assign(n, std::vector<Jet>(n));
  for (int s = 0; s < n; ++s) {
    Jet v = Jet::constant(js[s].value(), n, order);
    if (order >= 1)
      for (int j = 0; j < n; ++j) v.grad_ref(j) = js[s].grad(j);
    t.theta[s] = v;
    for (int j = 0; j < n; ++j) {
      Jet d = Jet::constant(js[s].grad(j), n, order);
      if (order >= 1)
        for (int k = 0; k < n; ++k) d.grad_ref(k) = js[s].hess(j, k);
      t.dtheta[s][j] = d;
    }
  }
  return t;
}

}  // namespace detail

/// Levi-Civita symbols of the block-Hankel metric, from the closed per-block
/// contraction with gbar (no dense inversion).
template <class T>
Gamma<T> levi_civita_from_tables(const BlockStructure& bs, const detail::ThetaTables<T>& t) {
  const int n = bs.n();
  auto h = hankel_metric(bs, t.theta);
  Gamma<T> lc(n);
  for (int a = 1; a <= bs.blocks(); ++a) {
    const int ma = bs.size(a);
    for (int i = 1; i <= ma; ++i) {
      const int ia = bs.flat0(i, a);
      for (int jb = 0; jb < n; ++jb)
        for (int kb = jb; kb < n; ++kb) {
          const int b = bs.block_of0(jb), j = bs.pos_of0(jb);
          const int c = bs.block_of0(kb), k = bs.pos_of0(kb);
          T acc(0);
          for (int s = std::max(1, ma - i + 1); s <= ma; ++s) {
            const T& gb = h.gbar[bs.flat0(i + s - ma, a)];
            if (c == a && s + k - 1 <= ma) acc += gb * t.dtheta[bs.flat0(s + k - 1, a)][jb];
            if (b == a && j + s - 1 <= ma) acc += gb * t.dtheta[bs.flat0(j + s - 1, a)][kb];
            if (b == c && j + k - 1 <= bs.size(b)) acc -= gb * t.dtheta[bs.flat0(j + k - 1, b)][bs.flat0(s, a)];
          }
          lc.set_sym(ia, jb, kb, acc * T(0.5));
        }
    }
  }
  return lc;
}

inline Gamma<double> levi_civita(const ThetaField& th, const std::vector<double>& p) {
  return levi_civita_from_tables(th.bs, detail::theta_tables(th, p));
}
inline Gamma<Jet> levi_civita_jet(const ThetaField& th, const std::vector<double>& p, int order) {
  return levi_civita_from_tables(th.bs, detail::theta_tables_jet(th, p, order));
}

/// Textbook form 1/2 g^{lk}(d_i g_{kj} + d_j g_{ik} - d_k g_{ij}) computed by
/// dense solves; used as an independent cross-check of the block formula.
inline Gamma<double> levi_civita_dense(const ThetaField& th, const std::vector<double>& p) {
  const auto& bs = th.bs;
  const int n = bs.n();
  auto t = detail::theta_tables(th, p);
  auto h = hankel_metric(bs, t.theta);
  auto dg = [&](int m, int k, int j) -> double {  // d_m g_{kj}
    const int a = bs.block_of0(k);
    if (bs.block_of0(j) != a) return 0.0;
    const int idx = bs.pos_of0(k) + bs.pos_of0(j) - 1;
    if (idx > bs.size(a)) return 0.0;
    return t.dtheta[bs.flat0(idx, a)][m];
  };
  Gamma<double> lc(n);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0;
        for (int k = 0; k < n; ++k)
          acc += 0.5 * h.g_inv[l][k] * (dg(i, k, j) + dg(j, i, k) - dg(k, i, j));
        lc(l, i, j) = acc;
      }
  return lc;
}

// ---------------------------------------------------------------------------
// Residual checks for the Hamiltonian-compatibility conditions.

/// max |gV - (gV)^T|.
template <class T>
double dn1_residual(const std::vector<std::vector<T>>& g, const std::vector<std::vector<T>>& v) {
  const int n = int(g.size());
  double worst = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      T a(0), b(0);
      for (int k = 0; k < n; ++k) {
        a += g[i][k] * v[k][j];
        b += g[j][k] * v[k][i];
      }
      worst = std::max(worst, std::abs(scalar_value(a) - scalar_value(b)));
    }
  return worst;
}

inline double check_dn1(const ThetaField& th, const DefiningField& df, const std::vector<double>& p) {
  auto h = hankel_metric(df.bs(), th.values(p));
  return dn1_residual(h.g, mult_operator(df.bs(), df.values(p)));
}

/// max antisymmetrisation of the covariant derivative of V in the
/// Levi-Civita connection of the theta metric.
inline double check_dn2(const ThetaField& th, const DefiningField& df, const std::vector<double>& p) {
  const auto& bs = df.bs();
  const int n = bs.n();
  auto lc = levi_civita(th, p);
  auto t = df.tables(p);
  auto v = mult_operator(bs, t.x);
  double worst = 0;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j) {
        double acc = 0;
        for (int l = 0; l < n; ++l) {
          acc += bs.structure_constant0(k, j, l) * t.dx[l][i] - bs.structure_constant0(k, i, l) * t.dx[l][j];
          acc += lc(k, i, l) * v[l][j] - lc(k, j, l) * v[l][i];
        }
        worst = std::max(worst, std::abs(acc));
      }
  return worst;
}

/// Residual of both printed forms for the difference between the metric
/// connection and the canonical one:
///   LC^l_{ij} - G^l_{ij} = -g^{lk} c^m_{ij} (nabla~_k theta_m - (L_e g)_{km})
///                        = 1/2 g^{lk} c^m_{ij} (dtheta_{mk} + (L_e g)_{mk}).
inline double check_ch_sym(const ThetaField& th, const DefiningField& df, const std::vector<double>& p,
                           double reg_tol = 1e-8) {
  const auto& bs = df.bs();
  const int n = bs.n();
  auto t = detail::theta_tables(th, p);
  auto h = hankel_metric(bs, t.theta);
  auto lc = levi_civita_from_tables(bs, t);
  auto g = christoffel(df, p, reg_tol);
  auto e = unit_vector(bs);
  auto dgkm = [&](int m, int k, int j) -> double {
    const int a = bs.block_of0(k);
    if (bs.block_of0(j) != a) return 0.0;
    const int idx = bs.pos_of0(k) + bs.pos_of0(j) - 1;
    return idx <= bs.size(a) ? t.dtheta[bs.flat0(idx, a)][m] : 0.0;
  };
  auto lie_e_g = [&](int k, int m) {
    double acc = 0;
    for (int s = 0; s < n; ++s) acc += e[s] * dgkm(s, k, m);
    return acc;
  };
  double worst = 0;
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double lhs = lc(l, i, j) - g(l, i, j);
        double rhs_a = 0, rhs_b = 0;
        for (int k = 0; k < n; ++k)
          for (int m = 0; m < n; ++m) {
            if (bs.structure_constant0(m, i, j) == 0.0) continue;
            double nabla_theta = t.dtheta[m][k];
            for (int s = 0; s < n; ++s) nabla_theta -= lc(s, k, m) * t.theta[s];
            rhs_a += -h.g_inv[l][k] * (nabla_theta - lie_e_g(k, m));
            rhs_b += 0.5 * h.g_inv[l][k] * ((t.dtheta[k][m] - t.dtheta[m][k]) + lie_e_g(m, k));
          }
        worst = std::max({worst, std::abs(lhs - rhs_a), std::abs(lhs - rhs_b)});
      }
  return worst;
}

/// Residual of the first-order system for the generators in canonical
/// coordinates:
///   c^r_{hj} d_i theta_r + c^r_{ih} d_j theta_r - c^s_{ij} d_s theta_h
///     = 2 c^r_{hs} G^s_{ij} theta_r + c^s_{ij} c^r_{hs} e^t d_t theta_r.
inline double check_eq_for_g(const ThetaField& th, const DefiningField& df, const std::vector<double>& p,
                             double reg_tol = 1e-8) {
  const auto& bs = df.bs();
  const int n = bs.n();
  auto t = detail::theta_tables(th, p);
  auto g = christoffel(df, p, reg_tol);
  auto e = unit_vector(bs);
  double worst = 0;
  for (int h = 0; h < n; ++h)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0;
        for (int r = 0; r < n; ++r) {
          acc += bs.structure_constant0(r, h, j) * t.dtheta[r][i];
          acc += bs.structure_constant0(r, i, h) * t.dtheta[r][j];
          acc -= bs.structure_constant0(r, i, j) * t.dtheta[h][r];
          double cr = 0;
          for (int s = 0; s < n; ++s) cr += bs.structure_constant0(r, h, s) * g(s, i, j);
          acc -= 2.0 * cr * t.theta[r];
          for (int s = 0; s < n; ++s)
            if (bs.structure_constant0(s, i, j) != 0.0 && bs.structure_constant0(r, h, s) != 0.0)
              for (int tt = 0; tt < n; ++tt) acc -= e[tt] * t.dtheta[r][tt];
        }
        worst = std::max(worst, std::abs(acc));
      }
  return worst;
}

/// Necessary-only contraction of the system above with the unit field:
///   (d_i theta_j + d_j theta_i) - c^s_{ij} e^h (d_h theta_s + d_s theta_h)
///     = 2 G^k_{ij} theta_k.
inline double check_reduced_eq_for_g(const ThetaField& th, const DefiningField& df,
                                     const std::vector<double>& p, double reg_tol = 1e-8) {
  const auto& bs = df.bs();
  const int n = bs.n();
  auto t = detail::theta_tables(th, p);
  auto g = christoffel(df, p, reg_tol);
  auto e = unit_vector(bs);
  double worst = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = t.dtheta[j][i] + t.dtheta[i][j];
      for (int s = 0; s < n; ++s) {
        if (bs.structure_constant0(s, i, j) == 0.0) continue;
        for (int hh = 0; hh < n; ++hh) acc -= e[hh] * (t.dtheta[s][hh] + t.dtheta[hh][s]);
      }
      for (int k = 0; k < n; ++k) acc -= 2.0 * g(k, i, j) * t.theta[k];
      worst = std::max(worst, std::abs(acc));
    }
  return worst;
}

/// d_{j(b)} theta_{i(a)} must vanish for i+j >= m_a + 2 (b != a) and
/// i+j >= m_a + 3 (b == a).
inline WorstEntry theta_zero_pattern_residual(const ThetaField& th, const std::vector<double>& p) {
  const auto& bs = th.bs;
  auto t = detail::theta_tables(th, p);
  WorstEntry w;
  for (int a = 1; a <= bs.blocks(); ++a)
    for (int i = 1; i <= bs.size(a); ++i)
      for (int b = 1; b <= bs.blocks(); ++b)
        for (int j = 1; j <= bs.size(b); ++j)
          if (i + j >= bs.size(a) + (b == a ? 3 : 2)) {
            const double v = std::abs(t.dtheta[bs.flat0(i, a)][bs.flat0(j, b)]);
            if (v > w.residual) w = {v, {bs.flat0(i, a), bs.flat0(j, b)}};
          }
  return w;
}

/// Curvature of the Levi-Civita connection of the theta metric, with the same
/// sign convention as the canonical connection.
inline Riemann riemann_of_metric(const ThetaField& th, const std::vector<double>& p) {
  return riemann_from_gamma(th.bs, levi_civita_jet(th, p, 1));
}

inline double max_abs_riemann(const Riemann& r) {
  double worst = 0;
  for (int i = 0; i < r.n(); ++i)
    for (int j = 0; j < r.n(); ++j)
      for (int k = 0; k < r.n(); ++k)
        for (int l = 0; l < r.n(); ++l) worst = std::max(worst, std::abs(r(i, j, k, l)));
  return worst;
}

// ---------------------------------------------------------------------------
// Closed-form generator families for the single 3-block class
// X = E - eps1 u1 e.

/// theta_3 = F1 u2^{-4 eps1/3},
/// theta_2 = -(2/3) eps1 F1 u2^{-1-4 eps1/3} u3 + F2,
/// theta_1 = (eps1/9)(2 eps1 - 3) F1 u2^{-2-4 eps1/3} u3^2
///           + (2 dF2/du2 + 2 eps1 F2/u2 - F1' u2^{-4 eps1/3}) u3 + F3,
/// with F1 = F1(u1) and F2, F3 = F(u1, u2).  The u3-coefficient of theta_1
/// follows from the defining first-order system.
inline std::vector<ExprPtr> jb3_theta_family(const ExprEnv& env, const ExprPtr& f1, const ExprPtr& f2,
                                             const ExprPtr& f3, double eps1) {
  using namespace smart;
  auto u2 = Expr::make_coord(2, 0);
  auto u3 = Expr::make_coord(3, 0);
  auto f1p = differentiate(f1, env, 1);
  auto df2 = differentiate(f2, env, 2);
  auto wexp = [&](double e) { return pw(u2, num(e)); };
  ExprPtr theta3 = mul(f1, wexp(-4.0 * eps1 / 3.0));
  ExprPtr theta2 = add(mul(mul(num(-2.0 * eps1 / 3.0), f1), mul(wexp(-1.0 - 4.0 * eps1 / 3.0), u3)), f2);
  ExprPtr coeff_u3 = sub(add(mul(num(2), df2), mul(num(2.0 * eps1), div(f2, u2))), mul(f1p, wexp(-4.0 * eps1 / 3.0)));
  ExprPtr theta1 = add(add(mul(mul(num(eps1 * (2.0 * eps1 - 3.0) / 9.0), f1), mul(wexp(-2.0 - 4.0 * eps1 / 3.0), mul(u3, u3))),
                           mul(coeff_u3, u3)),
                       f3);
  return {theta1, theta2, theta3};
}

/// The flat subfamily at eps1 = 3: F2 and F3 are pinned to
///   F2 = F4/u2^2 + F5/u2^4 - F1'/(2 u2^3),
///   F3 = F7/u2^2 + F6/u2 + F4^2/F1 - 2 F5'/u2^3 + 3 F5 F1'/(F1 u2^3)
///        + F5^2/(F1 u2^4),
/// with F1, F4..F7 functions of u1 and F1 nonvanishing.
inline std::vector<ExprPtr> jb3_flat_family(const ExprEnv& env, const ExprPtr& f1, const ExprPtr& f4,
                                            const ExprPtr& f5, const ExprPtr& f6, const ExprPtr& f7) {
  using namespace smart;
  auto u2 = Expr::make_coord(2, 0);
  auto f1p = differentiate(f1, env, 1);
  auto f5p = differentiate(f5, env, 1);
  auto w = [&](double e) { return pw(u2, num(e)); };
  ExprPtr f2 = add(sub(mul(f4, w(-2)), mul(div(f1p, num(2)), w(-3))), mul(f5, w(-4)));
  ExprPtr f3 = add(add(add(mul(f7, w(-2)), mul(f6, w(-1))), div(mul(f4, f4), f1)),
                   add(sub(mul(div(mul(num(3), mul(f5, f1p)), f1), w(-3)), mul(mul(num(2), f5p), w(-3))),
                       mul(div(mul(f5, f5), f1), w(-4))));
  return jb3_theta_family(env, f1, f2, f3, 3.0);
}

/// For the single 3-block class the Hamiltonian conditions force
/// d X^1/d u3 = 0 and d X^2/d u3 = -d X^1/d u2; returns the worst violation
/// at the given point.
inline double jb3_necessary_conditions_residual(const DefiningField& df, const std::vector<double>& p) {
  if (df.bs().sizes() != std::vector<int>{3})
    throw std::invalid_argument("necessary-conditions check applies to a single 3-block");
  auto t = df.tables(p);
  return std::max(std::abs(t.dx[0][2]), std::abs(t.dx[1][2] + t.dx[0][1]));
}

}  // namespace jbflow
