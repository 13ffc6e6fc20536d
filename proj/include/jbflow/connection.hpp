#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jbflow/blocks.hpp"
#include "jbflow/expr.hpp"
#include "jbflow/jet.hpp"

namespace jbflow {

struct singular_configuration : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense rank-3 table G(i,j,k) ~ Gamma^i_{jk}, 0-based, symmetric in (j,k).
template <class T>
class Gamma {
public:
  Gamma() = default;
  explicit Gamma(int n) : n_(n), data_(std::size_t(n) * n * n, T(0)) {}
  int n() const { return n_; }
  T& operator()(int i, int j, int k) { return data_[(std::size_t(i) * n_ + j) * n_ + k]; }
  const T& operator()(int i, int j, int k) const { return data_[(std::size_t(i) * n_ + j) * n_ + k]; }
  void set_sym(int i, int j, int k, const T& v) {
    (*this)(i, j, k) = v;
    (*this)(i, k, j) = v;
  }

private:
  int n_ = 0;
  std::vector<T> data_;
};

template <class T>
struct FieldTables {
  std::vector<T> x;                // X^i
  std::vector<std::vector<T>> dx;  // dx[i][j] = d_j X^i
};

/// Checks the regularity assumptions at a point: eigenvalue candidates
/// X^{1(a)} pairwise separated and X^{2(a)} bounded away from zero.
template <class T>
void require_regular(const BlockStructure& bs, const std::vector<T>& xv, double tol) {
  for (int a = 1; a <= bs.blocks(); ++a) {
    for (int b = a + 1; b <= bs.blocks(); ++b) {
      const double gap = std::abs(scalar_value(xv[bs.flat0(1, a)]) - scalar_value(xv[bs.flat0(1, b)]));
      if (gap < tol)
        throw singular_configuration("blocks " + std::to_string(a) + " and " + std::to_string(b) +
                                     " have coinciding X^1 values (gap " + std::to_string(gap) + ")");
    }
    if (bs.size(a) >= 2 && std::abs(scalar_value(xv[bs.flat0(2, a)])) < tol)
      throw singular_configuration("block " + std::to_string(a) + " has vanishing X^2");
  }
}

/// Christoffel symbols of the unique torsionless connection with flat unit
/// and d_nabla(X o) = 0, filled from the value table X^i and the derivative
/// table d_j X^i at one point.
///
/// The recursion sweeps, per upper index i(a):
///   1. entries with lower indices in two blocks both different from a: zero;
///   2. mixed entries Gamma^{i(a)}_{j(b)k(a)} with k descending from m_a and
///      j descending from m_b (each step only uses entries already filled);
///   3. the flat-unit relations fixing all entries with a lower index 1;
///   4. same-block pairs (both lower indices in one block, own or foreign)
///      with the larger lower index descending and the smaller descending
///      within it.
/// Out-of-range upper components X^{p(a)}, p < 1 or p > m_a, drop out.
template <class T>
Gamma<T> christoffel_from_tables(const BlockStructure& bs, const FieldTables<T>& t, double reg_tol = 1e-8) {
  const int n = bs.n();
  const int r = bs.blocks();
  require_regular(bs, t.x, reg_tol);
  Gamma<T> g(n);
  for (int ia = 0; ia < n; ++ia) {
    const int alpha = bs.block_of0(ia);
    const int i = bs.pos_of0(ia);
    const int ma = bs.size(alpha);
    // mixed blocks
    for (int beta = 1; beta <= r; ++beta) {
      if (beta == alpha) continue;
      const int mb = bs.size(beta);
      const T denom = t.x[bs.flat0(1, alpha)] - t.x[bs.flat0(1, beta)];
      for (int k = ma; k >= 1; --k)
        for (int j = mb; j >= 1; --j) {
          T acc(0);
          if (i - k + 1 >= 1 && i - k + 1 <= ma) acc += t.dx[bs.flat0(i - k + 1, alpha)][bs.flat0(j, beta)];
          for (int s = k + 1; s <= ma; ++s)
            acc += g(ia, bs.flat0(j, beta), bs.flat0(s, alpha)) * t.x[bs.flat0(s - k + 1, alpha)];
          for (int s = j + 1; s <= mb; ++s)
            acc -= g(ia, bs.flat0(k, alpha), bs.flat0(s, beta)) * t.x[bs.flat0(s - j + 1, beta)];
          g.set_sym(ia, bs.flat0(j, beta), bs.flat0(k, alpha), -acc / denom);
        }
    }
    // flat unit
    for (int beta = 1; beta <= r; ++beta) {
      if (beta == alpha) continue;
      for (int j = 1; j <= bs.size(beta); ++j)
        g.set_sym(ia, bs.flat0(j, beta), bs.flat0(1, beta), -g(ia, bs.flat0(j, beta), bs.flat0(1, alpha)));
    }
    for (int j = 1; j <= ma; ++j) {
      T acc(0);
      for (int sg = 1; sg <= r; ++sg)
        if (sg != alpha) acc -= g(ia, bs.flat0(j, alpha), bs.flat0(1, sg));
      g.set_sym(ia, bs.flat0(j, alpha), bs.flat0(1, alpha), acc);
    }
    // same-block pairs in a foreign block
    for (int beta = 1; beta <= r; ++beta) {
      if (beta == alpha) continue;
      const int mb = bs.size(beta);
      for (int k = mb; k >= 2; --k)
        for (int j = k; j >= 2; --j) {
          T acc(0);
          for (int s = k + 1; s <= mb; ++s)
            acc += g(ia, bs.flat0(j - 1, beta), bs.flat0(s, beta)) * t.x[bs.flat0(s - k + 1, beta)];
          for (int s = j + 1; s <= mb; ++s)
            acc -= g(ia, bs.flat0(k, beta), bs.flat0(s, beta)) * t.x[bs.flat0(s - j + 2, beta)];
          g.set_sym(ia, bs.flat0(k, beta), bs.flat0(j, beta), acc / t.x[bs.flat0(2, beta)]);
        }
    }
    // same-block pairs in the own block
    for (int k = ma; k >= 2; --k)
      for (int j = k; j >= 2; --j) {
        T acc(0);
        if (i - k + 1 >= 1 && i - k + 1 <= ma) acc += t.dx[bs.flat0(i - k + 1, alpha)][bs.flat0(j - 1, alpha)];
        for (int s = k + 1; s <= ma; ++s)
          acc += g(ia, bs.flat0(j - 1, alpha), bs.flat0(s, alpha)) * t.x[bs.flat0(s - k + 1, alpha)];
        if (i - j + 2 >= 1 && i - j + 2 <= ma) acc -= t.dx[bs.flat0(i - j + 2, alpha)][bs.flat0(k, alpha)];
        for (int s = j + 1; s <= ma; ++s)
          acc -= g(ia, bs.flat0(k, alpha), bs.flat0(s, alpha)) * t.x[bs.flat0(s - j + 2, alpha)];
        g.set_sym(ia, bs.flat0(k, alpha), bs.flat0(j, alpha), acc / t.x[bs.flat0(2, alpha)]);
      }
  }
  return g;
}

/// A vector field in canonical coordinates given by one expression per
/// component, with cached symbolic derivative trees up to third order.
class DefiningField {
public:
  DefiningField(ExprEnv env, std::vector<ExprPtr> components)
      : env_(std::move(env)), comps_(std::move(components)) {
    if (int(comps_.size()) != env_.bs.n())
      throw std::invalid_argument("defining field needs one component per coordinate");
    for (const auto& c : comps_) bind_check(c, env_);
  }
  DefiningField(ExprEnv env, const std::vector<std::string>& sources)
      : DefiningField(std::move(env), parse_all(sources)) {}

  const ExprEnv& env() const { return env_; }
  const BlockStructure& bs() const { return env_.bs; }
  int n() const { return env_.bs.n(); }
  const std::vector<ExprPtr>& components() const { return comps_; }

  /// X^{i(a)} may depend only on the variables u^{j(s)} with j <= i.
  bool is_darboux_tsarev() const {
    return darboux_tsarev_violation() == std::nullopt;
  }
  /// Returns a human-readable description of the first dependence violation.
  std::optional<std::string> darboux_tsarev_violation() const {
    const auto& bs = env_.bs;
    for (int c0 = 0; c0 < n(); ++c0) {
      const int i = bs.pos_of0(c0);
      for (int v : free_variables(comps_[c0], env_)) {
        if (bs.pos_of0(v - 1) > i) {
          const auto cm = bs.multi_index(c0 + 1);
          const auto vm = bs.multi_index(v);
          return "X^" + std::to_string(cm.i) + "(" + std::to_string(cm.alpha) + ") depends on u" +
                 std::to_string(vm.i) + "(" + std::to_string(vm.alpha) + ")";
        }
      }
    }
    return std::nullopt;
  }

  std::vector<double> values(const std::vector<double>& p) const {
    std::vector<double> out(n());
    for (int i = 0; i < n(); ++i) out[i] = evaluate(comps_[i], env_, p);
    return out;
  }

  FieldTables<double> tables(const std::vector<double>& p) const {
    ensure_order(1);
    FieldTables<double> t;
    t.x = values(p);
    t.dx.assign(n(), std::vector<double>(n()));
    for (int i = 0; i < n(); ++i)
      for (int j = 0; j < n(); ++j) t.dx[i][j] = evaluate(d1_[i][j], env_, p);
    return t;
  }

  /// Tables whose entries are u-jets of the requested order (exact, from the
  /// symbolic derivative trees).
  FieldTables<Jet> tables_jet(const std::vector<double>& p, int order) const {
    ensure_order(order + 1);
    const int nn = n();
    FieldTables<Jet> t;
    t.x.reserve(nn);
    for (int i = 0; i < nn; ++i) {
      Jet x = Jet::constant(evaluate(comps_[i], env_, p), nn, order);
      if (order >= 1)
        for (int j = 0; j < nn; ++j) x.grad_ref(j) = evaluate(d1_[i][j], env_, p);
      if (order >= 2)
        for (int j = 0; j < nn; ++j)
          for (int k = j; k < nn; ++k) {
            const double v = evaluate(d2_[i][j][k], env_, p);
            x.hess_ref(j, k) = v;
            x.hess_ref(k, j) = v;
          }
      t.x.push_back(std::move(x));
    }
    t.dx.assign(nn, {});
    for (int i = 0; i < nn; ++i) {
      t.dx[i].reserve(nn);
      for (int j = 0; j < nn; ++j) {
        Jet d = Jet::constant(evaluate(d1_[i][j], env_, p), nn, order);
        if (order >= 1)
          for (int k = 0; k < nn; ++k) d.grad_ref(k) = evaluate(d2_[i][std::min(j, k)][std::max(j, k)], env_, p);
        if (order >= 2)
          for (int k = 0; k < nn; ++k)
            for (int l = k; l < nn; ++l) {
              const double v = evaluate(d3(i, j, k, l), env_, p);
              d.hess_ref(k, l) = v;
              d.hess_ref(l, k) = v;
            }
        t.dx[i].push_back(std::move(d));
      }
    }
    return t;
  }

private:
  static std::vector<ExprPtr> parse_all(const std::vector<std::string>& sources) {
    std::vector<ExprPtr> out;
    out.reserve(sources.size());
    for (const auto& s : sources) out.push_back(parse(s));
    return out;
  }
  void ensure_order(int order) const {
    const int nn = n();
    if (order >= 1 && d1_.empty()) {
      d1_.assign(nn, std::vector<ExprPtr>(nn));
      for (int i = 0; i < nn; ++i)
        for (int j = 0; j < nn; ++j) d1_[i][j] = differentiate(comps_[i], env_, j + 1);
    }
    if (order >= 2 && d2_.empty()) {
      d2_.assign(nn, std::vector<std::vector<ExprPtr>>(nn, std::vector<ExprPtr>(nn)));
      for (int i = 0; i < nn; ++i)
        for (int j = 0; j < nn; ++j)
          for (int k = j; k < nn; ++k) d2_[i][j][k] = differentiate(d1_[i][j], env_, k + 1);
    }
  }
  // d3 entries are sparse in practice; build on demand and memoize.
  const ExprPtr& d3(int i, int j, int k, int l) const {
    ensure_order(2);
    std::array<int, 2> kl{std::min(k, l), std::max(k, l)};
    auto key = std::array<int, 4>{i, j, kl[0], kl[1]};
    auto it = d3_.find(key);
    if (it == d3_.end())
      it = d3_.emplace(key, differentiate(d2_[i][std::min(j, kl[0])][std::max(j, kl[0])], env_, kl[1] + 1)).first;
    return it->second;
  }

  ExprEnv env_;
  std::vector<ExprPtr> comps_;
  mutable std::vector<std::vector<ExprPtr>> d1_;
  mutable std::vector<std::vector<std::vector<ExprPtr>>> d2_;
  mutable std::map<std::array<int, 4>, ExprPtr> d3_;
};

inline Gamma<double> christoffel(const DefiningField& df, const std::vector<double>& p, double reg_tol = 1e-8) {
  return christoffel_from_tables(df.bs(), df.tables(p), reg_tol);
}

/// Christoffel symbols as u-jets: the recursion is replayed over jet scalars,
/// so gradients (and Hessians at order 2) of every Gamma entry are exact.
inline Gamma<Jet> christoffel_jet(const DefiningField& df, const std::vector<double>& p, int order,
                                  double reg_tol = 1e-8) {
  return christoffel_from_tables(df.bs(), df.tables_jet(p, order), reg_tol);
}

// ---------------------------------------------------------------------------
// Derived tensors and residual checks.

/// Residual of d_nabla(X o) = 0: max over i,j,k of
/// |d_j V^i_k - d_k V^i_j + G^i_{js} V^s_k - G^i_{ks} V^s_j|.
inline double dnabla_v_residual(const BlockStructure& bs, const Gamma<double>& g, const FieldTables<double>& t) {
  const int n = bs.n();
  const auto v = mult_operator(bs, t.x);
  double worst = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < j; ++k) {
        double acc = 0;
        for (int l = 0; l < n; ++l) {
          acc += bs.structure_constant0(i, k, l) * t.dx[l][j] - bs.structure_constant0(i, j, l) * t.dx[l][k];
          acc += g(i, j, l) * v[l][k] - g(i, k, l) * v[l][j];
        }
        worst = std::max(worst, std::abs(acc));
      }
  return worst;
}

/// Residual of nabla e = 0: max |sum_a Gamma^i_{j 1(a)}|.
inline double nabla_e_residual(const BlockStructure& bs, const Gamma<double>& g) {
  double worst = 0;
  for (int i = 0; i < bs.n(); ++i)
    for (int j = 0; j < bs.n(); ++j) {
      double acc = 0;
      for (int a = 1; a <= bs.blocks(); ++a) acc += g(i, j, bs.first0(a));
      worst = std::max(worst, std::abs(acc));
    }
  return worst;
}

/// nabla_l c^k_{ij} (c is constant in canonical coordinates).
inline double nabla_c_entry(const BlockStructure& bs, const Gamma<double>& g, int l, int k, int i, int j) {
  const int n = bs.n();
  double acc = 0;
  for (int t = 0; t < n; ++t) {
    acc += g(k, l, t) * bs.structure_constant0(t, i, j);
    acc -= g(t, l, i) * bs.structure_constant0(k, t, j);
    acc -= g(t, l, j) * bs.structure_constant0(k, i, t);
  }
  return acc;
}

struct WorstEntry {
  double residual = 0;
  std::vector<int> index;  // 0-based flat indices
};

/// A^i_{jks} = nabla_j c^i_{ks} - nabla_k c^i_{js}; vanishes identically for
/// the constructed connection.
inline WorstEntry a_tensor_max(const BlockStructure& bs, const Gamma<double>& g) {
  const int n = bs.n();
  WorstEntry w;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int s = 0; s < n; ++s) {
          const double a = nabla_c_entry(bs, g, j, i, k, s) - nabla_c_entry(bs, g, k, i, j, s);
          if (std::abs(a) > w.residual) w = {std::abs(a), {i, j, k, s}};
        }
  return w;
}

/// Dense rank-4 curvature table R^i_{jkl}.
class Riemann {
public:
  Riemann() = default;
  explicit Riemann(int n) : n_(n), data_(std::size_t(n) * n * n * n, 0.0) {}
  int n() const { return n_; }
  double& operator()(int i, int j, int k, int l) {
    return data_[((std::size_t(i) * n_ + j) * n_ + k) * n_ + l];
  }
  double operator()(int i, int j, int k, int l) const {
    return data_[((std::size_t(i) * n_ + j) * n_ + k) * n_ + l];
  }

private:
  int n_ = 0;
  std::vector<double> data_;
};

/// R^i_{jkl} = d_k G^i_{lj} - d_l G^i_{kj} + G^i_{ks} G^s_{lj} - G^i_{ls} G^s_{kj},
/// evaluated from a jet-valued Gamma table (order >= 1).
inline Riemann riemann_from_gamma(const BlockStructure& bs, const Gamma<Jet>& g) {
  const int n = bs.n();
  Riemann r(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          double acc = g(i, l, j).grad(k) - g(i, k, j).grad(l);
          for (int s = 0; s < n; ++s)
            acc += g(i, k, s).value() * g(s, l, j).value() - g(i, l, s).value() * g(s, k, j).value();
          r(i, j, k, l) = acc;
        }
  return r;
}

inline Riemann riemann(const DefiningField& df, const std::vector<double>& p, double reg_tol = 1e-8) {
  return riemann_from_gamma(df.bs(), christoffel_jet(df, p, 1, reg_tol));
}

inline double first_bianchi_residual(const Riemann& r) {
  const int n = r.n();
  double worst = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          worst = std::max(worst, std::abs(r(i, j, k, l) + r(i, k, l, j) + r(i, l, j, k)));
  return worst;
}

/// Residual of both cyclic curvature-product identities
///   R^s_{lmi} c^j_{ks} + R^s_{lik} c^j_{ms} + R^s_{lkm} c^j_{is} = 0,
///   R^j_{skl} c^s_{mi} + R^j_{smk} c^s_{li} + R^j_{slm} c^s_{ki} = 0.
inline double curvature_product_residual(const BlockStructure& bs, const Riemann& r) {
  const int n = bs.n();
  double worst = 0;
  for (int l = 0; l < n; ++l)
    for (int m = 0; m < n; ++m)
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k)
          for (int j = 0; j < n; ++j) {
            double a = 0, b = 0;
            for (int s = 0; s < n; ++s) {
              a += r(s, l, m, i) * bs.structure_constant0(j, k, s) +
                   r(s, l, i, k) * bs.structure_constant0(j, m, s) +
                   r(s, l, k, m) * bs.structure_constant0(j, i, s);
              b += r(j, s, k, l) * bs.structure_constant0(s, m, i) +
                   r(j, s, m, k) * bs.structure_constant0(s, l, i) +
                   r(j, s, l, m) * bs.structure_constant0(s, k, i);
            }
            worst = std::max({worst, std::abs(a), std::abs(b)});
          }
  return worst;
}

inline double check_3rc(const DefiningField& df, const std::vector<double>& p, double reg_tol = 1e-8) {
  return curvature_product_residual(df.bs(), riemann(df, p, reg_tol));
}

// ---------------------------------------------------------------------------
// Structural lemma suite.

struct LemmaResult {
  std::string name;
  double residual = 0;
  std::string worst;  // located index of the worst entry
  bool pass = true;
};

struct LemmaReport {
  std::vector<LemmaResult> results;
  bool all_pass() const {
    for (const auto& r : results)
      if (!r.pass) return false;
    return true;
  }
  const LemmaResult* find(const std::string& name) const {
    for (const auto& r : results)
      if (r.name == name) return &r;
    return nullptr;
  }
};

namespace detail {

struct LemmaAcc {
  LemmaResult res;
  explicit LemmaAcc(std::string name) { res.name = std::move(name); }
  void add(double v, std::initializer_list<int> idx) {
    if (std::abs(v) > res.residual) {
      res.residual = std::abs(v);
      res.worst.clear();
      for (int x : idx) res.worst += (res.worst.empty() ? "" : ",") + std::to_string(x);
    }
  }
  LemmaResult done(double tol) {
    res.pass = res.residual <= tol;
    return res;
  }
};

}  // namespace detail

/// Checks the translation/zero-pattern identities of the connection and, for
/// Darboux-type fields, the derivative identities, against a jet-valued
/// Gamma table (order >= 1).  Index labels in the report are 1-based flat.
inline LemmaReport structural_lemma_report(const BlockStructure& bs, const Gamma<Jet>& g, bool darboux,
                                           double tol) {
  using detail::LemmaAcc;
  const int r = bs.blocks();
  LemmaReport rep;
  auto G = [&](int i, int a, int j, int b, int k, int c) {
    return g(bs.flat0(i, a), bs.flat0(j, b), bs.flat0(k, c)).value();
  };
  auto dG = [&](int m, int s, int i, int a, int j, int b, int k, int c) {
    return g(bs.flat0(i, a), bs.flat0(j, b), bs.flat0(k, c)).grad(bs.flat0(m, s));
  };

  {  // mixed-block translation structure
    LemmaAcc acc("translation_mixed");
    for (int a = 1; a <= r; ++a)
      for (int b = 1; b <= r; ++b) {
        if (a == b) continue;
        for (int i = 1; i <= bs.size(a); ++i)
          for (int j = 1; j <= bs.size(b); ++j)
            for (int k = 1; k <= bs.size(a); ++k) {
              const double want = i >= k ? G(i - k + 1, a, j, b, 1, a) : 0.0;
              acc.add(G(i, a, j, b, k, a) - want, {bs.flat0(i, a) + 1, bs.flat0(j, b) + 1, bs.flat0(k, a) + 1});
            }
      }
    rep.results.push_back(acc.done(tol));
  }
  {  // foreign-block translation structure
    LemmaAcc acc("translation_foreign");
    for (int a = 1; a <= r; ++a)
      for (int b = 1; b <= r; ++b) {
        if (a == b) continue;
        const int mb = bs.size(b);
        for (int i = 1; i <= bs.size(a); ++i)
          for (int j = 1; j <= mb; ++j)
            for (int k = 1; k <= mb; ++k) {
              const double want = j + k <= mb + 1 ? G(i, a, j + k - 1, b, 1, b) : 0.0;
              acc.add(G(i, a, j, b, k, b) - want, {bs.flat0(i, a) + 1, bs.flat0(j, b) + 1, bs.flat0(k, b) + 1});
            }
      }
    rep.results.push_back(acc.done(tol));
  }
  {  // own-block unit-column structure
    LemmaAcc acc("translation_unit_column");
    for (int a = 1; a <= r; ++a)
      for (int i = 1; i <= bs.size(a); ++i)
        for (int j = 1; j <= bs.size(a); ++j) {
          const double want = i >= j ? G(i - j + 1, a, 1, a, 1, a) : 0.0;
          acc.add(G(i, a, 1, a, j, a) - want, {bs.flat0(i, a) + 1, bs.flat0(1, a) + 1, bs.flat0(j, a) + 1});
        }
    rep.results.push_back(acc.done(tol));
  }

  if (darboux) {
    {  // Gamma^{i}_{jk} = 0 when the upper index is below either lower one
      LemmaAcc acc("zero_below_lower");
      for (int a = 1; a <= r; ++a)
        for (int b = 1; b <= r; ++b)
          for (int c = 1; c <= r; ++c)
            for (int i = 1; i <= bs.size(a); ++i)
              for (int j = 1; j <= bs.size(b); ++j)
                for (int k = 1; k <= bs.size(c); ++k)
                  if (i < std::max(j, k))
                    acc.add(G(i, a, j, b, k, c), {bs.flat0(i, a) + 1, bs.flat0(j, b) + 1, bs.flat0(k, c) + 1});
      rep.results.push_back(acc.done(tol));
    }
    {  // Gamma^{i(a)}_{j(.) k(c)} = 0 when i - j - k < -1, for c != a
      LemmaAcc acc("zero_depth_gap");
      for (int a = 1; a <= r; ++a)
        for (int b = 1; b <= r; ++b)
          for (int c = 1; c <= r; ++c) {
            if (c == a) continue;
            for (int i = 1; i <= bs.size(a); ++i)
              for (int j = 1; j <= bs.size(b); ++j)
                for (int k = 1; k <= bs.size(c); ++k)
                  if (i - j - k < -1)
                    acc.add(G(i, a, j, b, k, c), {bs.flat0(i, a) + 1, bs.flat0(j, b) + 1, bs.flat0(k, c) + 1});
          }
      rep.results.push_back(acc.done(tol));
    }
    {  // same-block zero for i-j-k <= -3 with j,k >= 2
      LemmaAcc acc("zero_same_block");
      for (int a = 1; a <= r; ++a)
        for (int i = 1; i <= bs.size(a); ++i)
          for (int j = 2; j <= bs.size(a); ++j)
            for (int k = 2; k <= bs.size(a); ++k)
              if (i - j - k <= -3)
                acc.add(G(i, a, j, a, k, a), {bs.flat0(i, a) + 1, bs.flat0(j, a) + 1, bs.flat0(k, a) + 1});
      rep.results.push_back(acc.done(tol));
    }
    {  // Gamma^{i(a)} depends on the variables u^{m} with m <= i only
      LemmaAcc acc("depends_on_prefix");
      for (int a = 1; a <= r; ++a)
        for (int i = 1; i <= bs.size(a); ++i)
          for (int jb = 0; jb < bs.n(); ++jb)
            for (int kb = 0; kb < bs.n(); ++kb)
              for (int s = 1; s <= r; ++s)
                for (int m = i + 1; m <= bs.size(s); ++m)
                  acc.add(g(bs.flat0(i, a), jb, kb).grad(bs.flat0(m, s)),
                          {bs.flat0(m, s) + 1, bs.flat0(i, a) + 1, jb + 1, kb + 1});
      rep.results.push_back(acc.done(tol));
    }
    {  // d_{k(b)} Gamma^{j(a)}_{2(a) j(a)} = 0 for b != a
      LemmaAcc acc("cross_block_trace_constant");
      for (int a = 1; a <= r; ++a) {
        if (bs.size(a) < 2) continue;
        for (int b = 1; b <= r; ++b) {
          if (b == a) continue;
          for (int j = 1; j <= bs.size(a); ++j)
            for (int k = 1; k <= bs.size(b); ++k)
              acc.add(dG(k, b, j, a, 2, a, j, a), {bs.flat0(k, b) + 1, bs.flat0(j, a) + 1});
        }
      }
      rep.results.push_back(acc.done(tol));
    }
    {  // d_{m(a)} Gamma^{j(a)}_{l(a) i(a)} = 0 for m > j - l + 2
      LemmaAcc acc("same_block_derivative_cutoff");
      for (int a = 1; a <= r; ++a)
        for (int j = 1; j <= bs.size(a); ++j)
          for (int l = 1; l <= bs.size(a); ++l)
            for (int i = 1; i <= bs.size(a); ++i)
              for (int m = std::max(1, j - l + 3); m <= bs.size(a); ++m)
                acc.add(dG(m, a, j, a, l, a, i, a),
                        {bs.flat0(m, a) + 1, bs.flat0(j, a) + 1, bs.flat0(l, a) + 1, bs.flat0(i, a) + 1});
      rep.results.push_back(acc.done(tol));
    }
    {  // d_{m(s)} Gamma^{i(a)}_{j(a) k(b)} = 0 for m > i - j + 1, b != a
      LemmaAcc acc("mixed_derivative_cutoff");
      for (int a = 1; a <= r; ++a)
        for (int b = 1; b <= r; ++b) {
          if (b == a) continue;
          for (int i = 1; i <= bs.size(a); ++i)
            for (int j = 1; j <= bs.size(a); ++j)
              for (int k = 1; k <= bs.size(b); ++k)
                for (int s = 1; s <= r; ++s)
                  for (int m = std::max(1, i - j + 2); m <= bs.size(s); ++m)
                    acc.add(dG(m, s, i, a, j, a, k, b),
                            {bs.flat0(m, s) + 1, bs.flat0(i, a) + 1, bs.flat0(j, a) + 1, bs.flat0(k, b) + 1});
        }
      rep.results.push_back(acc.done(tol));
    }
    if (r >= 2) {  // derivative swap across blocks
      LemmaAcc acc("derivative_swap");
      for (int a = 1; a <= r; ++a)
        for (int b = 1; b <= r; ++b)
          for (int c = 1; c <= r; ++c) {
            if (b == a || c == a) continue;
            for (int j = 1; j <= std::min(bs.size(a), bs.size(b)); ++j)
              for (int l = 1; l <= bs.size(a); ++l)
                for (int i = 1; i <= bs.size(c); ++i)
                  for (int m = 1; m <= bs.size(b); ++m)
                    acc.add(dG(m, b, j, a, l, a, i, c) - dG(i, c, j, b, l, a, m, b),
                            {bs.flat0(m, b) + 1, bs.flat0(j, a) + 1, bs.flat0(l, a) + 1, bs.flat0(i, c) + 1});
          }
      rep.results.push_back(acc.done(tol));
    }
    if (r >= 2) {  // d_{j(a)} Gamma^{k(a)}_{k(b) 1(a)} = 0 for j >= 3
      LemmaAcc acc("deep_derivative_zero");
      for (int a = 1; a <= r; ++a)
        for (int b = 1; b <= r; ++b) {
          if (b == a) continue;
          for (int k = 1; k <= std::min(bs.size(a), bs.size(b)); ++k)
            for (int j = 3; j <= bs.size(a); ++j)
              acc.add(dG(j, a, k, a, k, b, 1, a), {bs.flat0(j, a) + 1, bs.flat0(k, a) + 1, bs.flat0(k, b) + 1});
        }
      rep.results.push_back(acc.done(tol));
    }
  }
  return rep;
}

inline LemmaReport check_structural_lemmas(const DefiningField& df, const std::vector<double>& p,
                                           double tol = 1e-11, double reg_tol = 1e-8) {
  return structural_lemma_report(df.bs(), christoffel_jet(df, p, 1, reg_tol), df.is_darboux_tsarev(), tol);
}

}  // namespace jbflow
