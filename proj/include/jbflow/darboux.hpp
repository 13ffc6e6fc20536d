#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "jbflow/blocks.hpp"
#include "jbflow/expr.hpp"
#include "jbflow/jet.hpp"

namespace jbflow {

/// Right-hand side of one prescribed partial: f_{a,j}(w, u).  Both the state
/// and the coordinates arrive as jets so that gradient-mode integration can
/// chain through every evaluation.
using RhsFn = std::function<Jet(const std::vector<Jet>& w, const std::vector<Jet>& u)>;

/// Initial-data function of one unknown, evaluated on the coordinates (only
/// the unknown's free directions matter).
using DataFn = std::function<Jet(const std::vector<Jet>& u)>;

struct PfaffianUnknown {
  std::string label;
  std::vector<int> free_dirs;   // 0-based coordinate indices with no equation
  std::map<int, RhsFn> rhs;     // prescribed directions -> f_{a,j}
};

/// A first-order system d_j w_a = f_{a,j}(w, u) prescribing a subset of the
/// partials of each unknown.  The walk order fixes the axis-aligned
/// integration path; every unknown's free directions must precede all of its
/// prescribed directions in that order (the data then seeds the free block
/// of the path and the equations transport along the rest).
struct PfaffianSystem {
  BlockStructure bs;
  std::vector<PfaffianUnknown> unknowns;
  std::vector<int> walk_order;  // permutation of 0..n-1; canonical if empty

  std::vector<int> effective_walk_order() const {
    if (!walk_order.empty()) return walk_order;
    std::vector<int> w(bs.n());
    for (int j = 0; j < bs.n(); ++j) w[j] = j;
    return w;
  }

  void validate() const {
    const int n = bs.n();
    auto order = effective_walk_order();
    if (int(order.size()) != n) throw std::invalid_argument("walk order must list every coordinate once");
    std::vector<int> position(n, -1);
    for (int s = 0; s < n; ++s) {
      if (order[s] < 0 || order[s] >= n || position[order[s]] != -1)
        throw std::invalid_argument("walk order must be a permutation");
      position[order[s]] = s;
    }
    for (const auto& u : unknowns) {
      std::vector<bool> free_mask(n, false);
      for (int f : u.free_dirs) free_mask.at(f) = true;
      for (const auto& [j, fn] : u.rhs) {
        if (free_mask.at(j)) throw std::invalid_argument("direction both free and prescribed for " + u.label);
        if (!fn) throw std::invalid_argument("missing right-hand side for " + u.label);
      }
      for (int j = 0; j < n; ++j)
        if (!free_mask[j] && !u.rhs.count(j))
          throw std::invalid_argument("direction " + std::to_string(j + 1) + " of " + u.label +
                                      " neither free nor prescribed");
      int last_free = -1, first_prescribed = n;
      for (int f : u.free_dirs) last_free = std::max(last_free, position[f]);
      for (const auto& [j, fn] : u.rhs) first_prescribed = std::min(first_prescribed, position[j]);
      if (last_free > first_prescribed)
        throw std::invalid_argument("free directions of " + u.label + " must precede its prescribed ones in the walk order");
    }
  }
};

struct InitialData {
  std::vector<double> base_point;
  std::vector<DataFn> functions;  // aligned with system.unknowns
};

/// Builds a data function from an expression over the coordinates; the
/// expression may use only the given free directions.
inline DataFn expr_data(const ExprEnv& env, const ExprPtr& e, const std::vector<int>& free_dirs) {
  bind_check(e, env);
  for (int v : free_variables(e, env)) {
    bool ok = false;
    for (int f : free_dirs) ok = ok || (f == v - 1);
    if (!ok) throw std::invalid_argument("initial data uses u" + std::to_string(v) + " outside the free directions");
  }
  return [env, e](const std::vector<Jet>& u) { return evaluate(e, env, u); };
}

namespace detail {

struct WalkState {
  std::vector<Jet> u;  // current coordinates
  std::vector<Jet> w;  // current unknown values
};

}  // namespace detail

/// Integrates the system from its initial data to `target`: initial data are
/// evaluated on the free-direction subspace through base_point, then the
/// prescribed partials are transported one coordinate at a time with
/// classical RK4 of the given step (a final partial step lands exactly).
/// With jet_order == 1 the returned jets carry d(result)/d(target) — for a
/// compatible system these are the field gradients up to the RK4 error.
inline std::vector<Jet> integrate(const PfaffianSystem& sys, const InitialData& data,
                                  const std::vector<double>& target, double step, int jet_order = 0) {
  if (step <= 0) throw std::invalid_argument("step must be positive");
  sys.validate();
  const int n = sys.bs.n();
  const int na = int(sys.unknowns.size());
  if (int(target.size()) != n || int(data.base_point.size()) != n)
    throw std::invalid_argument("point length must equal n");
  if (int(data.functions.size()) != na) throw std::invalid_argument("one data function per unknown required");

  detail::WalkState st;
  st.u.resize(n);
  for (int j = 0; j < n; ++j) st.u[j] = Jet::constant(data.base_point[j], n, jet_order);
  st.w.resize(na);
  for (int a = 0; a < na; ++a) st.w[a] = data.functions[a](st.u);

  auto target_jet = [&](int j) { return Jet::variable(target[j], n, jet_order, j); };

  for (int j : sys.effective_walk_order()) {
    std::vector<int> moving;  // unknowns transported along this coordinate
    std::vector<int> tracked; // unknowns with this coordinate free
    for (int a = 0; a < na; ++a) {
      if (sys.unknowns[a].rhs.count(j)) moving.push_back(a);
      for (int f : sys.unknowns[a].free_dirs)
        if (f == j) tracked.push_back(a);
    }
    if (!moving.empty() && target[j] != data.base_point[j]) {
      const double len = target[j] - data.base_point[j];
      const double dir = len > 0 ? 1.0 : -1.0;
      const int full = int(std::abs(len) / step);
      const Jet h_full = Jet(dir * step);
      const Jet h_last = target_jet(j) - (data.base_point[j] + full * dir * step);
      auto eval_rhs = [&](const Jet& s, const std::vector<Jet>& wtrial) {
        std::vector<Jet> u = st.u;
        u[j] = s;
        std::vector<Jet> w = wtrial;
        for (int a : tracked) w[a] = data.functions[a](u);
        std::vector<Jet> k(na, Jet(0));
        for (int a : moving) k[a] = sys.unknowns[a].rhs.at(j)(w, u);
        return k;
      };
      Jet s = st.u[j];
      for (int stepi = 0; stepi <= full; ++stepi) {
        const Jet h = stepi < full ? h_full : h_last;
        if (stepi == full && std::abs(h.value()) < 1e-300) break;
        auto add = [&](const std::vector<Jet>& w0, const std::vector<Jet>& k, const Jet& f) {
          std::vector<Jet> out = w0;
          for (int a : moving) out[a] += f * k[a];
          return out;
        };
        auto k1 = eval_rhs(s, st.w);
        auto k2 = eval_rhs(s + h * 0.5, add(st.w, k1, h * 0.5));
        auto k3 = eval_rhs(s + h * 0.5, add(st.w, k2, h * 0.5));
        auto k4 = eval_rhs(s + h, add(st.w, k3, h));
        for (int a : moving)
          st.w[a] += h * (1.0 / 6.0) * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        s += h;
      }
    }
    st.u[j] = target_jet(j);
    for (int a : tracked) st.w[a] = data.functions[a](st.u);
  }
  return st.w;
}

inline std::vector<double> integrate_values(const PfaffianSystem& sys, const InitialData& data,
                                            const std::vector<double>& target, double step) {
  auto js = integrate(sys, data, target, step, 0);
  std::vector<double> out(js.size());
  for (std::size_t i = 0; i < js.size(); ++i) out[i] = js[i].value();
  return out;
}

/// Cross-derivative compatibility residual at a point:
///   max_{a, j<k} | D_k f_{a,j} - D_j f_{a,k} |,
/// where D includes the chain-rule contribution through w (with dw taken
/// from the gradient of the integrated solution) and derivatives are central
/// differences of spacing h.
inline double check_compatibility(const PfaffianSystem& sys, const InitialData& data,
                                  const std::vector<double>& p, double h, double step) {
  sys.validate();
  const int n = sys.bs.n();
  const int na = int(sys.unknowns.size());
  auto wj = integrate(sys, data, p, step, 1);

  auto shifted = [&](int k, double eps) {
    std::vector<Jet> u(n), w(na);
    for (int j = 0; j < n; ++j) u[j] = Jet(p[j] + (j == k ? eps : 0.0));
    for (int a = 0; a < na; ++a) w[a] = Jet(wj[a].value() + eps * wj[a].grad(k));
    return std::pair{w, u};
  };

  double worst = 0;
  for (int a = 0; a < na; ++a)
    for (const auto& [j, fj] : sys.unknowns[a].rhs)
      for (const auto& [k, fk] : sys.unknowns[a].rhs) {
        if (j >= k) continue;
        auto [wp, up] = shifted(k, h);
        auto [wm, um] = shifted(k, -h);
        const double dkfj = (fj(wp, up).value() - fj(wm, um).value()) / (2 * h);
        auto [wp2, up2] = shifted(j, h);
        auto [wm2, um2] = shifted(j, -h);
        const double djfk = (fk(wp2, up2).value() - fk(wm2, um2).value()) / (2 * h);
        worst = std::max(worst, std::abs(dkfj - djfk));
      }
  return worst;
}

/// Integrates along the configured walk order and along the order with the
/// prescribed block reversed; for a compatible system the difference decays
/// like the fourth power of the step.
inline double path_independence_test(const PfaffianSystem& sys, const InitialData& data,
                                     const std::vector<double>& target, double step) {
  sys.validate();
  auto a = integrate_values(sys, data, target, step);

  PfaffianSystem rev = sys;
  auto order = sys.effective_walk_order();
  std::vector<bool> is_free(sys.bs.n(), false);
  for (const auto& u : sys.unknowns)
    for (int f : u.free_dirs) is_free[f] = true;
  int head = 0;
  while (head < int(order.size()) && is_free[order[head]]) ++head;
  std::reverse(order.begin() + head, order.end());
  rev.walk_order = order;
  auto b = integrate_values(rev, data, target, step);

  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace jbflow
