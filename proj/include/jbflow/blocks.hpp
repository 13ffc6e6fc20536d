#pragma once

#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace jbflow {

/// In-block index i and block label alpha, both 1-based as in the
/// double-index notation i(alpha).
struct MultiIndex {
  int i = 1;
  int alpha = 1;
  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

/// Jordan block sizes (m_1, ..., m_r) of the multiplication operator plus the
/// flat-index bookkeeping between i(alpha) and 1..n.
class BlockStructure {
public:
  explicit BlockStructure(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.empty()) throw std::invalid_argument("block structure needs at least one block");
    offsets_.reserve(sizes_.size());
    int off = 0;
    for (int m : sizes_) {
      if (m < 1) throw std::invalid_argument("block sizes must be positive");
      offsets_.push_back(off);
      off += m;
    }
    n_ = off;
  }

  int n() const { return n_; }
  int blocks() const { return int(sizes_.size()); }
  int size(int alpha) const { return sizes_[check_block(alpha) - 1]; }
  const std::vector<int>& sizes() const { return sizes_; }

  /// flat_index(i(alpha)) = m_1 + ... + m_{alpha-1} + i, 1-based.
  int flat_index(MultiIndex mi) const {
    check(mi);
    return offsets_[mi.alpha - 1] + mi.i;
  }
  MultiIndex multi_index(int flat) const {
    if (flat < 1 || flat > n_) throw std::out_of_range("flat index " + std::to_string(flat) + " out of 1.." + std::to_string(n_));
    int alpha = 1;
    while (alpha < blocks() && flat > offsets_[alpha]) ++alpha;
    return {flat - offsets_[alpha - 1], alpha};
  }

  // 0-based helpers used by the numeric kernels.
  int first0(int alpha) const { return offsets_[check_block(alpha) - 1]; }
  int flat0(int i, int alpha) const { return flat_index({i, alpha}) - 1; }
  int block_of0(int k0) const { return multi_index(k0 + 1).alpha; }
  int pos_of0(int k0) const { return multi_index(k0 + 1).i; }

  /// c^{i(a)}_{j(b)k(c)} = delta^a_b delta^a_c delta^i_{j+k-1}.
  double structure_constant(MultiIndex up, MultiIndex lo1, MultiIndex lo2) const {
    check(up);
    check(lo1);
    check(lo2);
    return (up.alpha == lo1.alpha && up.alpha == lo2.alpha && up.i == lo1.i + lo2.i - 1) ? 1.0 : 0.0;
  }
  double structure_constant0(int i0, int j0, int k0) const {
    return structure_constant(multi_index(i0 + 1), multi_index(j0 + 1), multi_index(k0 + 1));
  }

  friend bool operator==(const BlockStructure& a, const BlockStructure& b) { return a.sizes_ == b.sizes_; }

private:
  int check_block(int alpha) const {
    if (alpha < 1 || alpha > blocks()) throw std::out_of_range("block label " + std::to_string(alpha) + " out of range");
    return alpha;
  }
  void check(MultiIndex mi) const {
    check_block(mi.alpha);
    if (mi.i < 1 || mi.i > sizes_[mi.alpha - 1])
      throw std::out_of_range("index " + std::to_string(mi.i) + "(" + std::to_string(mi.alpha) + ") out of range");
  }

  std::vector<int> sizes_;
  std::vector<int> offsets_;
  int n_ = 0;
};

/// (X o Y)^{i(a)} = sum_{j+k=i+1, same block} X^{j(a)} Y^{k(a)}.
template <class T>
std::vector<T> circ_product(const BlockStructure& bs, const std::vector<T>& x, const std::vector<T>& y) {
  if (int(x.size()) != bs.n() || int(y.size()) != bs.n())
    throw std::invalid_argument("circ_product: vector length must equal n");
  std::vector<T> out(bs.n(), T(0));
  for (int a = 1; a <= bs.blocks(); ++a) {
    const int m = bs.size(a), off = bs.first0(a);
    for (int i = 1; i <= m; ++i) {
      T acc(0);
      for (int j = 1; j <= i; ++j) acc += x[off + j - 1] * y[off + (i - j + 1) - 1];
      out[off + i - 1] = acc;
    }
  }
  return out;
}

/// Operator of multiplication V^i_j = c^i_{jk} X^k: block-diagonal, each
/// block lower-triangular Toeplitz with first column X restricted to it.
template <class T>
std::vector<std::vector<T>> mult_operator(const BlockStructure& bs, const std::vector<T>& x) {
  if (int(x.size()) != bs.n()) throw std::invalid_argument("mult_operator: vector length must equal n");
  std::vector<std::vector<T>> v(bs.n(), std::vector<T>(bs.n(), T(0)));
  for (int a = 1; a <= bs.blocks(); ++a) {
    const int m = bs.size(a), off = bs.first0(a);
    for (int i = 1; i <= m; ++i)
      for (int j = 1; j <= i; ++j) v[off + i - 1][off + j - 1] = x[off + (i - j + 1) - 1];
  }
  return v;
}

/// e^{i(a)} = delta^i_1.
template <class T = double>
std::vector<T> unit_vector(const BlockStructure& bs) {
  std::vector<T> e(bs.n(), T(0));
  for (int a = 1; a <= bs.blocks(); ++a) e[bs.first0(a)] = T(1);
  return e;
}

/// E^{i(a)} = u^{i(a)}.
template <class T>
std::vector<T> euler_field(const BlockStructure& bs, const std::vector<T>& u) {
  if (int(u.size()) != bs.n()) throw std::invalid_argument("euler_field: point length must equal n");
  return u;
}

}  // namespace jbflow
