#pragma once

// Random projections P(r): the first r rows of an n x n orthogonal matrix.
// Only P(r) is ever stored; the full P never is.

#include <rsdm/core.hpp>
#include <rsdm/manifold.hpp>

#include <numeric>
#include <string_view>
#include <variant>
#include <vector>

namespace rsdm {

enum class SamplerKind { HaarOrthogonal, UniformPermutation, ExhaustivePermutation };

inline std::string_view to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::HaarOrthogonal: return "haar";
    case SamplerKind::UniformPermutation: return "permutation";
    case SamplerKind::ExhaustivePermutation: return "exhaustive";
  }
  return "?";
}

inline bool parse_sampler(std::string_view s, SamplerKind& out) {
  if (s == "haar" || s == "orthogonal" || s == "O") out = SamplerKind::HaarOrthogonal;
  else if (s == "permutation" || s == "P") out = SamplerKind::UniformPermutation;
  else if (s == "exhaustive") out = SamplerKind::ExhaustivePermutation;
  else return false;
  return true;
}

inline constexpr std::uint64_t kEnumerationLimit = 1'000'000;

class Frame {
 public:
  struct Dense {
    Matrix rows;  // r x n, orthonormal rows
  };
  struct Permutation {
    std::vector<Index> indices;  // r distinct entries of [0, n)
  };

  static Frame dense(Matrix rows) {
    require_dims(rows.rows() >= 1 && rows.rows() <= rows.cols(), "Frame: need 1 <= r <= n");
    const Index n = rows.cols();
    return Frame(n, Dense{std::move(rows)});
  }

  static Frame permutation(Index n, std::vector<Index> indices) {
    const auto r = static_cast<Index>(indices.size());
    require_dims(r >= 1 && r <= n, "Frame: need 1 <= r <= n");
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (Index i : indices) {
      require_dims(i >= 0 && i < n, "Frame: permutation index out of range");
      require_dims(!seen[static_cast<std::size_t>(i)], "Frame: permutation indices must be distinct");
      seen[static_cast<std::size_t>(i)] = true;
    }
    return Frame(n, Permutation{std::move(indices)});
  }

  static Frame identity(Index n) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    return Frame(n, Permutation{std::move(idx)});
  }

  Index n() const { return n_; }
  Index r() const {
    if (const auto* d = std::get_if<Dense>(&data_)) return d->rows.rows();
    return static_cast<Index>(std::get<Permutation>(data_).indices.size());
  }
  bool is_permutation() const { return std::holds_alternative<Permutation>(data_); }
  const Matrix& rows() const { return std::get<Dense>(data_).rows; }
  const std::vector<Index>& indices() const { return std::get<Permutation>(data_).indices; }

  /// Explicit r x n matrix; 0/1 entries for permutation frames.
  Matrix to_dense() const {
    if (const auto* d = std::get_if<Dense>(&data_)) return d->rows;
    const auto& idx = indices();
    Matrix m = Matrix::Zero(static_cast<Index>(idx.size()), n_);
    for (std::size_t i = 0; i < idx.size(); ++i) m(static_cast<Index>(i), idx[i]) = 1.0;
    return m;
  }

  template <class Visitor>
  decltype(auto) visit(Visitor&& v) const {
    return std::visit(std::forward<Visitor>(v), data_);
  }

 private:
  Frame(Index n, std::variant<Dense, Permutation> data) : n_(n), data_(std::move(data)) {}
  Index n_;
  std::variant<Dense, Permutation> data_;
};

inline Frame sample_haar_frame(Index n, Index r, Rng& rng) {
  require_dims(r >= 1 && r <= n, "sample_haar_frame: need 1 <= r <= n");
  return Frame::dense(qf(rng.gaussian(n, r)).transpose());
}

/// First r entries of a partial Fisher-Yates shuffle of [0, n).
inline Frame sample_permutation_frame(Index n, Index r, Rng& rng) {
  require_dims(r >= 1 && r <= n, "sample_permutation_frame: need 1 <= r <= n");
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < r; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(r));
  return Frame::permutation(n, std::move(pool));
}

inline Frame sample_frame(SamplerKind kind, Index n, Index r, Rng& rng) {
  if (kind == SamplerKind::HaarOrthogonal) return sample_haar_frame(n, r, rng);
  return sample_permutation_frame(n, r, rng);
}

/// P(r) M
inline Matrix frame_apply(const Frame& f, const MatrixRef& m) {
  require_dims(m.rows() == f.n(), "frame_apply: expected " + std::to_string(f.n()) + " rows, got " +
                                      std::to_string(m.rows()));
  return f.visit([&](const auto& v) -> Matrix {
    using T = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<T, Frame::Dense>) {
      return v.rows * m;
    } else {
      Matrix out(static_cast<Index>(v.indices.size()), m.cols());
      for (std::size_t i = 0; i < v.indices.size(); ++i) out.row(static_cast<Index>(i)) = m.row(v.indices[i]);
      return out;
    }
  });
}

/// P(r)^T N
inline Matrix frame_apply_transpose(const Frame& f, const MatrixRef& m) {
  require_dims(m.rows() == f.r(), "frame_apply_transpose: expected " + std::to_string(f.r()) + " rows, got " +
                                      std::to_string(m.rows()));
  return f.visit([&](const auto& v) -> Matrix {
    using T = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<T, Frame::Dense>) {
      return v.rows.transpose() * m;
    } else {
      Matrix out = Matrix::Zero(f.n(), m.cols());
      for (std::size_t i = 0; i < v.indices.size(); ++i) out.row(v.indices[i]) = m.row(static_cast<Index>(i));
      return out;
    }
  });
}

/// target += P(r)^T N, touching only the sampled rows for permutation frames.
inline void frame_scatter_add(const Frame& f, const MatrixRef& m, Matrix& target) {
  require_dims(m.rows() == f.r() && target.rows() == f.n() && target.cols() == m.cols(),
               "frame_scatter_add: dimension mismatch");
  f.visit([&](const auto& v) {
    using T = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<T, Frame::Dense>) {
      target.noalias() += v.rows.transpose() * m;
    } else {
      for (std::size_t i = 0; i < v.indices.size(); ++i) target.row(v.indices[i]) += m.row(static_cast<Index>(i));
    }
  });
}

/// n!/(n-r)!, saturating at UINT64_MAX.
inline std::uint64_t truncated_permutation_count(Index n, Index r) {
  std::uint64_t count = 1;
  for (Index k = n - r + 1; k <= n; ++k) {
    const auto f = static_cast<std::uint64_t>(k);
    if (count > std::numeric_limits<std::uint64_t>::max() / f) return std::numeric_limits<std::uint64_t>::max();
    count *= f;
  }
  return count;
}

/// Every ordered r-tuple of distinct indices in [0, n), lexicographic order.
inline std::vector<Frame> enumerate_truncated_permutations(Index n, Index r,
                                                           std::uint64_t limit = kEnumerationLimit) {
  require_dims(r >= 1 && r <= n, "enumerate_truncated_permutations: need 1 <= r <= n");
  const std::uint64_t count = truncated_permutation_count(n, r);
  if (count > limit)
    throw ConfigError("sampler", "exhaustive enumeration needs " + std::to_string(count) +
                                     " truncated permutations, above the limit " + std::to_string(limit));
  std::vector<Frame> out;
  out.reserve(count);
  std::vector<Index> tuple;
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  auto recurse = [&](auto&& self) -> void {
    if (static_cast<Index>(tuple.size()) == r) {
      out.push_back(Frame::permutation(n, tuple));
      return;
    }
    for (Index i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      used[static_cast<std::size_t>(i)] = true;
      tuple.push_back(i);
      self(self);
      tuple.pop_back();
      used[static_cast<std::size_t>(i)] = false;
    }
  };
  recurse(recurse);
  return out;
}

/// Fisher-Yates shuffle driven by Rng.
template <class T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace rsdm
