#pragma once

// Independent numerical oracles: finite-difference gradients, Monte Carlo
// checks of the projected-gradient expectation and its tail, the gradient
// norm inequality, and a dense n x n assembly of the submanifold update.

#include <rsdm/core.hpp>
#include <rsdm/frames.hpp>
#include <rsdm/manifold.hpp>
#include <rsdm/problems.hpp>
#include <rsdm/solvers.hpp>

#include <algorithm>
#include <thread>
#include <vector>

namespace rsdm {

/// Central differences over every canonical direction E_ij.
inline Matrix fd_gradient(const Problem& problem, const MatrixRef& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_gradient: h must be positive");
  Matrix probe = x;
  Matrix g(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index i = 0; i < x.rows(); ++i) {
      const double orig = probe(i, j);
      probe(i, j) = orig + h;
      const double up = problem.value(probe);
      probe(i, j) = orig - h;
      const double down = problem.value(probe);
      probe(i, j) = orig;
      g(i, j) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

/// ||fd - analytic||_F / max(||analytic||_F, 1e-300)
inline double gradient_relative_error(const Problem& problem, const MatrixRef& x, double h) {
  const Matrix analytic = problem.gradient(x);
  const Matrix numeric = fd_gradient(problem, x, h);
  return (numeric - analytic).norm() / std::max(analytic.norm(), 1e-300);
}

struct MonteCarloReport {
  double estimate = 0.0;
  double std_error = 0.0;
  std::int64_t trials = 0;
  double target = 0.0;
  double z_score = 0.0;
};

/// The standard error is floored at 1e-12 (relative to the target) so that
/// deterministic cases such as r = n compare at rounding level, not by
/// dividing rounding noise by itself.
inline MonteCarloReport make_report(double mean, double std_error, std::int64_t trials, double target) {
  MonteCarloReport rep{mean, std_error, trials, target, 0.0};
  const double floor = 1e-12 * std::max(1.0, std::abs(target));
  rep.z_score = (mean - target) / std::max(std_error, floor);
  return rep;
}

/// r(r-1) / (n(n-1))
inline double expected_projection_ratio(Index n, Index r) {
  return static_cast<double>(r) * static_cast<double>(r - 1) /
         (static_cast<double>(n) * static_cast<double>(n - 1));
}

namespace detail {

/// Ratios ||P_s skew(G X^T) P_s^T||^2 / ||skew(G X^T)||^2 for `trials` frames.
/// Trials are split into a fixed number of shards with streams rng.split(shard),
/// so the output does not depend on the thread count.
inline std::vector<double> projection_ratios(const MatrixRef& x, const MatrixRef& g, SamplerKind sampler, Index r,
                                             std::int64_t trials, Rng& rng, int threads) {
  const double full = dense_full_grad_norm_sq(x, g);
  if (!(full > 1e-300)) throw NumericalError("projected-gradient ratio: full gradient vanishes");
  constexpr std::int64_t kShards = 16;
  const Rng base(rng.next_u64());
  std::vector<double> ratios(static_cast<std::size_t>(trials));
  const Matrix xm = x, gm = g;
  auto work = [&](std::int64_t shard) {
    Rng local = base.split(static_cast<std::uint64_t>(shard));
    for (std::int64_t t = shard; t < trials; t += kShards) {
      const Frame f = sample_frame(sampler, xm.rows(), r, local);
      ratios[static_cast<std::size_t>(t)] = projected_gradient(f, gm, xm).skew.squared_norm() / full;
    }
  };
  threads = std::max(1, std::min<int>(threads, kShards));
  if (threads == 1) {
    for (std::int64_t s = 0; s < kShards; ++s) work(s);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::int64_t s = w; s < kShards; s += threads) work(s);
      });
    for (auto& t : pool) t.join();
  }
  return ratios;
}

inline void mean_and_stderr(const std::vector<double>& xs, double& mean, double& se) {
  CompensatedSum sum;
  for (double v : xs) sum.add(v);
  mean = sum.value() / static_cast<double>(xs.size());
  CompensatedSum sq;
  for (double v : xs) sq.add((v - mean) * (v - mean));
  const double n = static_cast<double>(xs.size());
  se = xs.size() > 1 ? std::sqrt(sq.value() / (n - 1.0) / n) : 0.0;
}

}  // namespace detail

/// Monte Carlo estimate of E||grad F~_X(I_r)||^2 / ||grad F_X(I_n)||^2 over frames
/// at fixed (X, G), against r(r-1)/(n(n-1)).
inline MonteCarloReport prop1_ratio(const MatrixRef& x, const MatrixRef& g, SamplerKind sampler, Index r,
                                    std::int64_t trials, Rng& rng, int threads = 1) {
  if (trials < 100) throw std::invalid_argument("prop1_ratio: need at least 100 trials");
  require_dims(r >= 2 && r <= x.rows(), "prop1_ratio: need 2 <= r <= n");
  if (sampler == SamplerKind::ExhaustivePermutation)
    throw std::invalid_argument("prop1_ratio: sampler must be haar or permutation");
  const auto ratios = detail::projection_ratios(x, g, sampler, r, trials, rng, threads);
  double mean, se;
  detail::mean_and_stderr(ratios, mean, se);
  return make_report(mean, se, trials, expected_projection_ratio(x.rows(), r));
}

struct Lemma2Result {
  double lhs;  // ||skew(G X^T)||^2
  double rhs;  // ||grad F(X)||^2 / 2
  bool ok;
};

inline Lemma2Result lemma2_check(const MatrixRef& x, const MatrixRef& g) {
  const double lhs = dense_full_grad_norm_sq(x, g);
  const double rhs = 0.5 * tangent_projection(x, g).squaredNorm();
  return {lhs, rhs, lhs >= rhs - 1e-10};
}

struct TailReport {
  double fraction = 0.0;   // share of Haar frames with ratio >= expected/2
  double std_error = 0.0;  // binomial
  double median_ratio = 0.0;
  double expected_ratio = 0.0;
  std::int64_t trials = 0;
};

inline TailReport prop2_tail(const MatrixRef& x, const MatrixRef& g, Index r, std::int64_t trials, Rng& rng,
                             int threads = 1) {
  if (trials < 1000) throw std::invalid_argument("prop2_tail: need at least 1000 trials");
  require_dims(r >= 2 && r <= x.rows(), "prop2_tail: need 2 <= r <= n");
  auto ratios = detail::projection_ratios(x, g, SamplerKind::HaarOrthogonal, r, trials, rng, threads);
  TailReport rep;
  rep.trials = trials;
  rep.expected_ratio = expected_projection_ratio(x.rows(), r);
  const double threshold = 0.5 * rep.expected_ratio;
  // the r = n ratio is 1 up to rounding
  const double slack = 1e-12;
  const auto hits = std::count_if(ratios.begin(), ratios.end(), [&](double v) { return v >= threshold - slack; });
  rep.fraction = static_cast<double>(hits) / static_cast<double>(trials);
  rep.std_error = std::sqrt(rep.fraction * (1.0 - rep.fraction) / static_cast<double>(trials));
  const auto mid = ratios.begin() + static_cast<std::ptrdiff_t>(ratios.size() / 2);
  std::nth_element(ratios.begin(), mid, ratios.end());
  rep.median_ratio = *mid;
  return rep;
}

struct NormIdentity {
  double dense;
  double trace_form;
};

inline NormIdentity full_grad_norm_identity(const MatrixRef& x, const MatrixRef& g) {
  return {dense_full_grad_norm_sq(x, g), trace_full_grad_norm_sq(x, g)};
}

/// Full n x n orthogonal P whose first r rows are the frame.
inline Matrix complete_frame(const Frame& frame) {
  const Index n = frame.n(), r = frame.r();
  if (frame.is_permutation()) {
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (Index i : frame.indices()) used[static_cast<std::size_t>(i)] = true;
    std::vector<Index> order = frame.indices();
    for (Index i = 0; i < n; ++i)
      if (!used[static_cast<std::size_t>(i)]) order.push_back(i);
    Matrix p = Matrix::Zero(n, n);
    for (Index k = 0; k < n; ++k) p(k, order[static_cast<std::size_t>(k)]) = 1.0;
    return p;
  }
  const Matrix& rows = frame.rows();
  Eigen::HouseholderQR<Matrix> qr(rows.transpose());
  const Matrix q = qr.householderQ();
  Matrix p(n, n);
  p.topRows(r) = rows;
  if (n > r) p.bottomRows(n - r) = q.rightCols(n - r).transpose();
  const double off = (p * p.transpose() - Matrix::Identity(n, n)).norm();
  if (!(off <= 1e-10)) throw NumericalError("complete_frame: completion is not orthogonal");
  return p;
}

/// ||U(Y) X - [X + P(r)^T (Y - I_r) P(r) X]||_F with U(Y) assembled densely.
inline double block_embedding_equivalence(const Frame& frame, const MatrixRef& y, const MatrixRef& x) {
  const Index n = frame.n(), r = frame.r();
  require_dims(n <= 64, "block_embedding_equivalence: dense assembly limited to n <= 64");
  require_dims(y.rows() == r && y.cols() == r, "block_embedding_equivalence: Y must be r x r");
  const Matrix p = complete_frame(frame);
  Matrix block = Matrix::Identity(n, n);
  block.topLeftCorner(r, r) = y;
  const Matrix u = p.transpose() * block * p;
  Matrix rank_r = x;
  const Matrix bm = frame_apply(frame, x);
  apply_rotation(frame, y, bm, rank_r);
  return (u * x - rank_r).norm();
}

}  // namespace rsdm
