#pragma once

// Random submanifold descent and full-space Riemannian gradient baselines.
//
// Each RSDM step restricts the update to X -> U(Y) X with
//   U(Y) = P^T blockdiag(Y, I_{n-r}) P,  Y in O(r),
// and only the first r rows P(r) of P are ever used, through
//   U(Y) X = X + P(r)^T (Y - I_r) P(r) X.

#include <rsdm/core.hpp>
#include <rsdm/frames.hpp>
#include <rsdm/manifold.hpp>
#include <rsdm/problems.hpp>

#include <chrono>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace rsdm {

enum class SolverFamily { RSDM, RSDM_Momentum, RSDM_Exact, RSDM_Stochastic, RGD, RGD_Momentum };
enum class GradNormMode { Full, Skipped };

inline std::string_view to_string(SolverFamily f) {
  switch (f) {
    case SolverFamily::RSDM: return "rsdm";
    case SolverFamily::RSDM_Momentum: return "rsdm-momentum";
    case SolverFamily::RSDM_Exact: return "rsdm-exact";
    case SolverFamily::RSDM_Stochastic: return "rsdm-stochastic";
    case SolverFamily::RGD: return "rgd";
    case SolverFamily::RGD_Momentum: return "rgd-momentum";
  }
  return "?";
}

inline bool parse_family(std::string_view s, SolverFamily& out) {
  for (auto f : {SolverFamily::RSDM, SolverFamily::RSDM_Momentum, SolverFamily::RSDM_Exact,
                 SolverFamily::RSDM_Stochastic, SolverFamily::RGD, SolverFamily::RGD_Momentum}) {
    if (s == to_string(f)) {
      out = f;
      return true;
    }
  }
  return false;
}

inline std::string_view to_string(GradNormMode m) { return m == GradNormMode::Full ? "full" : "skipped"; }

inline bool parse_grad_norm_mode(std::string_view s, GradNormMode& out) {
  if (s == "full") out = GradNormMode::Full;
  else if (s == "skipped") out = GradNormMode::Skipped;
  else return false;
  return true;
}

inline bool is_submanifold_family(SolverFamily f) { return f != SolverFamily::RGD && f != SolverFamily::RGD_Momentum; }

struct SolverConfig {
  SolverFamily family = SolverFamily::RSDM;
  SamplerKind sampler = SamplerKind::UniformPermutation;
  Index r = 2;
  double eta = 0.1;
  RetractionKind retraction = RetractionKind::QR;
  std::int64_t max_iters = 100;
  std::uint64_t seed = 0;
  double beta = 0.0;
  int inner_iters = 1;
  Index batch_size = 1;
  int log_every = 10;
  GradNormMode grad_norm_mode = GradNormMode::Full;
  std::uint64_t enumeration_limit = kEnumerationLimit;
};

/// Short label used in file names: RSDM-P, RSDM-O, RSDM-M-P, RSDM-E, RSDM-S-O, RGD, RGD-M.
inline std::string solver_label(const SolverConfig& c) {
  const std::string suffix = c.sampler == SamplerKind::HaarOrthogonal ? "O" : "P";
  switch (c.family) {
    case SolverFamily::RSDM: return "RSDM-" + suffix;
    case SolverFamily::RSDM_Momentum: return "RSDM-M-" + suffix;
    case SolverFamily::RSDM_Exact: return "RSDM-E";
    case SolverFamily::RSDM_Stochastic: return "RSDM-S-" + suffix;
    case SolverFamily::RGD: return "RGD";
    case SolverFamily::RGD_Momentum: return "RGD-M";
  }
  return "?";
}

/// Throws ConfigError naming the offending field.
inline void validate(const SolverConfig& c, Index n, Index p, bool has_stochastic_gradient) {
  if (!(c.eta > 0.0) || !std::isfinite(c.eta)) throw ConfigError("solver.eta", "step size must be positive and finite");
  if (c.max_iters < 1) throw ConfigError("solver.max_iters", "must be >= 1");
  if (c.log_every < 1) throw ConfigError("solver.log_every", "must be >= 1");
  if (!(c.beta >= 0.0 && c.beta < 1.0)) throw ConfigError("solver.beta", "momentum must lie in [0, 1)");
  if (c.inner_iters < 1) throw ConfigError("solver.inner_iters", "must be >= 1");
  if (c.batch_size < 1) throw ConfigError("solver.batch_size", "must be >= 1");
  if (is_submanifold_family(c.family)) {
    if (c.r < 2)
      throw ConfigError("solver.r", "must be >= 2; at r = 1 the expected projected-gradient ratio "
                                    "r(r-1)/(n(n-1)) is zero and the iterate never moves");
    if (c.r > n) throw ConfigError("solver.r", "must be <= n = " + std::to_string(n));
    const bool exhaustive = c.sampler == SamplerKind::ExhaustivePermutation;
    if (c.family == SolverFamily::RSDM_Exact) {
      if (!exhaustive) throw ConfigError("solver.sampler", "rsdm-exact requires the exhaustive sampler");
      const auto count = truncated_permutation_count(n, c.r);
      if (count > c.enumeration_limit)
        throw ConfigError("solver.sampler", "exhaustive sweep needs " + std::to_string(count) +
                                                " frames, above the enumeration limit " +
                                                std::to_string(c.enumeration_limit));
    } else if (exhaustive) {
      throw ConfigError("solver.sampler", "the exhaustive sampler is only valid for rsdm-exact");
    }
  } else if (!retraction_supported(c.retraction, n, p)) {
    throw ConfigError("solver.retraction", std::string(to_string(c.retraction)) + " retraction requires n == p");
  }
  if (c.family == SolverFamily::RSDM_Stochastic && !has_stochastic_gradient)
    throw ConfigError("solver.family", "rsdm-stochastic needs a problem with a stochastic gradient");
}

/// Fields set away from their defaults that the chosen family does not read.
inline std::vector<std::string> ignored_fields(const SolverConfig& c) {
  const SolverConfig d;
  std::vector<std::string> out;
  const bool momentum = c.family == SolverFamily::RSDM_Momentum || c.family == SolverFamily::RGD_Momentum;
  if (!momentum && c.beta != d.beta) out.emplace_back("solver.beta");
  if (c.family != SolverFamily::RSDM_Momentum && c.inner_iters != d.inner_iters) out.emplace_back("solver.inner_iters");
  if (c.family != SolverFamily::RSDM_Stochastic && c.batch_size != d.batch_size) out.emplace_back("solver.batch_size");
  if (!is_submanifold_family(c.family)) {
    if (c.r != d.r) out.emplace_back("solver.r");
    if (c.sampler != d.sampler) out.emplace_back("solver.sampler");
  }
  return out;
}

struct TraceRecord {
  std::int64_t iter = 0;
  std::int64_t time_ns = 0;
  double value = 0.0;
  std::optional<double> optgap;
  std::optional<double> grad_norm_sq;      // ||grad F(X_k)||^2
  std::optional<double> sub_grad_norm_sq;  // ||grad F~_k(I_r)||^2 of the step taken from X_k
  double feasibility = 0.0;
};

/// Per-sweep diagnostics of the exact variant, evaluated at the sweep-start
/// gradient (lhs, rhs_full) and along the inner iterates (inner_sum).
struct SweepRecord {
  std::int64_t outer = 0;
  double lhs = 0.0;
  double rhs_full = 0.0;
  double constant = 0.0;  // C_p
  double inner_sum = 0.0;
  double ratio() const { return rhs_full > 0.0 ? lhs / rhs_full : 0.0; }
};

struct Trace {
  std::string label;
  std::vector<TraceRecord> records;
  std::vector<SweepRecord> sweeps;
  Matrix final_point;
};

struct ProjectedGradient {
  SkewMatrix skew;  // P(r) skew(G X^T) P(r)^T
  Matrix a;         // P(r) G
  Matrix bm;        // P(r) X
};

/// grad F~(I_r) = (A Bm^T - Bm A^T)/2 with A = P(r)G, Bm = P(r)X. No n x n product is formed.
inline ProjectedGradient projected_gradient(const Frame& frame, const MatrixRef& g, const MatrixRef& x) {
  require_dims(g.rows() == x.rows() && g.cols() == x.cols(), "projected_gradient: G and X dimensions differ");
  require_dims(x.rows() == frame.n(), "projected_gradient: frame dimension differs from X");
  ProjectedGradient out;
  out.a = frame_apply(frame, g);
  out.bm = frame_apply(frame, x);
  const Matrix m = out.a * out.bm.transpose();
  out.skew = skew_part(m);
  return out;
}

/// Y = Retr_{I_r}(-eta * skew).
inline Matrix submanifold_rotation(const SkewMatrix& skew, double eta, RetractionKind kind) {
  const Index r = skew.size();
  const Matrix v = -eta * skew.matrix();
  return retract_matrix(kind, Matrix::Identity(r, r), v);
}

/// X <- X + P(r)^T (Y - I_r) P(r) X, with bm = P(r) X.
inline void apply_rotation(const Frame& frame, const Matrix& y, const Matrix& bm, Matrix& x) {
  Matrix delta = y * bm - bm;
  frame_scatter_add(frame, delta, x);
}

struct StepResult {
  StiefelPoint next;
  Matrix y;
  double sub_grad_norm_sq;
};

inline StepResult rsdm_step(const StiefelPoint& x, const MatrixRef& g, const Frame& frame, double eta,
                            RetractionKind kind) {
  if (!(eta >= 0.0)) throw std::invalid_argument("rsdm_step: eta must be nonnegative");
  const ProjectedGradient pg = projected_gradient(frame, g, x.matrix());
  Matrix y = submanifold_rotation(pg.skew, eta, kind);
  Matrix next = x.matrix();
  apply_rotation(frame, y, pg.bm, next);
  return {StiefelPoint::adopt(std::move(next)), std::move(y), pg.skew.squared_norm()};
}

struct Condition7 {
  double lhs;         // sum_s ||P_s skew(G X^T) P_s^T||^2
  double rhs_full;    // ||skew(G X^T)||^2, dense n x n assembly
  double rhs_trace;   // (||G||^2 - tr(X G^T X G^T)) / 2
};

inline double dense_full_grad_norm_sq(const MatrixRef& x, const MatrixRef& g) {
  const Matrix gxt = g * x.transpose();
  return skew_part(gxt).squared_norm();
}

inline double trace_full_grad_norm_sq(const MatrixRef& x, const MatrixRef& g) {
  const Matrix gtx = g.transpose() * x;  // p x p
  // tr(X G^T X G^T) = tr((G^T X)(G^T X))
  const double tr = gtx.cwiseProduct(gtx.transpose()).sum();
  return 0.5 * (g.squaredNorm() - tr);
}

inline Condition7 condition7_lhs(const std::vector<Frame>& frames, const MatrixRef& x, const MatrixRef& g) {
  if (frames.empty()) throw std::invalid_argument("condition7_lhs: no frames");
  CompensatedSum lhs;
  for (const auto& f : frames) lhs.add(projected_gradient(f, g, x).skew.squared_norm());
  return {lhs.value(), dense_full_grad_norm_sq(x, g), trace_full_grad_norm_sq(x, g)};
}

/// C_p = (n-2)! r(r-1) / (n-r)! for a full sweep of truncated permutations.
inline double sweep_constant(Index n, Index r) {
  double c = static_cast<double>(r) * static_cast<double>(r - 1);
  for (Index k = n - r + 1; k <= n - 2; ++k) c *= static_cast<double>(k);
  // (n-2)!/(n-r)! is a product over (n-r, n-2]; when r < 2 the range is empty and c = 0.
  return c;
}

namespace detail {

class Recorder {
 public:
  Recorder(const Problem& problem, const SolverConfig& config, Trace& trace)
      : config_(config), trace_(trace), optimum_(problem.optimum()),
        start_(std::chrono::steady_clock::now()) {}

  bool wants_grad_norm(std::int64_t iter, bool last) const {
    return config_.grad_norm_mode == GradNormMode::Full && (last || iter % config_.log_every == 0);
  }

  void record(std::int64_t iter, const Matrix& x, double value, const std::optional<double>& grad_norm_sq,
              const std::optional<double>& sub_grad_norm_sq) {
    TraceRecord rec;
    rec.iter = iter;
    rec.value = value;
    if (optimum_) rec.optgap = optgap_from_value(value, *optimum_);
    if (config_.grad_norm_mode == GradNormMode::Full) rec.grad_norm_sq = grad_norm_sq;
    rec.sub_grad_norm_sq = sub_grad_norm_sq;
    rec.feasibility = feasibility_residual(x);
    rec.time_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start_).count();
    trace_.records.push_back(rec);
  }

  std::optional<double> grad_norm(std::int64_t iter, bool last, const Matrix& x, const Matrix& g) const {
    if (!wants_grad_norm(iter, last)) return std::nullopt;
    return tangent_projection(x, g).squaredNorm();
  }

 private:
  const SolverConfig& config_;
  Trace& trace_;
  std::optional<double> optimum_;
  std::chrono::steady_clock::time_point start_;
};

struct Streams {
  explicit Streams(std::uint64_t seed) : init(Rng(seed).split(0)), frames(Rng(seed).split(1)), data(Rng(seed).split(2)) {}
  Rng init, frames, data;
};

inline Matrix initial_point(const Problem& problem, const std::optional<StiefelPoint>& initial, Rng& rng) {
  if (initial) {
    require_dims(initial->n() == problem.n() && initial->p() == problem.p(), "initial point dimension mismatch");
    return initial->matrix();
  }
  return random_stiefel(problem.n(), problem.p(), rng).matrix();
}

inline void check_family(const SolverConfig& c, SolverFamily expected, const Problem& problem) {
  if (c.family != expected)
    throw ConfigError("solver.family", "expected " + std::string(to_string(expected)) + ", got " +
                                           std::string(to_string(c.family)));
  validate(c, problem.n(), problem.p(), problem.has_stochastic_gradient());
}

}  // namespace detail

/// Algorithm: sample P_k(r), step along -grad F~_k(I_r) on O(r), map back through U_k(Y).
inline Trace run_rsdm(const Problem& problem, const SolverConfig& config,
                      const std::optional<StiefelPoint>& initial = std::nullopt) {
  detail::check_family(config, SolverFamily::RSDM, problem);
  detail::Streams rng(config.seed);
  Trace trace;
  trace.label = solver_label(config);
  detail::Recorder rec(problem, config, trace);
  Matrix x = detail::initial_point(problem, initial, rng.init);
  const Index r = config.r;
  for (std::int64_t k = 0;; ++k) {
    const bool last = k == config.max_iters;
    auto eval = problem.evaluate(x);
    const auto gn = rec.grad_norm(k, last, x, eval.gradient);
    if (last) {
      rec.record(k, x, eval.value, gn, std::nullopt);
      break;
    }
    const Frame frame = sample_frame(config.sampler, problem.n(), r, rng.frames);
    const ProjectedGradient pg = projected_gradient(frame, eval.gradient, x);
    rec.record(k, x, eval.value, gn, pg.skew.squared_norm());
    const Matrix y = submanifold_rotation(pg.skew, config.eta, config.retraction);
    apply_rotation(frame, y, pg.bm, x);
  }
  trace.final_point = std::move(x);
  return trace;
}

/// As run_rsdm with G replaced by a fresh mini-batch gradient each iteration.
/// The recorded value is the full objective F.
inline Trace run_rsdm_stochastic(const Problem& problem, const SolverConfig& config,
                                 const std::optional<StiefelPoint>& initial = std::nullopt) {
  detail::check_family(config, SolverFamily::RSDM_Stochastic, problem);
  detail::Streams rng(config.seed);
  Trace trace;
  trace.label = solver_label(config);
  detail::Recorder rec(problem, config, trace);
  Matrix x = detail::initial_point(problem, initial, rng.init);
  for (std::int64_t k = 0;; ++k) {
    const bool last = k == config.max_iters;
    const double value = problem.value(x);
    std::optional<double> gn;
    if (rec.wants_grad_norm(k, last)) gn = tangent_projection(x, problem.gradient(x)).squaredNorm();
    if (last) {
      rec.record(k, x, value, gn, std::nullopt);
      break;
    }
    const Matrix g = problem.stochastic_gradient(x, config.batch_size, rng.data);
    const Frame frame = sample_frame(config.sampler, problem.n(), config.r, rng.frames);
    const ProjectedGradient pg = projected_gradient(frame, g, x);
    rec.record(k, x, value, gn, pg.skew.squared_norm());
    const Matrix y = submanifold_rotation(pg.skew, config.eta, config.retraction);
    apply_rotation(frame, y, pg.bm, x);
  }
  trace.final_point = std::move(x);
  return trace;
}

/// Riemannian gradient of F~(Y) = F(U(Y) X) at a general Y in O(r):
/// (W - Y W^T Y)/2 with W = P(r) grad F(Z) (P(r) X)^T, Z = U(Y) X.
inline Matrix submanifold_gradient_at(const Problem& problem, const Frame& frame, const MatrixRef& x,
                                      const Matrix& bm, const Matrix& y) {
  Matrix z = x;
  apply_rotation(frame, y, bm, z);
  const Matrix gz = problem.gradient(z);
  const Matrix w = frame_apply(frame, gz) * bm.transpose();
  return 0.5 * (w - y * w.transpose() * y);
}

/// Fixed frame per outer iteration, S momentum steps on O(r) from Y = I_r.
inline Trace run_rsdm_momentum(const Problem& problem, const SolverConfig& config,
                               const std::optional<StiefelPoint>& initial = std::nullopt) {
  detail::check_family(config, SolverFamily::RSDM_Momentum, problem);
  detail::Streams rng(config.seed);
  Trace trace;
  trace.label = solver_label(config);
  detail::Recorder rec(problem, config, trace);
  Matrix x = detail::initial_point(problem, initial, rng.init);
  const Index r = config.r;
  const Matrix identity = Matrix::Identity(r, r);
  for (std::int64_t k = 0;; ++k) {
    const bool last = k == config.max_iters;
    auto eval = problem.evaluate(x);
    const auto gn = rec.grad_norm(k, last, x, eval.gradient);
    if (last) {
      rec.record(k, x, eval.value, gn, std::nullopt);
      break;
    }
    const Frame frame = sample_frame(config.sampler, problem.n(), r, rng.frames);
    const ProjectedGradient pg = projected_gradient(frame, eval.gradient, x);
    rec.record(k, x, eval.value, gn, pg.skew.squared_norm());

    Matrix y = identity;
    Matrix y_prev = identity;
    for (int s = 0; s < config.inner_iters; ++s) {
      // At s = 0, Z = X and the gradient is the projected gradient itself.
      Matrix v = s == 0 ? Matrix(-config.eta * pg.skew.matrix())
                        : Matrix(-config.eta * submanifold_gradient_at(problem, frame, x, pg.bm, y));
      if (config.beta != 0.0 && s > 0) v += config.beta * tangent_projection(y, y - y_prev);
      Matrix y_next = retract_matrix(config.retraction, y, v);
      y_prev = std::move(y);
      y = std::move(y_next);
    }
    apply_rotation(frame, y, pg.bm, x);
  }
  trace.final_point = std::move(x);
  return trace;
}

/// Double loop: each outer iteration sweeps every truncated permutation once,
/// in an order shuffled with the run RNG, refreshing the gradient per step.
inline Trace run_rsdm_exact(const Problem& problem, const SolverConfig& config,
                            const std::optional<StiefelPoint>& initial = std::nullopt) {
  detail::check_family(config, SolverFamily::RSDM_Exact, problem);
  detail::Streams rng(config.seed);
  Trace trace;
  trace.label = solver_label(config);
  detail::Recorder rec(problem, config, trace);
  Matrix x = detail::initial_point(problem, initial, rng.init);
  const std::vector<Frame> frames = enumerate_truncated_permutations(problem.n(), config.r, config.enumeration_limit);
  const double c_p = sweep_constant(problem.n(), config.r);
  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::int64_t k = 0;; ++k) {
    const bool last = k == config.max_iters;
    auto eval = problem.evaluate(x);
    const auto gn = rec.grad_norm(k, last, x, eval.gradient);
    if (last) {
      rec.record(k, x, eval.value, gn, std::nullopt);
      break;
    }
    const Condition7 c7 = condition7_lhs(frames, x, eval.gradient);
    SweepRecord sweep{k, c7.lhs, c7.rhs_full, c_p, 0.0};
    shuffle(order, rng.frames);
    Matrix g = std::move(eval.gradient);
    CompensatedSum inner;
    for (std::size_t s = 0; s < order.size(); ++s) {
      if (s > 0) g = problem.gradient(x);
      const Frame& frame = frames[order[s]];
      const ProjectedGradient pg = projected_gradient(frame, g, x);
      const double sub = pg.skew.squared_norm();
      inner.add(sub);
      if (s == 0) rec.record(k, x, eval.value, gn, sub);
      const Matrix y = submanifold_rotation(pg.skew, config.eta, config.retraction);
      apply_rotation(frame, y, pg.bm, x);
    }
    sweep.inner_sum = inner.value();
    trace.sweeps.push_back(sweep);
  }
  trace.final_point = std::move(x);
  return trace;
}

namespace detail {

inline Trace run_rgd_impl(const Problem& problem, const SolverConfig& config, double beta,
                          const std::optional<StiefelPoint>& initial) {
  detail::Streams rng(config.seed);
  Trace trace;
  trace.label = solver_label(config);
  detail::Recorder rec(problem, config, trace);
  Matrix x = detail::initial_point(problem, initial, rng.init);
  Matrix x_prev = x;
  for (std::int64_t k = 0;; ++k) {
    const bool last = k == config.max_iters;
    auto eval = problem.evaluate(x);
    const Matrix rg = tangent_projection(x, eval.gradient);
    rec.record(k, x, eval.value, rg.squaredNorm(), std::nullopt);
    if (last) break;
    Matrix v = -config.eta * rg;
    if (beta != 0.0) v += beta * tangent_projection(x, x - x_prev);
    Matrix next = retract_matrix(config.retraction, x, v);
    x_prev = std::move(x);
    x = std::move(next);
  }
  trace.final_point = std::move(x);
  return trace;
}

}  // namespace detail

/// X_{k+1} = Retr_{X_k}(-eta grad F(X_k)).
inline Trace run_rgd(const Problem& problem, const SolverConfig& config,
                     const std::optional<StiefelPoint>& initial = std::nullopt) {
  detail::check_family(config, SolverFamily::RGD, problem);
  return detail::run_rgd_impl(problem, config, 0.0, initial);
}

/// Adds beta * P_{X_k}(X_k - X_{k-1}) to the RGD step.
inline Trace run_rgd_momentum(const Problem& problem, const SolverConfig& config,
                              const std::optional<StiefelPoint>& initial = std::nullopt) {
  detail::check_family(config, SolverFamily::RGD_Momentum, problem);
  return detail::run_rgd_impl(problem, config, config.beta, initial);
}

inline Trace run_solver(const Problem& problem, const SolverConfig& config,
                        const std::optional<StiefelPoint>& initial = std::nullopt) {
  switch (config.family) {
    case SolverFamily::RSDM: return run_rsdm(problem, config, initial);
    case SolverFamily::RSDM_Momentum: return run_rsdm_momentum(problem, config, initial);
    case SolverFamily::RSDM_Exact: return run_rsdm_exact(problem, config, initial);
    case SolverFamily::RSDM_Stochastic: return run_rsdm_stochastic(problem, config, initial);
    case SolverFamily::RGD: return run_rgd(problem, config, initial);
    case SolverFamily::RGD_Momentum: return run_rgd_momentum(problem, config, initial);
  }
  throw ConfigError("solver.family", "unknown family");
}

}  // namespace rsdm
