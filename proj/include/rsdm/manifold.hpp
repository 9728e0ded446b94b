#pragma once

// Geometry of St(n,p) = {X in R^{n x p} : X^T X = I_p} under the Euclidean
// metric, and of the orthogonal group O(n) as its square case.

#include <rsdm/core.hpp>

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <array>
#include <string>
#include <string_view>

namespace rsdm {

inline constexpr double kFeasibilityTol = 1e-10;
inline constexpr double kTangencyTol = 1e-10;

/// Square matrix with data == -data^T holding exactly.
class SkewMatrix {
 public:
  SkewMatrix() = default;
  explicit SkewMatrix(Index size) : data_(Matrix::Zero(size, size)) {}

  /// (A - A^T)/2, mirrored so antisymmetry is exact.
  static SkewMatrix from_square(const MatrixRef& a) {
    require_dims(a.rows() == a.cols(), "skew_part: input must be square, got " +
                                           std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    SkewMatrix s(a.rows());
    for (Index j = 0; j < a.cols(); ++j) {
      for (Index i = j + 1; i < a.rows(); ++i) {
        const double v = 0.5 * (a(i, j) - a(j, i));
        s.data_(i, j) = v;
        s.data_(j, i) = -v;
      }
    }
    return s;
  }

  const Matrix& matrix() const { return data_; }
  Index size() const { return data_.rows(); }
  double squared_norm() const { return data_.squaredNorm(); }

  SkewMatrix scaled(double factor) const {
    SkewMatrix s;
    s.data_ = factor * data_;
    return s;
  }

 private:
  Matrix data_;
};

inline SkewMatrix skew_part(const MatrixRef& a) { return SkewMatrix::from_square(a); }

/// {A}_S = (A + A^T)/2
inline Matrix sym_part(const MatrixRef& a) {
  require_dims(a.rows() == a.cols(), "sym_part: input must be square");
  return 0.5 * (a + a.transpose());
}

/// ||X^T X - I_p||_F
inline double feasibility_residual(const MatrixRef& x) {
  Matrix gram = x.transpose() * x;
  gram.diagonal().array() -= 1.0;
  return gram.norm();
}

/// ||X^T U + U^T X||_F
inline double tangency_residual(const MatrixRef& x, const MatrixRef& u) {
  const Matrix xtu = x.transpose() * u;
  return (xtu + xtu.transpose()).norm();
}

class StiefelPoint {
 public:
  /// Validates dimensions and feasibility.
  static StiefelPoint from(Matrix data, double tol = kFeasibilityTol) {
    require_dims(data.cols() >= 1 && data.rows() >= data.cols(),
                 "StiefelPoint: need n >= p >= 1, got " + std::to_string(data.rows()) + "x" +
                     std::to_string(data.cols()));
    const double res = feasibility_residual(data);
    if (!(res <= tol))
      throw NumericalError("StiefelPoint: columns not orthonormal, residual " + std::to_string(res));
    return StiefelPoint(std::move(data));
  }

  /// Takes ownership without the O(np^2) feasibility check; the caller
  /// guarantees orthonormal columns (solver inner loops).
  static StiefelPoint adopt(Matrix data) { return StiefelPoint(std::move(data)); }

  static StiefelPoint identity(Index n, Index p) { return StiefelPoint(Matrix::Identity(n, p)); }

  const Matrix& matrix() const { return data_; }
  Index n() const { return data_.rows(); }
  Index p() const { return data_.cols(); }
  bool square() const { return data_.rows() == data_.cols(); }

 private:
  explicit StiefelPoint(Matrix data) : data_(std::move(data)) {}
  Matrix data_;
};

class TangentVector {
 public:
  static TangentVector at(const StiefelPoint& base, Matrix data, double tol = kTangencyTol) {
    require_dims(data.rows() == base.n() && data.cols() == base.p(), "TangentVector: dimension mismatch");
    const double res = tangency_residual(base.matrix(), data);
    if (!(res <= tol * std::max(1.0, data.norm())))
      throw NumericalError("TangentVector: not tangent, residual " + std::to_string(res));
    return TangentVector(std::move(data));
  }

  static TangentVector adopt(Matrix data) { return TangentVector(std::move(data)); }

  static TangentVector zero(const StiefelPoint& base) { return TangentVector(Matrix::Zero(base.n(), base.p())); }

  const Matrix& matrix() const { return data_; }

  TangentVector scaled(double t) const { return TangentVector(t * data_); }

 private:
  explicit TangentVector(Matrix data) : data_(std::move(data)) {}
  Matrix data_;
};

enum class RetractionKind { QR, Polar, Cayley, Exponential };

inline constexpr std::array<RetractionKind, 4> kAllRetractions{RetractionKind::QR, RetractionKind::Polar,
                                                               RetractionKind::Cayley, RetractionKind::Exponential};

inline std::string_view to_string(RetractionKind kind) {
  switch (kind) {
    case RetractionKind::QR: return "qr";
    case RetractionKind::Polar: return "polar";
    case RetractionKind::Cayley: return "cayley";
    case RetractionKind::Exponential: return "exp";
  }
  return "?";
}

inline bool parse_retraction(std::string_view s, RetractionKind& out) {
  if (s == "qr" || s == "QR") out = RetractionKind::QR;
  else if (s == "polar" || s == "Polar") out = RetractionKind::Polar;
  else if (s == "cayley" || s == "Cayley") out = RetractionKind::Cayley;
  else if (s == "exp" || s == "exponential" || s == "Exponential") out = RetractionKind::Exponential;
  else return false;
  return true;
}

/// Cayley and exponential retractions are implemented for the square case only.
inline bool retraction_supported(RetractionKind kind, Index n, Index p) {
  return kind == RetractionKind::QR || kind == RetractionKind::Polar || n == p;
}

/// P_X(W) = W - X {X^T W}_S, the orthogonal projection onto T_X St(n,p).
inline Matrix tangent_projection(const MatrixRef& x, const MatrixRef& w) {
  require_dims(x.rows() == w.rows() && x.cols() == w.cols(), "tangent_projection: dimension mismatch");
  const Matrix xtw = x.transpose() * w;
  return w - x * (0.5 * (xtw + xtw.transpose()));
}

inline TangentVector riemannian_gradient(const StiefelPoint& x, const MatrixRef& euclidean_grad) {
  return TangentVector::adopt(tangent_projection(x.matrix(), euclidean_grad));
}

/// Thin Q-factor of M (n x p, n >= p) with diag(R) > 0.
inline Matrix qf(const MatrixRef& m) {
  const Index n = m.rows(), p = m.cols();
  require_dims(n >= p && p >= 1, "qf: need rows >= cols >= 1");
  if (!m.allFinite()) throw NumericalError("qf: non-finite input");
  Eigen::HouseholderQR<Matrix> qr(m);
  const auto& packed = qr.matrixQR();
  const double scale = packed.diagonal().cwiseAbs().maxCoeff();
  const double floor = std::numeric_limits<double>::epsilon() * static_cast<double>(n) * scale;
  Matrix q = Matrix::Identity(n, p);
  q.applyOnTheLeft(qr.householderQ());
  for (Index j = 0; j < p; ++j) {
    const double rjj = packed(j, j);
    if (!(std::abs(rjj) > floor) || scale == 0.0)
      throw NumericalError("qf: rank-deficient input (column " + std::to_string(j) + ")");
    if (rjj < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

/// Orthogonal polar factor U V^T of M via thin SVD.
inline Matrix polar_factor(const MatrixRef& m) {
  if (!m.allFinite()) throw NumericalError("polar_factor: non-finite input");
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (s.size() > 0 && !(s(s.size() - 1) > std::numeric_limits<double>::epsilon() * s(0)))
    throw NumericalError("polar_factor: rank-deficient input");
  return svd.matrixU() * svd.matrixV().transpose();
}

/// (X + U)(I_p + U^T U)^{-1/2} through an eigendecomposition of I + U^T U.
inline Matrix polar_retraction_eigen(const MatrixRef& x, const MatrixRef& u) {
  const Index p = x.cols();
  const Matrix gram = Matrix::Identity(p, p) + u.transpose() * u;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Vector inv_sqrt = eig.eigenvalues().array().rsqrt().matrix();
  return (x + u) * (eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose());
}

/// expm of a skew-symmetric matrix (Pade scaling-and-squaring).
inline Matrix expm_skew(const SkewMatrix& w) { return w.matrix().exp(); }

inline Matrix cayley_transform(const SkewMatrix& w) {
  const Index n = w.size();
  const Matrix half = 0.5 * w.matrix();
  const Matrix lhs = Matrix::Identity(n, n) - half;
  const Matrix rhs = Matrix::Identity(n, n) + half;
  return lhs.partialPivLu().solve(rhs);
}

/// Retraction on raw matrices: x must be feasible and u tangent at x.
/// Cayley uses the half-step form (I - W/2)^{-1}(I + W/2)X with W = U X^T.
inline Matrix retract_matrix(RetractionKind kind, const MatrixRef& x, const MatrixRef& u) {
  require_dims(x.rows() == u.rows() && x.cols() == u.cols(), "retract: dimension mismatch");
  if (!retraction_supported(kind, x.rows(), x.cols()))
    throw UnsupportedRetraction(std::string("retract: ") + std::string(to_string(kind)) +
                                " retraction requires n == p, got " + std::to_string(x.rows()) + "x" +
                                std::to_string(x.cols()));
  switch (kind) {
    case RetractionKind::QR:
      return qf(x + u);
    case RetractionKind::Polar:
      return polar_factor(x + u);
    case RetractionKind::Cayley: {
      const Matrix w = u * x.transpose();
      return cayley_transform(skew_part(w)) * x;
    }
    case RetractionKind::Exponential: {
      const Matrix xtu = x.transpose() * u;
      return x * expm_skew(skew_part(xtu));
    }
  }
  throw UnsupportedRetraction("retract: unknown kind");
}

inline StiefelPoint retract(RetractionKind kind, const StiefelPoint& x, const TangentVector& u) {
  return StiefelPoint::adopt(retract_matrix(kind, x.matrix(), u.matrix()));
}

/// Haar-distributed point: Q-factor of an n x p standard Gaussian matrix.
inline StiefelPoint random_stiefel(Index n, Index p, Rng& rng) {
  require_dims(p >= 1 && n >= p, "random_stiefel: need n >= p >= 1");
  return StiefelPoint::adopt(qf(rng.gaussian(n, p)));
}

/// Random unit-norm tangent vector at x.
inline TangentVector random_unit_tangent(const StiefelPoint& x, Rng& rng) {
  Matrix u = tangent_projection(x.matrix(), rng.gaussian(x.n(), x.p()));
  u /= u.norm();
  return TangentVector::adopt(std::move(u));
}

/// Empirical M in ||Retr_X(U) - X|| <= M ||U||: max ratio over random unit
/// tangents scaled by t in {0.01, 0.1, 1}.
inline double retraction_bound_estimate(RetractionKind kind, const StiefelPoint& x, int trials, Rng& rng) {
  if (trials < 1) throw std::invalid_argument("retraction_bound_estimate: trials must be >= 1");
  constexpr std::array<double, 3> scales{0.01, 0.1, 1.0};
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const TangentVector u = random_unit_tangent(x, rng);
    for (double t : scales) {
      const Matrix moved = retract_matrix(kind, x.matrix(), t * u.matrix());
      worst = std::max(worst, (moved - x.matrix()).norm() / t);
    }
  }
  return worst;
}

}  // namespace rsdm
