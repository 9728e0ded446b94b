#pragma once

// Benchmark objectives on St(n,p). Every objective is defined on the whole
// ambient space R^{n x p}, so finite differences off the manifold are valid.

#include <rsdm/core.hpp>
#include <rsdm/manifold.hpp>

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rsdm {

class Problem {
 public:
  struct Evaluation {
    double value;
    Matrix gradient;
  };

  Problem(Index n, Index p) : n_(n), p_(p) {
    require_dims(p >= 1 && n >= p, "Problem: need n >= p >= 1");
  }
  virtual ~Problem() = default;

  virtual std::string_view name() const = 0;
  virtual double value(const MatrixRef& x) const = 0;
  /// Ambient (Euclidean) gradient.
  virtual Matrix gradient(const MatrixRef& x) const = 0;
  virtual Evaluation evaluate(const MatrixRef& x) const { return {value(x), gradient(x)}; }
  /// F at a global minimizer, when known in closed form.
  virtual std::optional<double> optimum() const { return std::nullopt; }

  // Finite-sum structure F = (1/N) sum_i f_i.
  virtual Index sample_count() const { return 0; }
  bool has_stochastic_gradient() const { return sample_count() > 0; }
  virtual Matrix component_gradient(const MatrixRef& /*x*/, Index /*i*/) const {
    throw UnsupportedMetric(std::string(name()) + ": no stochastic gradient");
  }
  /// Mean of component gradients over the given indices (repeats allowed).
  virtual Matrix batch_gradient(const MatrixRef& x, std::span<const Index> batch) const {
    if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
    Matrix acc = Matrix::Zero(n_, p_);
    for (Index i : batch) acc += component_gradient(x, i);
    return acc / static_cast<double>(batch.size());
  }
  /// Mini-batch gradient with indices drawn uniformly with replacement.
  Matrix stochastic_gradient(const MatrixRef& x, Index batch_size, Rng& rng) const {
    if (!has_stochastic_gradient()) throw UnsupportedMetric(std::string(name()) + ": no stochastic gradient");
    if (batch_size < 1) throw std::invalid_argument("stochastic_gradient: batch size must be >= 1");
    std::vector<Index> batch(static_cast<std::size_t>(batch_size));
    for (auto& i : batch) i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(sample_count())));
    return batch_gradient(x, batch);
  }

  Index n() const { return n_; }
  Index p() const { return p_; }

 protected:
  void check_point(const MatrixRef& x) const {
    require_dims(x.rows() == n_ && x.cols() == p_, std::string(name()) + ": expected " + std::to_string(n_) + "x" +
                                                       std::to_string(p_) + " point, got " +
                                                       std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
  }

 private:
  Index n_, p_;
};

using ProblemPtr = std::shared_ptr<const Problem>;

/// f(X) = ||XA - B||_F^2 with A p x p, B n x p.
class ProcrustesProblem final : public Problem {
 public:
  ProcrustesProblem(Matrix a, Matrix b) : Problem(b.rows(), b.cols()), a_(std::move(a)), b_(std::move(b)) {
    require_dims(a_.rows() == p() && a_.cols() == p(), "Procrustes: A must be p x p");
    Eigen::BDCSVD<Matrix> svd(b_ * a_.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    minimizer_ = svd.matrixU() * svd.matrixV().transpose();
    optimum_ = a_.squaredNorm() + b_.squaredNorm() - 2.0 * svd.singularValues().sum();
  }

  std::string_view name() const override { return "procrustes"; }
  double value(const MatrixRef& x) const override {
    check_point(x);
    return (x * a_ - b_).squaredNorm();
  }
  Matrix gradient(const MatrixRef& x) const override { return evaluate(x).gradient; }
  Evaluation evaluate(const MatrixRef& x) const override {
    check_point(x);
    const Matrix residual = x * a_ - b_;
    return {residual.squaredNorm(), 2.0 * residual * a_.transpose()};
  }
  std::optional<double> optimum() const override { return optimum_; }

  /// X* = U V^T from the thin SVD of B A^T.
  const Matrix& minimizer() const { return minimizer_; }
  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }

 private:
  Matrix a_, b_, minimizer_;
  double optimum_;
};

/// F(X) = -tr(X^T A X) for symmetric A with known spectrum.
class PcaProblem final : public Problem {
 public:
  /// eigenvalues sorted in decreasing order; eigenvectors orthogonal n x n.
  PcaProblem(Index p, Vector eigenvalues, Matrix eigenvectors)
      : Problem(eigenvectors.rows(), p), eigenvalues_(std::move(eigenvalues)), eigenvectors_(std::move(eigenvectors)) {
    require_dims(eigenvectors_.cols() == n() && eigenvalues_.size() == n(), "PCA: spectrum size mismatch");
    a_ = eigenvectors_ * eigenvalues_.asDiagonal() * eigenvectors_.transpose();
    a_ = sym_part(a_);
    optimum_ = -eigenvalues_.head(p).sum();
  }

  std::string_view name() const override { return "pca"; }
  double value(const MatrixRef& x) const override {
    check_point(x);
    return -x.cwiseProduct(a_ * x).sum();
  }
  Matrix gradient(const MatrixRef& x) const override {
    check_point(x);
    return -2.0 * a_ * x;
  }
  Evaluation evaluate(const MatrixRef& x) const override {
    check_point(x);
    Matrix ax = a_ * x;
    const double v = -x.cwiseProduct(ax).sum();
    return {v, -2.0 * ax};
  }
  std::optional<double> optimum() const override { return optimum_; }

  const Matrix& matrix() const { return a_; }
  const Vector& eigenvalues() const { return eigenvalues_; }
  Matrix top_eigenvectors() const { return eigenvectors_.leftCols(p()); }
  Matrix bottom_eigenvectors() const { return eigenvectors_.rightCols(p()); }

 private:
  Vector eigenvalues_;
  Matrix eigenvectors_;
  Matrix a_;
  double optimum_;
};

/// F(X) = tr(A^T (X.X) B (X.X)^T) over O(n), '.' the Hadamard product.
class QapProblem final : public Problem {
 public:
  QapProblem(Matrix a, Matrix b) : Problem(a.rows(), a.rows()), a_(std::move(a)), b_(std::move(b)) {
    require_dims(a_.cols() == n() && b_.rows() == n() && b_.cols() == n(), "QAP: A and B must be n x n");
  }

  std::string_view name() const override { return "qap"; }
  double value(const MatrixRef& x) const override {
    check_point(x);
    const Matrix y = x.cwiseProduct(x);
    return (a_ * y).cwiseProduct(y * b_).sum();
  }
  // d/dY = A Y B^T + A^T Y B, and dY = 2 X . dX.
  Matrix gradient(const MatrixRef& x) const override {
    check_point(x);
    const Matrix y = x.cwiseProduct(x);
    const Matrix dy = a_ * y * b_.transpose() + a_.transpose() * y * b_;
    return 2.0 * dy.cwiseProduct(x);
  }
  Evaluation evaluate(const MatrixRef& x) const override {
    check_point(x);
    const Matrix y = x.cwiseProduct(x);
    const Matrix ay = a_ * y;
    const Matrix aty = a_.transpose() * y;
    // tr(A^T Y B Y^T) = <A Y, Y B>
    const double v = ay.cwiseProduct(y * b_).sum();
    const Matrix dy = ay * b_.transpose() + aty * b_;
    return {v, 2.0 * dy.cwiseProduct(x)};
  }

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }

 private:
  Matrix a_, b_;
};

/// Finite-sum PCA: f_i(X) = -tr(X^T z_i z_i^T X), F = (1/N) sum_i f_i.
/// With noise_free every component equals F.
class StochasticPcaProblem final : public Problem {
 public:
  StochasticPcaProblem(Index p, Matrix samples, bool noise_free)
      : Problem(samples.rows(), p), z_(std::move(samples)), noise_free_(noise_free) {
    require_dims(z_.cols() >= 1, "StochasticPCA: need N >= 1 samples");
    cov_ = sym_part(z_ * z_.transpose() / static_cast<double>(z_.cols()));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov_);
    const Vector ev = eig.eigenvalues();  // ascending
    optimum_ = -ev.tail(p).sum();
    top_eigenvectors_ = eig.eigenvectors().rightCols(p).rowwise().reverse();
  }

  std::string_view name() const override { return noise_free_ ? "spca-nf" : "spca"; }
  double value(const MatrixRef& x) const override {
    check_point(x);
    return -x.cwiseProduct(cov_ * x).sum();
  }
  Matrix gradient(const MatrixRef& x) const override {
    check_point(x);
    return -2.0 * cov_ * x;
  }
  Evaluation evaluate(const MatrixRef& x) const override {
    check_point(x);
    Matrix cx = cov_ * x;
    const double v = -x.cwiseProduct(cx).sum();
    return {v, -2.0 * cx};
  }
  std::optional<double> optimum() const override { return optimum_; }

  Index sample_count() const override { return z_.cols(); }
  Matrix component_gradient(const MatrixRef& x, Index i) const override {
    check_point(x);
    if (noise_free_) return gradient(x);
    require_dims(i >= 0 && i < z_.cols(), "StochasticPCA: sample index out of range");
    return -2.0 * z_.col(i) * (z_.col(i).transpose() * x);
  }
  Matrix batch_gradient(const MatrixRef& x, std::span<const Index> batch) const override {
    if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
    if (noise_free_) return gradient(x);
    check_point(x);
    Matrix zb(n(), static_cast<Index>(batch.size()));
    for (std::size_t k = 0; k < batch.size(); ++k) {
      require_dims(batch[k] >= 0 && batch[k] < z_.cols(), "StochasticPCA: sample index out of range");
      zb.col(static_cast<Index>(k)) = z_.col(batch[k]);
    }
    return (-2.0 / static_cast<double>(batch.size())) * zb * (zb.transpose() * x);
  }

  bool noise_free() const { return noise_free_; }
  const Matrix& covariance() const { return cov_; }
  const Matrix& samples() const { return z_; }
  const Matrix& top_eigenvectors() const { return top_eigenvectors_; }

 private:
  Matrix z_;
  bool noise_free_;
  Matrix cov_;
  Matrix top_eigenvectors_;
  double optimum_;
};

/// Wraps a problem and adds a constant offset to every gradient entry.
/// Used to check that the gradient oracle rejects wrong gradients.
class PerturbedGradientProblem final : public Problem {
 public:
  PerturbedGradientProblem(ProblemPtr inner, double offset)
      : Problem(inner->n(), inner->p()), inner_(std::move(inner)), offset_(offset) {}

  std::string_view name() const override { return inner_->name(); }
  double value(const MatrixRef& x) const override { return inner_->value(x); }
  Matrix gradient(const MatrixRef& x) const override {
    return inner_->gradient(x).array() + offset_;
  }
  std::optional<double> optimum() const override { return inner_->optimum(); }

 private:
  ProblemPtr inner_;
  double offset_;
};

/// lambda_k = rho^(k-1), k = 1..n, with lambda_n = 1/condition_number.
inline Vector exponential_spectrum(Index n, double condition_number) {
  if (!(condition_number >= 1.0)) throw std::invalid_argument("exponential_spectrum: condition number must be >= 1");
  Vector lambda(n);
  const double rho = n > 1 ? std::pow(condition_number, -1.0 / static_cast<double>(n - 1)) : 1.0;
  for (Index k = 0; k < n; ++k) lambda(k) = std::pow(rho, static_cast<double>(k));
  if (n > 1) lambda(n - 1) = 1.0 / condition_number;
  return lambda;
}

inline std::shared_ptr<ProcrustesProblem> make_procrustes(Index n, Index p, Rng& rng) {
  require_dims(p >= 1 && n >= p, "make_procrustes: need n >= p >= 1");
  Matrix a = rng.gaussian(p, p);
  Matrix b = rng.gaussian(n, p);
  return std::make_shared<ProcrustesProblem>(std::move(a), std::move(b));
}

inline std::shared_ptr<PcaProblem> make_pca(Index n, Index p, double condition_number, Rng& rng) {
  require_dims(p >= 1 && n >= p, "make_pca: need n >= p >= 1");
  Vector lambda = exponential_spectrum(n, condition_number);
  Matrix q = random_stiefel(n, n, rng).matrix();
  return std::make_shared<PcaProblem>(p, std::move(lambda), std::move(q));
}

inline std::shared_ptr<QapProblem> make_qap(Index n, Rng& rng) {
  require_dims(n >= 1, "make_qap: need n >= 1");
  Matrix a = rng.gaussian(n, n);
  Matrix b = rng.gaussian(n, n);
  return std::make_shared<QapProblem>(std::move(a), std::move(b));
}

/// Samples z_i = Q diag(sqrt(lambda)) g_i with the exponential spectrum.
inline std::shared_ptr<StochasticPcaProblem> make_stochastic_pca(Index n, Index p, Index samples, bool noise_free,
                                                                 Rng& rng, double condition_number = 100.0) {
  require_dims(p >= 1 && n >= p, "make_stochastic_pca: need n >= p >= 1");
  if (samples < 1) throw std::invalid_argument("make_stochastic_pca: need N >= 1");
  const Vector lambda = exponential_spectrum(n, condition_number);
  const Matrix q = random_stiefel(n, n, rng).matrix();
  const Matrix scale = q * lambda.cwiseSqrt().asDiagonal();
  Matrix z = scale * rng.gaussian(n, samples);
  return std::make_shared<StochasticPcaProblem>(p, std::move(z), noise_free);
}

/// |F(X) - F*| / |F*|, or the absolute gap when |F*| <= 1e-12.
inline double optgap_from_value(double value, double optimum) {
  const double gap = std::abs(value - optimum);
  return std::abs(optimum) > 1e-12 ? gap / std::abs(optimum) : gap;
}

inline double optgap(const Problem& problem, const MatrixRef& x) {
  const auto opt = problem.optimum();
  if (!opt) throw UnsupportedMetric(std::string(problem.name()) + ": optimality gap needs a known optimum");
  return optgap_from_value(problem.value(x), *opt);
}

}  // namespace rsdm
