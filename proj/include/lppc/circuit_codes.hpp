#pragma once

// Population-code wirings for the prediction (Y) and filtering (Z) populations.
// A wiring satisfies Θ_N = Θ_Z·A and Θ_Y = Θ_Z·B, so that decoding
// z = A·n + B·y under Θ_Z yields exactly the posterior Θ_N·n + Θ_Y·y.

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "lppc/errors.hpp"
#include "lppc/exponential_family.hpp"
#include "lppc/poisson_population.hpp"

namespace lppc {

enum class CodeKind { Naive, Orthogonal };

struct CircuitWiring {
  Family family;
  CodeKind code = CodeKind::Naive;
  Matrix theta_z;  // statistic_dim x d_Z
  Matrix theta_y;  // statistic_dim x d_Y
  Matrix a;        // d_Z x d_N
  Matrix b;        // d_Z x d_Y

  int size() const { return static_cast<int>(theta_z.cols()); }
};

/// Θ_Z = Θ_Y = Θ_N, A = B = I.
inline CircuitWiring build_naive(const PopulationEncoding& enc) {
  const Eigen::Index d = enc.neurons();
  return {enc.family, CodeKind::Naive, enc.theta, enc.theta, Matrix::Identity(d, d),
          Matrix::Identity(d, d)};
}

/// Θ_Z rows: Gram–Schmidt on DCT-II basis vectors 1..statistic_dim (the
/// constant vector excluded), each row rescaled to the norm of the matching
/// Θ_N row. A is the minimum-norm solution of Θ_Z·A = Θ_N.
inline CircuitWiring build_orthogonal(const PopulationEncoding& enc) {
  const Eigen::Index d = enc.neurons();
  const Eigen::Index dim = enc.theta.rows();
  if (d <= dim + 1)
    throw PreconditionError("orthogonal code needs more neurons than statistic_dim + 1");

  Matrix basis(dim + 1, d);
  basis.row(0).setConstant(1.0 / std::sqrt(static_cast<double>(d)));
  for (Eigen::Index k = 1; k <= dim; ++k) {
    Eigen::RowVectorXd v(d);
    for (Eigen::Index j = 0; j < d; ++j) v(j) = std::cos(kPi * k * (j + 0.5) / d);
    for (Eigen::Index p = 0; p < k; ++p) v -= v.dot(basis.row(p)) * basis.row(p);
    basis.row(k) = v / v.norm();
  }

  Matrix theta_z(dim, d);
  for (Eigen::Index r = 0; r < dim; ++r) {
    const double scale = enc.theta.row(r).norm();
    theta_z.row(r) = basis.row(r + 1) * (scale > 0.0 ? scale : 1.0);
  }

  const Matrix gram = theta_z * theta_z.transpose();
  Eigen::FullPivLU<Matrix> lu(gram);
  if (lu.rank() < dim) throw PreconditionError("orthogonal decoding matrix is rank deficient");
  const Matrix a = theta_z.transpose() * lu.solve(enc.theta);
  return {enc.family, CodeKind::Orthogonal, theta_z, theta_z, a, Matrix::Identity(d, d)};
}

inline CircuitWiring build_wiring(const PopulationEncoding& enc, CodeKind code) {
  return code == CodeKind::Naive ? build_naive(enc) : build_orthogonal(enc);
}

/// z = A·n + B·y.
inline Vector neural_bayes_update(const CircuitWiring& w, const Response& n, const Vector& y) {
  detail::require_shape(n.size() == w.a.cols(), "response length does not match A");
  detail::require_shape(y.size() == w.b.cols(), "prediction length does not match B");
  return w.a * n.cast<double>() + w.b * y;
}

/// Natural parameters Θ·r.
inline NaturalParams decode(const Matrix& theta, const Family& family, const Vector& r) {
  detail::require_shape(r.size() == theta.cols(), "rate length does not match decoding matrix");
  detail::require_shape(theta.rows() == family.statistic_dim(), "decoding matrix rows != statistic_dim");
  return {family, theta * r};
}

}  // namespace lppc
