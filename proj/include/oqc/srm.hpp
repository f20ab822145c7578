#pragma once
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

#include "oqc/errors.hpp"

namespace oqc {

inline constexpr std::size_t kQamStateCap = 4096;  ///< cap on m^K superpositions

/// Square QAM grid of coherent states: points alpha*(p + q i) with p, q in
/// Omega = {-(L-1) + 2(j-1) | j = 1..L}, lexicographic in (p, q).
struct QamConstellation {
  int grid_side = 2;     ///< L
  int order = 4;         ///< M = L^2
  double alpha = 1.0;    ///< scale
  std::vector<int> omega_set;
  std::vector<std::complex<double>> points;

  static QamConstellation make(int L, double alpha) {
    if (L < 2) throw domain_error("QamConstellation: L must be >= 2");
    if (alpha < 0.0) throw domain_error("QamConstellation: alpha must be >= 0");
    QamConstellation c;
    c.grid_side = L;
    c.order = L * L;
    c.alpha = alpha;
    c.omega_set.resize(L);
    for (int j = 1; j <= L; ++j) c.omega_set[j - 1] = -(L - 1) + 2 * (j - 1);
    c.points.reserve(static_cast<std::size_t>(c.order));
    for (int p : c.omega_set)
      for (int q : c.omega_set)
        c.points.emplace_back(alpha * p, alpha * q);
    return c;
  }
};

/// <beta_a | beta_b> for coherent states.
inline std::complex<double> coherent_overlap(std::complex<double> a,
                                             std::complex<double> b) {
  const std::complex<double> e =
      -0.5 * std::norm(a) - 0.5 * std::norm(b) + std::conj(a) * b;
  return std::exp(e);
}

/// Gram matrix with unit diagonal over a list of coherent amplitudes.
inline Eigen::MatrixXcd gram_matrix(const std::vector<std::complex<double>>& pts) {
  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXcd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      g(i, j) = coherent_overlap(pts[static_cast<std::size_t>(i)],
                                 pts[static_cast<std::size_t>(j)]);
      g(j, i) = std::conj(g(i, j));
    }
  }
  return g;
}

/// Gram matrix, eigendecomposition, and the (floored) square roots that
/// define the square-root measurement.
struct SrmMeasurement {
  Eigen::MatrixXcd gram;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXcd eigenvectors;
  Eigen::MatrixXcd sqrt_g;
  Eigen::MatrixXcd inv_sqrt_g;
  bool floor_hit = false;  ///< near-coincident states; pseudo-inverse path
};

inline SrmMeasurement srm_measurement(const Eigen::MatrixXcd& gram) {
  SrmMeasurement m;
  m.gram = gram;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
  if (es.info() != Eigen::Success)
    throw numeric_error("srm_measurement: eigendecomposition failed");
  m.eigenvalues = es.eigenvalues();
  m.eigenvectors = es.eigenvectors();
  const double floor = 1e-12 * std::max(m.eigenvalues.maxCoeff(), 0.0);
  Eigen::VectorXd sq(m.eigenvalues.size()), isq(m.eigenvalues.size());
  for (Eigen::Index i = 0; i < m.eigenvalues.size(); ++i) {
    const double ev = m.eigenvalues(i);
    if (ev <= floor) {
      m.floor_hit = true;
      sq(i) = 0.0;
      isq(i) = 0.0;  // pseudo-inverse on the null space
    } else {
      sq(i) = std::sqrt(ev);
      isq(i) = 1.0 / sq(i);
    }
  }
  m.sqrt_g = m.eigenvectors * sq.asDiagonal() * m.eigenvectors.adjoint();
  m.inv_sqrt_g = m.eigenvectors * isq.asDiagonal() * m.eigenvectors.adjoint();
  return m;
}

/// Row-stochastic SRM outcome kernel Pr(y | i) = |(G^{1/2})_{y i}|^2.
inline Eigen::MatrixXd srm_probabilities(const SrmMeasurement& m) {
  return m.sqrt_g.cwiseAbs2();
}

/// SRM kernel for a weighted ensemble (pretty-good measurement): the Gram is
/// scaled by sqrt(p_i p_j) and the kernel renormalized per input state.
inline Eigen::MatrixXd srm_kernel_weighted(
    const std::vector<std::complex<double>>& pts,
    const std::vector<double>& priors) {
  if (pts.size() != priors.size())
    throw dimension_error("srm_kernel_weighted: size mismatch");
  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXcd g = gram_matrix(pts);
  Eigen::VectorXd sqp(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(priors[static_cast<std::size_t>(i)] > 0.0))
      throw domain_error("srm_kernel_weighted: priors must be positive");
    sqp(i) = std::sqrt(priors[static_cast<std::size_t>(i)]);
  }
  const Eigen::MatrixXcd gt =
      sqp.asDiagonal() * g * sqp.asDiagonal();
  const auto meas = srm_measurement(gt);
  Eigen::MatrixXd k = meas.sqrt_g.cwiseAbs2();
  for (Eigen::Index i = 0; i < n; ++i) k.col(i) /= sqp(i) * sqp(i);
  return k;  // k(y, i) = Pr(y | i)
}

namespace detail {

/// Mutual information in bits of a row..column kernel Pr(y|i) under priors.
inline double mutual_information_bits(const Eigen::MatrixXd& kernel,
                                      const std::vector<double>& priors) {
  const Eigen::Index n = kernel.cols();
  double h_y = 0.0, h_y_given = 0.0;
  for (Eigen::Index y = 0; y < kernel.rows(); ++y) {
    double py = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = kernel(y, i) * priors[static_cast<std::size_t>(i)];
      py += p;
      if (kernel(y, i) > 0.0)
        h_y_given -= p * std::log2(kernel(y, i));
    }
    if (py > 0.0) h_y -= py * std::log2(py);
  }
  return h_y - h_y_given;
}

}  // namespace detail

/// Multi-user QAM sum-rate under the square-root measurement: the Gram is
/// built over the m^K superposed received amplitudes (numerically coincident
/// superpositions merged first), outcomes are the distinct SRM elements.
inline double qam_sum_rate(const QamConstellation& c, int K) {
  if (K < 1) throw domain_error("qam_sum_rate: K must be >= 1");
  const std::size_t m = static_cast<std::size_t>(c.order);
  double total_d = std::pow(static_cast<double>(m), K);
  if (total_d > static_cast<double>(kQamStateCap))
    throw capacity_error("qam_sum_rate: m^K exceeds the state cap (4096)");
  const std::size_t total = static_cast<std::size_t>(total_d);

  // enumerate superpositions by an odometer over user symbols
  std::vector<std::complex<double>> sup(total);
  std::vector<std::size_t> digit(static_cast<std::size_t>(K), 0);
  for (std::size_t i = 0; i < total; ++i) {
    std::complex<double> s = 0.0;
    for (int k = 0; k < K; ++k) s += c.points[digit[static_cast<std::size_t>(k)]];
    sup[i] = s;
    for (int k = K - 1; k >= 0; --k) {
      if (++digit[static_cast<std::size_t>(k)] < m) break;
      digit[static_cast<std::size_t>(k)] = 0;
    }
  }

  // merge numerically coincident superpositions
  const double tol = 1e-9 * std::max(c.alpha, 1.0);
  std::vector<std::complex<double>> distinct;
  std::vector<double> mult;
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (sup[a].real() != sup[b].real()) return sup[a].real() < sup[b].real();
    return sup[a].imag() < sup[b].imag();
  });
  for (std::size_t i : idx) {
    if (!distinct.empty() && std::abs(sup[i] - distinct.back()) < tol) {
      mult.back() += 1.0;
    } else {
      distinct.push_back(sup[i]);
      mult.push_back(1.0);
    }
  }
  std::vector<double> priors(mult.size());
  for (std::size_t i = 0; i < mult.size(); ++i)
    priors[i] = mult[i] / static_cast<double>(total);

  if (distinct.size() == 1) return 0.0;  // all states coincide
  const auto kernel = srm_kernel_weighted(distinct, priors);
  const double bits = detail::mutual_information_bits(kernel, priors);
  return std::max(bits, 0.0);
}

}  // namespace oqc
