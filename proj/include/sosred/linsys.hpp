#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "poly.hpp"

namespace sosred {

/// x(t+1) = A x(t) + B u(t).
struct LinearSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;

  LinearSystem() = default;
  LinearSystem(Eigen::MatrixXd a, Eigen::MatrixXd b) : A(std::move(a)), B(std::move(b)) { validate(); }

  Eigen::Index nx() const { return A.rows(); }
  Eigen::Index nu() const { return B.cols(); }

  void validate() const {
    if (A.rows() != A.cols()) throw std::invalid_argument("LinearSystem: A must be square");
    if (B.rows() != A.rows()) throw std::invalid_argument("LinearSystem: B must have as many rows as A");
  }
};

inline double spectral_radius(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Affine map from the stacked decision vector to a predicted quantity at `step`.
struct PredictionMap {
  int step = 0;
  AffineMap map;
};

struct MpcPredictions {
  std::vector<PredictionMap> states;  // j = 0..N_p
  std::vector<PredictionMap> inputs;  // j = 0..N_p-1
};

/// Predictions over (x0, u_0, ..., u_{N_c-1}). The input is u_j for j < N_c
/// and K x(j) afterwards.
inline MpcPredictions predict_mpc(const LinearSystem& sys, const Eigen::MatrixXd& K, int control_horizon,
                                  int prediction_horizon) {
  sys.validate();
  if (control_horizon < 1) throw std::invalid_argument("predict_mpc: control horizon must be >= 1");
  if (control_horizon > prediction_horizon) {
    throw std::invalid_argument("predict_mpc: control horizon exceeds prediction horizon");
  }
  const Eigen::Index nx = sys.nx(), nu = sys.nu();
  if (control_horizon < prediction_horizon && (K.rows() != nu || K.cols() != nx)) {
    throw std::invalid_argument("predict_mpc: terminal gain K must be nu x nx");
  }
  const Eigen::Index nz = nx + nu * control_horizon;
  MpcPredictions out;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(nx, nz);
  X.leftCols(nx).setIdentity();
  out.states.push_back({0, AffineMap(X, Eigen::VectorXd::Zero(nx))});
  for (int j = 0; j < prediction_horizon; ++j) {
    Eigen::MatrixXd U;
    if (j < control_horizon) {
      U = Eigen::MatrixXd::Zero(nu, nz);
      U.block(0, nx + nu * j, nu, nu).setIdentity();
    } else {
      U = K * X;
    }
    out.inputs.push_back({j, AffineMap(U, Eigen::VectorXd::Zero(nu))});
    X = sys.A * X + sys.B * U;
    out.states.push_back({j + 1, AffineMap(X, Eigen::VectorXd::Zero(nx))});
  }
  return out;
}

/// x(k | x, v) = A^k x + (sum_{i<k} A^i) B v as a map from (x, v).
inline PredictionMap predict_rg(const LinearSystem& sys, int k) {
  sys.validate();
  if (k < 0) throw std::invalid_argument("predict_rg: k must be >= 0");
  const Eigen::Index nx = sys.nx(), nv = sys.nu();
  Eigen::MatrixXd Ak = Eigen::MatrixXd::Identity(nx, nx);
  Eigen::MatrixXd Sk = Eigen::MatrixXd::Zero(nx, nx);
  for (int i = 0; i < k; ++i) {
    Sk += Ak;
    Ak = sys.A * Ak;
  }
  Eigen::MatrixXd M(nx, nx + nv);
  M << Ak, Sk * sys.B;
  return {k, AffineMap(M, Eigen::VectorXd::Zero(nx))};
}

/// v -> (I - A)^{-1} B v.
inline AffineMap steady_state(const LinearSystem& sys) {
  sys.validate();
  const Eigen::Index nx = sys.nx();
  const Eigen::MatrixXd IA = Eigen::MatrixXd::Identity(nx, nx) - sys.A;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(IA);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(sv.size() - 1) <= 1e-12 * std::max(1.0, sv(0))) {
    throw std::domain_error("steady_state: I - A is singular");
  }
  return AffineMap(IA.fullPivLu().solve(sys.B), Eigen::VectorXd::Zero(nx));
}

struct DareResult {
  Eigen::MatrixXd P;
  /// u = -K x is the associated LQR law.
  Eigen::MatrixXd K;
  double residual = 0.0;
  int iterations = 0;
};

inline double dare_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                            const Eigen::MatrixXd& R, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd BtPA = B.transpose() * P * A;
  const Eigen::MatrixXd res =
      A.transpose() * P * A - P - BtPA.transpose() * (R + B.transpose() * P * B).ldlt().solve(BtPA) + Q;
  return res.cwiseAbs().maxCoeff();
}

/// Discrete algebraic Riccati equation by the structure-preserving doubling
/// algorithm, with the residual checked against the defining equation.
inline DareResult dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& Q,
                       const Eigen::MatrixXd& R, double tol = 1e-9, int max_iter = 100) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() ||
      R.cols() != B.cols()) {
    throw std::invalid_argument("dare: dimension mismatch");
  }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd Ak = A;
  Eigen::MatrixXd Gk = B * R.ldlt().solve(B.transpose());
  Eigen::MatrixXd Hk = Q;
  DareResult out;
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(I + Gk * Hk);
    const Eigen::MatrixXd WA = lu.solve(Ak);
    const Eigen::MatrixXd WG = lu.solve(Gk);
    const Eigen::MatrixXd Hn = Hk + Ak.transpose() * Hk * WA;
    const Eigen::MatrixXd Gn = Gk + Ak * WG * Ak.transpose();
    Ak = Ak * WA;
    const double change = (Hn - Hk).cwiseAbs().maxCoeff();
    Hk = 0.5 * (Hn + Hn.transpose());
    Gk = 0.5 * (Gn + Gn.transpose());
    out.iterations = it;
    if (!Hk.allFinite()) break;
    if (change <= 1e-15 * std::max(1.0, Hk.cwiseAbs().maxCoeff())) break;
  }
  out.P = Hk;
  out.residual = dare_residual(A, B, Q, R, out.P);
  if (!(out.residual <= tol * std::max(1.0, out.P.cwiseAbs().maxCoeff()))) {
    throw std::runtime_error("dare: no convergence (residual " + std::to_string(out.residual) + ")");
  }
  out.K = (R + B.transpose() * out.P * B).ldlt().solve(B.transpose() * out.P * A);
  return out;
}

struct DareWeights {
  Eigen::VectorXd q_diagonal;
  double r = 1.0;
  double max_abs_error = std::numeric_limits<double>::infinity();
  DareResult solution;
};

/// Grid search over diagonal Q and scalar R = r I for weights whose Riccati
/// solution matches `target` to `tol` (max-abs). Returns the best match or
/// nothing when no grid point is within tolerance.
inline std::optional<DareWeights> find_dare_weights(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                                    const Eigen::MatrixXd& target, double tol,
                                                    const std::vector<double>& grid = {0.1, 0.2, 0.5, 1.0, 2.0,
                                                                                       5.0, 10.0}) {
  const Eigen::Index n = A.rows();
  const std::size_t g = grid.size();
  std::size_t total = 1;
  for (Eigen::Index i = 0; i <= n; ++i) total *= g;
  DareWeights best;
  std::vector<std::size_t> idx(static_cast<std::size_t>(n) + 1, 0);
  for (std::size_t t = 0; t < total; ++t) {
    std::size_t rem = t;
    for (auto& k : idx) {
      k = rem % g;
      rem /= g;
    }
    Eigen::VectorXd q(n);
    for (Eigen::Index i = 0; i < n; ++i) q(i) = grid[idx[static_cast<std::size_t>(i)]];
    const double r = grid[idx.back()];
    try {
      DareResult d = dare(A, B, Eigen::MatrixXd(q.asDiagonal()), r * Eigen::MatrixXd::Identity(B.cols(), B.cols()));
      const double err = (d.P - target).cwiseAbs().maxCoeff();
      if (err < best.max_abs_error) best = {q, r, err, d};
    } catch (const std::runtime_error&) {
    }
  }
  if (best.max_abs_error <= tol) return best;
  return std::nullopt;
}

}  // namespace sosred
