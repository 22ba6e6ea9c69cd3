#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sosred {

/// One coefficient of a symmetric coefficient matrix: A(row, col) = A(col, row) = value.
/// The functional value contributed is value * X(row,row) on the diagonal and
/// 2 * value * X(row,col) off it.
struct SymEntry {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// Linear functional over (PSD blocks, free scalars).
struct LinearFunctional {
  std::vector<SymEntry> entries;
  std::vector<std::pair<int, double>> free_terms;

  void add(int block, int row, int col, double value) {
    if (row < col) std::swap(row, col);
    entries.push_back({block, row, col, value});
  }
  void add_free(int index, double value) { free_terms.emplace_back(index, value); }
  bool empty() const { return entries.empty() && free_terms.empty(); }
};

/// Block-diagonal SDP in primal standard form:
///
///   maximize  <objective, (X, f)>
///   s.t.      <constraints[i], (X, f)> = rhs[i],   X_j PSD, f free.
///
/// Size-1 blocks are nonnegative scalars, so linear programs are a special case.
struct SdpProblem {
  std::vector<int> block_sizes;
  int num_free = 0;
  LinearFunctional objective;
  std::vector<LinearFunctional> constraints;
  std::vector<double> rhs;

  int add_block(int size) {
    block_sizes.push_back(size);
    return static_cast<int>(block_sizes.size()) - 1;
  }
  int add_free() { return num_free++; }
  int add_constraint(LinearFunctional row, double b) {
    constraints.push_back(std::move(row));
    rhs.push_back(b);
    return static_cast<int>(constraints.size()) - 1;
  }

  void validate() const {
    if (block_sizes.empty() && num_free == 0) {
      throw std::invalid_argument("SdpProblem: needs at least one block or free variable");
    }
    if (constraints.size() != rhs.size()) throw std::invalid_argument("SdpProblem: constraint/rhs count mismatch");
    for (int n : block_sizes) {
      if (n <= 0) throw std::invalid_argument("SdpProblem: block sizes must be positive");
    }
    auto check = [&](const LinearFunctional& f, const std::string& what) {
      for (const auto& e : f.entries) {
        if (e.block < 0 || e.block >= static_cast<int>(block_sizes.size())) {
          throw std::invalid_argument(what + ": block index out of range");
        }
        const int n = block_sizes[static_cast<std::size_t>(e.block)];
        if (e.row < 0 || e.col < 0 || e.row >= n || e.col >= n || e.row < e.col) {
          throw std::invalid_argument(what + ": entry outside the lower triangle of its block");
        }
        if (!std::isfinite(e.value)) throw std::invalid_argument(what + ": non-finite coefficient");
      }
      for (const auto& [k, v] : f.free_terms) {
        if (k < 0 || k >= num_free) throw std::invalid_argument(what + ": free index out of range");
        if (!std::isfinite(v)) throw std::invalid_argument(what + ": non-finite coefficient");
      }
    };
    check(objective, "objective");
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      check(constraints[i], "constraint " + std::to_string(i));
      if (!std::isfinite(rhs[i])) throw std::invalid_argument("SdpProblem: non-finite right-hand side");
    }
  }

  /// Value of a functional at a primal point.
  static double apply(const LinearFunctional& f, const std::vector<Eigen::MatrixXd>& blocks,
                      const Eigen::VectorXd& free) {
    double v = 0.0;
    for (const auto& e : f.entries) {
      const auto& X = blocks[static_cast<std::size_t>(e.block)];
      v += (e.row == e.col ? 1.0 : 2.0) * e.value * X(e.row, e.col);
    }
    for (const auto& [k, c] : f.free_terms) v += c * free(k);
    return v;
  }

  /// Adds scale * (symmetric coefficient matrix of f) into per-block accumulators.
  static void accumulate_adjoint(const LinearFunctional& f, double scale, std::vector<Eigen::MatrixXd>& out) {
    for (const auto& e : f.entries) {
      auto& Z = out[static_cast<std::size_t>(e.block)];
      Z(e.row, e.col) += scale * e.value;
      if (e.row != e.col) Z(e.col, e.row) += scale * e.value;
    }
  }
};

enum class SdpStatus { Optimal, PrimalInfeasible, DualInfeasible, MaxIterations, NumericalFailure };

inline const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "Optimal";
    case SdpStatus::PrimalInfeasible: return "PrimalInfeasible";
    case SdpStatus::DualInfeasible: return "DualInfeasible";
    case SdpStatus::MaxIterations: return "MaxIterations";
    case SdpStatus::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

struct SdpOptions {
  double tol_feas = 1e-8;
  double tol_gap = 1e-8;
  double tol_psd = 1e-9;
  int max_iter = 200;
  double step_fraction = 0.99;
};

/// Relative residuals. primal_eq = |A(X) - b|_inf / (1 + |b|_inf);
/// dual = |A*(y) - C - Z|_max / (1 + |C|_max) including the free columns;
/// gap = |p - d| / (1 + |p| + |d|).
struct SdpResiduals {
  double primal_eq = std::numeric_limits<double>::infinity();
  double dual = std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
};

struct SdpSolution {
  SdpStatus status = SdpStatus::NumericalFailure;
  std::vector<Eigen::MatrixXd> block_values;
  Eigen::VectorXd free_values;
  /// Equality multipliers y with objective = b^T y and Z = A*(y) - C PSD at
  /// optimality. For PrimalInfeasible this holds the ray instead:
  /// b^T y = 1 and A*(y) negative semidefinite (up to tolerance).
  Eigen::VectorXd dual;
  std::vector<Eigen::MatrixXd> dual_slack;
  double objective_value = 0.0;
  SdpResiduals residuals;
  int iterations = 0;
};

namespace detail {

struct LocalEntry {
  int row;
  int col;
  double value;
};

struct BlockRow {
  int index;
  std::vector<LocalEntry> entries;
};

/// Internal minimization form: min <C,X> + cf^T f  s.t.  A(X) + Af f = b.
struct CompiledSdp {
  int m = 0;
  int nf = 0;
  std::vector<int> sizes;
  std::vector<std::vector<BlockRow>> rows_by_block;
  Eigen::MatrixXd Af;
  Eigen::VectorXd b;
  std::vector<Eigen::MatrixXd> C;
  Eigen::VectorXd cf;

  explicit CompiledSdp(const SdpProblem& p)
      : m(static_cast<int>(p.constraints.size())), nf(p.num_free), sizes(p.block_sizes) {
    const std::size_t nb = sizes.size();
    rows_by_block.resize(nb);
    Af = Eigen::MatrixXd::Zero(m, nf);
    b = Eigen::Map<const Eigen::VectorXd>(p.rhs.data(), m);
    for (int i = 0; i < m; ++i) {
      std::vector<std::vector<LocalEntry>> per(nb);
      for (const auto& e : p.constraints[static_cast<std::size_t>(i)].entries) {
        per[static_cast<std::size_t>(e.block)].push_back({e.row, e.col, e.value});
      }
      for (std::size_t j = 0; j < nb; ++j) {
        if (!per[j].empty()) rows_by_block[j].push_back({i, std::move(per[j])});
      }
      for (const auto& [k, v] : p.constraints[static_cast<std::size_t>(i)].free_terms) Af(i, k) += v;
    }
    C.resize(nb);
    for (std::size_t j = 0; j < nb; ++j) C[j] = Eigen::MatrixXd::Zero(sizes[j], sizes[j]);
    SdpProblem::accumulate_adjoint(p.objective, -1.0, C);
    cf = Eigen::VectorXd::Zero(nf);
    for (const auto& [k, v] : p.objective.free_terms) cf(k) -= v;
  }

  std::size_t nblocks() const { return sizes.size(); }

  static double entry_dot(const LocalEntry& e, const Eigen::MatrixXd& X) {
    return (e.row == e.col ? 1.0 : 2.0) * e.value * X(e.row, e.col);
  }

  Eigen::VectorXd apply(const std::vector<Eigen::MatrixXd>& X) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
    for (std::size_t j = 0; j < nblocks(); ++j) {
      for (const auto& r : rows_by_block[j]) {
        double s = 0.0;
        for (const auto& e : r.entries) s += entry_dot(e, X[j]);
        out(r.index) += s;
      }
    }
    return out;
  }

  std::vector<Eigen::MatrixXd> adjoint(const Eigen::VectorXd& y) const {
    std::vector<Eigen::MatrixXd> out(nblocks());
    for (std::size_t j = 0; j < nblocks(); ++j) {
      out[j] = Eigen::MatrixXd::Zero(sizes[j], sizes[j]);
      for (const auto& r : rows_by_block[j]) {
        const double yi = y(r.index);
        if (yi == 0.0) continue;
        for (const auto& e : r.entries) {
          out[j](e.row, e.col) += yi * e.value;
          if (e.row != e.col) out[j](e.col, e.row) += yi * e.value;
        }
      }
    }
    return out;
  }
};

inline double inner(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::MatrixXd>& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j].array() * b[j].array()).sum();
  return s;
}

inline double max_abs(const std::vector<Eigen::MatrixXd>& a) {
  double s = 0.0;
  for (const auto& M : a) {
    if (M.size() > 0) s = std::max(s, M.cwiseAbs().maxCoeff());
  }
  return s;
}

inline double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

/// Nesterov-Todd scaling of one block: R^T S R = R^{-1} X R^{-T} = diag(lambda).
struct NtScaling {
  Eigen::MatrixXd R;
  Eigen::MatrixXd Rinv;
  Eigen::MatrixXd W;
  Eigen::VectorXd lambda;
};

/// Square factor X = L L^T with its inverse. Falls back to an eigenvalue
/// factorization (eigenvalues clipped at a relative floor) when rounding has
/// made X marginally indefinite near the boundary of the cone.
inline bool psd_factor(const Eigen::MatrixXd& X, Eigen::MatrixXd& L, Eigen::MatrixXd* Linv) {
  const Eigen::Index n = X.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(X);
  if (llt.info() == Eigen::Success) {
    L = llt.matrixL();
    if (Linv) *Linv = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
    return L.allFinite();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (X + X.transpose()));
  if (es.info() != Eigen::Success) return false;
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(top > 0.0) || !std::isfinite(top)) return false;
  // Only marginal indefiniteness is repaired.
  if (es.eigenvalues().minCoeff() < -1e-8 * top) return false;
  const Eigen::VectorXd d = es.eigenvalues().cwiseMax(1e-15 * top).cwiseSqrt();
  L = es.eigenvectors() * d.asDiagonal();
  if (Linv) *Linv = d.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return L.allFinite();
}

inline bool nt_scaling(const Eigen::MatrixXd& X, const Eigen::MatrixXd& S, NtScaling& out) {
  Eigen::MatrixXd Lx, Lxinv, Ls;
  if (!psd_factor(X, Lx, &Lxinv) || !psd_factor(S, Ls, nullptr)) return false;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Ls.transpose() * Lx, Eigen::ComputeFullU | Eigen::ComputeFullV);
  out.lambda = svd.singularValues();
  if (!(out.lambda.minCoeff() > 0.0) || !out.lambda.allFinite()) return false;
  const Eigen::VectorXd isq = out.lambda.cwiseSqrt().cwiseInverse();
  out.R = Lx * svd.matrixV() * isq.asDiagonal();
  // R^{-1} = Lambda^{1/2} V^T Lx^{-1}
  out.Rinv = out.lambda.cwiseSqrt().asDiagonal() * svd.matrixV().transpose() * Lxinv;
  out.W = out.R * out.R.transpose();
  return out.W.allFinite();
}

/// Largest alpha in (0, 1/frac] keeping Lambda + alpha * D PSD (scaled space).
inline double max_step_scaled(const Eigen::VectorXd& lambda, const Eigen::MatrixXd& D) {
  const Eigen::VectorXd isq = lambda.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd T = isq.asDiagonal() * D * isq.asDiagonal();
  T = 0.5 * (T + T.transpose());
  double mn;
  if (T.rows() == 1) {
    mn = T(0, 0);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
    mn = es.eigenvalues()(0);
  }
  if (mn >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / mn;
}

inline double max_step_scalar(double v, double dv) {
  return dv < 0.0 ? -v / dv : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Primal-dual interior-point solve on the homogeneous self-dual embedding
/// with Nesterov-Todd scaling and a Mehrotra predictor-corrector. The solver
/// is single-threaded and deterministic.
inline SdpSolution solve(const SdpProblem& problem, const SdpOptions& opt = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  problem.validate();
  const detail::CompiledSdp P(problem);
  const std::size_t nb = P.nblocks();
  const int m = P.m;
  const int nf = P.nf;

  std::vector<MatrixXd> X(nb), S(nb);
  int nu_deg = 1;
  for (std::size_t j = 0; j < nb; ++j) {
    X[j] = MatrixXd::Identity(P.sizes[j], P.sizes[j]);
    S[j] = MatrixXd::Identity(P.sizes[j], P.sizes[j]);
    nu_deg += P.sizes[j];
  }
  VectorXd y = VectorXd::Zero(m);
  VectorXd f = VectorXd::Zero(nf);
  double tau = 1.0, kappa = 1.0;

  const double bnorm = detail::inf_norm(P.b);
  const double cnorm = std::max(detail::max_abs(P.C), detail::inf_norm(P.cf));

  SdpSolution sol;
  auto finish = [&](SdpStatus status, int iters) {
    sol.status = status;
    sol.iterations = iters;
    sol.block_values.resize(nb);
    sol.dual_slack.resize(nb);
    if (status == SdpStatus::PrimalInfeasible) {
      const double by = P.b.dot(y);
      sol.dual = y / by;
      for (std::size_t j = 0; j < nb; ++j) {
        sol.block_values[j] = X[j] / tau;
        sol.dual_slack[j] = S[j] / by;
      }
      sol.free_values = f / tau;
    } else {
      for (std::size_t j = 0; j < nb; ++j) {
        sol.block_values[j] = X[j] / tau;
        sol.dual_slack[j] = S[j] / tau;
      }
      sol.free_values = f / tau;
      sol.dual = -y / tau;
    }
    // Residuals against the caller's maximization problem.
    const VectorXd Ax = P.apply(sol.block_values) + P.Af * sol.free_values;
    sol.residuals.primal_eq = detail::inf_norm(Ax - P.b) / (1.0 + bnorm);
    const double pobj = -(detail::inner(P.C, sol.block_values) + P.cf.dot(sol.free_values));
    sol.objective_value = pobj;
    if (status == SdpStatus::PrimalInfeasible) {
      // Ray residual: |A*(y) + Z|, |Af^T y| with b^T y = 1.
      auto Aty = P.adjoint(sol.dual);
      double r = detail::inf_norm(P.Af.transpose() * sol.dual);
      for (std::size_t j = 0; j < nb; ++j) {
        if (Aty[j].size()) r = std::max(r, (Aty[j] + sol.dual_slack[j]).cwiseAbs().maxCoeff());
      }
      sol.residuals.dual = r;
      sol.residuals.gap = 0.0;
    } else {
      auto Aty = P.adjoint(sol.dual);
      double r = detail::inf_norm(P.Af.transpose() * sol.dual + P.cf);
      for (std::size_t j = 0; j < nb; ++j) {
        // user C = -P.C; Z = A*y - C_user = A*y + P.C
        if (Aty[j].size()) r = std::max(r, (Aty[j] + P.C[j] - sol.dual_slack[j]).cwiseAbs().maxCoeff());
      }
      sol.residuals.dual = r / (1.0 + cnorm);
      const double dobj = P.b.dot(sol.dual);
      sol.residuals.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    }
    return sol;
  };

  std::vector<detail::NtScaling> nt(nb);
  std::vector<MatrixXd> WCW(nb);
  int stalls = 0;

  for (int iter = 0; iter <= opt.max_iter; ++iter) {
    // Residuals of the homogeneous model.
    const VectorXd AX = P.apply(X);
    const VectorXd rp = AX + P.Af * f - P.b * tau;
    std::vector<MatrixXd> Rd = P.adjoint(y);
    for (std::size_t j = 0; j < nb; ++j) Rd[j] += S[j] - P.C[j] * tau;
    const VectorXd rf = P.Af.transpose() * y - P.cf * tau;
    const double cx = detail::inner(P.C, X) + P.cf.dot(f);
    const double by = P.b.dot(y);
    const double rg = cx - by + kappa;
    const double mu = (detail::inner(X, S) + tau * kappa) / nu_deg;

    // Termination tests on the de-homogenized point.
    const double pres = detail::inf_norm(rp) / tau / (1.0 + bnorm);
    const double dres = std::max(detail::max_abs(Rd), detail::inf_norm(rf)) / tau / (1.0 + cnorm);
    const double pobj = cx / tau, dobj = by / tau;
    const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    if (pres <= opt.tol_feas && dres <= opt.tol_feas && gap <= opt.tol_gap) {
      return finish(SdpStatus::Optimal, iter);
    }
    if (kappa > tau) {
      if (by > 0.0) {
        std::vector<MatrixXd> ray = P.adjoint(y);
        double r = detail::inf_norm(P.Af.transpose() * y);
        for (std::size_t j = 0; j < nb; ++j) {
          if (ray[j].size()) r = std::max(r, (ray[j] + S[j]).cwiseAbs().maxCoeff());
        }
        if (r <= opt.tol_feas * by) return finish(SdpStatus::PrimalInfeasible, iter);
      }
      if (cx < 0.0) {
        const double r = detail::inf_norm(AX + P.Af * f);
        if (r <= opt.tol_feas * (-cx)) return finish(SdpStatus::DualInfeasible, iter);
      }
    }
    if (iter == opt.max_iter) break;

    // Scaling and Schur complement M_ik = sum_j <A_i, W A_k W>.
    for (std::size_t j = 0; j < nb; ++j) {
      if (!detail::nt_scaling(X[j], S[j], nt[j])) return finish(SdpStatus::NumericalFailure, iter);
      WCW[j] = nt[j].W * P.C[j] * nt[j].W;
    }
    MatrixXd M = MatrixXd::Zero(m, m);
    for (std::size_t j = 0; j < nb; ++j) {
      const auto& rows = P.rows_by_block[j];
      const MatrixXd& W = nt[j].W;
      const int n = P.sizes[j];
      MatrixXd T(n, n);
      for (std::size_t a = 0; a < rows.size(); ++a) {
        // G = W A_a W
        T.setZero();
        std::vector<int> support;
        for (const auto& e : rows[a].entries) {
          T.row(e.row) += e.value * W.row(e.col);
          if (e.row != e.col) T.row(e.col) += e.value * W.row(e.row);
          support.push_back(e.row);
          support.push_back(e.col);
        }
        std::sort(support.begin(), support.end());
        support.erase(std::unique(support.begin(), support.end()), support.end());
        MatrixXd G = MatrixXd::Zero(n, n);
        for (int s : support) G.noalias() += W.col(s) * T.row(s);
        for (std::size_t c = a; c < rows.size(); ++c) {
          double v = 0.0;
          for (const auto& e : rows[c].entries) v += detail::CompiledSdp::entry_dot(e, G);
          M(rows[a].index, rows[c].index) += v;
          if (c != a) M(rows[c].index, rows[a].index) += v;
        }
      }
    }

    // Factor K = [M Af; Af^T 0] through M and its Schur complement.
    double reg = 0.0;
    Eigen::LLT<MatrixXd> Mfac;
    const double mscale = m > 0 ? std::max(1.0, M.diagonal().cwiseAbs().maxCoeff()) : 1.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      MatrixXd Mr = M;
      if (reg > 0.0) Mr.diagonal().array() += reg;
      Mfac.compute(Mr);
      if (Mfac.info() == Eigen::Success) break;
      reg = (reg == 0.0) ? 1e-14 * mscale : reg * 100.0;
    }
    if (Mfac.info() != Eigen::Success) return finish(SdpStatus::NumericalFailure, iter);
    MatrixXd MinvAf = nf > 0 ? MatrixXd(Mfac.solve(P.Af)) : MatrixXd(m, 0);
    MatrixXd Sf = P.Af.transpose() * MinvAf;
    if (nf > 0) Sf.diagonal().array() += 1e-14 * std::max(1.0, Sf.diagonal().cwiseAbs().maxCoeff());
    Eigen::LDLT<MatrixXd> Sfac(Sf);

    auto solveK = [&](const VectorXd& r1, const VectorXd& r2, VectorXd& dy, VectorXd& df) {
      auto once = [&](const VectorXd& a1, const VectorXd& a2, VectorXd& o1, VectorXd& o2) {
        const VectorXd Minv_a1 = Mfac.solve(a1);
        if (nf > 0) {
          o2 = Sfac.solve(P.Af.transpose() * Minv_a1 - a2);
          o1 = Minv_a1 - MinvAf * o2;
        } else {
          o2 = VectorXd::Zero(0);
          o1 = Minv_a1;
        }
      };
      once(r1, r2, dy, df);
      for (int k = 0; k < 2; ++k) {
        const VectorXd e1 = r1 - (M * dy + P.Af * df);
        const VectorXd e2 = r2 - P.Af.transpose() * dy;
        VectorXd c1, c2;
        once(e1, e2, c1, c2);
        dy += c1;
        df += c2;
      }
    };

    VectorXd vy, vf;
    const VectorXd AWCW = P.apply(WCW);
    solveK(P.b + AWCW, P.cf, vy, vf);
    const VectorXd h = AWCW - P.b;
    const double cwc = detail::inner(P.C, WCW);
    double denom = h.dot(vy) + P.cf.dot(vf) - cwc - kappa / tau;
    if (!(denom < 0.0)) denom = -std::max(std::abs(denom), 1e-300);

    std::vector<MatrixXd> WRdW(nb);
    for (std::size_t j = 0; j < nb; ++j) WRdW[j] = nt[j].W * Rd[j] * nt[j].W;
    const VectorXd AWRdW = P.apply(WRdW);
    const double cWRdW = detail::inner(P.C, WRdW);

    struct Direction {
      std::vector<MatrixXd> dX, dS;
      VectorXd dy, df;
      double dtau = 0.0, dkappa = 0.0;
    };

    // Solves the Newton system for residual fraction eta, scaled
    // complementarity target D (per block) and tau-kappa target rtk.
    auto direction = [&](double eta, const std::vector<MatrixXd>& D, double rtk) {
      Direction d;
      std::vector<MatrixXd> RDR(nb);
      for (std::size_t j = 0; j < nb; ++j) RDR[j] = nt[j].R * D[j] * nt[j].R.transpose();
      const VectorXd p1 = -eta * rp - P.apply(RDR) - eta * AWRdW;
      const VectorXd p2 = -eta * rf;
      VectorXd uy, uf;
      solveK(p1, p2, uy, uf);
      const double num = -eta * rg - detail::inner(P.C, RDR) - eta * cWRdW - rtk / tau - h.dot(uy) - P.cf.dot(uf);
      d.dtau = num / denom;
      d.dy = uy + d.dtau * vy;
      d.df = uf + d.dtau * vf;
      d.dkappa = (rtk - kappa * d.dtau) / tau;
      const std::vector<MatrixXd> Aty = P.adjoint(d.dy);
      d.dS.resize(nb);
      d.dX.resize(nb);
      for (std::size_t j = 0; j < nb; ++j) {
        d.dS[j] = -eta * Rd[j] - Aty[j] + P.C[j] * d.dtau;
        d.dS[j] = 0.5 * (d.dS[j] + d.dS[j].transpose());
        d.dX[j] = RDR[j] - nt[j].W * d.dS[j] * nt[j].W;
        d.dX[j] = 0.5 * (d.dX[j] + d.dX[j].transpose());
      }
      return d;
    };

    auto step_length = [&](const Direction& d) {
      double amax = std::min(detail::max_step_scalar(tau, d.dtau), detail::max_step_scalar(kappa, d.dkappa));
      for (std::size_t j = 0; j < nb; ++j) {
        const MatrixXd dXs = nt[j].Rinv * d.dX[j] * nt[j].Rinv.transpose();
        const MatrixXd dSs = nt[j].R.transpose() * d.dS[j] * nt[j].R;
        amax = std::min(amax, detail::max_step_scaled(nt[j].lambda, dXs));
        amax = std::min(amax, detail::max_step_scaled(nt[j].lambda, dSs));
      }
      return amax;
    };

    // Predictor.
    std::vector<MatrixXd> Daff(nb);
    for (std::size_t j = 0; j < nb; ++j) Daff[j] = -MatrixXd(nt[j].lambda.asDiagonal());
    const Direction aff = direction(1.0, Daff, -tau * kappa);
    const double alpha_aff = std::min(1.0, step_length(aff));
    double mu_aff = (tau + alpha_aff * aff.dtau) * (kappa + alpha_aff * aff.dkappa);
    for (std::size_t j = 0; j < nb; ++j) {
      mu_aff += ((X[j] + alpha_aff * aff.dX[j]).array() * (S[j] + alpha_aff * aff.dS[j]).array()).sum();
    }
    mu_aff /= nu_deg;
    const double ratio = std::clamp(mu_aff / mu, 0.0, 1.0);
    const double sigma = ratio * ratio * ratio;

    // Corrector.
    std::vector<MatrixXd> Dcor(nb);
    for (std::size_t j = 0; j < nb; ++j) {
      const MatrixXd dXs = nt[j].Rinv * aff.dX[j] * nt[j].Rinv.transpose();
      const MatrixXd dSs = nt[j].R.transpose() * aff.dS[j] * nt[j].R;
      const MatrixXd corr = 0.5 * (dXs * dSs + dSs * dXs);
      const Eigen::VectorXd& lam = nt[j].lambda;
      const int n = P.sizes[j];
      MatrixXd D(n, n);
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
          const double target = (r == c ? sigma * mu : 0.0) - corr(r, c);
          D(r, c) = 2.0 * target / (lam(r) + lam(c));
        }
        D(r, r) -= lam(r);
      }
      Dcor[j] = D;
    }
    const Direction dir = direction(1.0 - sigma, Dcor, sigma * mu - tau * kappa - aff.dtau * aff.dkappa);
    const double alpha = std::min(1.0, opt.step_fraction * step_length(dir));
    if (!std::isfinite(alpha) || alpha <= 0.0) return finish(SdpStatus::NumericalFailure, iter);

    for (std::size_t j = 0; j < nb; ++j) {
      X[j] += alpha * dir.dX[j];
      S[j] += alpha * dir.dS[j];
      X[j] = 0.5 * (X[j] + X[j].transpose());
      S[j] = 0.5 * (S[j] + S[j].transpose());
    }
    y += alpha * dir.dy;
    f += alpha * dir.df;
    tau += alpha * dir.dtau;
    kappa += alpha * dir.dkappa;

    stalls = alpha < 1e-8 ? stalls + 1 : 0;
    if (stalls >= 5) return finish(SdpStatus::NumericalFailure, iter + 1);
  }
  return finish(SdpStatus::MaxIterations, opt.max_iter);
}

/// Equality multipliers of an Optimal solve, or the improving ray of a
/// PrimalInfeasible one.
inline Eigen::VectorXd extract_dual(const SdpSolution& s) {
  if (s.status != SdpStatus::Optimal && s.status != SdpStatus::PrimalInfeasible) {
    throw std::logic_error(std::string("extract_dual: no multipliers for status ") + to_string(s.status));
  }
  return s.dual;
}

/// Plain-text triplet listing of a problem, for cross-checking with
/// external solvers. Indices are zero-based.
///
///   blocks <k> <n_1> ... <n_k>
///   free <nf>
///   constraints <m>
///   A <row> <block> <i> <j> <value>    symmetric entry, i >= j
///   F <row> <free index> <value>
///   b <row> <value>
///   C <block> <i> <j> <value>          objective (maximized)
///   c <free index> <value>
inline void write_triplets(std::ostream& os, const SdpProblem& p) {
  os.precision(17);
  os << "# sosred sdp triplets v1\n";
  os << "blocks " << p.block_sizes.size();
  for (int n : p.block_sizes) os << ' ' << n;
  os << "\nfree " << p.num_free << "\nconstraints " << p.constraints.size() << '\n';
  for (std::size_t i = 0; i < p.constraints.size(); ++i) {
    for (const auto& e : p.constraints[i].entries) {
      os << "A " << i << ' ' << e.block << ' ' << e.row << ' ' << e.col << ' ' << e.value << '\n';
    }
    for (const auto& [k, v] : p.constraints[i].free_terms) os << "F " << i << ' ' << k << ' ' << v << '\n';
    os << "b " << i << ' ' << p.rhs[i] << '\n';
  }
  for (const auto& e : p.objective.entries) {
    os << "C " << e.block << ' ' << e.row << ' ' << e.col << ' ' << e.value << '\n';
  }
  for (const auto& [k, v] : p.objective.free_terms) os << "c " << k << ' ' << v << '\n';
}

}  // namespace sosred
