#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "oracle.hpp"
#include "poly.hpp"
#include "sdp.hpp"
#include "sos.hpp"

namespace sosred {

struct FalsifyBudget {
  int samples = 4096;
  int chains = 8;
  int chain_steps = 64;
  int refine_starts = 4;
  int refine_iterations = 300;
};

struct CertOptions {
  /// Slack certificates are accepted only with rho >= rho_min.
  double rho_min = 1e-7;
  /// Identity residual bound, relative to max |coeff| of the (scaled) target.
  double tol_identity = 1e-6;
  double tol_psd = 1e-9;
  int ds_cap = 6;
  std::optional<int> fixed_ds;
  /// Sampling box; also fixes the variable scaling of the SDP.
  std::optional<Box> box;
  double default_box_radius = 10.0;
  FalsifyBudget budget;
  SdpOptions sdp;
  std::uint64_t seed = 0x5eed5eedULL;
  /// Witnesses need c(z) < -witness_tol and g_i(z) >= -witness_feas_tol.
  double witness_tol = 1e-7;
  double witness_feas_tol = 0.0;
  bool run_falsifier = true;
  /// Try the first moments of the SOS dual as a witness when rho < 0.
  bool use_moments = true;
};

enum class CertificateKind { Slack, Feasibility };

inline const char* to_string(CertificateKind k) { return k == CertificateKind::Slack ? "slack" : "feasibility"; }

/// c(center + diag(halfwidth) w) - sum_i s_i(w) g_i(center + diag(halfwidth) w) - rho = sigma0(w),
/// with s_i and sigma0 given by Gram matrices over monomials in w.
struct RedundancyCertificate {
  std::optional<std::size_t> constraint_index;
  /// Indices (into the caller's full list) of the inequalities carrying the
  /// multipliers, in multiplier order. Empty when the set was passed directly.
  std::vector<std::size_t> peer_indices;
  Polynomial target;
  int multiplier_degree = 0;
  CertificateKind kind = CertificateKind::Slack;
  Eigen::VectorXd center;
  Eigen::VectorXd halfwidth;
  std::vector<Monomial> multiplier_basis;
  std::vector<Eigen::MatrixXd> multiplier_grams;
  std::vector<Monomial> sigma0_basis;
  Eigen::MatrixXd sigma0_gram;
  double rho = 0.0;
  double residual_coeff_norm = std::numeric_limits<double>::infinity();
  double min_gram_eigenvalue = -std::numeric_limits<double>::infinity();

  std::size_t nvars() const { return target.nvars(); }
  AffineMap scaling() const { return AffineMap(Eigen::MatrixXd(halfwidth.asDiagonal()), center); }
};

struct Witness {
  Eigen::VectorXd point;
  double target_value = 0.0;
  /// min_i g_i(point).
  double min_constraint = 0.0;
  std::string source;
};

enum class VerdictKind { Redundant, NonRedundant, Unknown };
enum class UnknownReason { None, DegreeCap, SolverStatus };

inline const char* to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::Redundant: return "Redundant";
    case VerdictKind::NonRedundant: return "NonRedundant";
    case VerdictKind::Unknown: return "Unknown";
  }
  return "?";
}

inline const char* to_string(UnknownReason r) {
  switch (r) {
    case UnknownReason::None: return "none";
    case UnknownReason::DegreeCap: return "degree-cap";
    case UnknownReason::SolverStatus: return "solver-status";
  }
  return "?";
}

struct Verdict {
  VerdictKind kind = VerdictKind::Unknown;
  std::optional<RedundancyCertificate> certificate;
  std::optional<Witness> witness;
  UnknownReason reason = UnknownReason::None;
  /// Best slack value seen over the degree schedule (NaN if no SDP was solved).
  double rho = std::numeric_limits<double>::quiet_NaN();
  /// Last multiplier degree attempted (-1 if the SOS stage did not run).
  int degree = -1;
  double seconds = 0.0;
  std::string detail;

  bool redundant() const { return kind == VerdictKind::Redundant; }
};

struct CertificateCheck {
  bool ok = false;
  double residual_coeff_norm = 0.0;
  double residual_tolerance = 0.0;
  double min_gram_eigenvalue = 0.0;
  std::string failure;
};

inline double min_eigenvalue(const Eigen::MatrixXd& Q) {
  if (Q.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Q + Q.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

/// Recomputes the identity residual and Gram spectra from the certificate and
/// the original polynomials. Solver outputs are not consulted.
inline CertificateCheck check_certificate(const RedundancyCertificate& cert, const Polynomial& c,
                                          const SemialgebraicSet& set, double rho_min = 1e-7,
                                          double tol_identity = 1e-6, double tol_psd = 1e-9) {
  const std::size_t n = set.nvars();
  if (c.nvars() != n) throw std::invalid_argument("verify_certificate: target and set variable counts differ");
  if (cert.multiplier_grams.size() != set.size()) {
    throw std::invalid_argument("verify_certificate: certificate has " + std::to_string(cert.multiplier_grams.size()) +
                                " multipliers, set has " + std::to_string(set.size()) + " inequalities");
  }
  if (static_cast<std::size_t>(cert.center.size()) != n || static_cast<std::size_t>(cert.halfwidth.size()) != n) {
    throw std::invalid_argument("verify_certificate: scaling dimension mismatch");
  }
  const auto mbn = static_cast<Eigen::Index>(cert.multiplier_basis.size());
  for (const auto& Q : cert.multiplier_grams) {
    if (Q.rows() != mbn || Q.cols() != mbn) throw std::invalid_argument("verify_certificate: multiplier Gram shape");
  }
  const auto sbn = static_cast<Eigen::Index>(cert.sigma0_basis.size());
  if (cert.sigma0_gram.rows() != sbn || cert.sigma0_gram.cols() != sbn) {
    throw std::invalid_argument("verify_certificate: sigma0 Gram shape");
  }
  for (const auto& m : cert.multiplier_basis) {
    if (m.nvars() != n) throw std::invalid_argument("verify_certificate: basis arity");
  }
  for (const auto& m : cert.sigma0_basis) {
    if (m.nvars() != n) throw std::invalid_argument("verify_certificate: basis arity");
  }

  CertificateCheck out;
  const AffineMap T = cert.scaling();
  const Polynomial cw = compose_affine(c, T);
  Polynomial r = cw - gram_to_polynomial(cert.sigma0_basis, cert.sigma0_gram, n) - Polynomial::constant(n, cert.rho);
  double min_eig = min_eigenvalue(cert.sigma0_gram);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Polynomial s = gram_to_polynomial(cert.multiplier_basis, cert.multiplier_grams[i], n);
    r -= s * compose_affine(set[i], T);
    min_eig = std::min(min_eig, min_eigenvalue(cert.multiplier_grams[i]));
  }
  const double scale = cw.max_abs_coeff() > 0 ? cw.max_abs_coeff() : 1.0;
  out.residual_coeff_norm = r.max_abs_coeff();
  out.residual_tolerance = tol_identity * scale;
  out.min_gram_eigenvalue = min_eig;
  if (!(min_eig >= -tol_psd)) {
    out.failure = "Gram matrix eigenvalue " + std::to_string(min_eig) + " below -tol_psd";
  } else if (!(out.residual_coeff_norm <= out.residual_tolerance)) {
    out.failure = "identity residual " + std::to_string(out.residual_coeff_norm) + " exceeds " +
                  std::to_string(out.residual_tolerance);
  } else if (cert.kind == CertificateKind::Slack && !(cert.rho >= rho_min)) {
    out.failure = "rho " + std::to_string(cert.rho) + " below rho_min";
  } else if (cert.kind == CertificateKind::Feasibility && cert.rho != 0.0) {
    out.failure = "feasibility certificate with nonzero rho";
  } else {
    out.ok = true;
  }
  return out;
}

inline bool verify_certificate(const RedundancyCertificate& cert, const Polynomial& c, const SemialgebraicSet& set,
                               double rho_min = 1e-7, double tol_identity = 1e-6, double tol_psd = 1e-9) {
  return check_certificate(cert, c, set, rho_min, tol_identity, tol_psd).ok;
}

inline bool verify_certificate(const RedundancyCertificate& cert, const Polynomial& c, const SemialgebraicSet& set,
                               const CertOptions& opt) {
  return verify_certificate(cert, c, set, opt.rho_min, opt.tol_identity, opt.tol_psd);
}

namespace detail {

/// Derivative-free descent on f over points accepted by `feasible`, using
/// coordinate and random directions scaled to the box.
template <class F, class Feasible>
double pattern_search(const F& f, const Feasible& feasible, const Box& box, Eigen::VectorXd& z, double fz,
                      std::mt19937_64& rng, int iterations, double target = -std::numeric_limits<double>::infinity()) {
  const Eigen::Index n = box.dims();
  const Eigen::VectorXd width = (box.upper - box.lower).cwiseMax(1e-12);
  std::normal_distribution<double> normal;
  double step = 0.1;
  std::vector<Eigen::VectorXd> dirs;
  for (int it = 0; it < iterations && step > 1e-10 && fz > target; ++it) {
    dirs.clear();
    for (Eigen::Index k = 0; k < n; ++k) {
      dirs.push_back(Eigen::VectorXd::Unit(n, k));
      dirs.push_back(-Eigen::VectorXd::Unit(n, k));
    }
    for (Eigen::Index k = 0; k < 2 * n; ++k) {
      Eigen::VectorXd d(n);
      for (Eigen::Index j = 0; j < n; ++j) d(j) = normal(rng);
      dirs.push_back(d / std::max(d.norm(), 1e-300));
    }
    bool improved = false;
    for (const auto& d : dirs) {
      Eigen::VectorXd trial = box.clamp(z + step * d.cwiseProduct(width));
      if (!feasible(trial)) continue;
      double ft = f(trial);
      if (ft < fz) {
        // Keep going while it pays off.
        double s = step;
        for (int grow = 0; grow < 20; ++grow) {
          s *= 2.0;
          Eigen::VectorXd further = box.clamp(z + s * d.cwiseProduct(width));
          if (!feasible(further)) break;
          const double ff = f(further);
          if (!(ff < ft)) break;
          trial = std::move(further);
          ft = ff;
        }
        z = std::move(trial);
        fz = ft;
        improved = true;
        break;
      }
    }
    if (!improved) step *= 0.5;
  }
  return fz;
}

inline AffineMap box_scaling(const Box& box) {
  Eigen::VectorXd h = box.halfwidth();
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    if (!(h(i) > 0)) h(i) = 1.0;
  }
  return AffineMap(Eigen::MatrixXd(h.asDiagonal()), box.center());
}

}  // namespace detail

/// Searches the box for z in the set with c(z) < -witness_tol: uniform
/// samples, a violation-descent phase when no sample is feasible, short
/// hit-and-run chains, then local descent from the best points.
inline std::optional<Witness> falsify(const Polynomial& c, const SemialgebraicSet& set, const Box& box,
                                      const FalsifyBudget& budget = {}, std::uint64_t seed = 0x5eed5eedULL,
                                      double witness_tol = 1e-7, double feas_tol = 0.0) {
  const Eigen::Index n = box.dims();
  if (static_cast<Eigen::Index>(c.nvars()) != n || static_cast<Eigen::Index>(set.nvars()) != n) {
    throw std::invalid_argument("falsify: sampling box dimension does not match the problem");
  }
  const CompiledPolynomial cc(c);
  std::vector<CompiledPolynomial> gs;
  for (const auto& g : set.inequalities()) gs.emplace_back(g);
  auto min_g = [&](const Eigen::VectorXd& z) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& g : gs) m = std::min(m, g.eval(z));
    return m;
  };
  auto feasible = [&](const Eigen::VectorXd& z) { return min_g(z) >= -feas_tol; };
  auto violation = [&](const Eigen::VectorXd& z) {
    double v = 0.0;
    for (const auto& g : gs) v += std::pow(std::max(0.0, -g.eval(z) - feas_tol), 2);
    return v;
  };
  auto fc = [&](const Eigen::VectorXd& z) { return cc.eval(z); };
  auto make = [&](const Eigen::VectorXd& z, const char* src) -> std::optional<Witness> {
    const double v = cc.eval(z);
    const double m = gs.empty() ? std::numeric_limits<double>::infinity() : min_g(z);
    if (v < -witness_tol && m >= -feas_tol) return Witness{z, v, m, src};
    return std::nullopt;
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto sample = [&] {
    Eigen::VectorXd z(n);
    for (Eigen::Index k = 0; k < n; ++k) z(k) = box.lower(k) + (box.upper(k) - box.lower(k)) * unit(rng);
    return z;
  };

  const auto keep = static_cast<std::size_t>(std::max(1, std::max(budget.refine_starts, budget.chains)));
  std::vector<std::pair<double, Eigen::VectorXd>> best;        // feasible, by c
  std::vector<std::pair<double, Eigen::VectorXd>> least_bad;   // infeasible, by violation
  auto push = [keep](std::vector<std::pair<double, Eigen::VectorXd>>& v, double key, const Eigen::VectorXd& z) {
    if (v.size() < keep || key < v.back().first) {
      v.emplace_back(key, z);
      std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      if (v.size() > keep) v.pop_back();
    }
  };

  auto refine_from = [&](Eigen::VectorXd z) -> std::optional<Witness> {
    detail::pattern_search(fc, feasible, box, z, fc(z), rng, budget.refine_iterations, -10 * witness_tol);
    return make(z, "sampling");
  };

  for (int s = 0; s < budget.samples; ++s) {
    const Eigen::VectorXd z = s == 0 ? box.center() : sample();
    if (feasible(z)) {
      const double v = fc(z);
      if (v < -witness_tol) return refine_from(z);
      push(best, v, z);
    } else {
      push(least_bad, violation(z), z);
    }
  }
  if (best.empty()) {
    for (const auto& [v0, z0] : least_bad) {
      Eigen::VectorXd z = z0;
      auto always = [](const Eigen::VectorXd&) { return true; };
      const double v = detail::pattern_search(violation, always, box, z, v0, rng, budget.refine_iterations, 0.0);
      if (v <= 0.0 && feasible(z)) {
        if (auto w = make(z, "sampling")) return w;
        push(best, fc(z), z);
      }
    }
  }
  if (best.empty()) return std::nullopt;

  std::normal_distribution<double> normal;
  const Eigen::VectorXd width = (box.upper - box.lower).cwiseMax(1e-12);
  const auto starts = best;
  for (int ch = 0; ch < budget.chains; ++ch) {
    Eigen::VectorXd z = starts[static_cast<std::size_t>(ch) % starts.size()].second;
    for (int st = 0; st < budget.chain_steps; ++st) {
      Eigen::VectorXd d(n);
      for (Eigen::Index k = 0; k < n; ++k) d(k) = normal(rng) * width(k);
      double t = (2.0 * unit(rng) - 1.0) * 0.5;
      for (int tries = 0; tries < 8; ++tries, t *= 0.5) {
        const Eigen::VectorXd trial = box.clamp(z + t * d);
        if (!feasible(trial)) continue;
        z = trial;
        const double v = fc(z);
        if (v < -witness_tol) return refine_from(z);
        push(best, v, z);
        break;
      }
    }
  }
  for (int r = 0; r < budget.refine_starts && r < static_cast<int>(best.size()); ++r) {
    if (auto w = refine_from(best[static_cast<std::size_t>(r)].second)) return w;
  }
  return std::nullopt;
}

namespace detail {

struct ScaledProblem {
  AffineMap T;
  Polynomial c_hat;
  SemialgebraicSet g_hat;
  double c_scale = 1.0;
  std::vector<double> g_scale;
};

inline ScaledProblem scale_problem(const Polynomial& c, const SemialgebraicSet& set, const Box& box) {
  ScaledProblem sp;
  sp.T = box_scaling(box);
  Polynomial cw = compose_affine(c, sp.T);
  sp.c_scale = cw.max_abs_coeff() > 0 ? cw.max_abs_coeff() : 1.0;
  sp.c_hat = cw * (1.0 / sp.c_scale);
  sp.g_hat = SemialgebraicSet(set.nvars());
  for (std::size_t i = 0; i < set.size(); ++i) {
    Polynomial gw = compose_affine(set[i], sp.T);
    const double s = gw.max_abs_coeff() > 0 ? gw.max_abs_coeff() : 1.0;
    sp.g_scale.push_back(s);
    sp.g_hat.add(gw * (1.0 / s), set.label(i));
  }
  return sp;
}

inline Eigen::MatrixXd psd_part(const Eigen::MatrixXd& Q) {
  if (Q.size() == 0) return Q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Q + Q.transpose()));
  const Eigen::VectorXd l = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd P = es.eigenvectors() * l.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (P + P.transpose());
}

/// Certificate in w-space from a solved (normalized) program.
inline RedundancyCertificate make_certificate(const Polynomial& c, const ScaledProblem& sp, const SosProgram& prog,
                                              const SdpSolution& sol, CertificateKind kind) {
  RedundancyCertificate cert;
  cert.target = c;
  cert.multiplier_degree = prog.multiplier_degree;
  cert.kind = kind;
  cert.center = sp.T.offset;
  cert.halfwidth = sp.T.matrix.diagonal();
  cert.multiplier_basis = prog.multiplier_basis;
  cert.sigma0_basis = prog.sigma0_basis;
  for (std::size_t i = 0; i < prog.num_multipliers(); ++i) {
    cert.multiplier_grams.push_back(psd_part(sol.block_values[i]) * (sp.c_scale / sp.g_scale[i]));
  }
  cert.sigma0_gram = psd_part(sol.block_values[static_cast<std::size_t>(prog.sigma0_block())]) * sp.c_scale;
  cert.rho = kind == CertificateKind::Slack ? sol.free_values(0) * sp.c_scale : 0.0;
  return cert;
}

inline void attach_check(RedundancyCertificate& cert, const CertificateCheck& chk) {
  cert.residual_coeff_norm = chk.residual_coeff_norm;
  cert.min_gram_eigenvalue = chk.min_gram_eigenvalue;
}

}  // namespace detail

namespace detail {

/// Candidate minimizers read off the dual moment vector: the mean, and the
/// mean shifted along the leading principal axes of the covariance (an
/// optimal measure split between symmetric points has a useless mean).
inline std::vector<Eigen::VectorXd> moment_candidates(const std::vector<Monomial>& rows, const Eigen::VectorXd& y,
                                                      std::size_t n) {
  std::map<Monomial, Eigen::Index, GrlexLess> at;
  for (std::size_t r = 0; r < rows.size(); ++r) at.emplace(rows[r], static_cast<Eigen::Index>(r));
  const double y0 = y(0);
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::VectorXd mean(N);
  for (std::size_t k = 0; k < n; ++k) mean(static_cast<Eigen::Index>(k)) = y(at.at(Monomial::variable(n, k))) / y0;
  std::vector<Eigen::VectorXd> out{mean};
  Eigen::MatrixXd S(N, N);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const auto it = at.find(Monomial::variable(n, a) * Monomial::variable(n, b));
      if (it == at.end()) return out;
      S(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = y(it->second) / y0;
    }
  }
  const Eigen::MatrixXd C = S - mean * mean.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (C + C.transpose()));
  for (Eigen::Index k = N - 1; k >= std::max<Eigen::Index>(0, N - 2); --k) {
    const double lam = es.eigenvalues()(k);
    if (!(lam > 1e-12)) break;
    const Eigen::VectorXd d = std::sqrt(lam) * es.eigenvectors().col(k);
    out.push_back(mean + d);
    out.push_back(mean - d);
  }
  return out;
}

}  // namespace detail

/// Moves `start` into the set (violation descent) and then downhill on c;
/// returns a witness if c ends below -witness_tol.
inline std::optional<Witness> polish_witness(const Polynomial& c, const SemialgebraicSet& set, const Box& box,
                                             Eigen::VectorXd start, std::mt19937_64& rng, int iterations,
                                             double witness_tol, double feas_tol) {
  const CompiledPolynomial cc(c);
  const CompiledSet cs(set);
  std::vector<CompiledPolynomial> gs;
  for (const auto& g : set.inequalities()) gs.emplace_back(g);
  auto violation = [&](const Eigen::VectorXd& z) {
    double v = 0.0;
    for (const auto& g : gs) v += std::pow(std::max(0.0, -g.eval(z) - feas_tol), 2);
    return v;
  };
  auto feasible = [&](const Eigen::VectorXd& z) { return set.empty() || cs.feasible(z, feas_tol); };
  auto fc = [&](const Eigen::VectorXd& z) { return cc.eval(z); };
  Eigen::VectorXd z = box.clamp(start);
  if (!feasible(z)) {
    auto always = [](const Eigen::VectorXd&) { return true; };
    detail::pattern_search(violation, always, box, z, violation(z), rng, iterations, 0.0);
    if (!feasible(z)) return std::nullopt;
  }
  detail::pattern_search(fc, feasible, box, z, fc(z), rng, iterations, -10 * witness_tol);
  const double v = cc.eval(z);
  if (!(v < -witness_tol)) return std::nullopt;
  return Witness{z, v, set.empty() ? std::numeric_limits<double>::infinity() : cs.min_value(z), "sampling"};
}

inline bool all_affine(const Polynomial& c, const SemialgebraicSet& set) {
  if (c.degree() > 1) return false;
  for (const auto& g : set.inequalities()) {
    if (g.degree() > 1) return false;
  }
  return true;
}

/// Smallest even d_s with d_s + deg(set) >= deg(c).
inline int initial_multiplier_degree(const Polynomial& c, const SemialgebraicSet& set) {
  if (set.empty()) return 0;
  int d = std::max(0, c.degree() - set.max_degree());
  return d + (d % 2);
}

inline Box default_box(std::size_t nvars, const CertOptions& opt) {
  if (opt.box) {
    if (static_cast<std::size_t>(opt.box->dims()) != nvars) {
      throw std::invalid_argument("check_redundant: sampling box dimension does not match the problem");
    }
    return *opt.box;
  }
  return Box::symmetric(static_cast<Eigen::Index>(nvars), opt.default_box_radius);
}

/// Redundancy of c(z) >= 0 with respect to set: falsifier first, then the
/// SOS degree schedule. Numerical trouble degrades to Unknown.
inline Verdict check_redundant(const Polynomial& c, const SemialgebraicSet& set, const CertOptions& opt = {}) {
  if (c.nvars() != set.nvars()) throw std::invalid_argument("check_redundant: target and set variable counts differ");
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  auto done = [&](Verdict&& out) {
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::move(out);
  };
  const Box box = default_box(set.nvars(), opt);

  if (opt.run_falsifier) {
    if (auto w = falsify(c, set, box, opt.budget, opt.seed, opt.witness_tol, opt.witness_feas_tol)) {
      v.kind = VerdictKind::NonRedundant;
      v.witness = std::move(w);
      return done(std::move(v));
    }
  }

  detail::ScaledProblem sp;
  try {
    sp = detail::scale_problem(c, set, box);
  } catch (const std::exception& e) {
    v.reason = UnknownReason::SolverStatus;
    v.detail = e.what();
    return done(std::move(v));
  }

  std::vector<int> schedule;
  if (opt.fixed_ds) {
    schedule.push_back(*opt.fixed_ds);
  } else {
    const int start = initial_multiplier_degree(c, set);
    // With affine data the d_s = 0 bound is already exact (LP duality).
    const bool single = set.empty() || all_affine(c, set);
    for (int d = start; d <= std::max(start, opt.ds_cap); d += 2) {
      schedule.push_back(d);
      if (single) break;
    }
  }

  UnknownReason reason = UnknownReason::DegreeCap;
  const double near_zero = opt.tol_identity;
  auto accept = [&](RedundancyCertificate cert, const char* how) -> bool {
    const CertificateCheck chk = check_certificate(cert, c, set, opt.rho_min, opt.tol_identity, opt.tol_psd);
    detail::attach_check(cert, chk);
    if (!chk.ok) {
      v.detail = std::string(how) + " certificate rejected: " + chk.failure;
      return false;
    }
    v.kind = VerdictKind::Redundant;
    v.certificate = std::move(cert);
    v.detail.clear();
    return true;
  };

  for (const int ds : schedule) {
    v.degree = ds;
    try {
      const SosProgram prog = build(sp.c_hat, sp.g_hat, ds, true);
      const SdpSolution sol = solve(prog.sdp, opt.sdp);
      bool try_feasibility = false;
      if (sol.status == SdpStatus::Optimal) {
        const double rho_hat = sol.free_values(0);
        const double rho = rho_hat * sp.c_scale;
        if (std::isnan(v.rho) || rho > v.rho) v.rho = rho;
        if (rho >= opt.rho_min &&
            accept(detail::make_certificate(c, sp, prog, sol, CertificateKind::Slack), "slack")) {
          return done(std::move(v));
        }
        if (rho_hat >= -near_zero) {
          try_feasibility = true;
        } else if (opt.use_moments) {
          const Eigen::VectorXd y = extract_dual(sol);
          const std::size_t n = set.nvars();
          if (std::abs(y(0)) > 1e-12) {
            std::mt19937_64 rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
            for (const Eigen::VectorXd& w : detail::moment_candidates(prog.row_monomials, y, n)) {
              auto wit = polish_witness(c, set, box, box.clamp(sp.T(w)), rng, opt.budget.refine_iterations,
                                        opt.witness_tol, opt.witness_feas_tol);
              if (wit) {
                wit->source = "moments";
                v.kind = VerdictKind::NonRedundant;
                v.witness = std::move(wit);
                return done(std::move(v));
              }
            }
          }
        }
      } else if (sol.status == SdpStatus::PrimalInfeasible) {
        reason = UnknownReason::DegreeCap;
      } else {
        try_feasibility = true;
        reason = UnknownReason::SolverStatus;
        v.detail = std::string("slack program: ") + to_string(sol.status);
      }
      if (try_feasibility) {
        const SosProgram prog0 = build(sp.c_hat, sp.g_hat, ds, false);
        const SdpSolution sol0 = solve(prog0.sdp, opt.sdp);
        if (sol0.status == SdpStatus::Optimal &&
            accept(detail::make_certificate(c, sp, prog0, sol0, CertificateKind::Feasibility), "feasibility")) {
          return done(std::move(v));
        }
        if (sol0.status == SdpStatus::Optimal || sol0.status == SdpStatus::PrimalInfeasible) {
          reason = UnknownReason::DegreeCap;
        } else {
          reason = UnknownReason::SolverStatus;
          v.detail = std::string("feasibility program: ") + to_string(sol0.status);
        }
      }
    } catch (const std::exception& e) {
      reason = UnknownReason::SolverStatus;
      v.detail = e.what();
    }
  }
  v.kind = VerdictKind::Unknown;
  v.reason = reason;
  return done(std::move(v));
}

/// Same certificate with the multipliers at `drop` positions removed, or
/// nothing if that breaks verification.
inline std::optional<RedundancyCertificate> drop_multipliers(const RedundancyCertificate& cert, const Polynomial& c,
                                                             const SemialgebraicSet& reduced_peers,
                                                             const std::vector<std::size_t>& keep_positions,
                                                             const CertOptions& opt) {
  RedundancyCertificate out = cert;
  out.multiplier_grams.clear();
  out.peer_indices.clear();
  for (std::size_t p : keep_positions) {
    out.multiplier_grams.push_back(cert.multiplier_grams.at(p));
    if (p < cert.peer_indices.size()) out.peer_indices.push_back(cert.peer_indices[p]);
  }
  const CertificateCheck chk = check_certificate(out, c, reduced_peers, opt.rho_min, opt.tol_identity, opt.tol_psd);
  if (!chk.ok) return std::nullopt;
  detail::attach_check(out, chk);
  return out;
}

struct ReduceEntry {
  std::size_t index = 0;
  std::string label;
  Verdict verdict;
  bool removed = false;
  /// Inequalities the final test was run against.
  std::vector<std::size_t> peers;
};

struct ReduceOptions {
  CertOptions cert;
  /// 0 or 1: sequential declared-order sweep. >1: concurrent rounds.
  int threads = 1;
  /// Test order (a permutation of the indices); declared order when empty.
  std::vector<std::size_t> order;
};

struct ReduceReport {
  SemialgebraicSet reduced;
  std::vector<std::size_t> retained;
  /// Removal order.
  std::vector<std::size_t> removed;
  std::vector<ReduceEntry> entries;
  bool relaxed_order = false;
  double seconds = 0.0;

  std::size_t count(VerdictKind k) const {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [k](const ReduceEntry& e) { return e.verdict.kind == k; }));
  }
};

namespace detail {

/// Runs f(0..n-1) on up to `threads` workers; rethrows the first exception.
template <typename F>
void parallel_for(std::size_t n, int threads, const F& f) {
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        f(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const auto nthreads = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

inline std::vector<std::size_t> retained_except(const std::vector<bool>& alive, std::size_t skip) {
  std::vector<std::size_t> peers;
  for (std::size_t j = 0; j < alive.size(); ++j) {
    if (alive[j] && j != skip) peers.push_back(j);
  }
  return peers;
}

}  // namespace detail

/// Removes redundant inequalities. Sequential mode tests each constraint in
/// declared (or given) order against all currently retained others and drops it at once
/// when redundant. Concurrent mode tests a round of constraints against a
/// frozen retained set, then commits removals in test order, keeping a
/// removal only if its certificate still verifies without the rows removed
/// earlier in the same round.
inline ReduceReport reduce_set(const SemialgebraicSet& set, const ReduceOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t m = set.size();
  ReduceReport rep;
  rep.entries.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    rep.entries[i].index = i;
    rep.entries[i].label = set.label(i);
  }
  std::vector<bool> alive(m, true);
  std::vector<std::size_t> order = opt.order;
  if (order.empty()) {
    order.resize(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
  }
  {
    std::vector<bool> seen(m, false);
    if (order.size() != m) throw std::invalid_argument("reduce_set: order is not a permutation");
    for (std::size_t i : order) {
      if (i >= m || seen[i]) throw std::invalid_argument("reduce_set: order is not a permutation");
      seen[i] = true;
    }
  }

  auto test = [&](std::size_t i, const std::vector<bool>& snapshot) {
    ReduceEntry e;
    e.index = i;
    e.label = set.label(i);
    e.peers = detail::retained_except(snapshot, i);
    e.verdict = check_redundant(set[i], set.subset(e.peers), opt.cert);
    if (e.verdict.certificate) {
      e.verdict.certificate->constraint_index = i;
      e.verdict.certificate->peer_indices = e.peers;
    }
    return e;
  };

  if (opt.threads <= 1) {
    for (std::size_t i : order) {
      ReduceEntry e = test(i, alive);
      if (e.verdict.redundant()) {
        alive[i] = false;
        e.removed = true;
        rep.removed.push_back(i);
      }
      rep.entries[i] = std::move(e);
    }
  } else {
    rep.relaxed_order = true;
    std::vector<std::size_t> pending = order;
    while (!pending.empty()) {
      const std::vector<bool> snapshot = alive;
      std::vector<ReduceEntry> results(pending.size());
      detail::parallel_for(pending.size(), opt.threads, [&](std::size_t k) { results[k] = test(pending[k], snapshot); });

      std::vector<std::size_t> retry;
      std::vector<bool> removed_this_round(m, false);
      bool any_removed = false;
      for (auto& e : results) {
        const std::size_t i = e.index;
        if (!e.verdict.redundant()) {
          rep.entries[i] = std::move(e);
          continue;
        }
        bool clash = false;
        for (std::size_t j : e.peers) clash = clash || removed_this_round[j];
        if (clash) {
          std::vector<std::size_t> keep_pos, peers;
          for (std::size_t p = 0; p < e.peers.size(); ++p) {
            if (!removed_this_round[e.peers[p]]) {
              keep_pos.push_back(p);
              peers.push_back(e.peers[p]);
            }
          }
          auto cert = drop_multipliers(*e.verdict.certificate, set[i], set.subset(peers), keep_pos, opt.cert);
          if (!cert) {
            retry.push_back(i);
            continue;
          }
          e.verdict.certificate = std::move(cert);
          e.peers = std::move(peers);
        }
        alive[i] = false;
        removed_this_round[i] = true;
        any_removed = true;
        e.removed = true;
        rep.removed.push_back(i);
        rep.entries[i] = std::move(e);
      }
      if (!any_removed && !retry.empty()) {
        // Cannot happen (the first redundant result never clashes), but never spin.
        for (std::size_t i : retry) rep.entries[i].verdict.detail = "round limit";
        break;
      }
      pending = std::move(retry);
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (alive[i]) rep.retained.push_back(i);
  }
  rep.reduced = set.subset(rep.retained);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace sosred
