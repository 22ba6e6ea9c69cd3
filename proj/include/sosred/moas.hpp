#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cert.hpp"
#include "linsys.hpp"
#include "poly.hpp"
#include "sos.hpp"

namespace sosred {

/// Constraints c_i(x, v) >= 0 on the closed loop x(t+1) = A x(t) + B v with a
/// constant reference v.
struct MoasSpec {
  LinearSystem system;
  std::vector<Polynomial> constraints;
  std::vector<std::string> labels;
  double epsilon = 0.01;
  int k_bar = 500;
  CertOptions cert;

  std::size_t nvars() const { return static_cast<std::size_t>(system.nx() + system.nu()); }

  void validate() const {
    system.validate();
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("MoasSpec: epsilon must lie in (0, 1)");
    if (k_bar < 1) throw std::invalid_argument("MoasSpec: k_bar must be >= 1");
    if (constraints.empty()) throw std::invalid_argument("MoasSpec: no constraints");
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      if (constraints[i].nvars() != nvars()) {
        throw std::invalid_argument("MoasSpec: constraint " + std::to_string(i) + " has " +
                                    std::to_string(constraints[i].nvars()) + " variables, expected " +
                                    std::to_string(nvars()));
      }
    }
    const double r = spectral_radius(system.A);
    if (!(r < 1.0)) {
      throw std::invalid_argument("MoasSpec: closed-loop spectral radius " + std::to_string(r) + " is not below 1");
    }
  }

  std::string label(std::size_t i) const {
    return i < labels.size() && !labels[i].empty() ? labels[i] : "c" + std::to_string(i);
  }
};

/// c_i(x_hat(k | x, v), v).
inline Polynomial lift(const Polynomial& c, const LinearSystem& sys, int k) {
  const Eigen::Index nx = sys.nx(), nv = sys.nu();
  if (static_cast<Eigen::Index>(c.nvars()) != nx + nv) throw std::invalid_argument("lift: dimension mismatch");
  const PredictionMap p = predict_rg(sys, k);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nx + nv, nx + nv);
  M.topRows(nx) = p.map.matrix;
  M.bottomRightCorner(nv, nv).setIdentity();
  return compose_affine(c, AffineMap(M, Eigen::VectorXd::Zero(nx + nv)));
}

/// c_i((x_bar_v, v) / (1 - epsilon)) as polynomials in (x, v).
inline std::vector<Polynomial> tighten(const std::vector<Polynomial>& constraints, const LinearSystem& sys,
                                       double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw std::invalid_argument("tighten: epsilon must lie in [0, 1)");
  const Eigen::Index nx = sys.nx(), nv = sys.nu();
  const AffineMap xs = steady_state(sys);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nx + nv, nx + nv);
  M.topRightCorner(nx, nv) = xs.matrix;
  M.bottomRightCorner(nv, nv).setIdentity();
  M /= (1.0 - epsilon);
  const AffineMap map(M, Eigen::VectorXd::Zero(nx + nv));
  std::vector<Polynomial> out;
  for (const auto& c : constraints) {
    if (static_cast<Eigen::Index>(c.nvars()) != nx + nv) throw std::invalid_argument("tighten: dimension mismatch");
    out.push_back(compose_affine(c, map));
  }
  return out;
}

enum class MoasAlgorithm { Basic, Improved };

inline const char* to_string(MoasAlgorithm a) { return a == MoasAlgorithm::Basic ? "basic" : "improved"; }

enum class MoasRowKind { Tightened, Lifted };

struct MoasRow {
  MoasRowKind kind = MoasRowKind::Lifted;
  std::size_t constraint = 0;
  /// Prediction step (0 for the tightened steady-state rows).
  int k = 0;
};

struct MoasCheck {
  std::size_t constraint = 0;
  int k = 0;
  Verdict verdict;
};

struct MoasResult {
  MoasAlgorithm algorithm = MoasAlgorithm::Improved;
  /// -1 when k_bar was reached first.
  int k_star = -1;
  bool not_finitely_determined = false;
  SemialgebraicSet inequalities;
  std::vector<MoasRow> rows;
  std::vector<MoasCheck> history;
  /// First k at which each constraint was found redundant.
  std::vector<std::optional<int>> redundancy_onset;
  double spectral_radius = 0.0;
  double seconds = 0.0;
  /// Concurrent checks against a frozen set were used.
  bool relaxed = false;

  std::size_t count_rows(MoasRowKind kind) const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.kind == kind ? 1 : 0;
    return n;
  }
  /// Lifted rows checked at k >= 1 and found redundant (dropped).
  std::size_t redundant_checks() const {
    std::size_t n = 0;
    for (const auto& h : history) n += h.verdict.redundant() ? 1 : 0;
    return n;
  }
};

/// Tightened finitely-determined output admissible set. Basic re-checks every
/// constraint at every step; Improved stops checking a constraint once it is
/// redundant. At step k each lifted row is checked, in constraint order,
/// against the rows kept so far (including those added earlier at step k).
/// Unknown verdicts keep the row.
/// With threads > 1 the checks of one step run concurrently against the set
/// frozen at the start of the step (relaxed mode); rows are still appended in
/// constraint order.
inline MoasResult compute(const MoasSpec& spec, MoasAlgorithm algorithm = MoasAlgorithm::Improved, int threads = 1) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t nc = spec.constraints.size();
  MoasResult res;
  res.algorithm = algorithm;
  res.spectral_radius = spectral_radius(spec.system.A);
  res.redundancy_onset.assign(nc, std::nullopt);
  res.inequalities = SemialgebraicSet(spec.nvars());

  for (std::size_t i = 0; i < nc; ++i) {
    res.inequalities.add(lift(spec.constraints[i], spec.system, 0), spec.label(i) + "@k=0");
    res.rows.push_back({MoasRowKind::Lifted, i, 0});
  }
  const std::vector<Polynomial> tight = tighten(spec.constraints, spec.system, spec.epsilon);
  for (std::size_t i = 0; i < nc; ++i) {
    res.inequalities.add(tight[i], spec.label(i) + "@eps");
    res.rows.push_back({MoasRowKind::Tightened, i, 0});
  }

  std::vector<bool> flagged(nc, false);
  for (int k = 1; k <= spec.k_bar; ++k) {
    bool all_redundant = true;
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < nc; ++i) {
      if (!(algorithm == MoasAlgorithm::Improved && flagged[i])) active.push_back(i);
    }
    std::vector<Polynomial> lifted(nc);
    for (std::size_t i : active) lifted[i] = lift(spec.constraints[i], spec.system, k);
    // Relaxed mode: all checks of this step run against the frozen set.
    std::vector<std::optional<Verdict>> frozen(nc);
    if (threads > 1 && active.size() > 1) {
      res.relaxed = true;
      const SemialgebraicSet snapshot = res.inequalities;
      detail::parallel_for(active.size(), threads, [&](std::size_t a) {
        frozen[active[a]] = check_redundant(lifted[active[a]], snapshot, spec.cert);
      });
    }
    for (std::size_t i : active) {
      Polynomial row = std::move(lifted[i]);
      Verdict v = frozen[i] ? std::move(*frozen[i]) : check_redundant(row, res.inequalities, spec.cert);
      if (v.redundant()) {
        flagged[i] = true;
        if (!res.redundancy_onset[i]) res.redundancy_onset[i] = k;
      } else {
        all_redundant = false;
        res.inequalities.add(std::move(row), spec.label(i) + "@k=" + std::to_string(k));
        res.rows.push_back({MoasRowKind::Lifted, i, k});
      }
      res.history.push_back({i, k, std::move(v)});
    }
    if (algorithm == MoasAlgorithm::Improved) {
      all_redundant = true;
      for (bool f : flagged) all_redundant = all_redundant && f;
    }
    if (all_redundant) {
      res.k_star = k - 1;
      break;
    }
  }
  if (res.k_star < 0) res.not_finitely_determined = true;
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

/// False if some constraint is redundant at step k and not redundant at a
/// later step in the recorded history.
inline bool check_prop1_consistency(const MoasResult& result) {
  std::vector<std::optional<int>> first;
  for (const auto& h : result.history) {
    if (h.constraint >= first.size()) first.resize(h.constraint + 1);
    auto& f = first[h.constraint];
    if (h.verdict.redundant()) {
      if (!f || h.k < *f) f = h.k;
    }
  }
  for (const auto& h : result.history) {
    const auto& f = first[h.constraint];
    if (f && h.k > *f && !h.verdict.redundant()) return false;
  }
  return true;
}

}  // namespace sosred
