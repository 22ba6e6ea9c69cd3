#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cert.hpp"
#include "linsys.hpp"
#include "oracle.hpp"
#include "poly.hpp"
#include "sos.hpp"

namespace sosred {

/// x^T P x <= level.
struct TerminalSet {
  Eigen::MatrixXd P;
  double level = 1.0;
};

struct MpcSpec {
  LinearSystem system;
  /// Gain of the terminal law u = K x used for j >= N_c. When absent the
  /// LQR law for Q = I, R = I is used (K = -K_lqr).
  std::optional<Eigen::MatrixXd> K;
  int control_horizon = 1;
  int prediction_horizon = 1;
  std::vector<Polynomial> input_constraints;  // over u
  std::vector<Polynomial> state_constraints;  // over x
  std::vector<std::string> input_labels;
  std::vector<std::string> state_labels;
  std::optional<TerminalSet> terminal;
  /// Optional per-variable bounds used as sampling box and SDP scaling.
  std::optional<Box> state_box;
  std::optional<Box> input_box;
  CertOptions cert;

  void validate() const {
    system.validate();
    if (control_horizon < 1 || control_horizon > prediction_horizon) {
      throw std::invalid_argument("MpcSpec: need 1 <= N_c <= N_p");
    }
    for (const auto& c : input_constraints) {
      if (static_cast<Eigen::Index>(c.nvars()) != system.nu()) {
        throw std::invalid_argument("MpcSpec: input constraint arity differs from the input dimension");
      }
    }
    for (const auto& c : state_constraints) {
      if (static_cast<Eigen::Index>(c.nvars()) != system.nx()) {
        throw std::invalid_argument("MpcSpec: state constraint arity differs from the state dimension");
      }
    }
    if (terminal) {
      const auto& P = terminal->P;
      if (P.rows() != system.nx() || P.cols() != system.nx()) throw std::invalid_argument("MpcSpec: P shape");
      if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, P.cwiseAbs().maxCoeff())) {
        throw std::invalid_argument("MpcSpec: P is not symmetric");
      }
      if (min_eigenvalue(P) < -1e-12) throw std::invalid_argument("MpcSpec: P is not positive semidefinite");
      if (!(terminal->level > 0)) throw std::invalid_argument("MpcSpec: terminal level must be positive");
    }
    if (K && (K->rows() != system.nu() || K->cols() != system.nx())) {
      throw std::invalid_argument("MpcSpec: K must be nu x nx");
    }
    if (state_box && state_box->dims() != system.nx()) throw std::invalid_argument("MpcSpec: state box dimension");
    if (input_box && input_box->dims() != system.nu()) throw std::invalid_argument("MpcSpec: input box dimension");
  }

  Eigen::MatrixXd terminal_gain() const {
    if (K) return *K;
    const Eigen::Index nx = system.nx(), nu = system.nu();
    return -dare(system.A, system.B, Eigen::MatrixXd::Identity(nx, nx), Eigen::MatrixXd::Identity(nu, nu)).K;
  }

  std::size_t num_decision_variables() const {
    return static_cast<std::size_t>(system.nx() + system.nu() * control_horizon);
  }
};

enum class MpcRowKind { Input, State, Terminal };

inline const char* to_string(MpcRowKind k) {
  switch (k) {
    case MpcRowKind::Input: return "input";
    case MpcRowKind::State: return "state";
    case MpcRowKind::Terminal: return "terminal";
  }
  return "?";
}

struct MpcRowLabel {
  MpcRowKind kind = MpcRowKind::State;
  std::size_t constraint = 0;
  int step = 0;

  std::string str() const {
    return std::string(to_string(kind)) + "[" + std::to_string(constraint) + "]@" + std::to_string(step);
  }
};

struct MpcOmega {
  SemialgebraicSet set;
  std::vector<MpcRowLabel> labels;
  /// Index of the terminal row, if any.
  std::optional<std::size_t> terminal_row;
};

/// level - x^T P x as a polynomial in x.
inline Polynomial quadratic_level(const Eigen::MatrixXd& P, double level) {
  const auto n = static_cast<std::size_t>(P.rows());
  Polynomial q = Polynomial::constant(n, level);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const double p = P(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      if (p != 0.0) q -= p * Polynomial::variable(n, a) * Polynomial::variable(n, b);
    }
  }
  return q;
}

/// Lifted constraint set over (x0, u_0, ..., u_{N_c-1}): input rows for
/// j = 0..N_p-1, state rows for j = 0..N_p, then the terminal row.
inline MpcOmega build_omega(const MpcSpec& spec, bool include_terminal = true) {
  spec.validate();
  const MpcPredictions pred =
      predict_mpc(spec.system, spec.control_horizon < spec.prediction_horizon ? spec.terminal_gain()
                                                                               : Eigen::MatrixXd(),
                  spec.control_horizon, spec.prediction_horizon);
  MpcOmega out;
  out.set = SemialgebraicSet(spec.num_decision_variables());
  auto label_of = [](const std::vector<std::string>& names, std::size_t i, const char* kind) {
    return i < names.size() && !names[i].empty() ? names[i] : std::string(kind) + std::to_string(i);
  };
  for (const auto& p : pred.inputs) {
    for (std::size_t i = 0; i < spec.input_constraints.size(); ++i) {
      out.set.add(compose_affine(spec.input_constraints[i], p.map),
                  label_of(spec.input_labels, i, "u") + "@" + std::to_string(p.step));
      out.labels.push_back({MpcRowKind::Input, i, p.step});
    }
  }
  for (const auto& p : pred.states) {
    for (std::size_t i = 0; i < spec.state_constraints.size(); ++i) {
      out.set.add(compose_affine(spec.state_constraints[i], p.map),
                  label_of(spec.state_labels, i, "x") + "@" + std::to_string(p.step));
      out.labels.push_back({MpcRowKind::State, i, p.step});
    }
  }
  if (include_terminal && spec.terminal) {
    out.terminal_row = out.set.size();
    out.set.add(compose_affine(quadratic_level(spec.terminal->P, spec.terminal->level), pred.states.back().map),
                "terminal@" + std::to_string(spec.prediction_horizon));
    out.labels.push_back({MpcRowKind::Terminal, 0, spec.prediction_horizon});
  }
  return out;
}

/// (N_p + 1) n_cx + N_p n_cu (+ 1 with a terminal set).
inline std::size_t omega_row_count(const MpcSpec& spec) {
  const auto np = static_cast<std::size_t>(spec.prediction_horizon);
  return (np + 1) * spec.state_constraints.size() + np * spec.input_constraints.size() + (spec.terminal ? 1 : 0);
}

/// Cert options with the sampling box assembled from the state and input
/// boxes, widened by `inflate` about its center so that witnesses violating a
/// bound row stay inside the box.
inline CertOptions mpc_cert_options(const MpcSpec& spec, double inflate = 2.0) {
  CertOptions opt = spec.cert;
  if (!opt.box && spec.state_box && spec.input_box) {
    const Eigen::Index nx = spec.system.nx(), nu = spec.system.nu();
    const auto nz = static_cast<Eigen::Index>(spec.num_decision_variables());
    Eigen::VectorXd lo(nz), hi(nz);
    lo.head(nx) = spec.state_box->lower;
    hi.head(nx) = spec.state_box->upper;
    for (int j = 0; j < spec.control_horizon; ++j) {
      lo.segment(nx + nu * j, nu) = spec.input_box->lower;
      hi.segment(nx + nu * j, nu) = spec.input_box->upper;
    }
    const Eigen::VectorXd mid = 0.5 * (lo + hi), half = 0.5 * inflate * (hi - lo);
    opt.box = Box(mid - half, mid + half);
  }
  return opt;
}

struct MpcReduction {
  MpcOmega omega;
  ReduceReport report;
  Eigen::MatrixXd K;

  std::size_t removed_of(MpcRowKind kind) const {
    std::size_t n = 0;
    for (std::size_t i : report.removed) n += omega.labels[i].kind == kind ? 1 : 0;
    return n;
  }
  bool terminal_removed() const {
    return omega.terminal_row && report.entries[*omega.terminal_row].removed;
  }
};

/// Reduces the lifted set. The terminal row is tested first, against every
/// other row, then the rest in declared order.
inline MpcReduction reduce_mpc(const MpcSpec& spec, int threads = 1) {
  MpcReduction out;
  out.omega = build_omega(spec);
  out.K = spec.control_horizon < spec.prediction_horizon ? spec.terminal_gain() : Eigen::MatrixXd();
  ReduceOptions ro;
  ro.cert = mpc_cert_options(spec);
  ro.threads = threads;
  if (out.omega.terminal_row) {
    ro.order.push_back(*out.omega.terminal_row);
    for (std::size_t i = 0; i < out.omega.set.size(); ++i) {
      if (i != *out.omega.terminal_row) ro.order.push_back(i);
    }
  }
  out.report = reduce_set(out.omega.set, ro);
  return out;
}

struct HorizonStep {
  int prediction_horizon = 0;
  Verdict verdict;
};

struct HorizonSearch {
  std::optional<int> prediction_horizon;
  std::vector<HorizonStep> steps;
};

/// Smallest N_p in [np_min, np_max] for which the terminal row is redundant
/// with respect to the other lifted rows. Unknown counts as not redundant.
inline HorizonSearch min_horizon_terminal_redundant(const MpcSpec& spec, int np_min, int np_max) {
  if (!spec.terminal) throw std::invalid_argument("min_horizon_terminal_redundant: spec has no terminal set");
  if (np_min < spec.control_horizon) throw std::invalid_argument("min_horizon_terminal_redundant: np_min < N_c");
  HorizonSearch out;
  for (int np = np_min; np <= np_max; ++np) {
    MpcSpec s = spec;
    s.prediction_horizon = np;
    const MpcOmega omega = build_omega(s, false);
    const MpcOmega full = build_omega(s, true);
    Verdict v = check_redundant(full.set[*full.terminal_row], omega.set, mpc_cert_options(s));
    const bool redundant = v.redundant();
    out.steps.push_back({np, std::move(v)});
    if (redundant) {
      out.prediction_horizon = np;
      break;
    }
  }
  return out;
}

}  // namespace sosred
