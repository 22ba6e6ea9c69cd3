#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "linsys.hpp"
#include "poly.hpp"
#include "sdp.hpp"
#include "sos.hpp"

namespace sosred {

inline constexpr double kFeasibilityTol = 1e-9;

/// Axis-aligned box lower <= z <= upper.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Box() = default;
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) { validate(); }

  static Box symmetric(Eigen::Index n, double radius) {
    return Box(Eigen::VectorXd::Constant(n, -radius), Eigen::VectorXd::Constant(n, radius));
  }

  Eigen::Index dims() const { return lower.size(); }
  Eigen::VectorXd center() const { return 0.5 * (lower + upper); }
  Eigen::VectorXd halfwidth() const { return 0.5 * (upper - lower); }

  void validate() const {
    if (lower.size() != upper.size()) throw std::invalid_argument("Box: bound sizes differ");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
      if (!std::isfinite(lower(i)) || !std::isfinite(upper(i)) || !(lower(i) <= upper(i))) {
        throw std::invalid_argument("Box: bound " + std::to_string(i) + " is not a finite interval");
      }
    }
  }

  bool contains(const Eigen::VectorXd& z) const {
    return ((z - lower).array() >= 0).all() && ((upper - z).array() >= 0).all();
  }

  Eigen::VectorXd clamp(const Eigen::VectorXd& z) const { return z.cwiseMax(lower).cwiseMin(upper); }
};

/// Compiled constraint set for repeated point evaluation.
class CompiledSet {
 public:
  explicit CompiledSet(const SemialgebraicSet& set) {
    for (const auto& g : set.inequalities()) g_.emplace_back(g);
  }
  double min_value(const Eigen::VectorXd& z) const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& g : g_) m = std::min(m, g.eval(z));
    return m;
  }
  bool feasible(const Eigen::VectorXd& z, double tol = kFeasibilityTol) const { return min_value(z) >= -tol; }

 private:
  std::vector<CompiledPolynomial> g_;
};

struct GridMinResult {
  /// +inf when no grid point is feasible.
  double value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd argmin;
  std::size_t feasible_points = 0;
};

/// Minimum of c over the feasible points of a uniform grid with `resolution`
/// points per axis (endpoints included).
inline GridMinResult grid_min(const Polynomial& c, const SemialgebraicSet& set, const Box& box, int resolution) {
  const Eigen::Index n = box.dims();
  if (static_cast<Eigen::Index>(c.nvars()) != n || static_cast<Eigen::Index>(set.nvars()) != n) {
    throw std::invalid_argument("grid_min: dimension mismatch");
  }
  if (resolution < 2) throw std::invalid_argument("grid_min: resolution must be >= 2");
  double total = std::pow(static_cast<double>(resolution), static_cast<double>(n));
  if (total > 1e7) throw std::invalid_argument("grid_min: grid exceeds 1e7 points");
  const CompiledPolynomial cc(c);
  const CompiledSet cs(set);
  GridMinResult out;
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd z(n);
  const auto count = static_cast<std::size_t>(total);
  for (std::size_t t = 0; t < count; ++t) {
    std::size_t rem = t;
    for (Eigen::Index k = 0; k < n; ++k) {
      const int i = static_cast<int>(rem % static_cast<std::size_t>(resolution));
      rem /= static_cast<std::size_t>(resolution);
      z(k) = box.lower(k) + (box.upper(k) - box.lower(k)) * i / (resolution - 1);
    }
    if (!cs.feasible(z)) continue;
    ++out.feasible_points;
    const double v = cc.eval(z);
    if (v < out.value) {
      out.value = v;
      out.argmin = z;
    }
  }
  return out;
}

struct RefineResult {
  Eigen::VectorXd point;
  double value = 0.0;
  /// The start point was infeasible; nothing was refined.
  bool start_infeasible = false;
};

/// Projected coordinate descent on c over set, starting from a feasible point.
inline RefineResult refine_local(const Polynomial& c, const SemialgebraicSet& set, const Box& box,
                                 const Eigen::VectorXd& start, int iterations = 200) {
  const CompiledPolynomial cc(c);
  const CompiledSet cs(set);
  RefineResult out;
  out.point = box.clamp(start);
  out.value = cc.eval(out.point);
  if (!cs.feasible(out.point)) {
    out.start_infeasible = true;
    return out;
  }
  const Eigen::Index n = box.dims();
  Eigen::VectorXd step = 0.1 * (box.upper - box.lower).cwiseMax(1e-12);
  const Eigen::VectorXd floor = 1e-12 * (box.upper - box.lower).cwiseMax(1.0);
  for (int it = 0; it < iterations; ++it) {
    bool improved = false;
    for (Eigen::Index k = 0; k < n; ++k) {
      for (const double s : {1.0, -1.0}) {
        Eigen::VectorXd trial = out.point;
        trial(k) = std::clamp(trial(k) + s * step(k), box.lower(k), box.upper(k));
        if (!cs.feasible(trial)) continue;
        const double v = cc.eval(trial);
        if (v < out.value) {
          out.point = trial;
          out.value = v;
          improved = true;
          break;
        }
      }
    }
    if (!improved) {
      step *= 0.5;
      if ((step.array() <= floor.array()).all()) break;
    }
  }
  return out;
}

struct Trajectory {
  std::vector<Eigen::VectorXd> states;  // steps + 1 entries
  std::vector<Eigen::VectorXd> inputs;  // steps entries
};

using InputRule = std::function<Eigen::VectorXd(int step, const Eigen::VectorXd& state)>;

inline Trajectory simulate(const LinearSystem& sys, const Eigen::VectorXd& x0, const InputRule& rule, int steps) {
  sys.validate();
  if (x0.size() != sys.nx()) throw std::invalid_argument("simulate: x0 has wrong dimension");
  Trajectory t;
  t.states.push_back(x0);
  for (int j = 0; j < steps; ++j) {
    Eigen::VectorXd u = rule(j, t.states.back());
    if (u.size() != sys.nu()) throw std::invalid_argument("simulate: input rule returned wrong dimension");
    t.states.push_back(sys.A * t.states.back() + sys.B * u);
    t.inputs.push_back(std::move(u));
  }
  return t;
}

inline InputRule constant_input(Eigen::VectorXd v) {
  return [v = std::move(v)](int, const Eigen::VectorXd&) { return v; };
}

/// u_j for j < size(sequence), then u = K x.
inline InputRule sequence_then_feedback(std::vector<Eigen::VectorXd> sequence, Eigen::MatrixXd K) {
  return [seq = std::move(sequence), K = std::move(K)](int j, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    if (j < static_cast<int>(seq.size())) return seq[static_cast<std::size_t>(j)];
    return K * x;
  };
}

enum class LpStatus { Optimal, Infeasible, Unbounded, Failed };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
    case LpStatus::Failed: return "Failed";
  }
  return "?";
}

struct LpResult {
  LpStatus status = LpStatus::Failed;
  double value = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd argmin;
};

inline void require_affine(const Polynomial& p, const char* who) {
  if (p.degree() > 1) throw std::invalid_argument(std::string(who) + ": polynomial is not affine");
}

/// Coefficients (a, h) with p(z) = a^T z + h.
inline std::pair<Eigen::VectorXd, double> affine_coefficients(const Polynomial& p) {
  const std::size_t n = p.nvars();
  Eigen::VectorXd a(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) a(static_cast<Eigen::Index>(i)) = p.coeff(Monomial::variable(n, i));
  return {a, p.coeff(Monomial::one(n))};
}

/// min c(z) over { g_i(z) >= 0 } for affine c and g_i, through the conic solver
/// with free z and one 1x1 slack block per inequality.
inline LpResult lp_min(const Polynomial& c, const SemialgebraicSet& set, const SdpOptions& opt = {}) {
  require_affine(c, "lp_min");
  for (const auto& g : set.inequalities()) require_affine(g, "lp_min");
  const auto n = static_cast<int>(set.nvars());
  SdpProblem p;
  for (int k = 0; k < n; ++k) p.add_free();
  const auto [a0, h0] = affine_coefficients(c);
  for (int k = 0; k < n; ++k) {
    if (a0(k) != 0.0) p.objective.add_free(k, -a0(k));
  }
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto [a, h] = affine_coefficients(set[i]);
    const int blk = p.add_block(1);
    LinearFunctional row;
    for (int k = 0; k < n; ++k) {
      if (a(k) != 0.0) row.add_free(k, a(k));
    }
    row.add(blk, 0, 0, -1.0);
    p.add_constraint(std::move(row), -h);
  }
  LpResult out;
  if (p.constraints.empty()) {
    out.status = a0.cwiseAbs().maxCoeff() > 0 ? LpStatus::Unbounded : LpStatus::Optimal;
    out.value = out.status == LpStatus::Optimal ? h0 : -std::numeric_limits<double>::infinity();
    out.argmin = Eigen::VectorXd::Zero(n);
    return out;
  }
  const SdpSolution s = solve(p, opt);
  switch (s.status) {
    case SdpStatus::Optimal:
      out.status = LpStatus::Optimal;
      out.argmin = s.free_values;
      out.value = a0.dot(out.argmin) + h0;
      break;
    case SdpStatus::PrimalInfeasible:
      out.status = LpStatus::Infeasible;
      out.value = std::numeric_limits<double>::infinity();
      break;
    case SdpStatus::DualInfeasible:
      out.status = LpStatus::Unbounded;
      out.value = -std::numeric_limits<double>::infinity();
      break;
    default:
      out.status = LpStatus::Failed;
  }
  return out;
}

/// Exact LP minimum by vertex enumeration, for small dimension. Assumes the
/// feasible set is bounded; returns +inf when no vertex is feasible.
inline LpResult vertex_min(const Polynomial& c, const SemialgebraicSet& set, double feas_tol = 1e-9) {
  require_affine(c, "vertex_min");
  const auto n = static_cast<Eigen::Index>(set.nvars());
  const std::size_t m = set.size();
  if (n > 4) throw std::invalid_argument("vertex_min: dimension too large");
  std::vector<Eigen::VectorXd> a(m);
  std::vector<double> h(m);
  for (std::size_t i = 0; i < m; ++i) {
    require_affine(set[i], "vertex_min");
    std::tie(a[i], h[i]) = affine_coefficients(set[i]);
  }
  const auto [a0, h0] = affine_coefficients(c);
  LpResult out;
  out.status = LpStatus::Infeasible;
  out.value = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> pick(static_cast<std::size_t>(n));
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t from, std::size_t depth) {
    if (depth == static_cast<std::size_t>(n)) {
      Eigen::MatrixXd M(n, n);
      Eigen::VectorXd r(n);
      for (Eigen::Index k = 0; k < n; ++k) {
        M.row(k) = a[pick[static_cast<std::size_t>(k)]].transpose();
        r(k) = -h[pick[static_cast<std::size_t>(k)]];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
      if (lu.rank() < n) return;
      const Eigen::VectorXd z = lu.solve(r);
      for (std::size_t i = 0; i < m; ++i) {
        const double scale = std::max(1.0, a[i].cwiseAbs().maxCoeff() * z.cwiseAbs().maxCoeff());
        if (a[i].dot(z) + h[i] < -feas_tol * scale) return;
      }
      const double v = a0.dot(z) + h0;
      if (v < out.value) {
        out.value = v;
        out.argmin = z;
        out.status = LpStatus::Optimal;
      }
      return;
    }
    for (std::size_t i = from; i < m; ++i) {
      pick[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return out;
}

}  // namespace sosred
