#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "poly.hpp"
#include "sdp.hpp"

namespace sosred {

/// { z in R^n : g_i(z) >= 0 for every inequality g_i }.
class SemialgebraicSet {
 public:
  SemialgebraicSet() = default;
  explicit SemialgebraicSet(std::size_t nvars) : nvars_(nvars) {}
  SemialgebraicSet(std::size_t nvars, std::vector<Polynomial> inequalities, std::vector<std::string> labels = {})
      : nvars_(nvars) {
    for (std::size_t i = 0; i < inequalities.size(); ++i) {
      add(std::move(inequalities[i]), i < labels.size() ? labels[i] : std::string());
    }
  }

  void add(Polynomial g, std::string label = {}) {
    if (g.nvars() != nvars_) {
      throw std::invalid_argument("SemialgebraicSet: inequality has " + std::to_string(g.nvars()) +
                                  " variables, set has " + std::to_string(nvars_));
    }
    inequalities_.push_back(std::move(g));
    labels_.push_back(std::move(label));
  }

  std::size_t nvars() const { return nvars_; }
  std::size_t size() const { return inequalities_.size(); }
  bool empty() const { return inequalities_.empty(); }
  const Polynomial& operator[](std::size_t i) const { return inequalities_[i]; }
  const std::vector<Polynomial>& inequalities() const { return inequalities_; }
  const std::string& label(std::size_t i) const { return labels_[i]; }
  const std::vector<std::string>& labels() const { return labels_; }

  int max_degree() const {
    int d = 0;
    for (const auto& g : inequalities_) d = std::max(d, g.degree());
    return d;
  }

  /// Copy keeping only the listed inequalities, in the listed order.
  SemialgebraicSet subset(const std::vector<std::size_t>& keep) const {
    SemialgebraicSet s(nvars_);
    for (std::size_t i : keep) s.add(inequalities_.at(i), labels_.at(i));
    return s;
  }

  SemialgebraicSet without(std::size_t index) const {
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < size(); ++i) {
      if (i != index) keep.push_back(i);
    }
    return subset(keep);
  }

  bool contains(const Eigen::VectorXd& z, double tol = 0.0) const {
    for (const auto& g : inequalities_) {
      if (g.eval(z) < -tol) return false;
    }
    return true;
  }

 private:
  std::size_t nvars_ = 0;
  std::vector<Polynomial> inequalities_;
  std::vector<std::string> labels_;
};

/// Compiled SDP for  c - sum_i s_i g_i - rho = sigma0  with every s_i and
/// sigma0 written in Gram form b^T Q b. Blocks 0..n_c-1 hold the multiplier
/// Gram matrices, block n_c holds sigma0, and free variable 0 is rho when
/// the slack is requested.
struct SosProgram {
  Polynomial target;
  SemialgebraicSet set;
  int multiplier_degree = 0;
  bool with_slack = false;
  std::vector<Monomial> multiplier_basis;
  std::vector<Monomial> sigma0_basis;
  /// Monomial of each equality row, in row order.
  std::vector<Monomial> row_monomials;
  SdpProblem sdp;

  std::size_t num_multipliers() const { return set.size(); }
  int sigma0_block() const { return static_cast<int>(set.size()); }
  /// binom(n + d_s, n) * n_c + 1: decision-variable count of the slack program
  /// when each multiplier is counted by its coefficient vector.
  std::uint64_t reported_decision_variables() const {
    const int n = static_cast<int>(set.nvars());
    return binomial(n + multiplier_degree, n) * set.size() + 1;
  }
};

/// Half-degree of the sigma0 basis: ceil(max(d_s + d_g, deg c) / 2).
inline int sigma0_half_degree(int multiplier_degree, int constraint_degree, int target_degree) {
  const int top = std::max(multiplier_degree + constraint_degree, target_degree);
  return (top + 1) / 2;
}

inline SosProgram build(const Polynomial& target, const SemialgebraicSet& set, int multiplier_degree,
                        bool with_slack) {
  if (target.nvars() != set.nvars()) throw std::invalid_argument("sos::build: target and set variable counts differ");
  if (multiplier_degree < 0 || multiplier_degree % 2 != 0) {
    throw std::invalid_argument("sos::build: multiplier degree must be even and nonnegative");
  }
  const std::size_t n = set.nvars();
  if (n == 0) throw std::invalid_argument("sos::build: zero-variable sets are not supported");

  SosProgram prog;
  prog.target = target;
  prog.set = set;
  prog.multiplier_degree = multiplier_degree;
  prog.with_slack = with_slack;
  prog.multiplier_basis = monomial_basis(n, multiplier_degree / 2);
  const int half = sigma0_half_degree(multiplier_degree, set.empty() ? 0 : set.max_degree(), target.degree());
  prog.sigma0_basis = monomial_basis(n, half);
  prog.row_monomials = monomial_basis(n, 2 * half);

  std::map<Monomial, int, GrlexLess> row_of;
  for (std::size_t r = 0; r < prog.row_monomials.size(); ++r) row_of.emplace(prog.row_monomials[r], static_cast<int>(r));

  const std::size_t nrows = prog.row_monomials.size();
  std::vector<LinearFunctional> rows(nrows);
  SdpProblem& sdp = prog.sdp;
  const auto& mb = prog.multiplier_basis;
  const int mbn = static_cast<int>(mb.size());

  for (std::size_t i = 0; i < set.size(); ++i) {
    const int blk = sdp.add_block(mbn);
    for (int a = 0; a < mbn; ++a) {
      for (int b = 0; b <= a; ++b) {
        const Monomial ab = mb[static_cast<std::size_t>(a)] * mb[static_cast<std::size_t>(b)];
        for (const auto& [gm, gc] : set[i].terms()) {
          const int r = row_of.at(ab * gm);
          rows[static_cast<std::size_t>(r)].add(blk, a, b, gc);
        }
      }
    }
  }
  const auto& sb = prog.sigma0_basis;
  const int sbn = static_cast<int>(sb.size());
  const int s0 = sdp.add_block(sbn);
  for (int a = 0; a < sbn; ++a) {
    for (int b = 0; b <= a; ++b) {
      const int r = row_of.at(sb[static_cast<std::size_t>(a)] * sb[static_cast<std::size_t>(b)]);
      rows[static_cast<std::size_t>(r)].add(s0, a, b, 1.0);
    }
  }
  if (with_slack) {
    const int rho = sdp.add_free();
    rows[0].add_free(rho, 1.0);  // row 0 is the constant monomial
    sdp.objective.add_free(rho, 1.0);
  }
  for (const auto& [tm, tc] : target.terms()) {
    if (!row_of.count(tm)) throw std::logic_error("sos::build: target monomial outside the matching window");
  }
  for (std::size_t r = 0; r < nrows; ++r) sdp.add_constraint(std::move(rows[r]), target.coeff(prog.row_monomials[r]));
  return prog;
}

/// b^T Q b expanded over the given monomial basis.
inline Polynomial gram_to_polynomial(const std::vector<Monomial>& basis, const Eigen::MatrixXd& Q, std::size_t nvars) {
  Polynomial p(nvars);
  const auto n = static_cast<Eigen::Index>(basis.size());
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      const double q = a == b ? Q(a, a) : Q(a, b) + Q(b, a);
      p.add_term(basis[static_cast<std::size_t>(a)] * basis[static_cast<std::size_t>(b)], q);
    }
  }
  p.prune();
  return p;
}

struct SosDecomposition {
  std::vector<Polynomial> multipliers;
  std::vector<Eigen::MatrixXd> multiplier_grams;
  Polynomial sigma0;
  Eigen::MatrixXd sigma0_gram;
  double rho = 0.0;
  /// c - sum s_i g_i - rho - sigma0.
  Polynomial residual;
  double residual_max_coeff = 0.0;
};

/// Identity residual c - sum s_i g_i - rho - sigma0.
inline Polynomial identity_residual(const Polynomial& target, const SemialgebraicSet& set,
                                    const std::vector<Polynomial>& multipliers, const Polynomial& sigma0, double rho) {
  Polynomial r = target - sigma0 - Polynomial::constant(target.nvars(), rho);
  for (std::size_t i = 0; i < set.size(); ++i) r -= multipliers[i] * set[i];
  return r;
}

inline SosDecomposition reconstruct(const SosProgram& prog, const SdpSolution& solution) {
  if (solution.status != SdpStatus::Optimal) {
    throw std::logic_error(std::string("sos::reconstruct: solution status is ") + to_string(solution.status));
  }
  const std::size_t n = prog.set.nvars();
  SosDecomposition out;
  for (std::size_t i = 0; i < prog.num_multipliers(); ++i) {
    const Eigen::MatrixXd& Q = solution.block_values[i];
    out.multiplier_grams.push_back(Q);
    out.multipliers.push_back(gram_to_polynomial(prog.multiplier_basis, Q, n));
  }
  out.sigma0_gram = solution.block_values[static_cast<std::size_t>(prog.sigma0_block())];
  out.sigma0 = gram_to_polynomial(prog.sigma0_basis, out.sigma0_gram, n);
  out.rho = prog.with_slack ? solution.free_values(0) : 0.0;
  out.residual = identity_residual(prog.target, prog.set, out.multipliers, out.sigma0, out.rho);
  out.residual_max_coeff = out.residual.max_abs_coeff();
  return out;
}

}  // namespace sosred
