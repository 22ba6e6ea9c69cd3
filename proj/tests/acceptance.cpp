// Acceptance runner: one PASS/FAIL/SKIP/INFO line per criterion.
// Usage: acceptance [--known-fail N]...
// Exits 0 iff every FAIL is listed with --known-fail.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <sosred/sosred.hpp>

#include "test_support.hpp"

namespace sosred {
namespace {

Polynomial X(std::size_t n, std::size_t i) { return Polynomial::variable(n, i); }
Polynomial C(std::size_t n, double c) { return Polynomial::constant(n, c); }

std::string data(const std::string& name) { return std::string(SOSRED_DATA_DIR) + "/" + name; }

enum class Status { Pass, Fail, Skip, Info };

const char* to_string(Status s) {
  switch (s) {
    case Status::Pass: return "PASS";
    case Status::Fail: return "FAIL";
    case Status::Skip: return "SKIP";
    case Status::Info: return "INFO";
  }
  return "?";
}

struct Outcome {
  Status status = Status::Fail;
  std::string summary;
};

/// Diagnostic line printed under the criterion being run.
void note(const std::string& s) { std::cout << "    " << s << "\n" << std::flush; }

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

/// A Redundant verdict kept for the soundness sweep.
struct Collected {
  std::string source;
  Polynomial c;
  SemialgebraicSet set;
  CertOptions opt;
  RedundancyCertificate cert;
};

std::vector<Collected> g_collected;

void collect(const std::string& source, const Polynomial& c, const SemialgebraicSet& set, const CertOptions& opt,
             const Verdict& v) {
  if (v.redundant()) g_collected.push_back({source, c, set, opt, *v.certificate});
}

SemialgebraicSet subset(const SemialgebraicSet& set, const std::vector<std::size_t>& idx) {
  SemialgebraicSet out(set.nvars());
  for (std::size_t i : idx) out.add(set[i]);
  return out;
}

SemialgebraicSet prefix(const SemialgebraicSet& set, std::size_t n) {
  SemialgebraicSet out(set.nvars());
  for (std::size_t i = 0; i < n; ++i) out.add(set[i]);
  return out;
}

void collect_moas(const std::string& source, const MoasResult& r, const CertOptions& opt) {
  for (const auto& h : r.history) {
    if (!h.verdict.redundant()) continue;
    const RedundancyCertificate& cert = *h.verdict.certificate;
    // Rows are only appended, so the set a check ran against is a prefix.
    collect(source + " " + std::to_string(h.constraint) + "@k=" + std::to_string(h.k), cert.target,
            prefix(r.inequalities, cert.multiplier_grams.size()), opt, h.verdict);
  }
}

void collect_reduce(const std::string& source, const SemialgebraicSet& set, const ReduceReport& rep,
                    const CertOptions& opt) {
  for (const auto& e : rep.entries) {
    if (e.removed) collect(source + " " + e.label, set[e.index], subset(set, e.peers), opt, e.verdict);
  }
}

MpcSpec load_mpc(const std::string& name) { return mpc_spec_from_json(read_json_file(data(name))); }

MoasSpec mass_spring_spec() {
  const SystemFile sys = system_from_json(read_json_file(data("mass_spring_system.json")));
  const ProblemFile cons = parse_problem(data("mass_spring_constraints.json"));
  MoasSpec spec;
  spec.system = sys.system;
  spec.constraints = cons.inequalities.inequalities();
  spec.labels = cons.inequalities.labels();
  spec.epsilon = 0.01;
  spec.k_bar = 500;
  spec.cert.box = cons.box;
  return spec;
}

/// Box-bounded random polytope with an affine target.
struct LinearInstance {
  SemialgebraicSet set;
  Polynomial c;
};

LinearInstance random_linear_instance(std::mt19937_64& rng, std::size_t n) {
  LinearInstance out{test::random_polytope(rng, n, 3 + rng() % 4), Polynomial(n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.set.add(C(n, 2) - X(n, k));
    out.set.add(C(n, 2) + X(n, k));
  }
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> off(-1.0, 2.0);
  Eigen::VectorXd a(static_cast<Eigen::Index>(n));
  for (auto& v : a) v = g(rng);
  out.c = Polynomial::affine(a, off(rng));
  return out;
}

MoasSpec random_moas_spec(std::mt19937_64& rng) {
  MoasSpec spec;
  const Eigen::MatrixXd B = test::random_point(rng, 2).reshaped(2, 1);
  spec.system = LinearSystem(test::random_stable_2x2(rng), B);
  const SemialgebraicSet poly = test::random_polytope(rng, 3, 3);
  for (const auto& g : poly.inequalities()) spec.constraints.push_back(g);
  std::normal_distribution<double> g(0.0, 0.3);
  Polynomial q = C(3, 2);
  for (std::size_t i = 0; i < 3; ++i) q -= X(3, i) * X(3, i);
  q += g(rng) * X(3, 0) * X(3, 1) + g(rng) * X(3, 2);
  spec.constraints.push_back(q);
  spec.epsilon = 0.05;
  spec.k_bar = 200;
  spec.cert.box = Box::symmetric(3, 2.0);
  return spec;
}

/// Quadratic rows strictly positive at the origin plus the ball |z|^2 <= 4,
/// so the slack program has a finite, attained optimum.
SemialgebraicSet well_posed_quadratic_set(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  SemialgebraicSet set(n);
  for (;;) {
    set = test::random_quadratic_set(rng, n, m);
    bool inside = true;
    for (const auto& g : set.inequalities()) inside = inside && g.eval(origin) > 0.1;
    if (inside) break;
  }
  Polynomial ball = C(n, 4.0);
  for (std::size_t i = 0; i < n; ++i) ball -= X(n, i) * X(n, i);
  set.add(ball);
  return set;
}

bool same_rows(const MoasResult& a, const MoasResult& b) {
  if (a.k_star != b.k_star || a.inequalities.size() != b.inequalities.size()) return false;
  for (std::size_t i = 0; i < a.inequalities.size(); ++i) {
    if (!a.inequalities[i].approx_equal(b.inequalities[i], 0.0)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

Outcome criterion_toys() {
  SemialgebraicSet set(1);
  set.add(C(1, 1) - X(1, 0));
  const Polynomial c1 = C(1, 2) - X(1, 0), c2 = X(1, 0);
  CertOptions opt;
  opt.box = Box::symmetric(1, 2.0);
  const Verdict v1 = check_redundant(c1, set, opt);
  const Verdict v2 = check_redundant(c2, set, opt);
  collect("toy 2-z", c1, set, opt, v1);
  const bool ok1 = v1.redundant() && std::abs(v1.certificate->rho - 1.0) <= 1e-5 &&
                   verify_certificate(*v1.certificate, c1, set, opt);
  bool ok2 = v2.kind == VerdictKind::NonRedundant && v2.witness.has_value();
  if (ok2) {
    const Eigen::VectorXd& z = v2.witness->point;
    ok2 = set.contains(z, 0.0) && c2.eval(z) < 0.0;
    note("witness z = " + fmt(z(0)) + ", c(z) = " + fmt(c2.eval(z)));
  }
  note("2 - z: " + std::string(to_string(v1.kind)) + " rho = " + fmt(v1.rho, 10));
  return {ok1 && ok2 ? Status::Pass : Status::Fail,
          std::string("2-z ") + (ok1 ? "rho=1" : "bad") + ", z " + (ok2 ? "witness verified" : "bad")};
}

Outcome criterion_lp() {
  constexpr int kInstances = 200;
  std::mt19937_64 rng(20240601);
  int unknown_full = 0, unknown_sos = 0, mismatch_full = 0, mismatch_sos = 0, ties = 0;
  for (int t = 0; t < kInstances; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(t % 3);
    const LinearInstance inst = random_linear_instance(rng, n);
    const LpResult lp = vertex_min(inst.c, inst.set);
    if (lp.status != LpStatus::Optimal) {
      ++mismatch_full;
      note("instance " + std::to_string(t) + ": LP oracle status " + to_string(lp.status));
      continue;
    }
    CertOptions opt;
    opt.box = Box::symmetric(static_cast<Eigen::Index>(n), 3.0);
    opt.fixed_ds = 0;
    const Verdict full = check_redundant(inst.c, inst.set, opt);
    CertOptions sos_only = opt;
    sos_only.run_falsifier = false;
    const Verdict sos = check_redundant(inst.c, inst.set, sos_only);
    collect("lp#" + std::to_string(t), inst.c, inst.set, opt, full);
    collect("lp-sos#" + std::to_string(t), inst.c, inst.set, sos_only, sos);

    // A verdict agrees when a certificate comes with lp >= 0 or a genuine
    // witness with lp < 0. Values within 1e-6 of zero accept either verdict.
    const auto agrees = [&](const Verdict& v) {
      if (v.redundant()) return lp.value >= -1e-6 && v.certificate->rho <= lp.value + 1e-5;
      const bool witness_ok =
          v.witness && inst.set.contains(v.witness->point, 0.0) && inst.c.eval(v.witness->point) < 0.0;
      return witness_ok && lp.value <= 1e-6;
    };
    if (std::abs(lp.value) < 1e-6) ++ties;
    if (full.kind == VerdictKind::Unknown) {
      ++unknown_full;
    } else if (!agrees(full)) {
      ++mismatch_full;
      note("instance " + std::to_string(t) + ": full pipeline " + to_string(full.kind) + ", lp " + fmt(lp.value));
    }
    if (sos.kind == VerdictKind::Unknown) {
      ++unknown_sos;
    } else if (!agrees(sos)) {
      ++mismatch_sos;
      note("instance " + std::to_string(t) + ": sos-only " + to_string(sos.kind) + ", lp " + fmt(lp.value));
    }
  }
  const double rate_full = static_cast<double>(unknown_full) / kInstances;
  const double rate_sos = static_cast<double>(unknown_sos) / kInstances;
  note("ties |lp| < 1e-6: " + std::to_string(ties));
  const bool ok = mismatch_full == 0 && mismatch_sos == 0 && rate_full <= 0.05 && rate_sos <= 0.05;
  return {ok ? Status::Pass : Status::Fail,
          std::to_string(kInstances) + " instances, mismatches full/sos-only " + std::to_string(mismatch_full) + "/" +
              std::to_string(mismatch_sos) + ", Unknown rate " + fmt(100 * rate_full, 3) + "%/" +
              fmt(100 * rate_sos, 3) + "% (limit 5%)"};
}

Outcome criterion_double_integrator() {
  const MpcSpec spec = load_mpc("double_integrator_mpc.json");
  const Eigen::MatrixXd K = spec.terminal_gain();
  note("terminal law u = K x with K = [" + fmt(K(0, 0)) + ", " + fmt(K(0, 1)) + "] (LQR, Q = I, R = 1)");
  const HorizonSearch h = min_horizon_terminal_redundant(spec, spec.control_horizon, 12);
  for (const auto& s : h.steps) {
    note("N_p = " + std::to_string(s.prediction_horizon) + ": " + to_string(s.verdict.kind) +
         ", rho = " + fmt(s.verdict.rho));
  }
  if (!h.steps.empty()) {
    MpcSpec s = spec;
    s.prediction_horizon = h.steps.back().prediction_horizon;
    const MpcOmega full = build_omega(s, true);
    collect("di horizon", full.set[*full.terminal_row], build_omega(s, false).set, mpc_cert_options(s),
            h.steps.back().verdict);
  }
  MpcSpec at7 = spec;
  at7.prediction_horizon = 7;
  const MpcReduction red = reduce_mpc(at7);
  collect_reduce("di reduce", red.omega.set, red.report, mpc_cert_options(at7));
  const std::size_t nonterminal = red.omega.set.size() - (red.omega.terminal_row ? 1 : 0);
  const std::size_t removed = red.report.removed.size() - (red.terminal_removed() ? 1 : 0);
  note("reduce_mpc: " + std::to_string(red.report.removed.size()) + " of " + std::to_string(red.omega.set.size()) +
       " rows removed, Unknown " + std::to_string(red.report.count(VerdictKind::Unknown)) + ", " +
       fmt(red.report.seconds, 3) + " s");
  const bool ok = h.prediction_horizon == 7 && nonterminal == 46 && removed == 36 && red.terminal_removed();
  return {ok ? Status::Pass : Status::Fail,
          "N_p = " + (h.prediction_horizon ? std::to_string(*h.prediction_horizon) : std::string("none")) +
              " (expect 7), removed " + std::to_string(removed) + " of " + std::to_string(nonterminal) +
              " (expect 36 of 46), terminal " + (red.terminal_removed() ? "removed" : "kept")};
}

Outcome criterion_mass_spring(const MoasResult*& basic_out) {
  static MoasResult basic, improved;
  const MoasSpec spec = mass_spring_spec();
  improved = compute(spec, MoasAlgorithm::Improved);
  basic = compute(spec, MoasAlgorithm::Basic);
  basic_out = &basic;
  collect_moas("ms improved", improved, spec.cert);
  collect_moas("ms basic", basic, spec.cert);
  for (std::size_t i = 0; i < spec.constraints.size(); ++i) {
    const auto& on = improved.redundancy_onset[i];
    note(spec.label(i) + " redundant from k = " + (on ? std::to_string(*on) : std::string("never")));
  }
  note("improved " + fmt(improved.seconds, 3) + " s, basic " + fmt(basic.seconds, 3) + " s");
  const bool equal = same_rows(basic, improved);
  const int k = improved.k_star;
  const auto rows = static_cast<long>(improved.inequalities.size());
  const bool ok = equal && std::abs(k - 35) <= 2 && std::abs(rows - 87) <= 5;
  return {ok ? Status::Pass : Status::Fail, "k* = " + std::to_string(k) + " (expect 35 +- 2), rows = " +
                                                std::to_string(rows) + " (expect 87 +- 5), basic == improved " +
                                                (equal ? "yes" : "NO")};
}

Outcome criterion_ball_and_plate() {
  if (!std::getenv("SOSRED_NIGHTLY")) return {Status::Skip, "set SOSRED_NIGHTLY=1 to run (nightly tier)"};
  const MpcSpec spec = load_mpc("ball_and_plate_mpc.json");
  const Eigen::MatrixXd K = spec.terminal_gain();
  std::ostringstream ks;
  ks << K.format(Eigen::IOFormat(4, 0, ", ", "; ", "", "", "[", "]"));
  note("terminal law u = K x with K = " + ks.str());
  const MpcReduction red = reduce_mpc(spec);
  collect_reduce("bp reduce", red.omega.set, red.report, mpc_cert_options(spec));
  const auto removed = static_cast<long>(red.report.removed.size());
  note("Unknown " + std::to_string(red.report.count(VerdictKind::Unknown)) + ", terminal " +
       (red.terminal_removed() ? "removed" : "kept") + ", " + fmt(red.report.seconds, 4) + " s");
  return {std::abs(removed - 64) <= 6 ? Status::Pass : Status::Fail,
          std::to_string(removed) + " of " + std::to_string(red.omega.set.size()) + " removed (expect 64 +- 6)"};
}

/// Satellite relative-motion example rebuilt from the printed closed loop.
/// The printed A has five rows; the missing row and the gain come from a
/// least-squares fit against the zero-order-hold discretization.
Outcome criterion_satellite() {
  if (!std::getenv("SOSRED_NIGHTLY") && !std::getenv("SOSRED_SATELLITE")) {
    return {Status::Skip, "best effort only; set SOSRED_SATELLITE=1 to run"};
  }
  const double nu = 0.0011, Ts = 0.5;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(9, 9);
  M(0, 3) = M(1, 4) = M(2, 5) = 1.0;
  M(3, 0) = 3 * nu * nu;
  M(3, 4) = 2 * nu;
  M(4, 3) = -2 * nu;
  M(5, 2) = -nu * nu;
  M.block(3, 6, 3, 3).setIdentity();
  const Eigen::MatrixXd E = (M * Ts).exp();
  const Eigen::MatrixXd Ad = E.topLeftCorner(6, 6), Bd = E.block(0, 6, 6, 3);

  Eigen::MatrixXd Ap(5, 6), Bp(6, 3);
  Ap << 0.5698, 0, 0, 0.1721, 0, 0,  //
      0, 0.9121, 0, -0.002, 0.3517, 0,  //
      0, 0, 0.5698, 0, 0, 0.1721,  //
      0.0004, -0.3517, 0, -0.0005, 0.4069, 0,  //
      0, 0, -1.7207, 0, 0, -0.3117;
  Bp << 0.0363, 0.0001, 0,  //
      -0.0001, 0.1777, 0,  //
      0, 0, 0.0363,  //
      0.1453, 0.0005, 0,  //
      -0.0003, 0.7108, 0,  //
      0, 0, 0.1453;
  const std::vector<int> rows{0, 1, 2, 4, 5};
  Eigen::MatrixXd Bsub(5, 3), Dsub(5, 6);
  for (int r = 0; r < 5; ++r) {
    Bsub.row(r) = Bd.row(rows[static_cast<std::size_t>(r)]);
    Dsub.row(r) = Ad.row(rows[static_cast<std::size_t>(r)]) - Ap.row(r);
  }
  const Eigen::MatrixXd K = Bsub.colPivHouseholderQr().solve(Dsub);
  const Eigen::MatrixXd G = Bd.colPivHouseholderQr().solve(Bp);
  Eigen::MatrixXd A = Ad - Bd * K;
  const double fit_a = (Bsub * K - Dsub).cwiseAbs().maxCoeff();
  for (int r = 0; r < 5; ++r) A.row(rows[static_cast<std::size_t>(r)]) = Ap.row(r);
  std::ostringstream row3;
  row3 << A.row(3).format(Eigen::IOFormat(4, 0, ", ", "", "", "", "[", "]"));
  note("fit residuals: A rows " + fmt(fit_a, 3) + ", B " + fmt((Bd * G - Bp).cwiseAbs().maxCoeff(), 3) +
       "; reconstructed row 4 = " + row3.str() + ", spectral radius " + fmt(spectral_radius(A), 4));

  MoasSpec spec;
  spec.system = LinearSystem(A, Bp);
  const std::size_t n = 9;
  std::vector<Polynomial> z;
  for (std::size_t i = 0; i < n; ++i) z.push_back(X(n, i));
  const double t2 = std::pow(std::tan(15.0 * M_PI / 180.0), 2);
  spec.constraints.push_back(t2 * (z[1] + C(n, 0.01)) * (z[1] + C(n, 0.01)) - z[0] * z[0] - z[2] * z[2]);
  Polynomial thrust = C(n, 16.0);
  for (int j = 0; j < 3; ++j) {
    Polynomial u(n);
    for (int i = 0; i < 6; ++i) u -= K(j, i) * z[static_cast<std::size_t>(i)];
    for (int i = 0; i < 3; ++i) u += G(j, i) * z[static_cast<std::size_t>(6 + i)];
    thrust -= u * u;
  }
  spec.constraints.push_back(thrust);
  spec.constraints.push_back(z[1]);
  spec.labels = {"line-of-sight", "thrust", "x2>=0"};
  spec.epsilon = 0.01;
  spec.k_bar = 60;
  spec.cert.box = Box::symmetric(9, 1.0);
  spec.cert.ds_cap = 2;
  const MoasResult r = compute(spec, MoasAlgorithm::Improved);
  collect_moas("satellite", r, spec.cert);
  for (std::size_t i = 0; i < spec.constraints.size(); ++i) {
    const auto& on = r.redundancy_onset[i];
    note(spec.label(i) + " redundant from k = " + (on ? std::to_string(*on) : std::string("never")));
  }
  std::size_t unknown = 0;
  for (const auto& h : r.history) unknown += h.verdict.kind == VerdictKind::Unknown ? 1 : 0;
  return {Status::Info, "k* = " + (r.k_star >= 0 ? std::to_string(r.k_star) : std::string("not reached")) +
                            ", rows = " + std::to_string(r.inequalities.size()) + ", Unknown checks " +
                            std::to_string(unknown) + ", " + fmt(r.seconds, 4) + " s (reference: k* = 13, 31)"};
}

Outcome criterion_properties(const MoasResult* ms_basic) {
  std::vector<std::string> failures;
  const auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  std::mt19937_64 rng(8080);
  // Ring axioms and evaluation.
  int ring_bad = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(t % 4);
    const Polynomial p = test::random_polynomial(rng, n, 4, 6);
    const Polynomial q = test::random_polynomial(rng, n, 4, 6);
    const Polynomial r = test::random_polynomial(rng, n, 4, 6);
    bool ok = (p + q).approx_equal(q + p, 1e-12) && (p * q).approx_equal(q * p, 1e-12) &&
              ((p + q) + r).approx_equal(p + (q + r), 1e-12) && ((p * q) * r).approx_equal(p * (q * r), 1e-9) &&
              (p * (q + r)).approx_equal(p * q + p * r, 1e-10);
    const Eigen::VectorXd z = test::random_point(rng, static_cast<Eigen::Index>(n), 1.5);
    const double pz = p.eval(z), qz = q.eval(z);
    ok = ok && std::abs((p * q).eval(z) - pz * qz) <= 1e-9 * std::max(1.0, std::abs(pz * qz));
    ok = ok && std::abs((p + q).eval(z) - pz - qz) <= 1e-9 * std::max(1.0, std::abs(pz) + std::abs(qz));
    ring_bad += ok ? 0 : 1;
  }
  check(ring_bad == 0, "ring/eval " + std::to_string(ring_bad));

  // compose_affine agrees pointwise.
  int comp_bad = 0;
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(t % 4), m = 1 + static_cast<std::size_t>((t / 4) % 5);
    const Polynomial p = test::random_polynomial(rng, n, 4, 6);
    Eigen::MatrixXd Mm(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    Eigen::VectorXd b(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < Mm.size(); ++i) Mm(i) = g(rng);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = g(rng);
    const AffineMap T(Mm, b);
    const Polynomial q = compose_affine(p, T);
    for (int k = 0; k < 10; ++k) {
      const Eigen::VectorXd w = test::random_point(rng, static_cast<Eigen::Index>(m));
      const double expect = p.eval(T(w));
      if (std::abs(q.eval(w) - expect) > 1e-9 * std::max(1.0, std::abs(expect))) ++comp_bad;
    }
  }
  check(comp_bad == 0, "compose_affine " + std::to_string(comp_bad));

  // KKT residuals on every Optimal return.
  int kkt_bad = 0, optimal = 0;
  const SdpOptions sopt;
  const auto kkt_ok = [&](const SdpProblem& p, const SdpSolution& s) {
    const test::Kkt k = test::kkt(p, s);
    return k.primal <= 10 * sopt.tol_feas && k.dual <= 10 * sopt.tol_feas && k.gap <= 10 * sopt.tol_gap &&
           k.min_eig_x >= -sopt.tol_psd && k.min_eig_s >= -sopt.tol_psd;
  };
  for (int t = 0; t < 50; ++t) {
    const std::vector<int> sizes{1 + t % 4, 1 + (t / 2) % 3, 1};
    const SdpProblem p = test::random_sdp(rng, sizes, 2 + t % 6, t % 3);
    const SdpSolution s = solve(p, sopt);
    if (s.status != SdpStatus::Optimal) {
      ++kkt_bad;
      continue;
    }
    ++optimal;
    kkt_bad += kkt_ok(p, s) ? 0 : 1;
  }

  // SOS round trip and sizing formulas; the SOS solves feed the KKT count too.
  int sos_bad = 0, size_bad = 0;
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(t % 3);
    const SemialgebraicSet set = well_posed_quadratic_set(rng, n, 1 + static_cast<std::size_t>(t % 3));
    const Polynomial c = test::redundant_target(rng, set);
    const SosProgram prog = build(c, set, 0, t % 2 == 0);
    const SdpSolution s = solve(prog.sdp, sopt);
    if (s.status != SdpStatus::Optimal) {
      ++sos_bad;
      continue;
    }
    ++optimal;
    kkt_bad += kkt_ok(prog.sdp, s) ? 0 : 1;
    if (reconstruct(prog, s).residual_max_coeff > 1e-6 * std::max(1.0, c.max_abs_coeff())) ++sos_bad;
  }
  for (int t = 0; t < 60; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(t % 4);
    const int ds = 2 * (t % 3), ni = static_cast<int>(n);
    const SemialgebraicSet set = test::random_quadratic_set(rng, n, 1 + static_cast<std::size_t>(t % 4));
    const Polynomial c = test::random_polynomial(rng, n, 3, 4);
    const SosProgram prog = build(c, set, ds, true);
    bool ok = prog.reported_decision_variables() == binomial(ni + ds, ni) * set.size() + 1 &&
              prog.sdp.block_sizes.size() == set.size() + 1;
    for (std::size_t i = 0; ok && i < set.size(); ++i) {
      ok = static_cast<std::uint64_t>(prog.sdp.block_sizes[i]) == binomial(ni + ds / 2, ni);
    }
    const int half = (std::max(ds + set.max_degree(), c.degree()) + 1) / 2;
    ok = ok && static_cast<std::uint64_t>(prog.sdp.block_sizes.back()) == binomial(ni + half, ni);
    size_bad += ok ? 0 : 1;
  }
  check(kkt_bad == 0, "kkt " + std::to_string(kkt_bad) + "/" + std::to_string(optimal));
  check(sos_bad == 0, "sos round trip " + std::to_string(sos_bad));
  check(size_bad == 0, "sizing " + std::to_string(size_bad));

  // No constraint flips back to non-redundant in any Basic history; Basic == Improved.
  int prop1_bad = ms_basic && !check_prop1_consistency(*ms_basic) ? 1 : 0;
  int equal_bad = 0, not_fd = 0;
  std::mt19937_64 mrng(4242);
  for (int t = 0; t < 10; ++t) {
    const MoasSpec spec = random_moas_spec(mrng);
    const MoasResult basic = compute(spec, MoasAlgorithm::Basic);
    const MoasResult improved = compute(spec, MoasAlgorithm::Improved);
    collect_moas("random moas #" + std::to_string(t), improved, spec.cert);
    not_fd += basic.not_finitely_determined ? 1 : 0;
    prop1_bad += check_prop1_consistency(basic) ? 0 : 1;
    equal_bad += same_rows(basic, improved) ? 0 : 1;
    note("random system " + std::to_string(t) + ": k* = " + std::to_string(basic.k_star) + ", rows " +
         std::to_string(basic.inequalities.size()));
  }
  check(prop1_bad == 0, "prop1 " + std::to_string(prop1_bad));
  check(equal_bad == 0 && not_fd == 0,
        "basic != improved " + std::to_string(equal_bad) + ", not finitely determined " + std::to_string(not_fd));

  std::string summary = "ring/eval, compose_affine, KKT on " + std::to_string(optimal) +
                        " Optimal returns, sos round trip, sizing, Prop1, Basic == Improved x10";
  if (!failures.empty()) {
    summary = "failed:";
    for (const auto& f : failures) summary += " [" + f + "]";
  }
  return {failures.empty() ? Status::Pass : Status::Fail, summary};
}

/// Every collected certificate survives serialization and verifies from the
/// parsed copy alone; sampling finds no point of Omega with c < -1e-6.
Outcome criterion_soundness() {
  constexpr int kSamples = 100000;
  std::size_t verify_bad = 0, violations = 0, inside_total = 0;
  for (std::size_t idx = 0; idx < g_collected.size(); ++idx) {
    const Collected& e = g_collected[idx];
    const RedundancyCertificate back = certificate_from_json(parse_json_text(certificate_to_json(e.cert).dump()));
    if (!(back.target == e.c) || !verify_certificate(back, e.c, e.set, e.opt)) {
      ++verify_bad;
      note("verify failed: " + e.source);
    }
    const Box box = test::certificate_box(back);
    const CompiledSet inside(e.set);
    const CompiledPolynomial c(e.c);
    std::mt19937_64 rng(1000 + idx);
    std::size_t bad = 0;
    for (int s = 0; s < kSamples; ++s) {
      const Eigen::VectorXd z = test::uniform_in(rng, box);
      if (!inside.feasible(z, 0.0)) continue;
      ++inside_total;
      if (c.eval(z) < -1e-6) ++bad;
    }
    if (bad) note("sampling violation: " + e.source + " (" + std::to_string(bad) + " points)");
    violations += bad;
  }
  const bool ok = !g_collected.empty() && verify_bad == 0 && violations == 0;
  return {ok ? Status::Pass : Status::Fail,
          std::to_string(g_collected.size()) + " certificates, " + std::to_string(verify_bad) +
              " failed re-verification, " + std::to_string(violations) + " violations among " +
              std::to_string(inside_total) + " sampled points of Omega"};
}

}  // namespace
}  // namespace sosred

int main(int argc, char** argv) {
  using namespace sosred;
  std::set<int> known_fail;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--known-fail" && i + 1 < argc) {
      known_fail.insert(std::atoi(argv[++i]));
    } else {
      std::cerr << "usage: acceptance [--known-fail N]...\n";
      return 2;
    }
  }

  const MoasResult* ms_basic = nullptr;
  struct Criterion {
    int id;
    std::string name;
    std::function<Outcome()> run;
  };
  // Soundness runs last so it sees the certificates of every other criterion.
  const std::vector<Criterion> criteria{
      {1, "toy certificates", criterion_toys},
      {2, "LP-oracle equivalence", criterion_lp},
      {4, "double-integrator terminal elimination", criterion_double_integrator},
      {5, "mass-spring MOAS", [&] { return criterion_mass_spring(ms_basic); }},
      {6, "ball-and-plate reduction", criterion_ball_and_plate},
      {7, "satellite MOAS", criterion_satellite},
      {8, "property suites", [&] { return criterion_properties(ms_basic); }},
      {3, "certificate soundness sweep", criterion_soundness},
  };

  int unexpected = 0;
  for (const auto& c : criteria) {
    std::cout << "criterion " << c.id << " (" << c.name << ")\n" << std::flush;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool known = known_fail.count(c.id) > 0;
    std::cout << to_string(o.status) << " " << c.id << " " << c.name << ": " << o.summary << " [" << fmt(secs, 3)
              << " s]";
    if (o.status == Status::Fail && known) std::cout << " (known failure)";
    if (o.status == Status::Pass && known) std::cout << " (listed as known failure but passed)";
    std::cout << "\n" << std::flush;
    if (o.status == Status::Fail && !known) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
