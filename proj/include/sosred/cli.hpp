#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cert.hpp"
#include "io.hpp"
#include "linsys.hpp"
#include "moas.hpp"
#include "mpc.hpp"
#include "oracle.hpp"
#include "sos.hpp"

namespace sosred::cli {

enum ExitCode : int { kOk = 0, kNegative = 1, kUnknown = 2, kUsage = 3 };

inline int exit_code(VerdictKind k) {
  switch (k) {
    case VerdictKind::Redundant: return kOk;
    case VerdictKind::NonRedundant: return kNegative;
    case VerdictKind::Unknown: return kUnknown;
  }
  return kUnknown;
}

struct CommonFlags {
  std::string out;
  std::string csv;
  std::size_t csv_samples = 20000;
  bool oracle = false;
  int parallel = 1;
  std::optional<int> ds;
  int ds_cap = 6;
  double rho_min = 1e-7;
  double tol_identity = 1e-6;
  double tol_psd = 1e-9;
  std::uint64_t seed = 0x5eed5eed;
  bool no_falsifier = false;

  void attach(CLI::App* app, bool with_parallel) {
    app->add_option("--out", out, "Write the JSON report to this file (stdout if absent)");
    app->add_option("--csv", csv, "Export a sampled point cloud of the resulting set");
    app->add_option("--csv-samples", csv_samples, "Uniform samples drawn for --csv")->check(CLI::PositiveNumber);
    app->add_flag("--oracle", oracle, "Add independent oracle cross-checks to the report");
    if (with_parallel) app->add_option("--parallel", parallel, "Worker threads (relaxed order when > 1)")->check(CLI::PositiveNumber);
    app->add_option("--ds", ds, "Fixed multiplier degree (even)");
    app->add_option("--ds-cap", ds_cap, "Largest multiplier degree tried");
    app->add_option("--rho-min", rho_min, "Smallest accepted slack");
    app->add_option("--tol-identity", tol_identity, "Identity residual tolerance (relative)");
    app->add_option("--tol-psd", tol_psd, "Gram eigenvalue tolerance");
    app->add_option("--seed", seed, "Falsifier seed");
    app->add_flag("--no-falsifier", no_falsifier, "Skip sampling before the SOS program");
  }

  void apply(CertOptions& o) const {
    if (ds && (*ds < 0 || *ds % 2 != 0)) throw std::invalid_argument("--ds must be a nonnegative even integer");
    o.fixed_ds = ds;
    o.ds_cap = ds_cap;
    o.rho_min = rho_min;
    o.tol_identity = tol_identity;
    o.tol_psd = tol_psd;
    o.seed = seed;
    o.run_falsifier = !no_falsifier;
  }
};

inline void emit(const json& j, const std::string& out, std::ostream& os) {
  if (out.empty()) {
    os << j.dump(2) << "\n";
  } else {
    write_json_file(out, j);
  }
}

inline void export_csv(const std::string& path, const SemialgebraicSet& set, const Box& box,
                       const std::vector<std::string>& names, std::size_t samples) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot write file");
  write_point_cloud(f, set, box, names, samples);
}

inline std::vector<std::string> default_names(std::size_t n, const char* prefix) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(prefix + std::to_string(i));
  return v;
}

/// Independent bounds on min c over the set: LP for affine data, a grid for
/// up to three variables, plus a local refinement from the grid point.
inline json oracle_for(const Polynomial& c, const SemialgebraicSet& set, const Box& box, const Verdict& v) {
  json j = json::object();
  const bool affine = c.degree() <= 1 && std::all_of(set.inequalities().begin(), set.inequalities().end(),
                                                     [](const Polynomial& g) { return g.degree() <= 1; });
  if (affine) {
    const LpResult lp = lp_min(c, set);
    j["lp"] = {{"status", to_string(lp.status)}, {"min", nan_to_null(lp.value)}};
    if (lp.status == LpStatus::Optimal && v.kind != VerdictKind::Unknown) {
      j["lp_agrees"] = (lp.value >= -1e-6) == v.redundant();
    }
  }
  if (c.nvars() <= 3) {
    const int res = c.nvars() == 1 ? 10001 : c.nvars() == 2 ? 401 : 81;
    const GridMinResult g = grid_min(c, set, box, res);
    json jg{{"resolution", res}, {"min", nan_to_null(g.value)}, {"feasible_points", g.feasible_points}};
    if (g.feasible_points > 0) {
      const RefineResult r = refine_local(c, set, box, g.argmin, 500);
      jg["refined_min"] = r.value;
      if (v.redundant()) jg["rho_below_grid"] = v.rho <= g.value + 1e-5;
    }
    j["grid"] = jg;
  }
  return j;
}

struct Target {
  Polynomial c;
  SemialgebraicSet set;
  std::vector<std::size_t> peers;
  std::optional<std::size_t> index;
};

inline Target select_target(const ProblemFile& p, std::optional<std::size_t> index) {
  Target t;
  if (index) {
    if (*index >= p.inequalities.size()) {
      throw std::invalid_argument("--index " + std::to_string(*index) + " out of range (" +
                                  std::to_string(p.inequalities.size()) + " inequalities)");
    }
    t.index = index;
    t.c = p.inequalities[*index];
    for (std::size_t i = 0; i < p.inequalities.size(); ++i) {
      if (i != *index) t.peers.push_back(i);
    }
  } else {
    if (!p.candidate) throw std::invalid_argument("problem has no \"candidate\"; pass --index");
    t.c = *p.candidate;
    for (std::size_t i = 0; i < p.inequalities.size(); ++i) t.peers.push_back(i);
  }
  t.set = p.inequalities.subset(t.peers);
  return t;
}

inline void dump_sdp(const std::string& path, const Target& t, const CertOptions& opt, int degree) {
  const Box box = default_box(t.set.nvars(), opt);
  const detail::ScaledProblem sp = detail::scale_problem(t.c, t.set, box);
  const SosProgram prog = build(sp.c_hat, sp.g_hat, degree, true);
  std::ofstream f(path);
  if (!f) throw std::runtime_error(path + ": cannot write file");
  write_triplets(f, prog.sdp);
}

inline int cmd_certify(const std::string& problem_path, std::optional<std::size_t> index, const CommonFlags& flags,
                       const std::string& dump_path, std::ostream& os, std::ostream& es) {
  const ProblemFile p = parse_problem(problem_path);
  const Target t = select_target(p, index);
  CertOptions opt;
  opt.box = p.box;
  flags.apply(opt);
  Verdict v = check_redundant(t.c, t.set, opt);
  if (v.certificate) {
    v.certificate->constraint_index = t.index;
    v.certificate->peer_indices = t.peers;
  }
  if (!dump_path.empty()) {
    dump_sdp(dump_path, t, opt, v.degree >= 0 ? v.degree : initial_multiplier_degree(t.c, t.set));
  }
  json j = report_header("certify");
  j["problem"] = problem_path;
  if (t.index) j["target_index"] = *t.index;
  j["target_label"] = t.index ? p.inequalities.label(*t.index) : std::string("candidate");
  j["peer_indices"] = t.peers;
  j["options"] = options_to_json(opt);
  j["result"] = verdict_to_json(v, true);
  if (flags.oracle) j["oracle"] = oracle_for(t.c, t.set, default_box(t.set.nvars(), opt), v);
  emit(j, flags.out, os);
  if (!flags.csv.empty()) export_csv(flags.csv, p.inequalities, default_box(p.nvars(), opt), p.variables, flags.csv_samples);
  es << "certify: " << to_string(v.kind);
  if (std::isfinite(v.rho)) es << " rho=" << v.rho;
  if (v.degree >= 0) es << " d_s=" << v.degree;
  es << " (" << v.seconds << " s)\n";
  return exit_code(v.kind);
}

inline int cmd_reduce(const std::string& problem_path, const CommonFlags& flags, std::ostream& os, std::ostream& es) {
  const ProblemFile p = parse_problem(problem_path);
  ReduceOptions ro;
  ro.cert.box = p.box;
  flags.apply(ro.cert);
  ro.threads = flags.parallel;
  const ReduceReport rep = reduce_set(p.inequalities, ro);
  json j = report_header("reduce");
  j["problem"] = problem_path;
  j["report"] = reduce_report_to_json(rep, ro.cert);
  const Box box = default_box(p.nvars(), ro.cert);
  if (flags.oracle) {
    // Membership agreement between the original and the reduced set.
    const CompiledSet full(p.inequalities), red(rep.reduced);
    std::mt19937_64 rng(flags.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t disagreements = 0, inside = 0;
    const std::size_t n = 100000;
    Eigen::VectorXd z(box.dims());
    for (std::size_t s = 0; s < n; ++s) {
      for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = box.lower(k) + (box.upper(k) - box.lower(k)) * unit(rng);
      const bool a = full.min_value(z) >= 0.0;
      const double mr = red.min_value(z);
      inside += a ? 1 : 0;
      if (a != (mr >= 0.0) && std::abs(mr) > 1e-6) ++disagreements;
    }
    j["oracle"] = {{"samples", n}, {"inside", inside}, {"membership_disagreements", disagreements}};
  }
  emit(j, flags.out, os);
  if (!flags.csv.empty()) export_csv(flags.csv, rep.reduced, box, p.variables, flags.csv_samples);
  es << "reduce: removed " << rep.removed.size() << " of " << p.inequalities.size() << ", unknown "
     << rep.count(VerdictKind::Unknown) << (rep.relaxed_order ? " (relaxed order)" : "") << " (" << rep.seconds
     << " s)\n";
  return kOk;
}

inline int cmd_verify(const std::string& problem_path, const std::string& cert_path, const CommonFlags& flags,
                      std::ostream& os, std::ostream& es) {
  const ProblemFile p = parse_problem(problem_path);
  RedundancyCertificate cert;
  {
    json cj = read_json_file(cert_path);
    // A certify report embeds the certificate under /result/certificate.
    if (cj.is_object() && cj.contains("result") && cj["result"].is_object() && cj["result"].contains("certificate")) {
      cj = cj["result"]["certificate"];
    }
    try {
      cert = certificate_from_json(cj);
    } catch (const FormatError& e) {
      throw FormatError(cert_path + ": " + e.what());
    }
  }
  json j = report_header("verify");
  j["problem"] = problem_path;
  j["certificate"] = cert_path;
  bool ok = false;
  std::string failure;
  try {
    if (cert.nvars() != p.nvars()) throw std::invalid_argument("certificate has a different variable count");
    Target t;
    if (cert.constraint_index) {
      if (*cert.constraint_index >= p.inequalities.size()) throw std::invalid_argument("target_index out of range");
      t.c = p.inequalities[*cert.constraint_index];
    } else {
      if (!p.candidate) throw std::invalid_argument("certificate has no target_index and the problem no candidate");
      t.c = *p.candidate;
    }
    for (std::size_t i : cert.peer_indices) {
      if (i >= p.inequalities.size()) throw std::invalid_argument("peer index " + std::to_string(i) + " out of range");
      if (cert.constraint_index && i == *cert.constraint_index) throw std::invalid_argument("target listed as its own peer");
    }
    t.set = p.inequalities.subset(cert.peer_indices);
    if (!(cert.target == t.c)) throw std::invalid_argument("certificate target differs from the problem's polynomial");
    const CertificateCheck chk = check_certificate(cert, t.c, t.set, flags.rho_min, flags.tol_identity, flags.tol_psd);
    ok = chk.ok;
    failure = chk.failure;
    j["residual_coeff_norm"] = chk.residual_coeff_norm;
    j["residual_tolerance"] = chk.residual_tolerance;
    j["min_gram_eigenvalue"] = chk.min_gram_eigenvalue;
  } catch (const std::invalid_argument& e) {
    failure = e.what();
  }
  j["tolerances"] = {{"rho_min", flags.rho_min}, {"tol_identity", flags.tol_identity}, {"tol_psd", flags.tol_psd}};
  j["ok"] = ok;
  if (!ok) j["failure"] = failure;
  emit(j, flags.out, os);
  es << "verify: " << (ok ? "ok" : "FAILED: " + failure) << "\n";
  return ok ? kOk : kNegative;
}

inline int cmd_moas(const std::string& system_path, const std::string& constraints_path, double epsilon, int kmax,
                    const std::string& algorithm, const CommonFlags& flags, std::ostream& os, std::ostream& es) {
  const json sj = read_json_file(system_path);
  SystemFile sys;
  try {
    sys = system_from_json(sj);
  } catch (const FormatError& e) {
    throw FormatError(system_path + ": " + e.what());
  }
  const ProblemFile cons = parse_problem(constraints_path);
  MoasSpec spec;
  spec.system = sys.system;
  spec.constraints = cons.inequalities.inequalities();
  spec.labels = cons.inequalities.labels();
  spec.epsilon = epsilon;
  spec.k_bar = kmax;
  spec.cert.box = cons.box;
  flags.apply(spec.cert);
  MoasAlgorithm algo;
  if (algorithm == "basic") {
    algo = MoasAlgorithm::Basic;
  } else if (algorithm == "improved") {
    algo = MoasAlgorithm::Improved;
  } else {
    throw std::invalid_argument("--algorithm must be basic or improved");
  }
  if (cons.nvars() != spec.nvars()) {
    throw std::invalid_argument(constraints_path + ": constraints need " + std::to_string(spec.nvars()) +
                                " variables (states then references), file declares " + std::to_string(cons.nvars()));
  }
  const MoasResult r = compute(spec, algo, flags.parallel);
  json j = report_header("moas");
  j["system"] = system_path;
  j["constraints"] = constraints_path;
  j["result"] = moas_result_to_json(r, spec);
  if (flags.oracle) {
    json o{{"prop1_consistent", check_prop1_consistency(r)}};
    // Forward simulation of sampled members of the computed set.
    const Box box = default_box(spec.nvars(), spec.cert);
    const CompiledSet inside(r.inequalities);
    std::vector<CompiledPolynomial> cs;
    for (const auto& c : spec.constraints) cs.emplace_back(c);
    std::mt19937_64 rng(flags.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Eigen::Index nx = spec.system.nx(), nv = spec.system.nu();
    const int horizon = (r.k_star >= 0 ? r.k_star : spec.k_bar) + 100;
    std::size_t members = 0, violators = 0;
    Eigen::VectorXd z(box.dims());
    for (std::size_t s = 0; s < 20000; ++s) {
      for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = box.lower(k) + (box.upper(k) - box.lower(k)) * unit(rng);
      if (inside.min_value(z) < 0.0) continue;
      ++members;
      const Eigen::VectorXd v = z.tail(nv);
      const Trajectory tr = simulate(spec.system, z.head(nx), constant_input(v), horizon);
      bool bad = false;
      Eigen::VectorXd xv(nx + nv);
      for (const auto& x : tr.states) {
        xv << x, v;
        for (const auto& c : cs) bad = bad || c.eval(xv) < -1e-9;
      }
      violators += bad ? 1 : 0;
    }
    o["simulation"] = {{"members", members}, {"violators", violators}, {"steps", horizon}};
    j["oracle"] = o;
  }
  emit(j, flags.out, os);
  if (!flags.csv.empty()) {
    export_csv(flags.csv, r.inequalities, default_box(spec.nvars(), spec.cert), cons.variables, flags.csv_samples);
  }
  es << "moas(" << to_string(algo) << "): ";
  if (r.k_star >= 0) {
    es << "k*=" << r.k_star;
  } else {
    es << "k_bar reached";
  }
  es << " rows=" << r.inequalities.size() << (r.relaxed ? " (relaxed)" : "") << " (" << r.seconds << " s)\n";
  return r.k_star >= 0 ? kOk : kUnknown;
}

inline MpcSpec load_mpc(const std::string& path) {
  const json j = read_json_file(path);
  try {
    return mpc_spec_from_json(j);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline int cmd_mpc_reduce(const std::string& spec_path, const CommonFlags& flags, std::ostream& os, std::ostream& es) {
  MpcSpec spec = load_mpc(spec_path);
  flags.apply(spec.cert);
  const MpcReduction m = reduce_mpc(spec, flags.parallel);
  json j = report_header("mpc-reduce");
  j["spec"] = spec_path;
  j["report"] = mpc_reduction_to_json(m, mpc_cert_options(spec));
  j["rows"] = m.omega.set.size();
  emit(j, flags.out, os);
  if (!flags.csv.empty()) {
    const CertOptions o = mpc_cert_options(spec);
    std::vector<std::string> names = default_names(static_cast<std::size_t>(spec.system.nx()), "x");
    for (int k = 0; k < spec.control_horizon; ++k) {
      for (Eigen::Index i = 0; i < spec.system.nu(); ++i) names.push_back("u" + std::to_string(i) + "_" + std::to_string(k));
    }
    export_csv(flags.csv, m.report.reduced, default_box(spec.num_decision_variables(), o), names, flags.csv_samples);
  }
  es << "mpc-reduce: removed " << m.report.removed.size() << " of " << m.omega.set.size()
     << ", terminal " << (m.terminal_removed() ? "removed" : "kept") << ", unknown "
     << m.report.count(VerdictKind::Unknown) << " (" << m.report.seconds << " s)\n";
  return kOk;
}

inline int cmd_mpc_horizon(const std::string& spec_path, int np_min, int np_max, const CommonFlags& flags,
                           std::ostream& os, std::ostream& es) {
  MpcSpec spec = load_mpc(spec_path);
  flags.apply(spec.cert);
  if (np_max < np_min) throw std::invalid_argument("--np-max must be >= --np-min");
  const HorizonSearch h = min_horizon_terminal_redundant(spec, np_min, np_max);
  json j = report_header("mpc-horizon");
  j["spec"] = spec_path;
  j["np_min"] = np_min;
  j["np_max"] = np_max;
  j["options"] = options_to_json(mpc_cert_options(spec));
  j["result"] = horizon_to_json(h, spec.control_horizon < np_max ? spec.terminal_gain() : Eigen::MatrixXd());
  emit(j, flags.out, os);
  if (h.prediction_horizon) {
    es << "mpc-horizon: N_p=" << *h.prediction_horizon << "\n";
    return kOk;
  }
  const bool unknown = std::any_of(h.steps.begin(), h.steps.end(),
                                   [](const HorizonStep& s) { return s.verdict.kind == VerdictKind::Unknown; });
  es << "mpc-horizon: no N_p in [" << np_min << ", " << np_max << "]" << (unknown ? " (some Unknown)" : "") << "\n";
  return unknown ? kUnknown : kNegative;
}

/// Entry point. Exit codes: 0 success / redundant, 1 non-redundant or failed
/// verification, 2 unknown, 3 usage or malformed input.
inline int run(int argc, const char* const* argv, std::ostream& os = std::cout, std::ostream& es = std::cerr) {
  CLI::App app{"Redundant constraint elimination with SOS certificates", "sosred"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  CommonFlags flags;
  std::string problem, cert_path, dump_path, system_path, constraints_path, spec_path, algorithm = "improved";
  std::optional<std::size_t> index;
  double epsilon = 0.01;
  int kmax = 500, np_min = 1, np_max = 20;

  auto* certify = app.add_subcommand("certify", "Check one constraint (or the candidate) for redundancy");
  certify->add_option("problem", problem, "Problem file")->required();
  certify->add_option("--index", index, "Inequality to test against the others (default: candidate)");
  certify->add_option("--dump-sdp", dump_path, "Write the SDP as sparse triplets");
  flags.attach(certify, false);

  auto* reduce = app.add_subcommand("reduce", "Remove redundant inequalities");
  reduce->add_option("problem", problem, "Problem file")->required();
  flags.attach(reduce, true);

  auto* verify = app.add_subcommand("verify", "Re-check a certificate against a problem file");
  verify->add_option("problem", problem, "Problem file")->required();
  verify->add_option("certificate", cert_path, "Certificate file")->required();
  verify->add_option("--out", flags.out, "Write the JSON report to this file");
  verify->add_option("--rho-min", flags.rho_min, "Smallest accepted slack");
  verify->add_option("--tol-identity", flags.tol_identity, "Identity residual tolerance (relative)");
  verify->add_option("--tol-psd", flags.tol_psd, "Gram eigenvalue tolerance");

  auto* moas = app.add_subcommand("moas", "Tightened maximal output admissible set");
  moas->add_option("--system", system_path, "System file")->required();
  moas->add_option("--constraints", constraints_path, "Constraints over (x, v) as a problem file")->required();
  moas->add_option("--epsilon", epsilon, "Steady-state tightening");
  moas->add_option("--kmax", kmax, "Largest prediction step");
  moas->add_option("--algorithm", algorithm, "basic or improved");
  flags.attach(moas, true);

  auto* mpc_reduce = app.add_subcommand("mpc-reduce", "Reduce the lifted MPC constraint set");
  mpc_reduce->add_option("--spec", spec_path, "MPC spec file")->required();
  flags.attach(mpc_reduce, true);

  auto* mpc_horizon = app.add_subcommand("mpc-horizon", "Smallest N_p making the terminal constraint redundant");
  mpc_horizon->add_option("--spec", spec_path, "MPC spec file")->required();
  mpc_horizon->add_option("--np-min", np_min, "First prediction horizon tried")->required();
  mpc_horizon->add_option("--np-max", np_max, "Last prediction horizon tried")->required();
  flags.attach(mpc_horizon, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, os, es);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*certify) return cmd_certify(problem, index, flags, dump_path, os, es);
    if (*reduce) return cmd_reduce(problem, flags, os, es);
    if (*verify) return cmd_verify(problem, cert_path, flags, os, es);
    if (*moas) return cmd_moas(system_path, constraints_path, epsilon, kmax, algorithm, flags, os, es);
    if (*mpc_reduce) return cmd_mpc_reduce(spec_path, flags, os, es);
    if (*mpc_horizon) return cmd_mpc_horizon(spec_path, np_min, np_max, flags, os, es);
  } catch (const FormatError& e) {
    es << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    es << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    es << "error: " << e.what() << "\n";
    return kUnknown;
  }
  return kUsage;
}

}  // namespace sosred::cli
