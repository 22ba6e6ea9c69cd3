#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cert.hpp"
#include "linsys.hpp"
#include "moas.hpp"
#include "mpc.hpp"
#include "oracle.hpp"
#include "poly.hpp"
#include "sos.hpp"

#ifndef SOSRED_VERSION
#define SOSRED_VERSION "0.1.0"
#endif

namespace sosred {

using json = nlohmann::json;

inline const char* version() { return SOSRED_VERSION; }

/// Malformed input. The message carries either line:column (syntax) or a
/// JSON field path (schema).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io_detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
  throw FormatError((path.empty() ? std::string("/") : path) + ": " + msg);
}

inline const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) fail(path, std::string("missing field \"") + key + "\"");
  return *it;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "expected a finite number");
  return v;
}

inline int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

inline std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

inline Eigen::VectorXd vector(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], path + "/" + std::to_string(i));
  return v;
}

inline Eigen::MatrixXd matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string p = path + "/" + std::to_string(r);
    if (!j[r].is_array()) fail(p, "expected a row array");
    if (r == 0) cols = j[r].size();
    if (j[r].size() != cols) fail(p, "row has " + std::to_string(j[r].size()) + " entries, expected " + std::to_string(cols));
  }
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          number(j[r][c], path + "/" + std::to_string(r) + "/" + std::to_string(c));
    }
  }
  return M;
}

inline json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json to_json(const Eigen::MatrixXd& M) {
  json a = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    a.push_back(std::move(row));
  }
  return a;
}

inline json lower_triangle(const Eigen::MatrixXd& M) {
  json a = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c <= r; ++c) row.push_back(M(r, c));
    a.push_back(std::move(row));
  }
  return a;
}

inline Eigen::MatrixXd from_lower_triangle(const json& j, Eigen::Index n, const std::string& path) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(n)) {
    fail(path, "expected " + std::to_string(n) + " lower-triangular rows");
  }
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::string p = path + "/" + std::to_string(r);
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(r + 1)) {
      fail(p, "expected " + std::to_string(r + 1) + " entries");
    }
    for (Eigen::Index c = 0; c <= r; ++c) {
      M(r, c) = M(c, r) = number(row[static_cast<std::size_t>(c)], p + "/" + std::to_string(c));
    }
  }
  return M;
}

inline Monomial monomial(const json& j, std::size_t nvars, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an exponent array");
  if (j.size() != nvars) {
    fail(path, "exponent arity " + std::to_string(j.size()) + " does not match " + std::to_string(nvars) + " variables");
  }
  std::vector<int> e(nvars);
  for (std::size_t i = 0; i < nvars; ++i) {
    e[i] = integer(j[i], path + "/" + std::to_string(i));
    if (e[i] < 0) fail(path + "/" + std::to_string(i), "negative exponent");
  }
  return Monomial(std::move(e));
}

inline json monomial_json(const Monomial& m) { return json(m.exponents()); }

inline std::string line_col(const std::string& content, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < content.size(); ++i) {
    if (content[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

}  // namespace io_detail

/// Parses JSON text, reporting syntax errors as source:line:col.
inline json parse_json_text(const std::string& content, const std::string& source = "<input>") {
  try {
    return json::parse(content);
  } catch (const json::parse_error& e) {
    const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    std::string what = e.what();
    const auto pos = what.find("syntax error");
    throw FormatError(source + ":" + io_detail::line_col(content, at) + ": " +
                      (pos != std::string::npos ? what.substr(pos) : what));
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path + ": cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot write file");
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------- polynomials

/// {"terms": [{"coeff": c, "exps": [e_1, ..., e_n]}, ...]}; duplicates are summed.
inline Polynomial polynomial_from_json(const json& j, std::size_t nvars, const std::string& path = "") {
  const json& terms = io_detail::field(j, "terms", path);
  if (!terms.is_array()) io_detail::fail(path + "/terms", "expected an array");
  Polynomial p(nvars);
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const std::string tp = path + "/terms/" + std::to_string(t);
    const double c = io_detail::number(io_detail::field(terms[t], "coeff", tp), tp + "/coeff");
    const Monomial m = io_detail::monomial(io_detail::field(terms[t], "exps", tp), nvars, tp + "/exps");
    p.add_term(m, c);
  }
  p.prune();
  return p;
}

inline json polynomial_to_json(const Polynomial& p) {
  json terms = json::array();
  for (const auto& [m, c] : p.terms()) terms.push_back({{"coeff", c}, {"exps", io_detail::monomial_json(m)}});
  return json{{"terms", terms}};
}

/// Standalone form with an explicit variable count.
inline json standalone_polynomial_to_json(const Polynomial& p) {
  json j = polynomial_to_json(p);
  j["nvars"] = p.nvars();
  return j;
}

inline Polynomial standalone_polynomial_from_json(const json& j, const std::string& path = "") {
  const int n = io_detail::integer(io_detail::field(j, "nvars", path), path + "/nvars");
  if (n < 1) io_detail::fail(path + "/nvars", "must be >= 1");
  return polynomial_from_json(j, static_cast<std::size_t>(n), path);
}

// ------------------------------------------------------------------ boxes

inline Box box_from_json(const json& j, std::size_t nvars, const std::string& path) {
  const Eigen::VectorXd lo = io_detail::vector(io_detail::field(j, "lower", path), path + "/lower");
  const Eigen::VectorXd hi = io_detail::vector(io_detail::field(j, "upper", path), path + "/upper");
  if (static_cast<std::size_t>(lo.size()) != nvars) io_detail::fail(path + "/lower", "expected " + std::to_string(nvars) + " bounds");
  if (static_cast<std::size_t>(hi.size()) != nvars) io_detail::fail(path + "/upper", "expected " + std::to_string(nvars) + " bounds");
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!(lo(i) <= hi(i))) io_detail::fail(path, "lower bound exceeds upper bound at index " + std::to_string(i));
  }
  return Box(lo, hi);
}

inline json box_to_json(const Box& b) {
  return json{{"lower", io_detail::to_json(b.lower)}, {"upper", io_detail::to_json(b.upper)}};
}

// ---------------------------------------------------------------- problems

struct ProblemFile {
  std::vector<std::string> variables;
  SemialgebraicSet inequalities;
  std::optional<Polynomial> candidate;
  std::optional<Box> box;

  std::size_t nvars() const { return variables.size(); }

  bool operator==(const ProblemFile& o) const {
    if (variables != o.variables || inequalities.size() != o.inequalities.size()) return false;
    for (std::size_t i = 0; i < inequalities.size(); ++i) {
      if (!(inequalities[i] == o.inequalities[i]) || inequalities.label(i) != o.inequalities.label(i)) return false;
    }
    if (candidate.has_value() != o.candidate.has_value() || (candidate && !(*candidate == *o.candidate))) return false;
    if (box.has_value() != o.box.has_value()) return false;
    return !box || (box->lower == o.box->lower && box->upper == o.box->upper);
  }
};

inline std::vector<std::string> variables_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) io_detail::fail(path, "expected a non-empty array of names");
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "/" + std::to_string(i);
    std::string name = io_detail::text(j[i], p);
    if (name.empty()) io_detail::fail(p, "empty variable name");
    if (!seen.insert(name).second) io_detail::fail(p, "duplicate variable name \"" + name + "\"");
    names.push_back(std::move(name));
  }
  return names;
}

inline SemialgebraicSet inequalities_from_json(const json& j, std::size_t nvars, const std::string& path) {
  if (!j.is_array()) io_detail::fail(path, "expected an array");
  SemialgebraicSet set(nvars);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "/" + std::to_string(i);
    std::string label;
    if (j[i].is_object() && j[i].contains("label")) label = io_detail::text(j[i]["label"], p + "/label");
    set.add(polynomial_from_json(io_detail::field(j[i], "poly", p), nvars, p + "/poly"), std::move(label));
  }
  return set;
}

inline json inequalities_to_json(const SemialgebraicSet& set) {
  json a = json::array();
  for (std::size_t i = 0; i < set.size(); ++i) a.push_back({{"label", set.label(i)}, {"poly", polynomial_to_json(set[i])}});
  return a;
}

inline ProblemFile problem_from_json(const json& j) {
  ProblemFile p;
  p.variables = variables_from_json(io_detail::field(j, "variables", ""), "/variables");
  p.inequalities = inequalities_from_json(io_detail::field(j, "inequalities", ""), p.nvars(), "/inequalities");
  if (j.contains("candidate")) p.candidate = polynomial_from_json(j["candidate"], p.nvars(), "/candidate");
  if (j.contains("box")) p.box = box_from_json(j["box"], p.nvars(), "/box");
  return p;
}

inline json problem_to_json(const ProblemFile& p) {
  json j{{"variables", p.variables}, {"inequalities", inequalities_to_json(p.inequalities)}};
  if (p.candidate) j["candidate"] = polynomial_to_json(*p.candidate);
  if (p.box) j["box"] = box_to_json(*p.box);
  return j;
}

/// Reads a problem file; schema errors are prefixed with the file name.
inline ProblemFile parse_problem(const std::string& path) {
  const json j = read_json_file(path);
  try {
    return problem_from_json(j);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline ProblemFile parse_problem_string(const std::string& content, const std::string& source = "<input>") {
  const json j = parse_json_text(content, source);
  try {
    return problem_from_json(j);
  } catch (const FormatError& e) {
    throw FormatError(source + ": " + e.what());
  }
}

// ---------------------------------------------------------------- systems

struct SystemFile {
  LinearSystem system;
  std::optional<Eigen::MatrixXd> K;
  std::optional<double> Ts;
};

inline SystemFile system_from_json(const json& j, const std::string& path = "") {
  SystemFile s;
  const Eigen::MatrixXd A = io_detail::matrix(io_detail::field(j, "A", path), path + "/A");
  const Eigen::MatrixXd B = io_detail::matrix(io_detail::field(j, "B", path), path + "/B");
  if (A.rows() != A.cols()) io_detail::fail(path + "/A", "must be square");
  if (B.rows() != A.rows()) io_detail::fail(path + "/B", "must have as many rows as A");
  s.system = LinearSystem(A, B);
  if (j.contains("K")) {
    s.K = io_detail::matrix(j["K"], path + "/K");
    if (s.K->rows() != B.cols() || s.K->cols() != A.rows()) io_detail::fail(path + "/K", "must be nu x nx");
  }
  if (j.contains("Ts")) s.Ts = io_detail::number(j["Ts"], path + "/Ts");
  return s;
}

inline json system_to_json(const SystemFile& s) {
  json j{{"A", io_detail::to_json(s.system.A)}, {"B", io_detail::to_json(s.system.B)}};
  if (s.K) j["K"] = io_detail::to_json(*s.K);
  if (s.Ts) j["Ts"] = *s.Ts;
  return j;
}

// -------------------------------------------------------------- MPC specs

/// {"system": {...}, "N_c", "N_p", "input_constraints": [...], "state_constraints": [...],
///  "terminal"?: {"P", "level"}, "state_box"?, "input_box"?}
inline MpcSpec mpc_spec_from_json(const json& j) {
  MpcSpec s;
  const SystemFile sys = system_from_json(io_detail::field(j, "system", ""), "/system");
  s.system = sys.system;
  s.K = sys.K;
  s.control_horizon = io_detail::integer(io_detail::field(j, "N_c", ""), "/N_c");
  s.prediction_horizon = io_detail::integer(io_detail::field(j, "N_p", ""), "/N_p");
  if (s.control_horizon < 1) io_detail::fail("/N_c", "must be >= 1");
  if (s.control_horizon > s.prediction_horizon) io_detail::fail("/N_p", "must be >= N_c");
  const auto nx = static_cast<std::size_t>(s.system.nx()), nu = static_cast<std::size_t>(s.system.nu());
  const SemialgebraicSet in = inequalities_from_json(io_detail::field(j, "input_constraints", ""), nu, "/input_constraints");
  const SemialgebraicSet st = inequalities_from_json(io_detail::field(j, "state_constraints", ""), nx, "/state_constraints");
  s.input_constraints = in.inequalities();
  s.input_labels = in.labels();
  s.state_constraints = st.inequalities();
  s.state_labels = st.labels();
  if (j.contains("terminal")) {
    const json& t = j["terminal"];
    TerminalSet ts;
    ts.P = io_detail::matrix(io_detail::field(t, "P", "/terminal"), "/terminal/P");
    ts.level = io_detail::number(io_detail::field(t, "level", "/terminal"), "/terminal/level");
    if (ts.P.rows() != s.system.nx() || ts.P.cols() != s.system.nx()) io_detail::fail("/terminal/P", "must be nx x nx");
    s.terminal = ts;
  }
  if (j.contains("state_box")) s.state_box = box_from_json(j["state_box"], nx, "/state_box");
  if (j.contains("input_box")) s.input_box = box_from_json(j["input_box"], nu, "/input_box");
  return s;
}

inline json mpc_spec_to_json(const MpcSpec& s) {
  SystemFile sf{s.system, s.K, std::nullopt};
  SemialgebraicSet in(static_cast<std::size_t>(s.system.nu()), s.input_constraints, s.input_labels);
  SemialgebraicSet st(static_cast<std::size_t>(s.system.nx()), s.state_constraints, s.state_labels);
  json j{{"system", system_to_json(sf)},
         {"N_c", s.control_horizon},
         {"N_p", s.prediction_horizon},
         {"input_constraints", inequalities_to_json(in)},
         {"state_constraints", inequalities_to_json(st)}};
  if (s.terminal) j["terminal"] = {{"P", io_detail::to_json(s.terminal->P)}, {"level", s.terminal->level}};
  if (s.state_box) j["state_box"] = box_to_json(*s.state_box);
  if (s.input_box) j["input_box"] = box_to_json(*s.input_box);
  return j;
}

// ----------------------------------------------------------- certificates

inline json certificate_to_json(const RedundancyCertificate& c) {
  json mult = json::array();
  for (const auto& Q : c.multiplier_grams) mult.push_back({{"gram_lower", io_detail::lower_triangle(Q)}});
  json mb = json::array(), sb = json::array();
  for (const auto& m : c.multiplier_basis) mb.push_back(io_detail::monomial_json(m));
  for (const auto& m : c.sigma0_basis) sb.push_back(io_detail::monomial_json(m));
  json j{{"tool", "sosred"},
         {"version", version()},
         {"nvars", c.nvars()},
         {"target", polynomial_to_json(c.target)},
         {"peer_indices", c.peer_indices},
         {"multiplier_degree", c.multiplier_degree},
         {"kind", to_string(c.kind)},
         {"scaling", {{"center", io_detail::to_json(c.center)}, {"halfwidth", io_detail::to_json(c.halfwidth)}}},
         {"multiplier_basis", mb},
         {"multipliers", mult},
         {"sigma0", {{"basis", sb}, {"gram_lower", io_detail::lower_triangle(c.sigma0_gram)}}},
         {"rho", c.rho},
         {"residual_coeff_norm", c.residual_coeff_norm},
         {"min_gram_eigenvalue", c.min_gram_eigenvalue}};
  if (c.constraint_index) j["target_index"] = *c.constraint_index;
  return j;
}

inline RedundancyCertificate certificate_from_json(const json& j) {
  using namespace io_detail;
  RedundancyCertificate c;
  const int n = integer(field(j, "nvars", ""), "/nvars");
  if (n < 1) fail("/nvars", "must be >= 1");
  const auto nv = static_cast<std::size_t>(n);
  c.target = polynomial_from_json(field(j, "target", ""), nv, "/target");
  if (j.contains("target_index")) {
    const int t = integer(j["target_index"], "/target_index");
    if (t < 0) fail("/target_index", "must be >= 0");
    c.constraint_index = static_cast<std::size_t>(t);
  }
  const json& peers = field(j, "peer_indices", "");
  if (!peers.is_array()) fail("/peer_indices", "expected an array");
  for (std::size_t i = 0; i < peers.size(); ++i) {
    const int p = integer(peers[i], "/peer_indices/" + std::to_string(i));
    if (p < 0) fail("/peer_indices/" + std::to_string(i), "must be >= 0");
    c.peer_indices.push_back(static_cast<std::size_t>(p));
  }
  c.multiplier_degree = integer(field(j, "multiplier_degree", ""), "/multiplier_degree");
  const std::string kind = text(field(j, "kind", ""), "/kind");
  if (kind == "slack") {
    c.kind = CertificateKind::Slack;
  } else if (kind == "feasibility") {
    c.kind = CertificateKind::Feasibility;
  } else {
    fail("/kind", "expected \"slack\" or \"feasibility\"");
  }
  const json& sc = field(j, "scaling", "");
  c.center = vector(field(sc, "center", "/scaling"), "/scaling/center");
  c.halfwidth = vector(field(sc, "halfwidth", "/scaling"), "/scaling/halfwidth");
  if (static_cast<std::size_t>(c.center.size()) != nv || static_cast<std::size_t>(c.halfwidth.size()) != nv) {
    fail("/scaling", "center and halfwidth need " + std::to_string(nv) + " entries");
  }
  const json& mb = field(j, "multiplier_basis", "");
  if (!mb.is_array()) fail("/multiplier_basis", "expected an array");
  for (std::size_t i = 0; i < mb.size(); ++i) c.multiplier_basis.push_back(monomial(mb[i], nv, "/multiplier_basis/" + std::to_string(i)));
  const json& mult = field(j, "multipliers", "");
  if (!mult.is_array()) fail("/multipliers", "expected an array");
  for (std::size_t i = 0; i < mult.size(); ++i) {
    const std::string p = "/multipliers/" + std::to_string(i);
    c.multiplier_grams.push_back(from_lower_triangle(field(mult[i], "gram_lower", p),
                                                     static_cast<Eigen::Index>(c.multiplier_basis.size()), p + "/gram_lower"));
  }
  const json& s0 = field(j, "sigma0", "");
  const json& sb = field(s0, "basis", "/sigma0");
  if (!sb.is_array()) fail("/sigma0/basis", "expected an array");
  for (std::size_t i = 0; i < sb.size(); ++i) c.sigma0_basis.push_back(monomial(sb[i], nv, "/sigma0/basis/" + std::to_string(i)));
  c.sigma0_gram = from_lower_triangle(field(s0, "gram_lower", "/sigma0"), static_cast<Eigen::Index>(c.sigma0_basis.size()),
                                      "/sigma0/gram_lower");
  c.rho = number(field(j, "rho", ""), "/rho");
  if (j.contains("residual_coeff_norm") && j["residual_coeff_norm"].is_number()) c.residual_coeff_norm = j["residual_coeff_norm"].get<double>();
  if (j.contains("min_gram_eigenvalue") && j["min_gram_eigenvalue"].is_number()) c.min_gram_eigenvalue = j["min_gram_eigenvalue"].get<double>();
  return c;
}

// ---------------------------------------------------------------- reports

inline json options_to_json(const CertOptions& o) {
  json j{{"rho_min", o.rho_min},
         {"tol_identity", o.tol_identity},
         {"tol_psd", o.tol_psd},
         {"ds_cap", o.ds_cap},
         {"witness_tol", o.witness_tol},
         {"witness_feas_tol", o.witness_feas_tol},
         {"seed", o.seed},
         {"falsifier", o.run_falsifier},
         {"sdp", {{"tol_feas", o.sdp.tol_feas}, {"tol_gap", o.sdp.tol_gap}, {"max_iter", o.sdp.max_iter}}},
         {"budget",
          {{"samples", o.budget.samples},
           {"chains", o.budget.chains},
           {"chain_steps", o.budget.chain_steps},
           {"refine_starts", o.budget.refine_starts},
           {"refine_iterations", o.budget.refine_iterations}}}};
  if (o.fixed_ds) j["fixed_ds"] = *o.fixed_ds;
  if (o.box) j["box"] = box_to_json(*o.box);
  return j;
}

inline json nan_to_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json verdict_to_json(const Verdict& v, bool include_certificate = false) {
  json j{{"verdict", to_string(v.kind)}, {"rho", nan_to_null(v.rho)}, {"degree", v.degree}, {"seconds", v.seconds}};
  if (v.kind == VerdictKind::Unknown) j["reason"] = to_string(v.reason);
  if (!v.detail.empty()) j["detail"] = v.detail;
  if (v.witness) {
    j["witness"] = {{"point", io_detail::to_json(v.witness->point)},
                    {"target_value", v.witness->target_value},
                    {"min_constraint", nan_to_null(v.witness->min_constraint)},
                    {"source", v.witness->source}};
  }
  if (v.certificate) {
    j["certificate_summary"] = {{"kind", to_string(v.certificate->kind)},
                                {"rho", v.certificate->rho},
                                {"multiplier_degree", v.certificate->multiplier_degree},
                                {"residual_coeff_norm", v.certificate->residual_coeff_norm},
                                {"min_gram_eigenvalue", v.certificate->min_gram_eigenvalue}};
    if (include_certificate) j["certificate"] = certificate_to_json(*v.certificate);
  }
  return j;
}

inline json report_header(const char* command) {
  return json{{"tool", "sosred"}, {"version", version()}, {"command", command}};
}

inline json reduce_report_to_json(const ReduceReport& r, const CertOptions& opt) {
  json entries = json::array();
  for (const auto& e : r.entries) {
    json je = verdict_to_json(e.verdict);
    je["index"] = e.index;
    je["label"] = e.label;
    je["removed"] = e.removed;
    je["peers"] = e.peers;
    entries.push_back(std::move(je));
  }
  return json{{"options", options_to_json(opt)},
              {"relaxed_order", r.relaxed_order},
              {"order_note", r.relaxed_order ? "concurrent rounds: elimination order differs from the sequential sweep"
                                             : "sequential sweep, immediate removal"},
              {"retained", r.retained},
              {"removed", r.removed},
              {"counts",
               {{"total", r.entries.size()},
                {"removed", r.removed.size()},
                {"retained", r.retained.size()},
                {"unknown", r.count(VerdictKind::Unknown)}}},
              {"seconds", r.seconds},
              {"entries", entries}};
}

inline json moas_result_to_json(const MoasResult& r, const MoasSpec& spec) {
  json rows = json::array();
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    rows.push_back({{"label", r.inequalities.label(i)},
                    {"kind", r.rows[i].kind == MoasRowKind::Tightened ? "tightened" : "lifted"},
                    {"constraint", r.rows[i].constraint},
                    {"k", r.rows[i].k},
                    {"poly", polynomial_to_json(r.inequalities[i])}});
  }
  json onset = json::array();
  for (std::size_t i = 0; i < r.redundancy_onset.size(); ++i) {
    onset.push_back({{"constraint", spec.label(i)},
                     {"first_redundant_k", r.redundancy_onset[i] ? json(*r.redundancy_onset[i]) : json(nullptr)}});
  }
  json hist = json::array();
  for (const auto& h : r.history) {
    json jh = verdict_to_json(h.verdict);
    jh["constraint"] = h.constraint;
    jh["k"] = h.k;
    hist.push_back(std::move(jh));
  }
  return json{{"algorithm", to_string(r.algorithm)},
              {"epsilon", spec.epsilon},
              {"k_bar", spec.k_bar},
              {"k_star", r.k_star},
              {"not_finitely_determined", r.not_finitely_determined},
              {"relaxed_order", r.relaxed},
              {"spectral_radius", r.spectral_radius},
              {"counts",
               {{"inequalities", r.inequalities.size()},
                {"lifted", r.count_rows(MoasRowKind::Lifted)},
                {"tightened", r.count_rows(MoasRowKind::Tightened)},
                {"redundant_checks", r.redundant_checks()},
                {"checks", r.history.size()}}},
              {"onset", onset},
              {"options", options_to_json(spec.cert)},
              {"seconds", r.seconds},
              {"rows", rows},
              {"history", hist}};
}

inline json mpc_reduction_to_json(const MpcReduction& m, const CertOptions& opt) {
  json j = reduce_report_to_json(m.report, opt);
  for (std::size_t i = 0; i < m.omega.labels.size(); ++i) {
    j["entries"][i]["kind"] = to_string(m.omega.labels[i].kind);
    j["entries"][i]["constraint"] = m.omega.labels[i].constraint;
    j["entries"][i]["step"] = m.omega.labels[i].step;
  }
  j["terminal_gain"] = m.K.size() ? io_detail::to_json(m.K) : json(nullptr);
  j["terminal_removed"] = m.terminal_removed();
  j["removed_by_kind"] = {{"input", m.removed_of(MpcRowKind::Input)},
                          {"state", m.removed_of(MpcRowKind::State)},
                          {"terminal", m.removed_of(MpcRowKind::Terminal)}};
  return j;
}

inline json horizon_to_json(const HorizonSearch& h, const Eigen::MatrixXd& K) {
  json steps = json::array();
  for (const auto& s : h.steps) {
    json js = verdict_to_json(s.verdict);
    js["N_p"] = s.prediction_horizon;
    steps.push_back(std::move(js));
  }
  return json{{"N_p", h.prediction_horizon ? json(*h.prediction_horizon) : json(nullptr)},
              {"terminal_gain", K.size() ? io_detail::to_json(K) : json(nullptr)},
              {"steps", steps}};
}

/// Points of `set` among `samples` uniform draws from `box`, one per line.
inline std::size_t write_point_cloud(std::ostream& os, const SemialgebraicSet& set, const Box& box,
                                     const std::vector<std::string>& names, std::size_t samples,
                                     std::uint64_t seed = 1) {
  const CompiledSet cs(set);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
  os << "\n" << std::setprecision(10);
  std::size_t kept = 0;
  Eigen::VectorXd z(box.dims());
  for (std::size_t s = 0; s < samples; ++s) {
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = box.lower(k) + (box.upper(k) - box.lower(k)) * unit(rng);
    if (!cs.feasible(z, 0.0)) continue;
    for (Eigen::Index k = 0; k < z.size(); ++k) os << (k ? "," : "") << z(k);
    os << "\n";
    ++kept;
  }
  return kept;
}

}  // namespace sosred
