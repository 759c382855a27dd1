#include "pdrci/model.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace pdrci {
namespace {

using nlohmann::json;

MatrixXd to_matrix(const json& j, const std::string& path) {
  if (!j.is_array()) throw ModelError(path + ": expected a nested array");
  if (j.empty()) return MatrixXd(0, 0);
  // a flat numeric array is read as a column vector
  if (j.front().is_number()) {
    MatrixXd m(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number()) throw ModelError(path + "[" + std::to_string(i) + "]: expected a number");
      m(static_cast<Eigen::Index>(i), 0) = j[i].get<double>();
    }
    return m;
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const json& row = j[r];
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || row.size() != cols) throw ModelError(rp + ": ragged or non-array row");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw ModelError(rp + "[" + std::to_string(c) + "]: expected a number");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
    }
  }
  return m;
}

json from_matrix(const MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<MatrixXd> to_vertices(const json& j, const std::string& path) {
  if (!j.is_array()) throw ModelError(path + ": expected an array of matrices");
  std::vector<MatrixXd> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(to_matrix(j[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

json from_vertices(const std::vector<MatrixXd>& v) {
  json out = json::array();
  for (const MatrixXd& m : v) out.push_back(from_matrix(m));
  return out;
}

int get_int(const json& j, const char* key) {
  if (!j.contains(key)) throw ModelError(std::string(key) + ": missing");
  if (!j[key].is_number_integer()) throw ModelError(std::string(key) + ": expected an integer");
  return j[key].get<int>();
}

VectorXd to_vector(const json& j, const std::string& path) {
  MatrixXd m = to_matrix(j, path);
  if (m.cols() != 1) throw ModelError(path + ": expected a flat array");
  return m.col(0);
}

json from_vector(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

}  // namespace

ProblemSpec parse_problem(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelError(std::string("parse error: ") + e.what());
  }
  if (!j.is_object()) throw ModelError("problem: expected a JSON object");

  ProblemSpec p;
  p.name = j.value("name", std::string("problem"));
  LpvSystem& s = p.system;
  s.N_xi = get_int(j, "N_xi");
  if (s.N_xi < 1) throw ModelError("N_xi must be ≥ 1");
  s.n_x = get_int(j, "n_x");
  s.n_u = get_int(j, "n_u");
  for (const char* key : {"A", "B", "H_x", "H_u"}) {
    if (!j.contains(key)) throw ModelError(std::string(key) + ": missing");
  }
  s.A = to_vertices(j["A"], "A");
  s.B = to_vertices(j["B"], "B");
  p.constraints.H_x = to_matrix(j["H_x"], "H_x");
  p.constraints.H_u = to_matrix(j["H_u"], "H_u");
  // H_x given as a flat array for n_x = 1 reads as a column, which is right;
  // H_u likewise for n_u = 1.

  if (j.contains("E")) {
    s.n_w = get_int(j, "n_w");
    s.E = to_vertices(j["E"], "E");
    if (!j.contains("G")) throw ModelError("G: missing");
    p.constraints.G = to_matrix(j["G"], "G");
  } else {
    s.n_w = 1;
    s.E.assign(static_cast<std::size_t>(s.N_xi), MatrixXd::Zero(s.n_x, 1));
    p.constraints.G = j.contains("G") ? to_matrix(j["G"], "G") : MatrixXd::Ones(1, 1);
  }
  if (j.contains("C") || j.contains("D")) {
    s.n_z = get_int(j, "n_z");
    if (!j.contains("C") || !j.contains("D")) throw ModelError("C/D: both are required together");
    s.C = to_vertices(j["C"], "C");
    s.D = to_vertices(j["D"], "D");
  } else {
    s.n_z = 1;
    s.C.assign(static_cast<std::size_t>(s.N_xi), MatrixXd::Zero(1, s.n_x));
    s.D.assign(static_cast<std::size_t>(s.N_xi), MatrixXd::Zero(1, s.n_u));
  }

  if (j.contains("performance") && !j["performance"].is_null()) {
    const json& perf = j["performance"];
    if (!perf.contains("gamma") || !perf["gamma"].is_number()) {
      throw ModelError("performance.gamma: expected a number");
    }
    p.performance.enabled = true;
    p.performance.gamma = perf["gamma"].get<double>();
  }

  if (j.contains("qlpv") && !j["qlpv"].is_null()) {
    const json& q = j["qlpv"];
    if (q.contains("preset")) {
      const std::string name = q["preset"].get<std::string>();
      if (name != "vanderpol") throw ModelError("qlpv.preset: unknown preset '" + name + "'");
      p.qlpv = vanderpol_map(q.value("mu", 2.0));
    } else if (q.contains("poly")) {
      const json& poly = q["poly"];
      if (!poly.is_array()) throw ModelError("qlpv.poly: expected an array");
      for (std::size_t k = 0; k < poly.size(); ++k) {
        std::vector<Monomial> terms;
        for (std::size_t t = 0; t < poly[k].size(); ++t) {
          const json& term = poly[k][t];
          const std::string tp = "qlpv.poly[" + std::to_string(k) + "][" + std::to_string(t) + "]";
          if (!term.contains("coef") || !term.contains("powers")) throw ModelError(tp + ": expected {coef, powers}");
          terms.push_back({term["coef"].get<double>(), term["powers"].get<std::vector<int>>()});
        }
        p.qlpv.xi.push_back(std::move(terms));
      }
      if (!q.contains("validity")) throw ModelError("qlpv.validity: missing");
      p.qlpv.lower = to_vector(q["validity"]["lower"], "qlpv.validity.lower");
      p.qlpv.upper = to_vector(q["validity"]["upper"], "qlpv.validity.upper");
    } else {
      throw ModelError("qlpv: expected 'preset' or 'poly'");
    }
  }

  if (j.contains("options") && j["options"].is_object()) {
    const json& o = j["options"];
    auto opt_int = [&](const char* key, std::optional<int>& dst) {
      if (o.contains(key)) {
        if (!o[key].is_number_integer()) throw ModelError(std::string("options.") + key + ": expected an integer");
        dst = o[key].get<int>();
      }
    };
    opt_int("n_p", p.options.n_p);
    opt_int("d", p.options.d);
    opt_int("iters1", p.options.iters1);
    opt_int("iters2", p.options.iters2);
    opt_int("grid", p.options.grid);
    if (o.contains("epsilon")) p.options.epsilon = o["epsilon"].get<double>();
  }

  validate(p);
  return p;
}

ProblemSpec load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str());
}

std::string serialize_problem(const ProblemSpec& p) {
  const LpvSystem& s = p.system;
  json j;
  j["name"] = p.name;
  j["n_x"] = s.n_x;
  j["n_u"] = s.n_u;
  j["n_w"] = s.n_w;
  j["n_z"] = s.n_z;
  j["N_xi"] = s.N_xi;
  j["A"] = from_vertices(s.A);
  j["B"] = from_vertices(s.B);
  j["E"] = from_vertices(s.E);
  j["C"] = from_vertices(s.C);
  j["D"] = from_vertices(s.D);
  j["H_x"] = from_matrix(p.constraints.H_x);
  j["H_u"] = from_matrix(p.constraints.H_u);
  j["G"] = from_matrix(p.constraints.G);
  if (p.performance.enabled) j["performance"] = {{"gamma", p.performance.gamma}};
  if (p.qlpv.enabled()) {
    if (!p.qlpv.preset.empty()) {
      j["qlpv"] = {{"preset", p.qlpv.preset}, {"mu", p.qlpv.mu}};
    } else {
      json poly = json::array();
      for (const auto& terms : p.qlpv.xi) {
        json jt = json::array();
        for (const Monomial& m : terms) jt.push_back({{"coef", m.coef}, {"powers", m.powers}});
        poly.push_back(std::move(jt));
      }
      j["qlpv"] = {{"poly", poly},
                   {"validity", {{"lower", from_vector(p.qlpv.lower)}, {"upper", from_vector(p.qlpv.upper)}}}};
    }
  }
  json o = json::object();
  if (p.options.n_p) o["n_p"] = *p.options.n_p;
  if (p.options.d) o["d"] = *p.options.d;
  if (p.options.iters1) o["iters1"] = *p.options.iters1;
  if (p.options.iters2) o["iters2"] = *p.options.iters2;
  if (p.options.grid) o["grid"] = *p.options.grid;
  if (p.options.epsilon) o["epsilon"] = *p.options.epsilon;
  if (!o.empty()) j["options"] = o;
  return j.dump(2);
}

bool same_problem(const ProblemSpec& a, const ProblemSpec& b) {
  auto same_list = [](const std::vector<MatrixXd>& x, const std::vector<MatrixXd>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (x[k].rows() != y[k].rows() || x[k].cols() != y[k].cols() || x[k] != y[k]) return false;
    }
    return true;
  };
  auto same = [](const MatrixXd& x, const MatrixXd& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && x == y;
  };
  const LpvSystem& s = a.system;
  const LpvSystem& t = b.system;
  if (s.n_x != t.n_x || s.n_u != t.n_u || s.n_w != t.n_w || s.n_z != t.n_z || s.N_xi != t.N_xi) return false;
  if (!same_list(s.A, t.A) || !same_list(s.B, t.B) || !same_list(s.E, t.E) || !same_list(s.C, t.C) ||
      !same_list(s.D, t.D)) {
    return false;
  }
  if (!same(a.constraints.H_x, b.constraints.H_x) || !same(a.constraints.H_u, b.constraints.H_u) ||
      !same(a.constraints.G, b.constraints.G)) {
    return false;
  }
  if (a.performance.enabled != b.performance.enabled || a.performance.gamma != b.performance.gamma) return false;
  if (a.qlpv.preset != b.qlpv.preset || a.qlpv.mu != b.qlpv.mu || a.qlpv.xi.size() != b.qlpv.xi.size()) return false;
  for (std::size_t k = 0; k < a.qlpv.xi.size(); ++k) {
    if (a.qlpv.xi[k].size() != b.qlpv.xi[k].size()) return false;
    for (std::size_t t2 = 0; t2 < a.qlpv.xi[k].size(); ++t2) {
      if (a.qlpv.xi[k][t2].coef != b.qlpv.xi[k][t2].coef || a.qlpv.xi[k][t2].powers != b.qlpv.xi[k][t2].powers) {
        return false;
      }
    }
  }
  if (a.qlpv.lower.size() != b.qlpv.lower.size() || a.qlpv.lower != b.qlpv.lower || a.qlpv.upper != b.qlpv.upper) {
    return false;
  }
  const ProblemOptions& o = a.options;
  const ProblemOptions& q = b.options;
  return o.n_p == q.n_p && o.d == q.d && o.iters1 == q.iters1 && o.iters2 == q.iters2 && o.grid == q.grid &&
         o.epsilon == q.epsilon && a.name == b.name;
}

}  // namespace pdrci
