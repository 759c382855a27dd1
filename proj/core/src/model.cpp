#include "pdrci/model.hpp"

#include "pdrci/geometry.hpp"

#include <cmath>
#include <string>

namespace pdrci {
namespace {

std::string shape(const MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_matrix(const MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const std::string& path) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ModelError(path + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                     ", got " + shape(m));
  }
  if (!m.allFinite()) throw ModelError(path + ": non-finite entry");
}

void check_vertices(const std::vector<MatrixXd>& mats, int N, Eigen::Index rows, Eigen::Index cols,
                    const std::string& name) {
  if (static_cast<int>(mats.size()) != N) {
    throw ModelError(name + ": expected " + std::to_string(N) + " vertex matrices, got " +
                     std::to_string(mats.size()));
  }
  for (int k = 0; k < N; ++k) check_matrix(mats[static_cast<std::size_t>(k)], rows, cols, name + "[" + std::to_string(k) + "]");
}

}  // namespace

SimplexPoint::SimplexPoint(VectorXd xi, double tol) : xi_(std::move(xi)) {
  if (xi_.size() < 1) throw ModelError("xi: empty");
  if (!xi_.allFinite()) throw ModelError("xi: non-finite entry");
  if (xi_.minCoeff() < 0.0) throw ModelError("xi: negative entry");
  if (std::abs(xi_.sum() - 1.0) > tol) throw ModelError("xi: entries must sum to 1");
}

SimplexPoint SimplexPoint::vertex(int n, int k) {
  VectorXd v = VectorXd::Zero(n);
  v[k] = 1.0;
  return SimplexPoint(std::move(v));
}

SimplexPoint SimplexPoint::barycenter(int n) {
  return SimplexPoint(VectorXd::Constant(n, 1.0 / n));
}

bool QlpvMap::in_validity(const VectorXd& x, double tol) const {
  if (x.size() != lower.size()) return false;
  return ((x - lower).array() >= -tol).all() && ((upper - x).array() >= -tol).all();
}

SimplexPoint QlpvMap::evaluate(const VectorXd& x) const {
  if (!enabled()) throw ModelError("qlpv: no scheduling map");
  if (!in_validity(x)) throw ModelError("qlpv: state outside the validity region");
  VectorXd xi = VectorXd::Zero(static_cast<Eigen::Index>(this->xi.size()));
  for (std::size_t k = 0; k < this->xi.size(); ++k) {
    for (const Monomial& m : this->xi[k]) {
      double t = m.coef;
      for (std::size_t i = 0; i < m.powers.size(); ++i) t *= std::pow(x[static_cast<Eigen::Index>(i)], m.powers[i]);
      xi[static_cast<Eigen::Index>(k)] += t;
    }
  }
  // roundoff at the validity boundary
  for (Eigen::Index k = 0; k < xi.size(); ++k) {
    if (xi[k] < 0.0 && xi[k] > -1e-12) xi[k] = 0.0;
  }
  return SimplexPoint(xi, 1e-9);
}

QlpvMap vanderpol_map(double mu) {
  // xi_2 = mu (1 - x1^2) / 2, xi_1 = 1 - xi_2
  QlpvMap m;
  m.preset = "vanderpol";
  m.mu = mu;
  m.xi = {{{1.0 - mu / 2.0, {0, 0}}, {mu / 2.0, {2, 0}}},
          {{mu / 2.0, {0, 0}}, {-mu / 2.0, {2, 0}}}};
  m.lower = VectorXd::Constant(2, -1.0);
  m.upper = VectorXd::Constant(2, 1.0);
  return m;
}

VectorXd ProblemSpec::nonlinear_step(const VectorXd& x, const VectorXd& u) const {
  if (qlpv.preset != "vanderpol") throw ModelError("qlpv: no nonlinear model for this problem");
  const double h = 0.1;
  VectorXd xp(2);
  xp[0] = x[0] + h * x[1];
  xp[1] = x[1] + h * (-x[0] + qlpv.mu * (1.0 - x[0] * x[0]) * x[1] + u[0]);
  return xp;
}

SystemMatrices evaluate_system(const LpvSystem& sys, const SimplexPoint& xi) {
  if (xi.size() != sys.N_xi) throw ModelError("xi: length does not match N_xi");
  SystemMatrices out{MatrixXd::Zero(sys.n_x, sys.n_x), MatrixXd::Zero(sys.n_x, sys.n_u),
                     MatrixXd::Zero(sys.n_x, sys.n_w), MatrixXd::Zero(sys.n_z, sys.n_x),
                     MatrixXd::Zero(sys.n_z, sys.n_u)};
  for (int k = 0; k < sys.N_xi; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    out.A += xi[k] * sys.A[ks];
    out.B += xi[k] * sys.B[ks];
    out.E += xi[k] * sys.E[ks];
    out.C += xi[k] * sys.C[ks];
    out.D += xi[k] * sys.D[ks];
  }
  return out;
}

void validate(const LpvSystem& s) {
  if (s.N_xi < 1) throw ModelError("N_xi must be ≥ 1");
  if (s.n_x < 1) throw ModelError("n_x must be ≥ 1");
  if (s.n_u < 1) throw ModelError("n_u must be ≥ 1");
  if (s.n_w < 1) throw ModelError("n_w must be ≥ 1");
  if (s.n_z < 1) throw ModelError("n_z must be ≥ 1");
  check_vertices(s.A, s.N_xi, s.n_x, s.n_x, "A");
  check_vertices(s.B, s.N_xi, s.n_x, s.n_u, "B");
  check_vertices(s.E, s.N_xi, s.n_x, s.n_w, "E");
  check_vertices(s.C, s.N_xi, s.n_z, s.n_x, "C");
  check_vertices(s.D, s.N_xi, s.n_z, s.n_u, "D");
}

void validate(const ProblemSpec& spec) {
  validate(spec.system);
  const LpvSystem& s = spec.system;
  const ConstraintData& c = spec.constraints;
  if (c.H_x.rows() < 1) throw ModelError("H_x: at least one constraint row required");
  check_matrix(c.H_x, c.H_x.rows(), s.n_x, "H_x");
  check_matrix(c.H_u, c.H_x.rows(), s.n_u, "H_u");
  if (c.G.rows() < 1) throw ModelError("G: at least one row required");
  check_matrix(c.G, c.G.rows(), s.n_w, "G");
  Eigen::FullPivLU<MatrixXd> lu(c.G);
  if (lu.rank() < s.n_w) throw ModelError("G: must have full column rank (bounded disturbance set)");
  if (c.H_u.isZero(0.0)) throw ModelError("H_u: input constraints are required");
  for (Eigen::Index r = 0; r < c.H_u.rows(); ++r) {
    if (c.H_x.row(r).isZero(0.0) && c.H_u.row(r).isZero(0.0)) {
      throw ModelError("H_x/H_u: row " + std::to_string(r) + " is identically zero");
    }
  }
  try {
    (void)geometry::bounding_box(c);
  } catch (const geometry::GeometryError&) {
    throw ModelError("H_x: state constraint set is unbounded");
  }
  if (spec.performance.enabled && !(spec.performance.gamma >= 0.0 && std::isfinite(spec.performance.gamma))) {
    throw ModelError("performance.gamma: must be a finite value ≥ 0");
  }
  if (spec.qlpv.enabled()) {
    const QlpvMap& q = spec.qlpv;
    if (static_cast<int>(q.xi.size()) != s.N_xi) throw ModelError("qlpv.poly: one polynomial per vertex required");
    if (q.lower.size() != s.n_x || q.upper.size() != s.n_x) {
      throw ModelError("qlpv.validity: bounds must have length n_x");
    }
    if (((q.upper - q.lower).array() < 0.0).any()) throw ModelError("qlpv.validity: lower > upper");
    for (const auto& poly : q.xi) {
      for (const Monomial& m : poly) {
        if (static_cast<int>(m.powers.size()) != s.n_x) {
          throw ModelError("qlpv.poly: monomial powers must have length n_x");
        }
        for (int p : m.powers) {
          if (p < 0) throw ModelError("qlpv.poly: negative power");
        }
      }
    }
    // sum of the map must be identically one: check on the validity corners and center
    const int corners = 1 << std::min(s.n_x, 10);
    for (int c2 = 0; c2 <= corners; ++c2) {
      VectorXd x = 0.5 * (q.lower + q.upper);
      if (c2 < corners) {
        for (int i = 0; i < s.n_x && i < 10; ++i) x[i] = (c2 >> i) & 1 ? q.upper[i] : q.lower[i];
      }
      try {
        (void)q.evaluate(x);
      } catch (const ModelError& e) {
        throw ModelError(std::string("qlpv.poly: map leaves the simplex on the validity region (") + e.what() + ")");
      }
    }
  }
  if (spec.options.n_p && *spec.options.n_p < s.n_x) throw ModelError("options.n_p: must be ≥ n_x");
  if (spec.options.d && *spec.options.d < 0) throw ModelError("options.d: must be ≥ 0");
  if (spec.options.iters1 && *spec.options.iters1 < 1) throw ModelError("options.iters1: must be ≥ 1");
  if (spec.options.iters2 && *spec.options.iters2 < 1) throw ModelError("options.iters2: must be ≥ 1");
  if (spec.options.grid && *spec.options.grid < 1) throw ModelError("options.grid: must be ≥ 1");
}

void box_constraints(const VectorXd& x_max, const VectorXd& u_max, MatrixXd& H_x, MatrixXd& H_u) {
  const auto nx = x_max.size();
  const auto nu = u_max.size();
  H_x = MatrixXd::Zero(2 * (nx + nu), nx);
  H_u = MatrixXd::Zero(2 * (nx + nu), nu);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < nx; ++i) {
    if (!(x_max[i] > 0.0)) throw ModelError("x_max: bounds must be positive");
    H_x(r++, i) = 1.0 / x_max[i];
    H_x(r++, i) = -1.0 / x_max[i];
  }
  for (Eigen::Index i = 0; i < nu; ++i) {
    if (!(u_max[i] > 0.0)) throw ModelError("u_max: bounds must be positive");
    H_u(r++, i) = 1.0 / u_max[i];
    H_u(r++, i) = -1.0 / u_max[i];
  }
}

namespace {

LpvSystem null_channels(LpvSystem s) {
  s.n_w = 1;
  s.n_z = 1;
  s.E.assign(static_cast<std::size_t>(s.N_xi), MatrixXd::Zero(s.n_x, 1));
  s.C.assign(static_cast<std::size_t>(s.N_xi), MatrixXd::Zero(1, s.n_x));
  s.D.assign(static_cast<std::size_t>(s.N_xi), MatrixXd::Zero(1, s.n_u));
  return s;
}

ProblemSpec demo_1d() {
  ProblemSpec p;
  p.name = "demo-1d";
  LpvSystem s;
  s.n_x = 1;
  s.n_u = 1;
  s.N_xi = 2;
  s.A = {MatrixXd::Constant(1, 1, -2.0), MatrixXd::Constant(1, 1, 2.0)};
  s.B = {MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1)};
  p.system = null_channels(s);
  // |x| <= 2 only closes the state set; it never binds since |x| <= 1 is maximal
  box_constraints(VectorXd::Constant(1, 2.0), VectorXd::Ones(1), p.constraints.H_x, p.constraints.H_u);
  p.constraints.G = MatrixXd::Ones(1, 1);
  p.options.n_p = 1;
  return p;
}

ProblemSpec demo_double_integrator() {
  ProblemSpec p;
  p.name = "demo-double-integrator";
  LpvSystem& s = p.system;
  s.n_x = 2;
  s.n_u = 1;
  s.n_w = 1;
  s.n_z = 3;
  s.N_xi = 2;
  for (double a : {0.75, 1.25}) {
    MatrixXd A(2, 2);
    A << a, a, 0.0, a;
    MatrixXd B(2, 1);
    B << 0.0, a;
    MatrixXd E(2, 1);
    E << 1.0, 0.0;
    MatrixXd C = MatrixXd::Zero(3, 2);
    C(0, 0) = 1.0;
    C(1, 1) = 1.0;
    MatrixXd D = MatrixXd::Zero(3, 1);
    D(2, 0) = std::sqrt(0.1);
    s.A.push_back(A);
    s.B.push_back(B);
    s.E.push_back(E);
    s.C.push_back(C);
    s.D.push_back(D);
  }
  box_constraints(VectorXd::Constant(2, 5.0), VectorXd::Ones(1), p.constraints.H_x, p.constraints.H_u);
  p.constraints.G = MatrixXd::Constant(1, 1, 4.0);
  return p;
}

ProblemSpec demo_vanderpol() {
  ProblemSpec p;
  p.name = "demo-vanderpol";
  LpvSystem s;
  s.n_x = 2;
  s.n_u = 1;
  s.N_xi = 2;
  MatrixXd A1(2, 2);
  A1 << 1.0, 0.1, -0.1, 1.0;
  MatrixXd A2(2, 2);
  A2 << 1.0, 0.1, -0.1, 1.2;
  MatrixXd B(2, 1);
  B << 0.0, 0.1;
  s.A = {A1, A2};
  s.B = {B, B};
  p.system = null_channels(s);
  box_constraints(VectorXd::Ones(2), VectorXd::Ones(1), p.constraints.H_x, p.constraints.H_u);
  p.constraints.G = MatrixXd::Ones(1, 1);
  p.qlpv = vanderpol_map(2.0);
  return p;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"demo-1d", "demo-double-integrator", "demo-vanderpol"};
}

ProblemSpec preset(const std::string& name) {
  ProblemSpec p;
  if (name == "demo-1d") {
    p = demo_1d();
  } else if (name == "demo-double-integrator") {
    p = demo_double_integrator();
  } else if (name == "demo-vanderpol") {
    p = demo_vanderpol();
  } else {
    throw ModelError("preset: unknown name '" + name + "'");
  }
  validate(p);
  return p;
}

}  // namespace pdrci
