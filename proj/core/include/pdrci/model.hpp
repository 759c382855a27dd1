#pragma once

// Problem description: polytopic LPV plant, constraint sets, performance
// output and the optional quasi-LPV scheduling map.

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdrci {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Thrown for malformed or inconsistent problem data. The message starts with
/// the offending field path.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LpvSystem {
  int n_x = 0;
  int n_u = 0;
  int n_w = 0;
  int n_z = 0;
  int N_xi = 0;
  std::vector<MatrixXd> A, B, E, C, D;  // one per vertex
};

struct SystemMatrices {
  MatrixXd A, B, E, C, D;
};

/// {x, u : H_x x + H_u u <= 1} and {w : -1 <= G w <= 1}.
struct ConstraintData {
  MatrixXd H_x;
  MatrixXd H_u;
  MatrixXd G;

  int n_h() const { return static_cast<int>(H_x.rows()); }
  int n_g() const { return static_cast<int>(G.rows()); }
};

class SimplexPoint {
 public:
  explicit SimplexPoint(VectorXd xi, double tol = 1e-12);
  static SimplexPoint vertex(int n, int k);
  static SimplexPoint barycenter(int n);

  const VectorXd& xi() const { return xi_; }
  int size() const { return static_cast<int>(xi_.size()); }
  double operator[](int k) const { return xi_[k]; }

 private:
  VectorXd xi_;
};

struct PerformanceSpec {
  bool enabled = false;
  double gamma = 0.0;
};

/// Term coef * prod_i x_i^powers[i].
struct Monomial {
  double coef = 0.0;
  std::vector<int> powers;
};

/// State-dependent scheduling xi_k(x) = sum of monomials, valid on a box.
struct QlpvMap {
  std::string preset;  // "vanderpol" or empty for a user table
  double mu = 0.0;     // preset parameter
  std::vector<std::vector<Monomial>> xi;  // one polynomial per vertex
  VectorXd lower, upper;

  bool enabled() const { return !xi.empty(); }
  bool in_validity(const VectorXd& x, double tol = 0.0) const;
  /// Throws ModelError outside the validity box.
  SimplexPoint evaluate(const VectorXd& x) const;
};

QlpvMap vanderpol_map(double mu);

struct ProblemOptions {
  std::optional<int> n_p;
  std::optional<int> d;
  std::optional<int> iters1;
  std::optional<int> iters2;
  std::optional<int> grid;
  std::optional<double> epsilon;
};

struct ProblemSpec {
  std::string name;
  LpvSystem system;
  ConstraintData constraints;
  PerformanceSpec performance;
  QlpvMap qlpv;
  ProblemOptions options;
  /// Exact nonlinear update for qLPV simulation (x, u) -> x+, when known.
  bool has_nonlinear_dynamics() const { return qlpv.preset == "vanderpol"; }
  VectorXd nonlinear_step(const VectorXd& x, const VectorXd& u) const;
};

SystemMatrices evaluate_system(const LpvSystem& sys, const SimplexPoint& xi);

void validate(const LpvSystem& sys);
void validate(const ProblemSpec& spec);

/// Two-sided box bounds |x| <= x_max, |u| <= u_max as rows of [H_x H_u] with
/// unit right-hand side.
void box_constraints(const VectorXd& x_max, const VectorXd& u_max, MatrixXd& H_x, MatrixXd& H_u);

ProblemSpec parse_problem(const std::string& json_text);
ProblemSpec load_problem(const std::string& path);
std::string serialize_problem(const ProblemSpec& spec);
bool same_problem(const ProblemSpec& a, const ProblemSpec& b);

ProblemSpec preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace pdrci
