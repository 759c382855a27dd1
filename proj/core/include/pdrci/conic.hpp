#pragma once

// Solver-agnostic semidefinite program model and its reference backend.
//
// Decision variables are stored as a flat vector of scalars. Matrix-valued
// quantities are affine expressions over that vector: a constant matrix plus
// one coefficient matrix per scalar that appears in the expression.

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pdrci::conic {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(Index rows, Index cols);
  explicit AffineExpr(MatrixXd constant);

  static AffineExpr zero(Index rows, Index cols) { return AffineExpr(rows, cols); }
  static AffineExpr identity(Index n) { return AffineExpr(MatrixXd::Identity(n, n)); }

  Index rows() const { return constant_.rows(); }
  Index cols() const { return constant_.cols(); }

  const MatrixXd& constant() const { return constant_; }
  const std::map<int, MatrixXd>& terms() const { return terms_; }
  bool is_constant() const { return terms_.empty(); }

  /// Adds coef * y[index]. Coefficient shape must match the expression.
  void add_term(int index, const MatrixXd& coef);
  void add_constant(const MatrixXd& c);

  MatrixXd evaluate(const VectorXd& y) const;

  AffineExpr transpose() const;
  AffineExpr block(Index row, Index col, Index rows, Index cols) const;

  /// Exact (bitwise) symmetry of the constant and every coefficient.
  bool is_symmetric() const;
  /// (E + E^T) / 2, exactly symmetric in floating point.
  AffineExpr symmetrized() const;

  AffineExpr& operator+=(const AffineExpr& other);
  AffineExpr& operator-=(const AffineExpr& other);
  AffineExpr& operator*=(double s);

 private:
  MatrixXd constant_;
  std::map<int, MatrixXd> terms_;
};

AffineExpr operator+(AffineExpr a, const AffineExpr& b);
AffineExpr operator-(AffineExpr a, const AffineExpr& b);
AffineExpr operator-(AffineExpr a);
AffineExpr operator*(double s, AffineExpr a);
AffineExpr operator*(const MatrixXd& left, const AffineExpr& e);
AffineExpr operator*(const AffineExpr& e, const MatrixXd& right);

/// He(E) = E + E^T.
AffineExpr he(const AffineExpr& e);

/// left * diag(d) * right, where d is an n x 1 expression.
AffineExpr diag_product(const MatrixXd& left, const AffineExpr& d, const MatrixXd& right);

/// s * M for a 1 x 1 expression s.
AffineExpr scale(const AffineExpr& s, const MatrixXd& m);

/// Sum of all entries as a 1 x 1 expression.
AffineExpr sum_entries(const AffineExpr& e);

/// Assembles a symmetric block matrix from its lower-triangular blocks. The
/// upper blocks are the transposes; unset blocks are zero.
class SymmetricBlockBuilder {
 public:
  explicit SymmetricBlockBuilder(std::vector<Index> sizes);
  void set(std::size_t row, std::size_t col, const AffineExpr& e);
  AffineExpr build() const;

 private:
  std::vector<Index> sizes_;
  std::vector<Index> offsets_;
  std::map<std::pair<std::size_t, std::size_t>, AffineExpr> blocks_;
};

// ---------------------------------------------------------------------------
// Program model

enum class VarKind { Free, Symmetric, Diagonal, NonNegative };

struct VarHandle {
  int id = -1;
  bool valid() const { return id >= 0; }
};

struct Variable {
  std::string name;
  VarKind kind = VarKind::Free;
  int rows = 0;
  int cols = 0;
  int offset = 0;  // first scalar index
  int size = 0;    // number of scalars
  double lower = 0.0;  // elementwise bound for Diagonal / NonNegative
};

enum class ConstraintKind { Psd, NonNegative, Equality };

struct Constraint {
  std::string label;
  ConstraintKind kind = ConstraintKind::Psd;
  AffineExpr expr;
  double margin = 0.0;  // Psd: expr >= margin * I; NonNegative: expr >= margin
};

enum class ObjectiveSense { Feasibility, Minimize, Maximize, MaximizeLogDet };

/// Auxiliary data created by reduce_logdet. The backend has no exponential
/// cone, so the log-determinant is replaced by the geometric mean of the
/// diagonal of a triangular factor T, which has the same maximizers.
struct LogDetReduction {
  int dim = 0;
  VarHandle factor;             // n(n+1)/2 free scalars forming lower-triangular T
  std::vector<int> diagonal;    // scalar indices of T_ii
  AffineExpr root;              // 1x1 expression <= (prod T_ii)^(1/2^k)
};

class ConicProgram {
 public:
  VarHandle free_var(std::string name, int rows, int cols);
  VarHandle symmetric_var(std::string name, int n);
  VarHandle diagonal_var(std::string name, int n, double lower);
  VarHandle nonneg_var(std::string name, int rows, int cols, double lower = 0.0);

  /// Matrix expression of a variable (Diagonal variables yield n x n).
  AffineExpr expr(VarHandle v) const;
  /// Diagonal entries of a Diagonal variable as an n x 1 expression.
  AffineExpr diag_vector(VarHandle v) const;
  /// Entry (i, j) as a 1 x 1 expression.
  AffineExpr entry(VarHandle v, int i = 0, int j = 0) const;

  void add_psd(std::string label, const AffineExpr& e, double margin = 0.0);
  void add_nonneg(std::string label, const AffineExpr& e, double margin = 0.0);
  void add_equal(std::string label, const AffineExpr& e);

  void minimize(const AffineExpr& objective);
  void maximize(const AffineExpr& objective);
  void maximize_logdet(const AffineExpr& symmetric);

  const std::vector<Variable>& variables() const { return variables_; }
  const Variable& variable(VarHandle v) const;
  const std::vector<Constraint>& constraints() const { return constraints_; }
  int num_scalars() const { return num_scalars_; }

  ObjectiveSense sense() const { return sense_; }
  const AffineExpr& objective() const { return objective_; }
  const LogDetReduction* logdet() const { return logdet_ ? &*logdet_ : nullptr; }

  MatrixXd value(VarHandle v, const VectorXd& y) const;
  /// Writes m into the scalars of v (inverse of value; symmetric/diagonal parts only).
  void set_value(VarHandle v, const MatrixXd& m, VectorXd& y) const;
  /// Objective value at y. For MaximizeLogDet this is sum(log T_ii).
  double objective_value(const VectorXd& y) const;

  /// Largest violation over all constraints and variable bounds at y.
  double max_violation(const VectorXd& y) const;

  /// Sparse text dump: variable list, then one line per constraint with cone
  /// tag, dimension, margin and (entry, scalar, value) triplets.
  std::string dump() const;

 private:
  friend LogDetReduction reduce_logdet(ConicProgram& program, const AffineExpr& symmetric);

  VarHandle add_variable(std::string name, VarKind kind, int rows, int cols, int size,
                         double lower);

  std::vector<Variable> variables_;
  std::vector<Constraint> constraints_;
  int num_scalars_ = 0;
  ObjectiveSense sense_ = ObjectiveSense::Feasibility;
  AffineExpr objective_;
  std::optional<LogDetReduction> logdet_;
};

/// Adds the triangular factor, the coupling block [[E, T], [T^T, diag(T)]] >= 0
/// and a geometric-mean chain of 2x2 hyperbolic constraints whose root is
/// bounded by (prod T_ii)^(1/2^k). Since det(E) >= prod T_ii, maximizing the
/// root maximizes log det(E).
LogDetReduction reduce_logdet(ConicProgram& program, const AffineExpr& symmetric);

// ---------------------------------------------------------------------------
// Backend

enum class SolveStatus { Optimal, Feasible, Infeasible, Unbounded, NumericalFailure };

std::string to_string(SolveStatus status);

struct Tolerances {
  double feasibility = 1e-7;  // reported residual bound on the returned point
  double relative_gap = 1e-8;
  double relative_residual = 1e-10;  // dual (returned point)
  double primal_residual = 1e-8;
  int max_iterations = 200;
  bool verbose = false;  // per-iteration log on stderr
};

struct SolverStats {
  int iterations = 0;
  double wall_seconds = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double relative_gap = 0.0;
  double max_violation = 0.0;
};

struct Solution {
  SolveStatus status = SolveStatus::NumericalFailure;
  VectorXd y;
  double objective = 0.0;
  SolverStats stats;

  bool ok() const { return status == SolveStatus::Optimal || status == SolveStatus::Feasible; }
};

/// Primal-dual path-following interior-point method (HKM direction with
/// Mehrotra predictor-corrector) on the dual-form SDP obtained from the
/// program. Equalities are eliminated by a nullspace parameterization.
Solution solve(const ConicProgram& program, const Tolerances& tol = {});

}  // namespace pdrci::conic
