#pragma once

// Block matrices and Polya-relaxed LMI families for the two synthesis stages.
// Everything here is an affine expression over the scalars of a ConicProgram.

#include "pdrci/conic.hpp"
#include "pdrci/model.hpp"

#include <functional>
#include <string>
#include <vector>

namespace pdrci::lmi {

using conic::AffineExpr;
using conic::ConicProgram;
using conic::VarHandle;

enum class Stage { One, Two };

/// Decision variables of one SDP. Stage one uses W, phi, Lambda, Gamma; stage
/// two reuses the same slots for psi = 1/phi, LambdaTilde = Lambda^-1 and
/// GammaBar = Gamma / phi^2, and adds P, PiTilde, UpsilonTilde.
struct DecisionLayout {
  Stage stage = Stage::One;
  int n_x = 0, n_u = 0, n_w = 0, n_z = 0, n_g = 0, n_h = 0, n_p = 0, N_xi = 0;
  bool performance = false;
  double gamma = 0.0;

  VarHandle W;  // stage one only
  VarHandle Z;  // stage-one determinant-increase iterations only
  std::vector<VarHandle> Kbar;                // [k]
  std::vector<std::vector<VarHandle>> V;      // [i][k]
  std::vector<VarHandle> X;                   // [i]
  std::vector<VarHandle> phi;                 // [i] phi or psi
  std::vector<VarHandle> Lambda;              // [i] Lambda or LambdaTilde
  std::vector<VarHandle> Gamma;               // [i] Gamma or GammaBar
  std::vector<VarHandle> Pi, PiTilde;         // [j]
  VarHandle Upsilon, UpsilonTilde;
  std::vector<VarHandle> Q, S, F;             // [k]
  std::vector<VarHandle> P;                   // [k], stage two only
};

/// Multiplier lower bounds. Lambda, Pi, Upsilon (and their inverses) are
/// strictly positive because stage two inverts them; Gamma only needs >= 0.
DecisionLayout declare_layout(ConicProgram& program, const ProblemSpec& problem, int n_p, Stage stage,
                              bool with_Z, double epsilon);

/// Constant data of an iteration.
struct FixedPoint {
  std::vector<MatrixXd> P0;  // [k] n_p x n_x
  MatrixXd W;                // stage one: previous W (W0); stage two: the constant W
  std::vector<MatrixXd> Y;   // [i] n_x x n_x
  std::vector<VectorXd> Lambda0;  // [i]
  std::vector<VectorXd> Pi0;      // [j]
  VectorXd Upsilon0;
  std::vector<MatrixXd> X0;       // [i]
};

enum class ConditionKind { Psd, Scalar };

struct AssembledCondition {
  std::string label;
  std::string family;  // inv-a, inv-b, inv-M, sys-R, perf-N, perf-L, couple-Pi, couple-Ups
  ConditionKind kind = ConditionKind::Psd;
  AffineExpr expr;
  double margin = 0.0;
};

/// Read-only view shared by the block builders.
struct Context {
  const ConicProgram& program;
  const DecisionLayout& layout;
  const FixedPoint& fixed;
  const ProblemSpec& problem;
};

/// Stage one: P^T diag(w) P. Here P_k = P0_k = P_init so the inverse cancels.
AffineExpr build_Pkl_stage1(const MatrixXd& P_init, const AffineExpr& weight);

/// Stage two: He(P_k^T D P0_l) - P0_k^T D diag(tilde) D P0_l with D = diag(bar).
/// Not symmetric for k != l; the (k,l)+(l,k) sum is.
AffineExpr build_Pkl_stage2(const AffineExpr& P_k, const MatrixXd& P0_k, const MatrixXd& P0_l,
                            const VectorXd& bar, const AffineExpr& tilde);

/// P^{k,l} weighted by the multiplier of face i / constraint row j / Upsilon.
enum class Weight { Lambda, Pi, Upsilon };
AffineExpr build_Pkl(const Context& c, int k, int l, Weight w, int index);

/// Affine matrix valued vertex quantities.
AffineExpr closed_loop_state(const Context& c, int k, int l);   // A^k W + B^k Kbar^l
AffineExpr closed_loop_output(const Context& c, int k, int l);  // C^k W + D^k Kbar^l
AffineExpr W_expr(const Context& c);

AffineExpr build_M_block(const Context& c, int k, int l, int i);
AffineExpr build_R_block(const Context& c, int k, int l, int j);
/// m indexes the successor vertex whose Q sits in the (3,3) block.
AffineExpr build_N_block(const Context& c, int k, int l, int m);
AffineExpr build_L_block(const Context& c, int k, int l);

/// Coefficients of (sum xi)^d * sum_{k,l} xi_k xi_l B(k,l) on every monomial
/// of degree d + 2, in enumerate_exponents order. Each returned expression is
/// the exact symmetrization of the (k,l) + (l,k) combination.
std::vector<AffineExpr> polya_family(int d, int N_xi, const std::function<AffineExpr(int, int)>& block);

std::vector<AssembledCondition> assemble_stage1(const Context& c, int d, double epsilon);
std::vector<AssembledCondition> assemble_stage2(const Context& c, int d, double epsilon);

/// Adds every condition to the program.
void add_conditions(ConicProgram& program, const std::vector<AssembledCondition>& conditions);

struct ConditionCounts {
  int invariance = 0;
  int system = 0;
  int performance = 0;
  int coupling = 0;
};
ConditionCounts count_conditions(const std::vector<AssembledCondition>& conditions);

/// Closed-form counts. Invariance: n_p (1 + 1 + L) in stage one and
/// n_p (N_xi + 1 + L) in stage two; system: n_h L; performance: (N_xi + 1) L
/// when enabled (successor-vertex enumeration of the N family).
ConditionCounts expected_counts(Stage stage, int n_p, int n_h, int N_xi, int d, bool performance);

}  // namespace pdrci::lmi
