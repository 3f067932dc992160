#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace mrcie::sdp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Bijection between n(n+1)/2 scalars and the upper triangle of a symmetric n x n matrix.
std::vector<std::pair<int, int>> symmetric_vectorize(int n);
VectorXd vectorize(const MatrixXd& S);
MatrixXd devectorize(const VectorXd& v, int n);

struct Term {
  int var;
  int row;
  int col;
  double value;
};

/// Matrix expression affine in the decision vector: M(y) = M0 + sum_k y_var(k) * value(k) e_row e_col^T.
class AffineMatrix {
public:
  AffineMatrix() = default;
  AffineMatrix(int rows, int cols);
  explicit AffineMatrix(const MatrixXd& constant);

  int rows() const { return static_cast<int>(c_.rows()); }
  int cols() const { return static_cast<int>(c_.cols()); }
  const MatrixXd& constant() const { return c_; }
  const std::vector<Term>& terms() const { return terms_; }

  void add_term(int var, int row, int col, double value);
  AffineMatrix transpose() const;
  MatrixXd evaluate(const VectorXd& y) const;

  AffineMatrix& operator+=(const AffineMatrix& o);
  AffineMatrix& operator-=(const AffineMatrix& o);
  AffineMatrix& operator*=(double s);
  friend AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) { return a += b; }
  friend AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) { return a -= b; }
  friend AffineMatrix operator*(double s, AffineMatrix a) { return a *= s; }
  friend AffineMatrix operator-(AffineMatrix a) { return a *= -1.0; }
  friend AffineMatrix operator*(const MatrixXd& L, const AffineMatrix& a);
  friend AffineMatrix operator*(const AffineMatrix& a, const MatrixXd& R);

  /// Merge duplicate entries and drop exact zeros.
  void compress();

private:
  MatrixXd c_;
  std::vector<Term> terms_;
};

enum class Sense { NegativeDefinite, PositiveDefinite };

/// Symmetric affine constraint F(y) < 0 or F(y) > 0.
struct LmiConstraint {
  std::string name;
  Sense sense = Sense::NegativeDefinite;
  int size = 0;
  MatrixXd F0;
  // full symmetric coefficient entries (both triangles), grouped by variable
  std::vector<std::pair<int, std::vector<Term>>> coeffs;
  bool phase1_slack = true; // participates in the phase-1 margin

  MatrixXd evaluate(const VectorXd& y) const;
};

struct LmiProblem {
  int num_vars = 0;
  std::vector<std::string> var_names;
  VectorXd objective;
  std::vector<LmiConstraint> constraints;

  int add_variable(const std::string& name);
  /// Symmetric n x n matrix variable as an affine expression.
  AffineMatrix symmetric_variable(const std::string& name, int n);
  AffineMatrix full_variable(const std::string& name, int rows, int cols);
  AffineMatrix scalar_variable(const std::string& name);
  /// Adds F < 0 (or > 0); the expression is symmetrized as (F + F^T)/2.
  void add_constraint(const std::string& name, const AffineMatrix& F, Sense sense,
                      bool phase1_slack = true);
  /// Block matrix from upper-triangular blocks; lower blocks are transposes (may be empty).
  static AffineMatrix block(const std::vector<std::vector<AffineMatrix>>& upper,
                            const std::vector<int>& sizes);
  void validate() const;
};

enum class Status { Optimal, Infeasible, NumericalFailure, IterationLimit };
const char* to_string(Status s);

struct SolverOptions {
  int max_iterations = 120;
  double tolerance = 1e-8;     // relative gap and infeasibility
  double margin = 1e-6;        // strict inequalities as F <= -margin I
  double cert_tol = 1e-7;      // certificate gate
  int max_vars = 500;
  int max_block = 100;
  double phase1_box = 1e4;     // |y_i| bound used by the phase-1 problem
  bool run_phase1 = true;
  bool verbose = false;
};

struct CertificateReport {
  std::vector<std::string> names;
  std::vector<double> margins; // sense-adjusted extreme eigenvalue: max eig of F (<0) or of -F (>0)
  bool pass = false;
  int worst = -1;
};

struct LmiSolution {
  Status status = Status::NumericalFailure;
  VectorXd y;
  double objective = 0.0;
  int iterations = 0;
  double gap = 0.0, primal_infeasibility = 0.0, dual_infeasibility = 0.0;
  double phase1_margin = 0.0; // min t with F_j(y) <= t I (only when phase 1 ran)
  CertificateReport certificate;
  std::string message;
};

/// Primal-dual interior point (HKM direction, Mehrotra predictor-corrector).
LmiSolution solve(const LmiProblem& p, const SolverOptions& opt = {});
/// Minimal t such that every phase-1 constraint satisfies F_j(y) <= t I within the phase-1 box.
LmiSolution phase1(const LmiProblem& p, const SolverOptions& opt = {});
/// Independent eigenvalue check of every constraint.
CertificateReport verify(const LmiProblem& p, const VectorXd& y, double tol);

} // namespace mrcie::sdp
