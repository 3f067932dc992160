#pragma once

#include "mrcie/equilibrium.hpp"

#include <string>

namespace mrcie {

/// Permuted partition of (A, B, C) with the relevant state first.
struct SmaPartition {
  int relevant = 0;
  std::vector<int> less_relevant; // original indices of the z block
  double A11 = 0.0;
  Eigen::RowVectorXd A12;
  VectorXd A21;
  MatrixXd A22;
  double B_r = 0.0;
  VectorXd B_z;
  double C_r = 0.0;
  Eigen::RowVectorXd C_z;
  double D = 0.0;

  /// Reassemble the original-order (A, B, C).
  void reassemble(MatrixXd& A, VectorXd& B, Eigen::RowVectorXd& C) const;
};

struct ReducedModel {
  double A_rd = 0.0, B_rd = 0.0, C_rd = 0.0, D_rd = 0.0;
  double lambda_r = 0.0;
  VectorXd delta_nominal;   // (-A22)^-1 B_z
  double delta_fraction = 0.10;
  // sensitivities of B_rd, D_rd to a relative delta on M: B_rd(s) = B_rd + s*b_shift
  double b_shift = 0.0, d_shift = 0.0;

  /// Model with M = (1 + s) (-A22)^-1 B_z, s in [-delta_fraction, delta_fraction].
  ReducedModel with_delta(double s) const;
  void validate() const;
};

SmaPartition partition(const LinearStateSpace& ss, const std::string& relevant);

struct RelevantMode {
  double lambda_r = 0.0;
  int mode_index = 0;
  double participation = 0.0;
  bool tie = false;
};

RelevantMode select_relevant_mode(const ModalAnalysis& ma, int state_index);
RelevantMode select_relevant_mode(const ModalAnalysis& ma, const LinearStateSpace& ss,
                                  const std::string& state);

ReducedModel reduce(const SmaPartition& parts, double lambda_r, double delta_fraction = 0.10);

/// Largest real part among eigenvalues of A22 (time-scale diagnostics).
double max_real_eig(const MatrixXd& A);

} // namespace mrcie
