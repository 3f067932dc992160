#pragma once

#include "mrcie/models.hpp"

#include <complex>

namespace mrcie {

struct EquilibriumTargets {
  double P_g = 0.8;
  double Q_g = 0.0;
  double v_qs = 1.0;
  double v_ds = 0.0;
  double omega_s = 1.0;
  double wind_speed = 10.0;
};

struct DfigOperatingPoint {
  DfigState state = DfigState::Zero();
  DfigAlgebraic algebraic = DfigAlgebraic::Zero();
  DfigInputs inputs;
  double turbine_scale = 0.0; // calibrated power_scale of the turbine curve
  double T_e = 0.0, T_m = 0.0;
  int iterations = 0;
  double residual = 0.0;

  /// Model with the turbine scale calibrated to this point.
  DfigModel calibrated(const DfigModel& m) const;
};

struct EquilibriumOptions {
  int max_iterations = 50;
  double tolerance = 1e-12;
};

/// Newton solve of {derivatives = 0, residuals = 0, P_g = target} with the turbine scale as unknown.
DfigOperatingPoint solve_equilibrium(const DfigModel& m, const EquilibriumTargets& t,
                                     const EquilibriumOptions& opt = {});

struct LinearizeOptions {
  double rel_step = 1e-6; // central-difference step relative to max(1, |v|)
};

/// Index-1 reduction of the DAE Jacobians: 10 states, input u_ie, output dP_g.
LinearStateSpace linearize(const DfigModel& m, const DfigOperatingPoint& op,
                           const LinearizeOptions& opt = {});

/// Largest relative entry change of A, B, C, D when the finite-difference step is halved.
double linearization_step_sensitivity(const DfigModel& m, const DfigOperatingPoint& op,
                                      double rel_step = 1e-6);

struct ModalAnalysis {
  Eigen::VectorXcd eigenvalues;  // sorted by |Re| ascending
  Eigen::MatrixXcd right;        // columns
  Eigen::MatrixXcd left;         // columns, w_i^T v_i = 1
  Eigen::MatrixXd participation; // rows: states, columns: modes
};

ModalAnalysis modal_analysis(const MatrixXd& A);

} // namespace mrcie
