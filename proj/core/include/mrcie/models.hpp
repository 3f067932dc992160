#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mrcie {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Governor, engine and swing dynamics of a diesel generator.
struct DieselModel {
  double H_D = 1.0;     // inertia constant [s]
  double tau_d = 0.2;   // engine time constant [s]
  double tau_sm = 0.1;  // governor time constant [s]
  double R_D = 0.05;    // droop [p.u.]
  double f_bar = 60.0;  // speed base [Hz]
  double rated_power = 2.0; // [MW]

  void validate() const;
};

/// Frequency response model with the desired (scheduled) inertia.
struct ReferenceModel {
  double H_hat = 3.0;
  double tau_d_hat = 0.2;
  double tau_sm_hat = 0.1;
  double R_hat = 0.05;
  double D_hat = 0.0;
  double f_bar = 60.0;

  void validate() const;
};

/// Rotor power-coefficient curve, beta = 0.
/// Cp = c1 (c2/li - c5) exp(-c6/li) + c7 lambda, 1/li = 1/lambda - c8.
struct TurbineCurve {
  double c1 = 0.5176, c2 = 116.0, c5 = 5.0, c6 = 21.0, c7 = 0.0068, c8 = 0.035;
  double lambda_gain = 66.0; // tip-speed ratio at 1 p.u. speed and 1 m/s wind
  double rated_wind = 12.0;  // [m/s]
  double power_scale = 1.0;  // p.u. mechanical power per unit Cp at rated wind

  double cp(double lambda) const;
  /// Mechanical torque in the motor convention (negative when driving).
  double torque(double omega_r, double wind) const;
};

struct DfigModel {
  double R_s = 0.023, R_r = 0.016;
  double L_ls = 0.18, L_lr = 0.16, L_m = 2.9;
  double H_T = 4.0;
  double omega_bar = 377.0;
  double K_PT = 2.0, K_IT = 0.1;
  double K_PQ = 1.0, K_IQ = 5.0;
  double K_PC = 0.6, K_IC = 8.0;
  double omega_c = 0.001;
  double eta = 1.0 / 1.1;
  double S_base = 1.1;   // [MVA]
  double V_base = 575.0; // [V]
  TurbineCurve turbine;

  double L_s() const { return L_ls + L_m; }
  double L_r() const { return L_lr + L_m; }
  double sigma() const { return (L_r() - L_m * L_m / L_s()) / L_r(); }
  void validate() const;
};

namespace dfig {
constexpr int kStates = 10;
constexpr int kAlg = 10;
// state indices
enum S : int { psi_qs, psi_ds, psi_qr, psi_dr, omega_r, omega_f, x1, x2, x3, x4 };
// algebraic indices
enum A : int { i_qs, i_ds, i_qr, i_dr, v_qr, v_dr, P_g, Q_g, i_qr_ref, i_dr_ref };
const std::vector<std::string>& state_labels();
const std::vector<std::string>& algebraic_labels();
} // namespace dfig

using DfigState = Eigen::Matrix<double, dfig::kStates, 1>;
using DfigAlgebraic = Eigen::Matrix<double, dfig::kAlg, 1>;

struct DfigInputs {
  double u_ie = 0.0;
  double Q_g_star = 0.0;
  double v_qs = 1.0;
  double v_ds = 0.0;
  double omega_s = 1.0;
  double wind_speed = 10.0;
};

struct DfigResidual {
  DfigState dx;
  DfigAlgebraic g;
  double T_e = 0.0;
  double T_m = 0.0;
  bool speed_in_range = true;
};

/// Carrier for (A, B, E, C, D, F) with axis labels.
struct LinearStateSpace {
  MatrixXd A, B, E, C, D, F;
  std::vector<std::string> states, inputs, disturbances, outputs;

  int n() const { return static_cast<int>(A.rows()); }
  void validate() const;
};

LinearStateSpace diesel_state_space(const DieselModel& m);
LinearStateSpace reference_state_space(const ReferenceModel& m);

/// Stator flux magnitude.
double stator_flux(const DfigState& s);
double electromagnetic_torque(const DfigModel& m, const DfigState& s, const DfigAlgebraic& a);
DfigResidual dfig_residual(const DfigState& s, const DfigAlgebraic& a, const DfigInputs& in,
                           const DfigModel& m);
/// Currents from fluxes via the inverse inductance matrix: [iqs, ids, iqr, idr].
Eigen::Vector4d flux_to_current(const DfigModel& m, const Eigen::Vector4d& psi);
double mppt_speed(double P_g, double eta);
double mppt_speed_raw(double P_g, double eta);

} // namespace mrcie
