#include "mrcie/models.hpp"

#include "mrcie/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mrcie {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ValidationError(std::string(name) + " must be positive (got " + std::to_string(v) + ")");
}

} // namespace

void DieselModel::validate() const {
  require_positive(H_D, "H_D");
  require_positive(tau_d, "tau_d");
  require_positive(tau_sm, "tau_sm");
  require_positive(R_D, "R_D");
  require_positive(f_bar, "f_bar");
}

void ReferenceModel::validate() const {
  require_positive(H_hat, "H_hat");
  require_positive(tau_d_hat, "tau_d_hat");
  require_positive(tau_sm_hat, "tau_sm_hat");
  require_positive(R_hat, "R_hat");
  require_positive(f_bar, "f_bar");
  if (D_hat < 0.0) throw ValidationError("D_hat must be nonnegative");
}

void DfigModel::validate() const {
  require_positive(R_s, "R_s");
  require_positive(R_r, "R_r");
  require_positive(L_ls, "L_ls");
  require_positive(L_lr, "L_lr");
  require_positive(L_m, "L_m");
  require_positive(H_T, "H_T");
  require_positive(omega_bar, "omega_bar");
  require_positive(K_PT, "K_PT");
  require_positive(K_IT, "K_IT");
  require_positive(K_PQ, "K_PQ");
  require_positive(K_IQ, "K_IQ");
  require_positive(K_PC, "K_PC");
  require_positive(K_IC, "K_IC");
  require_positive(omega_c, "omega_c");
  require_positive(eta, "eta");
  double s = sigma();
  if (!(s > 0.0 && s < 1.0))
    throw ValidationError("leakage coefficient sigma outside (0,1): nonphysical inductances");
}

double TurbineCurve::cp(double lambda) const {
  double inv_li = 1.0 / lambda - c8;
  return c1 * (c2 * inv_li - c5) * std::exp(-c6 * inv_li) + c7 * lambda;
}

double TurbineCurve::torque(double omega_r, double wind) const {
  if (wind <= 0.0 || power_scale == 0.0) return 0.0;
  double lambda = lambda_gain * omega_r / wind;
  double v = wind / rated_wind;
  return -power_scale * cp(lambda) * v * v * v / omega_r;
}

namespace dfig {
const std::vector<std::string>& state_labels() {
  static const std::vector<std::string> l{"psi_qs", "psi_ds", "psi_qr", "psi_dr", "omega_r",
                                          "omega_f_star", "x1", "x2", "x3", "x4"};
  return l;
}
const std::vector<std::string>& algebraic_labels() {
  static const std::vector<std::string> l{"i_qs", "i_ds", "i_qr", "i_dr", "v_qr",
                                          "v_dr", "P_g", "Q_g", "i_qr_star", "i_dr_star"};
  return l;
}
} // namespace dfig

void LinearStateSpace::validate() const {
  const auto n = A.rows();
  if (A.cols() != n) throw ValidationError("A must be square");
  if (B.rows() != n || E.rows() != n || C.cols() != n)
    throw ValidationError("state dimension mismatch in state-space model");
  if (D.rows() != C.rows() || F.rows() != C.rows() || D.cols() != B.cols() || F.cols() != E.cols())
    throw ValidationError("output dimension mismatch in state-space model");
  auto check = [](const std::vector<std::string>& l, Eigen::Index size, const char* what) {
    if (!l.empty() && static_cast<Eigen::Index>(l.size()) != size)
      throw ValidationError(std::string(what) + " label count mismatch");
    std::set<std::string> u(l.begin(), l.end());
    if (u.size() != l.size()) throw ValidationError(std::string(what) + " labels not unique");
  };
  check(states, n, "state");
  check(inputs, B.cols(), "input");
  check(disturbances, E.cols(), "disturbance");
  check(outputs, C.rows(), "output");
}

LinearStateSpace diesel_state_space(const DieselModel& m) {
  m.validate();
  const double f = m.f_bar;
  LinearStateSpace ss;
  ss.A = MatrixXd::Zero(3, 3);
  ss.A(0, 1) = f / (2.0 * m.H_D);
  ss.A(1, 1) = -1.0 / m.tau_d;
  ss.A(1, 2) = 1.0 / m.tau_d;
  ss.A(2, 0) = -1.0 / (f * m.tau_sm * m.R_D);
  ss.A(2, 2) = -1.0 / m.tau_sm;
  ss.B = MatrixXd::Zero(3, 0);
  ss.E = MatrixXd::Zero(3, 1);
  ss.E(0, 0) = -f / (2.0 * m.H_D);
  ss.C = MatrixXd::Zero(1, 3);
  ss.C(0, 0) = 1.0;
  ss.D = MatrixXd::Zero(1, 0);
  ss.F = MatrixXd::Zero(1, 1);
  ss.states = {"d_omega_d", "d_P_m", "d_P_v"};
  ss.disturbances = {"d_P_e"};
  ss.outputs = {"d_omega_d"};
  return ss;
}

LinearStateSpace reference_state_space(const ReferenceModel& m) {
  m.validate();
  const double f = m.f_bar;
  LinearStateSpace ss;
  ss.A = MatrixXd::Zero(3, 3);
  ss.A(0, 0) = -f * m.D_hat / (2.0 * m.H_hat);
  ss.A(0, 1) = f / (2.0 * m.H_hat);
  ss.A(1, 1) = -1.0 / m.tau_d_hat;
  ss.A(1, 2) = 1.0 / m.tau_d_hat;
  ss.A(2, 0) = -1.0 / (f * m.tau_sm_hat * m.R_hat);
  ss.A(2, 2) = -1.0 / m.tau_sm_hat;
  ss.B = MatrixXd::Zero(3, 0);
  ss.E = MatrixXd::Zero(3, 1);
  ss.E(0, 0) = -f / (2.0 * m.H_hat);
  ss.C = MatrixXd::Zero(1, 3);
  ss.C(0, 0) = 1.0;
  ss.D = MatrixXd::Zero(1, 0);
  ss.F = MatrixXd::Zero(1, 1);
  ss.states = {"d_omega_hat", "d_P_m_hat", "d_P_v_hat"};
  ss.disturbances = {"d_P_pom"};
  ss.outputs = {"d_omega_hat"};
  return ss;
}

double stator_flux(const DfigState& s) { return std::hypot(s[dfig::psi_qs], s[dfig::psi_ds]); }

double electromagnetic_torque(const DfigModel& m, const DfigState& s, const DfigAlgebraic& a) {
  return m.L_m / m.L_s() * (s[dfig::psi_qs] * a[dfig::i_dr] - s[dfig::psi_ds] * a[dfig::i_qr]);
}

Eigen::Vector4d flux_to_current(const DfigModel& m, const Eigen::Vector4d& psi) {
  const double Ls = m.L_s(), Lr = m.L_r(), Lm = m.L_m;
  const double det = Ls * Lr - Lm * Lm;
  Eigen::Vector4d i;
  i[0] = (Lr * psi[0] - Lm * psi[2]) / det;
  i[1] = (Lr * psi[1] - Lm * psi[3]) / det;
  i[2] = (Ls * psi[2] - Lm * psi[0]) / det;
  i[3] = (Ls * psi[3] - Lm * psi[1]) / det;
  return i;
}

double mppt_speed_raw(double P_g, double eta) {
  const double p = eta * P_g;
  return -0.67 * p * p + 1.42 * p + 0.51;
}

double mppt_speed(double P_g, double eta) {
  double w = mppt_speed_raw(P_g, eta);
  return std::clamp(w, 0.8, 1.2);
}

DfigResidual dfig_residual(const DfigState& s, const DfigAlgebraic& a, const DfigInputs& in,
                           const DfigModel& m) {
  using namespace dfig;
  const double Ls = m.L_s(), Lr = m.L_r(), Lm = m.L_m;
  const double sLr = Lr - Lm * Lm / Ls;
  const double wb = m.omega_bar, ws = in.omega_s;
  const double wr = s[omega_r];
  const double psi = stator_flux(s);

  DfigResidual r;
  r.T_e = electromagnetic_torque(m, s, a);
  r.T_m = m.turbine.torque(wr, in.wind_speed);
  r.speed_in_range = wr >= 0.5 && wr <= 1.5;

  const double speed_err = s[omega_f] - wr + in.u_ie;
  const double q_err = in.Q_g_star - a[Q_g];
  const double slip = ws - wr;

  r.dx[psi_qs] = wb * (in.v_qs - m.R_s * a[i_qs] - ws * s[psi_ds]);
  r.dx[psi_ds] = wb * (in.v_ds - m.R_s * a[i_ds] + ws * s[psi_qs]);
  r.dx[psi_qr] = wb * (a[v_qr] - m.R_r * a[i_qr] - slip * s[psi_dr]);
  r.dx[psi_dr] = wb * (a[v_dr] - m.R_r * a[i_dr] + slip * s[psi_qr]);
  r.dx[omega_r] = (r.T_e - r.T_m) / (2.0 * m.H_T);
  r.dx[omega_f] = m.omega_c * (mppt_speed(a[P_g], m.eta) - s[omega_f]);
  r.dx[x1] = m.K_IT * speed_err;
  r.dx[x2] = m.K_IQ * q_err;
  r.dx[x3] = m.K_IC * (a[i_qr_ref] - a[i_qr]);
  r.dx[x4] = m.K_IC * (a[i_dr_ref] - a[i_dr]);

  r.g[0] = -s[psi_qs] + Ls * a[i_qs] + Lm * a[i_qr];
  r.g[1] = -s[psi_ds] + Ls * a[i_ds] + Lm * a[i_dr];
  r.g[2] = -s[psi_qr] + Lr * a[i_qr] + Lm * a[i_qs];
  r.g[3] = -s[psi_dr] + Lr * a[i_dr] + Lm * a[i_ds];
  r.g[4] = a[P_g] + (in.v_qs * a[i_qs] + in.v_ds * a[i_ds]) + (a[v_qr] * a[i_qr] + a[v_dr] * a[i_dr]);
  r.g[5] = a[Q_g] + (in.v_qs * a[i_ds] - in.v_ds * a[i_qs]) + (a[v_qr] * a[i_dr] - a[v_dr] * a[i_qr]);
  r.g[6] = -a[v_qr] + s[x3] + m.K_PC * (a[i_qr_ref] - a[i_qr]) +
           slip * (sLr * a[i_dr] + psi * Lm / Ls);
  r.g[7] = -a[v_dr] + s[x4] + m.K_PC * (a[i_dr_ref] - a[i_dr]) - slip * sLr * a[i_qr];
  r.g[8] = -a[i_qr_ref] - Ls / (Lm * psi) * (s[x1] + m.K_PT * speed_err);
  r.g[9] = -a[i_dr_ref] + s[x2] + m.K_PQ * q_err;
  return r;
}

} // namespace mrcie
