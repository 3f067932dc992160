#pragma once

#include "mrcie/sim.hpp"

#include <string>

namespace mrcie {

/// Savitzky-Golay style derivative: local quadratic over `width` samples (odd, >= 3).
VectorXd sg_derivative(const VectorXd& y, double dt, int width = 51);

struct InertiaFit {
  bool identifiable = false;
  double H_ie = 0.0;
  double residual = 0.0; // RMS of the fit residual over RMS of dP_g
  double t_start = 0.0, window = 2.0;
  std::string message;
};

/// Least squares dP_g = -2 H_ie d(domega_d)/dt over [t_start, t_start + window].
/// Generation and frequency deviations are both positive-up, so an inertial injection
/// opposes the frequency slope.
InertiaFit fit_emulated_inertia(const Trajectory& tr, double t_start, double window = 2.0, int group = 0,
                                int sg_width = 51);

struct FrequencyMetrics {
  double nadir = 0.0;      // [Hz]
  double t_nadir = 0.0;    // [s]
  double max_rocof = 0.0;  // [Hz/s]
  double steady_state = 0.0; // mean deviation over the final 10 % [Hz]
};

FrequencyMetrics frequency_metrics(const Trajectory& tr, int group = 0, double f_bar = 60.0,
                                   double rocof_window = 0.1);

struct TrackingMetrics {
  double rms = 0.0;  // [Hz]
  double peak = 0.0; // [Hz]
  double ratio = 0.0; // ||e||_2 / ||w_cl||_2 with e in Hz, w_cl = [dP_pom; dP_pom]
};

TrackingMetrics tracking_metrics(const Trajectory& tr, int group = 0, double f_bar = 60.0, double t_from = 0.0);

struct ScenarioReport {
  std::string name;
  int groups = 1;
  FrequencyMetrics freq;    // worst group
  TrackingMetrics tracking; // worst group
  InertiaFit inertia;       // group 0
  double gamma_bound = 0.0; // sqrt(gamma) when an MRC controller is present
  bool bound_ok = true;
  double peak_dP_g_unit = 0.0; // max |dP_g| per WTG [p.u.]
};

ScenarioReport make_report(const std::string& name, const Trajectory& tr, double t_dist, double f_bar = 60.0,
                           double sqrt_gamma = 0.0, double fit_window = 2.0);

// ---------------------------------------------------------------------------
// frequency-domain gains

struct HinfResult {
  double norm = 0.0;
  double omega = 0.0; // frequency of the peak (approximate)
  int iterations = 0;
  bool widened = false;
  std::string message;
};

/// H-infinity norm of a stable (A, B, C, D) by bisection on the Hamiltonian spectrum.
HinfResult hinf_norm(const MatrixXd& A, const MatrixXd& B, const MatrixXd& C, const MatrixXd& D,
                     double rel_tol = 1e-9);

struct GainGrid {
  double max_gain = 0.0;
  double omega = 0.0;
  int points = 0;
  double decade_step = 0.0; // log10 spacing
  bool stable = true;        // closed loop with the delay (Pade check); the gain is meaningless otherwise
};

/// Stability of x' = A x + B K x(t - tau) with the delay replaced by order/2 cascaded [2/2] Pade sections.
bool delayed_stable(const MatrixXd& A, const MatrixXd& B, const MatrixXd& K, double tau, int order = 8);

/// sup over a log grid of sigma_max(C (jwI - A - B K e^{-jw tau})^-1 E).
GainGrid delayed_gain_grid(const MatrixXd& A, const MatrixXd& B, const MatrixXd& K, const MatrixXd& C,
                           const MatrixXd& E, double tau, double w_min = 1e-3, double w_max = 1e3,
                           int points = 4000);

/// Closed-loop H-infinity check of a synthesized controller on the augmented system.
/// Delay-free: Hamiltonian bisection on A + B K. Otherwise: gain grid with e^{-jw kappa}.
GainGrid tracking_gain_estimate(const AugmentedSystem& aug, const Eigen::Matrix<double, 1, 7>& K, double tau,
                                int points = 4000);

} // namespace mrcie
