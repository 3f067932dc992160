#pragma once

#include "mrcie/models.hpp"
#include "mrcie/sdp.hpp"
#include "mrcie/sma.hpp"

#include <string>
#include <vector>

namespace mrcie {

/// Diesel plus reduced WTG: states [d_omega_d, d_P_m, d_P_v, d_omega_r].
struct PlantModel {
  Eigen::Matrix4d A_p = Eigen::Matrix4d::Zero();
  Eigen::Vector4d B_p = Eigen::Vector4d::Zero();
  Eigen::Vector4d E_p = Eigen::Vector4d::Zero();
  Eigen::RowVector4d C_p = Eigen::RowVector4d::Zero();
  double D_p = 0.0;
};

PlantModel assemble_plant(const DieselModel& d, const ReducedModel& r);

struct DelayBounds {
  double eta_m = 0.05;
  double kappa = 0.1;
};

/// Plant and reference stacked; x_cl = [x_p; x_r], w_cl = [dP_pom; dP_pom].
struct AugmentedSystem {
  Eigen::Matrix<double, 7, 7> A = Eigen::Matrix<double, 7, 7>::Zero();
  Eigen::Matrix<double, 7, 1> B_tilde = Eigen::Matrix<double, 7, 1>::Zero();
  Eigen::Matrix<double, 7, 2> E = Eigen::Matrix<double, 7, 2>::Zero();
  Eigen::Matrix<double, 1, 7> C = Eigen::Matrix<double, 1, 7>::Zero();
  double D_p = 0.0;
  DelayBounds delays;
};

AugmentedSystem assemble_augmented(const PlantModel& p, const ReferenceModel& ref,
                                   const DelayBounds& delays);

struct SynthesisOptions {
  sdp::SolverOptions solver;
  double gamma_weight = 1.0, ka_weight = 1.0, kb_weight = 1.0;
  // weight the [eta_m, kappa] interval terms by 1/(kappa - eta_m) instead of 1/kappa
  bool interval_weighting = false;
};

/// Variable layout of the synthesis LMI.
struct SynthesisVariables {
  sdp::AffineMatrix gamma, k_a, k_b, P, Q, M1, M2, U1, U2, V1, V2, K;
};

struct SynthesisProblem {
  sdp::LmiProblem lmi;
  SynthesisVariables vars;
  int main_block_size = 0;
};

/// Delay-dependent tracking LMI system; one main block per vertex sharing all variables.
SynthesisProblem build_lmi(const std::vector<AugmentedSystem>& vertices,
                           const SynthesisOptions& opt = {});

struct SynthesisResult {
  sdp::Status status = sdp::Status::NumericalFailure;
  double gamma = 0.0, k_a = 0.0, k_b = 0.0;
  Eigen::Matrix<double, 1, 7> K = Eigen::Matrix<double, 1, 7>::Zero();
  Eigen::Matrix<double, 1, 7> K_bar = Eigen::Matrix<double, 1, 7>::Zero();
  MatrixXd P, Q, M1, M2, U1, U2, V1, V2;
  sdp::CertificateReport certificate;
  int iterations = 0;
  int vertices = 1;
  int num_vars = 0;
  int main_block_size = 0;
  double phase1_margin = 0.0;
  double seconds = 0.0;
  std::string message;
  DelayBounds delays;

  Eigen::RowVector4d K_p() const { return K.head<4>(); }
  Eigen::RowVector3d K_r() const { return K.tail<3>(); }
  double tracking_bound() const;
  bool ok() const { return status == sdp::Status::Optimal; }
};

SynthesisResult synthesize(const AugmentedSystem& aug, const SynthesisOptions& opt = {});
SynthesisResult synthesize_robust(const std::vector<AugmentedSystem>& vertices,
                                  const SynthesisOptions& opt = {});

struct Interval {
  double lo = 0.0; // relative decrease, e.g. 0.5 for -50 %
  double hi = 0.0; // relative increase
};

struct PolytopeSpec {
  Interval H_D, tau_d, tau_sm;
  double delta_fraction = 0.0; // joint corner on (B_rd, D_rd)

  int uncertain_count() const;
};

std::vector<PlantModel> enumerate_vertices(const DieselModel& d, const ReducedModel& r,
                                           const PolytopeSpec& spec);
/// Diesel models at the polytope corners (same order as enumerate_vertices before the delta split).
std::vector<DieselModel> diesel_corners(const DieselModel& d, const PolytopeSpec& spec);

/// Greedy probe for a small jointly infeasible vertex subset (indices).
std::vector<int> infeasible_vertex_subset(const std::vector<AugmentedSystem>& vertices,
                                          const SynthesisOptions& opt = {});

} // namespace mrcie
