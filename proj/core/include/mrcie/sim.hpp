#pragma once

#include "mrcie/equilibrium.hpp"
#include "mrcie/sma.hpp"
#include "mrcie/synthesis.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mrcie {

enum class Fidelity { Nonlinear, Linear10, Reduced1 };
enum class DelayPolicy { Worst, Min, Random, None };

const char* to_string(Fidelity f);
const char* to_string(DelayPolicy p);
Fidelity parse_fidelity(const std::string& s);
DelayPolicy parse_delay_policy(const std::string& s);

/// Uniform-grid signal table.
struct Trajectory {
  std::vector<std::string> columns; // first column is "t"
  MatrixXd data;                    // rows = samples

  int samples() const { return static_cast<int>(data.rows()); }
  int index(const std::string& name) const;
  bool has(const std::string& name) const;
  VectorXd col(const std::string& name) const;
  VectorXd time() const { return data.col(0); }
  double dt() const;
  void validate() const;
};

/// Everything the simulator needs about one wind unit, at every fidelity.
struct WtgPlant {
  DfigModel model; // turbine scale already calibrated
  DfigOperatingPoint op;
  LinearStateSpace linear;
  ReducedModel reduced;
};

WtgPlant build_wtg_plant(const DfigModel& m, const EquilibriumTargets& t = {}, double delta_fraction = 0.1);

struct ControllerSpec {
  enum class Kind { None, Mrc, Washout } kind = Kind::None;
  Eigen::Matrix<double, 1, 7> K = Eigen::Matrix<double, 1, 7>::Zero();
  double K_ie = 0.0; // washout gain
  double T_w = 0.01; // washout time constant [s]
};

enum class UieSplit { Broadcast, Divided };

/// One reference model with its diesel and wind units.
struct MrcGroup {
  std::string name = "group";
  DieselModel diesel;
  ReferenceModel reference;
  int num_wtgs = 1;
  ControllerSpec controller;
  std::string pom_bus;
  std::vector<std::string> inner_buses; // between the POM and the units: not seen by the POM
  double load_share = -1.0;             // negative: equal split over groups
  UieSplit split = UieSplit::Broadcast;

  bool measures(const std::string& bus) const;
};

struct Disturbance {
  double time = 1.0;
  double magnitude = 0.1; // [p.u.] load increase
  std::string bus;
};

struct DelaySettings {
  DelayPolicy policy = DelayPolicy::Worst;
  DelayBounds bounds;
  double resample_interval = 0.05; // random policy
  std::uint64_t seed = 1;
};

struct Scenario {
  std::string name = "scenario";
  int config_id = 0;
  WtgPlant wtg;
  std::vector<MrcGroup> groups;
  std::vector<Disturbance> disturbances;
  Fidelity fidelity = Fidelity::Nonlinear;
  DelaySettings delay;
  double duration = 10.0;
  double max_step = 1e-3;
  double sample_rate = 1000.0;
  double rtol = 1e-7, atol = 1e-10;

  void validate() const;
};

Trajectory simulate(const Scenario& s);

/// Column names of group g (0-based) in simulate() output.
std::string column(const std::string& base, int group);

// ---------------------------------------------------------------------------
// delay buffer

class DelayLine {
public:
  DelayLine(const DelaySettings& d, double horizon);
  /// Delay applied at time t.
  double nu(double t) const;
  void push(double t, double v);
  /// Linear interpolation of the stored signal at t - nu(t); zero before the first sample.
  double delayed(double t) const;
  double at(double t) const;
  double min_delay() const;

private:
  DelaySettings d_;
  std::vector<double> random_;
  std::vector<double> ts_, vs_;
};

// ---------------------------------------------------------------------------
// open-loop WTG response (fidelity comparison)

struct OpenLoopInput {
  enum class Kind { Step, Washout } kind = Kind::Step;
  double amplitude = -0.01; // [p.u.] speed-reference offset
  double t0 = 0.5;
  double tau = 1.0; // decay of the washout-shaped pulse
  double value(double t) const;
};

Trajectory simulate_wtg_open_loop(const WtgPlant& w, Fidelity f, const OpenLoopInput& in,
                                  double duration = 5.0, double sample_rate = 1000.0);

struct FidelityComparison {
  Trajectory nonlinear, linear10, reduced1;
};

FidelityComparison simulate_fidelity_comparison(const WtgPlant& w, const OpenLoopInput& in,
                                                double duration = 5.0);

/// Parallel aggregation of reduced WTG models on the unit base.
ReducedModel aggregate_wtgs(const std::vector<ReducedModel>& units, const std::vector<double>& bases);

// ---------------------------------------------------------------------------
// adaptive Dormand-Prince 5(4)

struct OdeOptions {
  double rtol = 1e-7, atol = 1e-10;
  double max_step = 1e-3;
  double min_step = 1e-10;
  int max_steps = 10000000;
};

using OdeRhs = std::function<void(double, const VectorXd&, VectorXd&)>;
using OdeAccept = std::function<void(double, const VectorXd&)>;

/// Integrates from t0 to t1 landing exactly on t1; calls on_accept after every accepted step.
/// Returns the number of accepted steps.
int integrate(const OdeRhs& f, double t0, double t1, VectorXd& x, const OdeOptions& opt,
              const OdeAccept& on_accept = {});

} // namespace mrcie
