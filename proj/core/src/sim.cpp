#include "mrcie/sim.hpp"

#include "mrcie/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace mrcie {

const char* to_string(Fidelity f) {
  switch (f) {
  case Fidelity::Nonlinear: return "nonlinear";
  case Fidelity::Linear10: return "linear10";
  case Fidelity::Reduced1: return "reduced1";
  }
  return "?";
}

const char* to_string(DelayPolicy p) {
  switch (p) {
  case DelayPolicy::Worst: return "worst";
  case DelayPolicy::Min: return "min";
  case DelayPolicy::Random: return "random";
  case DelayPolicy::None: return "none";
  }
  return "?";
}

Fidelity parse_fidelity(const std::string& s) {
  if (s == "nonlinear") return Fidelity::Nonlinear;
  if (s == "linear10") return Fidelity::Linear10;
  if (s == "reduced1") return Fidelity::Reduced1;
  throw ValidationError("unknown fidelity '" + s + "' (nonlinear|linear10|reduced1)");
}

DelayPolicy parse_delay_policy(const std::string& s) {
  if (s == "worst") return DelayPolicy::Worst;
  if (s == "min") return DelayPolicy::Min;
  if (s == "random") return DelayPolicy::Random;
  if (s == "none") return DelayPolicy::None;
  throw ValidationError("unknown delay policy '" + s + "' (worst|min|random|none)");
}

// ---------------------------------------------------------------------------

int Trajectory::index(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ValidationError("trajectory has no column '" + name + "'");
  return static_cast<int>(it - columns.begin());
}

bool Trajectory::has(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

VectorXd Trajectory::col(const std::string& name) const { return data.col(index(name)); }

double Trajectory::dt() const {
  if (data.rows() < 2) return 0.0;
  return (data(data.rows() - 1, 0) - data(0, 0)) / static_cast<double>(data.rows() - 1);
}

void Trajectory::validate() const {
  if (columns.empty() || columns.front() != "t") throw ValidationError("trajectory must start with a 't' column");
  if (data.cols() != static_cast<int>(columns.size())) throw ValidationError("trajectory column count mismatch");
  std::set<std::string> seen(columns.begin(), columns.end());
  if (seen.size() != columns.size()) throw ValidationError("trajectory column names must be unique");
  if (!data.allFinite()) throw NumericError("trajectory contains NaN or Inf");
  for (int i = 1; i < data.rows(); ++i)
    if (!(data(i, 0) > data(i - 1, 0))) throw ValidationError("trajectory time is not strictly increasing");
}

// ---------------------------------------------------------------------------

WtgPlant build_wtg_plant(const DfigModel& m, const EquilibriumTargets& t, double delta_fraction) {
  WtgPlant w;
  w.op = solve_equilibrium(m, t);
  w.model = w.op.calibrated(m);
  w.linear = linearize(m, w.op);
  auto ma = modal_analysis(w.linear.A);
  auto rm = select_relevant_mode(ma, w.linear, "omega_r");
  w.reduced = reduce(partition(w.linear, "omega_r"), rm.lambda_r, delta_fraction);
  return w;
}

bool MrcGroup::measures(const std::string& bus) const {
  return std::find(inner_buses.begin(), inner_buses.end(), bus) == inner_buses.end();
}

void Scenario::validate() const {
  if (groups.empty()) throw ValidationError("scenario needs at least one group");
  std::set<std::string> names;
  for (const auto& g : groups) {
    if (g.pom_bus.empty())
      throw ValidationError("group '" + g.name + "' has no POM; every MRC group needs exactly one POM");
    if (!names.insert(g.name).second) throw ValidationError("duplicate group name '" + g.name + "'");
    if (g.num_wtgs < 1) throw ValidationError("group '" + g.name + "' needs at least one WTG");
    g.diesel.validate();
    g.reference.validate();
    if (g.controller.kind == ControllerSpec::Kind::Washout && !(g.controller.T_w > 0.0))
      throw ValidationError("washout time constant must be > 0");
    if (!g.controller.K.allFinite()) throw ValidationError("controller gain is not finite");
  }
  for (const auto& d : disturbances) {
    if (!(d.time >= 0.0) || d.time > duration) throw ValidationError("disturbance time outside the horizon");
    if (!std::isfinite(d.magnitude)) throw ValidationError("disturbance magnitude must be finite");
  }
  if (!(duration > 0.0)) throw ValidationError("duration must be > 0");
  if (!(sample_rate > 0.0)) throw ValidationError("sample_rate must be > 0");
  if (!(max_step > 0.0)) throw ValidationError("max_step must be > 0");
  if (delay.bounds.eta_m < 0.0 || delay.bounds.eta_m > delay.bounds.kappa)
    throw ValidationError("delay bounds must satisfy 0 <= eta_m <= kappa");
  if (delay.policy == DelayPolicy::Random && !(delay.resample_interval > 0.0))
    throw ValidationError("random delay policy needs resample_interval > 0");
}

std::string column(const std::string& base, int group) {
  return group == 0 ? base : base + "_" + std::to_string(group + 1);
}

// ---------------------------------------------------------------------------
// delay line

DelayLine::DelayLine(const DelaySettings& d, double horizon) : d_(d) {
  if (d.policy == DelayPolicy::Random) {
    std::mt19937_64 rng(d.seed);
    std::uniform_real_distribution<double> U(d.bounds.eta_m, d.bounds.kappa);
    const int n = static_cast<int>(std::ceil(horizon / d.resample_interval)) + 2;
    random_.resize(n);
    for (auto& v : random_) v = U(rng);
  }
}

double DelayLine::nu(double t) const {
  switch (d_.policy) {
  case DelayPolicy::Worst: return d_.bounds.kappa;
  case DelayPolicy::Min: return d_.bounds.eta_m;
  case DelayPolicy::None: return 0.0;
  case DelayPolicy::Random: {
    int k = static_cast<int>(std::floor(t / d_.resample_interval + 1e-9));
    k = std::clamp(k, 0, static_cast<int>(random_.size()) - 1);
    return random_[k];
  }
  }
  return 0.0;
}

double DelayLine::min_delay() const {
  switch (d_.policy) {
  case DelayPolicy::Worst: return d_.bounds.kappa;
  case DelayPolicy::None: return 0.0;
  default: return d_.bounds.eta_m;
  }
}

void DelayLine::push(double t, double v) {
  if (!ts_.empty() && t <= ts_.back()) {
    if (t == ts_.back()) vs_.back() = v;
    return;
  }
  ts_.push_back(t);
  vs_.push_back(v);
}

double DelayLine::at(double tq) const {
  if (ts_.empty() || tq < ts_.front()) return 0.0;
  if (tq >= ts_.back()) return vs_.back();
  auto it = std::upper_bound(ts_.begin(), ts_.end(), tq);
  const size_t i = static_cast<size_t>(it - ts_.begin());
  const double a = (tq - ts_[i - 1]) / (ts_[i] - ts_[i - 1]);
  return (1.0 - a) * vs_[i - 1] + a * vs_[i];
}

double DelayLine::delayed(double t) const { return at(t - nu(t)); }

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4)

int integrate(const OdeRhs& f, double t0, double t1, VectorXd& x, const OdeOptions& opt,
              const OdeAccept& on_accept) {
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                      a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                      e6 = 22.0 / 525, e7 = -1.0 / 40;
  const int n = static_cast<int>(x.size());
  if (t1 <= t0) return 0;
  VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), xt(n), xn(n), err(n);
  double t = t0;
  double h = std::min(opt.max_step, t1 - t0);
  f(t, x, k1);
  int steps = 0;
  while (t < t1) {
    if (steps >= opt.max_steps) throw NumericError("integrator exceeded the step budget");
    bool last = false;
    if (t + h >= t1 - 1e-12 * std::max(1.0, std::abs(t1))) {
      h = t1 - t;
      last = true;
    }
    xt = x + h * a21 * k1;
    f(t + c2 * h, xt, k2);
    xt = x + h * (a31 * k1 + a32 * k2);
    f(t + c3 * h, xt, k3);
    xt = x + h * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * h, xt, k4);
    xt = x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * h, xt, k5);
    xt = x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + h, xt, k6);
    xn = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    f(t + h, xn, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double en = 0.0;
    for (int i = 0; i < n; ++i) {
      const double sc = opt.atol + opt.rtol * std::max(std::abs(x[i]), std::abs(xn[i]));
      en += (err[i] / sc) * (err[i] / sc);
    }
    en = n ? std::sqrt(en / n) : 0.0;
    if (!std::isfinite(en)) en = 1e10;
    if (en <= 1.0) {
      t = last ? t1 : t + h;
      x = xn;
      k1 = k7;
      ++steps;
      if (on_accept) on_accept(t, x);
    }
    const double fac = en > 0.0 ? 0.9 * std::pow(en, -0.2) : 5.0;
    h = std::min(opt.max_step, h * std::clamp(fac, 0.2, 5.0));
    if (h < opt.min_step) {
      std::ostringstream os;
      os << "integrator step size underflow at t = " << t << "; last accepted state norm " << x.norm();
      throw NumericError(os.str());
    }
  }
  return steps;
}

// ---------------------------------------------------------------------------
// WTG units

namespace {

using Mat10 = Eigen::Matrix<double, 10, 10>;

// nested Newton (chord) solve of the DFIG algebraic block
struct AlgebraicSolver {
  const DfigModel* m = nullptr;
  DfigInputs in;
  DfigAlgebraic a;
  Eigen::PartialPivLU<Mat10> lu;
  bool have_jacobian = false;

  void jacobian(const DfigState& s) {
    Mat10 J;
    const DfigAlgebraic g0 = dfig_residual(s, a, in, *m).g;
    for (int j = 0; j < 10; ++j) {
      DfigAlgebraic ap = a;
      const double h = 1e-7 * std::max(1.0, std::abs(a[j]));
      ap[j] += h;
      J.col(j) = (dfig_residual(s, ap, in, *m).g - g0) / h;
    }
    lu.compute(J);
    have_jacobian = true;
  }

  DfigResidual solve(const DfigState& s, double u) {
    in.u_ie = u;
    DfigResidual r;
    for (int it = 0; it < 40; ++it) {
      r = dfig_residual(s, a, in, *m);
      if (!r.g.allFinite()) break;
      if (r.g.cwiseAbs().maxCoeff() < 1e-12) return r;
      if (!have_jacobian || it == 8 || it == 20) jacobian(s);
      a -= lu.solve(r.g);
    }
    int worst = 0;
    r.g.cwiseAbs().maxCoeff(&worst);
    throw NumericError("DFIG algebraic solve diverged; worst constraint '" + dfig::algebraic_labels()[worst] +
                       "'");
  }
};

struct Unit {
  Fidelity fid;
  const WtgPlant* w;
  int nx;
  int i_omega = 0; // index of omega_r in the linear state
  AlgebraicSolver alg;

  Unit(const WtgPlant& plant, Fidelity f) : fid(f), w(&plant) {
    nx = f == Fidelity::Reduced1 ? 1 : 10;
    if (f == Fidelity::Linear10) {
      auto it = std::find(plant.linear.states.begin(), plant.linear.states.end(), "omega_r");
      if (it == plant.linear.states.end()) throw ValidationError("linear model has no omega_r state");
      i_omega = static_cast<int>(it - plant.linear.states.begin());
    }
    if (f == Fidelity::Nonlinear) {
      alg.m = &plant.model;
      alg.in = plant.op.inputs;
      alg.a = plant.op.algebraic;
    }
  }

  void initial(Eigen::Ref<VectorXd> x) const {
    if (fid == Fidelity::Nonlinear)
      x = w->op.state;
    else
      x.setZero();
  }

  // derivative, power deviation and rotor speed deviation
  void eval(const Eigen::Ref<const VectorXd>& x, double u, Eigen::Ref<VectorXd> dx, double& dPg,
            double& domega) {
    switch (fid) {
    case Fidelity::Nonlinear: {
      const DfigState s = x;
      auto r = alg.solve(s, u);
      dx = r.dx;
      dPg = alg.a[dfig::P_g] - w->op.algebraic[dfig::P_g];
      domega = x[dfig::omega_r] - w->op.state[dfig::omega_r];
      break;
    }
    case Fidelity::Linear10:
      dx = w->linear.A * x + w->linear.B.col(0) * u;
      dPg = (w->linear.C.row(0) * x)(0) + w->linear.D(0, 0) * u;
      domega = x[i_omega];
      break;
    case Fidelity::Reduced1:
      dx[0] = w->reduced.A_rd * x[0] + w->reduced.B_rd * u;
      dPg = w->reduced.C_rd * x[0] + w->reduced.D_rd * u;
      domega = x[0];
      break;
    }
  }

  double omega_abs(double domega) const { return w->op.state[dfig::omega_r] + domega; }
};

constexpr int kGroupFixed = 7; // diesel 3, reference 3, washout 1

struct GroupState {
  const MrcGroup* g;
  int offset = 0;
  std::vector<Unit> units;
  double share = 1.0;
  DelayLine delay;
  double pom = 0.0, out = 0.0; // segment-constant disturbance
  GroupState(const MrcGroup& grp, const DelaySettings& d, double horizon) : g(&grp), delay(d, horizon) {}
};

struct Outputs {
  double u, dPg, domega_mean, omega1, dPe, fb;
};

class ClosedLoop {
public:
  ClosedLoop(const Scenario& s) : s_(s) {
    int off = 0;
    const double nshare = 1.0 / static_cast<double>(s.groups.size());
    groups_.reserve(s.groups.size());
    for (const auto& g : s.groups) {
      groups_.emplace_back(g, s.delay, s.duration);
      auto& gs = groups_.back();
      gs.offset = off;
      gs.share = g.load_share >= 0.0 ? g.load_share : nshare;
      off += kGroupFixed;
      for (int k = 0; k < g.num_wtgs; ++k) {
        gs.units.emplace_back(s.wtg, s.fidelity);
        off += gs.units.back().nx;
      }
    }
    n_ = off;
  }

  int size() const { return n_; }

  VectorXd initial() {
    VectorXd x = VectorXd::Zero(n_);
    for (auto& gs : groups_) {
      int o = gs.offset + kGroupFixed;
      for (auto& u : gs.units) {
        u.initial(x.segment(o, u.nx));
        o += u.nx;
      }
    }
    return x;
  }

  void set_disturbance(double t) {
    for (auto& gs : groups_) {
      gs.pom = gs.out = 0.0;
      for (const auto& d : s_.disturbances) {
        if (d.time > t + 1e-12) continue;
        if (gs.g->measures(d.bus))
          gs.pom += gs.share * d.magnitude;
        else
          gs.out += gs.share * d.magnitude;
      }
    }
  }

  // feedback signal K x_fb at state x
  double feedback(const GroupState& gs, const VectorXd& x, double domega_mean) const {
    const auto& c = gs.g->controller;
    if (c.kind != ControllerSpec::Kind::Mrc) return 0.0;
    const int o = gs.offset;
    Eigen::Matrix<double, 7, 1> xf;
    xf << x[o], x[o + 1], x[o + 2], domega_mean, x[o + 3], x[o + 4], x[o + 5];
    return (c.K * xf)(0);
  }

  double control(GroupState& gs, double t, const VectorXd& x, double domega_mean) const {
    const auto& c = gs.g->controller;
    switch (c.kind) {
    case ControllerSpec::Kind::None: return 0.0;
    case ControllerSpec::Kind::Washout: {
      const double y = x[gs.offset] / gs.g->diesel.f_bar;
      return c.K_ie * (y - x[gs.offset + 6]) / c.T_w;
    }
    case ControllerSpec::Kind::Mrc:
      if (gs.delay.nu(t) <= 0.0) return feedback(gs, x, domega_mean);
      return gs.delay.delayed(t);
    }
    return 0.0;
  }

  // rotor speed deviations do not depend on u, so they are read before the unit solve
  double mean_domega(const GroupState& gs, const VectorXd& x) const {
    double acc = 0.0;
    int o = gs.offset + kGroupFixed;
    for (const auto& u : gs.units) {
      switch (u.fid) {
      case Fidelity::Nonlinear: acc += x[o + dfig::omega_r] - u.w->op.state[dfig::omega_r]; break;
      case Fidelity::Linear10: acc += x[o + u.i_omega]; break;
      case Fidelity::Reduced1: acc += x[o]; break;
      }
      o += u.nx;
    }
    return acc / static_cast<double>(gs.units.size());
  }

  void rhs(double t, const VectorXd& x, VectorXd& dx) {
    dx.resize(n_);
    for (auto& gs : groups_) eval_group(gs, t, x, &dx);
  }

  Outputs eval_group(GroupState& gs, double t, const VectorXd& x, VectorXd* dx) {
    const MrcGroup& g = *gs.g;
    const int o = gs.offset;
    Outputs out{};
    out.domega_mean = mean_domega(gs, x);
    out.u = control(gs, t, x, out.domega_mean);
    const double uu = g.split == UieSplit::Divided ? out.u / static_cast<double>(gs.units.size()) : out.u;
    VectorXd scratch(10);
    int ou = o + kGroupFixed;
    for (size_t k = 0; k < gs.units.size(); ++k) {
      auto& un = gs.units[k];
      double dPg = 0.0, dom = 0.0;
      if (dx)
        un.eval(x.segment(ou, un.nx), uu, dx->segment(ou, un.nx), dPg, dom);
      else
        un.eval(x.segment(ou, un.nx), uu, scratch.head(un.nx), dPg, dom);
      out.dPg += dPg;
      if (k == 0) out.omega1 = un.omega_abs(dom);
      ou += un.nx;
    }
    out.dPe = gs.pom - out.dPg + gs.out;
    out.fb = feedback(gs, x, out.domega_mean);
    if (dx) {
      const auto& d = g.diesel;
      const auto& r = g.reference;
      auto& v = *dx;
      v[o] = d.f_bar / (2.0 * d.H_D) * (x[o + 1] - out.dPe);
      v[o + 1] = (x[o + 2] - x[o + 1]) / d.tau_d;
      v[o + 2] = (-x[o] / (d.f_bar * d.R_D) - x[o + 2]) / d.tau_sm;
      v[o + 3] = r.f_bar / (2.0 * r.H_hat) * (x[o + 4] - gs.pom) - r.f_bar * r.D_hat / (2.0 * r.H_hat) * x[o + 3];
      v[o + 4] = (x[o + 5] - x[o + 4]) / r.tau_d_hat;
      v[o + 5] = (-x[o + 3] / (r.f_bar * r.R_hat) - x[o + 5]) / r.tau_sm_hat;
      const double T_w = g.controller.kind == ControllerSpec::Kind::Washout ? g.controller.T_w : 1.0;
      v[o + 6] = g.controller.kind == ControllerSpec::Kind::Washout ? (x[o] / d.f_bar - x[o + 6]) / T_w : 0.0;
    }
    return out;
  }

  void accept(double t, const VectorXd& x) {
    for (auto& gs : groups_) gs.delay.push(t, feedback(gs, x, mean_domega(gs, x)));
  }

  double min_delay() const {
    double m = INFINITY;
    for (const auto& gs : groups_)
      if (gs.g->controller.kind == ControllerSpec::Kind::Mrc) m = std::min(m, gs.delay.min_delay());
    return m;
  }

  std::vector<GroupState>& groups() { return groups_; }

private:
  const Scenario& s_;
  std::vector<GroupState> groups_;
  int n_ = 0;
};

const std::vector<std::string>& group_columns() {
  static const std::vector<std::string> c{"domega_d", "domega_ref", "omega_r", "dP_g", "dP_pom", "u_ie",
                                          "dP_m",     "dP_v",       "e",       "dP_e", "dP_g_unit"};
  return c;
}

std::vector<double> grid(double duration, double rate) {
  const int n = static_cast<int>(std::floor(duration * rate + 1e-9));
  std::vector<double> t(n + 1);
  for (int i = 0; i <= n; ++i) t[i] = i / rate;
  return t;
}

} // namespace

Trajectory simulate(const Scenario& s) {
  s.validate();
  ClosedLoop cl(s);
  VectorXd x = cl.initial();
  OdeOptions oo;
  oo.rtol = s.rtol;
  oo.atol = s.atol;
  oo.max_step = s.max_step;
  const double md = cl.min_delay();
  if (md > 0.0 && std::isfinite(md)) oo.max_step = std::min(oo.max_step, 0.5 * md);

  // breakpoints: sample grid plus disturbance times plus delay resampling instants
  std::vector<double> ts = grid(s.duration, s.sample_rate);
  std::vector<double> breaks = ts;
  for (const auto& d : s.disturbances) breaks.push_back(d.time);
  if (s.delay.policy == DelayPolicy::Random)
    for (double t = 0.0; t < s.duration; t += s.delay.resample_interval) breaks.push_back(t);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               breaks.end());

  Trajectory tr;
  tr.columns.push_back("t");
  const int ng = static_cast<int>(s.groups.size());
  for (int g = 0; g < ng; ++g)
    for (const auto& c : group_columns()) tr.columns.push_back(column(c, g));
  const int nc = static_cast<int>(group_columns().size());
  tr.data.resize(static_cast<int>(ts.size()), 1 + ng * nc);

  auto record = [&](int row, double t) {
    tr.data(row, 0) = t;
    for (int g = 0; g < ng; ++g) {
      auto& gs = cl.groups()[g];
      auto o = cl.eval_group(gs, t, x, nullptr);
      const int c0 = 1 + g * nc;
      const int off = gs.offset;
      const double f = gs.g->diesel.f_bar;
      const double fr = gs.g->reference.f_bar;
      tr.data(row, c0 + 0) = x[off] / f;
      tr.data(row, c0 + 1) = x[off + 3] / fr;
      tr.data(row, c0 + 2) = o.omega1;
      tr.data(row, c0 + 3) = o.dPg;
      tr.data(row, c0 + 4) = gs.pom;
      tr.data(row, c0 + 5) = o.u;
      tr.data(row, c0 + 6) = x[off + 1];
      tr.data(row, c0 + 7) = x[off + 2];
      tr.data(row, c0 + 8) = x[off] / f - x[off + 3] / fr;
      tr.data(row, c0 + 9) = o.dPe;
      tr.data(row, c0 + 10) = o.dPg / static_cast<double>(gs.units.size());
    }
  };

  auto f = [&](double t, const VectorXd& xx, VectorXd& dx) { cl.rhs(t, xx, dx); };
  auto acc = [&](double t, const VectorXd& xx) { cl.accept(t, xx); };
  cl.set_disturbance(0.0);
  cl.accept(0.0, x);
  record(0, 0.0);
  size_t next_sample = 1;
  for (size_t b = 0; b + 1 < breaks.size(); ++b) {
    const double t0 = breaks[b], t1 = breaks[b + 1];
    cl.set_disturbance(t0);
    try {
      integrate(f, t0, t1, x, oo, acc);
    } catch (const NumericError& e) {
      std::ostringstream os;
      os << e.what() << " (segment [" << t0 << ", " << t1 << "], state norm " << x.norm() << ")";
      throw NumericError(os.str());
    }
    if (!x.allFinite()) throw NumericError("state became non-finite near t = " + std::to_string(t1));
    while (next_sample < ts.size() && std::abs(ts[next_sample] - t1) < 1e-9) {
      cl.set_disturbance(t1);
      record(static_cast<int>(next_sample), ts[next_sample]);
      ++next_sample;
    }
  }
  tr.validate();
  return tr;
}

// ---------------------------------------------------------------------------

double OpenLoopInput::value(double t) const {
  if (t < t0) return 0.0;
  if (kind == Kind::Step) return amplitude;
  return amplitude * std::exp(-(t - t0) / tau);
}

Trajectory simulate_wtg_open_loop(const WtgPlant& w, Fidelity fid, const OpenLoopInput& in, double duration,
                                  double sample_rate) {
  Unit unit(w, fid);
  VectorXd x(unit.nx);
  unit.initial(x);
  std::vector<double> ts = grid(duration, sample_rate);
  std::vector<double> breaks = ts;
  breaks.push_back(in.t0);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               breaks.end());
  Trajectory tr;
  tr.columns = {"t", "u_ie", "omega_r", "dP_g"};
  tr.data.resize(static_cast<int>(ts.size()), 4);
  double seg_start = 0.0;
  VectorXd scratch(unit.nx);
  auto record = [&](int row, double t) {
    double dPg = 0.0, dom = 0.0;
    const double u = in.value(t);
    unit.eval(x, u, scratch, dPg, dom);
    tr.data.row(row) << t, u, unit.omega_abs(dom), dPg;
  };
  auto f = [&](double t, const VectorXd& xx, VectorXd& dx) {
    dx.resize(unit.nx);
    double dPg, dom;
    // the input is held at its right-limit inside each segment so steps do not straddle the jump
    const double u = in.value(std::max(t, seg_start + 1e-12));
    unit.eval(xx, u, dx, dPg, dom);
  };
  OdeOptions oo;
  record(0, 0.0);
  size_t next = 1;
  for (size_t b = 0; b + 1 < breaks.size(); ++b) {
    seg_start = breaks[b];
    integrate(f, breaks[b], breaks[b + 1], x, oo);
    while (next < ts.size() && std::abs(ts[next] - breaks[b + 1]) < 1e-9) {
      record(static_cast<int>(next), ts[next]);
      ++next;
    }
  }
  tr.validate();
  return tr;
}

FidelityComparison simulate_fidelity_comparison(const WtgPlant& w, const OpenLoopInput& in, double duration) {
  FidelityComparison c;
  c.nonlinear = simulate_wtg_open_loop(w, Fidelity::Nonlinear, in, duration);
  c.linear10 = simulate_wtg_open_loop(w, Fidelity::Linear10, in, duration);
  c.reduced1 = simulate_wtg_open_loop(w, Fidelity::Reduced1, in, duration);
  return c;
}

ReducedModel aggregate_wtgs(const std::vector<ReducedModel>& units, const std::vector<double>& bases) {
  if (units.empty()) throw ValidationError("aggregation needs at least one unit");
  if (bases.size() != units.size()) throw ValidationError("one base per unit is required");
  double amin = INFINITY, amax = 0.0, total = 0.0;
  for (size_t i = 0; i < units.size(); ++i) {
    units[i].validate();
    if (!(bases[i] > 0.0)) throw ValidationError("unit bases must be > 0");
    amin = std::min(amin, std::abs(units[i].A_rd));
    amax = std::max(amax, std::abs(units[i].A_rd));
    total += bases[i];
  }
  if (amax > 1.25 * amin) throw ValidationError("unit time constants differ by more than 25%; aggregation invalid");
  // output on the base of the first unit; dynamics weighted by rating
  ReducedModel r = units.front();
  r.A_rd = r.B_rd = r.C_rd = r.D_rd = r.b_shift = r.d_shift = 0.0;
  for (size_t i = 0; i < units.size(); ++i) {
    const double w = bases[i] / total, k = bases[i] / bases.front();
    r.A_rd += w * units[i].A_rd;
    r.B_rd += w * units[i].B_rd;
    r.b_shift += w * units[i].b_shift;
    r.C_rd += k * units[i].C_rd;
    r.D_rd += k * units[i].D_rd;
    r.d_shift += k * units[i].d_shift;
  }
  return r;
}

} // namespace mrcie
