#include "mrcie/io.hpp"

#include "mrcie/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mrcie {

namespace fs = std::filesystem;

std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + p.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string file_hash(const fs::path& p) { return content_hash(read_text(p)); }

void write_text(const fs::path& p, const std::string& s) {
  if (fs::exists(p)) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    if (os.str() == s) return;
  }
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + p.string() + "'");
  out << s;
}

json read_json(const fs::path& p) {
  const std::string s = read_text(p);
  try {
    return json::parse(s);
  } catch (const json::parse_error& e) {
    throw ValidationError(p.string() + ": " + e.what());
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

json matrix_to_json(const MatrixXd& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (int k = 0; k < M.cols(); ++k) r.push_back(M(i, k));
    rows.push_back(std::move(r));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw ValidationError("matrix must be an array of rows");
  const int r = static_cast<int>(j.size());
  const int c = r ? static_cast<int>(j[0].size()) : 0;
  MatrixXd M(r, c);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(j[i].size()) != c) throw ValidationError("ragged matrix rows");
    for (int k = 0; k < c; ++k) M(i, k) = j[i][k].get<double>();
  }
  return M;
}

namespace {

template <class T>
void get_opt(const json& j, const char* key, T& v) {
  if (j.contains(key)) j.at(key).get_to(v);
}

json vec(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd vec_from(const json& j) {
  auto s = j.get<std::vector<double>>();
  return Eigen::Map<VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
}

json row7(const Eigen::Matrix<double, 1, 7>& K) { return std::vector<double>(K.data(), K.data() + 7); }

Eigen::Matrix<double, 1, 7> row7_from(const json& j) {
  auto s = j.get<std::vector<double>>();
  if (s.size() != 7) throw ValidationError("gain must have 7 entries");
  Eigen::Matrix<double, 1, 7> K;
  for (int i = 0; i < 7; ++i) K(i) = s[i];
  return K;
}

sdp::Status status_from(const std::string& s) {
  for (auto st : {sdp::Status::Optimal, sdp::Status::Infeasible, sdp::Status::NumericalFailure,
                  sdp::Status::IterationLimit})
    if (s == sdp::to_string(st)) return st;
  throw ValidationError("unknown solver status '" + s + "'");
}

} // namespace

void to_json(json& j, const DieselModel& m) {
  j = {{"H_D", m.H_D}, {"tau_d", m.tau_d}, {"tau_sm", m.tau_sm}, {"R_D", m.R_D}, {"f_bar", m.f_bar},
       {"rated_power", m.rated_power}};
}
void from_json(const json& j, DieselModel& m) {
  get_opt(j, "H_D", m.H_D);
  get_opt(j, "tau_d", m.tau_d);
  get_opt(j, "tau_sm", m.tau_sm);
  get_opt(j, "R_D", m.R_D);
  get_opt(j, "f_bar", m.f_bar);
  get_opt(j, "rated_power", m.rated_power);
}

void to_json(json& j, const ReferenceModel& m) {
  j = {{"H_hat", m.H_hat}, {"tau_d_hat", m.tau_d_hat}, {"tau_sm_hat", m.tau_sm_hat},
       {"R_hat", m.R_hat}, {"D_hat", m.D_hat},         {"f_bar", m.f_bar}};
}
void from_json(const json& j, ReferenceModel& m) {
  get_opt(j, "H_hat", m.H_hat);
  get_opt(j, "tau_d_hat", m.tau_d_hat);
  get_opt(j, "tau_sm_hat", m.tau_sm_hat);
  get_opt(j, "R_hat", m.R_hat);
  get_opt(j, "D_hat", m.D_hat);
  get_opt(j, "f_bar", m.f_bar);
}

void to_json(json& j, const TurbineCurve& m) {
  j = {{"c1", m.c1}, {"c2", m.c2}, {"c5", m.c5}, {"c6", m.c6}, {"c7", m.c7}, {"c8", m.c8},
       {"lambda_gain", m.lambda_gain}, {"rated_wind", m.rated_wind}, {"power_scale", m.power_scale}};
}
void from_json(const json& j, TurbineCurve& m) {
  get_opt(j, "c1", m.c1);
  get_opt(j, "c2", m.c2);
  get_opt(j, "c5", m.c5);
  get_opt(j, "c6", m.c6);
  get_opt(j, "c7", m.c7);
  get_opt(j, "c8", m.c8);
  get_opt(j, "lambda_gain", m.lambda_gain);
  get_opt(j, "rated_wind", m.rated_wind);
  get_opt(j, "power_scale", m.power_scale);
}

void to_json(json& j, const DfigModel& m) {
  j = {{"R_s", m.R_s},     {"R_r", m.R_r},     {"L_ls", m.L_ls},   {"L_lr", m.L_lr},
       {"L_m", m.L_m},     {"H_T", m.H_T},     {"omega_bar", m.omega_bar},
       {"K_PT", m.K_PT},   {"K_IT", m.K_IT},   {"K_PQ", m.K_PQ},   {"K_IQ", m.K_IQ},
       {"K_PC", m.K_PC},   {"K_IC", m.K_IC},   {"omega_c", m.omega_c},
       {"eta", m.eta},     {"S_base", m.S_base}, {"V_base", m.V_base}, {"turbine", m.turbine}};
}
void from_json(const json& j, DfigModel& m) {
  get_opt(j, "R_s", m.R_s);
  get_opt(j, "R_r", m.R_r);
  get_opt(j, "L_ls", m.L_ls);
  get_opt(j, "L_lr", m.L_lr);
  get_opt(j, "L_m", m.L_m);
  get_opt(j, "H_T", m.H_T);
  get_opt(j, "omega_bar", m.omega_bar);
  get_opt(j, "K_PT", m.K_PT);
  get_opt(j, "K_IT", m.K_IT);
  get_opt(j, "K_PQ", m.K_PQ);
  get_opt(j, "K_IQ", m.K_IQ);
  get_opt(j, "K_PC", m.K_PC);
  get_opt(j, "K_IC", m.K_IC);
  get_opt(j, "omega_c", m.omega_c);
  get_opt(j, "eta", m.eta);
  get_opt(j, "S_base", m.S_base);
  get_opt(j, "V_base", m.V_base);
  get_opt(j, "turbine", m.turbine);
}

void to_json(json& j, const EquilibriumTargets& t) {
  j = {{"P_g", t.P_g}, {"Q_g", t.Q_g}, {"v_qs", t.v_qs}, {"v_ds", t.v_ds}, {"omega_s", t.omega_s},
       {"wind_speed", t.wind_speed}};
}
void from_json(const json& j, EquilibriumTargets& t) {
  get_opt(j, "P_g", t.P_g);
  get_opt(j, "Q_g", t.Q_g);
  get_opt(j, "v_qs", t.v_qs);
  get_opt(j, "v_ds", t.v_ds);
  get_opt(j, "omega_s", t.omega_s);
  get_opt(j, "wind_speed", t.wind_speed);
}

void to_json(json& j, const DelayBounds& d) { j = {{"eta_m", d.eta_m}, {"kappa", d.kappa}}; }
void from_json(const json& j, DelayBounds& d) {
  get_opt(j, "eta_m", d.eta_m);
  get_opt(j, "kappa", d.kappa);
}

void to_json(json& j, const PolytopeSpec& p) {
  j = {{"H_D", {p.H_D.lo, p.H_D.hi}},
       {"tau_d", {p.tau_d.lo, p.tau_d.hi}},
       {"tau_sm", {p.tau_sm.lo, p.tau_sm.hi}},
       {"delta_fraction", p.delta_fraction}};
}
void from_json(const json& j, PolytopeSpec& p) {
  auto iv = [&](const char* k, Interval& v) {
    if (!j.contains(k)) return;
    const auto& a = j.at(k);
    if (!a.is_array() || a.size() != 2) throw ValidationError(std::string("polytope.") + k + " must be [lo, hi]");
    v.lo = a[0].get<double>();
    v.hi = a[1].get<double>();
  };
  iv("H_D", p.H_D);
  iv("tau_d", p.tau_d);
  iv("tau_sm", p.tau_sm);
  get_opt(j, "delta_fraction", p.delta_fraction);
}

namespace sdp {
void to_json(json& j, const SolverOptions& o) {
  j = {{"max_iterations", o.max_iterations}, {"tolerance", o.tolerance}, {"margin", o.margin},
       {"cert_tol", o.cert_tol},             {"max_vars", o.max_vars},   {"max_block", o.max_block},
       {"phase1_box", o.phase1_box},         {"run_phase1", o.run_phase1}};
}
void from_json(const json& j, SolverOptions& o) {
  get_opt(j, "max_iterations", o.max_iterations);
  get_opt(j, "tolerance", o.tolerance);
  get_opt(j, "margin", o.margin);
  get_opt(j, "cert_tol", o.cert_tol);
  get_opt(j, "max_vars", o.max_vars);
  get_opt(j, "max_block", o.max_block);
  get_opt(j, "phase1_box", o.phase1_box);
  get_opt(j, "run_phase1", o.run_phase1);
  get_opt(j, "verbose", o.verbose);
}
} // namespace sdp

// ---------------------------------------------------------------------------

void to_json(json& j, const DfigOperatingPoint& op) {
  json st, al;
  for (int i = 0; i < dfig::kStates; ++i) st[dfig::state_labels()[i]] = op.state[i];
  for (int i = 0; i < dfig::kAlg; ++i) al[dfig::algebraic_labels()[i]] = op.algebraic[i];
  j = {{"state", st},
       {"algebraic", al},
       {"inputs",
        {{"u_ie", op.inputs.u_ie},
         {"Q_g_star", op.inputs.Q_g_star},
         {"v_qs", op.inputs.v_qs},
         {"v_ds", op.inputs.v_ds},
         {"omega_s", op.inputs.omega_s},
         {"wind_speed", op.inputs.wind_speed}}},
       {"turbine_scale", op.turbine_scale},
       {"T_e", op.T_e},
       {"T_m", op.T_m},
       {"iterations", op.iterations},
       {"residual", op.residual}};
}
void from_json(const json& j, DfigOperatingPoint& op) {
  for (int i = 0; i < dfig::kStates; ++i) op.state[i] = j.at("state").at(dfig::state_labels()[i]).get<double>();
  for (int i = 0; i < dfig::kAlg; ++i)
    op.algebraic[i] = j.at("algebraic").at(dfig::algebraic_labels()[i]).get<double>();
  const auto& in = j.at("inputs");
  get_opt(in, "u_ie", op.inputs.u_ie);
  get_opt(in, "Q_g_star", op.inputs.Q_g_star);
  get_opt(in, "v_qs", op.inputs.v_qs);
  get_opt(in, "v_ds", op.inputs.v_ds);
  get_opt(in, "omega_s", op.inputs.omega_s);
  get_opt(in, "wind_speed", op.inputs.wind_speed);
  get_opt(j, "turbine_scale", op.turbine_scale);
  get_opt(j, "T_e", op.T_e);
  get_opt(j, "T_m", op.T_m);
  get_opt(j, "iterations", op.iterations);
  get_opt(j, "residual", op.residual);
}

void to_json(json& j, const LinearStateSpace& ss) {
  j = {{"A", matrix_to_json(ss.A)}, {"B", matrix_to_json(ss.B)}, {"E", matrix_to_json(ss.E)},
       {"C", matrix_to_json(ss.C)}, {"D", matrix_to_json(ss.D)}, {"F", matrix_to_json(ss.F)},
       {"states", ss.states},       {"inputs", ss.inputs},       {"disturbances", ss.disturbances},
       {"outputs", ss.outputs}};
}
void from_json(const json& j, LinearStateSpace& ss) {
  ss.A = matrix_from_json(j.at("A"));
  ss.B = matrix_from_json(j.at("B"));
  ss.E = matrix_from_json(j.at("E"));
  ss.C = matrix_from_json(j.at("C"));
  ss.D = matrix_from_json(j.at("D"));
  ss.F = matrix_from_json(j.at("F"));
  j.at("states").get_to(ss.states);
  j.at("inputs").get_to(ss.inputs);
  j.at("disturbances").get_to(ss.disturbances);
  j.at("outputs").get_to(ss.outputs);
}

json modal_to_json(const ModalAnalysis& ma, const std::vector<std::string>& states) {
  json modes = json::array();
  for (int k = 0; k < ma.eigenvalues.size(); ++k) {
    int dom = 0;
    ma.participation.col(k).maxCoeff(&dom);
    modes.push_back({{"re", ma.eigenvalues[k].real()},
                     {"im", ma.eigenvalues[k].imag()},
                     {"dominant_state", dom < static_cast<int>(states.size()) ? states[dom] : std::to_string(dom)},
                     {"participation", vec(ma.participation.col(k))}});
  }
  return {{"states", states}, {"modes", modes}};
}

void to_json(json& j, const ReducedModel& r) {
  j = {{"A_rd", r.A_rd},
       {"B_rd", r.B_rd},
       {"C_rd", r.C_rd},
       {"D_rd", r.D_rd},
       {"lambda_r", r.lambda_r},
       {"delta_nominal", vec(r.delta_nominal)},
       {"delta_fraction", r.delta_fraction},
       {"b_shift", r.b_shift},
       {"d_shift", r.d_shift}};
}
void from_json(const json& j, ReducedModel& r) {
  j.at("A_rd").get_to(r.A_rd);
  j.at("B_rd").get_to(r.B_rd);
  j.at("C_rd").get_to(r.C_rd);
  j.at("D_rd").get_to(r.D_rd);
  get_opt(j, "lambda_r", r.lambda_r);
  if (j.contains("delta_nominal")) r.delta_nominal = vec_from(j.at("delta_nominal"));
  get_opt(j, "delta_fraction", r.delta_fraction);
  get_opt(j, "b_shift", r.b_shift);
  get_opt(j, "d_shift", r.d_shift);
}

void to_json(json& j, const SynthesisResult& r) {
  json cert = json::array();
  for (size_t i = 0; i < r.certificate.names.size(); ++i)
    cert.push_back({{"constraint", r.certificate.names[i]}, {"margin", r.certificate.margins[i]}});
  j = {{"status", sdp::to_string(r.status)},
       {"gamma", r.gamma},
       {"tracking_bound", r.ok() ? r.tracking_bound() : 0.0},
       {"k_a", r.k_a},
       {"k_b", r.k_b},
       {"K", row7(r.K)},
       {"K_bar", row7(r.K_bar)},
       {"P", matrix_to_json(r.P)},
       {"Q", matrix_to_json(r.Q)},
       {"certificate", {{"pass", r.certificate.pass}, {"worst", r.certificate.worst}, {"margins", cert}}},
       {"iterations", r.iterations},
       {"vertices", r.vertices},
       {"num_vars", r.num_vars},
       {"main_block_size", r.main_block_size},
       {"phase1_margin", r.phase1_margin},
       {"message", r.message},
       {"delays", r.delays}};
}
void from_json(const json& j, SynthesisResult& r) {
  r.status = status_from(j.at("status").get<std::string>());
  j.at("gamma").get_to(r.gamma);
  get_opt(j, "k_a", r.k_a);
  get_opt(j, "k_b", r.k_b);
  r.K = row7_from(j.at("K"));
  if (j.contains("K_bar")) r.K_bar = row7_from(j.at("K_bar"));
  if (j.contains("P")) r.P = matrix_from_json(j.at("P"));
  if (j.contains("Q")) r.Q = matrix_from_json(j.at("Q"));
  if (j.contains("certificate")) {
    const auto& c = j.at("certificate");
    get_opt(c, "pass", r.certificate.pass);
    get_opt(c, "worst", r.certificate.worst);
    for (const auto& m : c.value("margins", json::array())) {
      r.certificate.names.push_back(m.at("constraint").get<std::string>());
      r.certificate.margins.push_back(m.at("margin").get<double>());
    }
  }
  get_opt(j, "iterations", r.iterations);
  get_opt(j, "vertices", r.vertices);
  get_opt(j, "num_vars", r.num_vars);
  get_opt(j, "main_block_size", r.main_block_size);
  get_opt(j, "phase1_margin", r.phase1_margin);
  get_opt(j, "message", r.message);
  get_opt(j, "delays", r.delays);
}

void to_json(json& j, const InertiaFit& f) {
  j = {{"identifiable", f.identifiable}, {"H_ie", f.identifiable ? json(f.H_ie) : json("unidentifiable")},
       {"residual", f.residual},         {"t_start", f.t_start},
       {"window", f.window},             {"message", f.message}};
}
void to_json(json& j, const FrequencyMetrics& f) {
  j = {{"nadir_hz", f.nadir}, {"t_nadir", f.t_nadir}, {"max_rocof_hz_s", f.max_rocof},
       {"steady_state_hz", f.steady_state}};
}
void to_json(json& j, const TrackingMetrics& t) {
  j = {{"rms_hz", t.rms}, {"peak_hz", t.peak}, {"ratio", t.ratio}};
}
void to_json(json& j, const ScenarioReport& r) {
  j = {{"name", r.name},
       {"groups", r.groups},
       {"frequency", r.freq},
       {"tracking", r.tracking},
       {"inertia", r.inertia},
       {"gamma_bound", r.gamma_bound},
       {"bound_ok", r.bound_ok},
       {"peak_dP_g_unit", r.peak_dP_g_unit}};
}

// ---------------------------------------------------------------------------

std::string to_csv(const Trajectory& tr) {
  std::ostringstream os;
  os << std::setprecision(10);
  for (size_t k = 0; k < tr.columns.size(); ++k) os << (k ? "," : "") << tr.columns[k];
  os << '\n';
  for (int i = 0; i < tr.data.rows(); ++i) {
    for (int k = 0; k < tr.data.cols(); ++k) {
      if (k) os << ',';
      const double v = tr.data(i, k);
      os << (v == 0.0 ? 0.0 : v); // no "-0"
    }
    os << '\n';
  }
  return os.str();
}

void write_csv(const Trajectory& tr, const fs::path& p) { write_text(p, to_csv(tr)); }

Trajectory read_csv(const fs::path& p) {
  std::istringstream in(read_text(p));
  std::string line;
  Trajectory tr;
  if (!std::getline(in, line)) throw ValidationError(p.string() + ": empty CSV");
  {
    std::istringstream hs(line);
    std::string c;
    while (std::getline(hs, c, ',')) {
      if (!c.empty() && c.back() == '\r') c.pop_back();
      tr.columns.push_back(c);
    }
  }
  std::vector<double> vals;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    std::string c;
    size_t n = 0;
    while (std::getline(ls, c, ',')) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str()) throw ValidationError(p.string() + ": bad number on row " + std::to_string(rows + 2));
      vals.push_back(v);
      ++n;
    }
    if (n != tr.columns.size())
      throw ValidationError(p.string() + ": row " + std::to_string(rows + 2) + " has " + std::to_string(n) +
                            " fields, header has " + std::to_string(tr.columns.size()));
    ++rows;
  }
  tr.data = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      vals.data(), rows, static_cast<Eigen::Index>(tr.columns.size()));
  tr.validate();
  return tr;
}

// ---------------------------------------------------------------------------
// svg

namespace {

double nice_step(double span) {
  const double raw = span / 4.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

std::string fmt_num(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << (std::abs(v) < 1e-12 ? 0.0 : v);
  return os.str();
}

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

} // namespace

std::string to_svg(const Trajectory& tr, const std::vector<PlotPanel>& panels, const std::string& title) {
  const double W = 760, H = 210, left = 70, right = 20, top = 28, bottom = 34;
  const double total = 40 + H * static_cast<double>(panels.size());
  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << total
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  const VectorXd t = tr.time();
  const double t0 = t.size() ? t[0] : 0.0, t1 = t.size() ? t[t.size() - 1] : 1.0;
  const int stride = std::max(1, static_cast<int>(t.size()) / 2000);

  for (size_t p = 0; p < panels.size(); ++p) {
    const auto& pn = panels[p];
    const double y0 = 40 + H * static_cast<double>(p);
    std::vector<std::pair<std::string, VectorXd>> series;
    for (const auto& c : pn.columns)
      if (tr.has(c)) series.emplace_back(c, (tr.col(c).array() * pn.scale + pn.offset).matrix());
    double lo = 1e300, hi = -1e300;
    for (const auto& s : series) {
      lo = std::min(lo, s.second.minCoeff());
      hi = std::max(hi, s.second.maxCoeff());
    }
    if (series.empty()) lo = 0, hi = 1;
    if (hi - lo < 1e-12) {
      const double pad = std::max(1e-6, std::abs(hi) * 1e-3);
      lo -= pad;
      hi += pad;
    }
    const double pw = W - left - right, ph = H - top - bottom;
    auto X = [&](double v) { return left + (v - t0) / (t1 - t0) * pw; };
    auto Y = [&](double v) { return y0 + top + (hi - v) / (hi - lo) * ph; };

    os << "<text x=\"" << left << "\" y=\"" << y0 + top - 8 << "\" font-size=\"12\">" << pn.title
       << (pn.unit.empty() ? "" : " [" + pn.unit + "]") << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << y0 + top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"#444\"/>\n";
    const double ys = nice_step(hi - lo);
    for (double v = std::ceil(lo / ys) * ys; v <= hi + 1e-12 * std::abs(hi); v += ys) {
      os << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << Y(v) << "\" y2=\"" << Y(v)
         << "\" stroke=\"#ddd\"/>\n";
      os << "<text x=\"" << left - 4 << "\" y=\"" << Y(v) + 4 << "\" text-anchor=\"end\">" << fmt_num(v)
         << "</text>\n";
    }
    const double xs = nice_step(t1 - t0);
    for (double v = std::ceil(t0 / xs) * xs; v <= t1 + 1e-9; v += xs)
      os << "<text x=\"" << X(v) << "\" y=\"" << y0 + top + ph + 14 << "\" text-anchor=\"middle\">"
         << fmt_num(v) << "</text>\n";
    if (p + 1 == panels.size())
      os << "<text x=\"" << left + pw / 2 << "\" y=\"" << y0 + H - 4 << "\" text-anchor=\"middle\">time [s]</text>\n";

    for (size_t s = 0; s < series.size(); ++s) {
      const auto& v = series[s].second;
      os << "<polyline fill=\"none\" stroke-width=\"1.3\" stroke=\"" << kColors[s % 6] << "\" points=\"";
      for (int i = 0; i < v.size(); i += stride) os << X(t[i]) << ',' << Y(v[i]) << ' ';
      os << X(t[v.size() - 1]) << ',' << Y(v[v.size() - 1]) << "\"/>\n";
      os << "<text x=\"" << left + pw - 4 << "\" y=\"" << y0 + top + 14 + 13 * static_cast<double>(s)
         << "\" text-anchor=\"end\" fill=\"" << kColors[s % 6] << "\">" << series[s].first << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<PlotPanel> standard_panels(const Trajectory&, int group, double f_bar) {
  return {
      {"Diesel and reference frequency", {column("domega_d", group), column("domega_ref", group)}, f_bar, f_bar, "Hz"},
      {"WTG rotor speed", {column("omega_r", group)}, 1.0, 0.0, "p.u."},
      {"WTG active power deviation", {column("dP_g", group), column("dP_pom", group)}, 1.0, 0.0, "p.u."},
      {"Control input", {column("u_ie", group)}, 1.0, 0.0, "p.u."},
  };
}

} // namespace mrcie
