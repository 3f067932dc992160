#include "mrcie/pipeline.hpp"

#include "mrcie/errors.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

namespace mrcie {

namespace fs = std::filesystem;

const char* tool_version() { return MRCIE_VERSION; }

const char* to_string(Stage s) {
  switch (s) {
  case Stage::Equilibrium: return "equilibrium";
  case Stage::Linearize: return "linearize";
  case Stage::Reduce: return "reduce";
  case Stage::Synthesize: return "synthesize";
  case Stage::Simulate: return "simulate";
  case Stage::Report: return "report";
  }
  return "unknown";
}

bool has_errors(const std::vector<Diagnostic>& d) {
  for (const auto& x : d)
    if (x.level == Diagnostic::Level::Error) return true;
  return false;
}

// ---------------------------------------------------------------------------
// parsing with diagnostics

namespace {

class Checker {
public:
  explicit Checker(std::vector<Diagnostic>& d) : d_(d) {}

  void err(const std::string& where, const std::string& msg) { d_.push_back({Diagnostic::Level::Error, where, msg}); }
  void warn(const std::string& where, const std::string& msg) {
    d_.push_back({Diagnostic::Level::Warning, where, msg});
  }

  bool object(const json& j, const std::string& where) {
    if (j.is_object()) return true;
    err(where, "must be an object");
    return false;
  }

  void keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) return;
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || it.key() == a;
      if (!ok) warn(join(where, it.key()), "unknown key ignored");
    }
  }

  // numbers are checked for type here; ranges by the domain validate()
  void numbers(const json& j, const std::string& where) {
    if (!j.is_object()) return;
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!it.value().is_number() && !it.value().is_object() && !it.value().is_boolean())
        err(join(where, it.key()), "must be a number");
  }

  template <class F>
  void guard(const std::string& where, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      err(where, e.what());
    } catch (const json::exception& e) {
      err(where, std::string("malformed value: ") + e.what());
    }
  }

  static std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

private:
  std::vector<Diagnostic>& d_;
};

json section(const json& j, const char* key) { return j.contains(key) ? j.at(key) : json::object(); }

json merged(json base, const json& patch) {
  if (base.is_null()) base = json::object();
  base.merge_patch(patch);
  return base;
}

ConfigSpec parse_config_impl(const json& defaults, const json& config, std::vector<Diagnostic>& diags) {
  Checker ck(diags);
  ConfigSpec c;
  if (!ck.object(config, "config")) return c;
  ck.keys(config, "", {"id", "name", "description", "wtg", "delays", "synthesis", "groups", "scenarios"});
  c.id = config.value("id", std::string("custom"));
  if (config.contains("id") && config.at("id").is_number()) c.id = std::to_string(config.at("id").get<int>());
  c.name = config.value("name", "config" + c.id);
  c.description = config.value("description", std::string());

  // wtg
  const json wd = section(defaults, "wtg");
  const json wc = section(config, "wtg");
  ck.keys(wc, "wtg", {"model", "operating_point", "delta_fraction"});
  const json model = merged(section(wd, "model"), section(wc, "model"));
  ck.keys(model, "wtg.model",
          {"R_s", "R_r", "L_ls", "L_lr", "L_m", "H_T", "omega_bar", "K_PT", "K_IT", "K_PQ", "K_IQ", "K_PC", "K_IC",
           "omega_c", "eta", "S_base", "V_base", "turbine"});
  ck.numbers(model, "wtg.model");
  ck.guard("wtg.model", [&] {
    model.get_to(c.dfig);
    c.dfig.validate();
  });
  if (!model.contains("eta"))
    ck.warn("wtg.model.eta", "omitted; default machine-to-turbine base ratio 1/1.1 used");
  const json opj = merged(section(wd, "operating_point"), section(wc, "operating_point"));
  ck.keys(opj, "wtg.operating_point", {"P_g", "Q_g", "v_qs", "v_ds", "omega_s", "wind_speed"});
  ck.numbers(opj, "wtg.operating_point");
  ck.guard("wtg.operating_point", [&] {
    opj.get_to(c.targets);
    if (!(c.targets.P_g > 0.0 && c.targets.P_g <= 1.2))
      throw ValidationError("P_g must be in (0, 1.2] p.u. (got " + std::to_string(c.targets.P_g) + ")");
    if (!(c.targets.wind_speed > 0.0)) throw ValidationError("wind_speed must be positive [m/s]");
    if (!(c.targets.omega_s > 0.0)) throw ValidationError("omega_s must be positive [p.u.]");
  });
  c.delta_fraction = wc.value("delta_fraction", wd.value("delta_fraction", 0.1));
  if (!(c.delta_fraction >= 0.0 && c.delta_fraction < 1.0))
    ck.err("wtg.delta_fraction", "must be in [0, 1)");

  // delays
  const json dj = merged(section(defaults, "delays"), section(config, "delays"));
  ck.keys(dj, "delays", {"eta_m", "kappa"});
  ck.numbers(dj, "delays");
  ck.guard("delays", [&] { dj.get_to(c.delays); });
  if (!(c.delays.eta_m >= 0.0 && c.delays.kappa >= c.delays.eta_m))
    ck.err("delays", "delay bounds must satisfy 0 <= eta_m <= kappa [s]");
  if (c.delays.kappa > 1.0) ck.warn("delays.kappa", "above 1 s; delays are in seconds, not milliseconds");

  // synthesis
  const json sj = merged(section(defaults, "synthesis"), section(config, "synthesis"));
  ck.keys(sj, "synthesis", {"interval_weighting", "gamma_weight", "ka_weight", "kb_weight", "polytope", "solver"});
  ck.guard("synthesis", [&] {
    c.synthesis.interval_weighting = sj.value("interval_weighting", false);
    c.synthesis.gamma_weight = sj.value("gamma_weight", 1.0);
    c.synthesis.ka_weight = sj.value("ka_weight", 1.0);
    c.synthesis.kb_weight = sj.value("kb_weight", 1.0);
    if (!(c.synthesis.gamma_weight > 0.0) || c.synthesis.ka_weight < 0.0 || c.synthesis.kb_weight < 0.0)
      throw ValidationError("objective weights must be nonnegative (gamma_weight > 0)");
    if (sj.contains("solver")) sj.at("solver").get_to(c.synthesis.solver);
  });
  if (sj.contains("polytope") && !sj.at("polytope").is_null()) {
    ck.keys(sj.at("polytope"), "synthesis.polytope", {"H_D", "tau_d", "tau_sm", "delta_fraction"});
    ck.guard("synthesis.polytope", [&] {
      PolytopeSpec p;
      sj.at("polytope").get_to(p);
      for (const Interval* iv : {&p.H_D, &p.tau_d, &p.tau_sm})
        if (!(iv->lo >= 0.0 && iv->lo < 1.0 && iv->hi >= 0.0))
          throw ValidationError("relative ranges need 0 <= lo < 1 and hi >= 0");
      if (p.delta_fraction < 0.0) throw ValidationError("delta_fraction must be nonnegative");
      c.polytope = p;
    });
  }

  // groups
  const json gd = section(defaults, "group");
  if (!config.contains("groups") || !config.at("groups").is_array() || config.at("groups").empty()) {
    ck.err("groups", "at least one MRC group is required");
  } else {
    std::set<std::string> names;
    double share = 0.0;
    bool any_share = false;
    for (size_t i = 0; i < config.at("groups").size(); ++i) {
      const std::string where = "groups[" + std::to_string(i) + "]";
      const json g = merged(gd, config.at("groups")[i]);
      if (!ck.object(g, where)) continue;
      ck.keys(g, where,
              {"name", "diesel", "reference", "num_wtgs", "pom_bus", "inner_buses", "load_share", "u_ie_split"});
      GroupConfig gc;
      gc.name = g.value("name", "group" + std::to_string(i + 1));
      if (!names.insert(gc.name).second) ck.err(where + ".name", "duplicate group name '" + gc.name + "'");
      ck.numbers(section(g, "diesel"), where + ".diesel");
      ck.guard(where + ".diesel", [&] {
        merged(section(defaults, "diesel"), section(g, "diesel")).get_to(gc.diesel);
        gc.diesel.validate();
        if (gc.diesel.R_D > 0.5) throw ValidationError("R_D looks like a percentage; droop is in p.u. (0.05 = 5 %)");
      });
      ck.numbers(section(g, "reference"), where + ".reference");
      ck.guard(where + ".reference", [&] {
        merged(section(defaults, "reference"), section(g, "reference")).get_to(gc.reference);
        gc.reference.validate();
        if (gc.reference.R_hat > 0.5)
          throw ValidationError("R_hat looks like a percentage; droop is in p.u. (0.05 = 5 %)");
      });
      if (gc.reference.H_hat < gc.diesel.H_D)
        ck.warn(where + ".reference.H_hat", "below the diesel inertia: the WTG would have to remove inertia");
      if (std::abs(gc.reference.f_bar - gc.diesel.f_bar) > 1e-12)
        ck.err(where + ".reference.f_bar", "must equal the diesel f_bar");
      gc.num_wtgs = g.value("num_wtgs", 1);
      if (gc.num_wtgs < 1) ck.err(where + ".num_wtgs", "must be >= 1");
      if (!g.contains("pom_bus") || !g.at("pom_bus").is_string() || g.at("pom_bus").get<std::string>().empty()) {
        ck.err(where + ".pom_bus", "missing POM; every MRC group needs exactly one POM");
      } else {
        gc.pom_bus = g.at("pom_bus").get<std::string>();
      }
      if (g.contains("inner_buses")) {
        ck.guard(where + ".inner_buses", [&] { g.at("inner_buses").get_to(gc.inner_buses); });
        for (const auto& b : gc.inner_buses)
          if (b == gc.pom_bus && !gc.pom_bus.empty())
            ck.warn(where + ".inner_buses", "POM bus " + b + " listed as inner: loads there are not measured");
      }
      if (g.contains("load_share")) {
        gc.load_share = g.at("load_share").get<double>();
        if (!(gc.load_share >= 0.0 && gc.load_share <= 1.0)) ck.err(where + ".load_share", "must be in [0, 1]");
        share += gc.load_share;
        any_share = true;
      }
      const std::string split = g.value("u_ie_split", std::string("broadcast"));
      if (split == "broadcast")
        gc.split = UieSplit::Broadcast;
      else if (split == "divided")
        gc.split = UieSplit::Divided;
      else
        ck.err(where + ".u_ie_split", "must be 'broadcast' or 'divided'");
      c.groups.push_back(gc);
    }
    if (any_share && std::abs(share - 1.0) > 1e-9)
      ck.warn("groups", "load shares sum to " + std::to_string(share) + ", not 1");
  }

  // scenarios
  const json scd = section(defaults, "scenario");
  if (!config.contains("scenarios") || !config.at("scenarios").is_array() || config.at("scenarios").empty()) {
    ck.err("scenarios", "at least one scenario is required");
  } else {
    std::set<std::string> names;
    for (size_t i = 0; i < config.at("scenarios").size(); ++i) {
      const std::string where = "scenarios[" + std::to_string(i) + "]";
      const json s = merged(scd, config.at("scenarios")[i]);
      if (!ck.object(s, where)) continue;
      ck.keys(s, where,
              {"name", "controller", "washout", "disturbances", "fidelity", "delay_policy", "resample_interval",
               "duration", "max_step", "sample_rate", "diesel", "plots"});
      ScenarioConfig sc;
      ck.guard(where, [&] {
        sc.name = s.value("name", "scenario" + std::to_string(i + 1));
        for (char ch : sc.name)
          if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-'))
            throw ValidationError("name '" + sc.name + "' may only use letters, digits, '_' and '-'");
        if (!names.insert(sc.name).second) throw ValidationError("duplicate scenario name '" + sc.name + "'");
        sc.controller = s.value("controller", std::string("mrc"));
        if (sc.controller != "mrc" && sc.controller != "mrc_nominal" && sc.controller != "washout" &&
            sc.controller != "none")
          throw ValidationError("controller must be one of mrc, mrc_nominal, washout, none");
        if (sc.controller == "mrc_nominal" && !c.polytope)
          throw ValidationError("controller 'mrc_nominal' needs synthesis.polytope");
        const json w = section(s, "washout");
        sc.K_ie = w.value("K_ie", 0.1);
        sc.T_w = w.value("T_w", 0.01);
        if (!(sc.T_w > 0.0)) throw ValidationError("washout.T_w must be positive [s]");
        sc.fidelity = parse_fidelity(s.value("fidelity", std::string("nonlinear")));
        sc.delay_policy = parse_delay_policy(s.value("delay_policy", std::string("worst")));
        sc.resample_interval = s.value("resample_interval", 0.05);
        sc.duration = s.value("duration", 10.0);
        sc.max_step = s.value("max_step", 1e-3);
        sc.sample_rate = s.value("sample_rate", 1000.0);
        sc.plots = s.value("plots", true);
        if (!(sc.duration > 0.0)) throw ValidationError("duration must be positive [s]");
        if (!(sc.max_step > 0.0)) throw ValidationError("max_step must be positive [s]");
        if (!(sc.sample_rate > 0.0)) throw ValidationError("sample_rate must be positive [Hz]");
        if (s.contains("diesel")) {
          sc.diesel_override = s.at("diesel");
          DieselModel probe;
          merged(section(defaults, "diesel"), s.at("diesel")).get_to(probe);
          probe.validate();
        }
      });
      if (!s.contains("disturbances") || !s.at("disturbances").is_array()) {
        ck.err(where + ".disturbances", "required: list of {time [s], magnitude [p.u.], bus}");
      } else {
        for (size_t k = 0; k < s.at("disturbances").size(); ++k) {
          const std::string dw = where + ".disturbances[" + std::to_string(k) + "]";
          const json& dj2 = s.at("disturbances")[k];
          ck.keys(dj2, dw, {"time", "magnitude", "bus"});
          ck.guard(dw, [&] {
            Disturbance d;
            if (!dj2.contains("magnitude")) throw ValidationError("magnitude is required (no default size)");
            d.time = dj2.value("time", 1.0);
            d.magnitude = dj2.at("magnitude").get<double>();
            if (!dj2.contains("bus")) throw ValidationError("bus is required for routing");
            d.bus = dj2.at("bus").is_string() ? dj2.at("bus").get<std::string>()
                                              : std::to_string(dj2.at("bus").get<int>());
            if (!(d.time >= 0.0) || d.time > sc.duration) throw ValidationError("time outside the horizon");
            if (std::abs(d.magnitude) > 1.0) throw ValidationError("magnitude above 1 p.u. of the diesel rating");
            sc.disturbances.push_back(d);
          });
        }
      }
      c.scenarios.push_back(sc);
    }
  }
  c.resolved = {{"id", c.id}, {"config", config}, {"defaults", defaults}};
  return c;
}

std::string first_error(const std::vector<Diagnostic>& d) {
  std::ostringstream os;
  int n = 0;
  for (const auto& x : d)
    if (x.level == Diagnostic::Level::Error) os << (n++ ? "; " : "") << x.where << ": " << x.message;
  return os.str();
}

} // namespace

ConfigSpec parse_config(const json& defaults, const json& config) {
  std::vector<Diagnostic> d;
  auto c = parse_config_impl(defaults, config, d);
  if (has_errors(d)) throw ValidationError(first_error(d));
  return c;
}

Manifest load_manifest(const fs::path& p) {
  Manifest m;
  m.path = p;
  m.root = p.has_parent_path() ? p.parent_path() : fs::path(".");
  const std::string text = read_text(p);
  m.manifest_hash = content_hash(text);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(p.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("configs") || !j.at("configs").is_object())
    throw ValidationError(p.string() + ": 'configs' must map config ids to files");
  for (auto it = j.at("configs").begin(); it != j.at("configs").end(); ++it)
    m.configs[it.key()] = m.root / it.value().get<std::string>();
  if (j.contains("model_file")) m.model_file = m.root / j.at("model_file").get<std::string>();
  if (j.contains("output_dir")) m.output_dir = m.root / j.at("output_dir").get<std::string>();
  if (j.contains("solver")) j.at("solver").get_to(m.solver);
  if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

namespace {

fs::path config_path(const Manifest& m, const std::string& id) {
  auto it = m.configs.find(id);
  if (it != m.configs.end()) return it->second;
  if (fs::exists(id)) return id; // custom config file
  throw ValidationError("unknown config '" + id + "' (not in the manifest and not a file)");
}

json model_defaults(const Manifest& m) { return m.model_file.empty() ? json::object() : read_json(m.model_file); }

} // namespace

ConfigSpec load_config(const Manifest& m, const std::string& id) {
  const fs::path p = config_path(m, id);
  try {
    auto c = parse_config(model_defaults(m), read_json(p));
    if (c.id == "custom") c.id = m.configs.count(id) ? id : p.stem().string();
    // manifest solver options apply unless the config overrides them
    json sj = read_json(p).value("synthesis", json::object());
    if (!sj.contains("solver")) c.synthesis.solver = m.solver;
    return c;
  } catch (const ValidationError& e) {
    throw ValidationError(p.string() + ": " + e.what());
  }
}

std::vector<Diagnostic> validate_inputs(const fs::path& manifest) {
  std::vector<Diagnostic> out;
  Checker ck(out);
  Manifest m;
  try {
    m = load_manifest(manifest);
  } catch (const std::exception& e) {
    ck.err(manifest.string(), e.what());
    return out;
  }
  const json mj = read_json(manifest);
  ck.keys(mj, manifest.string(), {"configs", "model_file", "output_dir", "solver", "seed", "description"});
  if (!mj.contains("seed")) ck.warn(manifest.string() + ".seed", "omitted; default seed 1 used");
  json defaults = json::object();
  if (!m.model_file.empty()) {
    try {
      defaults = read_json(m.model_file);
    } catch (const std::exception& e) {
      ck.err(m.model_file.string(), e.what());
    }
  } else {
    ck.warn(manifest.string() + ".model_file", "omitted; built-in parameter defaults used");
  }
  for (const auto& [id, path] : m.configs) {
    if (!fs::exists(path)) {
      ck.err(path.string(), "config '" + id + "' file does not exist");
      continue;
    }
    json cj;
    try {
      cj = read_json(path);
    } catch (const std::exception& e) {
      ck.err(path.string(), e.what());
      continue;
    }
    std::vector<Diagnostic> local;
    parse_config_impl(defaults, cj, local);
    for (auto& d : local) {
      d.where = path.filename().string() + ": " + d.where;
      out.push_back(d);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// pipeline

int PipelineResult::executed() const {
  int n = 0;
  for (const auto& s : stages) n += s.cached ? 0 : 1;
  return n;
}

const StageRecord* PipelineResult::stage(const std::string& name) const {
  for (const auto& s : stages)
    if (s.name == name) return &s;
  return nullptr;
}

ReducedModel group_reduced(const ReducedModel& unit, int num_wtgs, double unit_base) {
  if (num_wtgs == 1) return unit;
  return aggregate_wtgs(std::vector<ReducedModel>(static_cast<size_t>(num_wtgs), unit),
                        std::vector<double>(static_cast<size_t>(num_wtgs), unit_base));
}

Scenario build_scenario(const ConfigSpec& c, const ScenarioConfig& sc, const WtgPlant& w,
                        const std::vector<GroupSynthesis>& syn, std::uint64_t seed) {
  Scenario s;
  s.name = sc.name;
  s.config_id = std::atoi(c.id.c_str());
  s.wtg = w;
  s.fidelity = sc.fidelity;
  s.delay.policy = sc.delay_policy;
  s.delay.bounds = c.delays;
  s.delay.resample_interval = sc.resample_interval;
  s.delay.seed = seed;
  s.duration = sc.duration;
  s.max_step = sc.max_step;
  s.sample_rate = sc.sample_rate;
  s.disturbances = sc.disturbances;
  for (size_t i = 0; i < c.groups.size(); ++i) {
    const auto& gc = c.groups[i];
    MrcGroup g;
    g.name = gc.name;
    g.diesel = gc.diesel;
    if (sc.diesel_override) {
      json dj = gc.diesel;
      dj.merge_patch(*sc.diesel_override);
      dj.get_to(g.diesel);
    }
    g.reference = gc.reference;
    g.num_wtgs = gc.num_wtgs;
    g.pom_bus = gc.pom_bus;
    g.inner_buses = gc.inner_buses;
    g.load_share = gc.load_share;
    g.split = gc.split;
    if (sc.controller == "mrc" || sc.controller == "mrc_nominal") {
      if (i >= syn.size()) throw ValidationError("scenario '" + sc.name + "' needs a synthesized controller");
      const auto& r = sc.controller == "mrc_nominal" && syn[i].nominal ? *syn[i].nominal : syn[i].result;
      g.controller.kind = ControllerSpec::Kind::Mrc;
      g.controller.K = r.K;
    } else if (sc.controller == "washout") {
      g.controller.kind = ControllerSpec::Kind::Washout;
      g.controller.K_ie = sc.K_ie;
      g.controller.T_w = sc.T_w;
    }
    s.groups.push_back(g);
  }
  return s;
}

std::string summary_table(const std::vector<ScenarioReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(22) << "scenario" << std::right << std::setw(11) << "nadir[Hz]" << std::setw(9)
     << "t_nad[s]" << std::setw(12) << "RoCoF[Hz/s]" << std::setw(10) << "ss[Hz]" << std::setw(11) << "e_rms[Hz]"
     << std::setw(11) << "e_peak[Hz]" << std::setw(9) << "H_ie[s]" << std::setw(8) << "fit_res" << std::setw(10)
     << "|e|/|w|" << std::setw(9) << "sqrt(g)" << '\n';
  os << std::fixed;
  for (const auto& r : reports) {
    os << std::left << std::setw(22) << r.name << std::right << std::setprecision(4) << std::setw(11) << r.freq.nadir
       << std::setprecision(3) << std::setw(9) << r.freq.t_nadir << std::setw(12) << r.freq.max_rocof
       << std::setprecision(4) << std::setw(10) << r.freq.steady_state << std::setw(11) << r.tracking.rms
       << std::setw(11) << r.tracking.peak;
    if (r.inertia.identifiable)
      os << std::setprecision(3) << std::setw(9) << r.inertia.H_ie << std::setw(8) << r.inertia.residual;
    else
      os << std::setw(9) << "n/a" << std::setw(8) << "-";
    os << std::setprecision(3) << std::setw(10) << r.tracking.ratio;
    if (r.gamma_bound > 0.0)
      os << std::setw(9) << r.gamma_bound;
    else
      os << std::setw(9) << "-";
    os << '\n';
  }
  return os.str();
}

namespace {

using Clock = std::chrono::steady_clock;

class Runner {
public:
  Runner(const Manifest& m, const ConfigSpec& c, const RunOptions& opt, PipelineResult& res)
      : m_(m), c_(c), opt_(opt), res_(res) {
    seed_ = opt.seed.value_or(m.seed);
  }

  std::string key(const std::string& stage, const json& params, const std::vector<std::string>& upstream) const {
    json k = {{"stage", stage}, {"version", tool_version()}, {"params", params}, {"upstream", upstream},
              {"seed", seed_}};
    return content_hash(k.dump());
  }

  json meta(const std::string& stage, const std::string& k, const json& params,
            const std::vector<std::string>& upstream) const {
    return {{"tool", "mrcie"},
            {"version", tool_version()},
            {"stage", stage},
            {"config", c_.id},
            {"key", k},
            {"params_hash", content_hash(params.dump())},
            {"inputs", upstream},
            {"seed", seed_}};
  }

  // loaded artifact when its key matches
  std::optional<json> cached(const fs::path& p, const std::string& k) const {
    if (opt_.force || !fs::exists(p)) return std::nullopt;
    try {
      json j = read_json(p);
      if (j.contains("meta") && j.at("meta").value("key", "") == k) return j;
    } catch (const std::exception&) {
    }
    return std::nullopt;
  }

  void log(const std::string& s) const {
    if (opt_.log) opt_.log(s);
  }

  template <class F>
  auto stage(const std::string& name, const std::string& k, F&& f) {
    try {
      return f();
    } catch (const Error& e) {
      throw Error(e.kind(), "stage '" + name + "' failed (config " + c_.id + ", inputs " + k + "): " + e.what());
    } catch (const std::exception& e) {
      throw NumericError("stage '" + name + "' failed (config " + c_.id + ", inputs " + k + "): " + e.what());
    }
  }

  void record(const std::string& name, bool hit, const std::string& k, std::vector<fs::path> files,
              Clock::time_point t0) {
    StageRecord r;
    r.name = name;
    r.cached = hit;
    r.key = k;
    r.files = std::move(files);
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    log(std::string(hit ? "  cached   " : "  ran      ") + name + "  [" + k + "]");
    res_.stages.push_back(std::move(r));
  }

  fs::path out(const std::string& f) const { return res_.out / f; }

  std::uint64_t seed() const { return seed_; }

private:
  const Manifest& m_;
  const ConfigSpec& c_;
  const RunOptions& opt_;
  PipelineResult& res_;
  std::uint64_t seed_ = 1;
};

json scenario_params(const ScenarioConfig& sc) {
  json d = json::array();
  for (const auto& x : sc.disturbances) d.push_back({{"time", x.time}, {"magnitude", x.magnitude}, {"bus", x.bus}});
  return {{"name", sc.name},
          {"controller", sc.controller},
          {"K_ie", sc.K_ie},
          {"T_w", sc.T_w},
          {"disturbances", d},
          {"fidelity", to_string(sc.fidelity)},
          {"delay_policy", to_string(sc.delay_policy)},
          {"resample_interval", sc.resample_interval},
          {"duration", sc.duration},
          {"max_step", sc.max_step},
          {"sample_rate", sc.sample_rate},
          {"diesel", sc.diesel_override.value_or(json())}};
}

json group_params(const GroupConfig& g) {
  return {{"name", g.name},
          {"diesel", g.diesel},
          {"reference", g.reference},
          {"num_wtgs", g.num_wtgs},
          {"pom_bus", g.pom_bus},
          {"inner_buses", g.inner_buses},
          {"load_share", g.load_share},
          {"u_ie_split", g.split == UieSplit::Divided ? "divided" : "broadcast"}};
}

SynthesisResult require_ok(SynthesisResult r, const std::string& what) {
  if (r.ok()) return r;
  const std::string msg = what + ": " + sdp::to_string(r.status) + (r.message.empty() ? "" : " (" + r.message + ")");
  if (r.status == sdp::Status::Infeasible) throw InfeasibleError(msg);
  throw NumericError(msg);
}

} // namespace

PipelineResult run_pipeline(const Manifest& m, const std::string& config_id, const RunOptions& opt) {
  const ConfigSpec c = load_config(m, config_id);
  PipelineResult res;
  res.config_id = c.id;
  res.out = opt.out.empty() ? m.output_dir / ("config" + c.id) : opt.out;
  fs::create_directories(res.out);
  Runner run(m, c, opt, res);
  run.log("config " + c.id + " -> " + res.out.string());

  // equilibrium
  const json eq_params = {{"dfig", c.dfig}, {"targets", c.targets}};
  const std::string k_eq = run.key("equilibrium", eq_params, {});
  {
    const auto t0 = Clock::now();
    const fs::path p = run.out("operating_point.json");
    bool hit = false;
    run.stage("equilibrium", k_eq, [&] {
      if (auto j = run.cached(p, k_eq)) {
        j->at("operating_point").get_to(res.op);
        hit = true;
      } else {
        res.op = solve_equilibrium(c.dfig, c.targets);
        write_text(p, dump({{"meta", run.meta("equilibrium", k_eq, eq_params, {})}, {"operating_point", res.op}}));
      }
      return 0;
    });
    run.record("equilibrium", hit, k_eq, {p}, t0);
  }
  if (opt.until == Stage::Equilibrium) return res;

  // linearize + modal
  const std::string k_lin = run.key("linearize", json::object(), {k_eq});
  {
    const auto t0 = Clock::now();
    const fs::path p = run.out("linear10.json"), pm = run.out("modal.json");
    bool hit = false;
    run.stage("linearize", k_lin, [&] {
      auto j = run.cached(p, k_lin);
      auto jm = run.cached(pm, k_lin);
      if (j && jm) {
        j->at("model").get_to(res.linear);
        res.modal = jm->at("modal");
        hit = true;
      } else {
        res.linear = linearize(c.dfig, res.op);
        auto ma = modal_analysis(res.linear.A);
        auto rm = select_relevant_mode(ma, res.linear, "omega_r");
        res.modal = modal_to_json(ma, res.linear.states);
        res.modal["relevant"] = {{"state", "omega_r"},
                                 {"lambda_r", rm.lambda_r},
                                 {"mode_index", rm.mode_index},
                                 {"participation", rm.participation},
                                 {"tie", rm.tie}};
        write_text(p, dump({{"meta", run.meta("linearize", k_lin, json::object(), {k_eq})}, {"model", res.linear}}));
        write_text(pm, dump({{"meta", run.meta("linearize", k_lin, json::object(), {k_eq})}, {"modal", res.modal}}));
      }
      return 0;
    });
    run.record("linearize", hit, k_lin, {p, pm}, t0);
  }
  if (opt.until == Stage::Linearize) return res;

  // reduce
  const json red_params = {{"relevant", "omega_r"}, {"delta_fraction", c.delta_fraction}};
  const std::string k_red = run.key("reduce", red_params, {k_lin});
  {
    const auto t0 = Clock::now();
    const fs::path p = run.out("reduced.json");
    bool hit = false;
    run.stage("reduce", k_red, [&] {
      if (auto j = run.cached(p, k_red)) {
        j->at("reduced").get_to(res.reduced);
        hit = true;
      } else {
        const double lr = res.modal.at("relevant").at("lambda_r").get<double>();
        res.reduced = reduce(partition(res.linear, "omega_r"), lr, c.delta_fraction);
        write_text(p, dump({{"meta", run.meta("reduce", k_red, red_params, {k_lin})}, {"reduced", res.reduced}}));
      }
      return 0;
    });
    run.record("reduce", hit, k_red, {p}, t0);
  }
  if (opt.until == Stage::Reduce) return res;

  // synthesize
  bool want_nominal = false;
  for (const auto& sc : c.scenarios) want_nominal = want_nominal || sc.controller == "mrc_nominal";
  json syn_params = {{"delays", c.delays},
                     {"interval_weighting", c.synthesis.interval_weighting},
                     {"weights", {c.synthesis.gamma_weight, c.synthesis.ka_weight, c.synthesis.kb_weight}},
                     {"solver", c.synthesis.solver},
                     {"polytope", c.polytope ? json(*c.polytope) : json()},
                     {"nominal", want_nominal},
                     {"unit_base", c.dfig.S_base},
                     {"groups", json::array()}};
  for (const auto& g : c.groups)
    syn_params["groups"].push_back({{"diesel", g.diesel}, {"reference", g.reference}, {"num_wtgs", g.num_wtgs}});
  const std::string k_syn = run.key("synthesize", syn_params, {k_red});
  {
    const auto t0 = Clock::now();
    const fs::path p = run.out("synthesis.json");
    bool hit = false;
    run.stage("synthesize", k_syn, [&] {
      if (auto j = run.cached(p, k_syn)) {
        for (const auto& gj : j->at("groups")) {
          GroupSynthesis gs;
          gs.group = gj.at("group").get<std::string>();
          gj.at("result").get_to(gs.result);
          if (gj.contains("nominal")) {
            SynthesisResult n;
            gj.at("nominal").get_to(n);
            gs.nominal = n;
          }
          res.synthesis.push_back(gs);
        }
        hit = true;
      } else {
        std::map<std::string, SynthesisResult> memo; // identical groups solve once
        auto solve = [&](const GroupConfig& g, bool robust) {
          json sig = {{"d", g.diesel}, {"r", g.reference}, {"n", g.num_wtgs}, {"robust", robust}};
          const std::string sk = sig.dump();
          if (auto it = memo.find(sk); it != memo.end()) return it->second;
          const ReducedModel rg = group_reduced(res.reduced, g.num_wtgs, c.dfig.S_base);
          SynthesisResult r;
          if (robust) {
            std::vector<AugmentedSystem> verts;
            for (const auto& pm : enumerate_vertices(g.diesel, rg, *c.polytope))
              verts.push_back(assemble_augmented(pm, g.reference, c.delays));
            run.log("  solving robust LMI for group " + g.name + " (" + std::to_string(verts.size()) + " vertices)");
            r = synthesize_robust(verts, c.synthesis);
          } else {
            r = synthesize(assemble_augmented(assemble_plant(g.diesel, rg), g.reference, c.delays), c.synthesis);
          }
          r.seconds = 0.0; // keep artifacts reproducible
          memo[sk] = r;
          return r;
        };
        json groups = json::array();
        std::string failure;
        for (const auto& g : c.groups) {
          GroupSynthesis gs;
          gs.group = g.name;
          gs.result = solve(g, c.polytope.has_value());
          if (c.polytope && want_nominal) gs.nominal = solve(g, false);
          json gj = {{"group", g.name}, {"result", gs.result}};
          if (gs.nominal) gj["nominal"] = *gs.nominal;
          groups.push_back(gj);
          res.synthesis.push_back(gs);
        }
        write_text(p, dump({{"meta", run.meta("synthesize", k_syn, syn_params, {k_red})}, {"groups", groups}}));
      }
      for (const auto& gs : res.synthesis) {
        require_ok(gs.result, "group " + gs.group);
        if (gs.nominal) require_ok(*gs.nominal, "group " + gs.group + " (nominal)");
      }
      return 0;
    });
    run.record("synthesize", hit, k_syn, {p}, t0);
  }
  if (opt.until == Stage::Synthesize) return res;

  // simulate
  WtgPlant w;
  w.op = res.op;
  w.model = res.op.calibrated(c.dfig);
  w.linear = res.linear;
  w.reduced = res.reduced;
  std::vector<std::string> sim_keys;
  std::vector<const ScenarioConfig*> active;
  for (const auto& sc0 : c.scenarios) {
    if (!opt.only_scenarios.empty() &&
        std::find(opt.only_scenarios.begin(), opt.only_scenarios.end(), sc0.name) == opt.only_scenarios.end())
      continue;
    active.push_back(&sc0);
  }
  if (active.empty()) throw ValidationError("no scenario selected");
  std::vector<ScenarioConfig> scs;
  for (const auto* a : active) {
    ScenarioConfig sc = *a;
    if (opt.fidelity) sc.fidelity = *opt.fidelity;
    if (opt.delay_policy) sc.delay_policy = *opt.delay_policy;
    scs.push_back(sc);
  }
  json routing = json::array();
  for (const auto& g : c.groups) routing.push_back(group_params(g));
  for (const auto& sc : scs) {
    const json sp = {{"scenario", scenario_params(sc)}, {"groups", routing}, {"delays", c.delays}};
    const std::string k_sim = run.key("simulate", sp, {k_syn});
    sim_keys.push_back(k_sim);
    const auto t0 = Clock::now();
    const fs::path pcsv = run.out("trajectory_" + sc.name + ".csv");
    const fs::path pj = run.out("trajectory_" + sc.name + ".json");
    const fs::path psvg = run.out("trajectory_" + sc.name + ".svg");
    bool hit = false;
    run.stage("simulate:" + sc.name, k_sim, [&] {
      if (auto j = run.cached(pj, k_sim); j && fs::exists(pcsv) && file_hash(pcsv) == j->value("csv_hash", "")) {
        res.trajectories[sc.name] = read_csv(pcsv);
        hit = true;
      } else {
        Scenario s = build_scenario(c, sc, w, res.synthesis, run.seed());
        Trajectory tr = simulate(s);
        const std::string csv = to_csv(tr);
        write_text(pcsv, csv);
        write_text(pj, dump({{"meta", run.meta("simulate", k_sim, sp, {k_syn})},
                             {"scenario", sp.at("scenario")},
                             {"columns", tr.columns},
                             {"samples", tr.samples()},
                             {"csv", pcsv.filename().string()},
                             {"csv_hash", content_hash(csv)}}));
        res.trajectories[sc.name] = std::move(tr);
      }
      return 0;
    });
    std::vector<fs::path> files = {pcsv, pj};
    if (opt.plots && sc.plots) {
      const auto& tr = res.trajectories[sc.name];
      std::vector<PlotPanel> panels;
      for (size_t g = 0; g < c.groups.size(); ++g) {
        auto pg = standard_panels(tr, static_cast<int>(g), c.groups[g].diesel.f_bar);
        if (c.groups.size() > 1)
          for (auto& x : pg) x.title += " (" + c.groups[g].name + ")";
        panels.insert(panels.end(), pg.begin(), pg.end());
      }
      write_text(psvg, to_svg(tr, panels, "config " + c.id + " / " + sc.name));
      files.push_back(psvg);
    }
    run.record("simulate:" + sc.name, hit, k_sim, files, t0);
  }
  if (opt.until == Stage::Simulate) return res;

  // report
  const json rp = {{"fit_window", 2.0}, {"scenarios", sim_keys}};
  const std::string k_rep = run.key("report", rp, sim_keys);
  {
    const auto t0 = Clock::now();
    const fs::path p = run.out("report.json"), pt = run.out("report.txt");
    bool hit = false;
    run.stage("report", k_rep, [&] {
      for (const auto& sc : scs) {
        const double t_dist = sc.disturbances.empty() ? 0.0 : sc.disturbances.front().time;
        double bound = 0.0;
        if (sc.controller == "mrc" || sc.controller == "mrc_nominal") {
          for (const auto& gs : res.synthesis) {
            const auto& r = sc.controller == "mrc_nominal" && gs.nominal ? *gs.nominal : gs.result;
            bound = std::max(bound, r.tracking_bound());
          }
        }
        res.reports.push_back(
            make_report(sc.name, res.trajectories.at(sc.name), t_dist, c.groups.front().diesel.f_bar, bound));
      }
      if (run.cached(p, k_rep) && fs::exists(pt)) {
        hit = true;
        return 0;
      }
      json reps = json::array();
      for (const auto& r : res.reports) reps.push_back(r);
      json syn = json::array();
      for (const auto& gs : res.synthesis)
        syn.push_back({{"group", gs.group},
                       {"gamma", gs.result.gamma},
                       {"tracking_bound", gs.result.tracking_bound()},
                       {"K", matrix_to_json(gs.result.K)}});
      write_text(p, dump({{"meta", run.meta("report", k_rep, rp, sim_keys)},
                          {"config", {{"id", c.id}, {"name", c.name}, {"description", c.description}}},
                          {"synthesis", syn},
                          {"scenarios", reps}}));
      write_text(pt, "config " + c.id + ": " + c.name + "\n" + summary_table(res.reports));
      return 0;
    });
    run.record("report", hit, k_rep, {p, pt}, t0);
  }
  return res;
}

} // namespace mrcie
