#pragma once

#include "mrcie/io.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mrcie {

const char* tool_version();

// ---------------------------------------------------------------------------
// input files

struct GroupConfig {
  std::string name = "group";
  DieselModel diesel;
  ReferenceModel reference;
  int num_wtgs = 1;
  std::string pom_bus;
  std::vector<std::string> inner_buses;
  double load_share = -1.0;
  UieSplit split = UieSplit::Broadcast;
};

struct ScenarioConfig {
  std::string name = "step";
  // "mrc" (robust when a polytope is configured), "mrc_nominal", "washout", "none"
  std::string controller = "mrc";
  double K_ie = 0.1, T_w = 0.01;
  std::vector<Disturbance> disturbances;
  Fidelity fidelity = Fidelity::Nonlinear;
  DelayPolicy delay_policy = DelayPolicy::Worst;
  double resample_interval = 0.05;
  double duration = 10.0, max_step = 1e-3, sample_rate = 1000.0;
  std::optional<json> diesel_override; // patch applied to every group's plant (not the design model)
  bool plots = true;
};

struct ConfigSpec {
  std::string id, name, description;
  DfigModel dfig;
  EquilibriumTargets targets;
  double delta_fraction = 0.1;
  DelayBounds delays;
  SynthesisOptions synthesis;
  std::optional<PolytopeSpec> polytope;
  std::vector<GroupConfig> groups;
  std::vector<ScenarioConfig> scenarios;
  json resolved; // merged defaults + config, as used
};

struct Manifest {
  std::filesystem::path path;   // manifest file
  std::filesystem::path root;   // directory that relative paths resolve against
  std::filesystem::path model_file;
  std::map<std::string, std::filesystem::path> configs;
  std::filesystem::path output_dir = "out";
  sdp::SolverOptions solver;
  std::uint64_t seed = 1;
  std::string manifest_hash;
};

Manifest load_manifest(const std::filesystem::path& p);
/// Merges the manifest model defaults under the config file and parses the result.
ConfigSpec load_config(const Manifest& m, const std::string& config_id);
ConfigSpec parse_config(const json& defaults, const json& config);

struct Diagnostic {
  enum class Level { Warning, Error } level = Level::Error;
  std::string where;
  std::string message;
};

/// Schema, unit and invariant checks of the manifest and every referenced file. Never throws.
std::vector<Diagnostic> validate_inputs(const std::filesystem::path& manifest);
bool has_errors(const std::vector<Diagnostic>& d);

// ---------------------------------------------------------------------------
// pipeline

enum class Stage { Equilibrium, Linearize, Reduce, Synthesize, Simulate, Report };
const char* to_string(Stage s);

struct RunOptions {
  std::filesystem::path out; // empty: manifest output_dir / config id
  std::optional<std::uint64_t> seed;
  std::optional<Fidelity> fidelity;
  std::optional<DelayPolicy> delay_policy;
  bool plots = false;
  bool force = false; // ignore cached artifacts
  Stage until = Stage::Report;
  std::vector<std::string> only_scenarios; // empty: all
  std::function<void(const std::string&)> log;
};

struct StageRecord {
  std::string name;
  bool cached = false;
  std::string key;
  std::vector<std::filesystem::path> files;
  double seconds = 0.0;
};

struct GroupSynthesis {
  std::string group;
  SynthesisResult result;         // used by "mrc"
  std::optional<SynthesisResult> nominal; // when a polytope is configured and requested
};

struct PipelineResult {
  std::string config_id;
  std::filesystem::path out;
  std::vector<StageRecord> stages;
  DfigOperatingPoint op;
  LinearStateSpace linear;
  json modal;
  ReducedModel reduced;
  std::vector<GroupSynthesis> synthesis;
  std::map<std::string, Trajectory> trajectories;
  std::vector<ScenarioReport> reports;

  int executed() const;
  const StageRecord* stage(const std::string& name) const;
};

PipelineResult run_pipeline(const Manifest& m, const std::string& config_id, const RunOptions& opt = {});

/// Scenario assembled from a config, its synthesized controllers and a WTG plant.
Scenario build_scenario(const ConfigSpec& c, const ScenarioConfig& sc, const WtgPlant& w,
                        const std::vector<GroupSynthesis>& syn, std::uint64_t seed);

/// Reduced model seen by group g's synthesis (aggregated over its WTGs).
ReducedModel group_reduced(const ReducedModel& unit, int num_wtgs, double unit_base);

/// Fixed-width summary table of reports.
std::string summary_table(const std::vector<ScenarioReport>& reports);

} // namespace mrcie
