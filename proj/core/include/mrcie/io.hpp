#pragma once

#include "mrcie/metrics.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mrcie {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// hashing

/// 64-bit FNV-1a, hex encoded. Stable across platforms; used for cache keys, not security.
std::string content_hash(std::string_view bytes);
std::string file_hash(const std::filesystem::path& p);

std::string read_text(const std::filesystem::path& p);
/// Writes only when the content differs, so unchanged artifacts keep their mtime.
void write_text(const std::filesystem::path& p, const std::string& s);
json read_json(const std::filesystem::path& p);
/// Pretty-printed with sorted keys and a trailing newline.
std::string dump(const json& j);

// ---------------------------------------------------------------------------
// matrices

json matrix_to_json(const MatrixXd& M);
MatrixXd matrix_from_json(const json& j);

// ---------------------------------------------------------------------------
// model records (missing keys keep the struct defaults)

void to_json(json& j, const DieselModel& m);
void from_json(const json& j, DieselModel& m);
void to_json(json& j, const ReferenceModel& m);
void from_json(const json& j, ReferenceModel& m);
void to_json(json& j, const TurbineCurve& m);
void from_json(const json& j, TurbineCurve& m);
void to_json(json& j, const DfigModel& m);
void from_json(const json& j, DfigModel& m);
void to_json(json& j, const EquilibriumTargets& t);
void from_json(const json& j, EquilibriumTargets& t);
void to_json(json& j, const DelayBounds& d);
void from_json(const json& j, DelayBounds& d);
void to_json(json& j, const PolytopeSpec& p);
void from_json(const json& j, PolytopeSpec& p);

// ---------------------------------------------------------------------------
// stage results

void to_json(json& j, const DfigOperatingPoint& op);
void from_json(const json& j, DfigOperatingPoint& op);
void to_json(json& j, const LinearStateSpace& ss);
void from_json(const json& j, LinearStateSpace& ss);
json modal_to_json(const ModalAnalysis& ma, const std::vector<std::string>& states);
void to_json(json& j, const ReducedModel& r);
void from_json(const json& j, ReducedModel& r);
void to_json(json& j, const SynthesisResult& r);
void from_json(const json& j, SynthesisResult& r);
void to_json(json& j, const InertiaFit& f);
void to_json(json& j, const FrequencyMetrics& f);
void to_json(json& j, const TrackingMetrics& t);
void to_json(json& j, const ScenarioReport& r);

// ---------------------------------------------------------------------------
// trajectories

/// Header row then one row per sample, 10 significant digits.
void write_csv(const Trajectory& tr, const std::filesystem::path& p);
std::string to_csv(const Trajectory& tr);
Trajectory read_csv(const std::filesystem::path& p);

struct PlotPanel {
  std::string title;
  std::vector<std::string> columns;
  double scale = 1.0;  // applied to every column
  double offset = 0.0; // added after scaling
  std::string unit;
};

/// Stacked line plots, one panel per entry; missing columns are skipped.
std::string to_svg(const Trajectory& tr, const std::vector<PlotPanel>& panels, const std::string& title);
/// Speeds, WTG speed, WTG power and control input of group g.
std::vector<PlotPanel> standard_panels(const Trajectory& tr, int group = 0, double f_bar = 60.0);

namespace sdp {
void to_json(json& j, const SolverOptions& o);
void from_json(const json& j, SolverOptions& o);
} // namespace sdp

} // namespace mrcie
