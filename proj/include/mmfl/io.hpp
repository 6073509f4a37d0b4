#pragma once

#include "mmfl/benchmark.hpp"
#include "mmfl/rank_selection.hpp"
#include "mmfl/simulation.hpp"
#include "mmfl/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mmfl::io {

using Json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kBundleVersion = 1;

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const fs::path& path, const std::string& content);
std::string read_file(const fs::path& path);

// %.17g; non-finite values become "nan", "inf", "-inf".
std::string format_number(double value);

struct CsvTable {
  std::vector<std::string> header;  // without the sample_id column
  std::vector<std::string> ids;
  Matrix values;
  std::vector<std::vector<bool>> missing;  // per row, per column: empty or NA cell
};

// First column must be sample_id; a header row is required.
CsvTable read_csv(const fs::path& path);

// Modality k of `data`; rows of unavailable samples are written as NA.
std::string modality_csv(const MultiModalDataset& data, int k);
std::string labels_csv(const std::vector<std::string>& ids, const Vector& labels);
std::string availability_csv(const MultiModalDataset& data);

// Reads <dir>/<name>.csv for each modality name plus optional labels.csv and
// availability.csv. Rows are aligned on sample_id with the first modality.
MultiModalDataset load_dataset(const fs::path& dir, const std::vector<std::string>& modality_names,
                               Task task, std::optional<LabelCoding> coding = std::nullopt,
                               bool require_labels = true);
// Writes modality, labels (in original coding) and availability CSVs.
void save_dataset(const fs::path& dir, const MultiModalDataset& data);

Json structure_to_json(const StructureSpec& spec);
StructureSpec structure_from_json(const Json& json);

Json fit_config_to_json(const FitConfig& config);
// Overlays the recognised keys of `json` onto `base`.
FitConfig fit_config_from_json(const Json& json, FitConfig base);

// "seed" is required; everything else defaults to the standard protocol.
SimulationConfig simulation_config_from_json(const Json& json);
Json simulation_config_to_json(const SimulationConfig& config);
Json ground_truth_to_json(const GroundTruth& truth);

// Column-major little-endian float64, base64 encoded.
Json matrix_blob(const Matrix& m);
Matrix matrix_from_blob(const Json& blob, const std::string& what);

Json model_to_json(const FissionModel& model, bool include_u = true);
FissionModel model_from_json(const Json& json);
void save_model(const fs::path& path, const FissionModel& model, bool include_u = true);
FissionModel load_model(const fs::path& path);
std::string sha256_hex(const std::string& bytes);

Json report_to_json(const EvalReport& report);
// Rows = cohort/model cells; columns = mean and sd of AUC, accuracy and fit time.
std::string report_to_csv(const EvalReport& report);

std::string loading_profile_csv(const std::vector<LoadingProfileRow>& rows);
std::string trace_jsonl(const std::vector<RankTraceEntry>& trace);

}  // namespace mmfl::io
