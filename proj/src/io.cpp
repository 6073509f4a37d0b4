#include "mmfl/io.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

namespace mmfl::io {

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw ValidationError("cannot create directory " + path.parent_path().string() + ": " +
                                  ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << content;
    out.flush();
    if (!out) {
      fs::remove(tmp);
      throw ValidationError("write failed for " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw ValidationError("cannot replace " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t start = cell.find_first_not_of(' ');
    cells.push_back(start == std::string::npos ? "" : cell.substr(start));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA" || cell == "nan"; }

double parse_cell(const std::string& cell, const fs::path& path, std::size_t line, std::size_t col) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used == cell.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError(path.string() + ":" + std::to_string(line) + ": column " +
                        std::to_string(col + 1) + " is not a number: '" + cell + "'");
}

// JSON cannot hold non-finite numbers; they are written as strings.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(format_number(v)); }

double as_number(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    throw ValidationError("expected a number, got '" + s + "'");
  }
  return j.get<double>();
}

const Json& require(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw ValidationError(where + ": missing required key \"" + key + "\"");
  return j.at(key);
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

Json matrix_rows_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + " is empty");
  auto header = split_line(line);
  if (header.empty() || header[0] != "sample_id")
    throw ValidationError(path.string() + ": first header column must be sample_id");
  CsvTable table;
  table.header.assign(header.begin() + 1, header.end());
  const std::size_t cols = table.header.size();
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_line(line);
    if (cells.size() != cols + 1)
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(cols + 1) + " columns, found " +
                            std::to_string(cells.size()));
    table.ids.push_back(cells[0]);
    std::vector<double> values(cols);
    std::vector<bool> missing(cols, false);
    for (std::size_t c = 0; c < cols; ++c) {
      if (is_missing(cells[c + 1])) {
        missing[c] = true;
        values[c] = 0.0;
      } else {
        values[c] = parse_cell(cells[c + 1], path, line_no, c + 1);
      }
    }
    rows.push_back(std::move(values));
    table.missing.push_back(std::move(missing));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < cols; ++c) table.values(i, c) = rows[i][c];
  return table;
}

std::string modality_csv(const MultiModalDataset& data, int k) {
  std::ostringstream out;
  out << "sample_id";
  const auto& names = data.feature_names();
  for (int j = 0; j < data.features(k); ++j) {
    out << ',';
    if (!names.empty() && !names[k].empty())
      out << names[k][j];
    else
      out << data.modality_names()[k] << "_f" << (j + 1);
  }
  out << '\n';
  const Matrix& X = data.modality(k);
  for (int i = 0; i < data.samples(); ++i) {
    out << data.sample_ids()[i];
    for (int j = 0; j < data.features(k); ++j)
      out << ',' << (data.available(i, k) ? format_number(X(i, j)) : "NA");
    out << '\n';
  }
  return out.str();
}

std::string labels_csv(const std::vector<std::string>& ids, const Vector& labels) {
  std::ostringstream out;
  out << "sample_id,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    out << ids[i] << ',' << format_number(labels(static_cast<Eigen::Index>(i))) << '\n';
  return out.str();
}

std::string availability_csv(const MultiModalDataset& data) {
  std::ostringstream out;
  out << "sample_id";
  for (const auto& name : data.modality_names()) out << ',' << name;
  out << '\n';
  for (int i = 0; i < data.samples(); ++i) {
    out << data.sample_ids()[i];
    for (int k = 0; k < data.modality_count(); ++k) out << ',' << (data.available(i, k) ? 1 : 0);
    out << '\n';
  }
  return out.str();
}

MultiModalDataset load_dataset(const fs::path& dir, const std::vector<std::string>& modality_names,
                               Task task, std::optional<LabelCoding> coding, bool require_labels) {
  if (modality_names.empty()) throw ValidationError("no modality names given");
  RawDataset raw;
  raw.modality_names = modality_names;
  std::vector<CsvTable> tables;
  for (const auto& name : modality_names) {
    const fs::path file = dir / (name + ".csv");
    if (!fs::exists(file))
      throw ValidationError("modality '" + name + "' has no file " + file.string());
    tables.push_back(read_csv(file));
  }
  const auto& ids = tables.front().ids;
  if (ids.empty()) throw ValidationError(modality_names.front() + ".csv has no samples");
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (!index.emplace(ids[i], static_cast<int>(i)).second)
      throw ValidationError("duplicate sample_id '" + ids[i] + "'");
  const int n = static_cast<int>(ids.size());

  auto row_of = [&](const std::string& id, const std::string& file) {
    auto it = index.find(id);
    if (it == index.end())
      throw ValidationError(file + " lists sample_id '" + id + "' not present in " +
                            modality_names.front() + ".csv");
    return it->second;
  };

  // Availability: explicit file, else inferred from fully-missing rows.
  const fs::path avail_file = dir / "availability.csv";
  std::vector<std::vector<std::uint8_t>> availability(modality_names.size(),
                                                      std::vector<std::uint8_t>(n, 1));
  const bool has_availability = fs::exists(avail_file);
  if (has_availability) {
    const CsvTable avail = read_csv(avail_file);
    if (static_cast<int>(avail.ids.size()) != n)
      throw ValidationError("availability.csv has " + std::to_string(avail.ids.size()) +
                            " rows, expected " + std::to_string(n));
    for (std::size_t k = 0; k < modality_names.size(); ++k) {
      auto col = std::find(avail.header.begin(), avail.header.end(), modality_names[k]);
      if (col == avail.header.end())
        throw ValidationError("availability.csv has no column for modality '" +
                              modality_names[k] + "'");
      const auto c = col - avail.header.begin();
      for (std::size_t r = 0; r < avail.ids.size(); ++r) {
        const double v = avail.values(r, c);
        if (avail.missing[r][c] || (v != 0.0 && v != 1.0))
          throw ValidationError("availability.csv entries must be 0 or 1");
        availability[k][row_of(avail.ids[r], "availability.csv")] = v == 1.0;
      }
    }
  }

  for (std::size_t k = 0; k < tables.size(); ++k) {
    const CsvTable& t = tables[k];
    const std::string file = modality_names[k] + ".csv";
    if (static_cast<int>(t.ids.size()) != n)
      throw ValidationError("sample count mismatch: " + file + " has " +
                            std::to_string(t.ids.size()) + " rows, " + modality_names.front() +
                            ".csv has " + std::to_string(n));
    if (t.header.empty()) throw ValidationError(file + " has no feature columns");
    Matrix X = Matrix::Zero(n, static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t r = 0; r < t.ids.size(); ++r) {
      const int i = row_of(t.ids[r], file);
      X.row(i) = t.values.row(static_cast<Eigen::Index>(r));
      const bool all_missing =
          std::all_of(t.missing[r].begin(), t.missing[r].end(), [](bool b) { return b; });
      const bool any_missing =
          std::any_of(t.missing[r].begin(), t.missing[r].end(), [](bool b) { return b; });
      if (!has_availability && all_missing) availability[k][i] = 0;
      if (availability[k][i] && any_missing)
        throw ValidationError(file + ": sample '" + t.ids[r] +
                              "' is marked available but has missing cells");
    }
    raw.modalities.push_back(std::move(X));
    raw.feature_names.push_back(t.header);
  }
  raw.availability = std::move(availability);
  raw.sample_ids = ids;

  const fs::path label_file = dir / "labels.csv";
  if (fs::exists(label_file)) {
    const CsvTable labels = read_csv(label_file);
    if (labels.header.size() != 1)
      throw ValidationError("labels.csv must have exactly one column after sample_id");
    if (static_cast<int>(labels.ids.size()) != n)
      throw ValidationError("sample count mismatch: labels.csv has " +
                            std::to_string(labels.ids.size()) + " rows, expected " +
                            std::to_string(n));
    raw.labels.resize(n);
    for (std::size_t r = 0; r < labels.ids.size(); ++r) {
      if (labels.missing[r][0]) throw ValidationError("labels.csv has a missing label");
      raw.labels(row_of(labels.ids[r], "labels.csv")) = labels.values(r, 0);
    }
  } else if (require_labels) {
    throw ValidationError("missing " + label_file.string());
  }
  return validate_dataset(std::move(raw), task, coding);
}

void save_dataset(const fs::path& dir, const MultiModalDataset& data) {
  for (int k = 0; k < data.modality_count(); ++k)
    write_file_atomic(dir / (data.modality_names()[k] + ".csv"), modality_csv(data, k));
  if (data.has_labels())
    write_file_atomic(dir / "labels.csv", labels_csv(data.sample_ids(), data.original_labels()));
  write_file_atomic(dir / "availability.csv", availability_csv(data));
}

Json structure_to_json(const StructureSpec& spec) {
  Json out;
  Json names = Json::array();
  for (int k = 0; k < spec.modality_count(); ++k) names.push_back(spec.modality_name(k));
  out["modalities"] = names;
  Json blocks = Json::array();
  for (const auto& b : spec.blocks()) {
    Json subset = Json::array();
    for (int k : b.subset) subset.push_back(spec.modality_name(k));
    blocks.push_back({{"subset", subset}, {"rank", b.rank}});
  }
  out["blocks"] = blocks;
  return out;
}

StructureSpec structure_from_json(const Json& json) {
  const std::string where = "structure";
  const Json& modalities = require(json, "modalities", where);
  if (!modalities.is_array() || modalities.empty())
    throw ValidationError("structure: \"modalities\" must be a nonempty array of names");
  std::vector<std::string> names;
  std::map<std::string, int> index;
  for (const auto& m : modalities) {
    if (!m.is_string()) throw ValidationError("structure: modality names must be strings");
    const auto name = m.get<std::string>();
    if (!index.emplace(name, static_cast<int>(names.size())).second)
      throw ValidationError("structure: modality '" + name + "' listed twice");
    names.push_back(name);
  }
  const Json& blocks = require(json, "blocks", where);
  if (!blocks.is_array()) throw ValidationError("structure: \"blocks\" must be an array");
  std::vector<Block> parsed;
  for (const auto& b : blocks) {
    Block block;
    const Json& subset = require(b, "subset", "structure block");
    if (!subset.is_array()) throw ValidationError("structure: block subset must be an array");
    for (const auto& s : subset) {
      const auto name = s.get<std::string>();
      auto it = index.find(name);
      if (it == index.end())
        throw ValidationError("structure: block references unknown modality '" + name + "'");
      block.subset.push_back(it->second);
    }
    const Json& rank = require(b, "rank", "structure block");
    if (!rank.is_number_integer()) throw ValidationError("structure: block rank must be an integer");
    block.rank = rank.get<int>();
    parsed.push_back(std::move(block));
  }
  return StructureSpec(static_cast<int>(names.size()), std::move(parsed), names);
}

Json fit_config_to_json(const FitConfig& c) {
  return {{"lambda", c.lambda},
          {"gamma", c.gamma},
          {"mu", c.mu},
          {"epsilon", c.epsilon},
          {"max_iter", c.max_iter},
          {"outer_max_iter", c.outer_max_iter},
          {"inner_max_iter", c.inner_max_iter},
          {"task", to_string(c.task)},
          {"scaling", to_string(c.scaling)},
          {"seed", c.seed}};
}

FitConfig fit_config_from_json(const Json& json, FitConfig c) {
  if (!json.is_object()) throw ValidationError("config must be a JSON object");
  try {
    if (json.contains("lambda")) c.lambda = json.at("lambda").get<double>();
    if (json.contains("gamma")) c.gamma = json.at("gamma").get<double>();
    if (json.contains("mu")) c.mu = json.at("mu").get<double>();
    if (json.contains("epsilon")) c.epsilon = json.at("epsilon").get<double>();
    if (json.contains("max_iter")) c.max_iter = json.at("max_iter").get<int>();
    if (json.contains("outer_max_iter")) c.outer_max_iter = json.at("outer_max_iter").get<int>();
    if (json.contains("inner_max_iter")) c.inner_max_iter = json.at("inner_max_iter").get<int>();
    if (json.contains("task")) c.task = parse_task(json.at("task").get<std::string>());
    if (json.contains("scaling")) c.scaling = parse_scaling(json.at("scaling").get<std::string>());
    if (json.contains("seed")) c.seed = json.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

SimulationConfig simulation_config_from_json(const Json& json) {
  SimulationConfig c;
  const std::string where = "simulation config";
  try {
    c.seed = require(json, "seed", where).get<std::uint64_t>();
    if (json.contains("n_train")) c.n_train = json.at("n_train").get<int>();
    if (json.contains("n_test")) c.n_test = json.at("n_test").get<int>();
    if (json.contains("modality_dims")) c.modality_dims = json.at("modality_dims").get<std::vector<int>>();
    if (json.contains("delta")) c.delta = json.at("delta").get<double>();
    if (json.contains("snr")) {
      c.snr.clear();
      for (const auto& s : json.at("snr")) c.snr.push_back(as_number(s));
    }
    if (json.contains("train_missing_rates"))
      c.train_missing_rates = json.at("train_missing_rates").get<std::vector<double>>();
    const auto m = static_cast<int>(c.modality_dims.size());
    if (json.contains("structure")) {
      c.spec = structure_from_json(json.at("structure"));
      c.modality_names = c.spec.modality_names();
    } else {
      if (json.contains("modality_names"))
        c.modality_names = json.at("modality_names").get<std::vector<std::string>>();
      const int rank = json.value("rank_per_block", 3);
      c.spec = StructureSpec::full(m, rank, c.modality_names);
    }
    if (c.modality_names.empty())
      for (int k = 0; k < m; ++k) c.modality_names.push_back("X" + std::to_string(k + 1));
    if (json.contains("snr") == false && m != 3) c.snr.assign(m, 1.0);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
  c.validate();
  return c;
}

Json simulation_config_to_json(const SimulationConfig& c) {
  Json snr = Json::array();
  for (double s : c.snr) snr.push_back(number(s));
  return {{"seed", c.seed},
          {"n_train", c.n_train},
          {"n_test", c.n_test},
          {"modality_dims", c.modality_dims},
          {"delta", c.delta},
          {"snr", snr},
          {"train_missing_rates", c.train_missing_rates},
          {"structure", structure_to_json(c.spec)}};
}

Json ground_truth_to_json(const GroundTruth& truth) {
  return {{"sigma", vector_json(truth.sigma)},
          {"labels", vector_json(truth.labels)},
          {"U", matrix_rows_json(truth.U)},
          {"V", matrix_rows_json(truth.V)}};
}

namespace {

std::string base64_encode(const unsigned char* data, std::size_t size) {
  std::string out(4 * ((size + 2) / 3), '\0');
  const int written =
      EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data, static_cast<int>(size));
  out.resize(static_cast<std::size_t>(written));
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text, std::size_t expected,
                                         const std::string& what) {
  if (text.size() % 4 != 0 || 3 * (text.size() / 4) < expected)
    throw ValidationError(what + ": blob has the wrong length");
  std::vector<unsigned char> out(3 * (text.size() / 4));
  const int got = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
  if (got < 0) throw ValidationError(what + ": invalid base64");
  out.resize(expected);
  return out;
}

}  // namespace

Json matrix_blob(const Matrix& m) {
  std::vector<unsigned char> bytes(static_cast<std::size_t>(m.size()) * 8);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(m.data()[i]);
    for (int b = 0; b < 8; ++b) bytes[8 * i + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", base64_encode(bytes.data(), bytes.size())}};
}

Matrix matrix_from_blob(const Json& blob, const std::string& what) {
  const auto rows = require(blob, "rows", what).get<Eigen::Index>();
  const auto cols = require(blob, "cols", what).get<Eigen::Index>();
  if (rows < 0 || cols < 0) throw ValidationError(what + ": negative shape");
  const auto bytes = base64_decode(require(blob, "data", what).get<std::string>(),
                                   static_cast<std::size_t>(rows * cols) * 8, what);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[8 * i + b]) << (8 * b);
    m.data()[i] = std::bit_cast<double>(bits);
  }
  return m;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  unsigned int length = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

Json model_to_json(const FissionModel& model, bool include_u) {
  Json j;
  j["format"] = "mmfl-model";
  j["version"] = kBundleVersion;
  j["config"] = fit_config_to_json(model.config);
  j["structure"] = structure_to_json(model.spec);
  j["feature_dims"] = model.feature_dims;
  j["modality_names"] = model.modality_names;
  if (model.label_coding)
    j["label_coding"] = {{"negative", model.label_coding->negative},
                         {"positive", model.label_coding->positive}};
  else
    j["label_coding"] = nullptr;
  j["V"] = matrix_blob(model.V);
  j["beta"] = matrix_blob(model.beta);
  j["intercept"] = number(model.intercept);
  j["response_offset"] = number(model.response_offset);
  j["threshold"] = number(model.threshold);
  j["scaling"] = {{"center", matrix_blob(model.scaling.center)},
                  {"scale", matrix_blob(model.scaling.scale)}};
  j["U"] = include_u ? matrix_blob(model.U) : Json(nullptr);
  j["dual"] = matrix_blob(model.dual);
  j["slack"] = matrix_blob(model.slack);
  const auto& s = model.summary;
  j["summary"] = {{"algorithm", s.algorithm},
                  {"iterations", s.iterations},
                  {"outer_iterations", s.outer_iterations},
                  {"converged", s.converged},
                  {"stalled", s.stalled},
                  {"objective", number(s.objective)},
                  {"last_change", number(s.last_change)}};
  j["checksum"] = sha256_hex(j.dump());
  return j;
}

FissionModel model_from_json(const Json& input) {
  const std::string where = "model bundle";
  if (!input.is_object() || input.value("format", "") != "mmfl-model")
    throw ValidationError(where + ": not an mmfl model file");
  const int version = require(input, "version", where).get<int>();
  if (version != kBundleVersion)
    throw ValidationError(where + ": unsupported format version " + std::to_string(version) +
                          " (expected " + std::to_string(kBundleVersion) + ")");
  Json body = input;
  const auto checksum = require(input, "checksum", where).get<std::string>();
  body.erase("checksum");
  if (sha256_hex(body.dump()) != checksum) throw ValidationError(where + ": checksum mismatch");

  try {
    FissionModel model;
    model.config = fit_config_from_json(require(body, "config", where), FitConfig{});
    model.spec = structure_from_json(require(body, "structure", where));
    model.feature_dims = require(body, "feature_dims", where).get<std::vector<int>>();
    model.modality_names = require(body, "modality_names", where).get<std::vector<std::string>>();
    model.mask = build_structure_mask(model.spec, model.feature_dims);
    if (!body.at("label_coding").is_null())
      model.label_coding = LabelCoding{body["label_coding"].at("negative").get<double>(),
                                       body["label_coding"].at("positive").get<double>()};
    model.V = matrix_from_blob(require(body, "V", where), "V");
    model.beta = matrix_from_blob(require(body, "beta", where), "beta");
    model.intercept = as_number(require(body, "intercept", where));
    model.response_offset = as_number(require(body, "response_offset", where));
    model.threshold = as_number(require(body, "threshold", where));
    const Json& scaling = require(body, "scaling", where);
    model.scaling.center = matrix_from_blob(require(scaling, "center", where), "scaling.center");
    model.scaling.scale = matrix_from_blob(require(scaling, "scale", where), "scaling.scale");
    if (!body.at("U").is_null()) model.U = matrix_from_blob(body.at("U"), "U");
    model.dual = matrix_from_blob(require(body, "dual", where), "dual");
    model.slack = matrix_from_blob(require(body, "slack", where), "slack");
    const Json& s = require(body, "summary", where);
    model.summary.algorithm = s.at("algorithm").get<int>();
    model.summary.iterations = s.at("iterations").get<int>();
    model.summary.outer_iterations = s.at("outer_iterations").get<int>();
    model.summary.converged = s.at("converged").get<bool>();
    model.summary.stalled = s.value("stalled", false);
    model.summary.objective = as_number(s.at("objective"));
    model.summary.last_change = as_number(s.at("last_change"));

    const Eigen::Index p = model.mask.rows(), r = model.mask.cols();
    if (model.V.rows() != p || model.V.cols() != r || model.beta.size() != r ||
        model.scaling.center.size() != p || model.scaling.scale.size() != p ||
        model.modality_names.size() != model.feature_dims.size())
      throw ValidationError(where + ": parameter shapes do not match the structure");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

void save_model(const fs::path& path, const FissionModel& model, bool include_u) {
  write_file_atomic(path, model_to_json(model, include_u).dump(1) + "\n");
}

FissionModel load_model(const fs::path& path) {
  Json json;
  try {
    json = Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return model_from_json(json);
}

Json report_to_json(const EvalReport& report) {
  Json j;
  j["scenario"] = report.scenario;
  j["reps"] = report.reps;
  j["seed"] = report.seed;
  j["config"] = fit_config_to_json(report.config);
  Json tuning = Json::array();
  for (const auto& row : report.tuning) {
    Json folds = Json::array();
    for (double f : row.fold_metrics) folds.push_back(number(f));
    tuning.push_back({{"lambda", row.lambda},
                      {"gamma", row.gamma},
                      {"mean", number(row.mean_metric)},
                      {"sd", number(row.sd_metric)},
                      {"folds", folds},
                      {"error", row.error}});
  }
  j["tuning"] = tuning;
  Json records = Json::array();
  for (const auto& r : report.records)
    records.push_back({{"cohort", r.cohort},
                       {"model", r.model},
                       {"rep", r.rep},
                       {"auc", number(r.auc)},
                       {"accuracy", number(r.accuracy)},
                       {"fit_seconds", number(r.fit_seconds)},
                       {"config_hash", r.config_hash},
                       {"error", r.error}});
  j["records"] = records;
  Json cells = Json::array();
  for (const auto& c : report.cells)
    cells.push_back({{"cohort", c.cohort},
                     {"model", c.model},
                     {"count", c.count},
                     {"auc_mean", number(c.auc.mean)},
                     {"auc_sd", number(c.auc.sd)},
                     {"accuracy_mean", number(c.accuracy.mean)},
                     {"accuracy_sd", number(c.accuracy.sd)},
                     {"time_mean", number(c.fit_seconds.mean)},
                     {"time_sd", number(c.fit_seconds.sd)}});
  j["cells"] = cells;
  return j;
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "cohort,model,reps,auc_mean,auc_sd,accuracy_mean,accuracy_sd,time_mean,time_sd\n";
  for (const auto& c : report.cells) {
    out << '"' << c.cohort << "\",\"" << c.model << "\"," << c.count << ','
        << format_number(c.auc.mean) << ',' << format_number(c.auc.sd) << ','
        << format_number(c.accuracy.mean) << ',' << format_number(c.accuracy.sd) << ','
        << format_number(c.fit_seconds.mean) << ',' << format_number(c.fit_seconds.sd) << '\n';
  }
  return out.str();
}

std::string loading_profile_csv(const std::vector<LoadingProfileRow>& rows) {
  std::ostringstream out;
  out << "block,component,column,mean_abs_loading\n";
  for (const auto& r : rows)
    out << '"' << r.block_name << "\"," << r.component << ',' << r.column << ','
        << format_number(r.mean_abs) << '\n';
  return out.str();
}

std::string trace_jsonl(const std::vector<RankTraceEntry>& trace) {
  std::ostringstream out;
  write_trace_jsonl(out, trace);
  return out.str();
}

}  // namespace mmfl::io
