#include "support.hpp"

#include "mmfl/io.hpp"
#include "mmfl/solver.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

using namespace mmfl;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mmfl_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void put(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string command = std::string(MMFL_CLI_PATH) + " " + args + " > " + out.string() +
                              " 2> " + err.string();
  const int status = std::system(command.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, io::read_file(out), io::read_file(err)};
}

bool contains(const std::string& text, const std::string& part) {
  return text.find(part) != std::string::npos;
}

MultiModalDataset small_dataset(std::uint64_t seed, double missing = 0.0) {
  SimulationConfig c;
  c.n_train = 40;
  c.n_test = 10;
  c.modality_dims = {4, 5, 3};
  c.spec = StructureSpec::full(3, 1);
  c.delta = 1.0;
  c.seed = seed;
  if (missing > 0) c.train_missing_rates = {0, missing, missing};
  return generate(c).train;
}

}  // namespace

TEST_CASE("number formatting") {
  CHECK(io::format_number(0.1) == "0.10000000000000001");
  CHECK(io::format_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(io::format_number(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(std::stod(io::format_number(1.0 / 3)) == 1.0 / 3);
}

TEST_CASE("CSV parsing") {
  const auto dir = scratch("csv");
  put(dir / "a.csv", "sample_id,f1,f2\ns1,1.5,2\ns2,NA,\ns3,-1e-3,7\n");
  const auto t = io::read_csv(dir / "a.csv");
  CHECK(t.header == std::vector<std::string>{"f1", "f2"});
  CHECK(t.ids == std::vector<std::string>{"s1", "s2", "s3"});
  CHECK(t.values(0, 0) == 1.5);
  CHECK(t.values(2, 0) == -1e-3);
  CHECK(t.missing[1][0]);
  CHECK(t.missing[1][1]);
  CHECK_FALSE(t.missing[0][1]);

  put(dir / "bad.csv", "id,f1\ns1,1\n");
  CHECK_THROWS_AS(io::read_csv(dir / "bad.csv"), ValidationError);
  put(dir / "ragged.csv", "sample_id,f1,f2\ns1,1\n");
  CHECK_THROWS_AS(io::read_csv(dir / "ragged.csv"), ValidationError);
  put(dir / "text.csv", "sample_id,f1\ns1,abc\n");
  CHECK_THROWS_AS(io::read_csv(dir / "text.csv"), ValidationError);
  CHECK_THROWS_AS(io::read_csv(dir / "absent.csv"), ValidationError);
}

TEST_CASE("dataset round-trip through CSV files") {
  const auto data = small_dataset(1, 0.3);
  const auto dir = scratch("dataset");
  io::save_dataset(dir, data);
  const auto back = io::load_dataset(dir, data.modality_names(), Task::Classification);
  REQUIRE(back.samples() == data.samples());
  CHECK((back.availability() == data.availability()).all());
  CHECK((back.labels().array() == data.labels().array()).all());
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < data.samples(); ++i)
      if (data.available(i, k))
        CHECK((back.modality(k).row(i).array() == data.modality(k).row(i).array()).all());

  SUBCASE("availability is inferred from NA rows when the file is absent") {
    fs::remove(dir / "availability.csv");
    const auto inferred = io::load_dataset(dir, data.modality_names(), Task::Classification);
    CHECK((inferred.availability() == data.availability()).all());
  }
  SUBCASE("a partially missing available row is rejected") {
    std::string text = io::read_file(dir / "X1.csv");
    const auto line_end = text.find('\n', text.find('\n') + 1);
    const auto last_comma = text.rfind(',', line_end);
    text.replace(last_comma + 1, line_end - last_comma - 1, "NA");
    put(dir / "X1.csv", text);
    CHECK_THROWS_AS(io::load_dataset(dir, data.modality_names(), Task::Classification), ValidationError);
  }
}

TEST_CASE("structure JSON") {
  const auto spec = StructureSpec::full(3, 2, {"mri", "pet", "snp"});
  const auto back = io::structure_from_json(io::structure_to_json(spec));
  CHECK(back == spec);
  CHECK(back.modality_name(2) == "snp");

  const Json unknown = Json::parse(R"({"modalities":["A","B"],"blocks":[{"subset":["A","C"],"rank":1}]})");
  CHECK_THROWS_WITH_AS(io::structure_from_json(unknown), doctest::Contains("'C'"), ValidationError);
  CHECK_THROWS_AS(io::structure_from_json(Json::parse(R"({"blocks":[]})")), ValidationError);
}

TEST_CASE("configuration JSON") {
  FitConfig c;
  c.lambda = 10;
  c.gamma = 0.001;
  c.task = Task::Regression;
  const auto back = io::fit_config_from_json(io::fit_config_to_json(c), FitConfig{});
  CHECK(back.lambda == 10);
  CHECK(back.gamma == 0.001);
  CHECK(back.task == Task::Regression);
  CHECK_THROWS_AS(io::fit_config_from_json(Json{{"lambda", -1}}, FitConfig{}), ValidationError);

  CHECK_THROWS_WITH_AS(io::simulation_config_from_json(Json{{"n_train", 10}}),
                       doctest::Contains("seed"), ValidationError);
  const auto sim = io::simulation_config_from_json(Json{{"seed", 4}, {"n_train", 20}, {"n_test", 5},
                                                        {"modality_dims", {3, 3, 3}},
                                                        {"rank_per_block", 1}});
  CHECK(sim.seed == 4);
  CHECK(sim.spec.total_rank() == 7);
  const auto again = io::simulation_config_from_json(io::simulation_config_to_json(sim));
  CHECK(again.spec == sim.spec);
  CHECK(again.n_train == 20);
}

TEST_CASE("matrix blobs are exact") {
  std::mt19937_64 rng(91);
  Matrix m = testing::gaussian(rng, 7, 3);
  m(0, 0) = -0.0;
  m(1, 1) = 1e-300;
  const Matrix back = io::matrix_from_blob(io::matrix_blob(m), "m");
  CHECK((back.array() == m.array()).all());
  CHECK(std::signbit(back(0, 0)));
  CHECK(io::matrix_from_blob(io::matrix_blob(Matrix(0, 4)), "empty").cols() == 4);
}

TEST_CASE("model bundles") {
  const auto train = small_dataset(2, 0.25);
  const auto spec = StructureSpec::full(3, 1, train.modality_names());
  const auto model = fit(train, spec, FitConfig{});
  const auto dir = scratch("bundle");
  io::save_model(dir / "model.json", model);
  const auto loaded = io::load_model(dir / "model.json");
  CHECK((predict(loaded, train).array() == predict(model, train).array()).all());
  CHECK(loaded.threshold == model.threshold);
  CHECK(loaded.spec == model.spec);
  CHECK(loaded.summary.algorithm == 2);

  io::save_model(dir / "slim.json", model, false);
  const auto slim = io::load_model(dir / "slim.json");
  CHECK(slim.U.size() == 0);
  CHECK((predict(slim, train).array() == predict(model, train).array()).all());

  SUBCASE("tampering is detected") {
    Json j = Json::parse(io::read_file(dir / "model.json"));
    j["intercept"] = j["intercept"].get<double>() + 1;
    put(dir / "tampered.json", j.dump());
    CHECK_THROWS_WITH_AS(io::load_model(dir / "tampered.json"), doctest::Contains("checksum"),
                         ValidationError);
  }
  SUBCASE("unknown versions are rejected") {
    Json j = Json::parse(io::read_file(dir / "model.json"));
    j["version"] = 99;
    j.erase("checksum");
    j["checksum"] = io::sha256_hex(j.dump());
    put(dir / "future.json", j.dump());
    CHECK_THROWS_WITH_AS(io::load_model(dir / "future.json"), doctest::Contains("version"),
                         ValidationError);
  }
}

TEST_CASE("sha256 of a known string") {
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("atomic writes leave no temporary files") {
  const auto dir = scratch("atomic");
  io::write_file_atomic(dir / "nested" / "out.txt", "hello");
  io::write_file_atomic(dir / "nested" / "out.txt", "again");
  CHECK(io::read_file(dir / "nested" / "out.txt") == "again");
  int files = 0;
  for ([[maybe_unused]] const auto& entry : fs::directory_iterator(dir / "nested")) ++files;
  CHECK(files == 1);
}

TEST_CASE("command line: simulate, fit, predict, evaluate") {
  const auto dir = scratch("cli");
  put(dir / "sim.json", R"({"seed": 3, "n_train": 60, "n_test": 30, "modality_dims": [6, 5, 4],
                             "rank_per_block": 1, "delta": 1.0})");
  auto r = cli("--config " + (dir / "sim.json").string() + " --out-dir " + (dir / "sim").string() +
                   " simulate",
               dir);
  REQUIRE(r.code == 0);
  for (const char* f : {"train/X1.csv", "train/X3.csv", "train/labels.csv", "train/availability.csv",
                        "test/X2.csv", "spec.json", "ground_truth.json", "manifest.json"})
    CHECK(fs::exists(dir / "sim" / f));

  r = cli("--out-dir " + dir.string() + " fit --data " + (dir / "sim/train").string() + " --spec " +
              (dir / "sim/spec.json").string() + " --max-iter 5000",
          dir);
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "Algorithm 1"));
  CHECK(contains(r.out, "converged: yes"));

  r = cli("--out-dir " + dir.string() + " predict --model " + (dir / "model.json").string() +
              " --data " + (dir / "sim/test").string(),
          dir);
  REQUIRE(r.code == 0);
  const auto predictions = io::read_csv(dir / "predictions.csv");
  CHECK(predictions.ids.size() == 30);
  CHECK(predictions.header == std::vector<std::string>{"score", "label", "partial"});

  r = cli("--out-dir " + dir.string() + " evaluate --scores " + (dir / "predictions.csv").string() +
              " --labels " + (dir / "sim/test/labels.csv").string(),
          dir);
  REQUIRE(r.code == 0);
  const Json eval = Json::parse(io::read_file(dir / "evaluation.json"));
  CHECK(eval["auc"].get<double>() >= 0.0);
  CHECK(eval["auc"].get<double>() <= 1.0);
  CHECK(eval.contains("accuracy"));

  SUBCASE("the same seed gives the same files") {
    r = cli("--config " + (dir / "sim.json").string() + " --out-dir " + (dir / "sim2").string() +
                " simulate",
            dir);
    REQUIRE(r.code == 0);
    CHECK(io::read_file(dir / "sim/train/X2.csv") == io::read_file(dir / "sim2/train/X2.csv"));
  }
}

TEST_CASE("command line: incomplete data and partial samples") {
  const auto dir = scratch("cli_incomplete");
  put(dir / "sim.json", R"({"seed": 5, "n_train": 60, "n_test": 20, "modality_dims": [4, 4, 4],
                             "rank_per_block": 1, "train_missing_rates": [0, 0.3, 0.3]})");
  REQUIRE(cli("--config " + (dir / "sim.json").string() + " --out-dir " + (dir / "sim").string() +
                  " simulate",
              dir)
              .code == 0);
  auto r = cli("--out-dir " + dir.string() + " fit --data " + (dir / "sim/train").string() +
                   " --spec " + (dir / "sim/spec.json").string(),
               dir);
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "Algorithm 2"));

  // the training set has partial samples; predicting on it flags them
  r = cli("--out-dir " + dir.string() + " predict --model " + (dir / "model.json").string() +
              " --data " + (dir / "sim/train").string(),
          dir);
  REQUIRE(r.code == 0);
  const auto predictions = io::read_csv(dir / "predictions.csv");
  const auto partial = predictions.values.col(2);
  CHECK(partial.sum() > 0);
  CHECK(partial.sum() < 60);
}

TEST_CASE("command line: exit codes") {
  const auto dir = scratch("cli_errors");
  put(dir / "noseed.json", R"({"n_train": 10})");
  auto r = cli("--config " + (dir / "noseed.json").string() + " --out-dir " + dir.string() + " simulate", dir);
  CHECK(r.code == 2);
  CHECK(contains(r.err, "seed"));

  CHECK(cli("", dir).code == 2);
  CHECK(cli("fit --spec x.json", dir).code == 2);

  put(dir / "sim.json", R"({"seed": 1, "n_train": 40, "n_test": 5, "modality_dims": [3, 3],
                             "snr": [1, 2], "rank_per_block": 1})");
  REQUIRE(cli("--config " + (dir / "sim.json").string() + " --out-dir " + (dir / "sim").string() +
                  " simulate",
              dir)
              .code == 0);
  put(dir / "unknown.json", R"({"modalities":["X1","X9"],"blocks":[{"subset":["X1","X9"],"rank":1}]})");
  r = cli("fit --data " + (dir / "sim/train").string() + " --spec " + (dir / "unknown.json").string(), dir);
  CHECK(r.code == 2);
  CHECK(contains(r.err, "X9"));

  // bad spec that references a modality missing from the structure list
  put(dir / "badblock.json", R"({"modalities":["X1","X2"],"blocks":[{"subset":["X1","X7"],"rank":1}]})");
  r = cli("fit --data " + (dir / "sim/train").string() + " --spec " + (dir / "badblock.json").string(), dir);
  CHECK(r.code == 2);
  CHECK(contains(r.err, "X7"));

  r = cli("--out-dir " + dir.string() + " select-ranks --data " + (dir / "sim/train").string() +
              " --spec " + (dir / "sim/spec.json").string() + " --min-improvement 2",
          dir);
  CHECK(r.code == 3);
  CHECK(fs::exists(dir / "rank_trace.jsonl"));

  REQUIRE(cli("--out-dir " + dir.string() + " fit --data " + (dir / "sim/train").string() +
                  " --spec " + (dir / "sim/spec.json").string(),
              dir)
              .code == 0);
  fs::create_directories(dir / "empty");
  put(dir / "empty/X1.csv", "");
  put(dir / "empty/X2.csv", "");
  r = cli("predict --model " + (dir / "model.json").string() + " --data " + (dir / "empty").string(), dir);
  CHECK(r.code == 2);

  r = cli("benchmark --table 5", dir);
  CHECK(r.code == 2);
}

TEST_CASE("command line: rank selection writes a trace and a spec") {
  const auto dir = scratch("cli_select");
  put(dir / "sim.json", R"({"seed": 2, "n_train": 80, "n_test": 0, "modality_dims": [5, 5],
                             "snr": [3, 3], "delta": 1.5, "structure":
                             {"modalities": ["A", "B"], "blocks": [{"subset": ["A", "B"], "rank": 1}]}})");
  REQUIRE(cli("--config " + (dir / "sim.json").string() + " --out-dir " + (dir / "sim").string() +
                  " simulate",
              dir)
              .code == 0);
  put(dir / "candidates.json", R"({"modalities":["A","B"],"blocks":[{"subset":["A","B"],"rank":1},
                                   {"subset":["A"],"rank":1},{"subset":["B"],"rank":1}]})");
  const auto r = cli("--out-dir " + dir.string() + " select-ranks --strategy sequential --order A+B,A,B --profile --data " +
                         (dir / "sim/train").string() + " --spec " + (dir / "candidates.json").string(),
                     dir);
  CHECK((r.code == 0 || r.code == 3));
  CHECK(fs::exists(dir / "rank_trace.jsonl"));
  CHECK(fs::exists(dir / "loading_profile.csv"));
  const std::string first = io::read_file(dir / "rank_trace.jsonl").substr(0, 200);
  CHECK(contains(first, "\"rank_tried\""));
  if (r.code == 0) {
    const auto spec = io::structure_from_json(Json::parse(io::read_file(dir / "selected_spec.json")));
    CHECK(spec.modality_name(0) == "A");
    CHECK(spec.total_rank() >= 1);
  }
}
