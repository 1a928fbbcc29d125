#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "avbench/error.hpp"
#include "avbench/experiment.hpp"
#include "avbench/synthetic.hpp"

using namespace avbench;
namespace fs = std::filesystem;

namespace {

std::string config_error(const std::string& json_text) {
  try {
    parse_experiment_config(json_text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("avbench_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.synthetic = SyntheticCorpusSpec{.count = 2, .seconds = 1.5, .framerate_hz = 60.0, .seed = 3};
  c.grid.delay_frames = {0, 4};
  c.grid.noise_std_m = {0.0, 0.02};
  c.seeds = {1, 2};
  c.output_dir = out.string();
  return c;
}

const ResultRow& find_row(const std::vector<ResultRow>& rows, const std::string& condition, BodySubsetLabel subset) {
  for (const ResultRow& r : rows) {
    if (r.condition == condition && r.subset == subset) return r;
  }
  throw std::runtime_error("row not found: " + condition);
}

}  // namespace

TEST_CASE("config: defaults and fields") {
  const ExperimentConfig c = parse_experiment_config(R"({
    "synthetic": {"count": 3, "seconds": 10, "seed": 4},
    "grid": {"delay_frames": [0, 2], "noise_std_m": [0.01]},
    "seeds": [0, 1, 2],
    "reconstructors": [{"reconstructor": "ik", "damping": 0.1}],
    "cartesian_source": "triangulated",
    "detection": {"pixel_noise_std": 0.5, "miss_prob": 0.01, "seed": 9}
  })");
  REQUIRE(c.synthetic.has_value());
  CHECK(c.synthetic->count == 3);
  CHECK(c.synthetic->framerate_hz == 60.0);
  CHECK(c.grid.fps_ratio == std::vector<std::size_t>{1});
  CHECK(c.seeds.size() == 3);
  CHECK(c.reconstructors[0].damping == 0.1);
  CHECK(c.cartesian_source == CartesianSource::kTriangulated);
  CHECK(c.detection.seed == 9);
  CHECK(c.window_length == 41);
}

TEST_CASE("config: errors name the offending path") {
  CHECK(config_error("{") .find("not valid JSON") != std::string::npos);
  CHECK(config_error(R"({"synthetic": {}, "grid": {"noise_std_m": [0.01, -1]}})").find("$.grid.noise_std_m[1]") !=
        std::string::npos);
  CHECK(config_error(R"({"synthetic": {}, "grid": {"fps_ratio": [0]}})").find("$.grid.fps_ratio[0]") != std::string::npos);
  CHECK(config_error(R"({"synthetic": {}, "grid": {"occlusion_prob": [1.5]}})").find("$.grid.occlusion_prob[0]") !=
        std::string::npos);
  CHECK(config_error(R"({"synthetic": {}, "bogus": 1})").find("bogus") != std::string::npos);
  CHECK(config_error(R"({"synthetic": {}, "seeds": []})").find("$.seeds") != std::string::npos);
  CHECK(config_error(R"({"synthetic": {}, "cartesian_source": "magic"})").find("$.cartesian_source") !=
        std::string::npos);
  CHECK(config_error(R"({"grid": {}})").find("$.clips") != std::string::npos);
  CHECK(config_error(R"({"synthetic": {}, "reconstructors": [{"reconstructor": "knn"}]})").find("train") !=
        std::string::npos);
  CHECK(config_error(R"({"synthetic": {}, "reconstructors": [{"reconstructor": "ik"}, {"reconstructor": "ik"}]})")
            .find("$.reconstructors[1]") != std::string::npos);
  CHECK(config_error(R"({"synthetic": {}, "cameras": [{}]})").find("$.cameras") != std::string::npos);
}

TEST_CASE("grid expansion") {
  SUBCASE("paper grid: clean plus eleven artifact levels") {
    const GridSpec g{.delay_frames = {0, 2, 4, 6}, .fps_ratio = {1, 2, 3, 4}, .noise_std_m = {0, 0.01, 0.02, 0.05},
                     .occlusion_prob = {0, 0.01, 0.05}};
    const auto points = expand_grid(g, false);
    REQUIRE(points.size() == 12);
    CHECK(points[0].condition == "clean");
    CHECK(points[0].degradation.is_neutral());
    std::vector<std::string> labels;
    for (const GridPoint& p : points) labels.push_back(p.condition + format_level(p.level));
    CHECK(labels == std::vector<std::string>{"clean", "delay2", "delay4", "delay6", "fps_ratio2", "fps_ratio3",
                                             "fps_ratio4", "noise1", "noise2", "noise5", "occlusion0.01",
                                             "occlusion0.05"});
    CHECK(points[8].degradation.noise_std_m == 0.02);
    CHECK(points[8].stochastic());
    CHECK_FALSE(points[1].stochastic());
  }
  SUBCASE("full product") {
    const GridSpec g{.delay_frames = {0, 2}, .fps_ratio = {1}, .noise_std_m = {0, 0.01}, .occlusion_prob = {0}};
    const auto points = expand_grid(g, true);
    REQUIRE(points.size() == 4);
    CHECK(points[1].condition == "combined:d0:r1:n1:o0");
    CHECK(points[3].condition == "combined:d2:r1:n1:o0");
  }
  SUBCASE("duplicates collapse") {
    CHECK(expand_grid(GridSpec{.delay_frames = {2, 2}}, false).size() == 2);
  }
}

TEST_CASE("clip seeds") {
  CHECK(clip_seed(1, "a") == clip_seed(1, "a"));
  CHECK(clip_seed(1, "a") != clip_seed(1, "b"));
  CHECK(clip_seed(1, "a") != clip_seed(2, "a"));
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("load clips") {
  const fs::path dir = scratch_dir("load");
  const MotionClip clip = synthesize_clip("walk", 1, {.seconds = 0.5});
  {
    std::ofstream(dir / "b_walk.json") << save_clip_json(clip);
    std::ofstream(dir / "a_broken.bvh") << "HIERARCHY\nnope\n";
  }
  const LoadedClips loaded = load_clips({(dir / "*").string()}, SyntheticCorpusSpec{.count = 1, .seconds = 0.5}, 1.0);
  REQUIRE(loaded.clips.size() == 2);
  CHECK(loaded.clips[0].name() == "synth_000");
  CHECK(loaded.clips[1].name() == "walk");
  REQUIRE(loaded.errors.size() == 1);
  CHECK(loaded.errors[0].find("a_broken.bvh") != std::string::npos);
  CHECK(loaded.digests.size() == 3);
  const LoadedClips missing = load_clips({(dir / "nothing_*.bvh").string()}, std::nullopt, 1.0);
  CHECK(missing.clips.empty());
  CHECK_FALSE(missing.errors.empty());
}

TEST_CASE("cartesian sources") {
  const MotionClip clip = synthesize_clip("c", 2, {.seconds = 0.5});
  ExperimentConfig c;
  const CartesianStream gt = simulate_cartesian(clip, c);
  REQUIRE(gt.size() == clip.frame_count());
  for (std::size_t t = 0; t < clip.frame_count(); ++t) {
    const auto fk = forward_kinematics(clip.skeleton(), clip.pose(t)).positions;
    CHECK(gt.samples[t].positions == fk);
  }
  c.cartesian_source = CartesianSource::kTriangulated;
  const CartesianStream tri = simulate_cartesian(clip, c);
  double worst = 0.0;
  for (std::size_t t = 0; t < clip.frame_count(); ++t) {
    for (std::size_t j = 0; j < 22; ++j) {
      CHECK(tri.samples[t].valid[j]);
      worst = std::max(worst, (tri.samples[t].positions[j] - gt.samples[t].positions[j]).norm());
    }
  }
  CHECK(worst * 100.0 <= 1e-4);
  c.detection.pixel_noise_std = 1.0;
  CHECK(simulate_cartesian(clip, c) == simulate_cartesian(clip, c));
  CHECK_FALSE(simulate_cartesian(clip, c) == tri);
}

TEST_CASE("sweep: rows, determinism and trends") {
  const fs::path out = scratch_dir("sweep");
  const ExperimentConfig config = small_config(out);
  const SweepResult a = evaluate_sweep(config, 1);
  CHECK(a.errors.empty());
  // clean, delay 4, noise 2 cm; Up and Low each
  REQUIRE(a.rows.size() == 6);
  for (const ResultRow& r : a.rows) CHECK(r.reconstructor == "ik");
  CHECK(find_row(a.rows, "clean", BodySubsetLabel::kUp).mean_staleness_ms == 0.0);
  CHECK(find_row(a.rows, "delay", BodySubsetLabel::kUp).mean_staleness_ms > 60.0);
  for (BodySubsetLabel s : {BodySubsetLabel::kUp, BodySubsetLabel::kLow}) {
    CHECK(find_row(a.rows, "noise", s).mpjpe_cm > find_row(a.rows, "clean", s).mpjpe_cm);
    CHECK(find_row(a.rows, "noise", s).mpjve_cmps > find_row(a.rows, "clean", s).mpjve_cmps);
    CHECK(find_row(a.rows, "delay", s).mpjpe_cm > find_row(a.rows, "clean", s).mpjpe_cm);
  }
  const SweepResult b = evaluate_sweep(config, 3);
  CHECK(report_to_csv(build_report(a.rows)) == report_to_csv(build_report(b.rows)));
}

TEST_CASE("sweep: neutral-only grid gives clean rows") {
  ExperimentConfig config = small_config(scratch_dir("neutral"));
  config.grid = GridSpec{};
  config.synthetic->count = 1;
  const SweepResult r = evaluate_sweep(config, 1);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].condition == "clean");
}

TEST_CASE("simulate, sweep from streams, report merge") {
  const fs::path out = scratch_dir("pipeline");
  ExperimentConfig config = small_config(out);
  config.grid = GridSpec{.delay_frames = {2}};
  config.synthetic->count = 1;

  ExperimentConfig from_streams = config;
  from_streams.streams_dir = (out / "streams").string();
  const SweepResult missing = evaluate_sweep(from_streams, 1);
  REQUIRE_FALSE(missing.errors.empty());
  CHECK(missing.errors[0].find("avbench simulate") != std::string::npos);

  const RunOutcome sim = run_simulate(config, 1);
  CHECK(sim.ok());
  CHECK(fs::exists(out / "streams" / "synth_000.sparse.json"));
  CHECK(fs::exists(out / "streams" / "synth_000.cartesian.json"));
  const SweepResult direct = evaluate_sweep(config, 1);
  const SweepResult streamed = evaluate_sweep(from_streams, 1);
  CHECK(streamed.errors.empty());
  CHECK(report_to_csv(build_report(direct.rows)) == report_to_csv(build_report(streamed.rows)));

  const fs::path ref = fs::path(AVBENCH_DATA_DIR) / "reference_table1.csv";
  const RunOutcome sweep = run_sweep(config, 1, ref.string());
  CHECK(sweep.ok());
  const std::string csv = slurp(out / "report.csv");
  CHECK(csv.rfind(kReportCsvHeader, 0) == 0);
  CHECK(csv.find("clean,,ik,Up") != std::string::npos);
  CHECK(csv.find(",avatarposer,") != std::string::npos);
  CHECK(fs::exists(out / "report.md"));
  CHECK(slurp(out / "run_manifest.json").find("\"tool_version\"") != std::string::npos);

  // a second report with a disjoint condition merges into one sorted table
  ExperimentConfig other = config;
  other.grid = GridSpec{.fps_ratio = {2}};
  other.output_dir = (out / "other").string();
  CHECK(run_sweep(other, 1, std::nullopt).ok());
  const fs::path merged = out / "merged";
  const RunOutcome rep = run_report({(out / "report.csv").string(), (out / "other" / "report.csv").string()},
                                    merged.string(), ref.string(), "avatarposer");
  CHECK(rep.ok());
  const auto rows = parse_report_csv(slurp(merged / "report.csv"));
  CHECK(rows.size() == 6);  // clean, delay 2, fps_ratio 2 (Up, Low)
  CHECK_THROWS_AS(run_report({}, merged.string(), std::nullopt, "avatarposer"), ConfigError);
}
