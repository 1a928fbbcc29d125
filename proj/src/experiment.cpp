#include "avbench/experiment.hpp"

#include <glob.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "avbench/error.hpp"
#include "avbench/mocap_io.hpp"
#include "avbench/seeding.hpp"
#include "avbench/stream_io.hpp"
#include "avbench/synthetic.hpp"
#include "avbench/sync.hpp"

namespace avbench {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// config parsing

namespace {

std::string key_path(const std::string& parent, std::string_view key) { return parent + "." + std::string(key); }
std::string index_path(const std::string& parent, std::size_t i) { return parent + "[" + std::to_string(i) + "]"; }

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

void require_object(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(key_path(path, key), "unknown field");
  }
}

double read_number(const json& j, const std::string& path, double min, std::optional<double> max = std::nullopt) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v) || v < min || (max && v > *max)) {
    fail(path, max ? fmt::format("expected a number within [{}, {}]", min, *max) : fmt::format("expected a number >= {}", min));
  }
  return v;
}

std::uint64_t read_unsigned(const json& j, const std::string& path, std::uint64_t min = 0) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0)) {
    fail(path, fmt::format("expected an integer >= {}", min));
  }
  const auto v = j.get<std::uint64_t>();
  if (v < min) fail(path, fmt::format("expected an integer >= {}", min));
  return v;
}

bool read_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

std::string read_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

template <typename T, typename F>
std::vector<T> read_list(const json& j, const std::string& path, F&& item) {
  if (!j.is_array()) fail(path, "expected an array");
  if (j.empty()) fail(path, "list must not be empty");
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(item(j[i], index_path(path, i)));
  return out;
}

SyntheticCorpusSpec read_synthetic(const json& j, const std::string& path) {
  require_object(j, path, {"count", "seconds", "framerate_hz", "seed"});
  SyntheticCorpusSpec s;
  if (j.contains("count")) s.count = read_unsigned(j["count"], key_path(path, "count"), 1);
  if (j.contains("seconds")) s.seconds = read_number(j["seconds"], key_path(path, "seconds"), 1e-3);
  if (j.contains("framerate_hz")) s.framerate_hz = read_number(j["framerate_hz"], key_path(path, "framerate_hz"), 1e-3);
  if (j.contains("seed")) s.seed = read_unsigned(j["seed"], key_path(path, "seed"));
  return s;
}

CameraModel read_camera(const json& j, const std::string& path) {
  require_object(j, path, {"fx", "fy", "cx", "cy", "width", "height", "rotation_quat_wxyz", "center_m"});
  for (const char* key : {"fx", "fy", "cx", "cy", "width", "height", "rotation_quat_wxyz", "center_m"}) {
    if (!j.contains(key)) fail(key_path(path, key), "missing required field");
  }
  CameraModel c;
  c.fx = read_number(j["fx"], key_path(path, "fx"), 1e-9);
  c.fy = read_number(j["fy"], key_path(path, "fy"), 1e-9);
  c.width = static_cast<int>(read_unsigned(j["width"], key_path(path, "width"), 1));
  c.height = static_cast<int>(read_unsigned(j["height"], key_path(path, "height"), 1));
  c.cx = read_number(j["cx"], key_path(path, "cx"), 0.0, c.width);
  c.cy = read_number(j["cy"], key_path(path, "cy"), 0.0, c.height);
  const json& q = j["rotation_quat_wxyz"];
  const std::string qp = key_path(path, "rotation_quat_wxyz");
  if (!q.is_array() || q.size() != 4) fail(qp, "expected 4 numbers");
  std::array<double, 4> wxyz{};
  for (std::size_t i = 0; i < 4; ++i) wxyz[i] = read_number(q[i], index_path(qp, i), -1.0, 1.0);
  try {
    c.rotation = Rotation::from_wxyz(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
  } catch (const InvalidRotationError& e) {
    fail(qp, e.what());
  }
  const json& center = j["center_m"];
  const std::string cp = key_path(path, "center_m");
  if (!center.is_array() || center.size() != 3) fail(cp, "expected 3 numbers");
  for (int i = 0; i < 3; ++i) c.center[i] = read_number(center[i], index_path(cp, i), -1e6);
  return c;
}

ReconstructorSpec read_reconstructor(const json& j, const std::string& path) {
  require_object(j, path, {"reconstructor", "k", "lambda", "w_rot", "damping", "use_validity_flags", "tap_stride"});
  ReconstructorSpec r;
  if (!j.contains("reconstructor")) fail(key_path(path, "reconstructor"), "missing required field");
  r.type = read_string(j["reconstructor"], key_path(path, "reconstructor"));
  if (r.type != "ik" && r.type != "knn" && r.type != "ridge") {
    fail(key_path(path, "reconstructor"), "expected one of \"ik\", \"knn\", \"ridge\"");
  }
  if (j.contains("k")) r.k = read_unsigned(j["k"], key_path(path, "k"), 1);
  if (j.contains("lambda")) r.lambda = read_number(j["lambda"], key_path(path, "lambda"), 0.0);
  if (j.contains("w_rot")) r.w_rot = read_number(j["w_rot"], key_path(path, "w_rot"), 0.0);
  if (j.contains("damping")) r.damping = read_number(j["damping"], key_path(path, "damping"), 1e-12);
  if (j.contains("use_validity_flags")) r.use_validity_flags = read_bool(j["use_validity_flags"], key_path(path, "use_validity_flags"));
  if (j.contains("tap_stride")) r.tap_stride = read_unsigned(j["tap_stride"], key_path(path, "tap_stride"), 1);
  return r;
}

std::vector<std::string> read_paths(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of paths");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_string(j[i], index_path(path, i)));
  return out;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("$: config is not valid JSON: ") + e.what());
  }
  const std::string root = "$";
  require_object(doc, root,
                 {"clips", "synthetic", "train_clips", "synthetic_train", "bvh_length_scale", "cameras", "detection",
                  "cartesian_source", "grid", "full_product", "seeds", "reconstructors", "output_dir", "window_length",
                  "reference_model", "streams_dir"});
  ExperimentConfig c;
  if (doc.contains("clips")) c.clips = read_paths(doc["clips"], key_path(root, "clips"));
  if (doc.contains("synthetic")) c.synthetic = read_synthetic(doc["synthetic"], key_path(root, "synthetic"));
  if (doc.contains("train_clips")) c.train_clips = read_paths(doc["train_clips"], key_path(root, "train_clips"));
  if (doc.contains("synthetic_train")) c.synthetic_train = read_synthetic(doc["synthetic_train"], key_path(root, "synthetic_train"));
  if (doc.contains("bvh_length_scale")) c.bvh_length_scale = read_number(doc["bvh_length_scale"], key_path(root, "bvh_length_scale"), 1e-12);
  if (doc.contains("cameras")) {
    const std::string p = key_path(root, "cameras");
    if (!doc["cameras"].is_array() || doc["cameras"].size() != 2) fail(p, "expected exactly 2 cameras");
    for (std::size_t i = 0; i < 2; ++i) c.cameras[i] = read_camera(doc["cameras"][i], index_path(p, i));
  }
  if (doc.contains("detection")) {
    const std::string p = key_path(root, "detection");
    const json& d = doc["detection"];
    require_object(d, p, {"pixel_noise_std", "miss_prob", "seed"});
    if (d.contains("pixel_noise_std")) c.detection.pixel_noise_std = read_number(d["pixel_noise_std"], key_path(p, "pixel_noise_std"), 0.0);
    if (d.contains("miss_prob")) c.detection.miss_prob = read_number(d["miss_prob"], key_path(p, "miss_prob"), 0.0, 1.0);
    if (d.contains("seed")) c.detection.seed = read_unsigned(d["seed"], key_path(p, "seed"));
  }
  if (doc.contains("cartesian_source")) {
    const std::string p = key_path(root, "cartesian_source");
    const std::string s = read_string(doc["cartesian_source"], p);
    if (s == "ground_truth") {
      c.cartesian_source = CartesianSource::kGroundTruth;
    } else if (s == "triangulated") {
      c.cartesian_source = CartesianSource::kTriangulated;
    } else {
      fail(p, "expected \"ground_truth\" or \"triangulated\"");
    }
  }
  if (doc.contains("grid")) {
    const std::string p = key_path(root, "grid");
    const json& g = doc["grid"];
    require_object(g, p, {"delay_frames", "fps_ratio", "noise_std_m", "occlusion_prob"});
    if (g.contains("delay_frames")) {
      c.grid.delay_frames = read_list<std::size_t>(g["delay_frames"], key_path(p, "delay_frames"),
                                                   [](const json& v, const std::string& ip) { return read_unsigned(v, ip); });
    }
    if (g.contains("fps_ratio")) {
      c.grid.fps_ratio = read_list<std::size_t>(g["fps_ratio"], key_path(p, "fps_ratio"),
                                                [](const json& v, const std::string& ip) { return read_unsigned(v, ip, 1); });
    }
    if (g.contains("noise_std_m")) {
      c.grid.noise_std_m = read_list<double>(g["noise_std_m"], key_path(p, "noise_std_m"),
                                             [](const json& v, const std::string& ip) { return read_number(v, ip, 0.0); });
    }
    if (g.contains("occlusion_prob")) {
      c.grid.occlusion_prob = read_list<double>(g["occlusion_prob"], key_path(p, "occlusion_prob"),
                                                [](const json& v, const std::string& ip) { return read_number(v, ip, 0.0, 1.0); });
    }
  }
  if (doc.contains("full_product")) c.full_product = read_bool(doc["full_product"], key_path(root, "full_product"));
  if (doc.contains("seeds")) {
    c.seeds = read_list<std::uint64_t>(doc["seeds"], key_path(root, "seeds"),
                                       [](const json& v, const std::string& ip) { return read_unsigned(v, ip); });
  }
  if (doc.contains("reconstructors")) {
    c.reconstructors = read_list<ReconstructorSpec>(doc["reconstructors"], key_path(root, "reconstructors"), read_reconstructor);
  }
  if (doc.contains("output_dir")) c.output_dir = read_string(doc["output_dir"], key_path(root, "output_dir"));
  if (doc.contains("window_length")) c.window_length = read_unsigned(doc["window_length"], key_path(root, "window_length"), 1);
  if (doc.contains("reference_model")) c.reference_model = read_string(doc["reference_model"], key_path(root, "reference_model"));
  if (doc.contains("streams_dir")) c.streams_dir = read_string(doc["streams_dir"], key_path(root, "streams_dir"));
  validate_experiment_config(c);
  return c;
}

void validate_experiment_config(const ExperimentConfig& config) {
  if (config.clips.empty() && !config.synthetic) fail("$.clips", "no clips configured (set clips or synthetic)");
  if (config.grid.delay_frames.empty()) fail("$.grid.delay_frames", "list must not be empty");
  if (config.grid.fps_ratio.empty()) fail("$.grid.fps_ratio", "list must not be empty");
  if (config.grid.noise_std_m.empty()) fail("$.grid.noise_std_m", "list must not be empty");
  if (config.grid.occlusion_prob.empty()) fail("$.grid.occlusion_prob", "list must not be empty");
  if (config.seeds.empty()) fail("$.seeds", "list must not be empty");
  if (config.reconstructors.empty()) fail("$.reconstructors", "list must not be empty");
  std::set<std::string> types;
  for (std::size_t i = 0; i < config.reconstructors.size(); ++i) {
    const ReconstructorSpec& r = config.reconstructors[i];
    const std::string p = index_path("$.reconstructors", i);
    if (!types.insert(r.type).second) fail(p, "reconstructor \"" + r.type + "\" listed twice");
    if ((r.type == "knn" || r.type == "ridge") && config.train_clips.empty() && !config.synthetic_train) {
      fail(p, "\"" + r.type + "\" needs train_clips or synthetic_train");
    }
  }
  for (std::size_t i = 0; i < 2; ++i) {
    try {
      config.cameras[i].validate();
    } catch (const ConfigError& e) {
      fail(index_path("$.cameras", i), e.what());
    }
  }
  if ((config.cameras[0].center - config.cameras[1].center).norm() < 1e-6) fail("$.cameras", "camera centers coincide");
}

// ---------------------------------------------------------------------------
// grid

std::vector<GridPoint> expand_grid(const GridSpec& grid, bool full_product) {
  std::vector<GridPoint> points;
  points.push_back({"clean", std::nullopt, DegradationConfig{}});
  auto cm = [](double meters) { return std::round(meters * 100.0 * 1e9) / 1e9; };
  if (!full_product) {
    for (std::size_t d : grid.delay_frames) {
      if (d != 0) points.push_back({"delay", static_cast<double>(d), DegradationConfig{.delay_frames = d}});
    }
    for (std::size_t r : grid.fps_ratio) {
      if (r != 1) points.push_back({"fps_ratio", static_cast<double>(r), DegradationConfig{.fps_ratio = r}});
    }
    for (double s : grid.noise_std_m) {
      if (s != 0.0) points.push_back({"noise", cm(s), DegradationConfig{.noise_std_m = s}});
    }
    for (double o : grid.occlusion_prob) {
      if (o != 0.0) points.push_back({"occlusion", o, DegradationConfig{.occlusion_prob = o}});
    }
  } else {
    for (std::size_t d : grid.delay_frames) {
      for (std::size_t r : grid.fps_ratio) {
        for (double s : grid.noise_std_m) {
          for (double o : grid.occlusion_prob) {
            const DegradationConfig dc{.delay_frames = d, .fps_ratio = r, .noise_std_m = s, .occlusion_prob = o};
            if (dc.is_neutral()) continue;
            points.push_back({fmt::format("combined:d{}:r{}:n{}:o{}", d, r, format_level(cm(s)), format_level(o)),
                              std::nullopt, dc});
          }
        }
      }
    }
  }
  // duplicate list entries would produce duplicate report keys
  std::vector<GridPoint> unique;
  for (GridPoint& p : points) {
    const bool seen = std::any_of(unique.begin(), unique.end(), [&](const GridPoint& q) {
      return q.condition == p.condition && same_level(q.level, p.level);
    });
    if (!seen) unique.push_back(std::move(p));
  }
  return unique;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t clip_seed(std::uint64_t run_seed, std::string_view clip_name) {
  return derive_seed(run_seed, fnv1a64(clip_name));
}

// ---------------------------------------------------------------------------
// clips

LoadedClips load_clips(const std::vector<std::string>& patterns, const std::optional<SyntheticCorpusSpec>& synthetic,
                       double bvh_length_scale) {
  LoadedClips out;
  std::vector<std::string> files;
  for (const std::string& pattern : patterns) {
    glob_t g{};
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    if (rc == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) files.emplace_back(g.gl_pathv[i]);
    } else {
      out.errors.push_back(pattern + ": no matching clip files");
    }
    ::globfree(&g);
  }
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  for (const std::string& file : files) {
    try {
      const std::string text = read_file(file);
      out.digests.emplace_back(file, fnv1a64(text));
      const fs::path p(file);
      if (p.extension() == ".bvh") {
        out.clips.push_back(parse_bvh(text, BvhOptions{bvh_length_scale, p.stem().string()}));
      } else if (p.extension() == ".json") {
        out.clips.push_back(load_clip_json(text));
      } else {
        throw Error("unsupported clip extension '" + p.extension().string() + "'");
      }
    } catch (const std::exception& e) {
      out.errors.push_back(file + ": " + e.what());
    }
  }
  if (synthetic) {
    const SyntheticMotionOptions opts{synthetic->seconds, synthetic->framerate_hz};
    for (MotionClip& c : synthesize_corpus(synthetic->count, synthetic->seed, opts)) {
      out.digests.emplace_back("synthetic:" + c.name(), fnv1a64(save_clip_json(c)));
      out.clips.push_back(std::move(c));
    }
  }
  std::stable_sort(out.clips.begin(), out.clips.end(), [](const MotionClip& a, const MotionClip& b) { return a.name() < b.name(); });
  for (std::size_t i = 1; i < out.clips.size(); ++i) {
    if (out.clips[i].name() == out.clips[i - 1].name()) {
      out.errors.push_back("duplicate clip name '" + out.clips[i].name() + "'");
    }
  }
  return out;
}

std::unique_ptr<Reconstructor> make_reconstructor(const ReconstructorSpec& spec, const Skeleton& skeleton,
                                                  std::size_t window_length) {
  FeatureOptions features;
  features.window_length = window_length;
  features.tap_stride = spec.tap_stride;
  features.use_validity_flags = spec.use_validity_flags;
  if (spec.type == "ik") {
    IkOptions o;
    o.damping = spec.damping;
    o.rotation_weight = spec.w_rot;
    return std::make_unique<IkReconstructor>(skeleton, o);
  }
  if (spec.type == "knn") return std::make_unique<KnnReconstructor>(skeleton, spec.k, features);
  if (spec.type == "ridge") return std::make_unique<RidgeReconstructor>(skeleton, spec.lambda, features);
  throw ConfigError("unknown reconstructor '" + spec.type + "'");
}

CartesianStream simulate_cartesian(const MotionClip& clip, const ExperimentConfig& config) {
  if (config.cartesian_source == CartesianSource::kGroundTruth) return cartesian_from_clip(clip);
  const std::uint64_t base = clip_seed(config.detection.seed, clip.name());
  DetectorModel a = config.detection;
  DetectorModel b = config.detection;
  a.seed = derive_seed(base, 0xA);
  b.seed = derive_seed(base, 0xB);
  const DetectionStream da = synthesize_detections(clip, config.cameras[0], a);
  const DetectionStream db = synthesize_detections(clip, config.cameras[1], b);
  return reconstruct_cartesian_stream(da, db, config.cameras[0], config.cameras[1]);
}

// ---------------------------------------------------------------------------
// execution

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index is handled by exactly one call.
template <typename F>
void parallel_for(std::size_t n, std::size_t jobs, F&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : workers) t.join();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory '" + dir + "': " + ec.message());
}

std::string stream_path(const std::string& dir, const std::string& clip, std::string_view kind) {
  return (fs::path(dir) / (clip + "." + std::string(kind) + ".json")).string();
}

struct ClipInputs {
  SparseStream sparse;
  CartesianStream cartesian;
};

struct TaskOutput {
  std::vector<ErrorAccumulator> per_reconstructor;
  double staleness_sum_s = 0.0;
  std::size_t frames = 0;
  std::optional<std::string> error;
};

MotionClip prediction_clip(const MotionClip& gt, const std::vector<Prediction>& predictions) {
  std::vector<Pose> poses;
  poses.reserve(predictions.size());
  for (const Prediction& p : predictions) poses.push_back(p.pose);
  return MotionClip(gt.name() + "_pred", gt.skeleton(), gt.framerate(), std::move(poses));
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunOutcome run_simulate(const ExperimentConfig& config, std::size_t jobs) {
  RunOutcome outcome;
  LoadedClips loaded = load_clips(config.clips, config.synthetic, config.bvh_length_scale);
  outcome.errors = loaded.errors;
  const std::string dir = (fs::path(config.output_dir) / "streams").string();
  ensure_dir(dir);
  std::vector<std::vector<std::string>> written(loaded.clips.size());
  std::vector<std::optional<std::string>> errors(loaded.clips.size());
  parallel_for(loaded.clips.size(), jobs, [&](std::size_t i) {
    const MotionClip& clip = loaded.clips[i];
    try {
      const std::string sp = stream_path(dir, clip.name(), "sparse");
      const std::string cp = stream_path(dir, clip.name(), "cartesian");
      write_file(sp, save_sparse_stream_json(derive_sparse_stream(clip)));
      write_file(cp, save_cartesian_stream_json(simulate_cartesian(clip, config)));
      written[i] = {sp, cp};
    } catch (const std::exception& e) {
      errors[i] = clip.name() + ": " + e.what();
    }
  });
  for (std::size_t i = 0; i < loaded.clips.size(); ++i) {
    outcome.written_files.insert(outcome.written_files.end(), written[i].begin(), written[i].end());
    if (errors[i]) outcome.errors.push_back(*errors[i]);
  }
  return outcome;
}

SweepResult evaluate_sweep(const ExperimentConfig& config, std::size_t jobs) {
  SweepResult result;
  LoadedClips loaded = load_clips(config.clips, config.synthetic, config.bvh_length_scale);
  result.errors = loaded.errors;
  if (loaded.clips.empty()) {
    result.errors.push_back("no evaluation clips could be loaded");
    return result;
  }
  const Skeleton& skeleton = loaded.clips.front().skeleton();

  // inputs per clip
  std::vector<std::optional<ClipInputs>> inputs(loaded.clips.size());
  std::vector<std::optional<std::string>> input_errors(loaded.clips.size());
  parallel_for(loaded.clips.size(), jobs, [&](std::size_t i) {
    const MotionClip& clip = loaded.clips[i];
    try {
      if (!clip.skeleton().matches(skeleton)) throw StructuralError("skeleton differs from the first clip's");
      ClipInputs in;
      if (config.streams_dir) {
        const std::string sp = stream_path(*config.streams_dir, clip.name(), "sparse");
        const std::string cp = stream_path(*config.streams_dir, clip.name(), "cartesian");
        if (!fs::exists(sp) || !fs::exists(cp)) {
          throw Error("simulated streams not found in '" + *config.streams_dir +
                      "'; run `avbench simulate --config <config>` first or drop streams_dir to simulate in-flight");
        }
        in.sparse = load_sparse_stream_json(read_file(sp));
        in.cartesian = load_cartesian_stream_json(read_file(cp));
        if (in.sparse.samples.size() != clip.frame_count()) throw StructuralError("simulated sparse stream length does not match the clip");
      } else {
        in.sparse = derive_sparse_stream(clip);
        in.cartesian = simulate_cartesian(clip, config);
      }
      inputs[i] = std::move(in);
    } catch (const std::exception& e) {
      input_errors[i] = clip.name() + ": " + e.what();
    }
  });
  for (const auto& e : input_errors) {
    if (e) result.errors.push_back(*e);
  }

  // reconstructors
  std::vector<std::unique_ptr<Reconstructor>> reconstructors;
  std::optional<LoadedClips> train;
  for (const ReconstructorSpec& spec : config.reconstructors) {
    auto r = make_reconstructor(spec, skeleton, config.window_length);
    if (spec.type != "ik") {
      if (!train) {
        train = load_clips(config.train_clips, config.synthetic_train, config.bvh_length_scale);
        for (const auto& e : train->errors) result.errors.push_back("train: " + e);
      }
      if (train->clips.empty()) {
        result.errors.push_back(spec.type + ": no training clips could be loaded");
        continue;
      }
      r->fit(train->clips);
    }
    reconstructors.push_back(std::move(r));
  }
  if (reconstructors.empty()) return result;

  // tasks: point x seed x clip, deterministic points run for the first seed only
  const std::vector<GridPoint> points = expand_grid(config.grid, config.full_product);
  struct Task {
    std::size_t point;
    std::uint64_t seed;
    std::size_t clip;
  };
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < points.size(); ++p) {
    const std::size_t seed_count = points[p].stochastic() ? config.seeds.size() : 1;
    for (std::size_t s = 0; s < seed_count; ++s) {
      for (std::size_t c = 0; c < loaded.clips.size(); ++c) {
        if (inputs[c]) tasks.push_back({p, config.seeds[s], c});
      }
    }
  }

  std::vector<TaskOutput> outputs(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    const Task& task = tasks[i];
    const MotionClip& clip = loaded.clips[task.clip];
    const ClipInputs& in = *inputs[task.clip];
    TaskOutput& out = outputs[i];
    try {
      DegradationConfig dc = points[task.point].degradation;
      dc.seed = clip_seed(task.seed, clip.name());
      const auto fused = align(in.sparse, compose(in.cartesian, dc));
      for (const FusedFrame& f : fused) out.staleness_sum_s += f.staleness();
      out.frames = fused.size();
      for (const auto& r : reconstructors) {
        ErrorAccumulator acc(skeleton.size());
        acc.add_clip(prediction_clip(clip, reconstruct_sequence(*r, fused)), clip);
        out.per_reconstructor.push_back(std::move(acc));
      }
    } catch (const std::exception& e) {
      out.error = fmt::format("{} [{} {} seed {}]: {}", clip.name(), points[task.point].condition,
                              format_level(points[task.point].level), task.seed, e.what());
    }
  });

  // reduce in task order (point, seed, clip name)
  for (std::size_t p = 0; p < points.size(); ++p) {
    std::vector<ErrorAccumulator> acc(reconstructors.size(), ErrorAccumulator(skeleton.size()));
    double staleness = 0.0;
    std::size_t frames = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].point != p) continue;
      if (outputs[i].error) {
        result.errors.push_back(*outputs[i].error);
        continue;
      }
      for (std::size_t r = 0; r < reconstructors.size(); ++r) acc[r].merge(outputs[i].per_reconstructor[r]);
      staleness += outputs[i].staleness_sum_s;
      frames += outputs[i].frames;
    }
    if (frames == 0) continue;
    for (std::size_t r = 0; r < reconstructors.size(); ++r) {
      for (BodySubsetLabel label : {BodySubsetLabel::kUp, BodySubsetLabel::kLow}) {
        const auto m = acc[r].subset_metrics(BodySubset::of(label, skeleton));
        ResultRow row;
        row.condition = points[p].condition;
        row.level = points[p].level;
        row.reconstructor = reconstructors[r]->name();
        row.subset = label;
        row.mpjpe_cm = m.mpjpe_cm;
        row.mpjre_deg = m.mpjre_deg;
        row.mpjve_cmps = m.mpjve_cmps;
        row.mean_staleness_ms = 1000.0 * staleness / static_cast<double>(frames);
        result.rows.push_back(std::move(row));
      }
    }
  }
  return result;
}

RunOutcome run_sweep(const ExperimentConfig& config, std::size_t jobs, const std::optional<std::string>& reference_path) {
  RunOutcome outcome;
  std::optional<ReferenceTable> reference;
  if (reference_path) reference = load_reference_table(read_file(*reference_path));

  SweepResult sweep = evaluate_sweep(config, jobs);
  outcome.errors = sweep.errors;
  MetricsReport report = build_report(std::move(sweep.rows), reference ? &*reference : nullptr, config.reference_model);
  {
    std::string seeds;
    for (std::uint64_t s : config.seeds) seeds += (seeds.empty() ? "" : " ") + std::to_string(s);
    report.metadata["seeds"] = seeds;
    report.metadata["cartesian_source"] = config.cartesian_source == CartesianSource::kGroundTruth ? "ground_truth" : "triangulated";
  }

  ensure_dir(config.output_dir);
  const fs::path dir(config.output_dir);
  const std::string csv_path = (dir / "report.csv").string();
  const std::string md_path = (dir / "report.md").string();
  const std::string manifest_path = (dir / "run_manifest.json").string();
  write_file(csv_path, report_to_csv(report));
  write_file(md_path, report_to_markdown(report));

  json manifest;
  manifest["tool_version"] = std::string(kToolVersion);
  manifest["created_utc"] = utc_now();
  manifest["jobs"] = jobs;
  manifest["seeds"] = config.seeds;
  manifest["detection_seed"] = config.detection.seed;
  manifest["cartesian_source"] = report.metadata["cartesian_source"];
  json points = json::array();
  for (const GridPoint& p : expand_grid(config.grid, config.full_product)) {
    points.push_back({{"condition", p.condition},
                      {"level", p.level ? json(*p.level) : json(nullptr)},
                      {"delay_frames", p.degradation.delay_frames},
                      {"fps_ratio", p.degradation.fps_ratio},
                      {"noise_std_m", p.degradation.noise_std_m},
                      {"occlusion_prob", p.degradation.occlusion_prob}});
  }
  manifest["grid_points"] = std::move(points);
  json inputs = json::array();
  const LoadedClips digests = load_clips(config.clips, config.synthetic, config.bvh_length_scale);
  for (const auto& [source, digest] : digests.digests) inputs.push_back({{"source", source}, {"fnv1a64", fmt::format("{:016x}", digest)}});
  manifest["inputs"] = std::move(inputs);
  if (reference_path) manifest["reference"] = {{"path", *reference_path}, {"fnv1a64", fmt::format("{:016x}", fnv1a64(read_file(*reference_path)))}};
  manifest["errors"] = outcome.errors;
  write_file(manifest_path, manifest.dump(2) + "\n");

  outcome.written_files = {csv_path, md_path, manifest_path};
  return outcome;
}

RunOutcome run_report(const std::vector<std::string>& report_paths, const std::string& out_dir,
                      const std::optional<std::string>& reference_path, const std::string& reference_model) {
  if (report_paths.empty()) throw ConfigError("report needs at least one report CSV");
  std::vector<std::vector<ResultRow>> sets;
  for (const std::string& p : report_paths) sets.push_back(parse_report_csv(read_file(p)));
  std::optional<ReferenceTable> reference;
  if (reference_path) reference = load_reference_table(read_file(*reference_path));
  const MetricsReport report = build_report(merge_results(sets), reference ? &*reference : nullptr, reference_model);
  ensure_dir(out_dir);
  RunOutcome outcome;
  const std::string csv_path = (fs::path(out_dir) / "report.csv").string();
  const std::string md_path = (fs::path(out_dir) / "report.md").string();
  write_file(csv_path, report_to_csv(report));
  write_file(md_path, report_to_markdown(report));
  outcome.written_files = {csv_path, md_path};
  return outcome;
}

}  // namespace avbench
