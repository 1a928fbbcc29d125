#include "avbench/mocap_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "avbench/error.hpp"

namespace avbench {

namespace {

// ---------------------------------------------------------------------------
// number formatting

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

// 12 significant digits: hides the last-bit noise of Euler extraction
// (89.99999999999999 -> 90) while staying far below the round-trip tolerance.
std::string bvh_number(double v) {
  if (std::abs(v) < 1e-12) return "0";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  return std::string(buf, end);
}

bool parse_double(std::string_view text, double& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

// ---------------------------------------------------------------------------
// BVH tokenizer

struct Token {
  std::string text;
  std::size_t line;
};

class TokenStream {
 public:
  explicit TokenStream(std::string_view text) {
    std::size_t line = 1;
    std::size_t i = 0;
    while (i < text.size()) {
      const char c = text[i];
      if (c == '\n') {
        ++line;
        ++i;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
      } else if (c == '{' || c == '}') {
        tokens_.push_back({std::string(1, c), line});
        ++i;
      } else {
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])) && text[j] != '{' &&
               text[j] != '}') {
          ++j;
        }
        tokens_.push_back({std::string(text.substr(i, j - i)), line});
        i = j;
      }
    }
    last_line_ = line;
  }

  bool done() const { return pos_ >= tokens_.size(); }
  const Token& peek() const {
    if (done()) throw ParseError("unexpected end of file", last_line_);
    return tokens_[pos_];
  }
  Token next() {
    const Token& t = peek();
    ++pos_;
    return t;
  }
  void expect(std::string_view word) {
    Token t = next();
    if (t.text != word) throw ParseError("expected '" + std::string(word) + "', found '" + t.text + "'", t.line);
  }
  double number() {
    Token t = next();
    double v = 0.0;
    if (!parse_double(t.text, v)) throw ParseError("expected a number, found '" + t.text + "'", t.line);
    return v;
  }
  std::size_t line() const { return done() ? last_line_ : tokens_[pos_].line; }

 private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::size_t last_line_ = 1;
};

enum class Channel { kXpos, kYpos, kZpos, kXrot, kYrot, kZrot };

std::optional<Channel> channel_from_name(std::string_view s) {
  if (s == "Xposition") return Channel::kXpos;
  if (s == "Yposition") return Channel::kYpos;
  if (s == "Zposition") return Channel::kZpos;
  if (s == "Xrotation") return Channel::kXrot;
  if (s == "Yrotation") return Channel::kYrot;
  if (s == "Zrotation") return Channel::kZrot;
  return std::nullopt;
}

struct BvhJoint {
  std::string name;
  int parent = Skeleton::kNoParent;
  Vec3 offset = Vec3::Zero();
  std::vector<Channel> channels;
};

void parse_joint_body(TokenStream& ts, std::vector<BvhJoint>& joints, int self, bool is_root) {
  ts.expect("{");
  {
    ts.expect("OFFSET");
    Vec3 o;
    o.x() = ts.number();
    o.y() = ts.number();
    o.z() = ts.number();
    joints[self].offset = o;
  }
  if (ts.peek().text == "CHANNELS") {
    ts.next();
    const Token count_tok = ts.next();
    int count = 0;
    auto [p, ec] = std::from_chars(count_tok.text.data(), count_tok.text.data() + count_tok.text.size(), count);
    if (ec != std::errc() || count < 0 || count > 6) {
      throw ParseError("invalid channel count '" + count_tok.text + "'", count_tok.line);
    }
    for (int i = 0; i < count; ++i) {
      const Token ch = ts.next();
      auto c = channel_from_name(ch.text);
      if (!c) throw ParseError("unknown channel '" + ch.text + "'", ch.line);
      const bool positional = *c == Channel::kXpos || *c == Channel::kYpos || *c == Channel::kZpos;
      if (positional && !is_root) {
        throw ParseError("position channels are only supported on the root joint", ch.line);
      }
      if (std::find(joints[self].channels.begin(), joints[self].channels.end(), *c) != joints[self].channels.end()) {
        throw ParseError("duplicate channel '" + ch.text + "'", ch.line);
      }
      joints[self].channels.push_back(*c);
    }
  }
  while (true) {
    const Token t = ts.next();
    if (t.text == "}") return;
    if (t.text == "JOINT") {
      const Token name = ts.next();
      joints.push_back({name.text, self, Vec3::Zero(), {}});
      parse_joint_body(ts, joints, static_cast<int>(joints.size()) - 1, false);
    } else if (t.text == "End") {
      ts.expect("Site");
      ts.expect("{");
      ts.expect("OFFSET");
      ts.number();
      ts.number();
      ts.number();
      ts.expect("}");
    } else {
      throw ParseError("unexpected token '" + t.text + "' in joint '" + joints[self].name + "'", t.line);
    }
  }
}

Rotation axis_rotation(Channel c, double deg) {
  const double rad = deg_to_rad(deg);
  switch (c) {
    case Channel::kXrot: return Rotation::from_axis_angle(Vec3::UnitX(), rad);
    case Channel::kYrot: return Rotation::from_axis_angle(Vec3::UnitY(), rad);
    default: return Rotation::from_axis_angle(Vec3::UnitZ(), rad);
  }
}

// Permutation taking file (depth-first) order to the canonical SMPL order when
// the file describes the same tree; empty otherwise.
std::vector<std::size_t> smpl_permutation(const std::vector<BvhJoint>& joints) {
  const Skeleton& smpl = Skeleton::smpl22();
  if (joints.size() != smpl.size()) return {};
  std::vector<std::size_t> file_index_of(smpl.size());
  for (std::size_t k = 0; k < smpl.size(); ++k) {
    auto it = std::find_if(joints.begin(), joints.end(), [&](const BvhJoint& j) { return j.name == smpl.name(k); });
    if (it == joints.end()) return {};
    file_index_of[k] = static_cast<std::size_t>(it - joints.begin());
  }
  for (std::size_t k = 1; k < smpl.size(); ++k) {
    const int file_parent = joints[file_index_of[k]].parent;
    if (file_parent < 0 || file_index_of[smpl.parent(k)] != static_cast<std::size_t>(file_parent)) return {};
  }
  return file_index_of;
}

}  // namespace

// ---------------------------------------------------------------------------
// BVH

Rotation from_euler_zxy(double z, double x, double y) {
  return Rotation::from_axis_angle(Vec3::UnitZ(), z) * Rotation::from_axis_angle(Vec3::UnitX(), x) *
         Rotation::from_axis_angle(Vec3::UnitY(), y);
}

Vec3 euler_zxy(const Rotation& r) {
  // R = Rz Rx Ry:  R(2,1) = sin x,  R(0,1) = -sin z cos x,  R(1,1) = cos z cos x,
  // R(2,0) = -cos x sin y,  R(2,2) = cos x cos y
  const Mat3 m = r.matrix();
  const double sx = std::clamp(m(2, 1), -1.0, 1.0);
  const double x = std::asin(sx);
  double z = 0.0;
  double y = 0.0;
  if (std::abs(sx) < 1.0 - 1e-12) {
    z = std::atan2(-m(0, 1), m(1, 1));
    y = std::atan2(-m(2, 0), m(2, 2));
  } else {
    // gimbal lock: only z +/- y is observable; put it all in z
    z = std::atan2(m(1, 0), m(0, 0));
  }
  return Vec3(z, x, y);
}

MotionClip parse_bvh(std::string_view text, const BvhOptions& options) {
  TokenStream ts(text);
  ts.expect("HIERARCHY");
  ts.expect("ROOT");
  std::vector<BvhJoint> joints;
  joints.push_back({ts.next().text, Skeleton::kNoParent, Vec3::Zero(), {}});
  parse_joint_body(ts, joints, 0, true);

  if (ts.done()) throw ParseError("missing MOTION section", ts.line());
  {
    const Token t = ts.next();
    if (t.text != "MOTION") throw ParseError("missing MOTION section (found '" + t.text + "')", t.line);
  }
  ts.expect("Frames:");
  const Token frames_tok = ts.next();
  long long frame_count = -1;
  {
    auto [p, ec] = std::from_chars(frames_tok.text.data(), frames_tok.text.data() + frames_tok.text.size(), frame_count);
    if (ec != std::errc() || p != frames_tok.text.data() + frames_tok.text.size() || frame_count < 0) {
      throw ParseError("invalid frame count '" + frames_tok.text + "'", frames_tok.line);
    }
  }
  ts.expect("Frame");
  ts.expect("Time:");
  const std::size_t frame_time_line = ts.line();
  const double frame_time = ts.number();
  if (!(frame_time > 0.0)) throw ParseError("frame time must be positive", frame_time_line);
  double framerate = 1.0 / frame_time;
  if (std::abs(framerate - std::round(framerate)) < 1e-9 * framerate) framerate = std::round(framerate);

  std::size_t channel_total = 0;
  for (const auto& j : joints) channel_total += j.channels.size();

  // remaining tokens are channel values; group them by source line
  std::vector<std::pair<std::size_t, std::vector<double>>> rows;
  while (!ts.done()) {
    const std::size_t line = ts.line();
    if (rows.empty() || rows.back().first != line) rows.push_back({line, {}});
    rows.back().second.push_back(ts.number());
  }
  if (static_cast<long long>(rows.size()) != frame_count) {
    throw ParseError("header declares " + std::to_string(frame_count) + " frames but " +
                         std::to_string(rows.size()) + " were found",
                     rows.empty() ? frames_tok.line : rows.back().first);
  }
  if (frame_count == 0) throw ParseError("clip has no frames", frames_tok.line);

  const std::vector<std::size_t> perm = smpl_permutation(joints);
  const std::size_t n = joints.size();
  // file index for each output joint
  std::vector<std::size_t> source(n);
  for (std::size_t k = 0; k < n; ++k) source[k] = perm.empty() ? k : perm[k];
  std::vector<std::size_t> target_of(n);
  for (std::size_t k = 0; k < n; ++k) target_of[source[k]] = k;

  std::vector<std::string> names(n);
  std::vector<int> parents(n);
  std::vector<Vec3> offsets(n);
  for (std::size_t k = 0; k < n; ++k) {
    const BvhJoint& j = joints[source[k]];
    names[k] = j.name;
    parents[k] = j.parent < 0 ? Skeleton::kNoParent : static_cast<int>(target_of[j.parent]);
    offsets[k] = k == 0 ? Vec3::Zero() : Vec3(j.offset * options.length_scale);
  }
  const Vec3 root_offset = joints[0].offset * options.length_scale;
  Skeleton skeleton(std::move(names), std::move(parents), std::move(offsets));

  std::vector<Pose> poses;
  poses.reserve(rows.size());
  for (const auto& [line, values] : rows) {
    if (values.size() != channel_total) {
      throw ParseError("expected " + std::to_string(channel_total) + " channel values, found " +
                           std::to_string(values.size()),
                       line);
    }
    Pose pose = Pose::identity(n);
    pose.root_translation = root_offset;
    std::size_t v = 0;
    for (std::size_t fi = 0; fi < n; ++fi) {
      Rotation r;
      for (Channel c : joints[fi].channels) {
        const double value = values[v++];
        switch (c) {
          case Channel::kXpos: pose.root_translation.x() += value * options.length_scale; break;
          case Channel::kYpos: pose.root_translation.y() += value * options.length_scale; break;
          case Channel::kZpos: pose.root_translation.z() += value * options.length_scale; break;
          default: r = r * axis_rotation(c, value); break;
        }
      }
      pose.local_rotations[target_of[fi]] = r;
    }
    poses.push_back(std::move(pose));
  }
  return MotionClip(options.name, std::move(skeleton), framerate, std::move(poses));
}

std::string serialize_bvh(const MotionClip& clip, double length_scale) {
  const Skeleton& sk = clip.skeleton();
  const std::size_t n = sk.size();
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t i = 1; i < n; ++i) children[static_cast<std::size_t>(sk.parent(i))].push_back(i);

  std::ostringstream out;
  std::vector<std::size_t> dfs_order;
  auto len = [&](double v) { return bvh_number(v / length_scale); };

  auto write_joint = [&](auto&& self, std::size_t j, int depth) -> void {
    const std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
    dfs_order.push_back(j);
    out << indent << (j == 0 ? "ROOT " : "JOINT ") << sk.name(j) << "\n" << indent << "{\n";
    const Vec3& o = sk.rest_offset(j);
    out << indent << "  OFFSET " << len(o.x()) << " " << len(o.y()) << " " << len(o.z()) << "\n";
    if (j == 0) {
      out << indent << "  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation\n";
    } else {
      out << indent << "  CHANNELS 3 Zrotation Xrotation Yrotation\n";
    }
    for (std::size_t c : children[j]) self(self, c, depth + 1);
    if (children[j].empty()) {
      out << indent << "  End Site\n" << indent << "  {\n" << indent << "    OFFSET 0 0 0\n" << indent << "  }\n";
    }
    out << indent << "}\n";
  };
  out << "HIERARCHY\n";
  write_joint(write_joint, 0, 0);
  out << "MOTION\nFrames: " << clip.frame_count() << "\nFrame Time: " << shortest(clip.frame_time()) << "\n";
  for (const Pose& pose : clip.poses()) {
    const Vec3& t = pose.root_translation;
    out << len(t.x()) << " " << len(t.y()) << " " << len(t.z());
    for (std::size_t j : dfs_order) {
      const Vec3 e = euler_zxy(pose.local_rotations[j]);
      out << " " << bvh_number(rad_to_deg(e[0])) << " " << bvh_number(rad_to_deg(e[1])) << " "
          << bvh_number(rad_to_deg(e[2]));
    }
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// clip JSON

std::string save_clip_json(const MotionClip& clip) {
  using nlohmann::json;
  json doc;
  doc["schema_version"] = std::string(kClipSchemaVersion);
  doc["name"] = clip.name();
  doc["framerate_hz"] = clip.framerate();
  json joints = json::array();
  const Skeleton& sk = clip.skeleton();
  for (std::size_t j = 0; j < sk.size(); ++j) {
    const Vec3& o = sk.rest_offset(j);
    joints.push_back({{"name", sk.name(j)}, {"parent", sk.parent(j)}, {"offset_m", {o.x(), o.y(), o.z()}}});
  }
  doc["joints"] = std::move(joints);
  json frames = json::array();
  for (const Pose& pose : clip.poses()) {
    json quats = json::array();
    for (const Rotation& r : pose.local_rotations) quats.push_back({r.w(), r.x(), r.y(), r.z()});
    const Vec3& t = pose.root_translation;
    frames.push_back({{"root_t_m", {t.x(), t.y(), t.z()}}, {"quats_wxyz", std::move(quats)}});
  }
  doc["frames"] = std::move(frames);
  return doc.dump(1);
}

namespace {

double finite_number(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError(where + ": expected a finite number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(where + ": value is not finite");
  return d;
}

Vec3 vec3_field(const nlohmann::json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw SchemaError(where + ": expected an array of 3 numbers");
  return Vec3(finite_number(v[0], where + "[0]"), finite_number(v[1], where + "[1]"),
              finite_number(v[2], where + "[2]"));
}

const nlohmann::json& field(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw SchemaError(where + ": missing field '" + key + "'");
  return obj.at(key);
}

}  // namespace

MotionClip load_clip_json(std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("clip JSON is malformed: ") + e.what());
  }
  const json& version = field(doc, "schema_version", "$");
  std::string version_text;
  if (version.is_string()) {
    version_text = version.get<std::string>();
  } else if (version.is_number_integer()) {
    version_text = std::to_string(version.get<long long>());
  } else {
    throw SchemaError("$.schema_version: expected a string");
  }
  if (version_text != kClipSchemaVersion) {
    throw SchemaError("unsupported clip schema version '" + version_text + "' (reader supports '" +
                      std::string(kClipSchemaVersion) + "')");
  }
  const json& name = field(doc, "name", "$");
  if (!name.is_string()) throw SchemaError("$.name: expected a string");
  const double framerate = finite_number(field(doc, "framerate_hz", "$"), "$.framerate_hz");

  const json& joints = field(doc, "joints", "$");
  if (!joints.is_array()) throw SchemaError("$.joints: expected an array");
  std::vector<std::string> names;
  std::vector<int> parents;
  std::vector<Vec3> offsets;
  for (std::size_t j = 0; j < joints.size(); ++j) {
    const std::string where = "$.joints[" + std::to_string(j) + "]";
    const json& jn = field(joints[j], "name", where);
    const json& jp = field(joints[j], "parent", where);
    if (!jn.is_string()) throw SchemaError(where + ".name: expected a string");
    if (!jp.is_number_integer()) throw SchemaError(where + ".parent: expected an integer");
    names.push_back(jn.get<std::string>());
    parents.push_back(jp.get<int>());
    offsets.push_back(vec3_field(field(joints[j], "offset_m", where), where + ".offset_m"));
  }
  Skeleton skeleton(std::move(names), std::move(parents), std::move(offsets));

  const json& frames = field(doc, "frames", "$");
  if (!frames.is_array()) throw SchemaError("$.frames: expected an array");
  std::vector<Pose> poses;
  poses.reserve(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const std::string where = "$.frames[" + std::to_string(f) + "]";
    Pose pose;
    pose.root_translation = vec3_field(field(frames[f], "root_t_m", where), where + ".root_t_m");
    const json& quats = field(frames[f], "quats_wxyz", where);
    if (!quats.is_array() || quats.size() != skeleton.size()) {
      throw SchemaError(where + ".quats_wxyz: expected " + std::to_string(skeleton.size()) + " quaternions");
    }
    for (std::size_t j = 0; j < quats.size(); ++j) {
      const std::string qw = where + ".quats_wxyz[" + std::to_string(j) + "]";
      if (!quats[j].is_array() || quats[j].size() != 4) throw SchemaError(qw + ": expected 4 numbers");
      try {
        pose.local_rotations.push_back(Rotation::from_wxyz(finite_number(quats[j][0], qw), finite_number(quats[j][1], qw),
                                                           finite_number(quats[j][2], qw), finite_number(quats[j][3], qw)));
      } catch (const InvalidRotationError& e) {
        throw SchemaError(qw + ": " + e.what());
      }
    }
    poses.push_back(std::move(pose));
  }
  try {
    return MotionClip(name.get<std::string>(), std::move(skeleton), framerate, std::move(poses));
  } catch (const StructuralError& e) {
    throw SchemaError(std::string("invalid clip: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// reference table

std::string_view to_string(BodySubsetLabel subset) {
  switch (subset) {
    case BodySubsetLabel::kUp: return "Up";
    case BodySubsetLabel::kLow: return "Low";
    case BodySubsetLabel::kFull: return "Full";
  }
  return "?";
}

std::optional<BodySubsetLabel> parse_subset(std::string_view text) {
  if (text == "Up") return BodySubsetLabel::kUp;
  if (text == "Low") return BodySubsetLabel::kLow;
  if (text == "Full") return BodySubsetLabel::kFull;
  return std::nullopt;
}

bool same_level(std::optional<double> a, std::optional<double> b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || std::abs(*a - *b) <= 1e-9;
}

const ReferenceRow* ReferenceTable::find(std::string_view condition, std::optional<double> level,
                                         std::string_view model, BodySubsetLabel subset) const {
  for (const ReferenceRow& r : rows) {
    if (r.condition == condition && r.model == model && r.subset == subset && same_level(r.level, level)) return &r;
  }
  return nullptr;
}

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r')) cell.remove_suffix(1);
    while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
    cells.push_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

ReferenceTable load_reference_table(std::string_view csv_text) {
  ReferenceTable table;
  static constexpr std::string_view kHeader[] = {"condition", "level", "model", "subset", "mpjpe", "mpjre", "mpjve"};
  std::size_t line_no = 0;
  std::size_t row_index = 0;
  bool header_seen = false;
  std::size_t start = 0;
  while (start <= csv_text.size()) {
    std::size_t end = csv_text.find('\n', start);
    if (end == std::string_view::npos) end = csv_text.size();
    std::string_view line = csv_text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const auto cells = split_csv_line(line);
    if (!header_seen) {
      if (cells.size() < 7 || !std::equal(std::begin(kHeader), std::end(kHeader), cells.begin())) {
        throw ParseError("reference CSV header must start with condition,level,model,subset,mpjpe,mpjre,mpjve", line_no);
      }
      header_seen = true;
      continue;
    }
    ++row_index;
    const std::string row_tag = "row " + std::to_string(row_index) + ": ";
    if (cells.size() < 7) throw ParseError(row_tag + "expected 7 columns", line_no);
    ReferenceRow row;
    row.condition = std::string(cells[0]);
    if (!cells[1].empty()) {
      double level = 0.0;
      if (!parse_double(cells[1], level)) throw ParseError(row_tag + "malformed level '" + std::string(cells[1]) + "'", line_no);
      row.level = level;
    }
    row.model = std::string(cells[2]);
    auto subset = parse_subset(cells[3]);
    if (!subset || *subset == BodySubsetLabel::kFull) {
      throw ParseError(row_tag + "unknown subset '" + std::string(cells[3]) + "' (expected Up or Low)", line_no);
    }
    row.subset = *subset;
    double* targets[] = {&row.mpjpe_cm, &row.mpjre_deg, &row.mpjve_cmps};
    for (int k = 0; k < 3; ++k) {
      const std::string_view cell = cells[4 + k];
      if (!parse_double(cell, *targets[k]) || *targets[k] < 0.0) {
        throw ParseError(row_tag + "malformed " + std::string(kHeader[4 + k]) + " value '" + std::string(cell) + "'",
                         line_no);
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace avbench
