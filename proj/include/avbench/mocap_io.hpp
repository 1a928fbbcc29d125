#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "avbench/skeleton.hpp"

namespace avbench {

struct BvhOptions {
  /// Multiplies OFFSET values and root position channels, e.g. 0.01 for centimeter files.
  double length_scale = 1.0;
  /// Clip name; BVH carries none.
  std::string name = "bvh";
};

/// Parses the HIERARCHY/MOTION subset of BVH.
///
/// Rotation channels may come in any order and are composed as intrinsic
/// rotations in the declared order (Z X Y means Rz * Rx * Ry). Position
/// channels are only accepted on the root. A nonzero root OFFSET is folded into
/// the root translation. End Site blocks carry no joint.
///
/// Errors raise ParseError with the offending line number.
MotionClip parse_bvh(std::string_view text, const BvhOptions& options = {});

/// Writes BVH with ZXY rotation order on every joint, Xposition Yposition
/// Zposition on the root. Angles and lengths carry 12 significant digits; the
/// frame time is written in shortest round-trip form.
/// Lengths are divided by `length_scale`.
std::string serialize_bvh(const MotionClip& clip, double length_scale = 1.0);

/// Intrinsic Z-X-Y Euler angles (radians) of a rotation, R = Rz(z) Rx(x) Ry(y).
Vec3 euler_zxy(const Rotation& r);
Rotation from_euler_zxy(double z, double x, double y);

inline constexpr std::string_view kClipSchemaVersion = "1";

/// Canonical clip JSON: {schema_version, name, framerate_hz,
/// joints[{name,parent,offset_m}], frames[{root_t_m, quats_wxyz}]}.
/// Doubles are written in shortest round-trip form, so save/load is lossless.
std::string save_clip_json(const MotionClip& clip);
/// Rejects unknown schema versions, missing fields and non-finite values (SchemaError).
MotionClip load_clip_json(std::string_view json_text);

enum class BodySubsetLabel { kUp, kLow, kFull };

std::string_view to_string(BodySubsetLabel subset);
std::optional<BodySubsetLabel> parse_subset(std::string_view text);

struct ReferenceRow {
  std::string condition;
  std::optional<double> level;
  std::string model;
  BodySubsetLabel subset = BodySubsetLabel::kUp;
  double mpjpe_cm = 0.0;
  double mpjre_deg = 0.0;
  double mpjve_cmps = 0.0;
};

struct ReferenceTable {
  std::vector<ReferenceRow> rows;

  /// First row matching (condition, level, model, subset), if any.
  const ReferenceRow* find(std::string_view condition, std::optional<double> level,
                           std::string_view model, BodySubsetLabel subset) const;
};

/// CSV with header condition,level,model,subset,mpjpe,mpjre,mpjve (extra
/// columns after those are ignored). Empty input yields an empty table.
/// Malformed rows raise ParseError naming the 1-based data row index.
ReferenceTable load_reference_table(std::string_view csv_text);

/// Two levels are the same grid coordinate when they agree to 1e-9.
bool same_level(std::optional<double> a, std::optional<double> b);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace avbench
