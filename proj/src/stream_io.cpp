#include "avbench/stream_io.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "avbench/error.hpp"
#include "avbench/mocap_io.hpp"

namespace avbench {

namespace {

using nlohmann::json;

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

double num(const json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError(where + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(where + ": value is not finite");
  return d;
}

Vec3 vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw SchemaError(where + ": expected 3 numbers");
  return Vec3(num(v[0], where), num(v[1], where), num(v[2], where));
}

const json& at(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw SchemaError(where + ": missing field '" + key + "'");
  return obj.at(key);
}

json parse_doc(std::string_view text, std::string_view kind) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("stream JSON is malformed: ") + e.what());
  }
  const json& v = at(doc, "schema_version", "$");
  if (!v.is_string() || v.get<std::string>() != kClipSchemaVersion) throw SchemaError("unsupported stream schema version");
  const json& k = at(doc, "kind", "$");
  if (!k.is_string() || k.get<std::string>() != kind) throw SchemaError("expected a '" + std::string(kind) + "' stream");
  return doc;
}

}  // namespace

std::string save_sparse_stream_json(const SparseStream& stream) {
  json doc;
  doc["schema_version"] = std::string(kClipSchemaVersion);
  doc["kind"] = "sparse";
  doc["framerate_hz"] = stream.framerate;
  json samples = json::array();
  for (const SparseSample& s : stream.samples) {
    json joints = json::array();
    for (std::size_t k = 0; k < kTrackedJointCount; ++k) {
      const TrackedState& j = s.joints[k];
      joints.push_back({{"name", kTrackedJointNames[k]},
                        {"p", vec(j.position)},
                        {"q_wxyz", json::array({j.orientation.w(), j.orientation.x(), j.orientation.y(), j.orientation.z()})},
                        {"v", vec(j.linear_velocity)},
                        {"w", vec(j.angular_velocity)}});
    }
    samples.push_back({{"t", s.timestamp}, {"joints", std::move(joints)}});
  }
  doc["samples"] = std::move(samples);
  return doc.dump();
}

SparseStream load_sparse_stream_json(std::string_view text) {
  const json doc = parse_doc(text, "sparse");
  SparseStream out;
  out.framerate = num(at(doc, "framerate_hz", "$"), "$.framerate_hz");
  const json& samples = at(doc, "samples", "$");
  if (!samples.is_array()) throw SchemaError("$.samples: expected an array");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string where = "$.samples[" + std::to_string(i) + "]";
    SparseSample s;
    s.timestamp = num(at(samples[i], "t", where), where + ".t");
    const json& joints = at(samples[i], "joints", where);
    if (!joints.is_array() || joints.size() != kTrackedJointCount) throw SchemaError(where + ".joints: expected 3 entries");
    for (std::size_t k = 0; k < kTrackedJointCount; ++k) {
      const std::string jw = where + ".joints[" + std::to_string(k) + "]";
      TrackedState& j = s.joints[k];
      j.position = vec3(at(joints[k], "p", jw), jw + ".p");
      const json& q = at(joints[k], "q_wxyz", jw);
      if (!q.is_array() || q.size() != 4) throw SchemaError(jw + ".q_wxyz: expected 4 numbers");
      j.orientation = Rotation::from_wxyz(num(q[0], jw), num(q[1], jw), num(q[2], jw), num(q[3], jw));
      j.linear_velocity = vec3(at(joints[k], "v", jw), jw + ".v");
      j.angular_velocity = vec3(at(joints[k], "w", jw), jw + ".w");
    }
    out.samples.push_back(s);
  }
  return out;
}

std::string save_cartesian_stream_json(const CartesianStream& stream) {
  json doc;
  doc["schema_version"] = std::string(kClipSchemaVersion);
  doc["kind"] = "cartesian";
  doc["framerate_hz"] = stream.framerate;
  json samples = json::array();
  for (const CartesianSample& s : stream.samples) {
    json positions = json::array();
    for (const Vec3& p : s.positions) positions.push_back(vec(p));
    json valid = json::array();
    for (bool v : s.valid) valid.push_back(v);
    samples.push_back({{"t", s.timestamp}, {"capture_t", s.capture_time}, {"positions", std::move(positions)},
                       {"valid", std::move(valid)}});
  }
  doc["samples"] = std::move(samples);
  return doc.dump();
}

CartesianStream load_cartesian_stream_json(std::string_view text) {
  const json doc = parse_doc(text, "cartesian");
  CartesianStream out;
  out.framerate = num(at(doc, "framerate_hz", "$"), "$.framerate_hz");
  const json& samples = at(doc, "samples", "$");
  if (!samples.is_array()) throw SchemaError("$.samples: expected an array");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string where = "$.samples[" + std::to_string(i) + "]";
    CartesianSample s;
    s.timestamp = num(at(samples[i], "t", where), where + ".t");
    s.capture_time = num(at(samples[i], "capture_t", where), where + ".capture_t");
    const json& positions = at(samples[i], "positions", where);
    const json& valid = at(samples[i], "valid", where);
    if (!positions.is_array() || !valid.is_array() || positions.size() != valid.size()) {
      throw SchemaError(where + ": positions and valid must be arrays of equal length");
    }
    for (std::size_t j = 0; j < positions.size(); ++j) {
      s.positions.push_back(vec3(positions[j], where + ".positions[" + std::to_string(j) + "]"));
      if (!valid[j].is_boolean()) throw SchemaError(where + ".valid[" + std::to_string(j) + "]: expected a boolean");
      s.valid.push_back(valid[j].get<bool>());
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace avbench
