#pragma once

#include <string>
#include <string_view>

#include "avbench/sensor_sim.hpp"

namespace avbench {

// JSON documents written by `simulate`. Doubles use shortest round-trip form.
//
// sparse:    {schema_version, kind: "sparse", framerate_hz,
//             samples: [{t, joints: [{name, p, q_wxyz, v, w}] }]}
// cartesian: {schema_version, kind: "cartesian", framerate_hz,
//             samples: [{t, capture_t, positions: [[x,y,z]...], valid: [bool...]}]}

std::string save_sparse_stream_json(const SparseStream& stream);
SparseStream load_sparse_stream_json(std::string_view text);

std::string save_cartesian_stream_json(const CartesianStream& stream);
CartesianStream load_cartesian_stream_json(std::string_view text);

}  // namespace avbench
