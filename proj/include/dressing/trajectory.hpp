#pragma once

#include <string>

#include "dressing/env.hpp"

namespace dressing {

// JSON-lines trajectory files: a header record followed by one record per
// step. Numeric fields round-trip exactly (64-bit floats are emitted with
// full-precision encoding).
void serialize_trajectory(const Trajectory& trajectory, const std::string& path);
Trajectory deserialize_trajectory(const std::string& path);

}  // namespace dressing
