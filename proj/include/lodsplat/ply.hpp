#pragma once

#include "lodsplat/gaussian.hpp"
#include "lodsplat/image.hpp"

#include <filesystem>
#include <stdexcept>
#include <vector>

namespace lodsplat {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary little-endian PLY in the layout common splat viewers read:
//   x y z nx ny nz f_dc_0..2 f_rest_0..44 opacity scale_0..2 rot_0..3
// all as float32. Normals are written as zeros. f_rest is channel-major
// (all 15 red coefficients, then green, then blue). Values are stored raw
// (log-scale, logit opacity, unnormalized wxyz quaternion), so a
// round trip is exact for values representable in float32.

void export_ply(const std::filesystem::path& path, const std::vector<GaussianParams>& gaussians);

/// Throws FormatError on a malformed header or a missing property, IoError
/// when the file cannot be read.
std::vector<GaussianParams> import_ply(const std::filesystem::path& path);

}  // namespace lodsplat
