#pragma once

#include "lodsplat/gaussian.hpp"
#include "lodsplat/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace lodsplat {

class HierarchyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kNoGaussian = std::numeric_limits<std::uint32_t>::max();

/// One triangle of a root face's refinement tree. Corners are in the root
/// face's rest-pose local frame; children never get frames of their own.
struct AnchorFace {
  std::uint32_t root = 0;
  std::array<Vec3, 3> corners{};
  int level = 0;
  std::uint32_t center_gaussian = kNoGaussian;
};

struct RootFace {
  /// Refinement level L(f); -1 for a degenerate face that carries nothing.
  int level = -1;
  /// Highest level whose splats have been trained (-1: none).
  int optimized_level = -1;
  /// anchors[l] holds the 4^l anchor faces of level l.
  std::vector<std::vector<AnchorFace>> anchors;

  bool active() const { return level >= 0; }
};

/// Refinement trees for every face of the rest mesh plus the Gaussian store.
/// Gaussian ids are indices into `gaussians`; ids are assigned in creation
/// order and never change.
struct AvatarHierarchy {
  Mesh mesh;
  std::vector<FaceFrame> rest_frames;
  std::vector<EmbeddedGaussian> gaussians;
  /// One splat per mesh vertex (kNoGaussian for vertices touching only
  /// degenerate faces).
  std::vector<std::uint32_t> vertex_gaussians;
  std::vector<RootFace> roots;

  /// Maximum refinement level over active roots.
  int current_level() const;
  std::vector<int> face_levels() const;
  std::size_t anchored_vertex_count() const;
  /// Count predicted by gaussian_count() for this tree shape.
  std::uint64_t expected_count() const;
};

/// V + sum over faces of (4^(L+1) - 1) / 3. Negative levels mark faces
/// without splats and contribute nothing.
std::uint64_t gaussian_count(std::uint64_t vertex_count, std::span<const int> face_levels);
std::uint64_t gaussian_count(std::uint64_t vertex_count, std::uint64_t face_count, int level);

/// One splat per vertex and one per face center. Vertex splats keep their
/// position fixed during level-0 training. Degenerate faces are skipped with
/// a warning.
AvatarHierarchy initialize_level0(const Mesh& mesh);

/// Refine each selected root one level: every current anchor face spawns
/// three children around its trained center splat, and four new splats are
/// seeded (the three children plus the anchor face itself). Every existing
/// splat of a selected root becomes frozen. Throws HierarchyError when a
/// root is invalid, inactive or its current level has not been trained.
void subdivide(AvatarHierarchy& h, std::span<const std::uint32_t> selected_roots);

/// Mark every root currently at `level` as trained at that level.
void mark_level_optimized(AvatarHierarchy& h, int level);

/// Trains one freshly created level of the hierarchy (see enhance()).
using LevelRefiner = std::function<void(AvatarHierarchy&, int level)>;

/// Subdivide the selected roots until they reach `target_level`. Between
/// consecutive subdivisions `refine` is called for the level just created;
/// without a refiner, intermediate levels are subdivided from their
/// initialization. Unselected roots are untouched.
void enhance(AvatarHierarchy& h, std::span<const std::uint32_t> selected_roots, int target_level,
             const LevelRefiner& refine = {});

/// Every root face index, for refining the whole avatar.
std::vector<std::uint32_t> all_roots(const AvatarHierarchy& h);

/// Embedded splat parameters viewed as PLY records (local-frame values).
std::vector<GaussianParams> embedded_params(const AvatarHierarchy& h);

/// Writes <prefix>.ply (local-frame parameters) and <prefix>.json (tree,
/// flags and a path to the rest mesh relative to the JSON file).
void save_avatar(const std::filesystem::path& prefix, const AvatarHierarchy& h);
AvatarHierarchy load_avatar(const std::filesystem::path& prefix);

}  // namespace lodsplat
