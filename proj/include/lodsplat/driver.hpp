#pragma once

#include "lodsplat/camera.hpp"
#include "lodsplat/gaussian.hpp"
#include "lodsplat/hierarchy.hpp"
#include "lodsplat/mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace lodsplat {

/// Keyframe vertex arrays sharing the rest mesh topology.
struct Animation {
  std::vector<std::vector<Vec3>> keyframes;
  std::vector<double> timestamps;  // seconds

  std::size_t size() const { return keyframes.size(); }

  /// Throws GeometryError unless every keyframe has `vertex_count` vertices
  /// and timestamps are strictly increasing.
  void validate(std::size_t vertex_count) const;
};

/// Reads <dir>/manifest.json ({"keyframes": [{"file", "timestamp"}, ...]})
/// and the referenced OBJ files. Topology is checked against `rest`.
Animation load_animation(const std::filesystem::path& dir, const Mesh& rest);

/// Writes one OBJ per keyframe (rest uvs and faces) plus manifest.json.
void save_animation(const std::filesystem::path& dir, const Mesh& rest, const Animation& anim);

struct CameraRig {
  std::vector<CameraView> cameras;
  double radius = 2.0;
};

inline constexpr double kDefaultFov = std::numbers::pi / 3.0;

/// Cameras on a sphere around the origin, all looking at it. 42 cameras use
/// the vertices of a once-subdivided icosahedron; other counts use a
/// Fibonacci spiral. Ids are cam00, cam01, ...
CameraRig build_camera_rig(double radius = 2.0, int count = 42, int width = 1080,
                           int height = 1080, double vertical_fov_rad = kDefaultFov);

/// Root face frames and area scale factors of one pose.
struct PoseFrames {
  std::vector<FaceFrame> frames;
  std::vector<double> scales;
};

/// Frames on a deformed copy of the rest mesh. A root face that collapses in
/// this pose keeps its rest orientation at the posed centroid with k = 0.
PoseFrames pose_frames(const AvatarHierarchy& h, std::span<const Vec3> keyframe);

/// World-space splats for a pose, in Gaussian id order.
std::vector<GaussianParams> pose_avatar(const AvatarHierarchy& h, const PoseFrames& pose);
std::vector<GaussianParams> pose_avatar(const AvatarHierarchy& h, std::span<const Vec3> keyframe);
std::vector<GaussianParams> pose_avatar(const AvatarHierarchy& h, const Mesh& keyframe);

/// Unlit textured rasterization with a z-buffer, perspective-correct uvs and
/// bilinear sampling on a white background. Each pixel averages an n x n
/// grid of samples (n = `samples_per_axis`), like a sensor integrating over
/// the pixel area; n = 1 samples pixel centers only. Throws GeometryError
/// when the mesh has faces but no texture or uvs.
Image render_mesh(const Mesh& mesh, const CameraView& cam, int samples_per_axis = 4);

/// Multi-view images of selected keyframes.
/// Layout: frame{i:04}_cam{j:02}.png, cameras.json, manifest.json and the
/// keyframe meshes under keyframes/. `i` is the keyframe's index in `anim`.
void generate_dataset(const std::filesystem::path& out, const Mesh& rest, const Animation& anim,
                      const CameraRig& rig, std::span<const std::size_t> keyframe_indices);

std::string image_name(std::size_t keyframe, std::size_t camera);

void save_cameras(const std::filesystem::path& path, std::span<const CameraView> cameras);
/// Cameras without targets.
std::vector<CameraView> load_cameras(const std::filesystem::path& path);

/// One keyframe of a training set with every camera's target image.
struct TrainingFrame {
  std::size_t index = 0;
  std::vector<Vec3> vertices;
  std::vector<CameraView> views;
};

using TrainingSet = std::vector<TrainingFrame>;

/// Loads a dataset written by generate_dataset. Topology is checked against
/// `rest`; every camera gets its target image.
TrainingSet load_training_set(const std::filesystem::path& dir, const Mesh& rest);

/// Renders the targets in memory, quantized to 8 bits like the PNGs that
/// generate_dataset writes.
TrainingSet make_training_set(const Mesh& rest, const Animation& anim, const CameraRig& rig,
                              std::span<const std::size_t> keyframe_indices);

}  // namespace lodsplat
