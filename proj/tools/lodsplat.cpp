#include "lodsplat/bench.hpp"
#include "lodsplat/driver.hpp"
#include "lodsplat/hierarchy.hpp"
#include "lodsplat/mask.hpp"
#include "lodsplat/metrics.hpp"
#include "lodsplat/optimizer.hpp"
#include "lodsplat/parallel.hpp"
#include "lodsplat/ply.hpp"
#include "lodsplat/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace lodsplat;

namespace {

struct PrepareArgs {
  std::string mesh, texture, anim, out, synthetic;
  int subdivisions = 2;
  double synthetic_radius = 0.7;
  int wobble_frames = 0;
  int keyframes = 0;
  int cameras = 42;
  int resolution = 1080;
  double radius = 2.0;
  double fov_deg = 60.0;
};

struct EmbedArgs {
  std::string mesh, texture, from, out;
  bool subdivide = false;
};

struct TrainArgs {
  std::string avatar, data, out, log;
  int stage = -1;
  int iterations = 3000;
  std::size_t probe = 0;
};

struct EnhanceArgs {
  std::string avatar, data, out;
  std::vector<std::string> masks, cameras;
  int target_level = 2;
  std::size_t keyframe = 0;
  int iterations = 0;
};

struct DriveArgs {
  std::string avatar, anim, cameras, camera, out;
  int resolution = 512;
  bool ply = false;
};

struct RenderArgs {
  std::string avatar, keyframe, cameras, camera, out;
  int resolution = 512;
};

struct MetricsArgs {
  std::string a, b, avatar, data, csv;
};

struct BenchArgs {
  std::vector<std::string> avatars;
  std::string anim, csv, json, mode = "both", frame_dir;
  std::vector<int> multiplicity{1};
  int frames = 300;
  int resolution = 1080;
};

struct ExportArgs {
  std::string avatar, keyframe, out;
};

std::uint64_t g_seed = 0;

double deg(double d) { return d * std::numbers::pi / 180.0; }

std::vector<std::size_t> spread_indices(std::size_t available, int wanted) {
  std::vector<std::size_t> idx;
  if (wanted <= 0 || static_cast<std::size_t>(wanted) >= available) {
    for (std::size_t i = 0; i < available; ++i) idx.push_back(i);
    return idx;
  }
  for (int i = 0; i < wanted; ++i) idx.push_back(static_cast<std::size_t>(i) * available / wanted);
  return idx;
}

CameraView pick_camera(const std::string& cameras_json, const std::string& id, int resolution) {
  if (cameras_json.empty()) {
    return look_at(Vec3(0, 0, 2.0), Vec3::Zero(), Vec3::UnitY(), kDefaultFov, resolution, resolution);
  }
  for (auto& c : load_cameras(cameras_json)) {
    if (id.empty() || c.id == id) return c;
  }
  throw std::invalid_argument("camera " + id + " not found in " + cameras_json);
}

Mesh keyframe_or_rest(const AvatarHierarchy& h, const std::string& keyframe) {
  if (keyframe.empty()) return h.mesh;
  Mesh k = load_obj(keyframe, std::nullopt);
  require_same_topology(h.mesh, k);
  return h.mesh.with_vertices(std::move(k.vertices));
}

void run_prepare(const PrepareArgs& a) {
  fs::create_directories(a.out);
  Mesh rest;
  if (!a.synthetic.empty()) {
    if (a.synthetic == "icosphere") {
      rest = make_icosphere(a.subdivisions, a.synthetic_radius);
    } else if (a.synthetic == "uvsphere") {
      rest = make_uv_sphere(82, 84, a.synthetic_radius);
    } else if (a.synthetic == "quad") {
      rest = make_quad(a.synthetic_radius * 2);
    } else {
      throw std::invalid_argument("unknown synthetic mesh " + a.synthetic);
    }
    write_png(fs::path(a.out) / "texture.png", *rest.texture);
    rest.texture_path = (fs::absolute(a.out) / "texture.png").string();
    save_obj(fs::path(a.out) / "rest.obj", rest);
    rest.source_path = (fs::absolute(a.out) / "rest.obj").string();
  } else {
    if (a.mesh.empty()) throw std::invalid_argument("prepare needs --mesh or --synthetic");
    rest = a.texture.empty() ? load_obj(a.mesh) : load_obj(a.mesh, fs::path(a.texture));
  }
  Animation anim;
  if (!a.anim.empty()) {
    anim = load_animation(a.anim, rest);
  } else if (a.wobble_frames > 0) {
    anim = make_wobble_animation(rest, a.wobble_frames);
  } else {
    anim.keyframes.push_back(rest.vertices);
    anim.timestamps.push_back(0.0);
  }
  const auto rig = build_camera_rig(a.radius, a.cameras, a.resolution, a.resolution, deg(a.fov_deg));
  const auto idx = spread_indices(anim.size(), a.keyframes);
  generate_dataset(a.out, rest, anim, rig, idx);
  std::cout << "dataset: " << idx.size() << " keyframes x " << rig.cameras.size()
            << " cameras -> " << a.out << '\n';
}

void run_embed(const EmbedArgs& a) {
  AvatarHierarchy h;
  if (!a.from.empty()) {
    h = load_avatar(a.from);
    if (a.subdivide) subdivide(h, all_roots(h));
  } else {
    if (a.mesh.empty()) throw std::invalid_argument("embed needs --mesh or --from");
    if (a.subdivide) throw std::invalid_argument("--subdivide needs --from");
    h = initialize_level0(a.texture.empty() ? load_obj(a.mesh) : load_obj(a.mesh, fs::path(a.texture)));
  }
  save_avatar(a.out, h);
  std::cout << "avatar: " << h.gaussians.size() << " gaussians, level " << h.current_level()
            << " -> " << a.out << '\n';
}

TrainConfig train_config(int iterations, std::size_t probe, const std::string& log) {
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.seed = g_seed;
  cfg.probe_view = probe;
  if (!log.empty()) cfg.log_path = log;
  return cfg;
}

void run_train(const TrainArgs& a) {
  AvatarHierarchy h = load_avatar(a.avatar);
  const TrainingSet data = load_training_set(a.data, h.mesh);
  const int stage = a.stage >= 0 ? a.stage : h.current_level();
  const auto stats = train_stage(h, data, stage, train_config(a.iterations, a.probe, a.log));
  const std::string out = a.out.empty() ? a.avatar : a.out;
  save_avatar(out, h);
  std::cout << std::setprecision(6) << "stage " << stage << ": " << stats.trained_gaussians
            << " gaussians trained, loss " << stats.head_mean() << " -> " << stats.tail_mean()
            << " -> " << out << '\n';
}

void run_enhance(const EnhanceArgs& a) {
  if (a.masks.size() != a.cameras.size() || a.masks.empty()) {
    throw std::invalid_argument("give one --camera per --mask");
  }
  AvatarHierarchy h = load_avatar(a.avatar);
  const fs::path data(a.data);
  const auto cams = load_cameras(data / "cameras.json");
  const TrainingSet set = a.iterations > 0 ? load_training_set(data, h.mesh) : TrainingSet{};
  Mesh keyframe = h.mesh;
  {
    const auto manifest = nlohmann::json::parse(std::ifstream(data / "manifest.json"));
    const auto& frames = manifest.at("keyframes");
    if (a.keyframe >= frames.size()) throw std::invalid_argument("--keyframe out of range");
    Mesh k = load_obj(data / frames[a.keyframe].at("file").get<std::string>(), std::nullopt);
    keyframe = h.mesh.with_vertices(std::move(k.vertices));
  }
  std::vector<std::vector<std::uint32_t>> selections;
  for (std::size_t i = 0; i < a.masks.size(); ++i) {
    const CameraView* cam = nullptr;
    for (const auto& c : cams) {
      if (c.id == a.cameras[i]) cam = &c;
    }
    if (!cam) throw std::invalid_argument("camera " + a.cameras[i] + " not in cameras.json");
    selections.push_back(select_faces(h.mesh, keyframe, load_mask(a.masks[i], *cam)));
  }
  const auto faces = union_faces(selections);
  const std::size_t before = h.gaussians.size();
  LevelRefiner refine;
  if (a.iterations > 0) {
    refine = [&](AvatarHierarchy& hh, int level) {
      train_stage(hh, set, level, train_config(a.iterations, 0, ""));
    };
  }
  enhance(h, faces, a.target_level, refine);
  const std::string out = a.out.empty() ? a.avatar : a.out;
  save_avatar(out, h);
  std::cout << "enhanced " << faces.size() << " faces to level " << a.target_level << ": +"
            << h.gaussians.size() - before << " gaussians -> " << out << '\n';
}

void run_drive(const DriveArgs& a) {
  const AvatarHierarchy h = load_avatar(a.avatar);
  const Animation anim = load_animation(a.anim, h.mesh);
  const CameraView cam = pick_camera(a.cameras, a.camera, a.resolution);
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < anim.size(); ++i) {
    const auto world = pose_avatar(h, std::span<const Vec3>(anim.keyframes[i]));
    char name[32];
    std::snprintf(name, sizeof name, "frame%04zu", i);
    write_png(fs::path(a.out) / (std::string(name) + ".png"), render(world, cam));
    if (a.ply) export_ply(fs::path(a.out) / (std::string(name) + ".ply"), world);
  }
  std::cout << "drove " << anim.size() << " keyframes -> " << a.out << '\n';
}

void run_render(const RenderArgs& a) {
  const AvatarHierarchy h = load_avatar(a.avatar);
  const CameraView cam = pick_camera(a.cameras, a.camera, a.resolution);
  write_png(a.out, render(pose_avatar(h, keyframe_or_rest(h, a.keyframe)), cam));
  std::cout << "rendered " << h.gaussians.size() << " gaussians -> " << a.out << '\n';
}

void run_metrics(const MetricsArgs& a) {
  struct Row {
    std::string name;
    double psnr, ssim;
  };
  std::vector<Row> rows;
  if (!a.avatar.empty()) {
    const AvatarHierarchy h = load_avatar(a.avatar);
    const TrainingSet set = load_training_set(a.data, h.mesh);
    for (const auto& frame : set) {
      const auto world = pose_avatar(h, std::span<const Vec3>(frame.vertices));
      for (std::size_t c = 0; c < frame.views.size(); ++c) {
        const Image img = render(world, frame.views[c]);
        rows.push_back({image_name(frame.index, c), psnr(img, *frame.views[c].target),
                        ssim(img, *frame.views[c].target)});
      }
    }
  } else {
    if (a.a.empty() || a.b.empty()) throw std::invalid_argument("metrics needs --a/--b or --avatar/--data");
    const Image ia = read_png(a.a), ib = read_png(a.b);
    rows.push_back({fs::path(a.a).filename().string(), psnr(ia, ib), ssim(ia, ib)});
  }
  double mp = 0, ms = 0;
  for (const auto& r : rows) {
    mp += r.psnr;
    ms += r.ssim;
  }
  mp /= rows.size();
  ms /= rows.size();
  std::cout << std::setprecision(6) << "PSNR: " << mp << "\nSSIM: " << ms
            << "\nLPIPS: not supported\n";
  if (!a.csv.empty()) {
    std::ofstream out(a.csv);
    if (!out) throw IoError("cannot write " + a.csv);
    out << "image,psnr,ssim,lpips\n" << std::setprecision(10);
    for (const auto& r : rows) out << r.name << ',' << r.psnr << ',' << r.ssim << ",not supported\n";
  }
}

void run_bench(const BenchArgs& a) {
  std::vector<AvatarHierarchy> loaded;
  for (const auto& p : a.avatars) loaded.push_back(load_avatar(p));
  std::vector<BenchAvatar> avatars;
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    avatars.push_back({fs::path(a.avatars[i]).filename().string(), &loaded[i]});
  }
  Animation anim;
  if (!a.anim.empty()) {
    anim = load_animation(a.anim, loaded.front().mesh);
  } else {
    anim = make_wobble_animation(loaded.front().mesh, 30);
  }
  if (a.mode != "static" && a.mode != "dynamic" && a.mode != "both") {
    throw std::invalid_argument("--mode must be static, dynamic or both");
  }
  BenchReport report;
  for (int m : a.multiplicity) {
    BenchOptions o;
    o.frames = a.frames;
    o.width = o.height = a.resolution;
    o.dynamic = a.mode == "dynamic";
    // Both modes render each frame back to back so they share conditions.
    o.paired = a.mode == "both";
    o.animation = &anim;
    o.multiplicity = m;
    if (!a.frame_dir.empty()) o.frame_dir = a.frame_dir;
    for (auto& row : bench(avatars, o).rows) {
      std::cout << std::setprecision(4) << row.avatar << " n=" << row.gaussian_count << ' '
                << (row.dynamic ? "dynamic" : "static") << " x" << row.multiplicity << ": "
                << row.mean_frame_ms << " ms/frame\n";
      report.rows.push_back(row);
    }
  }
  if (!a.csv.empty()) report.write_csv(a.csv);
  if (!a.json.empty()) report.write_json(a.json);
}

void run_export(const ExportArgs& a) {
  const AvatarHierarchy h = load_avatar(a.avatar);
  const auto world = pose_avatar(h, keyframe_or_rest(h, a.keyframe));
  export_ply(a.out, world);
  std::cout << "exported " << world.size() << " gaussians -> " << a.out << '\n';
}

int report_error(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Level-of-detail Gaussian splat avatars"};
  app.require_subcommand(1);
  app.add_option("--seed", g_seed, "Seed for every random choice");
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (overrides LODSPLAT_THREADS)");

  PrepareArgs prep;
  auto* p = app.add_subcommand("prepare", "Render a multi-view training dataset");
  p->add_option("--mesh", prep.mesh, "Rest mesh OBJ")->check(CLI::ExistingFile);
  p->add_option("--texture", prep.texture, "Texture PNG (overrides the OBJ material)")->check(CLI::ExistingFile);
  p->add_option("--synthetic", prep.synthetic, "icosphere, uvsphere or quad instead of --mesh");
  p->add_option("--subdivisions", prep.subdivisions, "Icosphere subdivisions");
  p->add_option("--size", prep.synthetic_radius, "Synthetic mesh radius (m)");
  p->add_option("--anim", prep.anim, "Animation directory")->check(CLI::ExistingDirectory);
  p->add_option("--wobble", prep.wobble_frames, "Synthesize an animation with this many keyframes");
  p->add_option("--out", prep.out, "Output directory")->required();
  p->add_option("--keyframes", prep.keyframes, "Evenly spaced keyframes to use (0 = all)");
  p->add_option("--cameras", prep.cameras, "Camera count");
  p->add_option("--resolution", prep.resolution, "Image side (px)");
  p->add_option("--radius", prep.radius, "Rig radius (m)");
  p->add_option("--fov", prep.fov_deg, "Vertical field of view (degrees)");

  EmbedArgs emb;
  auto* e = app.add_subcommand("embed", "Create a level-0 avatar or subdivide a trained one");
  e->add_option("--mesh", emb.mesh, "Rest mesh OBJ")->check(CLI::ExistingFile);
  e->add_option("--texture", emb.texture, "Texture PNG")->check(CLI::ExistingFile);
  e->add_option("--from", emb.from, "Existing avatar prefix");
  e->add_flag("--subdivide", emb.subdivide, "Add one level to every face");
  e->add_option("--out", emb.out, "Output avatar prefix")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Optimize one level of an avatar");
  t->add_option("--avatar", tr.avatar, "Avatar prefix")->required();
  t->add_option("--data", tr.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  t->add_option("--stage", tr.stage, "Level to train (default: current level)");
  t->add_option("--iterations", tr.iterations, "Iterations");
  t->add_option("--probe", tr.probe, "Flattened view index for the PSNR log column");
  t->add_option("--log", tr.log, "CSV training log");
  t->add_option("--out", tr.out, "Output avatar prefix (default: overwrite)");

  EnhanceArgs en;
  auto* n = app.add_subcommand("enhance", "Refine the faces inside image masks");
  n->add_option("--avatar", en.avatar, "Avatar prefix")->required();
  n->add_option("--data", en.data, "Dataset directory with cameras.json")->required()->check(CLI::ExistingDirectory);
  n->add_option("--mask", en.masks, "Mask PNG (repeatable)")->required();
  n->add_option("--camera", en.cameras, "Camera id per mask")->required();
  n->add_option("--keyframe", en.keyframe, "Dataset keyframe the masks were drawn on");
  n->add_option("--target-level", en.target_level, "Level to reach")->required();
  n->add_option("--iterations", en.iterations, "Train intermediate levels for this many iterations");
  n->add_option("--out", en.out, "Output avatar prefix (default: overwrite)");

  DriveArgs dr;
  auto* d = app.add_subcommand("drive", "Render an avatar over an animation");
  d->add_option("--avatar", dr.avatar, "Avatar prefix")->required();
  d->add_option("--anim", dr.anim, "Animation directory")->required()->check(CLI::ExistingDirectory);
  d->add_option("--cameras", dr.cameras, "cameras.json (default: frontal camera)");
  d->add_option("--camera", dr.camera, "Camera id");
  d->add_option("--resolution", dr.resolution, "Image side for the default camera");
  d->add_flag("--ply", dr.ply, "Also write posed splats per keyframe");
  d->add_option("--out", dr.out, "Output directory")->required();

  RenderArgs re;
  auto* r = app.add_subcommand("render", "Render one view of an avatar");
  r->add_option("--avatar", re.avatar, "Avatar prefix")->required();
  r->add_option("--keyframe", re.keyframe, "Keyframe OBJ (default: rest pose)");
  r->add_option("--cameras", re.cameras, "cameras.json (default: frontal camera)");
  r->add_option("--camera", re.camera, "Camera id");
  r->add_option("--resolution", re.resolution, "Image side for the default camera");
  r->add_option("--out", re.out, "Output PNG")->required();

  MetricsArgs me;
  auto* m = app.add_subcommand("metrics", "PSNR and SSIM of images or of an avatar on a dataset");
  m->add_option("--a", me.a, "First image");
  m->add_option("--b", me.b, "Second image");
  m->add_option("--avatar", me.avatar, "Avatar prefix");
  m->add_option("--data", me.data, "Dataset directory");
  m->add_option("--csv", me.csv, "Per-image CSV");

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "Frame-time benchmark over an orbit");
  b->add_option("--avatar", be.avatars, "Avatar prefix (repeatable)")->required();
  b->add_option("--anim", be.anim, "Animation for dynamic mode (default: synthetic wobble)");
  b->add_option("--frames", be.frames, "Orbit frames");
  b->add_option("--resolution", be.resolution, "Image side");
  b->add_option("--mode", be.mode, "static, dynamic or both");
  b->add_option("--multiplicity", be.multiplicity, "Avatar copies (repeatable, 1..3)");
  b->add_option("--frame-dir", be.frame_dir, "Write rendered frames here");
  b->add_option("--csv", be.csv, "CSV report");
  b->add_option("--json", be.json, "JSON report");

  ExportArgs ex;
  auto* x = app.add_subcommand("export", "Write world-space splats as PLY");
  x->add_option("--avatar", ex.avatar, "Avatar prefix")->required();
  x->add_option("--keyframe", ex.keyframe, "Keyframe OBJ (default: rest pose)");
  x->add_option("--out", ex.out, "Output PLY")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }
  if (threads > 0) set_worker_threads(threads);

  try {
    if (*p) run_prepare(prep);
    else if (*e) run_embed(emb);
    else if (*t) run_train(tr);
    else if (*n) run_enhance(en);
    else if (*d) run_drive(dr);
    else if (*r) run_render(re);
    else if (*m) run_metrics(me);
    else if (*b) run_bench(be);
    else if (*x) run_export(ex);
  } catch (const IoError& err) {
    return report_error("io", err.what());
  } catch (const FormatError& err) {
    return report_error("format", err.what());
  } catch (const GeometryError& err) {
    return report_error("geometry", err.what());
  } catch (const HierarchyError& err) {
    return report_error("hierarchy", err.what());
  } catch (const std::invalid_argument& err) {
    return report_error("argument", err.what());
  } catch (const std::exception& err) {
    return report_error("internal", err.what());
  }
  return 0;
}
