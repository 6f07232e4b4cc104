#include "lodsplat/ply.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace lodsplat;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "lodsplat_test_ply";
  std::filesystem::create_directories(dir);
  return dir / name;
}

// GCC 11 at -O3 drops the double -> float -> double round trip when the SLP
// vectorizer packs these loops, so the rounding goes through memory.
double to_float(double v) {
  volatile float r = static_cast<float>(v);
  return r;
}

// Rounds every raw field to float so the round trip can be exact.
GaussianParams as_float(GaussianParams g) {
  auto f = [](double v) { return to_float(v); };
  for (int i = 0; i < 3; ++i) {
    g.position[i] = f(g.position[i]);
    g.log_scale[i] = f(g.log_scale[i]);
  }
  for (int i = 0; i < 4; ++i) g.rotation[i] = f(g.rotation[i]);
  for (double& c : g.sh) c = f(c);
  g.opacity_logit = f(g.opacity_logit);
  return g;
}

void write_header(std::ostream& out, const std::vector<std::string>& props, std::size_t count) {
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << count << '\n';
  for (const auto& p : props) out << "property float " << p << '\n';
  out << "end_header\n";
}

std::vector<std::string> standard_props() {
  std::vector<std::string> p = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
  for (int i = 0; i < 45; ++i) p.push_back("f_rest_" + std::to_string(i));
  p.push_back("opacity");
  for (int i = 0; i < 3; ++i) p.push_back("scale_" + std::to_string(i));
  for (int i = 0; i < 4; ++i) p.push_back("rot_" + std::to_string(i));
  return p;
}

}  // namespace

TEST_CASE("PLY round trip is exact for float values") {
  test::Gen gen(1);
  std::vector<GaussianParams> gs;
  for (int i = 0; i < 50; ++i) gs.push_back(as_float(gen.gaussian()));
  const auto path = scratch("round.ply");
  export_ply(path, gs);
  const auto back = import_ply(path);
  REQUIRE(back.size() == gs.size());
  for (std::size_t i = 0; i < gs.size(); ++i) {
    CHECK((back[i].position - gs[i].position).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back[i].rotation == gs[i].rotation);
    CHECK((back[i].log_scale - gs[i].log_scale).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back[i].sh == gs[i].sh);
    CHECK(back[i].opacity_logit == gs[i].opacity_logit);
  }
}

TEST_CASE("PLY single Gaussian and empty list") {
  GaussianParams g;
  g.position = Vec3(1, 2, 3);
  export_ply(scratch("one.ply"), {g});
  const auto one = import_ply(scratch("one.ply"));
  REQUIRE(one.size() == 1);
  CHECK((one[0].position - g.position).cwiseAbs().maxCoeff() == 0.0);
  export_ply(scratch("empty.ply"), {});
  CHECK(import_ply(scratch("empty.ply")).empty());
}

TEST_CASE("PLY layout matches viewer conventions") {
  GaussianParams g;
  for (int k = 0; k < 16; ++k)
    for (int c = 0; c < 3; ++c) g.sh[3 * k + c] = 100 * c + k;
  export_ply(scratch("layout.ply"), {g});
  std::ifstream in(scratch("layout.ply"), std::ios::binary);
  std::string line, header;
  while (std::getline(in, line) && line != "end_header") header += line + "\n";
  CHECK(header.find("property float f_rest_44") != std::string::npos);
  std::vector<float> rec(62);
  in.read(reinterpret_cast<char*>(rec.data()), 62 * sizeof(float));
  CHECK(rec[3] == 0.0f);  // normals
  CHECK(rec[6] == 0.0f);   // f_dc_0 = red DC
  CHECK(rec[7] == 100.0f); // f_dc_1 = green DC
  CHECK(rec[9] == 1.0f);   // f_rest_0 = red basis 1
  CHECK(rec[9 + 15] == 101.0f);  // f_rest_15 = green basis 1
  CHECK(rec[9 + 44] == 215.0f);  // f_rest_44 = blue basis 15
}

TEST_CASE("PLY format errors") {
  {
    std::ofstream out(scratch("noopacity.ply"), std::ios::binary);
    auto props = standard_props();
    props.erase(std::find(props.begin(), props.end(), "opacity"));
    write_header(out, props, 0);
  }
  CHECK_THROWS_AS(import_ply(scratch("noopacity.ply")), FormatError);
  {
    std::ofstream out(scratch("ascii.ply"));
    out << "ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
  }
  CHECK_THROWS_AS(import_ply(scratch("ascii.ply")), FormatError);
  {
    std::ofstream out(scratch("magic.ply"));
    out << "plx\n";
  }
  CHECK_THROWS_AS(import_ply(scratch("magic.ply")), FormatError);
  {
    std::ofstream out(scratch("short.ply"), std::ios::binary);
    write_header(out, standard_props(), 2);
    const float zero = 0;
    for (int i = 0; i < 70; ++i) out.write(reinterpret_cast<const char*>(&zero), 4);
  }
  CHECK_THROWS_AS(import_ply(scratch("short.ply")), FormatError);
  CHECK_THROWS_AS(import_ply(scratch("does_not_exist.ply")), IoError);
}

TEST_CASE("PLY tolerates extra scalar properties") {
  {
    std::ofstream out(scratch("extra.ply"), std::ios::binary);
    auto props = standard_props();
    props.push_back("extra");
    write_header(out, props, 1);
    for (std::size_t i = 0; i < props.size(); ++i) {
      const float v = static_cast<float>(i);
      out.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
  const auto g = import_ply(scratch("extra.ply"));
  REQUIRE(g.size() == 1);
  CHECK(g[0].position == Vec3(0, 1, 2));
  CHECK(g[0].opacity_logit == 54.0);
}
