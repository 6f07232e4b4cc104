#include "lodsplat/ply.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace lodsplat {

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

namespace {

constexpr int kRestPerChannel = kShBasisCount - 1;
constexpr int kPropertyCount = 3 + 3 + 3 + 3 * kRestPerChannel + 1 + 3 + 4;

std::vector<std::string> property_names() {
  std::vector<std::string> names = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
  for (int i = 0; i < 3 * kRestPerChannel; ++i) names.push_back("f_rest_" + std::to_string(i));
  names.push_back("opacity");
  for (int i = 0; i < 3; ++i) names.push_back("scale_" + std::to_string(i));
  for (int i = 0; i < 4; ++i) names.push_back("rot_" + std::to_string(i));
  return names;
}

void pack(const GaussianParams& g, float* out) {
  int o = 0;
  for (int i = 0; i < 3; ++i) out[o++] = static_cast<float>(g.position[i]);
  for (int i = 0; i < 3; ++i) out[o++] = 0.0f;
  for (int c = 0; c < 3; ++c) out[o++] = static_cast<float>(g.sh[c]);
  for (int c = 0; c < 3; ++c) {
    for (int k = 1; k < kShBasisCount; ++k) out[o++] = static_cast<float>(g.sh[3 * k + c]);
  }
  out[o++] = static_cast<float>(g.opacity_logit);
  for (int i = 0; i < 3; ++i) out[o++] = static_cast<float>(g.log_scale[i]);
  for (int i = 0; i < 4; ++i) out[o++] = static_cast<float>(g.rotation[i]);
}

void unpack(const float* in, GaussianParams& g) {
  int o = 0;
  for (int i = 0; i < 3; ++i) g.position[i] = in[o++];
  o += 3;
  for (int c = 0; c < 3; ++c) g.sh[c] = in[o++];
  for (int c = 0; c < 3; ++c) {
    for (int k = 1; k < kShBasisCount; ++k) g.sh[3 * k + c] = in[o++];
  }
  g.opacity_logit = in[o++];
  for (int i = 0; i < 3; ++i) g.log_scale[i] = in[o++];
  for (int i = 0; i < 4; ++i) g.rotation[i] = in[o++];
}

std::size_t type_size(const std::string& type) {
  static const std::map<std::string, std::size_t> sizes = {
      {"char", 1},  {"uchar", 1},  {"int8", 1},   {"uint8", 1},  {"short", 2},
      {"ushort", 2}, {"int16", 2}, {"uint16", 2}, {"int", 4},    {"uint", 4},
      {"int32", 4}, {"uint32", 4}, {"float", 4},  {"float32", 4}, {"double", 8},
      {"float64", 8}};
  auto it = sizes.find(type);
  if (it == sizes.end()) throw FormatError("unknown PLY property type '" + type + "'");
  return it->second;
}

}  // namespace

void export_ply(const std::filesystem::path& path, const std::vector<GaussianParams>& gaussians) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << gaussians.size() << '\n';
  for (const auto& name : property_names()) out << "property float " << name << '\n';
  out << "end_header\n";
  std::vector<float> row(kPropertyCount);
  for (const auto& g : gaussians) {
    pack(g, row.data());
    out.write(reinterpret_cast<const char*>(row.data()), sizeof(float) * row.size());
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<GaussianParams> import_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw FormatError("missing 'ply' magic");

  struct Property {
    std::string name;
    std::string type;
    std::size_t offset;
  };
  std::vector<Property> props;
  std::size_t count = 0, stride = 0;
  bool have_format = false, in_vertex = false, have_vertex = false;
  while (true) {
    if (!std::getline(in, line)) throw FormatError("unterminated PLY header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "end_header") break;
    if (key == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt != "binary_little_endian") throw FormatError("unsupported PLY format '" + fmt + "'");
      have_format = true;
    } else if (key == "element") {
      std::string name;
      ls >> name;
      if (have_vertex && in_vertex) {
        throw FormatError("elements after 'vertex' are not supported");
      }
      in_vertex = name == "vertex";
      if (!in_vertex) throw FormatError("unexpected element '" + name + "' before vertex");
      if (!(ls >> count)) throw FormatError("bad element count");
      have_vertex = true;
    } else if (key == "property") {
      if (!in_vertex) throw FormatError("property outside the vertex element");
      std::string type, name;
      ls >> type;
      if (type == "list") throw FormatError("list properties are not supported");
      ls >> name;
      props.push_back({name, type, stride});
      stride += type_size(type);
    } else if (key == "comment" || key == "obj_info" || key.empty()) {
      continue;
    } else {
      throw FormatError("unexpected header line '" + line + "'");
    }
  }
  if (!have_format) throw FormatError("missing format line");
  if (!have_vertex) throw FormatError("missing vertex element");

  std::vector<std::size_t> offsets;
  for (const auto& want : property_names()) {
    bool found = false;
    for (const auto& p : props) {
      if (p.name == want) {
        if (p.type != "float" && p.type != "float32") {
          throw FormatError("property '" + want + "' must be float");
        }
        offsets.push_back(p.offset);
        found = true;
        break;
      }
    }
    if (!found) throw FormatError("missing property '" + want + "'");
  }

  std::vector<GaussianParams> gaussians(count);
  std::vector<char> row(stride);
  std::vector<float> values(kPropertyCount);
  for (std::size_t i = 0; i < count; ++i) {
    if (!in.read(row.data(), static_cast<std::streamsize>(stride))) {
      throw FormatError("truncated PLY body");
    }
    for (int p = 0; p < kPropertyCount; ++p) {
      std::memcpy(&values[p], row.data() + offsets[p], sizeof(float));
    }
    unpack(values.data(), gaussians[i]);
  }
  return gaussians;
}

}  // namespace lodsplat
