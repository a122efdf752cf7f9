#include "surfreg/ply_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "surfreg/error.hpp"

namespace surfreg {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

int to_byte(double c) {
  return static_cast<int>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

struct PlyHeader {
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> props;       // scalar property names
    std::vector<std::string> prop_types;  // their types
    bool has_list = false;
  };
  std::vector<Element> elements;
};

PlyHeader read_header(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
    throw Error(ErrorKind::Format, path.string() + ": missing 'ply' magic");
  }
  PlyHeader h;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw Error(ErrorKind::Format, path.string() + ": only ascii PLY");
    } else if (word == "element") {
      PlyHeader::Element e;
      ls >> e.name >> e.count;
      h.elements.push_back(e);
    } else if (word == "property") {
      if (h.elements.empty()) throw Error(ErrorKind::Format, path.string() + ": stray property");
      std::string type;
      ls >> type;
      if (type == "list") {
        h.elements.back().has_list = true;
      } else {
        std::string name;
        ls >> name;
        h.elements.back().props.push_back(name);
        h.elements.back().prop_types.push_back(type);
      }
    } else if (word == "end_header") {
      return h;
    }
  }
  throw Error(ErrorKind::Format, path.string() + ": missing end_header");
}

int find(const std::vector<std::string>& names, const std::string& key) {
  const auto it = std::find(names.begin(), names.end(), key);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

struct Parsed {
  ColoredPointCloud cloud;
  std::vector<std::array<int, 3>> triangles;
};

Parsed parse(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  const PlyHeader h = read_header(in, path);
  Parsed out;
  for (const auto& e : h.elements) {
    if (e.name == "vertex") {
      const int ix = find(e.props, "x"), iy = find(e.props, "y"), iz = find(e.props, "z");
      if (ix < 0 || iy < 0 || iz < 0) {
        throw Error(ErrorKind::Format, path.string() + ": vertex lacks x/y/z");
      }
      const int inx = find(e.props, "nx"), iny = find(e.props, "ny"), inz = find(e.props, "nz");
      const int ir = find(e.props, "red"), ig = find(e.props, "green"), ib = find(e.props, "blue");
      const bool normals = inx >= 0 && iny >= 0 && inz >= 0;
      const bool colors = ir >= 0 && ig >= 0 && ib >= 0;
      const double color_scale = colors && e.prop_types[ir] == "uchar" ? 1.0 / 255.0 : 1.0;
      std::vector<double> vals(e.props.size());
      for (std::size_t i = 0; i < e.count; ++i) {
        for (auto& v : vals) {
          if (!(in >> v)) throw Error(ErrorKind::Format, path.string() + ": truncated vertex data");
        }
        out.cloud.points.emplace_back(vals[ix], vals[iy], vals[iz]);
        if (normals) out.cloud.normals.push_back(Vec3(vals[inx], vals[iny], vals[inz]).normalized());
        if (colors) {
          out.cloud.colors.emplace_back(vals[ir] * color_scale, vals[ig] * color_scale,
                                        vals[ib] * color_scale);
        }
      }
    } else if (e.name == "face") {
      for (std::size_t i = 0; i < e.count; ++i) {
        int n = 0;
        if (!(in >> n) || n < 3) throw Error(ErrorKind::Format, path.string() + ": bad face");
        std::vector<int> idx(static_cast<std::size_t>(n));
        for (auto& v : idx) {
          if (!(in >> v)) throw Error(ErrorKind::Format, path.string() + ": truncated face");
        }
        for (int k = 1; k + 1 < n; ++k) out.triangles.push_back({idx[0], idx[k], idx[k + 1]});
      }
    } else {
      // Skip unknown elements line by line.
      std::string line;
      in >> std::ws;
      for (std::size_t i = 0; i < e.count; ++i) std::getline(in, line);
    }
  }
  return out;
}

}  // namespace

void write_ply(const std::filesystem::path& path, const ColoredPointCloud& cloud) {
  cloud.validate();
  auto out = open_out(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_normals()) out << "property double nx\nproperty double ny\nproperty double nz\n";
  if (cloud.has_colors()) {
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  }
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    if (cloud.has_normals()) {
      const Vec3& n = cloud.normals[i];
      out << ' ' << n.x() << ' ' << n.y() << ' ' << n.z();
    }
    if (cloud.has_colors()) {
      const Vec3& c = cloud.colors[i];
      out << ' ' << to_byte(c.x()) << ' ' << to_byte(c.y()) << ' ' << to_byte(c.z());
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

ColoredPointCloud read_ply_cloud(const std::filesystem::path& path) {
  return parse(path).cloud;
}

void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh) {
  auto out = open_out(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.triangles.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

TriangleMesh read_ply_mesh(const std::filesystem::path& path) {
  Parsed p = parse(path);
  TriangleMesh mesh;
  mesh.vertices = std::move(p.cloud.points);
  mesh.triangles = std::move(p.triangles);
  mesh.validate();
  return mesh;
}

}  // namespace surfreg
