#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "twinforge/common.hpp"
#include "twinforge/geometry.hpp"

namespace twinforge {

// Formats shortest-round-trip style via ostream max precision; used everywhere
// text output must be byte-stable across runs.
inline std::string format_double(double value) {
  std::ostringstream os;
  os.precision(17);
  os << value;
  return os.str();
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "io-error", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "io-error", "cannot write " + path);
  out << text;
  require(out.good(), "io-error", "write failed for " + path);
}

inline nlohmann::json read_json_file(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& err) {
    fail("parse-error", path + ": " + err.what());
  }
  return doc;
}

inline void write_json_file(const std::string& path, const nlohmann::json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

// --- point cloud: ASCII, "# apc v1 n=<N> labeled=<0|1>" then x y z [label] ---

inline std::string write_apc(const PointCloud& cloud) {
  cloud.check();
  const bool labeled = cloud.labels.has_value();
  std::ostringstream os;
  os << "# apc v1 n=" << cloud.size() << " labeled=" << (labeled ? 1 : 0) << "\n";
  os.precision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points[i];
    os << p.x() << " " << p.y() << " " << p.z();
    if (labeled) os << " " << (*cloud.labels)[i];
    os << "\n";
  }
  return os.str();
}

inline PointCloud parse_apc(const std::string& text) {
  std::istringstream in(text);
  std::string hash, magic, version;
  in >> hash >> magic >> version;
  require(hash == "#" && magic == "apc" && version == "v1", "parse-error",
          "missing '# apc v1' header");
  std::string n_field, labeled_field;
  in >> n_field >> labeled_field;
  require(n_field.rfind("n=", 0) == 0 && labeled_field.rfind("labeled=", 0) == 0, "parse-error",
          "malformed apc header fields");
  const std::size_t n = std::stoull(n_field.substr(2));
  const bool labeled = labeled_field.substr(8) == "1";
  require(n > 0, "parse-error", "apc cloud declares zero points");

  PointCloud cloud;
  cloud.points.resize(n);
  if (labeled) cloud.labels = std::vector<int>(n);
  for (std::size_t i = 0; i < n; ++i) {
    Point3& p = cloud.points[i];
    if (!(in >> p.x() >> p.y() >> p.z())) fail("parse-error", "apc point row truncated");
    if (labeled) {
      int label = 0;
      if (!(in >> label)) fail("parse-error", "apc label missing");
      require(label >= 0, "parse-error", "apc labels must be non-negative");
      (*cloud.labels)[i] = label;
    }
  }
  return cloud;
}

inline void save_point_cloud(const std::string& path, const PointCloud& cloud) {
  write_text_file(path, write_apc(cloud));
}

inline PointCloud load_point_cloud(const std::string& path) {
  return parse_apc(read_text_file(path));
}

// --- depth map: binary PGM (P5), 16-bit big-endian, millimeters, 0 invalid ---

inline void save_depth_pgm(const std::string& path, const DepthMap& depth) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "io-error", "cannot write " + path);
  out << "P5\n" << depth.width << " " << depth.height << "\n65535\n";
  for (double meters : depth.values) {
    double mm = meters * 1000.0;
    if (mm < 0) mm = 0;
    if (mm > 65535) mm = 65535;
    const auto value = static_cast<std::uint16_t>(std::lround(mm));
    const char bytes[2] = {static_cast<char>(value >> 8), static_cast<char>(value & 0xff)};
    out.write(bytes, 2);
  }
  require(out.good(), "io-error", "write failed for " + path);
}

inline DepthMap load_depth_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "io-error", "cannot open " + path);
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  require(magic == "P5", "parse-error", path + ": expected binary PGM (P5)");
  require(width > 0 && height > 0, "parse-error", path + ": bad dimensions");
  require(maxval == 65535, "parse-error", path + ": depth PGM must be 16-bit");
  in.get();  // single whitespace after header
  DepthMap depth = DepthMap::invalid_filled(width, height);
  std::vector<char> raw(static_cast<std::size_t>(width) * height * 2);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  require(in.gcount() == static_cast<std::streamsize>(raw.size()), "parse-error",
          path + ": truncated pixel data");
  for (std::size_t i = 0; i < depth.values.size(); ++i) {
    const auto hi = static_cast<std::uint8_t>(raw[2 * i]);
    const auto lo = static_cast<std::uint8_t>(raw[2 * i + 1]);
    depth.values[i] = static_cast<double>((hi << 8) | lo) / 1000.0;
  }
  return depth;
}

// --- mask: binary PBM (P4), 1 = selected ---

inline void save_mask_pbm(const std::string& path, const Mask& mask) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "io-error", "cannot write " + path);
  out << "P4\n" << mask.width << " " << mask.height << "\n";
  const int row_bytes = (mask.width + 7) / 8;
  for (int v = 0; v < mask.height; ++v) {
    std::vector<char> row(row_bytes, 0);
    for (int u = 0; u < mask.width; ++u)
      if (mask.at(u, v)) row[u / 8] |= static_cast<char>(0x80 >> (u % 8));
    out.write(row.data(), row_bytes);
  }
  require(out.good(), "io-error", "write failed for " + path);
}

inline Mask load_mask_pbm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "io-error", "cannot open " + path);
  std::string magic;
  int width = 0, height = 0;
  in >> magic >> width >> height;
  require(magic == "P4", "parse-error", path + ": expected binary PBM (P4)");
  require(width > 0 && height > 0, "parse-error", path + ": bad dimensions");
  in.get();
  Mask mask = Mask::empty(width, height);
  const int row_bytes = (width + 7) / 8;
  std::vector<char> row(row_bytes);
  for (int v = 0; v < height; ++v) {
    in.read(row.data(), row_bytes);
    require(in.gcount() == row_bytes, "parse-error", path + ": truncated pixel data");
    for (int u = 0; u < width; ++u)
      mask.set(u, v, (row[u / 8] & (0x80 >> (u % 8))) != 0);
  }
  return mask;
}

// --- camera: JSON {fx,fy,cx,cy,width,height,H} with H 16 row-major values ---

struct CameraFile {
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;
};

inline nlohmann::json camera_to_json(const CameraIntrinsics& intr, const CameraExtrinsics& extr) {
  nlohmann::json doc;
  doc["fx"] = intr.fx;
  doc["fy"] = intr.fy;
  doc["cx"] = intr.cx;
  doc["cy"] = intr.cy;
  doc["width"] = intr.width;
  doc["height"] = intr.height;
  std::vector<double> h(16);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) h[static_cast<std::size_t>(4 * r + c)] = extr.matrix(r, c);
  doc["H"] = h;
  return doc;
}

inline CameraFile camera_from_json(const nlohmann::json& doc) {
  CameraFile cam;
  try {
    cam.intrinsics.fx = doc.at("fx").get<double>();
    cam.intrinsics.fy = doc.at("fy").get<double>();
    cam.intrinsics.cx = doc.at("cx").get<double>();
    cam.intrinsics.cy = doc.at("cy").get<double>();
    cam.intrinsics.width = doc.at("width").get<int>();
    cam.intrinsics.height = doc.at("height").get<int>();
    const auto h = doc.at("H").get<std::vector<double>>();
    require(h.size() == 16, "parse-error", "camera H must have 16 entries");
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) cam.extrinsics.matrix(r, c) = h[static_cast<std::size_t>(4 * r + c)];
  } catch (const nlohmann::json::exception& err) {
    fail("parse-error", std::string("camera json: ") + err.what());
  }
  cam.intrinsics.check();
  cam.extrinsics.check();
  return cam;
}

inline CameraFile load_camera(const std::string& path) {
  return camera_from_json(read_json_file(path));
}

inline void save_camera(const std::string& path, const CameraIntrinsics& intr,
                        const CameraExtrinsics& extr) {
  write_json_file(path, camera_to_json(intr, extr));
}

// --- triangle mesh: ASCII OFF ---

struct TriMesh {
  std::vector<Point3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::string name;  // mesh file reference when round-tripping through URDF
};

inline std::string write_off(const TriMesh& mesh) {
  std::ostringstream os;
  os.precision(17);
  os << "OFF\n" << mesh.vertices.size() << " " << mesh.triangles.size() << " 0\n";
  for (const Point3& v : mesh.vertices) os << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (const auto& t : mesh.triangles) os << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  return os.str();
}

inline TriMesh parse_off(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  in >> magic;
  require(magic == "OFF", "parse-error", "expected OFF header");
  std::size_t nv = 0, nf = 0, ne = 0;
  require(static_cast<bool>(in >> nv >> nf >> ne), "parse-error", "OFF counts missing");
  TriMesh mesh;
  mesh.vertices.resize(nv);
  for (auto& v : mesh.vertices)
    require(static_cast<bool>(in >> v.x() >> v.y() >> v.z()), "parse-error", "OFF vertex truncated");
  mesh.triangles.resize(nf);
  for (auto& t : mesh.triangles) {
    int arity = 0;
    require(static_cast<bool>(in >> arity >> t[0] >> t[1] >> t[2]), "parse-error",
            "OFF face truncated");
    require(arity == 3, "parse-error", "only triangle faces are supported");
    for (int idx : t)
      require(idx >= 0 && static_cast<std::size_t>(idx) < nv, "parse-error",
              "OFF face index out of range");
  }
  return mesh;
}

inline void save_mesh(const std::string& path, const TriMesh& mesh) {
  write_text_file(path, write_off(mesh));
}

inline TriMesh load_mesh(const std::string& path) {
  TriMesh mesh = parse_off(read_text_file(path));
  mesh.name = std::filesystem::path(path).filename().string();
  return mesh;
}

}  // namespace twinforge
