#pragma once

// STL (binary and ASCII) and OBJ reading/writing. Meshes are welded on load
// (exactly coincident STL vertices become one index) and cleaned of
// degenerate triangles.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ventronav/mesh.hpp"

namespace ventronav {

struct MeshLoadOptions {
  double scale = 1.0;  ///< multiply coordinates (files are assumed to be in mm)
  bool quiet = true;   ///< suppress the degenerate-triangle log line
};

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

/// Cursor over text input that tracks the byte offset for error messages.
class TextCursor {
 public:
  explicit TextCursor(std::string_view text) : text_(text) {}

  std::size_t offset() const { return pos_; }
  bool at_end() {
    skip_space();
    return pos_ >= text_.size();
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string_view token() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  void expect(std::string_view word) {
    const std::size_t at = (skip_space(), pos_);
    const auto tok = token();
    if (tok != word) {
      throw ParseError(at, "expected '" + std::string(word) + "', found '" + std::string(tok) + "'");
    }
  }

  double number() {
    skip_space();
    const std::size_t at = pos_;
    const auto tok = token();
    double value = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      throw ParseError(at, tok.empty() ? "unexpected end of input" : "bad number '" + std::string(tok) + "'");
    }
    return value;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

/// Builds an indexed mesh from a triangle soup, merging identical vertices.
class Welder {
 public:
  std::uint32_t add(const Point3& p) {
    const std::array<double, 3> key{p.x(), p.y(), p.z()};
    auto [it, inserted] = index_.try_emplace(key, static_cast<std::uint32_t>(vertices_.size()));
    if (inserted) vertices_.push_back(p);
    return it->second;
  }
  std::vector<Point3> take_vertices() { return std::move(vertices_); }

 private:
  std::map<std::array<double, 3>, std::uint32_t> index_;
  std::vector<Point3> vertices_;
};

inline TriangleMesh finish(std::vector<Point3> vertices, std::vector<Triangle> triangles, const MeshLoadOptions& opt,
                           const std::string& name) {
  if (opt.scale != 1.0) {
    if (!(opt.scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "unit scale must be positive");
    for (auto& v : vertices) v *= opt.scale;
  }
  MeshCleanReport report;
  TriangleMesh mesh(std::move(vertices), std::move(triangles), &report);
  if (report.degenerate_dropped > 0 && !opt.quiet) {
    std::clog << "ventronav: dropped " << report.degenerate_dropped << " degenerate triangles from " << name << '\n';
  }
  if (mesh.empty()) throw Error(ErrorCode::EmptyMesh, name + " contains no usable triangles");
  return mesh;
}

inline float read_f32(const char* p) {
  float f;
  std::memcpy(&f, p, 4);
  return f;
}

inline TriangleMesh parse_stl_binary(std::string_view data, const MeshLoadOptions& opt, const std::string& name) {
  std::uint32_t count = 0;
  std::memcpy(&count, data.data() + 80, 4);
  Welder welder;
  std::vector<Triangle> tris;
  tris.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const char* rec = data.data() + 84 + 50 * static_cast<std::size_t>(i);
    Triangle tri{};
    for (int k = 0; k < 3; ++k) {
      const char* v = rec + 12 + 12 * k;
      tri[k] = welder.add(Point3(read_f32(v), read_f32(v + 4), read_f32(v + 8)));
    }
    tris.push_back(tri);
  }
  return finish(welder.take_vertices(), std::move(tris), opt, name);
}

inline TriangleMesh parse_stl_ascii(std::string_view text, const MeshLoadOptions& opt, const std::string& name) {
  TextCursor cur(text);
  cur.expect("solid");
  // Solid name runs to the end of the line.
  std::size_t eol = text.find('\n', cur.offset());
  TextCursor body(text);
  while (body.offset() < (eol == std::string_view::npos ? text.size() : eol)) body.token();
  Welder welder;
  std::vector<Triangle> tris;
  while (true) {
    const std::size_t at = (body.skip_space(), body.offset());
    const auto tok = body.token();
    if (tok == "endsolid") break;
    if (tok.empty()) throw ParseError(at, "unexpected end of input (missing endsolid)");
    if (tok != "facet") throw ParseError(at, "expected 'facet', found '" + std::string(tok) + "'");
    body.expect("normal");
    body.number();
    body.number();
    body.number();
    body.expect("outer");
    body.expect("loop");
    Triangle tri{};
    for (int k = 0; k < 3; ++k) {
      body.expect("vertex");
      const double x = body.number();
      const double y = body.number();
      const double z = body.number();
      tri[k] = welder.add(Point3(x, y, z));
    }
    body.expect("endloop");
    body.expect("endfacet");
    tris.push_back(tri);
  }
  return finish(welder.take_vertices(), std::move(tris), opt, name);
}

inline TriangleMesh parse_stl(std::string_view data, const MeshLoadOptions& opt, const std::string& name) {
  if (data.size() >= 84) {
    std::uint32_t count = 0;
    std::memcpy(&count, data.data() + 80, 4);
    if (84 + 50 * static_cast<std::uint64_t>(count) == data.size()) return parse_stl_binary(data, opt, name);
  }
  std::size_t first = 0;
  while (first < data.size() && std::isspace(static_cast<unsigned char>(data[first]))) ++first;
  if (data.substr(first, 5) == "solid") return parse_stl_ascii(data, opt, name);
  if (data.size() < 84) throw ParseError(data.size(), "truncated binary STL header");
  std::uint32_t count = 0;
  std::memcpy(&count, data.data() + 80, 4);
  throw ParseError(data.size(), "binary STL declares " + std::to_string(count) + " triangles (" +
                                    std::to_string(84 + 50 * static_cast<std::uint64_t>(count)) + " bytes)");
}

inline TriangleMesh parse_obj(std::string_view text, const MeshLoadOptions& opt, const std::string& name) {
  std::vector<Point3> vertices;
  std::vector<Triangle> tris;
  std::size_t line_start = 0;
  while (line_start < text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();
    const std::string_view line = text.substr(line_start, line_end - line_start);
    TextCursor cur(line);
    const auto tag = cur.token();
    auto fail = [](std::size_t local, const std::string& msg) { return ParseError(local, msg); };
    try {
      if (tag == "v") {
        const double x = cur.number();
        const double y = cur.number();
        const double z = cur.number();
        vertices.emplace_back(x, y, z);
      } else if (tag == "f") {
        std::vector<std::uint32_t> poly;
        while (!cur.at_end()) {
          const std::size_t at = cur.offset();
          const auto tok = cur.token();
          const auto idx_str = tok.substr(0, tok.find('/'));
          long long idx = 0;
          const auto res = std::from_chars(idx_str.data(), idx_str.data() + idx_str.size(), idx);
          if (res.ec != std::errc() || idx == 0) throw fail(at, "bad face index '" + std::string(tok) + "'");
          const long long resolved = idx > 0 ? idx - 1 : static_cast<long long>(vertices.size()) + idx;
          if (resolved < 0 || resolved >= static_cast<long long>(vertices.size())) {
            throw fail(at, "face index out of range");
          }
          poly.push_back(static_cast<std::uint32_t>(resolved));
        }
        if (poly.size() < 3) throw fail(cur.offset(), "face needs at least 3 vertices");
        for (std::size_t k = 1; k + 1 < poly.size(); ++k) tris.push_back({poly[0], poly[k], poly[k + 1]});
      }
      // Normals, texture coordinates, groups, materials and comments are ignored.
    } catch (const ParseError& e) {
      // Cursor offsets are relative to the line.
      throw ParseError(line_start + e.offset(), e.detail());
    }
    line_start = line_end + 1;
  }
  return finish(std::move(vertices), std::move(tris), opt, name);
}

inline std::string lower_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline TriangleMesh load_mesh(const std::filesystem::path& path, const MeshLoadOptions& opt = {}) {
  const std::string data = detail::read_file(path);
  const std::string ext = detail::lower_extension(path);
  if (ext == ".stl") return detail::parse_stl(data, opt, path.string());
  if (ext == ".obj") return detail::parse_obj(data, opt, path.string());
  throw Error(ErrorCode::InvalidArgument, "unsupported mesh format '" + ext + "' (expected .stl or .obj)");
}

/// OBJ text with round-trip precision: load(save(m)) reproduces m exactly.
inline std::string to_obj(const TriangleMesh& mesh) {
  std::string out = "# ventronav mesh, units mm\n";
  for (const auto& v : mesh.vertices()) {
    out += "v " + detail::format_double(v.x()) + ' ' + detail::format_double(v.y()) + ' ' +
           detail::format_double(v.z()) + '\n';
  }
  for (const auto& t : mesh.triangles()) {
    out += "f " + std::to_string(t[0] + 1) + ' ' + std::to_string(t[1] + 1) + ' ' + std::to_string(t[2] + 1) + '\n';
  }
  return out;
}

inline std::string to_stl_binary(const TriangleMesh& mesh) {
  std::string out(84 + 50 * mesh.triangles().size(), '\0');
  const char header[] = "ventronav binary STL, units mm";
  std::memcpy(out.data(), header, sizeof header - 1);
  const auto count = static_cast<std::uint32_t>(mesh.triangles().size());
  std::memcpy(out.data() + 80, &count, 4);
  for (std::size_t i = 0; i < mesh.triangles().size(); ++i) {
    char* rec = out.data() + 84 + 50 * i;
    const Point3 a = mesh.vertex(i, 0), b = mesh.vertex(i, 1), c = mesh.vertex(i, 2);
    const Vector3 n = (b - a).cross(c - a).normalized();
    const std::array<Vector3, 4> vs = {n, a, b, c};
    for (int k = 0; k < 4; ++k) {
      for (int j = 0; j < 3; ++j) {
        const auto f = static_cast<float>(vs[k][j]);
        std::memcpy(rec + 12 * k + 4 * j, &f, 4);
      }
    }
  }
  return out;
}

inline std::string to_stl_ascii(const TriangleMesh& mesh) {
  std::string out = "solid ventronav\n";
  for (std::size_t i = 0; i < mesh.triangles().size(); ++i) {
    const Point3 a = mesh.vertex(i, 0), b = mesh.vertex(i, 1), c = mesh.vertex(i, 2);
    const Vector3 n = (b - a).cross(c - a).normalized();
    out += "  facet normal " + detail::format_double(n.x()) + ' ' + detail::format_double(n.y()) + ' ' +
           detail::format_double(n.z()) + "\n    outer loop\n";
    for (const auto& v : {a, b, c}) {
      out += "      vertex " + detail::format_double(v.x()) + ' ' + detail::format_double(v.y()) + ' ' +
             detail::format_double(v.z()) + '\n';
    }
    out += "    endloop\n  endfacet\n";
  }
  out += "endsolid ventronav\n";
  return out;
}

enum class MeshFormat { Obj, StlBinary, StlAscii };

inline void save_mesh(const TriangleMesh& mesh, const std::filesystem::path& path,
                      MeshFormat format = MeshFormat::Obj) {
  switch (format) {
    case MeshFormat::Obj: detail::write_file(path, to_obj(mesh)); break;
    case MeshFormat::StlBinary: detail::write_file(path, to_stl_binary(mesh)); break;
    case MeshFormat::StlAscii: detail::write_file(path, to_stl_ascii(mesh)); break;
  }
}

}  // namespace ventronav
