#pragma once

#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rgt/pcl/cloud.hpp"

namespace rgt::pcl {

namespace ply_detail {

enum class Scalar { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

inline bool parse_scalar(std::string_view token, Scalar& out) {
  struct Entry {
    std::string_view name;
    Scalar type;
  };
  static constexpr Entry kTable[] = {
      {"char", Scalar::kInt8},     {"int8", Scalar::kInt8},       {"uchar", Scalar::kUInt8},
      {"uint8", Scalar::kUInt8},   {"short", Scalar::kInt16},     {"int16", Scalar::kInt16},
      {"ushort", Scalar::kUInt16}, {"uint16", Scalar::kUInt16},   {"int", Scalar::kInt32},
      {"int32", Scalar::kInt32},   {"uint", Scalar::kUInt32},     {"uint32", Scalar::kUInt32},
      {"float", Scalar::kFloat32}, {"float32", Scalar::kFloat32}, {"double", Scalar::kFloat64},
      {"float64", Scalar::kFloat64},
  };
  for (const Entry& e : kTable) {
    if (e.name == token) {
      out = e.type;
      return true;
    }
  }
  return false;
}

inline std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::kInt8:
    case Scalar::kUInt8: return 1;
    case Scalar::kInt16:
    case Scalar::kUInt16: return 2;
    case Scalar::kInt32:
    case Scalar::kUInt32:
    case Scalar::kFloat32: return 4;
    case Scalar::kFloat64: return 8;
  }
  return 0;
}

inline bool is_integral(Scalar s) { return s != Scalar::kFloat32 && s != Scalar::kFloat64; }

struct Property {
  std::string name;
  Scalar type = Scalar::kFloat32;
  bool is_list = false;
  Scalar count_type = Scalar::kUInt8;
};

struct Element {
  std::string name;
  std::uint64_t count = 0;
  std::vector<Property> properties;
};

enum class Format { kAscii, kBinaryLittleEndian };

struct Header {
  Format format = Format::kAscii;
  std::vector<Element> elements;
  std::size_t body_offset = 0;
};

template <class T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  }
  return v;
}

inline double decode(Scalar s, const char* p) {
  switch (s) {
    case Scalar::kInt8: return load_le<std::int8_t>(p);
    case Scalar::kUInt8: return load_le<std::uint8_t>(p);
    case Scalar::kInt16: return load_le<std::int16_t>(p);
    case Scalar::kUInt16: return load_le<std::uint16_t>(p);
    case Scalar::kInt32: return load_le<std::int32_t>(p);
    case Scalar::kUInt32: return load_le<std::uint32_t>(p);
    case Scalar::kFloat32: return load_le<float>(p);
    case Scalar::kFloat64: return load_le<double>(p);
  }
  return 0.0;
}

inline std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream ss{std::string(line)};
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline Header parse_header(const std::string& data) {
  Header h;
  std::size_t pos = 0;
  bool saw_format = false;
  bool first = true;
  while (true) {
    if (pos >= data.size()) throw ParseError(pos, "header not terminated by end_header");
    const std::size_t line_start = pos;
    std::size_t eol = data.find('\n', pos);
    if (eol == std::string::npos) throw ParseError(pos, "header not terminated by end_header");
    std::string_view line(data.data() + pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    auto tok = split_ws(line);
    if (first) {
      if (tok.size() != 1 || tok[0] != "ply") throw ParseError(line_start, "missing 'ply' magic");
      first = false;
      continue;
    }
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() != 3) throw ParseError(line_start, "malformed format line");
      if (tok[1] == "ascii") h.format = Format::kAscii;
      else if (tok[1] == "binary_little_endian") h.format = Format::kBinaryLittleEndian;
      else throw ParseError(line_start, "unsupported format '" + tok[1] + "'");
      saw_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw ParseError(line_start, "malformed element line");
      Element e;
      e.name = tok[1];
      try {
        std::size_t used = 0;
        e.count = std::stoull(tok[2], &used);
        if (used != tok[2].size()) throw std::invalid_argument("count");
      } catch (const std::exception&) {
        throw ParseError(line_start, "bad element count '" + tok[2] + "'");
      }
      h.elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (h.elements.empty()) throw ParseError(line_start, "property before any element");
      Property p;
      if (tok.size() == 5 && tok[1] == "list") {
        p.is_list = true;
        if (!parse_scalar(tok[2], p.count_type) || !is_integral(p.count_type))
          throw ParseError(line_start, "unsupported list count type '" + tok[2] + "'");
        if (!parse_scalar(tok[3], p.type)) throw ParseError(line_start, "unsupported property type '" + tok[3] + "'");
        p.name = tok[4];
      } else if (tok.size() == 3) {
        if (!parse_scalar(tok[1], p.type)) throw ParseError(line_start, "unsupported property type '" + tok[1] + "'");
        p.name = tok[2];
      } else {
        throw ParseError(line_start, "malformed property line");
      }
      h.elements.back().properties.push_back(std::move(p));
    } else {
      throw ParseError(line_start, "unknown header keyword '" + tok[0] + "'");
    }
  }
  if (!saw_format) throw ParseError(0, "missing format line");
  h.body_offset = pos;
  return h;
}

// Uniform value source over the body, binary or ascii.
class BodyReader {
 public:
  BodyReader(const std::string& data, std::size_t offset, Format format)
      : data_(data), pos_(offset), format_(format) {}

  double next(Scalar type) {
    if (format_ == Format::kBinaryLittleEndian) {
      const std::size_t n = scalar_size(type);
      if (pos_ + n > data_.size()) throw ParseError(pos_, "truncated body");
      double v = decode(type, data_.data() + pos_);
      pos_ += n;
      return v;
    }
    while (pos_ < data_.size() && std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    if (pos_ >= data_.size()) throw ParseError(pos_, "truncated body");
    const std::size_t start = pos_;
    while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    const std::string token = data_.substr(start, pos_ - start);
    try {
      std::size_t used = 0;
      double v = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      if (is_integral(type) && v != std::floor(v)) throw std::invalid_argument(token);
      return v;
    } catch (const std::exception&) {
      throw ParseError(start, "bad numeric token '" + token + "'");
    }
  }

  std::size_t position() const { return pos_; }

 private:
  const std::string& data_;
  std::size_t pos_;
  Format format_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline double color_scale(Scalar s) {
  switch (s) {
    case Scalar::kUInt8: return 1.0 / 255.0;
    case Scalar::kUInt16: return 1.0 / 65535.0;
    case Scalar::kFloat32:
    case Scalar::kFloat64: return 1.0;
    default: return 0.0;
  }
}

}  // namespace ply_detail

inline RawCloud parse_ply(const std::string& data) {
  using namespace ply_detail;
  Header header = parse_header(data);
  const Element* vertex = nullptr;
  for (const Element& e : header.elements)
    if (e.name == "vertex") vertex = &e;
  if (vertex == nullptr) throw ParseError(0, "no vertex element");
  if (vertex->count == 0) throw ParseError(0, "vertex element is empty");

  // Column slots: 0..2 xyz, 3..5 rgb, 6 label.
  std::vector<int> slot(vertex->properties.size(), -1);
  bool have[7] = {};
  static constexpr std::string_view kNames[7] = {"x", "y", "z", "red", "green", "blue", "label"};
  for (std::size_t p = 0; p < vertex->properties.size(); ++p) {
    const Property& prop = vertex->properties[p];
    for (int s = 0; s < 7; ++s) {
      if (prop.name != kNames[s]) continue;
      if (prop.is_list) throw ParseError(0, "vertex property '" + prop.name + "' must be scalar");
      if (s >= 3 && s < 6 && color_scale(prop.type) == 0.0)
        throw ParseError(0, "unsupported color type for '" + prop.name + "'");
      if (s == 6 && !is_integral(prop.type)) throw ParseError(0, "label property must be an integer type");
      slot[p] = s;
      have[s] = true;
    }
  }
  if (!have[0] || !have[1] || !have[2]) throw ParseError(0, "vertex element lacks x/y/z");
  const bool has_color = have[3] && have[4] && have[5];

  RawCloud cloud;
  cloud.positions.assign(vertex->count, Vec3::Zero());
  cloud.colors.assign(vertex->count, Vec3::Constant(0.5));
  if (have[6]) cloud.labels = std::vector<Label>(vertex->count, 0);

  BodyReader reader(data, header.body_offset, header.format);
  for (const Element& e : header.elements) {
    const bool is_vertex = &e == vertex;
    for (std::uint64_t i = 0; i < e.count; ++i) {
      for (std::size_t p = 0; p < e.properties.size(); ++p) {
        const Property& prop = e.properties[p];
        if (prop.is_list) {
          const std::size_t at = reader.position();
          const double count = reader.next(prop.count_type);
          if (count < 0) throw ParseError(at, "negative list length");
          for (std::uint64_t j = 0; j < static_cast<std::uint64_t>(count); ++j) reader.next(prop.type);
          continue;
        }
        const std::size_t at = reader.position();
        const double v = reader.next(prop.type);
        if (!is_vertex || slot[p] < 0) continue;
        const int s = slot[p];
        if (s < 3) {
          if (!std::isfinite(v)) throw ParseError(at, "non-finite coordinate");
          cloud.positions[i][s] = v;
        } else if (s < 6) {
          if (!has_color) continue;
          const double c = v * color_scale(prop.type);
          if (!(c >= 0.0 && c <= 1.0)) throw ParseError(at, "color value outside [0,1]");
          cloud.colors[i][s - 3] = c;
        } else {
          if (v < 0) throw ParseError(at, "negative instance label");
          (*cloud.labels)[i] = static_cast<Label>(v);
        }
      }
    }
    if (is_vertex) break;
  }
  return cloud;
}

inline RawCloud load_ply(const std::filesystem::path& path) { return parse_ply(ply_detail::read_file(path)); }

// One decimal label per line, used when a PLY has no label property.
inline std::vector<Label> load_label_sidecar(const std::filesystem::path& path, std::size_t expected) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<Label> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tok = ply_detail::split_ws(line);
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      long v = std::stol(tok[0], &used);
      if (used != tok[0].size() || tok.size() != 1 || v < 0) throw std::invalid_argument(line);
      labels.push_back(static_cast<Label>(v));
    } catch (const std::exception&) {
      throw IoError("label sidecar '" + path.string() + "' line " + std::to_string(line_no) + ": bad label");
    }
  }
  if (labels.size() != expected)
    throw IoError("label sidecar has " + std::to_string(labels.size()) + " labels, expected " + std::to_string(expected));
  return labels;
}

// Deterministic label -> color map (golden-ratio hue walk).
inline std::array<std::uint8_t, 3> palette_color(Label label) {
  const double hue = std::fmod(static_cast<double>(label) * 0.618033988749895, 1.0) * 6.0;
  const double s = 0.65, v = 0.95;
  const int sector = static_cast<int>(hue) % 6;
  const double f = hue - std::floor(hue);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r = v, g = t, b = p;
  switch (sector) {
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    case 5: r = v; g = p; b = q; break;
    default: break;
  }
  auto to8 = [](double x) { return static_cast<std::uint8_t>(std::lround(x * 255.0)); };
  return {to8(r), to8(g), to8(b)};
}

namespace ply_detail {

template <class V>
void put_le(std::string& out, V value) {
  char bytes[sizeof(value)];
  std::memcpy(bytes, &value, sizeof(value));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(value) / 2; ++i) std::swap(bytes[i], bytes[sizeof(value) - 1 - i]);
  out.append(bytes, sizeof(value));
}

}  // namespace ply_detail

// Binary little-endian PLY keeping the cloud's own colors (as doubles, so a
// load returns them exactly) and its labels when present.
inline std::string encode_cloud_ply(const RawCloud& cloud) {
  cloud.validate();
  std::string out;
  out += "ply\nformat binary_little_endian 1.0\ncomment rgt cloud\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  out += "property double red\nproperty double green\nproperty double blue\n";
  if (cloud.has_labels()) out += "property int label\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int c = 0; c < 3; ++c) ply_detail::put_le(out, cloud.positions[i][c]);
    for (int c = 0; c < 3; ++c) ply_detail::put_le(out, cloud.colors[i][c]);
    if (cloud.has_labels()) ply_detail::put_le(out, static_cast<std::int32_t>((*cloud.labels)[i]));
  }
  return out;
}

// Binary little-endian PLY with double xyz, palette rgb and an int label.
inline std::string encode_labeled_ply(const std::vector<Vec3>& positions, const std::vector<Label>& labels) {
  if (labels.size() != positions.size())
    throw ConfigError("save_ply: labels length " + std::to_string(labels.size()) + " != points " +
                      std::to_string(positions.size()));
  std::string out;
  out += "ply\nformat binary_little_endian 1.0\ncomment rgt labeled cloud\n";
  out += "element vertex " + std::to_string(positions.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "property int label\nend_header\n";
  out.reserve(out.size() + positions.size() * 31);
  auto put = [&](auto value) {
    char bytes[sizeof(value)];
    std::memcpy(bytes, &value, sizeof(value));
    if constexpr (std::endian::native == std::endian::big)
      for (std::size_t i = 0; i < sizeof(value) / 2; ++i) std::swap(bytes[i], bytes[sizeof(value) - 1 - i]);
    out.append(bytes, sizeof(value));
  };
  for (std::size_t i = 0; i < positions.size(); ++i) {
    put(positions[i].x());
    put(positions[i].y());
    put(positions[i].z());
    const auto rgb = palette_color(labels[i]);
    put(rgb[0]);
    put(rgb[1]);
    put(rgb[2]);
    put(static_cast<std::int32_t>(labels[i]));
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline void save_ply(const RawCloud& cloud, const std::vector<Label>& labels, const std::filesystem::path& path) {
  write_file(path, encode_labeled_ply(cloud.positions, labels));
}

inline void save_cloud_ply(const RawCloud& cloud, const std::filesystem::path& path) {
  write_file(path, encode_cloud_ply(cloud));
}

}  // namespace rgt::pcl
