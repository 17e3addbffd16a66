#include "pdl/binary_io.hpp"
#include "pdl/flow.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pdl {
namespace {

constexpr char kMagic[4] = {'P', 'D', 'L', 'F'};
using binary::put;

}  // namespace

std::string encode_field_file(const FieldFile& file) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kFieldFileVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(file.width));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(file.height));
  put<double>(out, file.pixel_size);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(file.arrays.size()));
  for (const Grid& a : file.arrays) {
    if (a.rows() != file.height || a.cols() != file.width)
      throw Error(ErrorCode::InvalidArgument, "field array does not match header dimensions");
    for (Eigen::Index i = 0; i < a.size(); ++i) put<double>(out, a.data()[i]);
  }
  return out;
}

FieldFile decode_field_file(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw ParseError("field file: bad magic", 0);
  binary::Reader r(bytes, "field file");
  r.take(4, "magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kFieldFileVersion)
    throw ParseError("field file: unsupported version " + std::to_string(version), 4);
  FieldFile f;
  f.width = static_cast<int>(r.get<std::uint32_t>("width"));
  f.height = static_cast<int>(r.get<std::uint32_t>("height"));
  f.pixel_size = r.get<double>("pixel_size");
  const auto count = r.get<std::uint32_t>("array count");
  if (f.width <= 0 || f.height <= 0) throw ParseError("field file: zero dimension", 8);
  const std::size_t per_array = static_cast<std::size_t>(f.width) * f.height * 8;
  if (r.remaining() != per_array * count)
    throw ParseError("field file: payload size mismatch", r.pos());
  for (std::uint32_t k = 0; k < count; ++k) {
    Grid a(f.height, f.width);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = r.get<double>("payload");
    f.arrays.push_back(std::move(a));
  }
  return f;
}

void write_field_file(const FieldFile& file, const std::filesystem::path& path) {
  binary::write_file(path, encode_field_file(file));
}

FieldFile read_field_file(const std::filesystem::path& path) { return decode_field_file(binary::read_file(path)); }

void save_flow(const FlowField& field, const std::filesystem::path& path) {
  write_field_file({field.width, field.height, field.pixel_size, {field.u, field.v, field.p}}, path);
}

FlowField load_flow(const std::filesystem::path& path) {
  FieldFile f = read_field_file(path);
  if (f.arrays.size() != 3) throw ParseError("flow file must hold 3 arrays (u, v, p)", 24);
  return {f.width, f.height, f.pixel_size, std::move(f.arrays[0]), std::move(f.arrays[1]), std::move(f.arrays[2])};
}

}  // namespace pdl

namespace pdl::binary {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace pdl::binary
