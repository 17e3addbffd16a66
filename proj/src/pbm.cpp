#include "pdl/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace pdl {
namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  int read_dimension(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1L << 20)) throw ParseError(std::string("PBM ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("PBM header: expected ") + what, start);
    if (value == 0) throw ParseError(std::string("PBM header: zero ") + what, start);
    return static_cast<int>(value);
  }

  std::size_t pos_ = 0;
  std::string_view bytes_;
};

}  // namespace

PoreImage parse_pbm(std::string_view bytes, double length) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '1' && bytes[1] != '4'))
    throw ParseError("PBM header: expected magic P1 or P4", 0);
  const bool binary = bytes[1] == '4';

  HeaderReader reader(bytes);
  reader.pos_ = 2;
  if (reader.pos_ < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[reader.pos_])) &&
      bytes[reader.pos_] != '#')
    throw ParseError("PBM header: missing whitespace after magic", reader.pos_);
  const int width = reader.read_dimension("width");
  const int height = reader.read_dimension("height");

  Mask cells(height, width);
  std::size_t pos = reader.pos_;
  if (binary) {
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
      throw ParseError("PBM header: expected single whitespace before raster", pos);
    ++pos;
    const std::size_t row_bytes = (static_cast<std::size_t>(width) + 7) / 8;
    const std::size_t needed = row_bytes * static_cast<std::size_t>(height);
    if (bytes.size() - pos < needed)
      throw ParseError("PBM raster truncated: need " + std::to_string(needed) + " bytes", bytes.size());
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const auto byte = static_cast<unsigned char>(bytes[pos + y * row_bytes + x / 8]);
        const bool black = (byte >> (7 - x % 8)) & 1U;
        cells(y, x) = !black;
      }
    }
  } else {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        while (pos < bytes.size() && (std::isspace(static_cast<unsigned char>(bytes[pos])) || bytes[pos] == '#')) {
          if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
          } else {
            ++pos;
          }
        }
        if (pos >= bytes.size()) throw ParseError("PBM raster truncated", pos);
        const char c = bytes[pos];
        if (c != '0' && c != '1') throw ParseError(std::string("PBM raster: unexpected character '") + c + "'", pos);
        cells(y, x) = c == '0';
        ++pos;
      }
    }
  }
  return PoreImage(std::move(cells), length / width);
}

std::string encode_pbm(const PoreImage& image, PbmFormat format) {
  std::ostringstream out;
  const int w = image.width();
  const int h = image.height();
  if (format == PbmFormat::Binary) {
    out << "P4\n" << w << ' ' << h << '\n';
    const std::size_t row_bytes = (static_cast<std::size_t>(w) + 7) / 8;
    std::string row(row_bytes, '\0');
    for (int y = 0; y < h; ++y) {
      std::fill(row.begin(), row.end(), '\0');
      for (int x = 0; x < w; ++x) {
        if (image.is_solid(x, y)) row[x / 8] = static_cast<char>(row[x / 8] | (0x80 >> (x % 8)));
      }
      out << row;
    }
  } else {
    out << "P1\n" << w << ' ' << h << '\n';
    for (int y = 0; y < h; ++y) {
      int column = 0;
      for (int x = 0; x < w; ++x) {
        if (column >= 68) {
          out << '\n';
          column = 0;
        } else if (x > 0) {
          out << ' ';
          ++column;
        }
        out << (image.is_solid(x, y) ? '1' : '0');
        ++column;
      }
      out << '\n';
    }
  }
  return out.str();
}

PoreImage load_pbm(const std::filesystem::path& path, double length) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_pbm(buffer.str(), length);
}

void save_pbm(const PoreImage& image, const std::filesystem::path& path, PbmFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  const std::string bytes = encode_pbm(image, format);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace pdl
