#include "railvo/pgm.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "railvo/error.hpp"

namespace railvo::imgcore {

namespace {

[[noreturn]] void fail(std::size_t offset, const std::string& what) {
  throw Error(ErrorCode::Format, what + " at byte offset " + std::to_string(offset));
}

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000L) fail(start, std::string("header field too large: ") + field);
      ++pos_;
    }
    if (pos_ == start) fail(start, std::string("expected integer for ") + field);
    return value;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Image decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2) fail(0, "truncated magic number");
  if (bytes[0] != 'P' || bytes[1] != '5') fail(0, "unsupported magic (expected P5)");
  HeaderReader r(bytes);
  r.advance(2);
  const long width = r.read_uint("width");
  const long height = r.read_uint("height");
  const long maxval = r.read_uint("maxval");
  if (width <= 0 || height <= 0) fail(r.pos(), "image dimensions must be positive");
  if (maxval <= 0 || maxval > 65535) fail(r.pos(), "maxval must be in [1, 65535]");
  if (r.pos() >= bytes.size() || !is_space(bytes[r.pos()])) {
    fail(r.pos(), "missing whitespace after maxval");
  }
  r.advance(1);

  const std::size_t bps = maxval < 256 ? 1 : 2;
  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t payload = r.pos();
  if (bytes.size() - payload < count * bps) fail(bytes.size(), "truncated payload");

  std::vector<float> data(count);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < count; ++i) {
    unsigned sample = bps == 1 ? bytes[payload + i]
                               : (static_cast<unsigned>(bytes[payload + 2 * i]) << 8) |
                                     bytes[payload + 2 * i + 1];
    if (sample > static_cast<unsigned>(maxval)) fail(payload + i * bps, "sample exceeds maxval");
    data[i] = static_cast<float>(sample * scale);
  }
  return Image(static_cast<int>(width), static_cast<int>(height), std::move(data));
}

std::vector<std::uint8_t> encode_pgm(const Image& img, int maxval) {
  if (maxval <= 0 || maxval > 65535) throw Error(ErrorCode::InvalidArgument, "maxval must be in [1, 65535]");
  img.validate();
  const std::string header = "P5\n" + std::to_string(img.width()) + " " +
                             std::to_string(img.height()) + "\n" + std::to_string(maxval) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const bool wide = maxval >= 256;
  out.reserve(out.size() + img.size() * (wide ? 2 : 1));
  for (float v : img.pixels()) {
    const auto s = static_cast<unsigned>(std::lround(static_cast<double>(v) * maxval));
    if (wide) out.push_back(static_cast<std::uint8_t>(s >> 8));
    out.push_back(static_cast<std::uint8_t>(s & 0xff));
  }
  return out;
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pgm(bytes);
}

void write_pgm(const std::filesystem::path& path, const Image& img, int maxval) {
  const auto bytes = encode_pgm(img, maxval);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace railvo::imgcore
