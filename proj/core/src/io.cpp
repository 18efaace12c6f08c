#include "dufia/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "dufia/errors.hpp"

namespace dufia {

void ByteWriter::f32(float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

void ByteReader::need(std::size_t n) const {
  if (data_.size() - pos_ < n) throw IoError("truncated binary container");
}

std::string ByteReader::bytes(std::size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::uint8_t ByteReader::u8() {
  need(1);
  return data_[pos_++];
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

float ByteReader::f32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return std::bit_cast<float>(v);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename into " + path.string() + ": " + ec.message());
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                    text.size()));
}

std::vector<std::uint8_t> encode_tensor_blob(const TensorBlob& blob) {
  std::uint64_t n = 1;
  for (auto d : blob.dims) n *= d;
  if (n != blob.values.size()) throw ShapeError("tensor blob dims do not match payload");
  if (blob.dims.size() > 255) throw ShapeError("tensor blob rank too large");
  ByteWriter w;
  w.bytes("DFI1");
  w.u8(static_cast<std::uint8_t>(blob.dims.size()));
  for (auto d : blob.dims) w.u64(d);
  for (float v : blob.values) w.f32(v);
  return w.take();
}

TensorBlob decode_tensor_blob(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != "DFI1") throw IoError("not a DFI1 container");
  TensorBlob blob;
  const std::size_t rank = r.u8();
  std::uint64_t n = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    blob.dims.push_back(r.u64());
    n *= blob.dims.back();
  }
  if (r.remaining() != n * 4) throw IoError("DFI1 payload size mismatch");
  blob.values.resize(n);
  for (auto& v : blob.values) v = r.f32();
  return blob;
}

void save_tensor_blob(const TensorBlob& blob, const std::filesystem::path& path) {
  write_file_atomic(path, encode_tensor_blob(blob));
}

TensorBlob load_tensor_blob(const std::filesystem::path& path) {
  return decode_tensor_blob(read_file(path));
}

TensorBlob stack_tensors(std::span<const Tensor3> tensors) {
  if (tensors.empty()) throw ShapeError("cannot stack an empty tensor list");
  const Shape3 s = tensors.front().shape();
  TensorBlob blob;
  blob.dims = {tensors.size(), s.channels, s.height, s.width};
  blob.values.reserve(tensors.size() * s.size());
  for (const auto& t : tensors) {
    if (t.shape() != s) throw ShapeError("stack_tensors: mixed shapes");
    blob.values.insert(blob.values.end(), t.values().begin(), t.values().end());
  }
  return blob;
}

std::vector<Tensor3> unstack_tensors(const TensorBlob& blob) {
  if (blob.dims.size() != 4) throw ShapeError("expected a rank-4 tensor blob");
  const Shape3 s{blob.dims[1], blob.dims[2], blob.dims[3]};
  std::vector<Tensor3> out;
  out.reserve(blob.dims[0]);
  for (std::size_t i = 0; i < blob.dims[0]; ++i) {
    auto first = blob.values.begin() + static_cast<std::ptrdiff_t>(i * s.size());
    out.emplace_back(s, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(s.size())));
  }
  return out;
}

namespace {

void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

std::vector<std::uint8_t> encode_png(std::size_t width, std::size_t height,
                                     int bit_depth, int color_type,
                                     const std::vector<std::vector<std::uint8_t>>& rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png: cannot create writer");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png: cannot create info");
  }
  std::vector<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: encode failed");
  }
  png_set_write_fn(png, &out, png_append, png_flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (const auto& row : rows) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

void write_png16_rgb(const Image& image, const std::filesystem::path& path) {
  const auto& s = image.shape();
  if (s.channels != 3) throw ShapeError("write_png16_rgb expects 3 channels");
  std::vector<std::vector<std::uint8_t>> rows(s.height, std::vector<std::uint8_t>(s.width * 6));
  for (std::size_t y = 0; y < s.height; ++y) {
    for (std::size_t x = 0; x < s.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0f));
        rows[y][x * 6 + c * 2] = static_cast<std::uint8_t>(q >> 8);  // big-endian
        rows[y][x * 6 + c * 2 + 1] = static_cast<std::uint8_t>(q & 0xff);
      }
    }
  }
  write_file_atomic(path, encode_png(s.width, s.height, 16, PNG_COLOR_TYPE_RGB, rows));
}

void write_png8_gray(std::span<const std::uint8_t> pixels, std::size_t width,
                     std::size_t height, const std::filesystem::path& path) {
  if (pixels.size() != width * height) throw ShapeError("write_png8_gray: size mismatch");
  std::vector<std::vector<std::uint8_t>> rows(height);
  for (std::size_t y = 0; y < height; ++y) {
    rows[y].assign(pixels.begin() + static_cast<std::ptrdiff_t>(y * width),
                   pixels.begin() + static_cast<std::ptrdiff_t>((y + 1) * width));
  }
  write_file_atomic(path, encode_png(width, height, 8, PNG_COLOR_TYPE_GRAY, rows));
}

}  // namespace dufia
