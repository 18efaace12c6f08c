#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dufia/tensor.hpp"

namespace dufia {

class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v);
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}
  std::string bytes(std::size_t n);
  std::uint8_t u8();
  std::uint64_t u64();
  float f32();
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const;
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary and renames, so readers never observe a
/// partial file.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

/// "DFI1" tensor container: magic, rank byte, rank x u64 LE dims, float32
/// LE payload in row-major order.
struct TensorBlob {
  std::vector<std::uint64_t> dims;
  std::vector<float> values;
};

std::vector<std::uint8_t> encode_tensor_blob(const TensorBlob& blob);
TensorBlob decode_tensor_blob(std::span<const std::uint8_t> bytes);
void save_tensor_blob(const TensorBlob& blob, const std::filesystem::path& path);
TensorBlob load_tensor_blob(const std::filesystem::path& path);

/// Packs equally shaped tensors into a rank-4 (N, C, H, W) blob.
TensorBlob stack_tensors(std::span<const Tensor3> tensors);
std::vector<Tensor3> unstack_tensors(const TensorBlob& blob);

/// 16-bit RGB PNG, channel-first input in [0, 1], round(v * 65535).
void write_png16_rgb(const Image& image, const std::filesystem::path& path);
/// 8-bit grayscale PNG from row-major samples.
void write_png8_gray(std::span<const std::uint8_t> pixels, std::size_t width,
                     std::size_t height, const std::filesystem::path& path);

}  // namespace dufia
