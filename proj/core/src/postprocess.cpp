#include "dufia/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>

#include <jpeglib.h>

#include "dufia/errors.hpp"
#include "dufia/kv.hpp"
#include "dufia/rng.hpp"

namespace dufia {
namespace {

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void on_jpeg_error(j_common_ptr info) {
  auto* err = reinterpret_cast<JpegError*>(info->err);
  (*info->err->format_message)(info, err->message);
  std::longjmp(err->jump, 1);
}

std::vector<unsigned char> encode_jpeg(const std::vector<unsigned char>& rgb, int w, int h,
                                       int quality) {
  jpeg_compress_struct cinfo{};
  JpegError err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = on_jpeg_error;
  unsigned char* buf = nullptr;
  unsigned long size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buf);
    throw IoError(std::string("jpeg encode failed: ") + err.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buf, &size);
  cinfo.image_width = static_cast<JDIMENSION>(w);
  cinfo.image_height = static_cast<JDIMENSION>(h);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  cinfo.dct_method = JDCT_ISLOW;
  jpeg_set_quality(&cinfo, quality, TRUE);
  // 4:4:4: no chroma subsampling, so high quality stays close to lossless.
  for (int c = 0; c < 3; ++c) {
    cinfo.comp_info[c].h_samp_factor = 1;
    cinfo.comp_info[c].v_samp_factor = 1;
  }
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<unsigned char*>(&rgb[cinfo.next_scanline * w * 3]);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::vector<unsigned char> out(buf, buf + size);
  std::free(buf);
  return out;
}

std::vector<unsigned char> decode_jpeg(const std::vector<unsigned char>& data, int w, int h) {
  // Allocated before setjmp so a longjmp never skips a destructor.
  std::vector<unsigned char> rgb(static_cast<std::size_t>(w) * h * 3);
  jpeg_decompress_struct dinfo{};
  JpegError err{};
  dinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = on_jpeg_error;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&dinfo);
    throw IoError(std::string("jpeg decode failed: ") + err.message);
  }
  jpeg_create_decompress(&dinfo);
  jpeg_mem_src(&dinfo, data.data(), static_cast<unsigned long>(data.size()));
  jpeg_read_header(&dinfo, TRUE);
  dinfo.out_color_space = JCS_RGB;
  dinfo.dct_method = JDCT_ISLOW;
  jpeg_start_decompress(&dinfo);
  if (static_cast<int>(dinfo.output_width) != w || static_cast<int>(dinfo.output_height) != h ||
      dinfo.output_components != 3) {
    jpeg_destroy_decompress(&dinfo);
    throw IoError("jpeg decode returned unexpected dimensions");
  }
  while (dinfo.output_scanline < dinfo.output_height) {
    JSAMPROW row = &rgb[dinfo.output_scanline * w * 3];
    jpeg_read_scanlines(&dinfo, &row, 1);
  }
  jpeg_finish_decompress(&dinfo);
  jpeg_destroy_decompress(&dinfo);
  return rgb;
}

}  // namespace

Image jpeg_roundtrip(const Image& image, int quality) {
  if (quality < 1 || quality > 100) throw InvalidArgument("jpeg quality must be in [1, 100]");
  const auto& s = image.shape();
  if (s.channels != 3) throw ShapeError("jpeg_roundtrip expects 3 channels, got " + s.str());
  const int w = static_cast<int>(s.width), h = static_cast<int>(s.height);
  std::vector<unsigned char> rgb(s.size());
  for (std::size_t y = 0; y < s.height; ++y) {
    for (std::size_t x = 0; x < s.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(image.at(c, y, x)), 0.0, 1.0);
        rgb[(y * s.width + x) * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
  }
  const auto decoded = decode_jpeg(encode_jpeg(rgb, w, h, quality), w, h);
  Image out(s);
  for (std::size_t y = 0; y < s.height; ++y) {
    for (std::size_t x = 0; x < s.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        out.at(c, y, x) = static_cast<float>(decoded[(y * s.width + x) * 3 + c] / 255.0);
      }
    }
  }
  return out;
}

Image add_noise(const Image& image, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
  if (sigma == 0.0) return image;
  Image out = image;
  CounterRng rng(derive_seed(seed, "noise"));
  for (auto& v : out.values()) {
    v = std::clamp(v + static_cast<float>(sigma * rng.normal()), 0.0f, 1.0f);
  }
  return out;
}

std::string PostProcess::name() const {
  switch (kind) {
    case ProcessKind::Identity: return "identity";
    case ProcessKind::Jpeg: return "jpeg";
    case ProcessKind::Blur: return "blur";
    case ProcessKind::Noise: return "noise";
  }
  return "?";
}

std::string PostProcess::strength_label() const {
  switch (kind) {
    case ProcessKind::Identity: return "-";
    case ProcessKind::Jpeg: return std::to_string(static_cast<int>(strength));
    case ProcessKind::Blur: return format_double(strength);
    case ProcessKind::Noise: {
      // Noise levels are quoted in 8-bit steps.
      const double steps = strength * 255.0;
      if (std::fabs(steps - std::round(steps)) < 1e-9) {
        return std::to_string(static_cast<long>(std::round(steps))) + "/255";
      }
      return format_double(strength);
    }
  }
  return "?";
}

Image PostProcess::apply(const Image& image, std::uint64_t seed) const {
  switch (kind) {
    case ProcessKind::Identity: return image;
    case ProcessKind::Jpeg: return jpeg_roundtrip(image, static_cast<int>(strength));
    case ProcessKind::Blur: return gaussian_blur(image, strength);
    case ProcessKind::Noise: return add_noise(image, strength, seed);
  }
  throw InvalidArgument("unknown post-process");
}

std::vector<PostProcess> default_processes(const std::vector<double>& blur_sigmas) {
  std::vector<PostProcess> out{{ProcessKind::Identity, 0.0}};
  for (int q : {90, 60, 30}) out.push_back({ProcessKind::Jpeg, static_cast<double>(q)});
  for (double s : blur_sigmas) out.push_back({ProcessKind::Blur, s});
  for (int n : {1, 8, 64}) out.push_back({ProcessKind::Noise, n / 255.0});
  return out;
}

}  // namespace dufia
