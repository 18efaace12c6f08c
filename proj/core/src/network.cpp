#include "dufia/network.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "dufia/dct.hpp"
#include "dufia/errors.hpp"

namespace dufia {

ArchId parse_arch(std::string_view name) {
  if (name == "A" || name == "a") return ArchId::A;
  if (name == "B" || name == "b") return ArchId::B;
  if (name == "C" || name == "c") return ArchId::C;
  throw InvalidArgument("unknown architecture id '" + std::string(name) + "'");
}

char arch_char(ArchId id) { return static_cast<char>(id); }

namespace {

class ArchBuilder {
 public:
  ArchBuilder(ArchId id, Shape3 input) {
    arch_.id = id;
    arch_.input = input;
    cur_ = input;
  }

  ArchBuilder& conv(std::size_t out_channels, std::size_t kernel) {
    LayerSpec l{LayerKind::Conv, cur_, {out_channels, cur_.height, cur_.width}};
    l.kernel = kernel;
    l.pad = kernel / 2;
    l.weight_count = out_channels * cur_.channels * kernel * kernel;
    l.bias_count = out_channels;
    return push_params(l);
  }
  ArchBuilder& relu() { return push({LayerKind::Relu, cur_, cur_}); }
  ArchBuilder& pool() {
    return push({LayerKind::AvgPool2, cur_,
                 {cur_.channels, cur_.height / 2, cur_.width / 2}});
  }
  ArchBuilder& gap() {
    return push({LayerKind::GlobalAvgPool, cur_, {cur_.channels, 1, 1}});
  }
  ArchBuilder& linear(std::size_t out) {
    LayerSpec l{LayerKind::Linear, cur_, {out, 1, 1}};
    l.weight_count = out * cur_.size();
    l.bias_count = out;
    return push_params(l);
  }
  ArchBuilder& dct() { return push({LayerKind::Dct, cur_, cur_}); }
  ArchBuilder& log_abs() { return push({LayerKind::LogAbs, cur_, cur_}); }
  ArchBuilder& tap() {
    arch_.tap = arch_.layers.size();
    return *this;
  }
  Architecture build() { return arch_; }

 private:
  ArchBuilder& push(LayerSpec l) {
    cur_ = l.out;
    arch_.layers.push_back(l);
    return *this;
  }
  ArchBuilder& push_params(LayerSpec l) {
    l.weight_offset = arch_.param_count;
    l.bias_offset = l.weight_offset + l.weight_count;
    arch_.param_count += l.weight_count + l.bias_count;
    return push(l);
  }

  Architecture arch_;
  Shape3 cur_;
};

constexpr Shape3 kInput{3, 32, 32};

Architecture make_a() {
  return ArchBuilder(ArchId::A, kInput)
      .conv(16, 3).relu().pool()
      .conv(32, 3).relu().pool()
      .conv(64, 3).relu().tap()
      .gap().linear(2)
      .build();
}

Architecture make_b() {
  return ArchBuilder(ArchId::B, kInput)
      .conv(8, 5).relu().pool()
      .conv(16, 5).relu().pool()
      .conv(32, 3).relu().tap()
      .pool()
      .conv(32, 3).relu()
      .gap().linear(2)
      .build();
}

Architecture make_c() {
  return ArchBuilder(ArchId::C, kInput)
      .dct().log_abs()
      .conv(16, 3).relu().pool()
      .conv(32, 3).relu().tap()
      .gap().linear(2)
      .build();
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using CMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MMap = Eigen::Map<RowMat<T>>;

inline Eigen::Index ix(std::size_t v) { return static_cast<Eigen::Index>(v); }

// Same-size, stride-1 patch matrix: rows (ci, ky, kx), columns (y, x).
template <typename T>
void im2col(const T* in, const LayerSpec& l, std::vector<T>& col) {
  const std::size_t h = l.in.height, w = l.in.width, k = l.kernel;
  const auto pad = static_cast<std::ptrdiff_t>(l.pad);
  col.assign(l.in.channels * k * k * h * w, T(0));
  T* dst = col.data();
  for (std::size_t c = 0; c < l.in.channels; ++c) {
    const T* plane = in + c * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx, dst += h * w) {
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dx));
          const std::size_t x1 = static_cast<std::size_t>(
              std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w),
                                       static_cast<std::ptrdiff_t>(w) - dx));
          const T* src = plane + static_cast<std::size_t>(sy) * w;
          T* row = dst + y * w;
          for (std::size_t x = x0; x < x1; ++x) {
            row[x] = src[static_cast<std::ptrdiff_t>(x) + dx];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const std::vector<T>& col, const LayerSpec& l, T* out) {
  const std::size_t h = l.in.height, w = l.in.width, k = l.kernel;
  const auto pad = static_cast<std::ptrdiff_t>(l.pad);
  std::fill(out, out + l.in.size(), T(0));
  const T* srcp = col.data();
  for (std::size_t c = 0; c < l.in.channels; ++c) {
    T* plane = out + c * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx, srcp += h * w) {
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dx));
          const std::size_t x1 = static_cast<std::size_t>(
              std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w),
                                       static_cast<std::ptrdiff_t>(w) - dx));
          T* dst = plane + static_cast<std::size_t>(sy) * w;
          const T* row = srcp + y * w;
          for (std::size_t x = x0; x < x1; ++x) {
            dst[static_cast<std::ptrdiff_t>(x) + dx] += row[x];
          }
        }
      }
    }
  }
}

template <typename T>
void layer_forward(const LayerSpec& l, std::span<const T> params,
                   const std::vector<T>& in, std::vector<T>& out) {
  out.assign(l.out.size(), T(0));
  switch (l.kind) {
    case LayerKind::Conv: {
      std::vector<T> col;
      im2col(in.data(), l, col);
      const std::size_t ckk = l.in.channels * l.kernel * l.kernel;
      const std::size_t hw = l.in.height * l.in.width;
      CMap<T> wmat(params.data() + l.weight_offset, ix(l.out.channels), ix(ckk));
      CMap<T> cmat(col.data(), ix(ckk), ix(hw));
      MMap<T> omat(out.data(), ix(l.out.channels), ix(hw));
      omat.noalias() = wmat * cmat;
      for (std::size_t c = 0; c < l.out.channels; ++c) {
        omat.row(ix(c)).array() += params[l.bias_offset + c];
      }
      break;
    }
    case LayerKind::Relu:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
      break;
    case LayerKind::AvgPool2: {
      const std::size_t ih = l.in.height, iw = l.in.width;
      const std::size_t oh = l.out.height, ow = l.out.width;
      for (std::size_t c = 0; c < l.out.channels; ++c) {
        const T* p = in.data() + c * ih * iw;
        T* q = out.data() + c * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          for (std::size_t x = 0; x < ow; ++x) {
            const T* r0 = p + (2 * y) * iw + 2 * x;
            const T* r1 = r0 + iw;
            q[y * ow + x] = (r0[0] + r0[1] + r1[0] + r1[1]) * T(0.25);
          }
        }
      }
      break;
    }
    case LayerKind::GlobalAvgPool: {
      const std::size_t hw = l.in.height * l.in.width;
      const T inv = T(1) / static_cast<T>(hw);
      for (std::size_t c = 0; c < l.in.channels; ++c) {
        T s = 0;
        for (std::size_t i = 0; i < hw; ++i) s += in[c * hw + i];
        out[c] = s * inv;
      }
      break;
    }
    case LayerKind::Linear: {
      const std::size_t n_in = l.in.size();
      for (std::size_t o = 0; o < l.out.channels; ++o) {
        const T* wrow = params.data() + l.weight_offset + o * n_in;
        T s = params[l.bias_offset + o];
        for (std::size_t i = 0; i < n_in; ++i) s += wrow[i] * in[i];
        out[o] = s;
      }
      break;
    }
    case LayerKind::Dct:
      dct2_planes<T>(in, out, l.in.channels, l.in.height, l.in.width, false);
      break;
    case LayerKind::LogAbs:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::log1p(std::fabs(in[i]));
      break;
  }
}

template <typename T>
void layer_backward(const LayerSpec& l, std::span<const T> params,
                    const std::vector<T>& in, const std::vector<T>& gout,
                    std::vector<T>& gin, std::span<T> pgrad) {
  gin.assign(l.in.size(), T(0));
  switch (l.kind) {
    case LayerKind::Conv: {
      const std::size_t ckk = l.in.channels * l.kernel * l.kernel;
      const std::size_t hw = l.in.height * l.in.width;
      CMap<T> wmat(params.data() + l.weight_offset, ix(l.out.channels), ix(ckk));
      CMap<T> gmat(gout.data(), ix(l.out.channels), ix(hw));
      std::vector<T> dcol(ckk * hw);
      MMap<T> dcmat(dcol.data(), ix(ckk), ix(hw));
      dcmat.noalias() = wmat.transpose() * gmat;
      col2im(dcol, l, gin.data());
      if (!pgrad.empty()) {
        std::vector<T> col;
        im2col(in.data(), l, col);
        CMap<T> cmat(col.data(), ix(ckk), ix(hw));
        MMap<T> dw(pgrad.data() + l.weight_offset, ix(l.out.channels), ix(ckk));
        dw.noalias() += gmat * cmat.transpose();
        for (std::size_t c = 0; c < l.out.channels; ++c) {
          pgrad[l.bias_offset + c] += gmat.row(ix(c)).sum();
        }
      }
      break;
    }
    case LayerKind::Relu:
      for (std::size_t i = 0; i < in.size(); ++i) gin[i] = in[i] > T(0) ? gout[i] : T(0);
      break;
    case LayerKind::AvgPool2: {
      const std::size_t ih = l.in.height, iw = l.in.width;
      const std::size_t oh = l.out.height, ow = l.out.width;
      for (std::size_t c = 0; c < l.out.channels; ++c) {
        T* p = gin.data() + c * ih * iw;
        const T* q = gout.data() + c * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          for (std::size_t x = 0; x < ow; ++x) {
            const T g = q[y * ow + x] * T(0.25);
            T* r0 = p + (2 * y) * iw + 2 * x;
            T* r1 = r0 + iw;
            r0[0] = g;
            r0[1] = g;
            r1[0] = g;
            r1[1] = g;
          }
        }
      }
      break;
    }
    case LayerKind::GlobalAvgPool: {
      const std::size_t hw = l.in.height * l.in.width;
      const T inv = T(1) / static_cast<T>(hw);
      for (std::size_t c = 0; c < l.in.channels; ++c) {
        const T g = gout[c] * inv;
        std::fill(gin.begin() + static_cast<std::ptrdiff_t>(c * hw),
                  gin.begin() + static_cast<std::ptrdiff_t>((c + 1) * hw), g);
      }
      break;
    }
    case LayerKind::Linear: {
      const std::size_t n_in = l.in.size();
      for (std::size_t o = 0; o < l.out.channels; ++o) {
        const T* wrow = params.data() + l.weight_offset + o * n_in;
        const T g = gout[o];
        for (std::size_t i = 0; i < n_in; ++i) gin[i] += wrow[i] * g;
        if (!pgrad.empty()) {
          T* dw = pgrad.data() + l.weight_offset + o * n_in;
          for (std::size_t i = 0; i < n_in; ++i) dw[i] += g * in[i];
          pgrad[l.bias_offset + o] += g;
        }
      }
      break;
    }
    case LayerKind::Dct:
      // Adjoint of the orthonormal forward transform is its inverse.
      dct2_planes<T>(gout, gin, l.in.channels, l.in.height, l.in.width, true);
      break;
    case LayerKind::LogAbs:
      for (std::size_t i = 0; i < in.size(); ++i) {
        const T v = in[i];
        const T s = v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
        gin[i] = gout[i] * s / (T(1) + std::fabs(v));
      }
      break;
  }
}

}  // namespace

const Architecture& Architecture::get(ArchId id) {
  static const Architecture a = make_a();
  static const Architecture b = make_b();
  static const Architecture c = make_c();
  switch (id) {
    case ArchId::A: return a;
    case ArchId::B: return b;
    case ArchId::C: return c;
  }
  throw InvalidArgument("unknown architecture id");
}

template <typename T>
Network<T>::Network(const Architecture& arch, std::vector<T> params)
    : arch_(&arch), params_(std::move(params)) {
  if (params_.size() != arch.param_count) {
    throw InvalidArgument("architecture " + std::string(1, arch_char(arch.id)) +
                          " expects " + std::to_string(arch.param_count) +
                          " parameters, got " + std::to_string(params_.size()));
  }
}

template <typename T>
void Network<T>::forward(Activations<T>& acts, std::size_t first,
                         std::size_t last) const {
  acts.resize(arch_->layers.size() + 1);
  for (std::size_t i = first; i < last; ++i) {
    layer_forward<T>(arch_->layers[i], params_, acts[i], acts[i + 1]);
  }
}

template <typename T>
Activations<T> Network<T>::forward(std::span<const T> input) const {
  if (input.size() != arch_->input.size()) {
    throw ShapeError("input has " + std::to_string(input.size()) +
                     " elements, detector expects " + arch_->input.str());
  }
  Activations<T> acts(arch_->layers.size() + 1);
  acts[0].assign(input.begin(), input.end());
  forward(acts, 0, arch_->layers.size());
  return acts;
}

template <typename T>
void Network<T>::backward(const Activations<T>& acts, std::size_t first,
                          std::size_t last, std::vector<T>& grad,
                          std::span<T> param_grad) const {
  std::vector<T> next;
  for (std::size_t i = last; i-- > first;) {
    layer_backward<T>(arch_->layers[i], params_, acts[i], grad, next, param_grad);
    grad.swap(next);
  }
}

template <typename T>
T Network<T>::cross_entropy(std::span<const T> logits, int label,
                            std::span<T> dlogits) {
  if (label != 0 && label != 1) throw InvalidArgument("label must be 0 or 1");
  // Two classes: loss = softplus(d) with d the logit gap towards the other
  // class. The gradient uses p_other directly, never 1 - p_label, which
  // cancels once the detector is confident.
  const auto y = static_cast<std::size_t>(label);
  const T d = logits[1 - y] - logits[y];
  const T e = std::exp(-std::fabs(d));
  if (!dlogits.empty()) {
    const T p_other = d >= T(0) ? T(1) / (T(1) + e) : e / (T(1) + e);
    dlogits[y] = -p_other;
    dlogits[1 - y] = p_other;
  }
  return std::max(d, T(0)) + std::log1p(e);
}

template <typename T>
T Network<T>::loss(std::span<const T> input, int label) const {
  const auto acts = forward(input);
  return cross_entropy(acts.back(), label);
}

template <typename T>
T Network<T>::loss_from_features(std::span<const T> features, int label) const {
  if (features.size() != arch_->feature_shape().size()) {
    throw ShapeError("feature injection expects " + arch_->feature_shape().str());
  }
  Activations<T> acts(arch_->layers.size() + 1);
  acts[arch_->tap].assign(features.begin(), features.end());
  forward(acts, arch_->tap, arch_->layers.size());
  return cross_entropy(acts.back(), label);
}

template <typename T>
T Network<T>::weighted_features(std::span<const T> input,
                                std::span<const T> weights) const {
  if (input.size() != arch_->input.size()) {
    throw ShapeError("input shape mismatch, detector expects " + arch_->input.str());
  }
  if (weights.size() != arch_->feature_shape().size()) {
    throw ShapeError("weights must match feature shape " + arch_->feature_shape().str());
  }
  Activations<T> acts(arch_->layers.size() + 1);
  acts[0].assign(input.begin(), input.end());
  forward(acts, 0, arch_->tap);
  const auto& h = acts[arch_->tap];
  T s = 0;
  for (std::size_t i = 0; i < h.size(); ++i) s += weights[i] * h[i];
  return s;
}

template <typename T>
std::vector<T> Network<T>::grad_loss_wrt_input(std::span<const T> input, int label,
                                               T* loss_out) const {
  const auto acts = forward(input);
  std::vector<T> g(2);
  const T j = cross_entropy(acts.back(), label, g);
  if (loss_out) *loss_out = j;
  backward(acts, 0, arch_->layers.size(), g);
  return g;
}

template <typename T>
std::vector<T> Network<T>::grad_loss_wrt_features(std::span<const T> input,
                                                  int label) const {
  const auto acts = forward(input);
  std::vector<T> g(2);
  cross_entropy(acts.back(), label, g);
  backward(acts, arch_->tap, arch_->layers.size(), g);
  return g;
}

template <typename T>
std::vector<T> Network<T>::grad_weighted_features_wrt_input(
    std::span<const T> input, std::span<const T> weights, T* value_out) const {
  if (input.size() != arch_->input.size()) {
    throw ShapeError("input shape mismatch, detector expects " + arch_->input.str());
  }
  if (weights.size() != arch_->feature_shape().size()) {
    throw ShapeError("weights must match feature shape " + arch_->feature_shape().str());
  }
  Activations<T> acts(arch_->layers.size() + 1);
  acts[0].assign(input.begin(), input.end());
  forward(acts, 0, arch_->tap);
  if (value_out) {
    const auto& h = acts[arch_->tap];
    T s = 0;
    for (std::size_t i = 0; i < h.size(); ++i) s += weights[i] * h[i];
    *value_out = s;
  }
  std::vector<T> g(weights.begin(), weights.end());
  backward(acts, 0, arch_->tap, g);
  return g;
}

template <typename T>
T Network<T>::accumulate_param_grad(std::span<const T> input, int label,
                                    std::span<T> param_grad) const {
  const auto acts = forward(input);
  std::vector<T> g(2);
  const T j = cross_entropy(acts.back(), label, g);
  backward(acts, 0, arch_->layers.size(), g, param_grad);
  return j;
}

template class Network<float>;
template class Network<double>;

}  // namespace dufia
