#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "sonar/common.hpp"
#include "sonar/nn/tensor.hpp"

namespace sonar::nn {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---- elementwise ------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] > T(0) ? xv[i] : T(0);
  if (grad_active<T>({&x})) {
    mark_output(out);
    auto xd = x.data();
    auto od = out.data();
    active_tape<T>()->record([xd, od] {
      for (size_t i = 0; i < xd->v.size(); ++i) {
        if (xd->v[i] > T(0)) xd->g[i] += od->g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (size_t i = 0; i < xv.size(); ++i) {
    ov[i] = T(1) / (T(1) + std::exp(-xv[i]));
  }
  if (grad_active<T>({&x})) {
    mark_output(out);
    auto xd = x.data();
    auto od = out.data();
    active_tape<T>()->record([xd, od] {
      for (size_t i = 0; i < xd->v.size(); ++i) {
        xd->g[i] += od->g[i] * od->v[i] * (T(1) - od->v[i]);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> exp_t(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> o(out.values().data(),
                                                   out.numel());
  Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> xi(x.values().data(),
                                                          x.numel());
  o = xi.exp();
  if (grad_active<T>({&x})) {
    mark_output(out);
    auto xd = x.data();
    auto od = out.data();
    active_tape<T>()->record([xd, od] {
      for (size_t i = 0; i < xd->v.size(); ++i) {
        xd->g[i] += od->g[i] * od->v[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i] * xv[i];
  if (grad_active<T>({&x})) {
    mark_output(out);
    auto xd = x.data();
    auto od = out.data();
    active_tape<T>()->record([xd, od] {
      for (size_t i = 0; i < xd->v.size(); ++i) {
        xd->g[i] += od->g[i] * T(2) * xd->v[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (size_t i = 0; i < xv.size(); ++i) ov[i] = c * xv[i];
  if (grad_active<T>({&x})) {
    mark_output(out);
    auto xd = x.data();
    auto od = out.data();
    active_tape<T>()->record([xd, od, c] {
      for (size_t i = 0; i < xd->v.size(); ++i) xd->g[i] += c * od->g[i];
    });
  }
  return out;
}

// ---- shape ops --------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel()) {
    throw std::invalid_argument("reshape: " + shape_str(x.shape()) + " to " +
                                shape_str(new_shape) + " changes element count");
  }
  Tensor<T> out = Tensor<T>::from_values(std::move(new_shape), x.values());
  if (grad_active<T>({&x})) {
    mark_output(out);
    auto xd = x.data();
    auto od = out.data();
    active_tape<T>()->record([xd, od] {
      for (size_t i = 0; i < xd->v.size(); ++i) xd->g[i] += od->g[i];
    });
  }
  return out;
}

// Concatenate along axis 1 of two rank-2 tensors (batch x features).
template <typename T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
    throw std::invalid_argument("concat: need matching batch dims, got " +
                                shape_str(a.shape()) + " and " +
                                shape_str(b.shape()));
  }
  const size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  Tensor<T> out = Tensor<T>::zeros({n, ca + cb});
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < ca; ++j) {
      out.values()[i * (ca + cb) + j] = a.values()[i * ca + j];
    }
    for (size_t j = 0; j < cb; ++j) {
      out.values()[i * (ca + cb) + ca + j] = b.values()[i * cb + j];
    }
  }
  if (grad_active<T>({&a, &b})) {
    mark_output(out);
    auto ad = a.data();
    auto bd = b.data();
    auto od = out.data();
    active_tape<T>()->record([ad, bd, od, n, ca, cb] {
      for (size_t i = 0; i < n; ++i) {
        if (ad->needs_grad) {
          for (size_t j = 0; j < ca; ++j) {
            ad->g[i * ca + j] += od->g[i * (ca + cb) + j];
          }
        }
        if (bd->needs_grad) {
          for (size_t j = 0; j < cb; ++j) {
            bd->g[i * cb + j] += od->g[i * (ca + cb) + ca + j];
          }
        }
      }
    });
  }
  return out;
}

// Tile the channel axis B times: (n, d, ...) -> (n, b*D+d, ...).
template <typename T>
Tensor<T> channel_repeat(const Tensor<T>& x, size_t repeats) {
  if (x.rank() < 2) throw std::invalid_argument("channel_repeat: rank >= 2");
  const size_t n = x.dim(0), d = x.dim(1);
  size_t inner = 1;
  for (size_t i = 2; i < x.rank(); ++i) inner *= x.dim(i);
  Shape out_shape = x.shape();
  out_shape[1] = d * repeats;
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  const size_t plane = d * inner;
  for (size_t i = 0; i < n; ++i) {
    for (size_t b = 0; b < repeats; ++b) {
      std::copy(x.values().begin() + i * plane,
                x.values().begin() + (i + 1) * plane,
                out.values().begin() + (i * repeats + b) * plane);
    }
  }
  if (grad_active<T>({&x})) {
    mark_output(out);
    auto xd = x.data();
    auto od = out.data();
    active_tape<T>()->record([xd, od, n, repeats, plane] {
      for (size_t i = 0; i < n; ++i) {
        for (size_t b = 0; b < repeats; ++b) {
          const size_t src = (i * repeats + b) * plane;
          for (size_t k = 0; k < plane; ++k) {
            xd->g[i * plane + k] += od->g[src + k];
          }
        }
      }
    });
  }
  return out;
}

// ---- per-channel broadcasts (channel axis 1) --------------------------------

namespace detail {
template <typename T>
void channel_dims(const Tensor<T>& x, const Tensor<T>& p, size_t& n, size_t& c,
                  size_t& inner, const char* op) {
  if (x.rank() < 2 || p.rank() != 1 || p.dim(0) != x.dim(1)) {
    throw std::invalid_argument(std::string(op) + ": input " +
                                shape_str(x.shape()) + " vs per-channel " +
                                shape_str(p.shape()));
  }
  n = x.dim(0);
  c = x.dim(1);
  inner = 1;
  for (size_t i = 2; i < x.rank(); ++i) inner *= x.dim(i);
}
}  // namespace detail

template <typename T>
Tensor<T> sub_broadcast(const Tensor<T>& x, const Tensor<T>& p) {
  size_t n, c, inner;
  detail::channel_dims(x, p, n, c, inner, "sub_broadcast");
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < c; ++j) {
      const T pj = p.values()[j];
      const size_t base = (i * c + j) * inner;
      for (size_t k = 0; k < inner; ++k) {
        out.values()[base + k] = x.values()[base + k] - pj;
      }
    }
  }
  if (grad_active<T>({&x, &p})) {
    mark_output(out);
    auto xd = x.data();
    auto pd = p.data();
    auto od = out.data();
    active_tape<T>()->record([xd, pd, od, n, c, inner] {
      for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < c; ++j) {
          const size_t base = (i * c + j) * inner;
          if (xd->needs_grad) {
            for (size_t k = 0; k < inner; ++k) xd->g[base + k] += od->g[base + k];
          }
          if (pd->needs_grad) {
            double acc = 0.0;
            for (size_t k = 0; k < inner; ++k) acc += od->g[base + k];
            pd->g[j] -= static_cast<T>(acc);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul_broadcast(const Tensor<T>& x, const Tensor<T>& p) {
  size_t n, c, inner;
  detail::channel_dims(x, p, n, c, inner, "mul_broadcast");
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < c; ++j) {
      const T pj = p.values()[j];
      const size_t base = (i * c + j) * inner;
      for (size_t k = 0; k < inner; ++k) {
        out.values()[base + k] = x.values()[base + k] * pj;
      }
    }
  }
  if (grad_active<T>({&x, &p})) {
    mark_output(out);
    auto xd = x.data();
    auto pd = p.data();
    auto od = out.data();
    active_tape<T>()->record([xd, pd, od, n, c, inner] {
      for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < c; ++j) {
          const T pj = pd->v[j];
          const size_t base = (i * c + j) * inner;
          if (xd->needs_grad) {
            for (size_t k = 0; k < inner; ++k) {
              xd->g[base + k] += od->g[base + k] * pj;
            }
          }
          if (pd->needs_grad) {
            double acc = 0.0;
            for (size_t k = 0; k < inner; ++k) {
              acc += static_cast<double>(od->g[base + k]) * xd->v[base + k];
            }
            pd->g[j] += static_cast<T>(acc);
          }
        }
      }
    });
  }
  return out;
}

// ---- convolutions -----------------------------------------------------------

namespace detail {

// Gather same-padded kh*kw patches of one sample into a (C*kh*kw) x (H*W)
// row-major matrix.
template <typename T>
void im2col(const T* x, size_t c_in, size_t h, size_t w, size_t kh, size_t kw,
            T* col) {
  const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  size_t row = 0;
  for (size_t c = 0; c < c_in; ++c) {
    const T* plane = x + c * h * w;
    for (size_t i = 0; i < kh; ++i) {
      for (size_t j = 0; j < kw; ++j, ++row) {
        T* dst = col + row * h * w;
        const long di = static_cast<long>(i) - ph;
        const long dj = static_cast<long>(j) - pw;
        for (long y = 0; y < static_cast<long>(h); ++y) {
          const long sy = y + di;
          if (sy < 0 || sy >= static_cast<long>(h)) {
            std::fill(dst + y * w, dst + (y + 1) * w, T(0));
            continue;
          }
          for (long xw = 0; xw < static_cast<long>(w); ++xw) {
            const long sx = xw + dj;
            dst[y * w + xw] = (sx < 0 || sx >= static_cast<long>(w))
                                  ? T(0)
                                  : plane[sy * w + sx];
          }
        }
      }
    }
  }
}

// Scatter-add the transpose of im2col: accumulate col-shaped gradients back
// onto the padded input positions.
template <typename T>
void col2im_accumulate(const T* col, size_t c_in, size_t h, size_t w, size_t kh,
                       size_t kw, T* gx) {
  const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  size_t row = 0;
  for (size_t c = 0; c < c_in; ++c) {
    T* plane = gx + c * h * w;
    for (size_t i = 0; i < kh; ++i) {
      for (size_t j = 0; j < kw; ++j, ++row) {
        const T* src = col + row * h * w;
        const long di = static_cast<long>(i) - ph;
        const long dj = static_cast<long>(j) - pw;
        for (long y = 0; y < static_cast<long>(h); ++y) {
          const long sy = y + di;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          for (long xw = 0; xw < static_cast<long>(w); ++xw) {
            const long sx = xw + dj;
            if (sx < 0 || sx >= static_cast<long>(w)) continue;
            plane[sy * w + sx] += src[y * w + xw];
          }
        }
      }
    }
  }
}

}  // namespace detail

// Same-padded 2D cross-correlation: x (N,C,H,W), w (O,C,kh,kw), b (O).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 4 || w.rank() != 4 || b.rank() != 1 || x.dim(1) != w.dim(1) ||
      b.dim(0) != w.dim(0)) {
    throw std::invalid_argument("conv2d: shapes " + shape_str(x.shape()) + ", " +
                                shape_str(w.shape()) + ", " +
                                shape_str(b.shape()) + " are incompatible");
  }
  const size_t n = x.dim(0), c_in = x.dim(1), h = x.dim(2), ww = x.dim(3);
  const size_t c_out = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw std::invalid_argument("conv2d: same padding needs odd kernel dims");
  }
  const size_t k = c_in * kh * kw, hw = h * ww;

  Tensor<T> out = Tensor<T>::zeros({n, c_out, h, ww});
  std::vector<T> col(k * hw);
  Eigen::Map<const MatRM<T>> wm(w.values().data(), c_out, k);
  for (size_t i = 0; i < n; ++i) {
    detail::im2col(x.values().data() + i * c_in * hw, c_in, h, ww, kh, kw,
                   col.data());
    Eigen::Map<const MatRM<T>> cm(col.data(), k, hw);
    Eigen::Map<MatRM<T>> om(out.values().data() + i * c_out * hw, c_out, hw);
    om.noalias() = wm * cm;
    for (size_t o = 0; o < c_out; ++o) {
      om.row(o).array() += b.values()[o];
    }
  }

  if (grad_active<T>({&x, &w, &b})) {
    mark_output(out);
    auto xd = x.data();
    auto wd = w.data();
    auto bd = b.data();
    auto od = out.data();
    active_tape<T>()->record([xd, wd, bd, od, n, c_in, h, ww, c_out, kh, kw] {
      const size_t k = c_in * kh * kw, hw = h * ww;
      std::vector<T> col(k * hw), colg(k * hw);
      Eigen::Map<const MatRM<T>> wm(wd->v.data(), c_out, k);
      for (size_t i = 0; i < n; ++i) {
        Eigen::Map<const MatRM<T>> gom(od->g.data() + i * c_out * hw, c_out, hw);
        if (wd->needs_grad || xd->needs_grad) {
          detail::im2col(xd->v.data() + i * c_in * hw, c_in, h, ww, kh, kw,
                         col.data());
        }
        if (wd->needs_grad) {
          Eigen::Map<const MatRM<T>> cm(col.data(), k, hw);
          Eigen::Map<MatRM<T>> gwm(wd->g.data(), c_out, k);
          gwm.noalias() += gom * cm.transpose();
        }
        if (bd->needs_grad) {
          for (size_t o = 0; o < c_out; ++o) {
            double acc = 0.0;
            const T* row = od->g.data() + (i * c_out + o) * hw;
            for (size_t j = 0; j < hw; ++j) acc += row[j];
            bd->g[o] += static_cast<T>(acc);
          }
        }
        if (xd->needs_grad) {
          Eigen::Map<MatRM<T>> gcm(colg.data(), k, hw);
          gcm.noalias() = wm.transpose() * gom;
          detail::col2im_accumulate(colg.data(), c_in, h, ww, kh, kw,
                                    xd->g.data() + i * c_in * hw);
        }
      }
    });
  }
  return out;
}

// 1D convolution as a height-1 2D convolution: x (N,C,T), w (O,C,k), b (O).
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 3 || w.rank() != 3) {
    throw std::invalid_argument("conv1d: expected rank-3 input and weight");
  }
  Tensor<T> x4 = reshape(x, {x.dim(0), x.dim(1), size_t(1), x.dim(2)});
  Tensor<T> w4 = reshape(w, {w.dim(0), w.dim(1), size_t(1), w.dim(2)});
  Tensor<T> y4 = conv2d(x4, w4, b);
  return reshape(y4, {y4.dim(0), y4.dim(1), y4.dim(3)});
}

// ---- dense ------------------------------------------------------------------

// x (N,F), w (O,F), b (O). Sequential per-output accumulation in double, so
// appending zero-weighted features never perturbs existing sums.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || x.dim(1) != w.dim(1) ||
      w.dim(0) != b.dim(0)) {
    throw std::invalid_argument("linear: shapes " + shape_str(x.shape()) + ", " +
                                shape_str(w.shape()) + ", " +
                                shape_str(b.shape()) + " are incompatible");
  }
  const size_t n = x.dim(0), f = x.dim(1), o = w.dim(0);
  Tensor<T> out = Tensor<T>::zeros({n, o});
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < o; ++j) {
      double acc = static_cast<double>(b.values()[j]);
      const T* xr = x.values().data() + i * f;
      const T* wr = w.values().data() + j * f;
      for (size_t s = 0; s < f; ++s) acc += static_cast<double>(xr[s]) * wr[s];
      out.values()[i * o + j] = static_cast<T>(acc);
    }
  }
  if (grad_active<T>({&x, &w, &b})) {
    mark_output(out);
    auto xd = x.data();
    auto wd = w.data();
    auto bd = b.data();
    auto od = out.data();
    active_tape<T>()->record([xd, wd, bd, od, n, f, o] {
      for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < o; ++j) {
          const T go = od->g[i * o + j];
          if (go == T(0)) continue;
          if (bd->needs_grad) bd->g[j] += go;
          const T* xr = xd->v.data() + i * f;
          const T* wr = wd->v.data() + j * f;
          if (xd->needs_grad) {
            T* gx = xd->g.data() + i * f;
            for (size_t s = 0; s < f; ++s) gx[s] += go * wr[s];
          }
          if (wd->needs_grad) {
            T* gw = wd->g.data() + j * f;
            for (size_t s = 0; s < f; ++s) gw[s] += go * xr[s];
          }
        }
      }
    });
  }
  return out;
}

// ---- pooling ----------------------------------------------------------------

// Max over non-overlapping length-L windows of the last axis; ties take the
// first index so gradients are deterministic.
template <typename T>
Tensor<T> maxpool_time(const Tensor<T>& x, size_t pool) {
  if (pool < 1) throw std::invalid_argument("maxpool_time: pool must be >= 1");
  const size_t w = x.dim(x.rank() - 1);
  if (w < pool) {
    throw std::invalid_argument("maxpool_time: axis length " +
                                std::to_string(w) + " < pool " +
                                std::to_string(pool));
  }
  const size_t w_out = w / pool;
  const size_t rows = x.numel() / w;
  Shape out_shape = x.shape();
  out_shape.back() = w_out;
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  std::vector<uint32_t> argmax(rows * w_out);
  for (size_t r = 0; r < rows; ++r) {
    const T* src = x.values().data() + r * w;
    for (size_t j = 0; j < w_out; ++j) {
      size_t best = j * pool;
      for (size_t s = 1; s < pool; ++s) {
        if (src[j * pool + s] > src[best]) best = j * pool + s;
      }
      out.values()[r * w_out + j] = src[best];
      argmax[r * w_out + j] = static_cast<uint32_t>(best);
    }
  }
  if (grad_active<T>({&x})) {
    mark_output(out);
    auto xd = x.data();
    auto od = out.data();
    active_tape<T>()->record([xd, od, rows, w, w_out, am = std::move(argmax)] {
      for (size_t r = 0; r < rows; ++r) {
        for (size_t j = 0; j < w_out; ++j) {
          xd->g[r * w + am[r * w_out + j]] += od->g[r * w_out + j];
        }
      }
    });
  }
  return out;
}

// Mean over S x Tw windows of the two trailing axes of an (N,C,H,W) tensor.
template <typename T>
Tensor<T> avgpool2d(const Tensor<T>& x, size_t s, size_t tw, size_t stride_s,
                    size_t stride_t) {
  if (x.rank() != 4) throw std::invalid_argument("avgpool2d: expected rank 4");
  const size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (s < 1 || tw < 1 || stride_s < 1 || stride_t < 1 || s > h || tw > w) {
    throw std::invalid_argument("avgpool2d: window " + std::to_string(s) + "x" +
                                std::to_string(tw) + " does not fit " +
                                shape_str(x.shape()));
  }
  const size_t r_out = (h - s) / stride_s + 1;
  const size_t c_out = (w - tw) / stride_t + 1;
  Tensor<T> out = Tensor<T>::zeros({n, c, r_out, c_out});
  const double denom = static_cast<double>(s * tw);
  for (size_t i = 0; i < n * c; ++i) {
    const T* plane = x.values().data() + i * h * w;
    T* dst = out.values().data() + i * r_out * c_out;
    for (size_t r = 0; r < r_out; ++r) {
      for (size_t q = 0; q < c_out; ++q) {
        double acc = 0.0;
        for (size_t dy = 0; dy < s; ++dy) {
          const T* row = plane + (r * stride_s + dy) * w + q * stride_t;
          for (size_t dx = 0; dx < tw; ++dx) acc += row[dx];
        }
        dst[r * c_out + q] = static_cast<T>(acc / denom);
      }
    }
  }
  if (grad_active<T>({&x})) {
    mark_output(out);
    auto xd = x.data();
    auto od = out.data();
    active_tape<T>()->record(
        [xd, od, n, c, h, w, s, tw, stride_s, stride_t, r_out, c_out, denom] {
          for (size_t i = 0; i < n * c; ++i) {
            T* gx = xd->g.data() + i * h * w;
            const T* go = od->g.data() + i * r_out * c_out;
            for (size_t r = 0; r < r_out; ++r) {
              for (size_t q = 0; q < c_out; ++q) {
                const T spread = static_cast<T>(go[r * c_out + q] / denom);
                for (size_t dy = 0; dy < s; ++dy) {
                  T* row = gx + (r * stride_s + dy) * w + q * stride_t;
                  for (size_t dx = 0; dx < tw; ++dx) row[dx] += spread;
                }
              }
            }
          }
        });
  }
  return out;
}

// Mean over the trailing time axis: (N,C,T) -> (N,C).
template <typename T>
Tensor<T> global_avg_pool_time(const Tensor<T>& x) {
  if (x.rank() != 3) {
    throw std::invalid_argument("global_avg_pool_time: expected rank 3");
  }
  const size_t n = x.dim(0), c = x.dim(1), t = x.dim(2);
  Tensor<T> out = Tensor<T>::zeros({n, c});
  for (size_t i = 0; i < n * c; ++i) {
    double acc = 0.0;
    const T* src = x.values().data() + i * t;
    for (size_t j = 0; j < t; ++j) acc += src[j];
    out.values()[i] = static_cast<T>(acc / t);
  }
  if (grad_active<T>({&x})) {
    mark_output(out);
    auto xd = x.data();
    auto od = out.data();
    active_tape<T>()->record([xd, od, n, c, t] {
      for (size_t i = 0; i < n * c; ++i) {
        const T spread = od->g[i] / static_cast<T>(t);
        T* gx = xd->g.data() + i * t;
        for (size_t j = 0; j < t; ++j) gx[j] += spread;
      }
    });
  }
  return out;
}

// ---- regularization ---------------------------------------------------------

// Inverted dropout: zero with probability p and scale survivors by 1/(1-p)
// during training; identity in eval mode.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) {
    throw std::invalid_argument("dropout: p must be in [0,1)");
  }
  if (!training || p == 0.0) return x;
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  std::vector<T> mask(x.numel());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  for (size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rand_unit(rng) >= p ? keep_scale : T(0);
    out.values()[i] = x.values()[i] * mask[i];
  }
  if (grad_active<T>({&x})) {
    mark_output(out);
    auto xd = x.data();
    auto od = out.data();
    active_tape<T>()->record([xd, od, m = std::move(mask)] {
      for (size_t i = 0; i < xd->v.size(); ++i) xd->g[i] += od->g[i] * m[i];
    });
  }
  return out;
}

// ---- loss -------------------------------------------------------------------

// Mean softmax cross-entropy over the batch, stabilized by the row max.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits,
                                const std::vector<int>& labels) {
  if (logits.rank() != 2 || labels.size() != logits.dim(0)) {
    throw std::invalid_argument("softmax_cross_entropy: logits " +
                                shape_str(logits.shape()) + " vs " +
                                std::to_string(labels.size()) + " labels");
  }
  const size_t n = logits.dim(0), c = logits.dim(1);
  for (int y : labels) {
    if (y < 0 || static_cast<size_t>(y) >= c) {
      throw std::invalid_argument("softmax_cross_entropy: label " +
                                  std::to_string(y) + " out of range");
    }
  }
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const T* row = logits.values().data() + i * c;
    T m = row[0];
    for (size_t j = 1; j < c; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (size_t j = 0; j < c; ++j) z += std::exp(static_cast<double>(row[j] - m));
    total += std::log(z) + static_cast<double>(m) -
             static_cast<double>(row[labels[i]]);
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total / n));
  if (grad_active<T>({&logits})) {
    mark_output(out);
    auto ld = logits.data();
    auto od = out.data();
    active_tape<T>()->record([ld, od, labels, n, c] {
      const T go = od->g[0];
      for (size_t i = 0; i < n; ++i) {
        const T* row = ld->v.data() + i * c;
        T m = row[0];
        for (size_t j = 1; j < c; ++j) m = std::max(m, row[j]);
        double z = 0.0;
        for (size_t j = 0; j < c; ++j) {
          z += std::exp(static_cast<double>(row[j] - m));
        }
        for (size_t j = 0; j < c; ++j) {
          const double soft = std::exp(static_cast<double>(row[j] - m)) / z;
          const double delta = j == static_cast<size_t>(labels[i]) ? 1.0 : 0.0;
          ld->g[i * c + j] += static_cast<T>(go * (soft - delta) / n);
        }
      }
    });
  }
  return out;
}

}  // namespace sonar::nn
