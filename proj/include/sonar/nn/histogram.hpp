#pragma once

#include <Eigen/Dense>

#include "sonar/nn/ops.hpp"
#include "sonar/nn/tensor.hpp"

namespace sonar::nn {

// Differentiable soft-binning: each of B bins per input channel votes with a
// radial basis response exp(-gamma^2 (x - mu)^2), averaged over an S x Tw
// window. centers/widths are (B, D) tensors; output channels are laid out
// b * D + d. gamma enters squared, so its sign never matters.
template <typename T>
struct HistogramLayer {
  size_t bins = 16;
  size_t channels = 0;
  Tensor<T> centers;  // (B, D)
  Tensor<T> widths;   // (B, D)
  size_t window_s = 0;  // 0 means the full input extent (global)
  size_t window_t = 0;
  size_t stride_s = 0;  // 0 means stride == window
  size_t stride_t = 0;
};

// Evenly spaced centers on [0,1] (mu_b = (b+0.5)/B) and widths gamma = B,
// which makes adjacent responses cross at exp(-1/4). Deterministic.
template <typename T>
HistogramLayer<T> init_histogram(size_t bins, size_t channels) {
  if (bins < 1) throw std::invalid_argument("init_histogram: bins must be >= 1");
  if (channels < 1) {
    throw std::invalid_argument("init_histogram: channels must be >= 1");
  }
  HistogramLayer<T> layer;
  layer.bins = bins;
  layer.channels = channels;
  std::vector<T> mu(bins * channels), gamma(bins * channels);
  for (size_t b = 0; b < bins; ++b) {
    for (size_t d = 0; d < channels; ++d) {
      mu[b * channels + d] = static_cast<T>((b + 0.5) / bins);
      gamma[b * channels + d] = static_cast<T>(bins);
    }
  }
  layer.centers = Tensor<T>::from_values({bins, channels}, std::move(mu));
  layer.widths = Tensor<T>::from_values({bins, channels}, std::move(gamma));
  layer.centers.set_requires_grad(true);
  layer.widths.set_requires_grad(true);
  return layer;
}

namespace detail {

template <typename T>
void hist_window_dims(const Tensor<T>& x, const HistogramLayer<T>& layer,
                      size_t& s, size_t& tw, size_t& ss, size_t& st,
                      size_t& r_out, size_t& c_out) {
  const size_t h = x.dim(2), w = x.dim(3);
  s = layer.window_s == 0 ? h : layer.window_s;
  tw = layer.window_t == 0 ? w : layer.window_t;
  ss = layer.stride_s == 0 ? s : layer.stride_s;
  st = layer.stride_t == 0 ? tw : layer.stride_t;
  if (s > h || tw > w) {
    throw std::invalid_argument("histogram window " + std::to_string(s) + "x" +
                                std::to_string(tw) + " exceeds input " +
                                shape_str(x.shape()));
  }
  r_out = (h - s) / ss + 1;
  c_out = (w - tw) / st + 1;
}

}  // namespace detail

// Direct evaluation with a hand-derived backward pass. x is (N, D, H, W),
// output (N, B*D, R, C).
template <typename T>
Tensor<T> hist_forward_direct(const Tensor<T>& x, HistogramLayer<T>& layer) {
  if (x.rank() != 4 || x.dim(1) != layer.channels) {
    throw std::invalid_argument("hist_forward_direct: input " +
                                shape_str(x.shape()) + " vs " +
                                std::to_string(layer.channels) + " channels");
  }
  const size_t n = x.dim(0), d_ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  const size_t bins = layer.bins;
  size_t s, tw, ss, st, r_out, c_out;
  detail::hist_window_dims(x, layer, s, tw, ss, st, r_out, c_out);

  Tensor<T> out = Tensor<T>::zeros({n, bins * d_ch, r_out, c_out});
  const double denom = static_cast<double>(s * tw);
  std::vector<T> win(s * tw), e(s * tw);
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  Eigen::Map<Arr> wm(win.data(), static_cast<Eigen::Index>(win.size()));
  Eigen::Map<Arr> em(e.data(), static_cast<Eigen::Index>(e.size()));

  for (size_t i = 0; i < n; ++i) {
    for (size_t d = 0; d < d_ch; ++d) {
      const T* plane = x.values().data() + (i * d_ch + d) * h * w;
      for (size_t r = 0; r < r_out; ++r) {
        for (size_t q = 0; q < c_out; ++q) {
          for (size_t dy = 0; dy < s; ++dy) {
            const T* row = plane + (r * ss + dy) * w + q * st;
            std::copy(row, row + tw, win.data() + dy * tw);
          }
          for (size_t b = 0; b < bins; ++b) {
            const T mu = layer.centers.values()[b * d_ch + d];
            const T ga = layer.widths.values()[b * d_ch + d];
            em = (-(ga * ga) * (wm - mu).square()).exp();
            const double vote = em.template cast<double>().sum() / denom;
            out.values()[((i * bins * d_ch + b * d_ch + d) * r_out + r) * c_out +
                         q] = static_cast<T>(vote);
          }
        }
      }
    }
  }

  if (grad_active<T>({&x, &layer.centers, &layer.widths})) {
    mark_output(out);
    auto xd = x.data();
    auto cd = layer.centers.data();
    auto wd = layer.widths.data();
    auto od = out.data();
    active_tape<T>()->record([xd, cd, wd, od, n, d_ch, h, w, bins, s, tw, ss,
                              st, r_out, c_out, denom] {
      // The responses are recomputed here instead of being saved; the window
      // pass is cheap relative to holding N*B*D*S*T activations.
      using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
      const auto len = static_cast<Eigen::Index>(s * tw);
      std::vector<T> win(s * tw), scratch(s * tw), gwin(s * tw);
      Eigen::Map<Arr> wm(win.data(), len);
      Eigen::Map<Arr> diff_resp(scratch.data(), len);
      Eigen::Map<Arr> gw(gwin.data(), len);
      for (size_t i = 0; i < n; ++i) {
        for (size_t d = 0; d < d_ch; ++d) {
          const T* plane = xd->v.data() + (i * d_ch + d) * h * w;
          T* gplane = xd->needs_grad ? xd->g.data() + (i * d_ch + d) * h * w
                                     : nullptr;
          for (size_t r = 0; r < r_out; ++r) {
            for (size_t q = 0; q < c_out; ++q) {
              for (size_t dy = 0; dy < s; ++dy) {
                const T* row = plane + (r * ss + dy) * w + q * st;
                std::copy(row, row + tw, win.data() + dy * tw);
              }
              gw.setZero();
              bool touched = false;
              for (size_t b = 0; b < bins; ++b) {
                const T go = od->g[((i * bins * d_ch + b * d_ch + d) * r_out + r) *
                                   c_out + q];
                if (go == T(0)) continue;
                touched = true;
                const T mu = cd->v[b * d_ch + d];
                const T ga = wd->v[b * d_ch + d];
                const T gsq = ga * ga;
                // dY/dmu = (1/ST) sum 2 gamma^2 (x-mu) E
                // dY/dgamma = (1/ST) sum -2 gamma (x-mu)^2 E
                // dY/dx_k = -(1/ST) 2 gamma^2 (x-mu) E
                diff_resp = (wm - mu) * (-gsq * (wm - mu).square()).exp();
                const double s1 = diff_resp.template cast<double>().sum();
                if (cd->needs_grad) {
                  cd->g[b * d_ch + d] +=
                      static_cast<T>(go * 2.0 * gsq * s1 / denom);
                }
                if (wd->needs_grad) {
                  const double s2 = ((wm - mu) * diff_resp)
                                        .template cast<double>()
                                        .sum();
                  wd->g[b * d_ch + d] -=
                      static_cast<T>(go * 2.0 * ga * s2 / denom);
                }
                if (gplane) {
                  gw -= (go * T(2) * gsq / static_cast<T>(denom)) * diff_resp;
                }
              }
              if (gplane && touched) {
                for (size_t dy = 0; dy < s; ++dy) {
                  T* row = gplane + (r * ss + dy) * w + q * st;
                  for (size_t dx = 0; dx < tw; ++dx) row[dx] += gwin[dy * tw + dx];
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

// The same map expressed with generic operators: tile channels B times,
// subtract centers, scale by widths, square, negate, exp, average pool.
// Numerically interchangeable with the direct form; kept as a cross-check.
template <typename T>
Tensor<T> hist_forward_factored(const Tensor<T>& x, HistogramLayer<T>& layer) {
  if (x.rank() != 4 || x.dim(1) != layer.channels) {
    throw std::invalid_argument("hist_forward_factored: input " +
                                shape_str(x.shape()) + " vs " +
                                std::to_string(layer.channels) + " channels");
  }
  size_t s, tw, ss, st, r_out, c_out;
  detail::hist_window_dims(x, layer, s, tw, ss, st, r_out, c_out);
  const size_t bd = layer.bins * layer.channels;
  Tensor<T> mu = reshape(layer.centers, {bd});
  Tensor<T> ga = reshape(layer.widths, {bd});
  Tensor<T> tiled = channel_repeat(x, layer.bins);
  Tensor<T> centered = sub_broadcast(tiled, mu);
  Tensor<T> scaled = mul_broadcast(centered, ga);
  Tensor<T> sq = square(scaled);
  Tensor<T> neg = scale(sq, T(-1));
  Tensor<T> resp = exp_t(neg);
  return avgpool2d(resp, s, tw, ss, st);
}

}  // namespace sonar::nn
