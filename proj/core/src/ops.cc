// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/ops.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dwa/errors.h"

namespace dwa::ops {
namespace {

using Inputs = std::span<const Tensor* const>;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(op, "operands have shapes " + shape_string(a.shape()) + " and " +
                             shape_string(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(op, std::string(what) + " must have rank " + std::to_string(rank) +
                             ", got " + shape_string(t.shape()));
  }
}

// Channel layout of a [N, C] or [N, C, H, W] tensor.
struct ChannelLayout {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t spatial = 1;
  std::size_t per_channel() const { return batch * spatial; }
};

ChannelLayout channel_layout(const char* op, const Tensor& x) {
  if (x.rank() != 2 && x.rank() != 4) {
    throw ShapeError(op, "expected [N, C] or [N, C, H, W], got " + shape_string(x.shape()));
  }
  ChannelLayout l;
  l.batch = x.dim(0);
  l.channels = x.dim(1);
  if (x.rank() == 4) l.spatial = x.dim(2) * x.dim(3);
  return l;
}

template <typename Fn>
void for_each_channel(const ChannelLayout& l, Fn&& fn) {
  for (std::size_t n = 0; n < l.batch; ++n) {
    for (std::size_t c = 0; c < l.channels; ++c) {
      const std::size_t base = (n * l.channels + c) * l.spatial;
      for (std::size_t s = 0; s < l.spatial; ++s) fn(c, base + s);
    }
  }
}

// Shifted by each channel's first element so that a channel of identical
// values has exactly that value as its mean.
std::vector<double> channel_means(const ChannelLayout& l, const Tensor& x) {
  std::vector<double> pivot(l.channels, 0.0), mean(l.channels, 0.0);
  if (l.per_channel() == 0) return mean;
  for (std::size_t c = 0; c < l.channels; ++c) pivot[c] = x[c * l.spatial];
  for_each_channel(l, [&](std::size_t c, std::size_t i) { mean[c] += x[i] - pivot[c]; });
  for (std::size_t c = 0; c < l.channels; ++c) {
    mean[c] = pivot[c] + mean[c] / static_cast<double>(l.per_channel());
  }
  return mean;
}

}  // namespace

Var add(Tape& tape, Var a, Var b) {
  require_same_shape("add", tape.value(a), tape.value(b));
  return tape.record(
      "add", {a, b},
      [](Inputs in) {
        Tensor out = *in[0];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*in[1])[i];
        return out;
      },
      [](const BackwardArgs& g) {
        for (Tensor* gi : g.grad_inputs) {
          if (!gi) continue;
          for (std::size_t i = 0; i < gi->size(); ++i) (*gi)[i] += g.grad_output[i];
        }
      });
}

Var sub(Tape& tape, Var a, Var b) {
  require_same_shape("sub", tape.value(a), tape.value(b));
  return tape.record(
      "sub", {a, b},
      [](Inputs in) {
        Tensor out = *in[0];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] -= (*in[1])[i];
        return out;
      },
      [](const BackwardArgs& g) {
        if (Tensor* ga = g.grad_inputs[0]) {
          for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g.grad_output[i];
        }
        if (Tensor* gb = g.grad_inputs[1]) {
          for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] -= g.grad_output[i];
        }
      });
}

Var mul(Tape& tape, Var a, Var b) {
  require_same_shape("mul", tape.value(a), tape.value(b));
  return tape.record(
      "mul", {a, b},
      [](Inputs in) {
        Tensor out = *in[0];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= (*in[1])[i];
        return out;
      },
      [](const BackwardArgs& g) {
        const Tensor& a = *g.inputs[0];
        const Tensor& b = *g.inputs[1];
        if (Tensor* ga = g.grad_inputs[0]) {
          for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g.grad_output[i] * b[i];
        }
        if (Tensor* gb = g.grad_inputs[1]) {
          for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] += g.grad_output[i] * a[i];
        }
      });
}

Var scale(Tape& tape, Var a, double factor) {
  return tape.record(
      "scale", {a},
      [factor](Inputs in) {
        Tensor out = *in[0];
        for (double& v : out.data()) v *= factor;
        return out;
      },
      [factor](const BackwardArgs& g) {
        Tensor& ga = *g.grad_inputs[0];
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * g.grad_output[i];
      });
}

Var add_scalar(Tape& tape, Var a, double offset) {
  return tape.record(
      "add_scalar", {a},
      [offset](Inputs in) {
        Tensor out = *in[0];
        for (double& v : out.data()) v += offset;
        return out;
      },
      [](const BackwardArgs& g) {
        Tensor& ga = *g.grad_inputs[0];
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.grad_output[i];
      });
}

Var sum(Tape& tape, Var a) {
  return tape.record(
      "sum", {a},
      [](Inputs in) {
        double s = 0.0;
        for (double v : in[0]->data()) s += v;
        return Tensor::scalar(s);
      },
      [](const BackwardArgs& g) {
        const double go = g.grad_output[0];
        for (double& v : g.grad_inputs[0]->data()) v += go;
      });
}

Var square_diff_sum(Tape& tape, Var a, Var b) {
  require_same_shape("square_diff_sum", tape.value(a), tape.value(b));
  return tape.record(
      "square_diff_sum", {a, b},
      [](Inputs in) {
        double s = 0.0;
        for (std::size_t i = 0; i < in[0]->size(); ++i) {
          const double d = (*in[0])[i] - (*in[1])[i];
          s += d * d;
        }
        return Tensor::scalar(s);
      },
      [](const BackwardArgs& g) {
        const Tensor& a = *g.inputs[0];
        const Tensor& b = *g.inputs[1];
        const double go = g.grad_output[0];
        for (std::size_t i = 0; i < a.size(); ++i) {
          const double d = 2.0 * go * (a[i] - b[i]);
          if (g.grad_inputs[0]) (*g.grad_inputs[0])[i] += d;
          if (g.grad_inputs[1]) (*g.grad_inputs[1])[i] -= d;
        }
      });
}

Var norm(Tape& tape, Var a) {
  return tape.record(
      "norm", {a}, [](Inputs in) { return Tensor::scalar(l2_norm(in[0]->data())); },
      [](const BackwardArgs& g) {
        const double n = g.output[0];
        if (n == 0.0) return;
        const double go = g.grad_output[0] / n;
        const Tensor& a = *g.inputs[0];
        Tensor& ga = *g.grad_inputs[0];
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += go * a[i];
      });
}

Var affine(Tape& tape, Var x, Var w, Var b) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(w);
  const Tensor& bv = tape.value(b);
  require_rank("affine", xv, 2, "input");
  require_rank("affine", wv, 2, "weight");
  require_rank("affine", bv, 1, "bias");
  if (wv.dim(1) != xv.dim(1) || bv.dim(0) != wv.dim(0)) {
    throw ShapeError("affine", "input " + shape_string(xv.shape()) + ", weight " +
                                   shape_string(wv.shape()) + ", bias " +
                                   shape_string(bv.shape()));
  }
  return tape.record(
      "affine", {x, w, b},
      [](Inputs in) {
        const Tensor& x = *in[0];
        const Tensor& w = *in[1];
        const Tensor& b = *in[2];
        const std::size_t n = x.dim(0), din = x.dim(1), dout = w.dim(0);
        std::vector<double> out(n * dout);
        for (std::size_t r = 0; r < n; ++r) {
          const double* xr = x.data().data() + r * din;
          for (std::size_t o = 0; o < dout; ++o) {
            const double* wo = w.data().data() + o * din;
            double acc = b[o];
            for (std::size_t i = 0; i < din; ++i) acc += xr[i] * wo[i];
            out[r * dout + o] = acc;
          }
        }
        return Tensor::unchecked({n, dout}, std::move(out));
      },
      [](const BackwardArgs& g) {
        const Tensor& x = *g.inputs[0];
        const Tensor& w = *g.inputs[1];
        const std::size_t n = x.dim(0), din = x.dim(1), dout = w.dim(0);
        const double* go = g.grad_output.data().data();
        if (Tensor* gx = g.grad_inputs[0]) {
          for (std::size_t r = 0; r < n; ++r) {
            double* gxr = gx->data().data() + r * din;
            for (std::size_t o = 0; o < dout; ++o) {
              const double gro = go[r * dout + o];
              const double* wo = w.data().data() + o * din;
              for (std::size_t i = 0; i < din; ++i) gxr[i] += gro * wo[i];
            }
          }
        }
        if (Tensor* gw = g.grad_inputs[1]) {
          for (std::size_t r = 0; r < n; ++r) {
            const double* xr = x.data().data() + r * din;
            for (std::size_t o = 0; o < dout; ++o) {
              const double gro = go[r * dout + o];
              double* gwo = gw->data().data() + o * din;
              for (std::size_t i = 0; i < din; ++i) gwo[i] += gro * xr[i];
            }
          }
        }
        if (Tensor* gb = g.grad_inputs[2]) {
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t o = 0; o < dout; ++o) (*gb)[o] += go[r * dout + o];
          }
        }
      });
}

Var conv2d(Tape& tape, Var x, Var w, Var b, Padding padding) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(w);
  const Tensor& bv = tape.value(b);
  require_rank("conv2d", xv, 4, "input");
  require_rank("conv2d", wv, 4, "weight");
  require_rank("conv2d", bv, 1, "bias");
  if (wv.dim(1) != xv.dim(1) || wv.dim(2) != wv.dim(3) || bv.dim(0) != wv.dim(0)) {
    throw ShapeError("conv2d", "input " + shape_string(xv.shape()) + ", weight " +
                                   shape_string(wv.shape()) + ", bias " +
                                   shape_string(bv.shape()));
  }
  const std::size_t k = wv.dim(2);
  const std::size_t pad = padding == Padding::kSame ? (k - 1) / 2 : 0;
  if (padding == Padding::kSame && k % 2 == 0) {
    throw ShapeError("conv2d", "same padding needs an odd kernel, got " + std::to_string(k));
  }
  if (xv.dim(2) + 2 * pad < k || xv.dim(3) + 2 * pad < k) {
    throw ShapeError("conv2d", "kernel " + std::to_string(k) + " larger than padded input " +
                                   shape_string(xv.shape()));
  }

  struct Geometry {
    std::size_t n, c, h, w, o, k, pad, oh, ow;
  };
  const Geometry geo{xv.dim(0), xv.dim(1), xv.dim(2), xv.dim(3), wv.dim(0), k, pad,
                     xv.dim(2) + 2 * pad - k + 1, xv.dim(3) + 2 * pad - k + 1};

  // Visits every (output index, input index, weight index) triple that
  // contributes to the convolution.
  auto visit = [geo](auto&& fn) {
    for (std::size_t n = 0; n < geo.n; ++n) {
      for (std::size_t o = 0; o < geo.o; ++o) {
        for (std::size_t y = 0; y < geo.oh; ++y) {
          for (std::size_t xo = 0; xo < geo.ow; ++xo) {
            const std::size_t out_idx = ((n * geo.o + o) * geo.oh + y) * geo.ow + xo;
            for (std::size_t c = 0; c < geo.c; ++c) {
              for (std::size_t ky = 0; ky < geo.k; ++ky) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) -
                                          static_cast<std::ptrdiff_t>(geo.pad);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(geo.h)) continue;
                for (std::size_t kx = 0; kx < geo.k; ++kx) {
                  const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(xo + kx) -
                                            static_cast<std::ptrdiff_t>(geo.pad);
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(geo.w)) continue;
                  const std::size_t in_idx =
                      ((n * geo.c + c) * geo.h + static_cast<std::size_t>(iy)) * geo.w +
                      static_cast<std::size_t>(ix);
                  const std::size_t w_idx = ((o * geo.c + c) * geo.k + ky) * geo.k + kx;
                  fn(out_idx, in_idx, w_idx);
                }
              }
            }
          }
        }
      }
    }
  };

  return tape.record(
      "conv2d", {x, w, b},
      [geo, visit](Inputs in) {
        const double* xd = in[0]->data().data();
        const double* wd = in[1]->data().data();
        const Tensor& bias = *in[2];
        std::vector<double> out(geo.n * geo.o * geo.oh * geo.ow);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = bias[(i / (geo.oh * geo.ow)) % geo.o];
        visit([&](std::size_t oi, std::size_t ii, std::size_t wi) { out[oi] += xd[ii] * wd[wi]; });
        return Tensor::unchecked({geo.n, geo.o, geo.oh, geo.ow}, std::move(out));
      },
      [geo, visit](const BackwardArgs& g) {
        const double* xd = g.inputs[0]->data().data();
        const double* wd = g.inputs[1]->data().data();
        const double* go = g.grad_output.data().data();
        Tensor* gx = g.grad_inputs[0];
        Tensor* gw = g.grad_inputs[1];
        if (gx || gw) {
          double* gxd = gx ? gx->data().data() : nullptr;
          double* gwd = gw ? gw->data().data() : nullptr;
          visit([&](std::size_t oi, std::size_t ii, std::size_t wi) {
            if (gxd) gxd[ii] += go[oi] * wd[wi];
            if (gwd) gwd[wi] += go[oi] * xd[ii];
          });
        }
        if (Tensor* gb = g.grad_inputs[2]) {
          for (std::size_t i = 0; i < g.grad_output.size(); ++i) {
            (*gb)[(i / (geo.oh * geo.ow)) % geo.o] += go[i];
          }
        }
      });
}

Var relu(Tape& tape, Var x) {
  return tape.record(
      "relu", {x},
      [](Inputs in) {
        Tensor out = *in[0];
        for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
        return out;
      },
      [](const BackwardArgs& g) {
        const Tensor& x = *g.inputs[0];
        Tensor& gx = *g.grad_inputs[0];
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (x[i] > 0.0) gx[i] += g.grad_output[i];
        }
      });
}

Var global_avg_pool(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  require_rank("global_avg_pool", xv, 4, "input");
  return tape.record(
      "global_avg_pool", {x},
      [](Inputs in) {
        const Tensor& x = *in[0];
        const std::size_t n = x.dim(0), c = x.dim(1), s = x.dim(2) * x.dim(3);
        std::vector<double> out(n * c, 0.0);
        for (std::size_t i = 0; i < n * c; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < s; ++j) acc += x[i * s + j];
          out[i] = acc / static_cast<double>(s);
        }
        return Tensor::unchecked({n, c}, std::move(out));
      },
      [](const BackwardArgs& g) {
        const Tensor& x = *g.inputs[0];
        const std::size_t nc = x.dim(0) * x.dim(1), s = x.dim(2) * x.dim(3);
        Tensor& gx = *g.grad_inputs[0];
        for (std::size_t i = 0; i < nc; ++i) {
          const double v = g.grad_output[i] / static_cast<double>(s);
          for (std::size_t j = 0; j < s; ++j) gx[i * s + j] += v;
        }
      });
}

Var flatten(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  if (xv.rank() < 1) throw ShapeError("flatten", "scalar input");
  const Shape out_shape{xv.dim(0), xv.size() / xv.dim(0)};
  return tape.record(
      "flatten", {x}, [out_shape](Inputs in) { return in[0]->reshaped(out_shape); },
      [](const BackwardArgs& g) {
        Tensor& gx = *g.grad_inputs[0];
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g.grad_output[i];
      });
}

Var channel_mean(Tape& tape, Var x) {
  const ChannelLayout layout = channel_layout("channel_mean", tape.value(x));
  return tape.record(
      "channel_mean", {x},
      [layout](Inputs in) {
        return Tensor::unchecked({layout.channels}, channel_means(layout, *in[0]));
      },
      [layout](const BackwardArgs& g) {
        Tensor& gx = *g.grad_inputs[0];
        const double inv = 1.0 / static_cast<double>(layout.per_channel());
        for_each_channel(layout,
                         [&](std::size_t c, std::size_t i) { gx[i] += g.grad_output[c] * inv; });
      });
}

Var channel_var(Tape& tape, Var x) {
  const ChannelLayout layout = channel_layout("channel_var", tape.value(x));
  auto means = [layout](const Tensor& x) { return channel_means(layout, x); };
  return tape.record(
      "channel_var", {x},
      [layout, means](Inputs in) {
        const std::vector<double> mean = means(*in[0]);
        std::vector<double> var(layout.channels, 0.0);
        for_each_channel(layout, [&](std::size_t c, std::size_t i) {
          const double d = (*in[0])[i] - mean[c];
          var[c] += d * d;
        });
        for (double& v : var) v /= static_cast<double>(layout.per_channel());
        return Tensor::unchecked({layout.channels}, std::move(var));
      },
      [layout, means](const BackwardArgs& g) {
        const Tensor& x = *g.inputs[0];
        const std::vector<double> mean = means(x);
        Tensor& gx = *g.grad_inputs[0];
        const double k = 2.0 / static_cast<double>(layout.per_channel());
        for_each_channel(layout, [&](std::size_t c, std::size_t i) {
          gx[i] += g.grad_output[c] * k * (x[i] - mean[c]);
        });
      });
}

Var batch_norm(Tape& tape, Var x, Var mean, Var var, Var gamma, Var beta, double eps) {
  const ChannelLayout layout = channel_layout("batch_norm", tape.value(x));
  for (Var v : {mean, var, gamma, beta}) {
    const Tensor& t = tape.value(v);
    if (t.rank() != 1 || t.dim(0) != layout.channels) {
      throw ShapeError("batch_norm", "per-channel operand of shape " + shape_string(t.shape()) +
                                         " for " + std::to_string(layout.channels) + " channels");
    }
  }
  if (!(eps > 0.0)) throw InvalidArgument("batch_norm: eps must be positive");
  return tape.record(
      "batch_norm", {x, mean, var, gamma, beta},
      [layout, eps](Inputs in) {
        const Tensor& x = *in[0];
        const Tensor& mu = *in[1];
        const Tensor& var = *in[2];
        const Tensor& gamma = *in[3];
        const Tensor& beta = *in[4];
        std::vector<double> inv_std(layout.channels);
        for (std::size_t c = 0; c < layout.channels; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
        Tensor out = Tensor::unchecked(x.shape(), std::vector<double>(x.size()));
        for_each_channel(layout, [&](std::size_t c, std::size_t i) {
          out[i] = gamma[c] * (x[i] - mu[c]) * inv_std[c] + beta[c];
        });
        return out;
      },
      [layout, eps](const BackwardArgs& g) {
        const Tensor& x = *g.inputs[0];
        const Tensor& mu = *g.inputs[1];
        const Tensor& var = *g.inputs[2];
        const Tensor& gamma = *g.inputs[3];
        const Tensor& go = g.grad_output;
        std::vector<double> inv_std(layout.channels);
        for (std::size_t c = 0; c < layout.channels; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
        std::vector<double> sum_go(layout.channels, 0.0), sum_go_xhat(layout.channels, 0.0);
        for_each_channel(layout, [&](std::size_t c, std::size_t i) {
          sum_go[c] += go[i];
          sum_go_xhat[c] += go[i] * (x[i] - mu[c]) * inv_std[c];
        });
        if (Tensor* gx = g.grad_inputs[0]) {
          for_each_channel(layout, [&](std::size_t c, std::size_t i) {
            (*gx)[i] += go[i] * gamma[c] * inv_std[c];
          });
        }
        for (std::size_t c = 0; c < layout.channels; ++c) {
          if (Tensor* gm = g.grad_inputs[1]) (*gm)[c] -= gamma[c] * inv_std[c] * sum_go[c];
          if (Tensor* gv = g.grad_inputs[2]) {
            // d/dvar of (x - mu) (var + eps)^{-1/2} = -(x - mu)/2 (var + eps)^{-3/2}
            (*gv)[c] -= 0.5 * gamma[c] * inv_std[c] * inv_std[c] * sum_go_xhat[c];
          }
          if (Tensor* gg = g.grad_inputs[3]) (*gg)[c] += sum_go_xhat[c];
          if (Tensor* gb = g.grad_inputs[4]) (*gb)[c] += sum_go[c];
        }
      });
}

Var softmax_cross_entropy(Tape& tape, Var logits, std::span<const int> labels) {
  const Tensor& lv = tape.value(logits);
  require_rank("softmax_cross_entropy", lv, 2, "logits");
  if (labels.size() != lv.dim(0)) {
    throw ShapeError("softmax_cross_entropy", std::to_string(labels.size()) + " labels for " +
                                                  std::to_string(lv.dim(0)) + " rows");
  }
  const std::size_t k = lv.dim(1);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw ShapeError("softmax_cross_entropy",
                       "label " + std::to_string(y) + " outside [0, " + std::to_string(k) + ")");
    }
  }
  std::vector<int> owned(labels.begin(), labels.end());
  return tape.record(
      "softmax_cross_entropy", {logits},
      [owned, k](Inputs in) {
        const Tensor& z = *in[0];
        const std::size_t n = z.dim(0);
        double total = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          const double* row = z.data().data() + r * k;
          const double mx = *std::max_element(row, row + k);
          double s = 0.0;
          for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] - mx);
          total += std::log(s) + mx - row[owned[r]];
        }
        return Tensor::scalar(total / static_cast<double>(n));
      },
      [owned, k](const BackwardArgs& g) {
        const Tensor& z = *g.inputs[0];
        const std::size_t n = z.dim(0);
        const double scale_out = g.grad_output[0] / static_cast<double>(n);
        Tensor& gz = *g.grad_inputs[0];
        for (std::size_t r = 0; r < n; ++r) {
          const double* row = z.data().data() + r * k;
          const double mx = *std::max_element(row, row + k);
          double s = 0.0;
          for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] - mx);
          for (std::size_t j = 0; j < k; ++j) {
            const double p = std::exp(row[j] - mx) / s;
            gz[r * k + j] += scale_out * (p - (static_cast<int>(j) == owned[r] ? 1.0 : 0.0));
          }
        }
      });
}

Var soft_cross_entropy(Tape& tape, Var logits, Var targets, double temperature) {
  const Tensor& lv = tape.value(logits);
  require_rank("soft_cross_entropy", lv, 2, "logits");
  require_same_shape("soft_cross_entropy", lv, tape.value(targets));
  if (!(temperature > 0.0)) throw InvalidArgument("soft_cross_entropy: temperature must be > 0");
  const std::size_t k = lv.dim(1);
  auto log_softmax_row = [k, temperature](const double* row, std::vector<double>& out) {
    double mx = row[0] / temperature;
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j] / temperature);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] / temperature - mx);
    const double lse = std::log(s) + mx;
    for (std::size_t j = 0; j < k; ++j) out[j] = row[j] / temperature - lse;
  };
  return tape.record(
      "soft_cross_entropy", {logits, targets},
      [k, log_softmax_row](Inputs in) {
        const Tensor& z = *in[0];
        const Tensor& p = *in[1];
        const std::size_t n = z.dim(0);
        std::vector<double> ls(k);
        double total = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          log_softmax_row(z.data().data() + r * k, ls);
          for (std::size_t j = 0; j < k; ++j) total -= p[r * k + j] * ls[j];
        }
        return Tensor::scalar(total / static_cast<double>(n));
      },
      [k, temperature, log_softmax_row](const BackwardArgs& g) {
        const Tensor& z = *g.inputs[0];
        const Tensor& p = *g.inputs[1];
        const std::size_t n = z.dim(0);
        const double go = g.grad_output[0] / static_cast<double>(n);
        std::vector<double> ls(k);
        for (std::size_t r = 0; r < n; ++r) {
          log_softmax_row(z.data().data() + r * k, ls);
          double mass = 0.0;
          for (std::size_t j = 0; j < k; ++j) mass += p[r * k + j];
          for (std::size_t j = 0; j < k; ++j) {
            if (Tensor* gz = g.grad_inputs[0]) {
              (*gz)[r * k + j] += go * (mass * std::exp(ls[j]) - p[r * k + j]) / temperature;
            }
            if (Tensor* gp = g.grad_inputs[1]) (*gp)[r * k + j] -= go * ls[j];
          }
        }
      });
}

Var slice(Tape& tape, Var flat, std::size_t offset, Shape shape) {
  const Tensor& fv = tape.value(flat);
  const std::size_t count = shape_size(shape);
  if (fv.rank() != 1 || offset + count > fv.size()) {
    throw ShapeError("slice", "range [" + std::to_string(offset) + ", " +
                                  std::to_string(offset + count) + ") outside " +
                                  shape_string(fv.shape()));
  }
  return tape.record(
      "slice", {flat},
      [offset, count, shape](Inputs in) {
        const auto src = in[0]->data().subspan(offset, count);
        return Tensor::unchecked(shape, std::vector<double>(src.begin(), src.end()));
      },
      [offset, count](const BackwardArgs& g) {
        Tensor& gf = *g.grad_inputs[0];
        for (std::size_t i = 0; i < count; ++i) gf[offset + i] += g.grad_output[i];
      });
}

}  // namespace dwa::ops
