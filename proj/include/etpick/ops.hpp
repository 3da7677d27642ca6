#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "etpick/tensor.hpp"

// Forward and backward kernels for the operator set the picker network is
// built from. All kernels are pure functions over dense (C,D,H,W) tensors;
// the autodiff tape in tape.hpp wires them together.
namespace etpick::ops {

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

template <typename T>
void check_4d(const Tensor<T>& t, const char* what) {
    if (t.ndim() != 4) throw std::invalid_argument(std::string(what) + " must be 4-d");
}

// ---------------------------------------------------------------------------
// conv3: cross-correlation, cubic kernel, zero padding, stride 1 or 2.
// x (Ci,D,H,W), w (Co,Ci,k,k,k), b (Co) -> y (Co,D',H',W')
//
// The stride-1 path copies the input into an explicitly zero-padded buffer
// so every (ky,kx) tap becomes one constant-offset axpy over a whole plane:
// no bounds checks in the hot loop and long spans for the vectorizer. The
// few junk columns between padded rows are discarded on copy-out.
// ---------------------------------------------------------------------------

namespace detail {

// channelwise zero-padded copy; planes get `slack` extra elements so tap
// reads past the last row stay in-bounds
template <typename T>
std::vector<T> pad_channels(const Tensor<T>& x, int pad, int& pd, int& ph, int& pw) {
    const int c = x.dim(0), d = x.dim(1), h = x.dim(2), w = x.dim(3);
    pd = d + 2 * pad;
    ph = h + 2 * pad;
    pw = w + 2 * pad;
    const std::int64_t pplane = static_cast<std::int64_t>(ph) * pw;
    std::vector<T> out(static_cast<std::size_t>(c) * pd * pplane + 64, T(0));
    for (int ic = 0; ic < c; ++ic)
        for (int z = 0; z < d; ++z) {
            T* dst = out.data() + (static_cast<std::int64_t>(ic) * pd + z + pad) * pplane +
                     static_cast<std::int64_t>(pad) * pw + pad;
            const T* src = &x.data[static_cast<std::size_t>(x.idx4(ic, z, 0, 0))];
            for (int yy = 0; yy < h; ++yy)
                std::copy(src + static_cast<std::int64_t>(yy) * w,
                          src + static_cast<std::int64_t>(yy) * w + w,
                          dst + static_cast<std::int64_t>(yy) * pw);
        }
    return out;
}

// rows re-pitched to `pitch` with zero fill (so offsets into padded planes
// line up); planes keep their row count
template <typename T>
std::vector<T> repitch_rows(const Tensor<T>& t, int pitch) {
    const int c = t.dim(0), d = t.dim(1), h = t.dim(2), w = t.dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(h) * pitch;
    std::vector<T> out(static_cast<std::size_t>(c) * d * plane + 64, T(0));
    for (int ic = 0; ic < c; ++ic)
        for (int z = 0; z < d; ++z) {
            T* dst = out.data() + (static_cast<std::int64_t>(ic) * d + z) * plane;
            const T* src = &t.data[static_cast<std::size_t>(t.idx4(ic, z, 0, 0))];
            for (int yy = 0; yy < h; ++yy)
                std::copy(src + static_cast<std::int64_t>(yy) * w,
                          src + static_cast<std::int64_t>(yy) * w + w,
                          dst + static_cast<std::int64_t>(yy) * pitch);
        }
    return out;
}

}  // namespace detail

template <typename T>
void conv3_forward_s1(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int pad,
                      Tensor<T>& y) {
    const int ci = x.dim(0), co = w.dim(0), k = w.dim(2);
    const int od = y.dim(1), oh = y.dim(2), ow = y.dim(3);

    int pd, ph, pw;
    const std::vector<T> P = detail::pad_channels(x, pad, pd, ph, pw);
    const std::int64_t pplane = static_cast<std::int64_t>(ph) * pw;

    const int kt = k * k;
    std::vector<int> off(static_cast<std::size_t>(kt));
    for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) off[static_cast<std::size_t>(ky * k + kx)] = ky * pw + kx;

    const std::int64_t span = static_cast<std::int64_t>(oh) * pw;
    std::vector<T> accbuf(static_cast<std::size_t>(span));
    T* __restrict__ acc = accbuf.data();

    for (int oc = 0; oc < co; ++oc) {
        const T bias = b[oc];
        for (int zo = 0; zo < od; ++zo) {
            for (std::int64_t f = 0; f < span; ++f) acc[f] = bias;
            for (int ic = 0; ic < ci; ++ic) {
                const T* base = P.data() + (static_cast<std::int64_t>(ic) * pd + zo) * pplane;
                const T* wk =
                    &w.data[static_cast<std::size_t>(((static_cast<std::int64_t>(oc) * ci + ic) * k) * kt)];
                for (int kz = 0; kz < k; ++kz) {
                    const T* plane = base + static_cast<std::int64_t>(kz) * pplane;
                    const T* wrow = wk + static_cast<std::int64_t>(kz) * kt;
                    for (int t = 0; t < kt; ++t) {
                        const T wv = wrow[t];
                        const T* __restrict__ src = plane + off[static_cast<std::size_t>(t)];
                        for (std::int64_t f = 0; f < span; ++f) acc[f] += wv * src[f];
                    }
                }
            }
            T* dst = &y.data[static_cast<std::size_t>(y.idx4(oc, zo, 0, 0))];
            for (int yo = 0; yo < oh; ++yo)
                std::copy(acc + static_cast<std::int64_t>(yo) * pw,
                          acc + static_cast<std::int64_t>(yo) * pw + ow,
                          dst + static_cast<std::int64_t>(yo) * ow);
        }
    }
}

template <typename T>
void conv3_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                   int stride, int pad, Tensor<T>& y) {
    check_4d(x, "conv3 input");
    if (w.ndim() != 5) throw std::invalid_argument("conv3 weight must be 5-d");
    const int ci = x.dim(0), id = x.dim(1), ih = x.dim(2), iw = x.dim(3);
    const int co = w.dim(0), k = w.dim(2);
    if (w.dim(1) != ci) throw std::invalid_argument("conv3 channel mismatch");
    if (w.dim(3) != k || w.dim(4) != k) throw std::invalid_argument("conv3 kernel must be cubic");
    if (b.numel() != co) throw std::invalid_argument("conv3 bias mismatch");
    if (stride != 1 && stride != 2) throw std::invalid_argument("conv3 stride must be 1 or 2");

    const int od = conv_out_dim(id, k, stride, pad);
    const int oh = conv_out_dim(ih, k, stride, pad);
    const int ow = conv_out_dim(iw, k, stride, pad);
    if (od <= 0 || oh <= 0 || ow <= 0) throw std::invalid_argument("conv3 output is empty");
    y = Tensor<T>({co, od, oh, ow});

    if (stride == 1) {
        conv3_forward_s1(x, w, b, pad, y);
        return;
    }

    // Row-wise accumulation: for each (kz,ky,kx,ci) tap, fused multiply-add
    // over the contiguous x row. The x range [j0,j1) keeps xi in bounds.
    std::vector<T> accbuf(static_cast<std::size_t>(ow));
    T* __restrict__ acc = accbuf.data();
    for (int oc = 0; oc < co; ++oc) {
        const T bias = b[oc];
        for (int zo = 0; zo < od; ++zo) {
            for (int yo = 0; yo < oh; ++yo) {
                for (int j = 0; j < ow; ++j) acc[j] = bias;
                for (int ic = 0; ic < ci; ++ic) {
                    for (int kz = 0; kz < k; ++kz) {
                        const int zi = zo * stride + kz - pad;
                        if (zi < 0 || zi >= id) continue;
                        for (int ky = 0; ky < k; ++ky) {
                            const int yi = yo * stride + ky - pad;
                            if (yi < 0 || yi >= ih) continue;
                            const T* __restrict__ xrow =
                                &x.data[static_cast<std::size_t>(x.idx4(ic, zi, yi, 0))];
                            const T* __restrict__ wrow =
                                &w.data[static_cast<std::size_t>((((static_cast<std::int64_t>(oc) * ci + ic) * k + kz) * k + ky) * k)];
                            for (int kx = 0; kx < k; ++kx) {
                                const T wv = wrow[kx];
                                const int off = kx - pad;
                                int j0 = 0, j1 = ow;
                                if (off < 0) j0 = (-off + stride - 1) / stride;
                                const int maxi = iw - 1 - off;
                                if (maxi < 0) continue;
                                j1 = std::min(j1, maxi / stride + 1);
                                if (stride == 1) {
                                    const T* __restrict__ src = xrow + off;
                                    for (int j = j0; j < j1; ++j) acc[j] += wv * src[j];
                                } else {
                                    for (int j = j0; j < j1; ++j) acc[j] += wv * xrow[j * 2 + off];
                                }
                            }
                        }
                    }
                }
                T* dst = &y.data[static_cast<std::size_t>(y.idx4(oc, zo, yo, 0))];
                std::copy(accbuf.begin(), accbuf.end(), dst);
            }
        }
    }
}

// stride-1 backward on the same padded layout as the forward
template <typename T>
void conv3_backward_s1(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, int pad,
                       Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
    const int ci = x.dim(0), id = x.dim(1), ih = x.dim(2), iw = x.dim(3);
    const int co = w.dim(0), k = w.dim(2);
    const int od = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
    const int kt = k * k;

    const int pd = id + 2 * pad, ph = ih + 2 * pad, pw = iw + 2 * pad;
    const std::int64_t pplane = static_cast<std::int64_t>(ph) * pw;
    const std::int64_t gplane = static_cast<std::int64_t>(oh) * pw;
    const std::int64_t span = gplane;

    std::vector<int> off(static_cast<std::size_t>(kt));
    for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) off[static_cast<std::size_t>(ky * k + kx)] = ky * pw + kx;

    // gy rows re-pitched to the padded width; zero fill keeps junk inert
    const std::vector<T> GP = detail::repitch_rows(gy, pw);

    if (gb) {
        for (int oc = 0; oc < co; ++oc) {
            T s = T(0);
            const T* g = &gy.data[static_cast<std::size_t>(gy.idx4(oc, 0, 0, 0))];
            const std::int64_t n = static_cast<std::int64_t>(od) * oh * ow;
            for (std::int64_t i = 0; i < n; ++i) s += g[i];
            (*gb)[oc] += s;
        }
    }

    if (gx) {
        std::vector<T> GXP(static_cast<std::size_t>(ci) * pd * pplane + 64, T(0));
        for (int ic = 0; ic < ci; ++ic) {
            for (int zo = 0; zo < od; ++zo) {
                for (int oc = 0; oc < co; ++oc) {
                    const T* g = GP.data() + (static_cast<std::int64_t>(oc) * od + zo) * gplane;
                    const T* wk = &w.data[static_cast<std::size_t>(
                        ((static_cast<std::int64_t>(oc) * ci + ic) * k) * kt)];
                    for (int kz = 0; kz < k; ++kz) {
                        T* dplane = GXP.data() +
                                    (static_cast<std::int64_t>(ic) * pd + zo + kz) * pplane;
                        const T* wrow = wk + static_cast<std::int64_t>(kz) * kt;
                        for (int t = 0; t < kt; ++t) {
                            const T wv = wrow[t];
                            T* __restrict__ d = dplane + off[static_cast<std::size_t>(t)];
                            const T* __restrict__ src = g;
                            for (std::int64_t f = 0; f < span; ++f) d[f] += wv * src[f];
                        }
                    }
                }
            }
            // strip the padding ring back into gx
            for (int z = 0; z < id; ++z) {
                const T* srow = GXP.data() + (static_cast<std::int64_t>(ic) * pd + z + pad) * pplane +
                                static_cast<std::int64_t>(pad) * pw + pad;
                T* drow = &gx->data[static_cast<std::size_t>(gx->idx4(ic, z, 0, 0))];
                for (int yy = 0; yy < ih; ++yy)
                    for (int xx = 0; xx < iw; ++xx)
                        drow[static_cast<std::int64_t>(yy) * iw + xx] +=
                            srow[static_cast<std::int64_t>(yy) * pw + xx];
            }
        }
    }

    if (gw) {
        int xpd, xph, xpw;
        const std::vector<T> XP = detail::pad_channels(x, pad, xpd, xph, xpw);
        for (int oc = 0; oc < co; ++oc)
            for (int ic = 0; ic < ci; ++ic) {
                T* gwk = &gw->data[static_cast<std::size_t>(
                    ((static_cast<std::int64_t>(oc) * ci + ic) * k) * kt)];
                for (int kz = 0; kz < k; ++kz) {
                    T* gwrow = gwk + static_cast<std::int64_t>(kz) * kt;
                    for (int zo = 0; zo < od; ++zo) {
                        const T* g = GP.data() + (static_cast<std::int64_t>(oc) * od + zo) * gplane;
                        const T* plane = XP.data() +
                                         (static_cast<std::int64_t>(ic) * pd + zo + kz) * pplane;
                        for (int t = 0; t < kt; ++t) {
                            const T* __restrict__ src = plane + off[static_cast<std::size_t>(t)];
                            const T* __restrict__ gg = g;
                            T s = T(0);
#pragma omp simd reduction(+ : s)
                            for (std::int64_t f = 0; f < span; ++f) s += gg[f] * src[f];
                            gwrow[t] += s;
                        }
                    }
                }
            }
    }
}

// Gradients w.r.t. input, weights and bias. gx/gw/gb must be pre-sized and
// are accumulated into (callers zero them once per backward pass).
template <typename T>
void conv3_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy,
                    int stride, int pad, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
    const int ci = x.dim(0), id = x.dim(1), ih = x.dim(2), iw = x.dim(3);
    const int co = w.dim(0), k = w.dim(2);
    const int od = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);

    if (stride == 1) {
        conv3_backward_s1(x, w, gy, pad, gx, gw, gb);
        return;
    }

    for (int oc = 0; oc < co; ++oc) {
        for (int zo = 0; zo < od; ++zo) {
            for (int yo = 0; yo < oh; ++yo) {
                const T* __restrict__ grow = &gy.data[static_cast<std::size_t>(gy.idx4(oc, zo, yo, 0))];
                if (gb) {
                    T s = T(0);
                    for (int j = 0; j < ow; ++j) s += grow[j];
                    (*gb)[oc] += s;
                }
                for (int ic = 0; ic < ci; ++ic) {
                    for (int kz = 0; kz < k; ++kz) {
                        const int zi = zo * stride + kz - pad;
                        if (zi < 0 || zi >= id) continue;
                        for (int ky = 0; ky < k; ++ky) {
                            const int yi = yo * stride + ky - pad;
                            if (yi < 0 || yi >= ih) continue;
                            const std::size_t wbase =
                                static_cast<std::size_t>((((static_cast<std::int64_t>(oc) * ci + ic) * k + kz) * k + ky) * k);
                            const T* __restrict__ xrow =
                                &x.data[static_cast<std::size_t>(x.idx4(ic, zi, yi, 0))];
                            T* __restrict__ gxrow =
                                gx ? &gx->data[static_cast<std::size_t>(x.idx4(ic, zi, yi, 0))] : nullptr;
                            for (int kx = 0; kx < k; ++kx) {
                                const int off = kx - pad;
                                int j0 = 0, j1 = ow;
                                if (off < 0) j0 = (-off + stride - 1) / stride;
                                const int maxi = iw - 1 - off;
                                if (maxi < 0) continue;
                                j1 = std::min(j1, maxi / stride + 1);
                                if (j0 >= j1) continue;
                                if (gw) {
                                    T s = T(0);
                                    if (stride == 1) {
                                        const T* __restrict__ src = xrow + off;
                                        for (int j = j0; j < j1; ++j) s += grow[j] * src[j];
                                    } else {
                                        for (int j = j0; j < j1; ++j) s += grow[j] * xrow[j * 2 + off];
                                    }
                                    gw->data[wbase + static_cast<std::size_t>(kx)] += s;
                                }
                                if (gxrow) {
                                    const T wv = w.data[wbase + static_cast<std::size_t>(kx)];
                                    if (stride == 1) {
                                        T* __restrict__ dst = gxrow + off;
                                        for (int j = j0; j < j1; ++j) dst[j] += wv * grow[j];
                                    } else {
                                        for (int j = j0; j < j1; ++j) gxrow[j * 2 + off] += wv * grow[j];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// maxpool3: windowed maximum with argmax routing for the gradient.
// ---------------------------------------------------------------------------

template <typename T>
void maxpool3_forward(const Tensor<T>& x, int k, int stride, int pad, Tensor<T>& y,
                      std::vector<std::int64_t>* argmax) {
    check_4d(x, "maxpool3 input");
    if (k < 1 || stride < 1) throw std::invalid_argument("maxpool3 kernel/stride must be >= 1");
    const int c = x.dim(0), id = x.dim(1), ih = x.dim(2), iw = x.dim(3);
    const int od = conv_out_dim(id, k, stride, pad);
    const int oh = conv_out_dim(ih, k, stride, pad);
    const int ow = conv_out_dim(iw, k, stride, pad);
    if (od <= 0 || oh <= 0 || ow <= 0) throw std::invalid_argument("maxpool3 output is empty");
    y = Tensor<T>({c, od, oh, ow});
    if (argmax) argmax->assign(static_cast<std::size_t>(y.numel()), -1);

    std::int64_t oi = 0;
    for (int ch = 0; ch < c; ++ch) {
        for (int zo = 0; zo < od; ++zo) {
            const int z0 = std::max(0, zo * stride - pad);
            const int z1 = std::min(id, zo * stride - pad + k);
            for (int yo = 0; yo < oh; ++yo) {
                const int y0 = std::max(0, yo * stride - pad);
                const int y1 = std::min(ih, yo * stride - pad + k);
                for (int xo = 0; xo < ow; ++xo, ++oi) {
                    const int x0 = std::max(0, xo * stride - pad);
                    const int x1 = std::min(iw, xo * stride - pad + k);
                    T best = -std::numeric_limits<T>::infinity();
                    std::int64_t besti = -1;
                    for (int z = z0; z < z1; ++z)
                        for (int yy = y0; yy < y1; ++yy) {
                            const T* row = &x.data[static_cast<std::size_t>(x.idx4(ch, z, yy, 0))];
                            for (int xx = x0; xx < x1; ++xx)
                                if (row[xx] > best) {
                                    best = row[xx];
                                    besti = x.idx4(ch, z, yy, xx);
                                }
                        }
                    y[oi] = best;
                    if (argmax) (*argmax)[static_cast<std::size_t>(oi)] = besti;
                }
            }
        }
    }
}

template <typename T>
void maxpool3_backward(const std::vector<std::int64_t>& argmax, const Tensor<T>& gy,
                       Tensor<T>& gx) {
    for (std::int64_t i = 0; i < gy.numel(); ++i) {
        const std::int64_t src = argmax[static_cast<std::size_t>(i)];
        if (src >= 0) gx[src] += gy[i];
    }
}

// ---------------------------------------------------------------------------
// upsample2: nearest-neighbor x2 per spatial axis.
// ---------------------------------------------------------------------------

template <typename T>
void upsample2_forward(const Tensor<T>& x, Tensor<T>& y) {
    check_4d(x, "upsample2 input");
    const int c = x.dim(0), d = x.dim(1), h = x.dim(2), w = x.dim(3);
    y = Tensor<T>({c, 2 * d, 2 * h, 2 * w});
    for (int ch = 0; ch < c; ++ch)
        for (int z = 0; z < 2 * d; ++z)
            for (int yy = 0; yy < 2 * h; ++yy) {
                const T* src = &x.data[static_cast<std::size_t>(x.idx4(ch, z / 2, yy / 2, 0))];
                T* dst = &y.data[static_cast<std::size_t>(y.idx4(ch, z, yy, 0))];
                for (int xx = 0; xx < 2 * w; ++xx) dst[xx] = src[xx / 2];
            }
}

template <typename T>
void upsample2_backward(const Tensor<T>& gy, Tensor<T>& gx) {
    const int c = gx.dim(0), d = gx.dim(1), h = gx.dim(2), w = gx.dim(3);
    for (int ch = 0; ch < c; ++ch)
        for (int z = 0; z < 2 * d; ++z)
            for (int yy = 0; yy < 2 * h; ++yy) {
                const T* src = &gy.data[static_cast<std::size_t>(gy.idx4(ch, z, yy, 0))];
                T* dst = &gx.data[static_cast<std::size_t>(gx.idx4(ch, z / 2, yy / 2, 0))];
                for (int xx = 0; xx < 2 * w; ++xx) dst[xx / 2] += src[xx];
            }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename T>
void relu_forward(const Tensor<T>& x, Tensor<T>& y) {
    y = x;
    for (auto& v : y.data) v = v > T(0) ? v : T(0);
}

template <typename T>
void relu_backward(const Tensor<T>& x, const Tensor<T>& gy, Tensor<T>& gx) {
    for (std::int64_t i = 0; i < x.numel(); ++i)
        if (x[i] > T(0)) gx[i] += gy[i];
}

template <typename T>
T sigmoid_scalar(T v) {
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
}

template <typename T>
void sigmoid_forward(const Tensor<T>& x, Tensor<T>& y) {
    y = x;
    for (auto& v : y.data) v = sigmoid_scalar(v);
}

template <typename T>
void sigmoid_backward(const Tensor<T>& y, const Tensor<T>& gy, Tensor<T>& gx) {
    for (std::int64_t i = 0; i < y.numel(); ++i) gx[i] += gy[i] * y[i] * (T(1) - y[i]);
}

// ---------------------------------------------------------------------------
// group normalization over (C/G, D, H, W) groups, per-channel affine.
// Population variance; eps keeps constant groups finite.
// ---------------------------------------------------------------------------

template <typename T>
struct GroupNormStats {
    std::vector<T> mean, inv_std;  // per group
};

template <typename T>
void groupnorm_forward(const Tensor<T>& x, int groups, const Tensor<T>& gain,
                       const Tensor<T>& shift, T eps, Tensor<T>& y,
                       GroupNormStats<T>* stats) {
    check_4d(x, "groupnorm input");
    const int c = x.dim(0);
    if (groups < 1 || c % groups != 0)
        throw std::invalid_argument("groupnorm: G must divide channel count");
    if (gain.numel() != c || shift.numel() != c)
        throw std::invalid_argument("groupnorm: affine params must be per-channel");
    const std::int64_t spatial = x.numel() / c;
    const int cpg = c / groups;
    const std::int64_t n = cpg * spatial;

    y = Tensor<T>(x.shape);
    if (stats) {
        stats->mean.assign(static_cast<std::size_t>(groups), T(0));
        stats->inv_std.assign(static_cast<std::size_t>(groups), T(0));
    }
    for (int g = 0; g < groups; ++g) {
        const std::int64_t base = static_cast<std::int64_t>(g) * cpg * spatial;
        double sum = 0.0, sq = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            const double v = static_cast<double>(x[base + i]);
            sum += v;
            sq += v * v;
        }
        const double mean = sum / static_cast<double>(n);
        const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
        const T m = static_cast<T>(mean);
        const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
        if (stats) {
            stats->mean[static_cast<std::size_t>(g)] = m;
            stats->inv_std[static_cast<std::size_t>(g)] = istd;
        }
        for (int cc = 0; cc < cpg; ++cc) {
            const int ch = g * cpg + cc;
            const T a = gain[ch], b = shift[ch];
            const std::int64_t cbase = static_cast<std::int64_t>(ch) * spatial;
            for (std::int64_t i = 0; i < spatial; ++i)
                y[cbase + i] = a * ((x[cbase + i] - m) * istd) + b;
        }
    }
}

template <typename T>
void groupnorm_backward(const Tensor<T>& x, int groups, const Tensor<T>& gain,
                        const GroupNormStats<T>& stats, const Tensor<T>& gy,
                        Tensor<T>* gx, Tensor<T>* ggain, Tensor<T>* gshift) {
    const int c = x.dim(0);
    const std::int64_t spatial = x.numel() / c;
    const int cpg = c / groups;
    const std::int64_t n = cpg * spatial;

    for (int g = 0; g < groups; ++g) {
        const T m = stats.mean[static_cast<std::size_t>(g)];
        const T istd = stats.inv_std[static_cast<std::size_t>(g)];
        // accumulate d/dxhat sums for the group
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int cc = 0; cc < cpg; ++cc) {
            const int ch = g * cpg + cc;
            const std::int64_t cbase = static_cast<std::int64_t>(ch) * spatial;
            const T a = gain[ch];
            double sg = 0.0, sgx = 0.0;
            for (std::int64_t i = 0; i < spatial; ++i) {
                const double dy = static_cast<double>(gy[cbase + i]);
                const double xhat = static_cast<double>((x[cbase + i] - m) * istd);
                const double dxhat = dy * static_cast<double>(a);
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
                sg += dy;
                sgx += dy * xhat;
            }
            if (gshift) (*gshift)[ch] += static_cast<T>(sg);
            if (ggain) (*ggain)[ch] += static_cast<T>(sgx);
        }
        if (gx) {
            const double inv_n = 1.0 / static_cast<double>(n);
            for (int cc = 0; cc < cpg; ++cc) {
                const int ch = g * cpg + cc;
                const std::int64_t cbase = static_cast<std::int64_t>(ch) * spatial;
                const T a = gain[ch];
                for (std::int64_t i = 0; i < spatial; ++i) {
                    const double xhat = static_cast<double>((x[cbase + i] - m) * istd);
                    const double dxhat = static_cast<double>(gy[cbase + i]) * static_cast<double>(a);
                    const double d =
                        (dxhat - inv_n * (sum_dxhat + xhat * sum_dxhat_xhat)) * static_cast<double>(istd);
                    (*gx)[cbase + i] += static_cast<T>(d);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// add / concat
// ---------------------------------------------------------------------------

template <typename T>
void add_forward(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& y) {
    if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
    y = a;
    for (std::int64_t i = 0; i < y.numel(); ++i) y[i] += b[i];
}

template <typename T>
void concat_channels_forward(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& y) {
    check_4d(a, "concat input");
    check_4d(b, "concat input");
    if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw std::invalid_argument("concat_channels: spatial shape mismatch");
    y = Tensor<T>({a.dim(0) + b.dim(0), a.dim(1), a.dim(2), a.dim(3)});
    std::copy(a.data.begin(), a.data.end(), y.data.begin());
    std::copy(b.data.begin(), b.data.end(), y.data.begin() + a.data.size());
}

}  // namespace etpick::ops
