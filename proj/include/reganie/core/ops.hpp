// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstring>

#include "reganie/core/autograd.hpp"

namespace reganie {

// ---------------------------------------------------------------------------
// Broadcasting. Only the patterns the networks actually use are supported;
// anything else is a shape error.
// ---------------------------------------------------------------------------

enum class Bcast {
    Same,           // b.shape == a.shape
    Scalar,         // b has one element
    ChannelVec,     // a [N,C,H,W], b [C]
    RowVec,         // a [N,D],     b [D]
    SampleChannel,  // a [N,C,H,W], b [N,C]
    SpatialMap,     // a [N,C,H,W], b [N,1,H,W]
    LeadBatch,      // a [N,...],   b [1,...]
};

inline Bcast classify_bcast(const Shape& a, const Shape& b) {
    if (a == b) return Bcast::Same;
    if (shape_numel(b) == 1) return Bcast::Scalar;
    if (a.size() == 4) {
        if (b.size() == 1 && b[0] == a[1]) return Bcast::ChannelVec;
        if (b.size() == 2 && b[0] == a[0] && b[1] == a[1]) return Bcast::SampleChannel;
        if (b.size() == 4 && b[0] == a[0] && b[1] == 1 && b[2] == a[2] && b[3] == a[3])
            return Bcast::SpatialMap;
        if (b.size() == 4 && b[0] == 1 && b[1] == a[1] && b[2] == a[2] && b[3] == a[3])
            return Bcast::LeadBatch;
    }
    if (a.size() == 2) {
        if (b.size() == 1 && b[0] == a[1]) return Bcast::RowVec;
        if (b.size() == 2 && b[0] == 1 && b[1] == a[1]) return Bcast::LeadBatch;
    }
    throw TensorError("unsupported broadcast " + shape_str(b) + " against " + shape_str(a));
}

template <typename T, typename F>
Tensor<T> bcast_apply(const Tensor<T>& a, const Tensor<T>& b, F f) {
    Bcast k = classify_bcast(a.shape(), b.shape());
    Tensor<T> out(a.shape());
    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* po = out.ptr();
    const int64_t n = a.numel();
    switch (k) {
        case Bcast::Same:
            for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
            break;
        case Bcast::Scalar: {
            const T s = pb[0];
            for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i], s);
            break;
        }
        case Bcast::ChannelVec: {
            const int64_t C = a.dim(1), HW = (int64_t)a.dim(2) * a.dim(3);
            int64_t i = 0;
            for (int64_t nn = 0; nn < a.dim(0); ++nn)
                for (int64_t c = 0; c < C; ++c) {
                    const T s = pb[c];
                    for (int64_t j = 0; j < HW; ++j, ++i) po[i] = f(pa[i], s);
                }
            break;
        }
        case Bcast::RowVec: {
            const int64_t D = a.dim(1);
            int64_t i = 0;
            for (int64_t r = 0; r < a.dim(0); ++r)
                for (int64_t c = 0; c < D; ++c, ++i) po[i] = f(pa[i], pb[c]);
            break;
        }
        case Bcast::SampleChannel: {
            const int64_t C = a.dim(1), HW = (int64_t)a.dim(2) * a.dim(3);
            int64_t i = 0;
            for (int64_t nn = 0; nn < a.dim(0); ++nn)
                for (int64_t c = 0; c < C; ++c) {
                    const T s = pb[nn * C + c];
                    for (int64_t j = 0; j < HW; ++j, ++i) po[i] = f(pa[i], s);
                }
            break;
        }
        case Bcast::SpatialMap: {
            const int64_t C = a.dim(1), HW = (int64_t)a.dim(2) * a.dim(3);
            int64_t i = 0;
            for (int64_t nn = 0; nn < a.dim(0); ++nn)
                for (int64_t c = 0; c < C; ++c) {
                    const T* row = pb + nn * HW;
                    for (int64_t j = 0; j < HW; ++j, ++i) po[i] = f(pa[i], row[j]);
                }
            break;
        }
        case Bcast::LeadBatch: {
            const int64_t inner = shape_numel(b.shape());
            int64_t i = 0;
            for (int64_t nn = 0; nn < a.dim(0); ++nn)
                for (int64_t j = 0; j < inner; ++j, ++i) po[i] = f(pa[i], pb[j]);
            break;
        }
    }
    return out;
}

template <typename T>
Tensor<T> reduce_sum_to_tensor(const Tensor<T>& x, const Shape& target) {
    if (x.shape() == target) return x.clone();
    Bcast k = classify_bcast(x.shape(), target);
    Tensor<T> out(target);
    const T* px = x.ptr();
    T* po = out.ptr();
    const int64_t n = x.numel();
    switch (k) {
        case Bcast::Same:
            break;
        case Bcast::Scalar: {
            T acc = 0;
            for (int64_t i = 0; i < n; ++i) acc += px[i];
            po[0] = acc;
            break;
        }
        case Bcast::ChannelVec: {
            const int64_t C = x.dim(1), HW = (int64_t)x.dim(2) * x.dim(3);
            int64_t i = 0;
            for (int64_t nn = 0; nn < x.dim(0); ++nn)
                for (int64_t c = 0; c < C; ++c) {
                    T acc = 0;
                    for (int64_t j = 0; j < HW; ++j, ++i) acc += px[i];
                    po[c] += acc;
                }
            break;
        }
        case Bcast::RowVec: {
            const int64_t D = x.dim(1);
            int64_t i = 0;
            for (int64_t r = 0; r < x.dim(0); ++r)
                for (int64_t c = 0; c < D; ++c, ++i) po[c] += px[i];
            break;
        }
        case Bcast::SampleChannel: {
            const int64_t C = x.dim(1), HW = (int64_t)x.dim(2) * x.dim(3);
            int64_t i = 0;
            for (int64_t nn = 0; nn < x.dim(0); ++nn)
                for (int64_t c = 0; c < C; ++c) {
                    T acc = 0;
                    for (int64_t j = 0; j < HW; ++j, ++i) acc += px[i];
                    po[nn * C + c] = acc;
                }
            break;
        }
        case Bcast::SpatialMap: {
            const int64_t C = x.dim(1), HW = (int64_t)x.dim(2) * x.dim(3);
            int64_t i = 0;
            for (int64_t nn = 0; nn < x.dim(0); ++nn)
                for (int64_t c = 0; c < C; ++c) {
                    T* row = po + nn * HW;
                    for (int64_t j = 0; j < HW; ++j, ++i) row[j] += px[i];
                }
            break;
        }
        case Bcast::LeadBatch: {
            const int64_t inner = shape_numel(target);
            int64_t i = 0;
            for (int64_t nn = 0; nn < x.dim(0); ++nn)
                for (int64_t j = 0; j < inner; ++j, ++i) po[j] += px[i];
            break;
        }
    }
    return out;
}

template <typename T>
Tensor<T> broadcast_to_tensor(const Tensor<T>& x, const Shape& target) {
    Tensor<T> ones = Tensor<T>::full(target, T(1));
    return bcast_apply<T>(ones, x, [](T, T b) { return b; });
}

// ---------------------------------------------------------------------------
// Primitive ops
// ---------------------------------------------------------------------------

template <typename T>
Var<T> reduce_sum_to(const Var<T>& x, Shape target);
template <typename T>
Var<T> broadcast_to(const Var<T>& x, Shape target);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    Tensor<T> v = bcast_apply<T>(a.value(), b.value(), [](T x, T y) { return x + y; });
    Shape bs = b.shape();
    return Var<T>::op(
        std::move(v),
        [bs](const Var<T>& g, const std::vector<char>& need, std::vector<Var<T>>& out) {
            if (need[0]) out[0] = g;
            if (need[1]) out[1] = reduce_sum_to(g, bs);
        },
        a, b);
}

template <typename T>
Var<T> add_grads(const Var<T>& a, const Var<T>& b) {
    return add(a, b);
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    Tensor<T> v = bcast_apply<T>(a.value(), b.value(), [](T x, T y) { return x * y; });
    return Var<T>::op(
        std::move(v),
        [a, b](const Var<T>& g, const std::vector<char>& need, std::vector<Var<T>>& out) {
            if (need[0]) out[0] = mul(g, b);
            if (need[1]) out[1] = reduce_sum_to(mul(g, broadcast_to(a, g.shape())), b.shape());
        },
        a, b);
}

template <typename T>
Var<T> scale(const Var<T>& a, double c) {
    Tensor<T> v(a.shape());
    const T* pa = a.value().ptr();
    T* po = v.ptr();
    const T cc = (T)c;
    for (int64_t i = 0; i < v.numel(); ++i) po[i] = pa[i] * cc;
    return Var<T>::op(
        std::move(v),
        [c](const Var<T>& g, const std::vector<char>& need, std::vector<Var<T>>& out) {
            if (need[0]) out[0] = scale(g, c);
        },
        a);
}

template <typename T>
Var<T> neg(const Var<T>& a) {
    return scale(a, -1.0);
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    return add(a, neg(b));
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, double c) {
    Tensor<T> v(a.shape());
    const T* pa = a.value().ptr();
    T* po = v.ptr();
    for (int64_t i = 0; i < v.numel(); ++i) po[i] = pa[i] + (T)c;
    return Var<T>::op(
        std::move(v),
        [](const Var<T>& g, const std::vector<char>& need, std::vector<Var<T>>& out) {
            if (need[0]) out[0] = g;
        },
        a);
}

template <typename T>
Var<T> reduce_sum_to(const Var<T>& x, Shape target) {
    if (x.shape() == target) return x;
    Shape xs = x.shape();
    return Var<T>::op(
        reduce_sum_to_tensor(x.value(), target),
        [xs](const Var<T>& g, const std::vector<char>& need, std::vector<Var<T>>& out) {
            if (need[0]) out[0] = broadcast_to(g, xs);
        },
        x);
}

template <typename T>
Var<T> broadcast_to(const Var<T>& x, Shape target) {
    if (x.shape() == target) return x;
    Shape xs = x.shape();
    return Var<T>::op(
        broadcast_to_tensor(x.value(), target),
        [xs](const Var<T>& g, const std::vector<char>& need, std::vector<Var<T>>& out) {
            if (need[0]) out[0] = reduce_sum_to(g, xs);
        },
        x);
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape s) {
    Shape xs = x.shape();
    // Allow one -1 dimension.
    int64_t known = 1;
    int neg_at = -1;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == -1) neg_at = (int)i;
        else known *= s[i];
    }
    if (neg_at >= 0) s[neg_at] = (int)(x.value().numel() / known);
    return Var<T>::op(
        x.value().view(s),
        [xs](const Var<T>& g, const std::vector<char>& need, std::vector<Var<T>>& out) {
            if (need[0]) out[0] = reshape(g, xs);
        },
        x);
}

template <typename T>
Var<T> sum_all(const Var<T>& x) {
    return reduce_sum_to(x, Shape{1});
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
    return scale(sum_all(x), 1.0 / (double)x.value().numel());
}

// --- matmul / transpose ----------------------------------------------------

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Tensor<T> matmul_tensor(const Tensor<T>& a, const Tensor<T>& b) {
    check(a.ndim() == 2 && b.ndim() == 2, "matmul: need 2-d operands");
    check(a.dim(1) == b.dim(0), "matmul: inner dims " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    Tensor<T> out({a.dim(0), b.dim(1)});
    Eigen::Map<const EMat<T>> ma(a.ptr(), a.dim(0), a.dim(1));
    Eigen::Map<const EMat<T>> mb(b.ptr(), b.dim(0), b.dim(1));
    Eigen::Map<EMat<T>> mo(out.ptr(), out.dim(0), out.dim(1));
    mo.noalias() = ma * mb;
    return out;
}

template <typename T>
Var<T> transpose2d(const Var<T>& x);

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    return Var<T>::op(
        matmul_tensor(a.value(), b.value()),
        [a, b](const Var<T>& g, const std::vector<char>& need, std::vector<Var<T>>& out) {
            if (need[0]) out[0] = matmul(g, transpose2d(b));
            if (need[1]) out[1] = matmul(transpose2d(a), g);
        },
        a, b);
}

template <typename T>
Var<T> transpose2d(const Var<T>& x) {
    check(x.value().ndim() == 2, "transpose2d: need 2-d");
    Tensor<T> out({x.value().dim(1), x.value().dim(0)});
    Eigen::Map<const EMat<T>> mx(x.value().ptr(), x.value().dim(0), x.value().dim(1));
    Eigen::Map<EMat<T>> mo(out.ptr(), out.dim(0), out.dim(1));
    mo = mx.transpose();
    return Var<T>::op(
        std::move(out),
        [](const Var<T>& g, const std::vector<char>& need, std::vector<Var<T>>& out_) {
            if (need[0]) out_[0] = transpose2d(g);
        },
        x);
}

// --- im2col convolution plumbing -------------------------------------------

struct ConvGeom {
    int N, C, H, W, k, stride, pad, Ho, Wo;
    int64_t L() const { return (int64_t)Ho * Wo; }
};

inline ConvGeom conv_geom(const Shape& x, int k, int stride, int pad) {
    check(x.size() == 4, "conv: need NCHW input, got " + shape_str(x));
    ConvGeom g;
    g.N = x[0]; g.C = x[1]; g.H = x[2]; g.W = x[3];
    g.k = k; g.stride = stride; g.pad = pad;
    g.Ho = (g.H + 2 * pad - k) / stride + 1;
    g.Wo = (g.W + 2 * pad - k) / stride + 1;
    check(g.Ho >= 1 && g.Wo >= 1, "conv: kernel larger than padded input");
    return g;
}

template <typename T>
Tensor<T> unfold_tensor(const Tensor<T>& x, const ConvGeom& g) {
    const int64_t L = g.L();
    Tensor<T> cols({g.C * g.k * g.k, (int)(g.N * L)});
    const T* px = x.ptr();
    T* pc = cols.ptr();
    const int64_t NL = g.N * L;
    for (int c = 0; c < g.C; ++c)
        for (int ki = 0; ki < g.k; ++ki)
            for (int kj = 0; kj < g.k; ++kj) {
                T* row = pc + ((int64_t)(c * g.k + ki) * g.k + kj) * NL;
                for (int n = 0; n < g.N; ++n) {
                    const T* xim = px + ((int64_t)n * g.C + c) * g.H * g.W;
                    T* dst = row + (int64_t)n * L;
                    for (int ho = 0; ho < g.Ho; ++ho) {
                        const int hi = ho * g.stride + ki - g.pad;
                        T* drow = dst + (int64_t)ho * g.Wo;
                        if (hi < 0 || hi >= g.H) {
                            std::memset(drow, 0, sizeof(T) * g.Wo);
                            continue;
                        }
                        const T* xrow = xim + (int64_t)hi * g.W;
                        if (g.stride == 1) {
                            const int wi0 = kj - g.pad;
                            int wo = 0;
                            for (; wo < g.Wo && wi0 + wo < 0; ++wo) drow[wo] = 0;
                            int wo_end = std::min(g.Wo, g.W - wi0);
                            for (; wo < wo_end; ++wo) drow[wo] = xrow[wi0 + wo];
                            for (; wo < g.Wo; ++wo) drow[wo] = 0;
                        } else {
                            for (int wo = 0; wo < g.Wo; ++wo) {
                                const int wi = wo * g.stride + kj - g.pad;
                                drow[wo] = (wi < 0 || wi >= g.W) ? T(0) : xrow[wi];
                            }
                        }
                    }
                }
            }
    return cols;
}

template <typename T>
Tensor<T> fold_tensor(const Tensor<T>& cols, const ConvGeom& g) {
    const int64_t L = g.L();
    const int64_t NL = g.N * L;
    Tensor<T> x({g.N, g.C, g.H, g.W});
    T* px = x.ptr();
    const T* pc = cols.ptr();
    for (int c = 0; c < g.C; ++c)
        for (int ki = 0; ki < g.k; ++ki)
            for (int kj = 0; kj < g.k; ++kj) {
                const T* row = pc + ((int64_t)(c * g.k + ki) * g.k + kj) * NL;
                for (int n = 0; n < g.N; ++n) {
                    T* xim = px + ((int64_t)n * g.C + c) * g.H * g.W;
                    const T* src = row + (int64_t)n * L;
                    for (int ho = 0; ho < g.Ho; ++ho) {
                        const int hi = ho * g.stride + ki - g.pad;
                        if (hi < 0 || hi >= g.H) continue;
                        T* xrow = xim + (int64_t)hi * g.W;
                        const T* srow = src + (int64_t)ho * g.Wo;
                        for (int wo = 0; wo < g.Wo; ++wo) {
                            const int wi = wo * g.stride + kj - g.pad;
                            if (wi >= 0 && wi < g.W) xrow[wi] += srow[wo];
                        }
                    }
                }
            }
    return x;
}

template <typename T>
Var<T> fold(const Var<T>& cols, ConvGeom g);

template <typename T>
Var<T> unfold(const Var<T>& x, ConvGeom g) {
    return Var<T>::op(
        unfold_tensor(x.value(), g),
        [g](const Var<T>& gr, const std::vector<char>& need, std::vector<Var<T>>& out) {
            if (need[0]) out[0] = fold(gr, g);
        },
        x);
}

template <typename T>
Var<T> fold(const Var<T>& cols, ConvGeom g) {
    return Var<T>::op(
        fold_tensor(cols.value(), g),
        [g](const Var<T>& gr, const std::vector<char>& need, std::vector<Var<T>>& out) {
            if (need[0]) out[0] = unfold(gr, g);
        },
        cols);
}

// [Cout, N*L] -> [N, Cout, Ho, Wo]
template <typename T>
Var<T> cols_to_image(const Var<T>& y, int N, int Ho, int Wo);

template <typename T>
Var<T> image_to_cols(const Var<T>& x) {
    const int N = x.value().dim(0), C = x.value().dim(1);
    const int64_t L = (int64_t)x.value().dim(2) * x.value().dim(3);
    const int Ho = x.value().dim(2), Wo = x.value().dim(3);
    Tensor<T> out({C, (int)(N * L)});
    const T* px = x.value().ptr();
    T* po = out.ptr();
    for (int c = 0; c < C; ++c)
        for (int n = 0; n < N; ++n)
            std::memcpy(po + ((int64_t)c * N + n) * L, px + ((int64_t)n * C + c) * L,
                        sizeof(T) * L);
    return Var<T>::op(
        std::move(out),
        [N, Ho, Wo](const Var<T>& g, const std::vector<char>& need, std::vector<Var<T>>& o) {
            if (need[0]) o[0] = cols_to_image(g, N, Ho, Wo);
        },
        x);
}

template <typename T>
Var<T> cols_to_image(const Var<T>& y, int N, int Ho, int Wo) {
    const int Cout = y.value().dim(0);
    const int64_t L = (int64_t)Ho * Wo;
    check((int64_t)y.value().dim(1) == (int64_t)N * L, "cols_to_image: size mismatch");
    Tensor<T> out({N, Cout, Ho, Wo});
    const T* py = y.value().ptr();
    T* po = out.ptr();
    for (int c = 0; c < Cout; ++c)
        for (int n = 0; n < N; ++n)
            std::memcpy(po + ((int64_t)n * Cout + c) * L, py + ((int64_t)c * N + n) * L,
                        sizeof(T) * L);
    return Var<T>::op(
        std::move(out),
        [](const Var<T>& g, const std::vector<char>& need, std::vector<Var<T>>& o) {
            if (need[0]) o[0] = image_to_cols(g);
        },
        y);
}

// Plain convolution: x [N,Cin,H,W], w [Cout,Cin,k,k], bias [Cout] (optional).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int stride = 1,
              int pad = -1) {
    const int k = w.value().dim(2);
    if (pad < 0) pad = k / 2;
    check(w.value().dim(1) == x.value().dim(1),
          "conv2d: channel mismatch " + shape_str(x.shape()) + " vs " + shape_str(w.shape()));
    ConvGeom g = conv_geom(x.shape(), k, stride, pad);
    Var<T> cols = unfold(x, g);
    Var<T> wmat = reshape(w, {w.value().dim(0), -1});
    Var<T> y = cols_to_image(matmul(wmat, cols), g.N, g.Ho, g.Wo);
    if (bias.defined()) y = add(y, bias);
    return y;
}

// --- resampling ------------------------------------------------------------

template <typename T>
Var<T> sumpool2(const Var<T>& x);

template <typename T>
Var<T> upsample2(const Var<T>& x) {
    const auto& s = x.shape();
    check(s.size() == 4, "upsample2: need NCHW");
    const int N = s[0], C = s[1], H = s[2], W = s[3];
    Tensor<T> out({N, C, H * 2, W * 2});
    const T* px = x.value().ptr();
    T* po = out.ptr();
    for (int64_t nc = 0; nc < (int64_t)N * C; ++nc) {
        const T* xi = px + nc * H * W;
        T* oi = po + nc * H * W * 4;
        for (int h = 0; h < H; ++h) {
            T* r0 = oi + (int64_t)(2 * h) * 2 * W;
            for (int w = 0; w < W; ++w) {
                const T v = xi[h * W + w];
                r0[2 * w] = v;
                r0[2 * w + 1] = v;
            }
            std::memcpy(r0 + 2 * W, r0, sizeof(T) * 2 * W);
        }
    }
    return Var<T>::op(
        std::move(out),
        [](const Var<T>& g, const std::vector<char>& need, std::vector<Var<T>>& o) {
            if (need[0]) o[0] = sumpool2(g);
        },
        x);
}

template <typename T>
Var<T> sumpool2(const Var<T>& x) {
    const auto& s = x.shape();
    check(s.size() == 4 && s[2] % 2 == 0 && s[3] % 2 == 0, "sumpool2: need even NCHW");
    const int N = s[0], C = s[1], H = s[2], W = s[3];
    Tensor<T> out({N, C, H / 2, W / 2});
    const T* px = x.value().ptr();
    T* po = out.ptr();
    for (int64_t nc = 0; nc < (int64_t)N * C; ++nc) {
        const T* xi = px + nc * H * W;
        T* oi = po + nc * (H / 2) * (W / 2);
        for (int h = 0; h < H / 2; ++h) {
            const T* r0 = xi + (int64_t)(2 * h) * W;
            const T* r1 = r0 + W;
            for (int w = 0; w < W / 2; ++w)
                oi[h * (W / 2) + w] = r0[2 * w] + r0[2 * w + 1] + r1[2 * w] + r1[2 * w + 1];
        }
    }
    return Var<T>::op(
        std::move(out),
        [](const Var<T>& g, const std::vector<char>& need, std::vector<Var<T>>& o) {
            if (need[0]) o[0] = upsample2(g);
        },
        x);
}

template <typename T>
Var<T> avgpool2(const Var<T>& x) {
    return scale(sumpool2(x), 0.25);
}

// --- pointwise nonlinearities ----------------------------------------------
// Backward multiplies by the derivative captured at forward time, so these are
// first-order differentiable only. The discriminators stay within
// {conv, pool, linear, leaky_relu} so the R1 double-backward path is exact.

template <typename T, typename FwdF, typename DerF>
Var<T> pointwise(const Var<T>& x, FwdF f, DerF df) {
    Tensor<T> v(x.shape());
    Tensor<T> d(x.shape());
    const T* px = x.value().ptr();
    T* pv = v.ptr();
    T* pd = d.ptr();
    for (int64_t i = 0; i < v.numel(); ++i) {
        pv[i] = f(px[i]);
        pd[i] = df(px[i], pv[i]);
    }
    return Var<T>::op(
        std::move(v),
        [d](const Var<T>& g, const std::vector<char>& need, std::vector<Var<T>>& o) {
            if (need[0]) o[0] = mul(g, Var<T>::constant(d));
        },
        x);
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, double slope = 0.2) {
    const T s = (T)slope;
    return pointwise(
        x, [s](T v) { return v >= 0 ? v : s * v; },
        [s](T v, T) { return v >= 0 ? T(1) : s; });
}

template <typename T>
Var<T> tanh_op(const Var<T>& x) {
    return pointwise(
        x, [](T v) { return (T)std::tanh((double)v); },
        [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> sigmoid_op(const Var<T>& x) {
    return pointwise(
        x, [](T v) { return (T)(1.0 / (1.0 + std::exp(-(double)v))); },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> softplus_op(const Var<T>& x) {
    return pointwise(
        x,
        [](T v) {
            const double d = (double)v;
            return (T)(d > 30 ? d : std::log1p(std::exp(-std::abs(d))) + std::max(d, 0.0));
        },
        [](T v, T) { return (T)(1.0 / (1.0 + std::exp(-(double)v))); });
}

template <typename T>
Var<T> abs_op(const Var<T>& x) {
    return pointwise(
        x, [](T v) { return v < 0 ? -v : v; },
        [](T v, T) { return v < 0 ? T(-1) : T(1); });
}

template <typename T>
Var<T> square(const Var<T>& x) {
    return mul(x, x);
}

// y = (x + eps)^(-1/2)
template <typename T>
Var<T> rsqrt_eps(const Var<T>& x, double eps) {
    return pointwise(
        x, [eps](T v) { return (T)(1.0 / std::sqrt((double)v + eps)); },
        [](T, T y) { return (T)(-0.5) * y * y * y; });
}

}  // namespace reganie
