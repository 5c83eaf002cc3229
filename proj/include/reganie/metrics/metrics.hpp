// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <functional>

#include "reganie/inversion/inversion.hpp"
#include "reganie/nn/perceptual.hpp"
#include "reganie/toyworld/toyworld.hpp"

namespace reganie::metrics {

// Mean squared error over all pixels and channels.
inline double l2(const Tensor<double>& a, const Tensor<double>& b) {
    check(a.shape() == b.shape(), "l2: shape mismatch " + shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
    double s = 0;
    for (int64_t i = 0; i < a.numel(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / (double)a.numel();
}

namespace detail {

inline std::vector<double> gaussian_kernel(int win, double sigma = 1.5) {
    std::vector<double> k(win);
    const double c = (win - 1) / 2.0;
    double sum = 0;
    for (int i = 0; i < win; ++i) {
        k[i] = std::exp(-(i - c) * (i - c) / (2 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable valid-mode gaussian filtering of one channel plane.
inline std::vector<double> gauss_filter(const double* p, int h, int w, int win) {
    const auto k = gaussian_kernel(win);
    const int oh = h - win + 1, ow = w - win + 1;
    std::vector<double> tmp((size_t)h * ow), out((size_t)oh * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < win; ++i) s += k[i] * p[y * w + x + i];
            tmp[(size_t)y * ow + x] = s;
        }
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < win; ++i) s += k[i] * tmp[(size_t)(y + i) * ow + x];
            out[(size_t)y * ow + x] = s;
        }
    return out;
}

struct SsimTerms {
    double lum_cs = 0, contrast_structure = 0;  // per-position means
};

// Single-scale SSIM terms for one [3,H,W] image pair in [0,1].
inline SsimTerms ssim_terms(const Tensor<double>& a, const Tensor<double>& b, int win) {
    const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
    const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    SsimTerms t;
    int64_t count = 0;
    for (int ch = 0; ch < c; ++ch) {
        const double* pa = a.ptr() + (int64_t)ch * h * w;
        const double* pb = b.ptr() + (int64_t)ch * h * w;
        std::vector<double> a2((size_t)h * w), b2((size_t)h * w), ab((size_t)h * w);
        for (int64_t i = 0; i < (int64_t)h * w; ++i) {
            a2[i] = pa[i] * pa[i];
            b2[i] = pb[i] * pb[i];
            ab[i] = pa[i] * pb[i];
        }
        auto mu_a = gauss_filter(pa, h, w, win);
        auto mu_b = gauss_filter(pb, h, w, win);
        auto m_a2 = gauss_filter(a2.data(), h, w, win);
        auto m_b2 = gauss_filter(b2.data(), h, w, win);
        auto m_ab = gauss_filter(ab.data(), h, w, win);
        for (size_t i = 0; i < mu_a.size(); ++i) {
            const double va = m_a2[i] - mu_a[i] * mu_a[i];
            const double vb = m_b2[i] - mu_b[i] * mu_b[i];
            const double cov = m_ab[i] - mu_a[i] * mu_b[i];
            const double lum = (2 * mu_a[i] * mu_b[i] + C1) /
                               (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + C1);
            const double cs = (2 * cov + C2) / (va + vb + C2);
            t.lum_cs += lum * cs;
            t.contrast_structure += cs;
            ++count;
        }
    }
    t.lum_cs /= (double)count;
    t.contrast_structure /= (double)count;
    return t;
}

inline Tensor<double> half(const Tensor<double>& x) {
    const int c = x.dim(0), h = x.dim(1) / 2, w = x.dim(2) / 2;
    Tensor<double> o({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                const double* p = x.ptr() + ((int64_t)ch * x.dim(1) + 2 * y) * x.dim(2) + 2 * xx;
                o[((int64_t)ch * h + y) * w + xx] =
                    0.25 * (p[0] + p[1] + p[x.dim(2)] + p[x.dim(2) + 1]);
            }
    return o;
}

}  // namespace detail

// Multi-scale structural similarity on [3,H,W] images in [-1,1]. Three scales
// below 160px (standard five need larger inputs), standard exponent weights
// renormalized over the scales used, result clamped to [0,1].
inline double ms_ssim(const Tensor<double>& a, const Tensor<double>& b) {
    check(a.shape() == b.shape(), "ms_ssim: shape mismatch");
    check(a.ndim() == 3 && a.dim(0) == 3, "ms_ssim: need [3,H,W]");
    const int side = std::min(a.dim(1), a.dim(2));
    check(side >= 32, "ms_ssim: minimum side is 32, got " + std::to_string(side));

    const int scales = side < 160 ? 3 : 5;
    static const double kWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    double wsum = 0;
    for (int s = 0; s < scales; ++s) wsum += kWeights[s];

    // shift to [0,1]
    Tensor<double> x = a.clone(), y = b.clone();
    for (int64_t i = 0; i < x.numel(); ++i) {
        x[i] = (x[i] + 1.0) / 2.0;
        y[i] = (y[i] + 1.0) / 2.0;
    }

    double value = 1.0;
    for (int s = 0; s < scales; ++s) {
        int win = std::min(11, std::min(x.dim(1), x.dim(2)));
        if (win % 2 == 0) --win;
        auto t = detail::ssim_terms(x, y, win);
        const double term = (s == scales - 1) ? t.lum_cs : t.contrast_structure;
        value *= std::pow(std::max(term, 1e-12), kWeights[s] / wsum);
        if (s < scales - 1) {
            x = detail::half(x);
            y = detail::half(y);
        }
    }
    return std::clamp(value, 0.0, 1.0);
}

// Fixed random-feature perceptual distance on [3,H,W] or [N,3,H,W] pairs.
inline double perceptual_distance(const Tensor<double>& a, const Tensor<double>& b) {
    check(a.shape() == b.shape(), "perceptual_distance: shape mismatch");
    static const PerceptualProxy<double> proxy(3, 12, 97);
    NoGradGuard ng;
    Tensor<double> a4 = a, b4 = b;
    if (a.ndim() == 3) {
        a4 = a.view({1, a.dim(0), a.dim(1), a.dim(2)});
        b4 = b.view({1, b.dim(0), b.dim(1), b.dim(2)});
    }
    return proxy(Var<double>::constant(a4), Var<double>::constant(b4)).value()[0];
}

// Cosine similarity of embedding-encoder features. A proxy for identity
// preservation; not equivalent to a trained face-identity metric.
template <typename T>
double identity_proxy(const inversion::InversionWorld<T>& inv, const Tensor<T>& a,
                      const Tensor<T>& b) {
    check(a.shape() == b.shape(), "identity_proxy: shape mismatch");
    NoGradGuard ng;
    auto feat = [&](const Tensor<T>& img) {
        Tensor<T> x = img.ndim() == 3 ? img.view({1, img.dim(0), img.dim(1), img.dim(2)})
                                      : img;
        return inv.embed(Var<T>::constant(x)).value();
    };
    Tensor<T> fa = feat(a), fb = feat(b);
    double dot = 0, na = 0, nb = 0;
    for (int64_t i = 0; i < fa.numel(); ++i) {
        dot += (double)fa[i] * fb[i];
        na += (double)fa[i] * fa[i];
        nb += (double)fb[i] * fb[i];
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb) + 1e-12), -1.0, 1.0);
}

struct EditReport {
    std::string attribute;
    std::vector<double> alpha_grid;
    std::vector<double> mean_delta;   // per alpha
    std::vector<int> n_used;          // per alpha
    int n_failed = 0, n_total = 0;
    bool valid = true;  // false when more than 20% of oracle reads failed
};

inline double attr_value(const toyworld::AttrEstimate& e, const std::string& name) {
    if (name == "cx") return e.center_x;
    if (name == "cy") return e.center_y;
    if (name == "size") return e.size;
    if (name == "hue") return e.hue;
    throw TensorError("unknown attribute: " + name);
}

// Measures how the oracle-perceived attribute of the edited output moves as a
// function of the edit magnitude. `edit_fn(x0, alpha)` returns the system
// under test's output image [3,H,W]. Oracle failures are excluded and counted.
inline EditReport attribute_response(
    const std::function<Tensor<double>(const Tensor<double>&, double)>& edit_fn,
    const std::string& attribute, const std::vector<double>& alpha_grid,
    const std::vector<Tensor<double>>& inputs) {
    check(!alpha_grid.empty() && !inputs.empty(), "attribute_response: empty protocol");
    for (size_t i = 1; i < alpha_grid.size(); ++i)
        check(alpha_grid[i] > alpha_grid[i - 1],
              "attribute_response: alpha grid must be strictly increasing");

    EditReport rep;
    rep.attribute = attribute;
    rep.alpha_grid = alpha_grid;
    rep.mean_delta.assign(alpha_grid.size(), 0.0);
    rep.n_used.assign(alpha_grid.size(), 0);
    for (const auto& x0 : inputs) {
        double base;
        try {
            base = attr_value(toyworld::estimate_attributes(x0), attribute);
        } catch (const toyworld::NoShapeError&) {
            rep.n_failed += (int)alpha_grid.size();
            rep.n_total += (int)alpha_grid.size();
            continue;
        }
        for (size_t gi = 0; gi < alpha_grid.size(); ++gi) {
            ++rep.n_total;
            try {
                const Tensor<double> out = edit_fn(x0, alpha_grid[gi]);
                const double v = attr_value(toyworld::estimate_attributes(out), attribute);
                rep.mean_delta[gi] += v - base;
                ++rep.n_used[gi];
            } catch (const toyworld::NoShapeError&) {
                ++rep.n_failed;
            }
        }
    }
    for (size_t gi = 0; gi < alpha_grid.size(); ++gi)
        if (rep.n_used[gi] > 0) rep.mean_delta[gi] /= rep.n_used[gi];
    rep.valid = rep.n_failed <= 0.2 * rep.n_total;
    return rep;
}

// Median wall-clock milliseconds per call over n runs (n >= 20 enforced).
inline double timing_ms(const std::function<void()>& fn, int n = 20) {
    check(n >= 20, "timing: need at least 20 runs");
    std::vector<double> ms(n);
    for (int i = 0; i < n; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    std::nth_element(ms.begin(), ms.begin() + n / 2, ms.end());
    return ms[n / 2];
}

inline double median(std::vector<double> v) {
    check(!v.empty(), "median of empty set");
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
}

struct ReconReport {
    std::string method;
    double l2 = 0, perceptual = 0, ms_ssim = 0, wall_ms = 0;
};

inline void write_recon_csv(const std::string& path, const std::vector<ReconReport>& rows) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream f(path);
    check(f.good(), "cannot write report: " + path);
    f << "method,l2,perceptual,ms_ssim,wall_ms\n";
    for (const auto& r : rows)
        f << r.method << "," << r.l2 << "," << r.perceptual << "," << r.ms_ssim << ","
          << r.wall_ms << "\n";
}

inline void write_edit_csv(const std::string& path, const std::vector<EditReport>& rows) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream f(path);
    check(f.good(), "cannot write report: " + path);
    f << "method_attribute,alpha,mean_delta,n_used,n_failed,valid\n";
    for (const auto& r : rows)
        for (size_t i = 0; i < r.alpha_grid.size(); ++i)
            f << r.attribute << "," << r.alpha_grid[i] << "," << r.mean_delta[i] << ","
              << r.n_used[i] << "," << r.n_failed << "," << (r.valid ? 1 : 0) << "\n";
}

}  // namespace reganie::metrics
