// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "reganie/core/image_io.hpp"
#include "reganie/core/rng.hpp"

namespace reganie::toyworld {

struct ValidationError : TensorError {
    using TensorError::TensorError;
};
struct NoShapeError : TensorError {
    using TensorError::TensorError;
};

enum class ShapeKind { Disk, Rectangle };

inline std::string shape_kind_name(ShapeKind k) {
    return k == ShapeKind::Disk ? "disk" : "rectangle";
}

inline ShapeKind shape_kind_from(const std::string& s) {
    if (s == "disk") return ShapeKind::Disk;
    if (s == "rectangle") return ShapeKind::Rectangle;
    throw ValidationError("unknown shape_kind: " + s);
}

// One scene: a single antialiased shape on a solid background. size is the
// full extent (diameter / side) as a fraction of image width. All fractions
// must keep the shape fully inside the canvas.
struct SceneSpec {
    ShapeKind shape_kind = ShapeKind::Disk;
    double center_x = 0.5;
    double center_y = 0.5;
    double size = 0.25;
    double hue = 0.0;
    double bg_hue = 0.5;

    void validate() const {
        auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
        if (!in(center_x, 0.15, 0.85)) throw ValidationError("SceneSpec.center_x out of [0.15,0.85]");
        if (!in(center_y, 0.15, 0.85)) throw ValidationError("SceneSpec.center_y out of [0.15,0.85]");
        if (!in(size, 0.1, 0.4)) throw ValidationError("SceneSpec.size out of [0.1,0.4]");
        if (!(hue >= 0.0 && hue < 1.0)) throw ValidationError("SceneSpec.hue out of [0,1)");
        if (!(bg_hue >= 0.0 && bg_hue < 1.0)) throw ValidationError("SceneSpec.bg_hue out of [0,1)");
        const double half = size / 2.0;
        if (center_x - half < 0.01 || center_x + half > 0.99 || center_y - half < 0.01 ||
            center_y + half > 0.99)
            throw ValidationError("SceneSpec.size: shape not fully inside canvas");
    }

    double attr(const std::string& name) const {
        if (name == "cx") return center_x;
        if (name == "cy") return center_y;
        if (name == "size") return size;
        if (name == "hue") return hue;
        throw ValidationError("unknown attribute: " + name);
    }
};

enum class Glyph { Cross, Ring, Stripe };

inline std::string glyph_name(Glyph g) {
    switch (g) {
        case Glyph::Cross: return "cross";
        case Glyph::Ring: return "ring";
        default: return "stripe";
    }
}

// Out-of-domain content the generator never saw: a small solid glyph stamped
// over the scene.
struct OverlaySpec {
    Glyph glyph = Glyph::Ring;
    double x = 0.5;
    double y = 0.5;
    double scale = 0.1;  // glyph extent as fraction of width
    double r = 1.0, g = -1.0, b = -1.0;

    void validate() const {
        if (!(scale >= 0.05 && scale <= 0.15)) throw ValidationError("OverlaySpec.scale out of [0.05,0.15]");
        const double half = scale / 2.0;
        if (x - half < 0.0 || x + half > 1.0 || y - half < 0.0 || y + half > 1.0)
            throw ValidationError("OverlaySpec.position: overlay outside canvas");
        for (double v : {r, g, b})
            if (!(v >= -1.0 && v <= 1.0)) throw ValidationError("OverlaySpec.color out of [-1,1]");
    }
};

// --- color ------------------------------------------------------------------

// hue in [0,1), s/v in [0,1]; output RGB in [-1,1].
inline void hsv_to_rgb(double hue, double s, double v, double rgb[3]) {
    const double h6 = hue * 6.0;
    const int i = (int)h6 % 6;
    const double f = h6 - std::floor(h6);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    double r, g, b;
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    rgb[0] = r * 2 - 1;
    rgb[1] = g * 2 - 1;
    rgb[2] = b * 2 - 1;
}

// RGB in [-1,1] -> hue in [0,1); returns chroma via out param.
inline double rgb_to_hue(double r, double g, double b, double* chroma = nullptr) {
    r = (r + 1) / 2;
    g = (g + 1) / 2;
    b = (b + 1) / 2;
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    const double c = mx - mn;
    if (chroma) *chroma = c;
    if (c < 1e-9) return 0.0;
    double h;
    if (mx == r) h = std::fmod((g - b) / c + 6.0, 6.0);
    else if (mx == g) h = (b - r) / c + 2.0;
    else h = (r - g) / c + 4.0;
    return h / 6.0;
}

inline double hue_dist(double a, double b) {
    double d = std::fabs(a - b);
    return std::min(d, 1.0 - d);
}

inline constexpr double kFgSat = 0.85, kFgVal = 0.95;
inline constexpr double kBgSat = 0.55, kBgVal = 0.55;
inline constexpr double kHueThreshold = 0.1;  // foreground if hue dist > this

// --- rendering --------------------------------------------------------------

inline void check_resolution(int res) {
    if (res < 32 || res > 512 || (res & (res - 1)) != 0)
        throw ValidationError("resolution must be a power of two in [32,512]");
}

namespace detail {

// Coverage of the shape at a supersampled point (fractions of width/height).
inline bool inside_shape(const SceneSpec& s, double fx, double fy) {
    const double half = s.size / 2.0;
    if (s.shape_kind == ShapeKind::Rectangle)
        return std::fabs(fx - s.center_x) <= half && std::fabs(fy - s.center_y) <= half;
    const double dx = fx - s.center_x, dy = fy - s.center_y;
    return dx * dx + dy * dy <= half * half;
}

}  // namespace detail

// Deterministic render: 2x supersampling then box downsample.
template <typename T = double>
Tensor<T> render_scene(const SceneSpec& spec, int res) {
    spec.validate();
    check_resolution(res);
    double fg[3], bg[3];
    hsv_to_rgb(spec.hue, kFgSat, kFgVal, fg);
    hsv_to_rgb(spec.bg_hue, kBgSat, kBgVal, bg);
    Tensor<T> img({3, res, res});
    T* p = img.ptr();
    const int ss = 2 * res;
    for (int h = 0; h < res; ++h)
        for (int w = 0; w < res; ++w) {
            double cov = 0;
            for (int sh = 0; sh < 2; ++sh)
                for (int sw = 0; sw < 2; ++sw) {
                    const double fy = ((2 * h + sh) + 0.5) / ss;
                    const double fx = ((2 * w + sw) + 0.5) / ss;
                    if (detail::inside_shape(spec, fx, fy)) cov += 0.25;
                }
            for (int c = 0; c < 3; ++c)
                p[((int64_t)c * res + h) * res + w] = (T)(cov * fg[c] + (1 - cov) * bg[c]);
        }
    return img;
}

// --- attribute oracle -------------------------------------------------------

struct AttrEstimate {
    ShapeKind shape_kind = ShapeKind::Disk;
    double center_x = 0, center_y = 0;
    double size = 0;
    double hue = 0;
    double confidence = 0;

    double attr(const std::string& name) const {
        if (name == "cx") return center_x;
        if (name == "cy") return center_y;
        if (name == "size") return size;
        if (name == "hue") return hue;
        throw ValidationError("unknown attribute: " + name);
    }
};

// Analytic stand-in for the pretrained attribute regressors: background hue
// from the image corners, foreground = pixels whose hue is further than
// kHueThreshold from it, then centroid / area / mean hue of that mask.
template <typename T>
AttrEstimate estimate_attributes(const Tensor<T>& img) {
    check(img.ndim() == 3 && img.dim(0) == 3, "estimate_attributes: need [3,H,W]");
    const int H = img.dim(1), W = img.dim(2);
    const T* p = img.ptr();
    auto px = [&](int c, int h, int w) { return (double)p[((int64_t)c * H + h) * W + w]; };
    auto hue_at = [&](int h, int w) {
        return rgb_to_hue(px(0, h, w), px(1, h, w), px(2, h, w));
    };

    // background hue: circular mean over a corner patch
    double sx = 0, sy = 0;
    const int m = std::max(2, H / 16);
    for (int h = 0; h < m; ++h)
        for (int w = 0; w < m; ++w)
            for (auto [hh, ww] : {std::pair{h, w}, {h, W - 1 - w}, {H - 1 - h, w}, {H - 1 - h, W - 1 - w}}) {
                const double a = hue_at(hh, ww) * 2 * M_PI;
                sx += std::cos(a);
                sy += std::sin(a);
            }
    const double bg_hue = std::fmod(std::atan2(sy, sx) / (2 * M_PI) + 1.0, 1.0);

    double cx = 0, cy = 0, area = 0, hx = 0, hy = 0, dist_sum = 0;
    int min_h = H, max_h = -1, min_w = W, max_w = -1;
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
            const double hu = hue_at(h, w);
            const double d = hue_dist(hu, bg_hue);
            if (d > kHueThreshold) {
                area += 1;
                cx += w + 0.5;
                cy += h + 0.5;
                const double a = hu * 2 * M_PI;
                hx += std::cos(a);
                hy += std::sin(a);
                dist_sum += d;
                min_h = std::min(min_h, h);
                max_h = std::max(max_h, h);
                min_w = std::min(min_w, w);
                max_w = std::max(max_w, w);
            }
        }
    if (area < 8) throw NoShapeError("no-shape: no detectable foreground region");

    AttrEstimate e;
    e.center_x = cx / area / W;
    e.center_y = cy / area / H;
    e.hue = std::fmod(std::atan2(hy, hx) / (2 * M_PI) + 1.0, 1.0);
    const double bbox = (double)(max_h - min_h + 1) * (max_w - min_w + 1);
    const double fill = area / bbox;
    e.shape_kind = fill > 0.9 ? ShapeKind::Rectangle : ShapeKind::Disk;
    e.size = e.shape_kind == ShapeKind::Rectangle ? std::sqrt(area) / W
                                                  : 2.0 * std::sqrt(area / M_PI) / W;
    e.confidence = std::min(1.0, std::max(0.0, (dist_sum / area - kHueThreshold) / 0.3));
    return e;
}

// --- overlays ---------------------------------------------------------------

namespace detail {

inline bool inside_glyph(const OverlaySpec& o, double fx, double fy) {
    const double dx = fx - o.x, dy = fy - o.y;
    const double half = o.scale / 2.0;
    switch (o.glyph) {
        case Glyph::Ring: {
            const double rr = dx * dx + dy * dy;
            return rr <= half * half && rr >= (0.55 * half) * (0.55 * half);
        }
        case Glyph::Cross: {
            const double bar = 0.3 * half;
            return (std::fabs(dx) <= bar && std::fabs(dy) <= half) ||
                   (std::fabs(dy) <= bar && std::fabs(dx) <= half);
        }
        default:  // Stripe
            return std::fabs(dy) <= 0.3 * half && std::fabs(dx) <= half;
    }
}

}  // namespace detail

// Hard-composites the glyph (no blending: idempotent, off-mask pixels are
// bitwise untouched). Returns the composited image and the binary mask [H,W].
template <typename T>
std::pair<Tensor<T>, Tensor<uint8_t>> apply_overlay(const Tensor<T>& img, const OverlaySpec& o) {
    o.validate();
    check(img.ndim() == 3 && img.dim(0) == 3, "apply_overlay: need [3,H,W]");
    const int H = img.dim(1), W = img.dim(2);
    Tensor<T> out = img.clone();
    Tensor<uint8_t> mask({H, W});
    const double col[3] = {o.r, o.g, o.b};
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
            double cov = 0;
            for (int sh = 0; sh < 2; ++sh)
                for (int sw = 0; sw < 2; ++sw) {
                    const double fy = ((2 * h + sh) + 0.5) / (2 * H);
                    const double fx = ((2 * w + sw) + 0.5) / (2 * W);
                    if (detail::inside_glyph(o, fx, fy)) cov += 0.25;
                }
            if (cov >= 0.5) {
                mask[(int64_t)h * W + w] = 1;
                for (int c = 0; c < 3; ++c) out.ptr()[((int64_t)c * H + h) * W + w] = (T)col[c];
            }
        }
    return {std::move(out), std::move(mask)};
}

// --- sampling ---------------------------------------------------------------

inline SceneSpec sample_spec(Rng& rng) {
    SceneSpec s;
    s.shape_kind = rng.uniform() < 0.5 ? ShapeKind::Disk : ShapeKind::Rectangle;
    s.center_x = rng.uniform(0.15, 0.85);
    s.center_y = rng.uniform(0.15, 0.85);
    // keep the shape inside the canvas with 1% margin
    const double max_size =
        std::min(0.4, 2.0 * std::min({s.center_x, s.center_y, 1 - s.center_x, 1 - s.center_y}) - 0.02);
    s.size = rng.uniform(0.1, max_size);
    s.hue = rng.uniform();
    // keep foreground separable from background for the oracle
    do {
        s.bg_hue = rng.uniform();
    } while (hue_dist(s.hue, s.bg_hue) < 0.15);
    return s;
}

inline OverlaySpec sample_overlay(Rng& rng) {
    OverlaySpec o;
    const double r = rng.uniform();
    o.glyph = r < 1.0 / 3 ? Glyph::Cross : (r < 2.0 / 3 ? Glyph::Ring : Glyph::Stripe);
    o.scale = rng.uniform(0.05, 0.15);
    o.x = rng.uniform(o.scale / 2, 1 - o.scale / 2);
    o.y = rng.uniform(o.scale / 2, 1 - o.scale / 2);
    o.r = rng.uniform(-1, 1);
    o.g = rng.uniform(-1, 1);
    o.b = rng.uniform(-1, 1);
    return o;
}

template <typename T = double>
std::vector<std::pair<Tensor<T>, SceneSpec>> sample_dataset(int n, uint64_t seed, int res) {
    if (n < 1) throw ValidationError("sample_dataset: n must be >= 1");
    Rng rng(seed);
    std::vector<std::pair<Tensor<T>, SceneSpec>> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        SceneSpec s = sample_spec(rng);
        out.emplace_back(render_scene<T>(s, res), s);
    }
    return out;
}

// --- dataset export ---------------------------------------------------------

inline nlohmann::json spec_to_json(const SceneSpec& s) {
    return {{"shape_kind", shape_kind_name(s.shape_kind)}, {"cx", s.center_x},
            {"cy", s.center_y},                            {"size", s.size},
            {"hue", s.hue},                                {"bg_hue", s.bg_hue}};
}

inline SceneSpec spec_from_json(const nlohmann::json& j) {
    SceneSpec s;
    s.shape_kind = shape_kind_from(j.at("shape_kind").get<std::string>());
    s.center_x = j.at("cx").get<double>();
    s.center_y = j.at("cy").get<double>();
    s.size = j.at("size").get<double>();
    s.hue = j.at("hue").get<double>();
    s.bg_hue = j.at("bg_hue").get<double>();
    return s;
}

template <typename T>
void export_dataset(const std::string& dir,
                    const std::vector<std::pair<Tensor<T>, SceneSpec>>& data) {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir + "/manifest.jsonl");
    check(manifest.good(), "cannot write manifest in " + dir);
    char name[64];
    for (size_t i = 0; i < data.size(); ++i) {
        std::snprintf(name, sizeof name, "img_%05zu.ppm", i);
        write_ppm(dir + "/" + name, data[i].first);
        nlohmann::json j = spec_to_json(data[i].second);
        j["file"] = name;
        manifest << j.dump() << "\n";
    }
}

}  // namespace reganie::toyworld
