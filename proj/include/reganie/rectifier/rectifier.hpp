// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "reganie/nn/perceptual.hpp"
#include "reganie/stylegen/stylegen.hpp"

namespace reganie::rectifier {

// ---------------------------------------------------------------------------
// Modulation primitives.
// ---------------------------------------------------------------------------

// Per-position feature gating followed by convolution:
//   out = conv(f * gate, w) + b
// `gate` must match f's full shape.
template <typename T>
Var<T> spatial_modulate(const Var<T>& f, const Var<T>& gate, const Var<T>& w,
                        const Var<T>& b) {
    check(gate.value().shape() == f.value().shape(),
          "spatial_modulate: gate shape " + shape_str(gate.shape()) +
              " does not match feature shape " + shape_str(f.shape()));
    const int k = w.value().dim(2);
    return conv2d(mul(f, gate), w, b, 1, k / 2);
}

// Per-channel scaling followed by convolution:
//   out = conv(f * scale, w) + b
// `scale` is [N, C_in] (or [C_in], broadcast over the batch).
template <typename T>
Var<T> global_modulate(const Var<T>& f, const Var<T>& scale, const Var<T>& w,
                       const Var<T>& b) {
    const int c_in = f.value().dim(1);
    const Shape& ss = scale.value().shape();
    check((ss.size() == 1 && ss[0] == c_in) ||
              (ss.size() == 2 && ss[1] == c_in && ss[0] == f.value().dim(0)),
          "global_modulate: scale shape " + shape_str(ss) + " incompatible with " +
              std::to_string(c_in) + " input channels");
    const int k = w.value().dim(2);
    return conv2d(mul(f, scale), w, b, 1, k / 2);
}

// Global modulation with optional weight demodulation (output-channel
// renormalization by 1/sqrt(sum (w*s)^2 + eps)), as used inside the blocks.
template <typename T>
Var<T> global_mod_conv(const Var<T>& f, const Var<T>& scale, const Var<T>& w,
                       const Var<T>& b, bool demod) {
    Var<T> y = global_modulate(f, scale, w, Var<T>());
    if (demod) {
        const int co = w.value().dim(0), ci = w.value().dim(1);
        const int kk = w.value().dim(2) * w.value().dim(3);
        Var<T> w2 = reshape(square(w), {co * ci, kk});
        Var<T> ones = Var<T>::constant(Tensor<T>::full({kk, 1}, T(1)));
        Var<T> w2sum = reshape(matmul(w2, ones), {co, ci});
        Var<T> s2 = square(scale.value().ndim() == 1
                               ? reshape(scale, {1, ci})
                               : scale);
        y = mul(y, rsqrt_eps(matmul(s2, transpose2d(w2sum)), 1e-8));
    }
    if (b.defined()) y = add(y, b);
    return y;
}

// ---------------------------------------------------------------------------
// SG block: residual unit of one spatial modulation followed by two global
// modulations, with optional nearest-neighbor 2x upsampling on both paths.
// Ablation switches turn either modulation into a plain convolution, making
// the output exactly independent of the corresponding code.
// ---------------------------------------------------------------------------
template <typename T>
struct SGBlock {
    Conv2d<T> gate_proj;  // SpatialCode -> per-position gate, 1x1, bias init 1
    Conv2d<T> conv_sp;
    Linear<T> affine1, affine2;  // GlobalCode -> per-channel scale, bias init 1
    Conv2d<T> conv_g1, conv_g2;
    Conv2d<T> skip;  // 1x1 residual projection
    bool up = false, use_spatial = true, use_global = true;

    SGBlock() = default;
    SGBlock(ParamStore<T>& ps, const std::string& name, int c_in, int c_out, int c_sp,
            int d_gl, Rng& rng, bool up_, bool use_spatial_, bool use_global_)
        : up(up_), use_spatial(use_spatial_), use_global(use_global_) {
        gate_proj = Conv2d<T>(ps, name + ".gate", c_sp, c_in, 1, rng);
        for (int64_t i = 0; i < gate_proj.b.value().numel(); ++i)
            gate_proj.b.value()[i] = (T)1;  // gate starts near identity
        conv_sp = Conv2d<T>(ps, name + ".conv_sp", c_in, c_out, 3, rng);
        affine1 = Linear<T>(ps, name + ".affine1", d_gl, c_out, rng, 1.0);
        conv_g1 = Conv2d<T>(ps, name + ".conv_g1", c_out, c_out, 3, rng);
        affine2 = Linear<T>(ps, name + ".affine2", d_gl, c_out, rng, 1.0);
        conv_g2 = Conv2d<T>(ps, name + ".conv_g2", c_out, c_out, 3, rng);
        skip = Conv2d<T>(ps, name + ".skip", c_in, c_out, 1, rng);
    }

    // Nearest-neighbor replication of `g` until its side matches `side`.
    static Var<T> resize_to(Var<T> g, int side) {
        while (g.value().dim(2) < side) g = upsample2(g);
        check(g.value().dim(2) == side, "gate resize: side mismatch");
        return g;
    }

    Var<T> operator()(Var<T> f, const Var<T>& sp, const Var<T>& gl) const {
        if (up) f = upsample2(f);
        Var<T> main = f;
        if (use_spatial) {
            Var<T> gate = resize_to(gate_proj(sp), f.value().dim(2));
            main = spatial_modulate(main, gate, conv_sp.w, conv_sp.b);
        } else {
            main = conv2d(main, conv_sp.w, conv_sp.b, 1, 1);
        }
        main = leaky_relu(main);
        auto gstep = [&](const Linear<T>& aff, const Conv2d<T>& cv) {
            if (use_global)
                main = global_mod_conv(main, aff(gl), cv.w, cv.b, /*demod=*/true);
            else
                main = conv2d(main, cv.w, cv.b, 1, 1);
            main = leaky_relu(main);
        };
        gstep(affine1, conv_g1);
        gstep(affine2, conv_g2);
        return scale(add(main, skip(f)), 1.0 / std::sqrt(2.0));
    }
};

// ---------------------------------------------------------------------------
// Layer plan: the symbolic shape table of the whole rectifier at a given
// configuration, used for architecture conformance checks.
// ---------------------------------------------------------------------------
struct PlanRow {
    std::string section, op;
    int h = 0, w = 0, c = 0;
};

inline std::vector<PlanRow> layer_plan(const ExperimentConfig& cfg) {
    std::vector<PlanRow> rows;
    const int res = cfg.resolution;
    const int gs = res / 16;

    rows.push_back({"backbone", "Conv 3x3", res, res, cfg.enc_channels_at(res)});
    for (int r = res; r > gs; r /= 2)
        rows.push_back({"backbone", "ResidualBlock down", r / 2, r / 2,
                        cfg.enc_channels_at(r / 2)});

    const int c_bb = cfg.enc_channels_at(gs);
    rows.push_back({"spatial_head", "Conv 3x3", gs, gs, c_bb});
    rows.push_back({"spatial_head", "Conv 1x1", gs, gs, cfg.c_sp});

    int side = gs, c = c_bb;
    if (side >= 3) {
        side = (side - 3) / 2 + 1;
        c = 2 * cfg.max_channels;
        rows.push_back({"global_head", "Conv 3x3 down", side, side, c});
    }
    if (side >= 3) {
        side = (side - 3) / 2 + 1;
        c = 4 * cfg.max_channels;
        rows.push_back({"global_head", "Conv 3x3 down", side, side, c});
    }
    rows.push_back({"global_head", "Conv 1x1", 1, 1, cfg.d_gl()});

    rows.push_back({"generator", "GlMod Conv 3x3", gs, gs, cfg.c_sp});
    const int full = cfg.gen_channels_at(gs);
    rows.push_back({"generator", "SGMod Conv 3x3", gs, gs, std::max(4, full / 2)});
    rows.push_back({"generator", "SGMod Conv 3x3", gs, gs, full});
    for (int r = 2 * gs; r <= res; r *= 2)
        rows.push_back({"generator", "SGMod Conv 3x3 up", r, r, cfg.gen_channels_at(r)});
    rows.push_back({"generator", "GlMod Conv 1x1", res, res, 3});
    return rows;
}

// ---------------------------------------------------------------------------
// Encoders.
// ---------------------------------------------------------------------------
template <typename T>
struct RectBackbone {
    Conv2d<T> from_rgb;
    std::vector<ResDownBlock<T>> blocks;
    int resolution = 0;

    RectBackbone() = default;
    RectBackbone(ParamStore<T>& ps, const std::string& name, const ExperimentConfig& cfg,
                 Rng& rng)
        : resolution(cfg.resolution) {
        int c = cfg.enc_channels_at(cfg.resolution);
        from_rgb = Conv2d<T>(ps, name + ".from_rgb", 3, c, 3, rng);
        for (int r = cfg.resolution; r > cfg.resolution / 16; r /= 2) {
            const int c_out = cfg.enc_channels_at(r / 2);
            blocks.emplace_back(ps, name + ".b" + std::to_string(r), c, c_out, rng);
            c = c_out;
        }
    }

    Var<T> operator()(const Var<T>& img) const {
        check(img.value().ndim() == 4 && img.value().dim(1) == 3 &&
                  img.value().dim(2) == resolution && img.value().dim(3) == resolution,
              "rectifier encoder: expected [N,3," + std::to_string(resolution) + "," +
                  std::to_string(resolution) + "], got " + shape_str(img.shape()));
        Var<T> h = leaky_relu(from_rgb(img));
        for (const auto& b : blocks) h = b(h);
        return h;
    }
};

template <typename T>
struct SpatialHead {
    Conv2d<T> conv3, conv1;

    SpatialHead() = default;
    SpatialHead(ParamStore<T>& ps, const std::string& name, int c_in, int c_sp, Rng& rng) {
        conv3 = Conv2d<T>(ps, name + ".conv3", c_in, c_in, 3, rng);
        conv1 = Conv2d<T>(ps, name + ".conv1", c_in, c_sp, 1, rng);
    }

    Var<T> operator()(const Var<T>& h) const { return conv1(leaky_relu(conv3(h))); }
};

// Two valid stride-2 3x3 convolutions (each applied only while the spatial
// side still admits one), a 1x1 projection to d_gl, then spatial mean pooling.
template <typename T>
struct GlobalHead {
    Conv2d<T> down1, down2, proj;
    bool has_down1 = false, has_down2 = false;

    GlobalHead() = default;
    GlobalHead(ParamStore<T>& ps, const std::string& name, const ExperimentConfig& cfg,
               Rng& rng) {
        int side = cfg.resolution / 16;
        int c = cfg.enc_channels_at(side);
        if (side >= 3) {
            down1 = Conv2d<T>(ps, name + ".down1", c, 2 * cfg.max_channels, 3, rng, 2, 0);
            c = 2 * cfg.max_channels;
            side = (side - 3) / 2 + 1;
            has_down1 = true;
        }
        if (side >= 3) {
            down2 = Conv2d<T>(ps, name + ".down2", c, 4 * cfg.max_channels, 3, rng, 2, 0);
            c = 4 * cfg.max_channels;
            has_down2 = true;
        }
        proj = Conv2d<T>(ps, name + ".proj", c, cfg.d_gl(), 1, rng);
    }

    Var<T> operator()(const Var<T>& h) const {
        Var<T> g = h;
        if (has_down1) g = leaky_relu(down1(g));
        if (has_down2) g = leaky_relu(down2(g));
        g = proj(g);
        const int n = g.value().dim(0), c = g.value().dim(1);
        const int hw = g.value().dim(2) * g.value().dim(3);
        Var<T> flat = reshape(g, {n * c, hw});
        Var<T> ones = Var<T>::constant(Tensor<T>::full({hw, 1}, T(1)));
        return reshape(scale(matmul(flat, ones), 1.0 / hw), {n, c});
    }
};

// ---------------------------------------------------------------------------
// The rectifying network: dual-pathway encoders plus the SG-block generator.
// ---------------------------------------------------------------------------
template <typename T>
struct RectifierNet {
    ParamStore<T> ps;
    ExperimentConfig cfg;

    RectBackbone<T> bb_p, bb_d;
    SpatialHead<T> head_p, head_d;
    GlobalHead<T> head_gl;

    Linear<T> entry_affine;
    Conv2d<T> entry_conv;
    std::vector<SGBlock<T>> blocks;
    Linear<T> rgb_affine;
    Conv2d<T> rgb_conv;

    explicit RectifierNet(const ExperimentConfig& cfg_) : cfg(cfg_) {
        check(cfg.resolution % 16 == 0, "rectifier: resolution must be divisible by 16");
        Rng rng(cfg.seed ^ 0x5ec71fULL);
        const int c_bb = cfg.enc_channels_at(cfg.resolution / 16);

        bb_p = RectBackbone<T>(ps, "rp", cfg, rng);
        head_p = SpatialHead<T>(ps, "rp.head", c_bb, cfg.c_sp, rng);
        if (!cfg.share_backbone) bb_d = RectBackbone<T>(ps, "rd", cfg, rng);
        head_d = SpatialHead<T>(ps, "rd.head", c_bb, cfg.c_sp, rng);
        head_gl = GlobalHead<T>(ps, "rd.gl", cfg, rng);

        entry_affine = Linear<T>(ps, "rg.entry.affine", cfg.d_gl(), cfg.c_sp, rng, 1.0);
        entry_conv = Conv2d<T>(ps, "rg.entry.conv", cfg.c_sp, cfg.c_sp, 3, rng);

        const int gs = cfg.resolution / 16;
        const int full = cfg.gen_channels_at(gs);
        int c_in = cfg.c_sp;
        auto add_block = [&](int c_out, bool up) {
            blocks.emplace_back(ps, "rg.b" + std::to_string((int)blocks.size()), c_in,
                                c_out, cfg.c_sp, cfg.d_gl(), rng, up, cfg.enable_spatial,
                                cfg.enable_global);
            c_in = c_out;
        };
        add_block(std::max(4, full / 2), false);
        add_block(full, false);
        for (int r = 2 * gs; r <= cfg.resolution; r *= 2)
            add_block(cfg.gen_channels_at(r), true);

        rgb_affine = Linear<T>(ps, "rg.rgb.affine", cfg.d_gl(), c_in, rng, 1.0);
        rgb_conv = Conv2d<T>(ps, "rg.rgb.conv", c_in, 3, 1, rng);
    }

    Var<T> encode_primary(const Var<T>& img) const { return head_p(bb_p(img)); }

    std::pair<Var<T>, Var<T>> encode_difference(const Var<T>& delta) const {
        check(delta.value().max_abs() <= 2.0 + 1e-6,
              "encode_difference: values outside [-2,2]");
        Var<T> h = cfg.share_backbone ? bb_p(delta) : bb_d(delta);
        return {head_d(h), head_gl(h)};
    }

    Var<T> generate(const Var<T>& f, const Var<T>& sp, const Var<T>& gl) const {
        Var<T> h = cfg.enable_global
                       ? global_mod_conv(f, entry_affine(gl), entry_conv.w, entry_conv.b,
                                         true)
                       : conv2d(f, entry_conv.w, entry_conv.b, 1, 1);
        h = leaky_relu(h);
        for (const auto& b : blocks) h = b(h, sp, gl);
        Var<T> rgb = cfg.enable_global
                         ? global_mod_conv(h, rgb_affine(gl), rgb_conv.w, rgb_conv.b,
                                           false)
                         : conv2d(h, rgb_conv.w, rgb_conv.b, 1, 0);
        return tanh_op(rgb);
    }

    Var<T> rectify(const Var<T>& primary_inv, const Var<T>& secondary) const {
        check(primary_inv.value().shape() == secondary.value().shape(),
              "rectify: input shapes differ: " + shape_str(primary_inv.shape()) + " vs " +
                  shape_str(secondary.shape()));
        auto [sp, gl] = encode_difference(secondary);
        return generate(encode_primary(primary_inv), sp, gl);
    }
};

}  // namespace reganie::rectifier
