// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>

#include "reganie/core/ops.hpp"
#include "reganie/core/rng.hpp"

namespace reganie {

// Flat named-parameter registry. Modules register their parameters under
// hierarchical names ("g.block2.conv1.w"); checkpoints and optimizers work on
// this map.
template <typename T>
class ParamStore {
public:
    Var<T> make(const std::string& name, Tensor<T> init) {
        check(!params_.count(name), "duplicate parameter " + name);
        Var<T> p = Var<T>::param(std::move(init));
        params_.emplace(name, p);
        return p;
    }

    const std::map<std::string, Var<T>>& params() const { return params_; }
    std::map<std::string, Var<T>>& params() { return params_; }

    Var<T> at(const std::string& name) const {
        auto it = params_.find(name);
        check(it != params_.end(), "no parameter named " + name);
        return it->second;
    }

    void zero_grad() {
        for (auto& kv : params_) kv.second.zero_grad();
    }

    int64_t count() const {
        int64_t n = 0;
        for (auto& kv : params_) n += kv.second.value().numel();
        return n;
    }

    // Order-stable content hash, for frozen-parameter assertions.
    uint64_t content_hash() const {
        uint64_t h = 1469598103934665603ULL;
        for (const auto& kv : params_) {
            for (char c : kv.first) h = (h ^ (uint64_t)(uint8_t)c) * 1099511628211ULL;
            const Tensor<T>& t = kv.second.value();
            const uint8_t* b = (const uint8_t*)t.ptr();
            for (int64_t i = 0; i < t.numel() * (int64_t)sizeof(T); ++i)
                h = (h ^ b[i]) * 1099511628211ULL;
        }
        return h;
    }

private:
    std::map<std::string, Var<T>> params_;
};

// He-style fan-in scaled normal init.
template <typename T>
Tensor<T> he_normal(Rng& rng, const Shape& s, int fan_in) {
    return rng.template normal<T>(s, std::sqrt(2.0 / (double)fan_in));
}

template <typename T>
struct Linear {
    Var<T> w, b;
    int in = 0, out = 0;

    Linear() = default;
    Linear(ParamStore<T>& ps, const std::string& name, int in_, int out_, Rng& rng,
           double bias_init = 0.0)
        : in(in_), out(out_) {
        w = ps.make(name + ".w", he_normal<T>(rng, {out_, in_}, in_));
        b = ps.make(name + ".b", Tensor<T>::full({out_}, (T)bias_init));
    }

    Var<T> operator()(const Var<T>& x) const {
        check(x.value().ndim() == 2 && x.value().dim(1) == in,
              "linear: expected [N," + std::to_string(in) + "], got " + shape_str(x.shape()));
        return add(matmul(x, transpose2d(w)), b);
    }
};

template <typename T>
struct Conv2d {
    Var<T> w, b;
    int in = 0, out = 0, k = 3, stride = 1, pad = 1;

    Conv2d() = default;
    Conv2d(ParamStore<T>& ps, const std::string& name, int in_, int out_, int k_, Rng& rng,
           int stride_ = 1, int pad_ = -1)
        : in(in_), out(out_), k(k_), stride(stride_), pad(pad_ < 0 ? k_ / 2 : pad_) {
        w = ps.make(name + ".w", he_normal<T>(rng, {out_, in_, k_, k_}, in_ * k_ * k_));
        b = ps.make(name + ".b", Tensor<T>::zeros({out_}));
    }

    Var<T> operator()(const Var<T>& x) const {
        return conv2d(x, w, b, stride, pad);
    }
};

// Style-modulated convolution in the StyleGAN2 lineage, realized as the
// equivalent feature-side form: scale input channels by the per-sample style,
// convolve with the shared kernel, then (optionally) demodulate output
// channels by 1/sqrt(sum((w*s)^2)+eps).
template <typename T>
struct ModulatedConv2d {
    Var<T> w, b;
    Linear<T> affine;  // style vector -> per-input-channel scale, bias init 1
    int in = 0, out = 0, k = 3;
    bool demodulate = true;

    ModulatedConv2d() = default;
    ModulatedConv2d(ParamStore<T>& ps, const std::string& name, int in_, int out_, int k_,
                    int style_dim, Rng& rng, bool demod = true)
        : in(in_), out(out_), k(k_), demodulate(demod) {
        w = ps.make(name + ".w", he_normal<T>(rng, {out_, in_, k_, k_}, in_ * k_ * k_));
        b = ps.make(name + ".b", Tensor<T>::zeros({out_}));
        affine = Linear<T>(ps, name + ".affine", style_dim, in_, rng, /*bias_init=*/1.0);
    }

    // x [N,Cin,H,W], style [N,style_dim]
    Var<T> operator()(const Var<T>& x, const Var<T>& style) const {
        Var<T> s = affine(style);  // [N,Cin]
        Var<T> xm = mul(x, s);
        Var<T> y = conv2d(xm, w, Var<T>(), 1, k / 2);
        if (demodulate) {
            // sigma2[n,co] = sum_ci (sum_k w^2) * s^2
            Var<T> w2 = reshape(square(w), {out * in, k * k});
            Var<T> ones = Var<T>::constant(Tensor<T>::full({k * k, 1}, T(1)));
            Var<T> w2sum = reshape(matmul(w2, ones), {out, in});
            Var<T> sigma2 = matmul(square(s), transpose2d(w2sum));  // [N,Cout]
            y = mul(y, rsqrt_eps(sigma2, 1e-8));
        }
        return add(y, b);
    }
};

// Pool-first residual downsampling block used by the encoders and the
// discriminator: avgpool, two 3x3 convs, plus a pooled 1x1 skip.
template <typename T>
struct ResDownBlock {
    Conv2d<T> conv1, conv2, skip;

    ResDownBlock() = default;
    ResDownBlock(ParamStore<T>& ps, const std::string& name, int in, int out, Rng& rng) {
        conv1 = Conv2d<T>(ps, name + ".conv1", in, out, 3, rng);
        conv2 = Conv2d<T>(ps, name + ".conv2", out, out, 3, rng);
        skip = Conv2d<T>(ps, name + ".skip", in, out, 1, rng);
    }

    Var<T> operator()(const Var<T>& x) const {
        Var<T> h = avgpool2(x);
        Var<T> s = skip(h);
        h = leaky_relu(conv1(h));
        h = leaky_relu(conv2(h));
        return scale(add(h, s), 1.0 / std::sqrt(2.0));
    }
};

// Adam with the configuration used throughout: b1=0.0, b2=0.99.
template <typename T>
class Adam {
public:
    Adam(ParamStore<T>& ps, double lr, double b1 = 0.0, double b2 = 0.99, double eps = 1e-8)
        : ps_(&ps), lr_(lr), b1_(b1), b2_(b2), eps_(eps) {
        for (auto& kv : ps.params()) {
            m_[kv.first] = Tensor<T>::zeros(kv.second.shape());
            v_[kv.first] = Tensor<T>::zeros(kv.second.shape());
        }
    }

    void step() {
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, (double)t_);
        const double c2 = 1.0 - std::pow(b2_, (double)t_);
        for (auto& kv : ps_->params()) {
            Var<T>& p = kv.second;
            if (!p.grad_accum().defined()) continue;
            Tensor<T>& m = m_[kv.first];
            Tensor<T>& v = v_[kv.first];
            T* pm = m.ptr();
            T* pv = v.ptr();
            T* pw = p.value().ptr();
            const T* pg = p.grad_accum().ptr();
            for (int64_t i = 0; i < m.numel(); ++i) {
                pm[i] = (T)(b1_ * pm[i] + (1.0 - b1_) * pg[i]);
                pv[i] = (T)(b2_ * pv[i] + (1.0 - b2_) * pg[i] * pg[i]);
                const double mh = pm[i] / c1;
                const double vh = pv[i] / c2;
                pw[i] -= (T)(lr_ * mh / (std::sqrt(vh) + eps_));
            }
        }
    }

    int64_t iterations() const { return t_; }
    void set_iterations(int64_t t) { t_ = t; }

    std::map<std::string, Tensor<T>>& moment1() { return m_; }
    std::map<std::string, Tensor<T>>& moment2() { return v_; }

private:
    ParamStore<T>* ps_;
    double lr_, b1_, b2_, eps_;
    int64_t t_ = 0;
    std::map<std::string, Tensor<T>> m_, v_;
};

}  // namespace reganie
