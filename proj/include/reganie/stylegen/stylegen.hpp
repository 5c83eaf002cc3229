// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>

#include "reganie/core/checkpoint.hpp"
#include "reganie/core/config.hpp"
#include "reganie/nn/modules.hpp"

namespace reganie::stylegen {

struct NumericError : TensorError {
    using TensorError::TensorError;
};

// z -> w: small stack of fully connected layers.
template <typename T>
struct MappingNetwork {
    std::vector<Linear<T>> layers;
    int d_z = 0, d_w = 0;

    MappingNetwork() = default;
    MappingNetwork(ParamStore<T>& ps, const ExperimentConfig& cfg, Rng& rng)
        : d_z(cfg.d_z), d_w(cfg.d_w) {
        int in = cfg.d_z;
        for (int i = 0; i < cfg.mapping_layers; ++i) {
            layers.emplace_back(ps, "map.fc" + std::to_string(i), in, cfg.d_w, rng);
            in = cfg.d_w;
        }
    }

    Var<T> operator()(const Var<T>& z) const {
        check(z.value().ndim() == 2 && z.value().dim(1) == d_z,
              "map_latent: expected [N," + std::to_string(d_z) + "], got " +
                  shape_str(z.shape()));
        check(z.value().all_finite(), "map_latent: non-finite latent");
        Var<T> h = z;
        for (size_t i = 0; i < layers.size(); ++i) {
            h = layers[i](h);
            if (i + 1 < layers.size()) h = leaky_relu(h);
        }
        return h;
    }
};

// Style-modulated synthesis network: learned constant input at 4x4,
// progressive 2x upsampling, weight (de)modulation per conv, tanh output.
// No per-layer noise inputs: synthesis is a deterministic function of w.
template <typename T>
struct StyleGenerator {
    struct Block {
        ModulatedConv2d<T> conv1, conv2;
        bool up = false;
    };
    Var<T> const_input;
    std::vector<Block> blocks;
    ModulatedConv2d<T> to_rgb;
    int resolution = 0, d_w = 0;

    StyleGenerator() = default;
    StyleGenerator(ParamStore<T>& ps, const ExperimentConfig& cfg, Rng& rng)
        : resolution(cfg.resolution), d_w(cfg.d_w) {
        int c_in = cfg.gen_channels_at(4);
        const_input = ps.make("g.const", rng.template normal<T>({1, c_in, 4, 4}));
        for (int r = 4; r <= cfg.resolution; r *= 2) {
            Block b;
            b.up = r > 4;
            const int c_out = cfg.gen_channels_at(r);
            const std::string name = "g.b" + std::to_string(r);
            b.conv1 = ModulatedConv2d<T>(ps, name + ".conv1", c_in, c_out, 3, cfg.d_w, rng);
            b.conv2 = ModulatedConv2d<T>(ps, name + ".conv2", c_out, c_out, 3, cfg.d_w, rng);
            blocks.push_back(std::move(b));
            c_in = c_out;
        }
        to_rgb = ModulatedConv2d<T>(ps, "g.to_rgb", c_in, 3, 1, cfg.d_w, rng,
                                    /*demod=*/false);
    }

    Var<T> operator()(const Var<T>& w) const {
        check(w.value().ndim() == 2 && w.value().dim(1) == d_w,
              "synthesize: expected [N," + std::to_string(d_w) + "], got " +
                  shape_str(w.shape()));
        const int n = w.value().dim(0);
        Var<T> h = broadcast_to(const_input, {n, const_input.value().dim(1), 4, 4});
        for (const auto& b : blocks) {
            if (b.up) h = upsample2(h);
            h = leaky_relu(b.conv1(h, w));
            h = leaky_relu(b.conv2(h, w));
        }
        return tanh_op(to_rgb(h, w));
    }
};

// Convolutional realism critic. Restricted to conv / leaky / pool / linear so
// the R1 double-backward path through it is exact.
template <typename T>
struct Discriminator {
    Conv2d<T> from_rgb;
    std::vector<ResDownBlock<T>> blocks;
    Conv2d<T> final_conv;
    Linear<T> final_fc;
    int resolution = 0;

    Discriminator() = default;
    Discriminator(ParamStore<T>& ps, const ExperimentConfig& cfg, Rng& rng,
                  const std::string& prefix = "d")
        : resolution(cfg.resolution) {
        int c = cfg.enc_channels_at(cfg.resolution);
        from_rgb = Conv2d<T>(ps, prefix + ".from_rgb", 3, c, 3, rng);
        for (int r = cfg.resolution; r > 4; r /= 2) {
            const int c_out = cfg.enc_channels_at(r / 2);
            blocks.emplace_back(ps, prefix + ".b" + std::to_string(r), c, c_out, rng);
            c = c_out;
        }
        final_conv = Conv2d<T>(ps, prefix + ".final_conv", c, c, 3, rng);
        final_fc = Linear<T>(ps, prefix + ".fc", c * 16, 1, rng);
    }

    Var<T> operator()(const Var<T>& img) const {
        check(img.value().ndim() == 4 && img.value().dim(2) == resolution &&
                  img.value().dim(3) == resolution && img.value().dim(1) == 3,
              "discriminate: expected [N,3," + std::to_string(resolution) + "," +
                  std::to_string(resolution) + "], got " + shape_str(img.shape()));
        Var<T> h = leaky_relu(from_rgb(img));
        for (const auto& b : blocks) h = b(h);
        h = leaky_relu(final_conv(h));
        h = reshape(h, {img.value().dim(0), -1});
        return final_fc(h);
    }
};

// (gamma/2) * mean_batch ||d score / d pixels||^2, differentiable w.r.t. the
// discriminator parameters (grad-of-grad).
template <typename T, typename DFn>
Var<T> r1_penalty(DFn&& discriminate, const Var<T>& real, double gamma) {
    check(real.value().dim(0) >= 1, "r1_penalty: empty batch");
    Var<T> x = Var<T>::param(real.value().clone());
    Var<T> score_sum = sum_all(discriminate(x));
    auto g = grad(score_sum, {x}, /*create_graph=*/true);
    return scale(sum_all(square(g[0])), gamma / 2.0 / (double)real.value().dim(0));
}

// Non-saturating logistic GAN losses.
template <typename T>
Var<T> gan_generator_loss(const Var<T>& d_fake) {
    return mean_all(softplus_op(neg(d_fake)));
}

template <typename T>
Var<T> gan_discriminator_loss(const Var<T>& d_real, const Var<T>& d_fake) {
    return add(mean_all(softplus_op(neg(d_real))), mean_all(softplus_op(d_fake)));
}

// Bundles M, G and D with their parameter stores.
template <typename T>
struct StyleGenWorld {
    ParamStore<T> ps_g;  // mapping + generator
    ParamStore<T> ps_d;
    MappingNetwork<T> map;
    StyleGenerator<T> gen;
    Discriminator<T> disc;
    ExperimentConfig cfg;

    explicit StyleGenWorld(const ExperimentConfig& cfg_) : cfg(cfg_) {
        Rng rng(cfg.seed ^ 0x5179ULL);
        map = MappingNetwork<T>(ps_g, cfg, rng);
        gen = StyleGenerator<T>(ps_g, cfg, rng);
        disc = Discriminator<T>(ps_d, cfg, rng);
    }

    Var<T> map_latent(const Var<T>& z) const { return map(z); }
    Var<T> synthesize(const Var<T>& w) const { return gen(w); }
    Var<T> discriminate(const Var<T>& img) const { return disc(img); }
};

struct GanLossRow {
    int64_t iter;
    double d_loss, g_loss, r1;
};

// Adversarial training of the toy generator on rendered scenes.
// `images` is the [N,3,res,res] training pool.
template <typename T>
class GanTrainer {
public:
    GanTrainer(StyleGenWorld<T>& world, Tensor<T> images)
        : w_(world),
          images_(std::move(images)),
          opt_g_(world.ps_g, world.cfg.lr, world.cfg.adam_b1, world.cfg.adam_b2),
          opt_d_(world.ps_d, world.cfg.lr, world.cfg.adam_b1, world.cfg.adam_b2),
          rng_(world.cfg.seed ^ 0x6a11ULL) {
        check(images_.ndim() == 4 && images_.dim(1) == 3, "GanTrainer: need NCHW pool");
    }

    GanLossRow step() {
        const ExperimentConfig& cfg = w_.cfg;
        const int B = cfg.batch;

        // --- discriminator update
        Var<T> real = Var<T>::constant(sample_real(B));
        Var<T> z = Var<T>::constant(rng_.template normal<T>({B, cfg.d_z}));
        Var<T> fake;
        {
            NoGradGuard ng;
            fake = w_.synthesize(w_.map_latent(z));
        }
        w_.ps_d.zero_grad();
        Var<T> r1 = r1_penalty<T>([&](const Var<T>& x) { return w_.discriminate(x); }, real,
                                  cfg.r1_gamma);
        Var<T> d_loss =
            add(gan_discriminator_loss(w_.discriminate(real), w_.discriminate(fake)), r1);
        backward(d_loss);
        opt_d_.step();

        // --- generator update
        w_.ps_g.zero_grad();
        Var<T> z2 = Var<T>::constant(rng_.template normal<T>({B, cfg.d_z}));
        Var<T> fake2 = w_.synthesize(w_.map_latent(z2));
        Var<T> g_loss = gan_generator_loss(w_.discriminate(fake2));
        backward(g_loss);
        opt_g_.step();

        ++iter_;
        GanLossRow row{iter_, (double)d_loss.value()[0], (double)g_loss.value()[0],
                       (double)r1.value()[0]};
        if (!std::isfinite(row.d_loss) || !std::isfinite(row.g_loss))
            throw NumericError("GAN training diverged at iteration " + std::to_string(iter_));
        return row;
    }

    int64_t iteration() const { return iter_; }

    Checkpoint make_checkpoint() const {
        Checkpoint c;
        c.fingerprint = w_.cfg.phase1_fingerprint();
        c.iteration = iter_;
        c.put_params("g", w_.ps_g);
        c.put_params("d", w_.ps_d);
        c.put_adam("g", const_cast<Adam<T>&>(opt_g_));
        c.put_adam("d", const_cast<Adam<T>&>(opt_d_));
        c.put_rng("rng", rng_);
        c.meta["stage"] = "gan";
        return c;
    }

    void restore(const Checkpoint& c) {
        c.load_params("g", w_.ps_g);
        c.load_params("d", w_.ps_d);
        c.load_adam("g", opt_g_);
        c.load_adam("d", opt_d_);
        rng_ = c.get_rng("rng");
        iter_ = c.iteration;
    }

private:
    Tensor<T> sample_real(int b) {
        const int64_t sz = (int64_t)3 * images_.dim(2) * images_.dim(3);
        Tensor<T> out({b, 3, images_.dim(2), images_.dim(3)});
        for (int i = 0; i < b; ++i) {
            const int64_t idx = (int64_t)rng_.uniform_int(images_.dim(0));
            std::memcpy(out.ptr() + i * sz, images_.ptr() + idx * sz, sizeof(T) * sz);
        }
        return out;
    }

    StyleGenWorld<T>& w_;
    Tensor<T> images_;
    Adam<T> opt_g_, opt_d_;
    Rng rng_;
    int64_t iter_ = 0;
};

// Runs the full stage with CSV logging and snapshots; returns the final
// checkpoint (also written to ckpt_path).
template <typename T>
Checkpoint train_toy_gan(StyleGenWorld<T>& world, Tensor<T> images,
                         const std::string& ckpt_file, const std::string& csv_file,
                         int64_t iters, const Checkpoint* resume = nullptr) {
    GanTrainer<T> tr(world, std::move(images));
    if (resume) tr.restore(*resume);
    std::ofstream csv;
    if (!csv_file.empty()) {
        std::filesystem::create_directories(std::filesystem::path(csv_file).parent_path());
        csv.open(csv_file, resume ? std::ios::app : std::ios::out);
        if (!resume) csv << "iter,d_loss,g_loss,r1\n";
    }
    while (tr.iteration() < iters) {
        GanLossRow row = tr.step();
        if (csv.is_open() && (row.iter % 50 == 0 || row.iter == iters))
            csv << row.iter << "," << row.d_loss << "," << row.g_loss << "," << row.r1 << "\n"
                << std::flush;
        if (!ckpt_file.empty() &&
            (row.iter % world.cfg.snapshot_every == 0 || row.iter == iters))
            tr.make_checkpoint().save(ckpt_file);
    }
    return tr.make_checkpoint();
}

}  // namespace reganie::stylegen
