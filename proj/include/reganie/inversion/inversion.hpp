// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstring>
#include <nlohmann/json.hpp>

#include "reganie/nn/perceptual.hpp"
#include "reganie/stylegen/stylegen.hpp"

namespace reganie::inversion {

using stylegen::NumericError;
using stylegen::StyleGenWorld;

struct DegenerateFitError : TensorError {
    using TensorError::TensorError;
};

// Unit-norm latent direction associated with a named attribute.
struct EditDirection {
    std::string attribute;
    Tensor<double> d;  // [d_w], ||d|| = 1

    void validate() const {
        check(d.ndim() == 1, "direction must be a vector");
        double n2 = 0;
        for (int64_t i = 0; i < d.numel(); ++i) n2 += d[i] * d[i];
        check(std::fabs(std::sqrt(n2) - 1.0) <= 1e-6, "direction not unit-norm");
    }

    void save(const std::string& path) const {
        validate();
        nlohmann::json j;
        j["attribute"] = attribute;
        j["d_w"] = (int)d.numel();
        j["vector"] = std::vector<double>(d.ptr(), d.ptr() + d.numel());
        std::filesystem::create_directories(std::filesystem::path(path).parent_path());
        std::ofstream f(path);
        check(f.good(), "cannot write direction file: " + path);
        f << j.dump(2) << "\n";
    }

    static EditDirection load(const std::string& path) {
        std::ifstream f(path);
        check(f.good(), "cannot open direction file: " + path);
        nlohmann::json j = nlohmann::json::parse(f);
        EditDirection e;
        e.attribute = j.at("attribute").get<std::string>();
        auto v = j.at("vector").get<std::vector<double>>();
        check((int)v.size() == j.at("d_w").get<int>(), "direction file: d_w mismatch");
        e.d = Tensor<double>({(int)v.size()});
        std::memcpy(e.d.ptr(), v.data(), sizeof(double) * v.size());
        e.validate();
        return e;
    }
};

struct EditRequest {
    EditDirection direction;
    double alpha = 0.0;

    void validate() const {
        check(std::isfinite(alpha), "edit magnitude must be finite");
        direction.validate();
    }
};

// w + alpha * d, computed exactly per component (no reassociation).
template <typename T>
Tensor<T> edit_latent(const Tensor<T>& w, const EditRequest& req) {
    req.validate();
    check(w.ndim() == 2 && w.dim(1) == (int)req.direction.d.numel(),
          "edit_latent: latent dim " + shape_str(w.shape()) + " vs direction dim " +
              std::to_string(req.direction.d.numel()));
    Tensor<T> out = w.clone();
    if (req.alpha == 0.0) return out;  // exact identity, bit for bit
    const int n = w.dim(0), dw = w.dim(1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dw; ++j)
            out[(int64_t)i * dw + j] += (T)(req.alpha * req.direction.d[j]);
    return out;
}

// Convolutional image-to-latent encoder (same downsampling skeleton as the
// discriminator, ending in a d_w-dimensional projection).
template <typename T>
struct EmbeddingEncoder {
    Conv2d<T> from_rgb;
    std::vector<ResDownBlock<T>> blocks;
    Conv2d<T> final_conv;
    Linear<T> final_fc;
    int resolution = 0, d_w = 0;

    EmbeddingEncoder() = default;
    EmbeddingEncoder(ParamStore<T>& ps, const ExperimentConfig& cfg, Rng& rng)
        : resolution(cfg.resolution), d_w(cfg.d_w) {
        int c = cfg.enc_channels_at(cfg.resolution);
        from_rgb = Conv2d<T>(ps, "e.from_rgb", 3, c, 3, rng);
        for (int r = cfg.resolution; r > 4; r /= 2) {
            const int c_out = cfg.enc_channels_at(r / 2);
            blocks.emplace_back(ps, "e.b" + std::to_string(r), c, c_out, rng);
            c = c_out;
        }
        final_conv = Conv2d<T>(ps, "e.final_conv", c, c, 3, rng);
        final_fc = Linear<T>(ps, "e.fc", c * 16, d_w, rng);
    }

    Var<T> operator()(const Var<T>& img) const {
        check(img.value().ndim() == 4 && img.value().dim(1) == 3 &&
                  img.value().dim(2) == resolution && img.value().dim(3) == resolution,
              "embed: expected [N,3," + std::to_string(resolution) + "," +
                  std::to_string(resolution) + "], got " + shape_str(img.shape()));
        Var<T> h = leaky_relu(from_rgb(img));
        for (const auto& b : blocks) h = b(h);
        h = leaky_relu(final_conv(h));
        h = reshape(h, {img.value().dim(0), -1});
        return final_fc(h);
    }
};

// Phase-I bundle: a trained generator plus the embedding encoder.
template <typename T>
struct InversionWorld {
    StyleGenWorld<T>& gan;
    ParamStore<T> ps_e;
    EmbeddingEncoder<T> enc;

    explicit InversionWorld(StyleGenWorld<T>& gan_) : gan(gan_) {
        Rng rng(gan_.cfg.seed ^ 0xe4eULL);
        enc = EmbeddingEncoder<T>(ps_e, gan_.cfg, rng);
    }

    Var<T> embed(const Var<T>& img) const { return enc(img); }
    Var<T> invert(const Var<T>& img) const { return gan.synthesize(enc(img)); }
};

// Least-squares fit of the latent direction along which an attribute grows:
// regress centered attribute values on centered latents and normalize the
// slope vector.
inline EditDirection fit_direction(const std::string& attribute,
                                   const std::vector<std::pair<Tensor<double>, double>>& pairs) {
    check(pairs.size() >= 100, "fit_direction: need at least 100 pairs, got " +
                                   std::to_string(pairs.size()));
    const int n = (int)pairs.size();
    const int dw = (int)pairs[0].first.numel();

    double y_mean = 0;
    for (const auto& p : pairs) y_mean += p.second;
    y_mean /= n;
    double y_var = 0;
    for (const auto& p : pairs) y_var += (p.second - y_mean) * (p.second - y_mean);
    if (y_var / n < 1e-12)
        throw DegenerateFitError("fit_direction: attribute values are (nearly) constant");

    Eigen::MatrixXd W(n, dw);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        check((int)pairs[i].first.numel() == dw, "fit_direction: inconsistent latent dims");
        for (int j = 0; j < dw; ++j) W(i, j) = pairs[i].first[j];
        y(i) = pairs[i].second - y_mean;
    }
    W.rowwise() -= W.colwise().mean();

    Eigen::MatrixXd gram = W.transpose() * W;
    gram.diagonal().array() += 1e-8 * (double)n;  // ridge for numerical rank safety
    Eigen::VectorXd slope = gram.ldlt().solve(W.transpose() * y);
    const double norm = slope.norm();
    if (!(norm > 1e-12) || !slope.allFinite())
        throw DegenerateFitError("fit_direction: degenerate regression solution");
    slope /= norm;

    EditDirection e;
    e.attribute = attribute;
    e.d = Tensor<double>({dw});
    for (int j = 0; j < dw; ++j) e.d[j] = slope(j);
    return e;
}

// One pre-inversion training sample: original, edit, and their inversions,
// all derived from a single stored initial latent.
template <typename T>
struct Quadruple {
    Tensor<T> X, Y, Xhat, Yhat;
    Tensor<T> w_init;  // [N,d_w]
    double alpha = 0.0;
};

template <typename T>
Quadruple<T> generate_quadruple(const InversionWorld<T>& world, const Tensor<T>& z,
                                const EditRequest& req) {
    req.validate();
    NoGradGuard ng;
    Quadruple<T> q;
    q.alpha = req.alpha;
    Var<T> w = world.gan.map_latent(Var<T>::constant(z));
    q.w_init = w.value().clone();
    q.X = world.gan.synthesize(w).value();
    q.Y = world.gan.synthesize(Var<T>::constant(edit_latent(q.w_init, req))).value();
    q.Xhat = world.invert(Var<T>::constant(q.X)).value();
    q.Yhat = world.invert(Var<T>::constant(q.Y)).value();
    return q;
}

struct EncoderLossRow {
    int64_t iter;
    double loss;
};

// Encoder training on generated samples: pixel L2 plus the random-feature
// perceptual proxy, plus a latent-regression anchor — the training images are
// synthesized from known latents, so the encoder is also supervised to
// recover them, which keeps its estimates on the latent manifold. The
// generator is held fixed throughout.
template <typename T>
class EncoderTrainer {
public:
    // weight of the latent-regression term relative to the image terms
    static constexpr double kLatentWeight = 0.1;
public:
    explicit EncoderTrainer(InversionWorld<T>& world)
        : w_(world),
          opt_(world.ps_e, world.gan.cfg.lr, world.gan.cfg.adam_b1, world.gan.cfg.adam_b2),
          rng_(world.gan.cfg.seed ^ 0xe4c0de0ULL),
          lpips_(3, 12, world.gan.cfg.seed ^ 0x1b1b5ULL) {}

    EncoderLossRow step() {
        const ExperimentConfig& cfg = w_.gan.cfg;
        Var<T> x, w_true;
        {
            NoGradGuard ng;
            Var<T> z = Var<T>::constant(rng_.template normal<T>({cfg.batch, cfg.d_z}));
            w_true = Var<T>::constant(w_.gan.map_latent(z).value());
            x = Var<T>::constant(w_.gan.synthesize(w_true).value());
        }
        w_.ps_e.zero_grad();
        w_.gan.ps_g.zero_grad();
        Var<T> w_hat = w_.embed(x);
        Var<T> recon = w_.gan.synthesize(w_hat);
        Var<T> loss = add(add(mean_all(square(sub(recon, x))), lpips_(recon, x)),
                          scale(mean_all(square(sub(w_hat, w_true))), kLatentWeight));
        backward(loss);
        opt_.step();  // encoder parameters only; generator grads are discarded
        ++iter_;
        const double l = (double)loss.value()[0];
        if (!std::isfinite(l))
            throw NumericError("encoder training diverged at iteration " +
                               std::to_string(iter_));
        return {iter_, l};
    }

    int64_t iteration() const { return iter_; }

    Checkpoint make_checkpoint() const {
        Checkpoint c;
        c.fingerprint = w_.gan.cfg.phase1_fingerprint();
        c.iteration = iter_;
        c.put_params("e", w_.ps_e);
        c.put_adam("e", const_cast<Adam<T>&>(opt_));
        c.put_rng("rng", rng_);
        c.meta["stage"] = "encoder";
        return c;
    }

    void restore(const Checkpoint& c) {
        c.load_params("e", w_.ps_e);
        c.load_adam("e", opt_);
        rng_ = c.get_rng("rng");
        iter_ = c.iteration;
    }

private:
    InversionWorld<T>& w_;
    Adam<T> opt_;
    Rng rng_;
    PerceptualProxy<T> lpips_;
    int64_t iter_ = 0;
};

template <typename T>
Checkpoint train_encoder(InversionWorld<T>& world, const std::string& ckpt_file,
                         const std::string& csv_file, int64_t iters,
                         const Checkpoint* resume = nullptr) {
    const uint64_t g_hash_before = world.gan.ps_g.content_hash();
    EncoderTrainer<T> tr(world);
    if (resume) tr.restore(*resume);
    std::ofstream csv;
    if (!csv_file.empty()) {
        std::filesystem::create_directories(std::filesystem::path(csv_file).parent_path());
        csv.open(csv_file, resume ? std::ios::app : std::ios::out);
        if (!resume) csv << "iter,loss\n";
    }
    while (tr.iteration() < iters) {
        EncoderLossRow row = tr.step();
        if (csv.is_open() && (row.iter % 50 == 0 || row.iter == iters))
            csv << row.iter << "," << row.loss << "\n" << std::flush;
        if (!ckpt_file.empty() &&
            (row.iter % world.gan.cfg.snapshot_every == 0 || row.iter == iters))
            tr.make_checkpoint().save(ckpt_file);
    }
    check(world.gan.ps_g.content_hash() == g_hash_before,
          "encoder training mutated frozen generator parameters");
    return tr.make_checkpoint();
}

}  // namespace reganie::inversion
