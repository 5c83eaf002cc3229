// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "reganie/inversion/inversion.hpp"
#include "reganie/rectifier/rectifier.hpp"

namespace reganie::training {

using inversion::EditRequest;
using inversion::InversionWorld;
using inversion::Quadruple;
using rectifier::RectifierNet;
using stylegen::NumericError;

// Uniform draw over the three triplet cases.
inline int draw_case(Rng& rng) { return 1 + (int)rng.uniform_int(3); }

// One training sample for the rectifier: difference image, inversion, target.
template <typename T>
struct Triplet {
    Tensor<T> dI, Ihat, I;
};

// The three-way case split over a quadruple:
//   t=1: (Y - Yhat, Xhat, X)   t=2: (X - Xhat, Yhat, Y)   t=3: (X - Xhat, Xhat, X)
template <typename T>
Triplet<T> sample_triplet(const Quadruple<T>& q, int t) {
    check(t >= 1 && t <= 3, "sample_triplet: t must be 1, 2 or 3, got " + std::to_string(t));
    auto diff = [](const Tensor<T>& a, const Tensor<T>& b) {
        Tensor<T> d = a.clone();
        for (int64_t i = 0; i < d.numel(); ++i) d[i] -= b[i];
        return d;
    };
    switch (t) {
        case 1: return {diff(q.Y, q.Yhat), q.Xhat.clone(), q.X.clone()};
        case 2: return {diff(q.X, q.Xhat), q.Yhat.clone(), q.Y.clone()};
        default: return {diff(q.X, q.Xhat), q.Xhat.clone(), q.X.clone()};
    }
}

template <typename T>
struct RectifierLoss {
    Var<T> total, l1, perceptual, gan;
};

// Weighted reconstruction objective: L1 + perceptual feature distance +
// non-saturating adversarial term, with components reported separately.
template <typename T>
RectifierLoss<T> rectifier_loss(const Var<T>& target, const Var<T>& recon,
                                const Var<T>& d_score_fake, const ExperimentConfig& cfg,
                                const PerceptualProxy<T>& perc) {
    check(target.value().shape() == recon.value().shape(),
          "rectifier_loss: shape mismatch");
    check(target.value().all_finite() && recon.value().all_finite() &&
              d_score_fake.value().all_finite(),
          "rectifier_loss: non-finite input");
    RectifierLoss<T> out;
    out.l1 = mean_all(abs_op(sub(target, recon)));
    out.perceptual = perc(target, recon);
    out.gan = stylegen::gan_generator_loss(d_score_fake);
    out.total = add(add(scale(out.l1, cfg.lambda_l1), scale(out.perceptual, cfg.lambda_lpips)),
                    scale(out.gan, cfg.lambda_gan));
    return out;
}

template <typename T>
Var<T> discriminator_loss(const Var<T>& d_real, const Var<T>& d_fake, const Var<T>& r1) {
    check(d_real.value().all_finite() && d_fake.value().all_finite(),
          "discriminator_loss: non-finite scores");
    return add(stylegen::gan_discriminator_loss(d_real, d_fake), r1);
}

// Pre-generated quadruples, stored as parallel batched tensors.
template <typename T>
struct QuadruplePool {
    Tensor<T> X, Y, Xhat, Yhat;

    int size() const { return X.defined() ? X.dim(0) : 0; }
};

// Fills a pool by sampling z, a direction from the training set, and a
// magnitude uniform in [-alpha_max, alpha_max] per sample.
template <typename T>
QuadruplePool<T> generate_pool(const InversionWorld<T>& world,
                               const std::vector<inversion::EditDirection>& directions,
                               int n, Rng& rng) {
    check(!directions.empty(), "generate_pool: no edit directions");
    check(n >= 1, "generate_pool: pool size must be positive");
    const ExperimentConfig& cfg = world.gan.cfg;
    QuadruplePool<T> pool;
    pool.X = Tensor<T>({n, 3, cfg.resolution, cfg.resolution});
    pool.Y = Tensor<T>({n, 3, cfg.resolution, cfg.resolution});
    pool.Xhat = Tensor<T>({n, 3, cfg.resolution, cfg.resolution});
    pool.Yhat = Tensor<T>({n, 3, cfg.resolution, cfg.resolution});
    const int64_t img = (int64_t)3 * cfg.resolution * cfg.resolution;
    for (int i = 0; i < n; i += cfg.batch) {
        const int b = std::min(cfg.batch, n - i);
        EditRequest req;
        req.direction = directions[rng.uniform_int(directions.size())];
        req.alpha = rng.uniform(-cfg.edit_alpha_max, cfg.edit_alpha_max);
        Tensor<T> z = rng.template normal<T>({b, cfg.d_z});
        auto q = inversion::generate_quadruple(world, z, req);
        std::memcpy(pool.X.ptr() + (int64_t)i * img, q.X.ptr(), sizeof(T) * b * img);
        std::memcpy(pool.Y.ptr() + (int64_t)i * img, q.Y.ptr(), sizeof(T) * b * img);
        std::memcpy(pool.Xhat.ptr() + (int64_t)i * img, q.Xhat.ptr(), sizeof(T) * b * img);
        std::memcpy(pool.Yhat.ptr() + (int64_t)i * img, q.Yhat.ptr(), sizeof(T) * b * img);
    }
    return pool;
}

struct RectifierLossRow {
    int64_t iter;
    double l1, perceptual, gan_g, gan_d, r1, total;
};

// Alternating adversarial training of the rectifying network against a fresh
// image discriminator, feeding on a frozen quadruple pool.
template <typename T>
class RectifierTrainer {
public:
    RectifierTrainer(RectifierNet<T>& net, QuadruplePool<T> pool)
        : net_(net),
          pool_(std::move(pool)),
          d_init_rng_(net.cfg.seed ^ 0xd15cULL),
          disc_(ps_d_, net.cfg, d_init_rng_),
          opt_r_(net.ps, net.cfg.lr, net.cfg.adam_b1, net.cfg.adam_b2),
          opt_d_(ps_d_, net.cfg.lr, net.cfg.adam_b1, net.cfg.adam_b2),
          rng_(net.cfg.seed ^ 0x7ec7ULL),
          perc_(3, 12, net.cfg.seed ^ 0x1b1b5ULL) {
        check(pool_.size() >= net.cfg.batch, "rectifier pool smaller than a batch");
    }

    RectifierLossRow step() {
        const ExperimentConfig& cfg = net_.cfg;
        const int B = cfg.batch;
        const int res = cfg.resolution;
        const int64_t img = (int64_t)3 * res * res;

        // Assemble the batch: per-sample pool index and triplet case.
        Tensor<T> dI({B, 3, res, res}), Ihat({B, 3, res, res}), I({B, 3, res, res});
        for (int i = 0; i < B; ++i) {
            const int64_t s = (int64_t)rng_.uniform_int(pool_.size());
            const int t = draw_case(rng_);
            const T* X = pool_.X.ptr() + s * img;
            const T* Y = pool_.Y.ptr() + s * img;
            const T* Xh = pool_.Xhat.ptr() + s * img;
            const T* Yh = pool_.Yhat.ptr() + s * img;
            const T* src_d1 = (t == 1) ? Y : X;
            const T* src_d2 = (t == 1) ? Yh : Xh;
            const T* src_ih = (t == 2) ? Yh : Xh;
            const T* src_i = (t == 2) ? Y : X;
            for (int64_t j = 0; j < img; ++j) {
                dI.ptr()[i * img + j] = src_d1[j] - src_d2[j];
                Ihat.ptr()[i * img + j] = src_ih[j];
                I.ptr()[i * img + j] = src_i[j];
            }
        }
        Var<T> v_ihat = Var<T>::constant(Ihat);
        Var<T> v_i = Var<T>::constant(I);
        Var<T> v_sec = secondary_input(dI, Ihat, I);

        // Rectifier forward (with graph, reused for both updates).
        net_.ps.zero_grad();
        Var<T> i_r = net_.rectify(v_ihat, v_sec);

        // Discriminator update on detached reconstructions.
        ps_d_.zero_grad();
        Var<T> r1 = stylegen::r1_penalty<T>(
            [&](const Var<T>& x) { return disc_(x); }, v_i, cfg.r1_gamma);
        Var<T> d_loss = discriminator_loss(disc_(v_i), disc_(Var<T>::constant(i_r.value())),
                                           r1);
        backward(d_loss);
        opt_d_.step();

        // Rectifier update through the refreshed discriminator.
        RectifierLoss<T> loss = rectifier_loss(v_i, i_r, disc_(i_r), cfg, perc_);
        backward(loss.total);
        opt_r_.step();

        ++iter_;
        RectifierLossRow row{iter_,
                             (double)loss.l1.value()[0],
                             (double)loss.perceptual.value()[0],
                             (double)loss.gan.value()[0],
                             (double)d_loss.value()[0],
                             (double)r1.value()[0],
                             (double)loss.total.value()[0]};
        if (!std::isfinite(row.total) || !std::isfinite(row.gan_d))
            throw NumericError("rectifier training diverged at iteration " +
                               std::to_string(iter_) + "; last snapshot: " +
                               (last_snapshot_.empty() ? "(none)" : last_snapshot_));
        return row;
    }

    int64_t iteration() const { return iter_; }
    void note_snapshot(const std::string& path) { last_snapshot_ = path; }

    Checkpoint make_checkpoint() const {
        Checkpoint c;
        c.fingerprint = net_.cfg.fingerprint();
        c.iteration = iter_;
        c.put_params("r", net_.ps);
        c.put_params("rd", ps_d_);
        c.put_adam("r", const_cast<Adam<T>&>(opt_r_));
        c.put_adam("rd", const_cast<Adam<T>&>(opt_d_));
        c.put_rng("rng", rng_);
        c.meta["stage"] = "rectifier";
        return c;
    }

    void restore(const Checkpoint& c) {
        c.load_params("r", net_.ps);
        c.load_params("rd", ps_d_);
        c.load_adam("r", opt_r_);
        c.load_adam("rd", opt_d_);
        rng_ = c.get_rng("rng");
        iter_ = c.iteration;
    }

private:
    // Chooses what the difference encoder sees, per the input-ablation mode.
    Var<T> secondary_input(const Tensor<T>& dI, const Tensor<T>& Ihat, const Tensor<T>& I) {
        const std::string& m = net_.cfg.input_mode;
        if (m == "delta") return Var<T>::constant(dI);
        if (m == "raw_original") return Var<T>::constant(I.clone());
        if (m == "raw_inversion") return Var<T>::constant(Ihat.clone());
        throw TensorError("unknown input_mode: " + m);
    }

    RectifierNet<T>& net_;
    QuadruplePool<T> pool_;
    ParamStore<T> ps_d_;
    Rng d_init_rng_;
    stylegen::Discriminator<T> disc_;
    Adam<T> opt_r_, opt_d_;
    Rng rng_;
    PerceptualProxy<T> perc_;
    int64_t iter_ = 0;
    std::string last_snapshot_;
};

template <typename T>
Checkpoint train_rectifier(RectifierNet<T>& net, QuadruplePool<T> pool,
                           const std::string& ckpt_file, const std::string& csv_file,
                           int64_t iters, const Checkpoint* resume = nullptr) {
    RectifierTrainer<T> tr(net, std::move(pool));
    if (resume) tr.restore(*resume);
    std::ofstream csv;
    if (!csv_file.empty()) {
        std::filesystem::create_directories(std::filesystem::path(csv_file).parent_path());
        csv.open(csv_file, resume ? std::ios::app : std::ios::out);
        if (!resume) csv << "iter,l1,perceptual,gan_g,gan_d,r1,total\n";
    }
    while (tr.iteration() < iters) {
        RectifierLossRow row = tr.step();
        if (csv.is_open() && (row.iter % 50 == 0 || row.iter == iters))
            csv << row.iter << "," << row.l1 << "," << row.perceptual << "," << row.gan_g
                << "," << row.gan_d << "," << row.r1 << "," << row.total << "\n" << std::flush;
        if (!ckpt_file.empty() &&
            (row.iter % net.cfg.snapshot_every == 0 || row.iter == iters)) {
            tr.make_checkpoint().save(ckpt_file);
            tr.note_snapshot(ckpt_file);
        }
    }
    return tr.make_checkpoint();
}

// Inference-time outputs for one original image batch.
template <typename T>
struct InferResult {
    Tensor<T> Xhat, Yhat, dX, X_r, Y_r;
};

// Full two-phase inference: invert, edit, form the residual, rectify both the
// self-reconstruction and the edit.
template <typename T>
InferResult<T> infer(const InversionWorld<T>& inv, const RectifierNet<T>& net,
                     const Tensor<T>& x0, const EditRequest& req) {
    req.validate();
    NoGradGuard ng;
    InferResult<T> out;
    Var<T> vx0 = Var<T>::constant(x0);
    Tensor<T> w = inv.embed(vx0).value();
    out.Xhat = inv.gan.synthesize(Var<T>::constant(w)).value();
    Tensor<T> w_edit = inversion::edit_latent(w, req);
    out.Yhat = inv.gan.synthesize(Var<T>::constant(w_edit)).value();
    out.dX = x0.clone();
    for (int64_t i = 0; i < out.dX.numel(); ++i) out.dX[i] -= out.Xhat[i];

    Tensor<T> sec;
    const std::string& m = net.cfg.input_mode;
    if (m == "delta") sec = out.dX;
    else if (m == "raw_original") sec = x0;
    else if (m == "raw_inversion") sec = out.Xhat;
    else throw TensorError("unknown input_mode: " + m);

    out.X_r = net.rectify(Var<T>::constant(out.Xhat), Var<T>::constant(sec)).value();
    out.Y_r = net.rectify(Var<T>::constant(out.Yhat), Var<T>::constant(sec)).value();
    return out;
}

}  // namespace reganie::training
