// Copyright 2026 The ReGANIE Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "fd_check.hpp"
#include "reganie/stylegen/stylegen.hpp"

using namespace reganie;
using namespace reganie::stylegen;

namespace {

ExperimentConfig tiny_cfg() {
    ExperimentConfig c;
    c.resolution = 16;
    c.d_z = 8;
    c.d_w = 8;
    c.max_channels = 8;
    c.enc_fmap_base = 64;
    c.gen_fmap_base = 64;
    c.batch = 2;
    c.seed = 7;
    return c;
}

}  // namespace

TEST_CASE("map_latent: shape, determinism, dimension check") {
    StyleGenWorld<double> w(tiny_cfg());
    Rng rng(3);
    Var<double> z = Var<double>::constant(rng.normal<double>({4, 8}));
    auto a = w.map_latent(z);
    auto b = w.map_latent(z);
    CHECK(a.shape() == Shape{4, 8});
    CHECK(std::memcmp(a.value().ptr(), b.value().ptr(), sizeof(double) * 32) == 0);

    Var<double> bad = Var<double>::constant(rng.normal<double>({4, 7}));
    CHECK_THROWS_AS(w.map_latent(bad), TensorError);
}

TEST_CASE("map_latent: rows are independent across the batch") {
    StyleGenWorld<double> w(tiny_cfg());
    Rng rng(5);
    Tensor<double> zt = rng.normal<double>({3, 8});
    auto full = w.map_latent(Var<double>::constant(zt)).value();
    for (int i = 0; i < 3; ++i) {
        Tensor<double> row({1, 8});
        std::memcpy(row.ptr(), zt.ptr() + i * 8, sizeof(double) * 8);
        auto one = w.map_latent(Var<double>::constant(row)).value();
        for (int j = 0; j < 8; ++j)
            CHECK(one[j] == doctest::Approx(full[i * 8 + j]).epsilon(1e-12));
    }
}

TEST_CASE("synthesize: shape, bounded range, determinism, dim check") {
    StyleGenWorld<double> w(tiny_cfg());
    Rng rng(11);
    Var<double> z = Var<double>::constant(rng.normal<double>({2, 8}));
    auto img = w.synthesize(w.map_latent(z));
    CHECK(img.shape() == Shape{2, 3, 16, 16});
    CHECK(img.value().all_finite());
    for (int64_t i = 0; i < img.value().numel(); ++i) {
        CHECK(img.value()[i] >= -1.0);
        CHECK(img.value()[i] <= 1.0);
    }
    auto img2 = w.synthesize(w.map_latent(z));
    CHECK(std::memcmp(img.value().ptr(), img2.value().ptr(),
                      sizeof(double) * img.value().numel()) == 0);

    Var<double> bad_w = Var<double>::constant(rng.normal<double>({2, 9}));
    CHECK_THROWS_AS(w.synthesize(bad_w), TensorError);
}

TEST_CASE("generator gradient w.r.t. z matches finite differences") {
    StyleGenWorld<double> w(tiny_cfg());
    Rng rng(13);
    Var<double> z = Var<double>::param(rng.normal<double>({2, 8}));
    auto f = [&] { return sum_all(w.synthesize(w.map_latent(z))); };
    auto rep = testing::fd_check_leaf<double>(f, z, 1e-5, rng, 16);
    CHECK(rep.checked == 16);
    CHECK(rep.max_rel_err <= 1e-4);
}

TEST_CASE("r1 penalty on a linear critic equals (gamma/2)*||a||^2") {
    Rng rng(17);
    const int C = 3, H = 4, W = 4;
    Tensor<double> at = rng.normal<double>({C * H * W, 1});
    Var<double> a = Var<double>::constant(at);
    auto lin = [&](const Var<double>& x) {
        return matmul(reshape(x, {x.value().dim(0), -1}), a);
    };
    Var<double> real = Var<double>::constant(rng.normal<double>({5, C, H, W}));
    const double gamma = 1.7;
    double expected = 0;
    for (int64_t i = 0; i < at.numel(); ++i) expected += at[i] * at[i];
    expected *= gamma / 2.0;
    auto pen = r1_penalty<double>(lin, real, gamma);
    CHECK(pen.value()[0] == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("r1 penalty: non-negative on a real critic, zero on a constant one") {
    auto cfg = tiny_cfg();
    StyleGenWorld<double> w(cfg);
    Rng rng(19);
    Var<double> real = Var<double>::constant(rng.normal<double>({2, 3, 16, 16}, 0.3));
    auto pen = r1_penalty<double>([&](const Var<double>& x) { return w.discriminate(x); },
                                  real, 1.0);
    CHECK(pen.value()[0] >= 0.0);

    auto constant = [&](const Var<double>& x) {
        return mul(sum_all(x), Var<double>::constant(Tensor<double>::scalar(0.0)));
    };
    auto zero = r1_penalty<double>(constant, real, 1.0);
    CHECK(zero.value()[0] == doctest::Approx(0.0));
}

TEST_CASE("r1 penalty gradient w.r.t. critic weights matches finite differences") {
    auto cfg = tiny_cfg();
    StyleGenWorld<double> w(cfg);
    Rng rng(23);
    Var<double> real = Var<double>::constant(rng.normal<double>({2, 3, 16, 16}, 0.3));
    auto f = [&] {
        return r1_penalty<double>([&](const Var<double>& x) { return w.discriminate(x); },
                                  real, 1.0);
    };
    for (const std::string& name : {"d.from_rgb.w", "d.b16.conv1.w", "d.fc.w"}) {
        auto rep = testing::fd_check_leaf<double>(f, w.ps_d.at(name), 1e-4, rng, 8);
        CHECK_MESSAGE(rep.max_rel_err <= 2e-4, name, " rel err ", rep.max_rel_err);
    }
}

TEST_CASE("gan losses have the expected closed forms at zero logits") {
    Var<double> z = Var<double>::constant(Tensor<double>::zeros({4, 1}));
    CHECK(gan_generator_loss(z).value()[0] == doctest::Approx(std::log(2.0)));
    CHECK(gan_discriminator_loss(z, z).value()[0] == doctest::Approx(2.0 * std::log(2.0)));
}

TEST_CASE("gan training steps run, losses finite, resume is bit-exact") {
    auto cfg = tiny_cfg();
    cfg.batch = 2;
    Rng data_rng(29);
    Tensor<float> pool = data_rng.normal<float>({8, 3, 16, 16}, 0.5);
    for (int64_t i = 0; i < pool.numel(); ++i)
        pool[i] = std::tanh(pool[i]);

    StyleGenWorld<float> wa(cfg);
    GanTrainer<float> ta(wa, pool.clone());
    for (int i = 0; i < 4; ++i) {
        auto row = ta.step();
        CHECK(std::isfinite(row.d_loss));
        CHECK(std::isfinite(row.g_loss));
        CHECK(row.r1 >= 0.0);
    }

    StyleGenWorld<float> wb(cfg);
    GanTrainer<float> tb(wb, pool.clone());
    tb.step();
    tb.step();
    Checkpoint c = tb.make_checkpoint();

    StyleGenWorld<float> wc(cfg);
    GanTrainer<float> tc(wc, pool.clone());
    tc.restore(c);
    CHECK(tc.iteration() == 2);
    tb.step();
    tc.step();
    tb.step();
    tc.step();
    CHECK(wb.ps_g.content_hash() == wc.ps_g.content_hash());
    CHECK(wb.ps_d.content_hash() == wc.ps_d.content_hash());
    CHECK(wa.ps_g.content_hash() == wb.ps_g.content_hash());
}

TEST_CASE("checkpoint fingerprint mismatch is rejected") {
    auto cfg = tiny_cfg();
    StyleGenWorld<float> w(cfg);
    GanTrainer<float> t(w, Rng(1).normal<float>({4, 3, 16, 16}, 0.2));
    t.step();
    const std::string path = "/tmp/reganie_test_gan_ckpt.bin";
    t.make_checkpoint().save(path);

    auto cfg2 = cfg;
    cfg2.lr = 0.01;
    CHECK_THROWS_AS(Checkpoint::load(path, cfg2.phase1_fingerprint()), TensorError);
    CHECK_NOTHROW(Checkpoint::load(path, cfg.phase1_fingerprint()));
}
