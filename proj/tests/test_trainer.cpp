#include <doctest.h>

#include <cmath>

#include "attacknet/trainer.hpp"
#include "test_support.hpp"

using namespace attacknet;

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

TEST_CASE("adam with zero gradient and zero moments is a no-op") {
    Tensor p({4}, std::vector<float>{1, 2, 3, 4});
    Tensor g({4}, 0.0f), m({4}, 0.0f), v({4}, 0.0f);
    adam_update(p, g, m, v, 1, 0.001f, 0.9f, 0.999f, 1e-8f);
    CHECK(p[0] == 1.0f);
    CHECK(p[3] == 4.0f);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(m[i] == 0.0f);
        CHECK(v[i] == 0.0f);
    }
}

TEST_CASE("adam first step moves by about lr in the gradient sign direction") {
    // With zero moments, mhat/sqrt(vhat) = g/|g| regardless of magnitude.
    for (float gval : {0.5f, 3.0f, -2.0f, 1e-3f}) {
        Tensor p({1}, 1.0f);
        Tensor g({1}, gval), m({1}, 0.0f), v({1}, 0.0f);
        adam_update(p, g, m, v, 1, 0.001f, 0.9f, 0.999f, 1e-8f);
        const float moved = 1.0f - p[0];
        CHECK(std::abs(moved - (gval > 0 ? 0.001f : -0.001f)) < 1e-5f);
    }
}

TEST_CASE("adam matches a scalar recurrence computed by hand over several steps") {
    // Independent f64 recount of the update rule.
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const std::vector<double> grads = {0.3, -0.1, 0.25, 0.05};
    double ref_p = 2.0, ref_m = 0.0, ref_v = 0.0;

    Tensor p({1}, 2.0f), m({1}, 0.0f), v({1}, 0.0f);
    for (std::size_t t = 1; t <= grads.size(); ++t) {
        const double g = grads[t - 1];
        ref_m = b1 * ref_m + (1 - b1) * g;
        ref_v = b2 * ref_v + (1 - b2) * g * g;
        const double mhat = ref_m / (1 - std::pow(b1, double(t)));
        const double vhat = ref_v / (1 - std::pow(b2, double(t)));
        ref_p -= lr * mhat / (std::sqrt(vhat) + eps);

        Tensor gt({1}, static_cast<float>(g));
        adam_update(p, gt, m, v, t, float(lr), float(b1), float(b2), float(eps));
        CHECK(p[0] == doctest::Approx(ref_p).epsilon(1e-5));
    }
}

TEST_CASE("adam rejects invalid inputs") {
    Tensor p({2}), g({3}), m({2}), v({2});
    CHECK_THROWS_AS(adam_update(p, g, m, v, 1, 0.001f, 0.9f, 0.999f, 1e-8f), ShapeError);
    Tensor g2({2});
    CHECK_THROWS_AS(adam_update(p, g2, m, v, 0, 0.001f, 0.9f, 0.999f, 1e-8f), ConfigError);
}

TEST_CASE("adam_step updates every parameter and bumps the step counter") {
    ModelConfig cfg = testutil::tiny_config();
    Prng p(3);
    Model m = build_model(cfg, p);
    auto params = m.params();
    std::vector<Tensor> grads;
    for (const auto& nt : params) grads.emplace_back(nt.tensor->shape(), 0.1f);
    const float before = (*params[0].tensor)[0];
    adam_step(m, grads);
    CHECK(m.adam_t == 1);
    CHECK((*params[0].tensor)[0] != before);
    grads.pop_back();
    CHECK_THROWS_AS(adam_step(m, grads), ShapeError);
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

TEST_CASE("affine identity parameters reproduce the input exactly") {
    Prng p(6);
    Tensor x = testutil::random_tensor_f(p, {3, 9, 9}, 0.0f, 1.0f);
    Tensor y = affine_transform(x, 0.0f, 0.0f, 0.0f, 0.0f, 1.0f);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("rotation by 360 degrees is the identity up to interpolation noise") {
    Prng p(7);
    Tensor x = testutil::random_tensor_f(p, {1, 8, 8}, 0.0f, 1.0f);
    Tensor y = affine_transform(x, 360.0f, 0.0f, 0.0f, 0.0f, 1.0f);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y[i] - x[i]) < 1e-4f);
}

TEST_CASE("integer shifts translate pixels exactly") {
    Tensor x({1, 4, 4}, 0.0f);
    x[1 * 4 + 1] = 1.0f;  // single lit pixel at (1,1)
    Tensor y = affine_transform(x, 0.0f, 1.0f, 0.0f, 0.0f, 1.0f);  // shift +1 in x
    CHECK(y[1 * 4 + 2] == doctest::Approx(1.0f));
    CHECK(y[1 * 4 + 1] == doctest::Approx(0.0f));
}

TEST_CASE("augment with all-zero ranges is bit-exact identity") {
    AugmentSpec spec;
    spec.enabled = true;
    spec.rotation_deg = 0.0f;
    spec.shift_frac = 0.0f;
    spec.shear_deg = 0.0f;
    spec.zoom_lo = 1.0f;
    spec.zoom_hi = 1.0f;
    Prng p(8);
    Tensor x = testutil::random_tensor_f(p, {3, 8, 8}, 0.0f, 1.0f);
    Tensor y = augment(x, spec, p);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("augment keeps values in range and is seed deterministic") {
    AugmentSpec spec;
    spec.enabled = true;
    Prng p(9);
    Tensor x = testutil::random_tensor_f(p, {3, 16, 16}, 0.0f, 1.0f);
    Prng a(55), b(55);
    Tensor ya = augment(x, spec, a);
    Tensor yb = augment(x, spec, b);
    for (std::size_t i = 0; i < ya.size(); ++i) {
        CHECK(ya[i] == yb[i]);
        CHECK(ya[i] >= 0.0f);
        CHECK(ya[i] <= 1.0f);
    }
}

TEST_CASE("augment spec validation") {
    AugmentSpec bad;
    bad.zoom_lo = 1.2f;  // interval no longer contains 1
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    AugmentSpec bad2;
    bad2.rotation_deg = -5.0f;
    CHECK_THROWS_AS(bad2.validate(), ConfigError);
}

// ---------------------------------------------------------------------------
// Early stopping
// ---------------------------------------------------------------------------

TEST_CASE("early stopper on a strictly decreasing sequence never stops") {
    EarlyStopper s(3);
    for (std::size_t e = 1; e <= 20; ++e) {
        CHECK_FALSE(s.observe(e, 1.0 / static_cast<double>(e)));
        CHECK(s.improved_last());
    }
    CHECK(s.best_epoch() == 20);
}

TEST_CASE("early stopper on a flat sequence stops after patience stalls") {
    // Equal losses do not count as improvement: with patience 10 the stop
    // fires at epoch 11 and the best epoch stays at 1.
    EarlyStopper s(10);
    std::size_t stop_epoch = 0;
    for (std::size_t e = 1; e <= 50; ++e) {
        if (s.observe(e, 1.0)) {
            stop_epoch = e;
            break;
        }
    }
    CHECK(stop_epoch == 11);
    CHECK(s.best_epoch() == 1);
    CHECK(s.best_loss() == 1.0);
}

TEST_CASE("early stopper improvement resets the stall counter") {
    EarlyStopper s(3);
    CHECK_FALSE(s.observe(1, 0.9));
    CHECK_FALSE(s.observe(2, 0.95));  // stall 1
    CHECK_FALSE(s.observe(3, 0.96));  // stall 2
    CHECK_FALSE(s.observe(4, 0.85));  // improvement, reset
    CHECK(s.best_epoch() == 4);
    CHECK_FALSE(s.observe(5, 0.9));  // stall 1
    CHECK_FALSE(s.observe(6, 0.9));  // stall 2
    CHECK(s.observe(7, 0.9));        // stall 3 -> stop
    CHECK(s.best_epoch() == 4);
    CHECK(s.best_loss() == 0.85);
}

TEST_CASE("early stopper with noisy plateau stops exactly patience epochs after the best") {
    EarlyStopper s(5);
    const std::vector<double> losses = {0.8, 0.6, 0.61, 0.6, 0.62, 0.605, 0.61, 0.6};
    std::size_t stop_epoch = 0;
    for (std::size_t e = 1; e <= losses.size(); ++e) {
        if (s.observe(e, losses[e - 1])) {
            stop_epoch = e;
            break;
        }
    }
    CHECK(stop_epoch == 7);  // best at 2; epochs 3..7 are 5 non-improvements
    CHECK(s.best_epoch() == 2);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

struct FitFixture {
    std::string root;
    DatasetManifest mf;

    explicit FitFixture(const std::string& tag, std::size_t per_class = 12,
                        bool shuffle_labels = false) {
        root = testutil::temp_dir(tag);
        testutil::write_synthetic_dataset(root, per_class, 16, 16, 77, shuffle_labels);
        mf = load_dataset(root, tag, 0.5, 3);
    }
};

ModelConfig fit_config() {
    ModelConfig cfg = testutil::tiny_config();
    cfg.batch_size = 6;
    cfg.max_epochs = 4;
    cfg.patience = 10;
    return cfg;
}

}  // namespace

TEST_CASE("fit learns a separable problem and logs every epoch") {
    FitFixture fx("fit_basic");
    ModelConfig cfg = fit_config();
    Prng pm(cfg.seed);
    Model m = build_model(cfg, pm);
    AugmentSpec aug;  // disabled
    Prng pt(cfg.seed);
    auto [trained, log] = fit(m, fx.mf, fx.mf, aug, pt);

    REQUIRE(log.records.size() <= cfg.max_epochs);
    REQUIRE(!log.records.empty());
    CHECK(log.records.front().epoch == 1);
    for (std::size_t i = 1; i < log.records.size(); ++i)
        CHECK(log.records[i].epoch == log.records[i - 1].epoch + 1);

    // The color split is trivially separable; loss must drop substantially.
    CHECK(log.records.back().train_loss < log.records.front().train_loss);
    CHECK(log.best_epoch >= 1);
    CHECK(log.best_epoch <= log.records.size());

    const std::string csv = log.to_csv();
    CHECK(csv.rfind("epoch,train_loss,train_acc,val_loss,val_acc\n", 0) == 0);
    CHECK(csv.find("\n1,") != std::string::npos);
}

TEST_CASE("fit is bit-exact deterministic given equal seeds") {
    FitFixture fx("fit_det");
    ModelConfig cfg = fit_config();
    cfg.max_epochs = 2;
    AugmentSpec aug;
    aug.enabled = true;  // exercise the augmentation draw order too

    auto run = [&] {
        Prng pm(11);
        Model m = build_model(cfg, pm);
        Prng pt(22);
        return fit(m, fx.mf, fx.mf, aug, pt);
    };
    auto [m1, log1] = run();
    auto [m2, log2] = run();

    REQUIRE(log1.records.size() == log2.records.size());
    for (std::size_t i = 0; i < log1.records.size(); ++i) {
        CHECK(log1.records[i].train_loss == log2.records[i].train_loss);
        CHECK(log1.records[i].val_loss == log2.records[i].val_loss);
    }
    auto p1 = m1.params(), p2 = m2.params();
    for (std::size_t i = 0; i < p1.size(); ++i)
        for (std::size_t j = 0; j < p1[i].tensor->size(); ++j)
            CHECK((*p1[i].tensor)[j] == (*p2[i].tensor)[j]);
}

TEST_CASE("fit returns the weights of the best validation epoch") {
    FitFixture fx("fit_best");
    ModelConfig cfg = fit_config();
    cfg.max_epochs = 3;

    auto run = [&](std::size_t epochs) {
        ModelConfig c = cfg;
        c.max_epochs = epochs;
        Prng pm(5);
        Model m = build_model(c, pm);
        AugmentSpec aug;
        Prng pt(6);
        return fit(m, fx.mf, fx.mf, aug, pt);
    };
    auto [full, log] = run(3);
    REQUIRE(log.best_epoch >= 1);
    // Re-running the identical schedule truncated at the best epoch must
    // reproduce the returned weights bit for bit.
    auto [truncated, tlog] = run(log.best_epoch);
    auto pf = full.params(), ptr = truncated.params();
    for (std::size_t i = 0; i < pf.size(); ++i)
        for (std::size_t j = 0; j < pf[i].tensor->size(); ++j)
            CHECK((*pf[i].tensor)[j] == (*ptr[i].tensor)[j]);
}

TEST_CASE("fit rejects degenerate datasets") {
    FitFixture fx("fit_reject");
    ModelConfig cfg = fit_config();
    Prng pm(1);
    Model m = build_model(cfg, pm);
    AugmentSpec aug;

    DatasetManifest empty;
    empty.name = "empty";
    Prng pt(1);
    CHECK_THROWS_AS(fit(m, empty, fx.mf, aug, pt), ConfigError);

    DatasetManifest one_class = fx.mf;
    for (auto& s : one_class.samples)
        if (s.label == Label::Attack) s.split = Split::Test;
    Prng pt2(1);
    CHECK_THROWS_AS(fit(m, one_class, fx.mf, aug, pt2), ConfigError);
}

TEST_CASE("evaluate_loss_acc agrees with a direct per-sample recount") {
    FitFixture fx("eval_recount", 6);
    ModelConfig cfg = testutil::tiny_config();
    cfg.batch_size = 4;  // force a partial final batch
    Prng pm(2);
    Model m = build_model(cfg, pm);

    auto data = load_split(fx.mf, Split::Val, cfg.input_h, cfg.input_w);
    REQUIRE(!data.empty());
    auto [loss, acc] = evaluate_loss_acc(m, data);

    // Recount one sample at a time (batch statistics must not matter in
    // infer mode).
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const auto& s : data) {
        Tensor x({1, 3, cfg.input_h, cfg.input_w});
        std::copy(s.image.data(), s.image.data() + s.image.size(), x.data());
        Tensor probs = m.forward(x, nn::Mode::Infer, nullptr, nullptr);
        auto [l, d] = nn::cross_entropy_loss(probs, {s.label});
        loss_sum += l;
        std::size_t best = probs.at2(0, 1) > probs.at2(0, 0) ? 1 : 0;
        if (best == s.label) ++correct;
    }
    CHECK(loss == doctest::Approx(loss_sum / double(data.size())).epsilon(1e-5));
    CHECK(acc == doctest::Approx(double(correct) / double(data.size())));
}
