#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "support/oracles.hpp"
#include "wmhseg/checkpoint.hpp"
#include "wmhseg/experiment.hpp"
#include "wmhseg/loss.hpp"
#include "wmhseg/ops.hpp"
#include "wmhseg/optimizer.hpp"
#include "wmhseg/phantom.hpp"
#include "wmhseg/preprocess.hpp"
#include "wmhseg/training.hpp"

using namespace wmhseg;

namespace {

SliceSample numbered_sample(std::size_t channels, std::size_t h, std::size_t w) {
    SliceSample s{channels, h, w, {}, {}};
    for (std::size_t i = 0; i < channels * h * w; ++i) s.image.push_back(static_cast<double>(i));
    for (std::size_t i = 0; i < h * w; ++i) s.label.push_back(static_cast<std::uint8_t>(i % 3 == 0));
    return s;
}

PhantomConfig small_phantom() {
    PhantomConfig c;
    c.dims = {32, 32, 4};
    c.spacing = {1.0, 1.0, 3.0};
    c.brain_radii = {14.0, 12.0, 3.5};
    c.wm_radii = {10.0, 8.0, 3.0};
    c.center_jitter = 1.0;
    c.min_lesions = 1;
    c.max_lesions = 3;
    c.min_lesion_radius = 2.0;
    c.max_lesion_radius = 3.0;
    c.min_confounders = 0;
    c.max_confounders = 1;
    c.min_confounder_radius = 1.0;
    c.max_confounder_radius = 1.5;
    c.confounder_margin = 2;
    return c;
}

}  // namespace

TEST_SUITE("loss") {
    TEST_CASE("beta from a 975/1000 background slice is 0.975 exactly") {
        std::vector<std::uint8_t> slice(1000, 0);
        std::fill(slice.begin(), slice.begin() + 25, 1);
        const std::vector<std::vector<std::uint8_t>> data{slice};
        CHECK(compute_beta(data) == 0.975);
    }

    TEST_CASE("beta of an all-background dataset is 1 and of an empty one is an error") {
        const std::vector<std::vector<std::uint8_t>> data{std::vector<std::uint8_t>(10, 0),
                                                          std::vector<std::uint8_t>(4, 0)};
        CHECK(compute_beta(data) == 1.0);
        CHECK_THROWS(compute_beta(std::vector<std::vector<std::uint8_t>>{}));
    }

    TEST_CASE("beta is the mean of per-slice background fractions") {
        const std::vector<std::vector<std::uint8_t>> data{{0, 0, 0, 1}, {0, 1}};
        CHECK(compute_beta(data) == (0.75 + 0.5) / 2.0);
    }

    TEST_CASE("single foreground pixel at 0.5 with beta 0.9") {
        LossConfig cfg;
        cfg.beta = 0.9;
        const std::vector<double> p{0.5};
        const std::vector<std::uint8_t> y{1};
        const auto r = weighted_bce(p, y, cfg);
        CHECK(std::abs(r.loss - (-0.9 * std::log(0.5))) <= 1e-12);
        CHECK(std::abs(r.loss - 0.62383) <= 1e-5);
        cfg.placement = WeightPlacement::Swapped;
        CHECK(std::abs(weighted_bce(p, y, cfg).loss - (-0.1 * std::log(0.5))) <= 1e-12);
    }

    TEST_CASE("weighted_bce matches direct summation on random instances") {
        Rng rng(123);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = 1 + rng.below(1024);
            std::vector<double> p(n);
            std::vector<std::uint8_t> y(n);
            for (std::size_t i = 0; i < n; ++i) {
                p[i] = rng.uniform();
                y[i] = static_cast<std::uint8_t>(rng.below(2));
            }
            LossConfig cfg;
            cfg.beta = rng.uniform();
            cfg.placement = rng.below(2) ? WeightPlacement::Paper : WeightPlacement::Swapped;
            const auto r = weighted_bce(p, y, cfg);
            const double ref = oracle::weighted_bce(p, y, cfg.foreground_weight(), cfg.background_weight(), cfg.epsilon);
            CHECK(std::abs(r.loss - ref) <= 1e-10);
            double ws = 0.0;
            for (auto v : y) ws += v ? cfg.foreground_weight() : cfg.background_weight();
            CHECK(std::abs(r.weight_sum - ws) <= 1e-9);
        }
    }

    TEST_CASE("closed-form logit gradient matches finite differences through the sigmoid") {
        Rng rng(7);
        LossConfig cfg;
        cfg.beta = 0.8;
        const std::size_t n = 64;
        std::vector<double> z(n);
        std::vector<std::uint8_t> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = rng.uniform(-4.0, 4.0);
            y[i] = static_cast<std::uint8_t>(rng.below(2));
        }
        auto loss_at = [&](const std::vector<double>& logits) {
            std::vector<double> p(n);
            for (std::size_t i = 0; i < n; ++i) p[i] = ops::sigmoid_scalar(logits[i]);
            return weighted_bce(p, y, cfg);
        };
        const auto base = loss_at(z);
        const double h = 1e-5;
        for (std::size_t i = 0; i < n; ++i) {
            auto zp = z, zm = z;
            zp[i] += h;
            zm[i] -= h;
            const double num = (loss_at(zp).loss - loss_at(zm).loss) / (2 * h);
            const double rel = std::abs(num - base.grad_logits[i]) / std::max({std::abs(num), std::abs(base.grad_logits[i]), 1e-6});
            CHECK(rel <= 1e-4);
        }
    }

    TEST_CASE("perfect prediction reaches the epsilon floor") {
        LossConfig cfg;
        cfg.beta = 0.7;
        const std::vector<std::uint8_t> y{1, 0, 1, 0, 0};
        std::vector<double> p;
        for (auto v : y) p.push_back(v ? 1.0 - cfg.epsilon : cfg.epsilon);
        const double bound = -static_cast<double>(y.size()) * std::log(1.0 - cfg.epsilon);
        CHECK(weighted_bce(p, y, cfg).loss <= bound + 1e-15);
    }

    TEST_CASE("probabilities at 0 and 1 stay finite through the clamp") {
        const std::vector<double> p{0.0, 1.0};
        const std::vector<std::uint8_t> y{1, 0};
        const auto r = weighted_bce(p, y, LossConfig{});
        CHECK(std::isfinite(r.loss));
        CHECK(r.loss > 10.0);
    }

    TEST_CASE("invalid configs and inputs are rejected") {
        LossConfig cfg;
        cfg.beta = 1.5;
        CHECK_THROWS(cfg.validate());
        cfg.beta = 0.5;
        cfg.epsilon = 0.6;
        CHECK_THROWS(cfg.validate());
        const std::vector<double> p{0.5, 0.5};
        const std::vector<std::uint8_t> y{1};
        CHECK_THROWS(weighted_bce(p, y, LossConfig{}));
        CHECK(weight_placement_from_string(to_string(WeightPlacement::Swapped)) == WeightPlacement::Swapped);
        CHECK_THROWS(weight_placement_from_string("other"));
    }
}

TEST_SUITE("preprocess") {
    TEST_CASE("masked min and max map to 0 and 1; outside values are clamped") {
        Volume3D v(Grid{{4, 1, 1}, {1, 1, 1}}, std::vector<float>{2.0f, 4.0f, 6.0f, 10.0f});
        BinaryMask3D m(Grid{{4, 1, 1}, {1, 1, 1}}, {1, 1, 1, 0});
        const Volume3D n = normalize_to_mask(v, m);
        CHECK(n[0] == 0.0f);
        CHECK(n[1] == 0.5f);
        CHECK(n[2] == 1.0f);
        CHECK(n[3] == 1.0f);
    }

    TEST_CASE("degenerate masked range and empty mask are errors") {
        Volume3D v(Grid{{3, 1, 1}, {1, 1, 1}}, std::vector<float>{5.0f, 5.0f, 9.0f});
        BinaryMask3D m(Grid{{3, 1, 1}, {1, 1, 1}}, {1, 1, 0});
        try {
            (void)normalize_to_mask(v, m);
            FAIL("expected an error");
        } catch (const PreprocessError& e) {
            CHECK(std::string(e.what()).find("degenerate intensity range") != std::string::npos);
        }
        CHECK_THROWS_AS(normalize_to_mask(v, BinaryMask3D(v.grid())), PreprocessError);
        CHECK_THROWS_AS(normalize_min_max(Volume3D(v.grid(), 1.0f)), PreprocessError);
    }

    TEST_CASE("min-max normalisation spans [0, 1]") {
        Volume3D v(Grid{{3, 1, 1}, {1, 1, 1}}, std::vector<float>{-1.0f, 0.0f, 3.0f});
        const Volume3D n = normalize_min_max(v);
        CHECK(n[0] == 0.0f);
        CHECK(n[1] == 0.25f);
        CHECK(n[2] == 1.0f);
    }

    TEST_CASE("slice samples are channel-major with height ny and width nx") {
        Volume3D a(Grid{{3, 2, 2}, {1, 1, 1}}), b(Grid{{3, 2, 2}, {1, 1, 1}});
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = static_cast<float>(i);
            b[i] = static_cast<float>(100 + i);
        }
        BinaryMask3D m(a.grid());
        m.at(2, 1, 1) = 1;
        const auto s = make_slice_samples({&a, &b}, m);
        REQUIRE(s.size() == 2);
        CHECK(s[1].height == 2);
        CHECK(s[1].width == 3);
        CHECK(s[1].channels == 2);
        CHECK(s[1].image[0] == 6.0);
        CHECK(s[1].image[6] == 106.0);
        CHECK(s[1].label[5] == 1);
        CHECK_THROWS(make_slice_samples({&a, &b}, BinaryMask3D(Grid{{2, 2, 2}, {1, 1, 1}})));
    }

    TEST_CASE("identity element leaves the sample unchanged; four quarter turns return it") {
        const SliceSample s = numbered_sample(2, 4, 4);
        CHECK(apply_dihedral(s, 0) == s);
        SliceSample r = s;
        for (int k = 0; k < 4; ++k) r = apply_dihedral(r, 1);
        CHECK(r == s);
        CHECK(apply_dihedral(apply_dihedral(s, 4), 4) == s);
    }

    TEST_CASE("quarter turn is counter-clockwise") {
        // [[0 1 2]
        //  [3 4 5]]  -> [[2 5] [1 4] [0 3]]
        const SliceSample s = numbered_sample(1, 2, 3);
        const SliceSample r = apply_dihedral(s, 1);
        CHECK(r.height == 3);
        CHECK(r.width == 2);
        CHECK(r.image == std::vector<double>{2, 5, 1, 4, 0, 3});
    }

    TEST_CASE("all eight elements are distinct and close under composition") {
        const SliceSample s = numbered_sample(1, 3, 3);
        std::set<std::vector<double>> seen;
        for (unsigned e = 0; e < 8; ++e) seen.insert(apply_dihedral(s, e).image);
        CHECK(seen.size() == 8);
        for (unsigned a = 0; a < 8; ++a)
            for (unsigned b = 0; b < 8; ++b)
                CHECK(seen.count(apply_dihedral(apply_dihedral(s, a), b).image) == 1);
    }

    TEST_CASE("image and label receive the same transform") {
        Rng rng(3);
        for (unsigned e = 0; e < 8; ++e) {
            SliceSample s{1, 5, 5, std::vector<double>(25), std::vector<std::uint8_t>(25)};
            for (std::size_t i = 0; i < 25; ++i) {
                s.label[i] = static_cast<std::uint8_t>(rng.below(2));
                s.image[i] = s.label[i];
            }
            const SliceSample t = apply_dihedral(s, e);
            for (std::size_t i = 0; i < 25; ++i) CHECK(t.image[i] == static_cast<double>(t.label[i]));
        }
    }

    TEST_CASE("augmentation of non-square slices keeps the shape") {
        const SliceSample s = numbered_sample(2, 4, 6);
        Rng rng(1);
        for (int k = 0; k < 50; ++k) {
            const SliceSample a = augment(s, rng);
            CHECK(a.height == 4);
            CHECK(a.width == 6);
            auto x = a.image, y = s.image;
            std::sort(x.begin(), x.end());
            std::sort(y.begin(), y.end());
            CHECK(x == y);
        }
    }

    TEST_CASE("augmentation of square slices reaches all eight elements") {
        const SliceSample s = numbered_sample(1, 3, 3);
        Rng rng(2);
        std::set<std::vector<double>> seen;
        for (int k = 0; k < 200; ++k) seen.insert(augment(s, rng).image);
        CHECK(seen.size() == 8);
    }
}

TEST_SUITE("optimizer") {
    TEST_CASE("plain SGD step: w = 1, g = 0.5, lr = 0.1 gives 0.95") {
        ParameterSet set;
        Parameter& p = set.add("w", {1, 1, 1, 1});
        p.value[0] = 1.0;
        p.grad[0] = 0.5;
        SgdMomentum opt(0.1, 0.0);
        opt.step(set);
        CHECK(set[0].value[0] == doctest::Approx(0.95).epsilon(1e-15));
        CHECK(set[0].grad[0] == 0.0);
    }

    TEST_CASE("zero gradient and zero velocity leave the weight unchanged") {
        ParameterSet set;
        set.add("w", {1, 1, 1, 2}).value.fill(3.0);
        SgdMomentum opt(0.1, 0.9);
        opt.step(set);
        CHECK(set[0].value[0] == 3.0);
        CHECK(set[0].value[1] == 3.0);
    }

    TEST_CASE("momentum 0.9 with constant gradient: decreases of 0.1 then 0.19") {
        ParameterSet set;
        set.add("w", {1, 1, 1, 1});
        SgdMomentum opt(0.1, 0.9);
        set[0].grad[0] = 1.0;
        opt.step(set);
        CHECK(std::abs(set[0].value[0] - (-0.1)) <= 1e-15);
        set[0].grad[0] = 1.0;
        opt.step(set);
        CHECK(std::abs(set[0].value[0] - (-0.29)) <= 1e-15);
        CHECK(std::abs(opt.velocity()[0][0] - 1.9) <= 1e-15);
    }

    TEST_CASE("invalid hyper-parameters are rejected") {
        CHECK_THROWS(SgdMomentum(0.0, 0.9));
        CHECK_THROWS(SgdMomentum(0.1, 1.0));
        CHECK_THROWS(SgdMomentum(0.1, -0.1));
    }
}

TEST_SUITE("training") {
    TEST_CASE("default epochs is 4 and only double precision is accepted") {
        TrainConfig cfg;
        CHECK(cfg.epochs == 4);
        CHECK_NOTHROW(cfg.validate());
        cfg.precision = "float";
        CHECK_THROWS(cfg.validate());
        TrainConfig bad;
        bad.learning_rate = 0.0;
        CHECK_THROWS(bad.validate());
        bad = TrainConfig{};
        bad.batch_size = 0;
        CHECK_THROWS(bad.validate());
        bad = TrainConfig{};
        bad.validation_fraction = 1.0;
        CHECK_THROWS(bad.validate());
    }

    TEST_CASE("case split is a sorted partition with at least one case on each side") {
        for (std::size_t n = 2; n < 30; ++n) {
            for (double frac : {0.01, 0.15, 0.5, 0.99}) {
                const CaseSplit s = split_cases(n, frac, n * 31);
                CHECK(!s.train.empty());
                CHECK(!s.validation.empty());
                CHECK(s.train.size() + s.validation.size() == n);
                CHECK(std::is_sorted(s.train.begin(), s.train.end()));
                CHECK(std::is_sorted(s.validation.begin(), s.validation.end()));
                std::vector<std::size_t> all = s.train;
                all.insert(all.end(), s.validation.begin(), s.validation.end());
                std::sort(all.begin(), all.end());
                std::vector<std::size_t> expect(n);
                std::iota(expect.begin(), expect.end(), 0);
                CHECK(all == expect);
            }
        }
        CHECK(split_cases(10, 0.15, 1).validation.size() == 2);
        CHECK(split_cases(10, 0.15, 1).validation == split_cases(10, 0.15, 1).validation);
        CHECK_THROWS(split_cases(1, 0.5, 1));
        CHECK_THROWS(split_cases(5, 0.0, 1));
    }

    TEST_CASE("batches stack samples and reject mixed shapes") {
        const SliceSample a = numbered_sample(2, 3, 4), b = numbered_sample(2, 3, 4);
        const Array4 batch = make_batch({&a, &b});
        CHECK(batch.shape() == Shape4{2, 2, 3, 4});
        CHECK(batch.at(1, 1, 2, 3) == a.image.back());
        const SliceSample c = numbered_sample(2, 4, 4);
        CHECK_THROWS(make_batch({&a, &c}));
    }

    TEST_CASE("same seed gives a bit-identical history and network") {
        const auto cases = generate_dataset(small_phantom(), 3, 5);
        TrainConfig cfg;
        cfg.epochs = 5;
        cfg.max_iterations = 6;
        cfg.seed = 9;
        cfg.validation_fraction = 0.34;
        const NetworkSpec spec = wmh_network_spec(2, BlockKind::Residual, 2);
        const TrainResult a = train_wmh_stage(cases, spec, cfg, LossConfig{}, PipelineConfig{});
        const TrainResult b = train_wmh_stage(cases, spec, cfg, LossConfig{}, PipelineConfig{});
        CHECK(a.history.iteration_loss == b.history.iteration_loss);
        CHECK(a.history.epoch_validation_dice == b.history.epoch_validation_dice);
        CHECK(encode_checkpoint(a.network) == encode_checkpoint(b.network));
        CHECK(a.history.iterations == 6);
        CHECK(a.history.iteration_loss.size() == 6);
        CHECK(a.history.validation_cases.size() == 1);
        cfg.seed = 10;
        const TrainResult c = train_wmh_stage(cases, spec, cfg, LossConfig{}, PipelineConfig{});
        CHECK(c.history.iteration_loss != a.history.iteration_loss);
    }

    TEST_CASE("history CSV and summary are well formed") {
        TrainHistory h;
        h.iteration_loss = {0.5, 0.25};
        h.iterations = 2;
        const std::string csv = h.loss_csv();
        CHECK(csv.rfind("iteration,loss\n1,", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
        CHECK(h.summary_json().find("\"iterations\"") != std::string::npos);
    }

    TEST_CASE("a small network overfits eight phantom slices") {
        // Three 4-slice cases: two train (8 slices), one validation.
        const auto cases = generate_dataset(small_phantom(), 3, 12);
        TrainConfig cfg;
        cfg.epochs = 500;
        cfg.max_iterations = 500;
        cfg.learning_rate = 0.03;
        cfg.seed = 4;
        cfg.validation_fraction = 0.34;
        cfg.augmentation = false;
        const PipelineConfig pipe;
        const TrainResult r = train_wmh_stage(cases, wmh_network_spec(4, BlockKind::Residual, 2), cfg, LossConfig{}, pipe);
        CHECK(r.history.iterations <= 500);
        std::vector<SliceSample> train_slices;
        for (const PhantomCase* c : select_cases(cases, r.history.train_cases)) {
            const auto tc = wmh_training_case(*c, pipe);
            train_slices.insert(train_slices.end(), tc.slices.begin(), tc.slices.end());
        }
        REQUIRE(train_slices.size() == 8);
        std::vector<const SliceSample*> ptrs;
        for (const auto& s : train_slices) ptrs.push_back(&s);
        const double d = slice_dice(r.network, ptrs, 0.5);
        MESSAGE("training dice " << d);
        CHECK(d >= 0.90);
    }

    TEST_CASE("too few cases is an error") {
        const auto cases = generate_dataset(small_phantom(), 1, 5);
        CHECK_THROWS(train_wm_stage(cases, wm_network_spec(2), TrainConfig{}, LossConfig{}));
    }
}
