#include "splat/activations.hpp"
#include "splat/adc.hpp"
#include "splat/errors.hpp"
#include "splat/projection.hpp"
#include "splat/renderer.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace splat;

namespace {

GaussianCloud single_primitive(double alpha, double scale, const Vec3& pos) {
    GaussianCloud cloud;
    cloud.push_back(pos, Vec3::Constant(std::log(scale)), Vec4(1, 0, 0, 0),
                    inverse_opacity_activation(alpha), Vec3(1.2, -0.4, 0.3));
    return cloud;
}

GaussianCloud cloud_with_opacities(const std::vector<double>& alphas) {
    GaussianCloud cloud;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        cloud.push_back(Vec3(static_cast<double>(i), 0, 3), Vec3::Constant(std::log(0.2)),
                        Vec4(1, 0, 0, 0), inverse_opacity_activation(alphas[i]),
                        Vec3(0.1 * i, 0, 0));
    }
    return cloud;
}

std::vector<double> activated_opacities(const GaussianCloud& cloud) {
    std::vector<double> out;
    for (double logit : cloud.opacity_logits) out.push_back(sigmoid(logit));
    return out;
}

} // namespace

TEST_CASE("track_max_alpha: absolute-value running maximum") {
    AdcState state = AdcState::zeros(3);
    state.max_alpha_grad = {0.1, 0.1, 0.0};

    std::vector<double> grads = {-0.3, 0.05, 0.2};
    track_max_alpha(state, grads);
    CHECK(state.max_alpha_grad[0] == 0.3);
    CHECK(state.max_alpha_grad[1] == 0.1);
    CHECK(state.max_alpha_grad[2] == 0.2);

    state.reset();
    CHECK(state.max_alpha_grad == std::vector<double>{0.0, 0.0, 0.0});
    track_max_alpha(state, grads);
    CHECK(state.max_alpha_grad[0] == 0.3);

    std::vector<double> wrong(4, 0.0);
    CHECK_THROWS_AS(track_max_alpha(state, wrong), ValidationError);
}

TEST_CASE("select_densify: strict threshold comparison") {
    AdcConfig config;
    config.tau_densify = 0.25;

    AdcState state = AdcState::zeros(3);
    CHECK(select_densify(state, config).empty());

    state.max_alpha_grad = {0.1, 0.5, 0.3};
    CHECK(select_densify(state, config) == std::vector<int>{1, 2});

    // A value exactly at the threshold is not selected.
    state.max_alpha_grad = {0.25, 0.25, 0.25};
    CHECK(select_densify(state, config).empty());
}

TEST_CASE("select_densify: matches a brute-force filter on random states") {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> dist(0.0, 0.01);
    AdcConfig config;
    config.tau_densify = 0.004;
    for (int trial = 0; trial < 50; ++trial) {
        AdcState state = AdcState::zeros(64);
        for (auto& v : state.max_alpha_grad) v = dist(rng);
        std::vector<int> expected;
        for (int i = 0; i < 64; ++i) {
            if (state.max_alpha_grad[i] > config.tau_densify) expected.push_back(i);
        }
        CHECK(select_densify(state, config) == expected);
    }
}

TEST_CASE("baseline_select_densify: mean positional gradient rule") {
    AdcConfig config;
    config.tau_pos = 0.0002;

    AdcState state = AdcState::zeros(3);
    CHECK(baseline_select_densify(state, config).empty());

    // 0.01 accumulated over 10 observations: mean 0.001 > threshold.
    state.pos_grad_accum = {0.01, 0.001, 0.05};
    state.pos_grad_count = {10, 10, 0};
    const std::vector<int> sel = baseline_select_densify(state, config);
    CHECK(sel == std::vector<int>{0, 1});
    // index 2 has no observations and is never selected despite its sum
}

TEST_CASE("track_positional: only visible primitives accumulate") {
    AdcState state = AdcState::zeros(3);
    std::vector<double> norms = {1.0, 2.0, 3.0};
    std::vector<uint8_t> visible = {1, 0, 1};
    track_positional(state, norms, visible);
    track_positional(state, norms, visible);
    CHECK(state.pos_grad_accum == std::vector<double>{2.0, 0.0, 6.0});
    CHECK(state.pos_grad_count == std::vector<int>{2, 0, 2});
}

TEST_CASE("clone_opacity_correction: pinned values and the transparency identity") {
    CHECK(clone_opacity_correction(0.75) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(clone_opacity_correction(0.9975) == doctest::Approx(0.95).epsilon(1e-9));

    // Small-alpha asymptote: the stable algebraic form alpha / (1 + sqrt(1 - alpha)).
    const double tiny = clone_opacity_correction(1e-6);
    CHECK(tiny == doctest::Approx(1e-6 / (1.0 + std::sqrt(1.0 - 1e-6))).epsilon(1e-9));
    CHECK(tiny == doctest::Approx(5.0000e-7).epsilon(1e-4));

    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> dist(1e-9, 1.0 - 1e-9);
    for (int i = 0; i < 100000; ++i) {
        const double alpha = dist(rng);
        const double corrected = clone_opacity_correction(alpha);
        CHECK(std::abs((1.0 - alpha) - (1.0 - corrected) * (1.0 - corrected)) <= 1e-9);
    }

    CHECK_THROWS_AS(clone_opacity_correction(0.0), DomainError);
    CHECK_THROWS_AS(clone_opacity_correction(1.0), DomainError);
    CHECK_THROWS_AS(clone_opacity_correction(-0.5), DomainError);
}

TEST_CASE("densify: cloning duplicates with corrected opacity") {
    GaussianCloud cloud = single_primitive(0.75, 0.3, Vec3(0, 0, 3));
    OptimizerState opt = OptimizerState::init(cloud);
    opt.m.positions[0] = Vec3(1, 2, 3); // nonzero moments to verify preservation
    AdcState state = AdcState::zeros(1);
    state.max_alpha_grad[0] = 0.5;

    AdcConfig config;
    config.size_threshold = 1.0; // max scale 0.3 < 1.0: clone
    std::mt19937_64 rng(55);

    const DensifyResult res = densify(cloud, opt, state, {0}, config, rng);
    CHECK(res.clones == 1);
    CHECK(res.splits == 0);
    CHECK(res.n_before == 1);
    CHECK(res.n_after == 2);
    REQUIRE(cloud.size() == 2);

    const auto alphas = activated_opacities(cloud);
    for (double a : alphas) {
        CHECK(std::abs((1.0 - 0.75) - (1.0 - a) * (1.0 - a)) <= 1e-9);
    }

    // The copy's position is jittered off the original.
    CHECK(cloud.positions[0] != cloud.positions[1]);
    CHECK((cloud.positions[0] - cloud.positions[1]).norm() < 0.3); // 0.01 * sampled offset

    // Original row keeps its moments; the new row starts cold.
    CHECK(opt.m.positions[0] == Vec3(1, 2, 3));
    CHECK(opt.m.positions[1] == Vec3::Zero());
    CHECK(opt.steps[1] == 0);

    // Accumulators reset for everyone.
    CHECK(state.size() == 2);
    CHECK(state.max_alpha_grad[0] == 0.0);
    CHECK(state.max_alpha_grad[1] == 0.0);
}

TEST_CASE("densify: splitting replaces the parent with two smaller children") {
    GaussianCloud cloud = single_primitive(0.6, 0.8, Vec3(0.2, -0.1, 3));
    cloud.push_back(Vec3(1, 1, 4), Vec3::Constant(std::log(0.1)), Vec4(1, 0, 0, 0),
                    inverse_opacity_activation(0.4), Vec3::Zero());
    OptimizerState opt = OptimizerState::init(cloud);
    opt.m.opacity_logits[1] = 7.0;
    AdcState state = AdcState::zeros(2);

    AdcConfig config;
    config.size_threshold = 0.5; // max scale 0.8 >= 0.5: split
    std::mt19937_64 rng(57);

    const DensifyResult res = densify(cloud, opt, state, {0}, config, rng);
    CHECK(res.splits == 1);
    CHECK(res.n_after == 3); // parent removed, 2 children added
    REQUIRE(cloud.size() == 3);

    // Surviving untouched row is now row 0 and kept its moments.
    CHECK(opt.m.opacity_logits[0] == 7.0);

    // Children carry parent opacity and scale / 1.6.
    const auto alphas = activated_opacities(cloud);
    for (int child = 1; child <= 2; ++child) {
        CHECK(alphas[child] == doctest::Approx(0.6).epsilon(1e-9));
        const Vec3 scale = cloud.log_scales[child].array().exp();
        for (int k = 0; k < 3; ++k) {
            CHECK(scale[k] == doctest::Approx(0.8 / 1.6).epsilon(1e-9));
        }
        CHECK(opt.steps[child] == 0);
    }
}

TEST_CASE("densify: empty selection still resets accumulators") {
    GaussianCloud cloud = single_primitive(0.5, 0.2, Vec3(0, 0, 3));
    const GaussianCloud before = cloud;
    OptimizerState opt = OptimizerState::init(cloud);
    AdcState state = AdcState::zeros(1);
    state.max_alpha_grad[0] = 0.9;
    state.pos_grad_accum[0] = 1.0;
    state.pos_grad_count[0] = 4;

    AdcConfig config;
    config.size_threshold = 1.0;
    std::mt19937_64 rng(59);
    const DensifyResult res = densify(cloud, opt, state, {}, config, rng);

    CHECK(res.n_after == 1);
    CHECK(cloud.positions[0] == before.positions[0]);
    CHECK(cloud.opacity_logits[0] == before.opacity_logits[0]);
    CHECK(state.max_alpha_grad[0] == 0.0);
    CHECK(state.pos_grad_accum[0] == 0.0);
    CHECK(state.pos_grad_count[0] == 0);
}

TEST_CASE("densify: invalid index is rejected") {
    GaussianCloud cloud = single_primitive(0.5, 0.2, Vec3(0, 0, 3));
    OptimizerState opt = OptimizerState::init(cloud);
    AdcState state = AdcState::zeros(1);
    AdcConfig config;
    config.size_threshold = 1.0;
    std::mt19937_64 rng(61);
    CHECK_THROWS_AS(densify(cloud, opt, state, {1}, config, rng), ValidationError);
    CHECK_THROWS_AS(densify(cloud, opt, state, {-1}, config, rng), ValidationError);
}

TEST_CASE("clone correction preserves compositing exactly at the mode") {
    // The projected mean lands exactly on a pixel center, where the falloff
    // is 1 and the pair of corrected copies blends to precisely the original.
    Camera cam = oracle::test_camera(16, 16, 30.0);
    const double z = 3.0;
    const double x_world = 0.5 * z / cam.fx; // mean2d = (8.5, 8.5)

    GaussianCloud cloud = single_primitive(0.75, 0.25, Vec3(x_world, x_world, z));
    OptimizerState opt = OptimizerState::init(cloud);
    AdcState state = AdcState::zeros(1);
    AdcConfig config;
    config.size_threshold = 1.0;
    config.clone_jitter = 0.0; // keep the copies co-located
    std::mt19937_64 rng(63);

    RenderOptions ropts;
    ropts.skip_threshold = 0.0;

    const RenderOutput before = render(cloud, cam, Vec3::Zero(), ropts);
    densify(cloud, opt, state, {0}, config, rng);
    REQUIRE(cloud.size() == 2);
    CHECK(cloud.positions[0] == cloud.positions[1]);
    const RenderOutput after = render(cloud, cam, Vec3::Zero(), ropts);

    for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(before.color.at(8, 8, c) - after.color.at(8, 8, c)) <= 1e-12);
    }
}

TEST_CASE("clone correction off-mode error follows falloff * (1 - falloff) * corrected^2") {
    Camera cam = oracle::test_camera(16, 16, 30.0);
    const double alpha = 0.75;
    GaussianCloud cloud = single_primitive(alpha, 0.25, Vec3(0.03, -0.02, 3.0));
    OptimizerState opt = OptimizerState::init(cloud);
    AdcState state = AdcState::zeros(1);
    AdcConfig config;
    config.size_threshold = 1.0;
    config.clone_jitter = 0.0;
    std::mt19937_64 rng(65);

    RenderOptions ropts;
    ropts.skip_threshold = 0.0;

    const RenderOutput before = render(cloud, cam, Vec3::Zero(), ropts);
    const auto projected = project(cloud, cam);
    const Mat2 inv = projected[0].cov2d.inverse();
    const ActivatedCloud act = activate(cloud);
    const double corrected = clone_opacity_correction(alpha);

    densify(cloud, opt, state, {0}, config, rng);
    const RenderOutput after = render(cloud, cam, Vec3::Zero(), ropts);

    // Two corrected co-located copies blend brighter than the original away
    // from the mode by exactly color * falloff * (1 - falloff) * corrected^2.
    for (int y = 4; y < 12; ++y) {
        for (int x = 4; x < 12; ++x) {
            const Vec2 d(x + 0.5 - projected[0].mean2d.x(), y + 0.5 - projected[0].mean2d.y());
            const double falloff = std::exp(-0.5 * d.dot(inv * d));
            for (int c = 0; c < 3; ++c) {
                const double predicted =
                    act.colors[0][c] * falloff * (1.0 - falloff) * corrected * corrected;
                const double observed = after.color.at(y, x, c) - before.color.at(y, x, c);
                CHECK(observed == doctest::Approx(predicted).epsilon(1e-6));
                CHECK(observed >= -1e-12);
            }
        }
    }
}

TEST_CASE("prune_transparent: delayed conservative schedule") {
    const AdcConfig proposed = AdcConfig::proposed_defaults();
    CHECK(proposed.prune_start == 2000);
    CHECK(proposed.tau_prune == 0.001);

    SUBCASE("no removals before the start iteration") {
        GaussianCloud cloud = cloud_with_opacities({0.5, 1e-5, 0.3});
        OptimizerState opt = OptimizerState::init(cloud);
        AdcState state = AdcState::zeros(3);
        const auto removed = prune_transparent(cloud, opt, state, 1999, proposed);
        CHECK(removed.empty());
        CHECK(cloud.size() == 3);
    }

    SUBCASE("threshold 0.001 from iteration 2000 onward") {
        GaussianCloud cloud = cloud_with_opacities({0.5, 0.0005, 0.002});
        OptimizerState opt = OptimizerState::init(cloud);
        opt.m.opacity_logits = {10.0, 20.0, 30.0};
        AdcState state = AdcState::zeros(3);
        const auto removed = prune_transparent(cloud, opt, state, 2000, proposed);
        CHECK(removed == std::vector<int>{1});
        REQUIRE(cloud.size() == 2);
        const auto alphas = activated_opacities(cloud);
        CHECK(alphas[0] == doctest::Approx(0.5));
        CHECK(alphas[1] == doctest::Approx(0.002));
        // Parallel arrays compacted consistently.
        CHECK(opt.m.opacity_logits == std::vector<double>{10.0, 30.0});
        CHECK(state.size() == 2);
    }

    SUBCASE("baseline schedule starts at 500 with threshold 0.005") {
        const AdcConfig baseline = AdcConfig::baseline_defaults();
        CHECK(baseline.prune_start == 500);
        CHECK(baseline.tau_prune == 0.005);

        GaussianCloud cloud = cloud_with_opacities({0.5, 0.004});
        OptimizerState opt = OptimizerState::init(cloud);
        AdcState state = AdcState::zeros(2);
        const auto removed = prune_transparent(cloud, opt, state, 500, baseline);
        CHECK(removed == std::vector<int>{1});
        CHECK(cloud.size() == 1);

        GaussianCloud cloud2 = cloud_with_opacities({0.5, 0.004});
        OptimizerState opt2 = OptimizerState::init(cloud2);
        AdcState state2 = AdcState::zeros(2);
        CHECK(prune_transparent(cloud2, opt2, state2, 499, baseline).empty());
    }
}

TEST_CASE("enforce_budget: lowest opacities removed, ties drop the higher index") {
    AdcConfig config;

    SUBCASE("under budget is a no-op") {
        GaussianCloud cloud = cloud_with_opacities(std::vector<double>(10, 0.5));
        OptimizerState opt = OptimizerState::init(cloud);
        AdcState state = AdcState::zeros(10);
        config.n_max = 12;
        CHECK(enforce_budget(cloud, opt, state, config).empty());
        CHECK(cloud.size() == 10);
    }

    SUBCASE("removes exactly the excess, smallest opacity first") {
        GaussianCloud cloud = cloud_with_opacities({0.9, 0.1, 0.5, 0.05, 0.7});
        OptimizerState opt = OptimizerState::init(cloud);
        AdcState state = AdcState::zeros(5);
        config.n_max = 3;
        const auto removed = enforce_budget(cloud, opt, state, config);
        CHECK(removed == std::vector<int>{1, 3});
        const auto alphas = activated_opacities(cloud);
        REQUIRE(alphas.size() == 3);
        CHECK(alphas[0] == doctest::Approx(0.9));
        CHECK(alphas[1] == doctest::Approx(0.5));
        CHECK(alphas[2] == doctest::Approx(0.7));
    }

    SUBCASE("identical minimal opacities: the higher index goes") {
        GaussianCloud cloud = cloud_with_opacities({0.2, 0.9, 0.2});
        // Force bit-identical logits for the tie.
        cloud.opacity_logits[2] = cloud.opacity_logits[0];
        OptimizerState opt = OptimizerState::init(cloud);
        AdcState state = AdcState::zeros(3);
        config.n_max = 2;
        const auto removed = enforce_budget(cloud, opt, state, config);
        CHECK(removed == std::vector<int>{2});
    }
}

TEST_CASE("budget invariant holds through random densify/prune sequences") {
    std::mt19937_64 rng(67);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    GaussianCloud cloud = cloud_with_opacities({0.5, 0.3, 0.8, 0.02, 0.6});
    OptimizerState opt = OptimizerState::init(cloud);
    AdcState state = AdcState::zeros(cloud.size());

    AdcConfig config;
    config.n_max = 12;
    config.size_threshold = 0.5;

    for (int step = 0; step < 60; ++step) {
        // Random selection for densification.
        std::vector<int> sel;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            if (unit(rng) < 0.4) sel.push_back(static_cast<int>(i));
        }
        // Alternate clone-sized and split-sized rows through the threshold.
        config.size_threshold = (step % 2 == 0) ? 0.5 : 0.05;
        densify(cloud, opt, state, sel, config, rng);

        prune_transparent(cloud, opt, state, 2000 + step, config);
        enforce_budget(cloud, opt, state, config);

        CHECK(cloud.size() <= config.n_max);
        CHECK(opt.size() == cloud.size());
        CHECK(state.size() == cloud.size());
        CHECK(opt.m.positions.size() == cloud.size());
        REQUIRE(cloud.size() >= 1);
    }
}

TEST_CASE("opacity_reset: clamps down to the reset value") {
    GaussianCloud cloud = cloud_with_opacities({0.5, 0.005, 0.3});
    AdcConfig config;
    config.opacity_reset_value = 0.01;
    const int lowered = opacity_reset(cloud, config);
    CHECK(lowered == 2);
    const auto alphas = activated_opacities(cloud);
    CHECK(alphas[0] == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(alphas[1] == doctest::Approx(0.005).epsilon(1e-9)); // already below: untouched
    CHECK(alphas[2] == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("scripted schedule sweep: proposed delays, baseline prunes early") {
    auto run_schedule = [](const AdcConfig& config, int iterations) {
        GaussianCloud cloud = cloud_with_opacities({0.5, 1e-5, 0.7, 1e-5});
        OptimizerState opt = OptimizerState::init(cloud);
        AdcState state = AdcState::zeros(cloud.size());
        std::vector<std::pair<int, int>> removals; // (iteration, count)
        for (int k = 1; k <= iterations; ++k) {
            if (!config.is_prune_step(k)) continue;
            const auto removed = prune_transparent(cloud, opt, state, k, config);
            enforce_budget(cloud, opt, state, config);
            if (!removed.empty()) removals.emplace_back(k, static_cast<int>(removed.size()));
        }
        return removals;
    };

    const auto proposed = run_schedule(AdcConfig::proposed_defaults(), 3000);
    REQUIRE(!proposed.empty());
    CHECK(proposed.front().first == 2000);
    for (const auto& [iter, count] : proposed) CHECK(iter >= 2000);

    const auto baseline = run_schedule(AdcConfig::baseline_defaults(), 3000);
    REQUIRE(!baseline.empty());
    CHECK(baseline.front().first == 500);
    CHECK(baseline.front().second == 2);
}
