#include "splat/activations.hpp"
#include "splat/covariance.hpp"
#include "splat/errors.hpp"
#include "splat/types.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace splat;

TEST_CASE("activations: fixed points and numeric values") {
    GaussianCloud cloud;
    cloud.push_back(Vec3::Zero(), Vec3::Zero(), Vec4(1, 0, 0, 0), 0.0, Vec3::Zero());
    cloud.push_back(Vec3::Zero(), Vec3::Zero(), Vec4(1, 0, 0, 0), -13.8155, Vec3::Zero());

    const ActivatedCloud act = activate(cloud);
    CHECK(act.opacities[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(act.scales[0].x() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(act.colors[0].x() == doctest::Approx(0.5).epsilon(1e-15));

    // Independent numeric evaluation of the logistic at -13.8155.
    const double expected = 1.0 / (1.0 + std::exp(13.8155));
    CHECK(act.opacities[1] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(act.opacities[1] == doctest::Approx(1e-6).epsilon(1e-3));
}

TEST_CASE("inverse_opacity_activation: values and round trips") {
    CHECK(inverse_opacity_activation(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(inverse_opacity_activation(sigmoid(2.0)) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(inverse_opacity_activation(0.95) == doctest::Approx(std::log(0.95 / 0.05)).epsilon(1e-12));
    CHECK(inverse_opacity_activation(0.95) == doctest::Approx(2.9444).epsilon(1e-4));

    CHECK_THROWS_AS(inverse_opacity_activation(0.0), DomainError);
    CHECK_THROWS_AS(inverse_opacity_activation(1.0), DomainError);
    CHECK_THROWS_AS(inverse_opacity_activation(-0.1), DomainError);
    CHECK_THROWS_AS(inverse_opacity_activation(1.3), DomainError);
}

TEST_CASE("activation round trip over (0.001, 0.999)") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(0.001, 0.999);
    for (int i = 0; i < 2000; ++i) {
        const double alpha = dist(rng);
        CHECK(std::abs(sigmoid(inverse_opacity_activation(alpha)) - alpha) <= 1e-9);
    }
    CHECK(std::abs(sigmoid(inverse_opacity_activation(0.001)) - 0.001) <= 1e-9);
    CHECK(std::abs(sigmoid(inverse_opacity_activation(0.999)) - 0.999) <= 1e-9);
}

TEST_CASE("covariance_from: axis-aligned cases") {
    const Mat3 identity = covariance_from(Vec3(1, 1, 1), Vec4(1, 0, 0, 0));
    CHECK((identity - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-12);

    const Mat3 stretched = covariance_from(Vec3(2, 1, 1), Vec4(1, 0, 0, 0));
    Mat3 expected = Mat3::Identity();
    expected(0, 0) = 4.0;
    CHECK((stretched - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("covariance_from: rotation about z against the explicit product") {
    // 90 degrees about z.
    const double half = M_PI / 4.0;
    const Vec4 q(std::cos(half), 0.0, 0.0, std::sin(half));
    const Vec3 scale(2.0, 1.0, 1.0);

    // Oracle: R * S * S^T * R^T with an explicitly written rotation matrix.
    Mat3 rot;
    rot << 0, -1, 0,
           1, 0, 0,
           0, 0, 1;
    const Mat3 s = scale.asDiagonal();
    const Mat3 expected = rot * s * s.transpose() * rot.transpose();

    const Mat3 got = covariance_from(scale, q);
    CHECK((got - expected).cwiseAbs().maxCoeff() <= 1e-9);

    Mat3 diag_expected = Mat3::Zero();
    diag_expected.diagonal() << 1.0, 4.0, 1.0;
    CHECK((got - diag_expected).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("covariance_from: SPD and eigenvalue property over random inputs") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> s_dist(0.05, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        Vec4 q(unit(rng), unit(rng), unit(rng), unit(rng));
        if (q.norm() < 1e-3) q = Vec4(1, 0, 0, 0);
        q.normalize();
        const Vec3 scale(s_dist(rng), s_dist(rng), s_dist(rng));

        const Mat3 cov = covariance_from(scale, q);
        CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-9);

        Eigen::LLT<Mat3> llt(cov);
        CHECK(llt.info() == Eigen::Success);

        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        Vec3 got = eig.eigenvalues();
        Vec3 expected = scale.cwiseProduct(scale);
        std::sort(expected.data(), expected.data() + 3);
        for (int k = 0; k < 3; ++k) {
            CHECK(got[k] == doctest::Approx(expected[k]).epsilon(1e-9));
        }
    }
}

TEST_CASE("covariance_from: rejects bad inputs") {
    CHECK_THROWS_AS(covariance_from(Vec3(1, 1, 1), Vec4(1.1, 0, 0, 0)), ValidationError);
    CHECK_THROWS_AS(covariance_from(Vec3(0, 1, 1), Vec4(1, 0, 0, 0)), ValidationError);
    CHECK_THROWS_AS(covariance_from(Vec3(-1, 1, 1), Vec4(1, 0, 0, 0)), ValidationError);
}

TEST_CASE("GaussianCloud: validation") {
    GaussianCloud cloud;
    cloud.push_back(Vec3::Zero(), Vec3::Zero(), Vec4(1, 0, 0, 0), 0.0, Vec3::Zero());
    CHECK_NOTHROW(cloud.validate());

    cloud.opacity_logits.push_back(0.0); // length mismatch
    CHECK_THROWS_AS(cloud.validate(), ValidationError);
    cloud.opacity_logits.pop_back();

    cloud.rotations[0] = Vec4::Zero();
    CHECK_THROWS_AS(cloud.validate(), ValidationError);
    cloud.rotations[0] = Vec4(1, 0, 0, 0);

    cloud.positions[0].x() = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(cloud.validate(), ValidationError);
}

TEST_CASE("Camera: validation") {
    Camera cam;
    cam.fx = cam.fy = 50.0;
    cam.cx = cam.cy = 16.0;
    cam.width = cam.height = 32;
    CHECK_NOTHROW(cam.validate());

    Camera bad = cam;
    bad.rotation(0, 0) = 1.1; // row norm 1.1
    CHECK_THROWS_AS(bad.validate(), ValidationError);

    Camera mirror = cam;
    mirror.rotation = Mat3::Identity();
    mirror.rotation(0, 0) = -1.0; // det -1
    CHECK_THROWS_AS(mirror.validate(), ValidationError);

    Camera nofocal = cam;
    nofocal.fx = 0.0;
    CHECK_THROWS_AS(nofocal.validate(), ValidationError);
}

TEST_CASE("GradientBuffer: shapes and finiteness") {
    GaussianCloud cloud;
    cloud.push_back(Vec3::Zero(), Vec3::Zero(), Vec4(1, 0, 0, 0), 0.0, Vec3::Zero());

    GradientBuffer g = GradientBuffer::zeros(1);
    CHECK(g.shapes_match(cloud));
    CHECK(g.all_finite());

    g.positions[0].x() = std::numeric_limits<double>::infinity();
    CHECK(!g.all_finite());

    CHECK(!GradientBuffer::zeros(2).shapes_match(cloud));
}
