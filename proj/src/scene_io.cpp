#include "splat/scene_io.hpp"

#include "splat/activations.hpp"
#include "splat/errors.hpp"
#include "splat/image_io.hpp"
#include "splat/renderer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace splat {

namespace {

using nlohmann::json;

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw LoadError("malformed JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

Camera camera_from_json(const json& j, const std::filesystem::path& origin) {
    try {
        Camera cam;
        const auto& rot = j.at("rotation");
        const auto& tr = j.at("translation");
        if (rot.size() != 9 || tr.size() != 3) {
            throw LoadError("camera in " + origin.string() +
                            ": rotation must have 9 entries and translation 3");
        }
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) cam.rotation(r, c) = rot.at(r * 3 + c).get<double>();
        }
        for (int k = 0; k < 3; ++k) cam.translation[k] = tr.at(k).get<double>();
        cam.fx = j.at("fx").get<double>();
        cam.fy = j.at("fy").get<double>();
        cam.cx = j.at("cx").get<double>();
        cam.cy = j.at("cy").get<double>();
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        cam.validate();
        return cam;
    } catch (const json::exception& e) {
        throw LoadError("camera in " + origin.string() + ": " + e.what());
    }
}

json camera_to_json(const Camera& cam) {
    json rot = json::array();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) rot.push_back(cam.rotation(r, c));
    }
    return json{{"rotation", rot},
                {"translation", {cam.translation.x(), cam.translation.y(), cam.translation.z()}},
                {"fx", cam.fx},
                {"fy", cam.fy},
                {"cx", cam.cx},
                {"cy", cam.cy},
                {"width", cam.width},
                {"height", cam.height}};
}

/// World-to-camera pose looking from `eye` toward `target` (y-up hint).
Camera look_at(const Vec3& eye, const Vec3& target, double focal, int width, int height) {
    const Vec3 up(0.0, 1.0, 0.0);
    const Vec3 z = (target - eye).normalized();
    const Vec3 x = up.cross(z).normalized();
    const Vec3 y = z.cross(x);
    Camera cam;
    cam.rotation.row(0) = x;
    cam.rotation.row(1) = y;
    cam.rotation.row(2) = z;
    cam.translation = -(cam.rotation * eye);
    cam.fx = focal;
    cam.fy = focal;
    cam.cx = width / 2.0;
    cam.cy = height / 2.0;
    cam.width = width;
    cam.height = height;
    return cam;
}

struct GeneratedScene {
    GaussianCloud cloud;
};

GaussianCloud make_textured_plane(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto jitter = [&](double amplitude) { return amplitude * (2.0 * unit(rng) - 1.0); };

    constexpr int kGrid = 20;
    constexpr double kTilt = -25.0 * std::numbers::pi / 180.0; // about the x axis
    const double cos_t = std::cos(kTilt), sin_t = std::sin(kTilt);
    const Vec4 plane_rot(std::cos(kTilt / 2.0), std::sin(kTilt / 2.0), 0.0, 0.0);

    const Vec3 color_a(0.85, 0.30, 0.22);
    const Vec3 color_b(0.18, 0.38, 0.85);

    GaussianCloud cloud;
    for (int gy = 0; gy < kGrid; ++gy) {
        for (int gx = 0; gx < kGrid; ++gx) {
            const double u = -1.0 + 2.0 * gx / (kGrid - 1);
            const double v = -1.0 + 2.0 * gy / (kGrid - 1);
            const double h = jitter(0.02); // slight relief off the plane
            const Vec3 local(u, v, h);
            const Vec3 pos(local.x(), cos_t * local.y() - sin_t * local.z(),
                           sin_t * local.y() + cos_t * local.z());

            const bool checker = ((gx / 3) + (gy / 3)) % 2 == 0;
            Vec3 color = checker ? color_a : color_b;
            for (int c = 0; c < 3; ++c) {
                color[c] = std::clamp(color[c] + jitter(0.06), 0.02, 0.98);
            }
            Vec3 raw;
            for (int c = 0; c < 3; ++c) raw[c] = inverse_opacity_activation(color[c]);

            const Vec3 log_scale(std::log(0.055) + jitter(0.1), std::log(0.055) + jitter(0.1),
                                 std::log(0.012));
            const double opacity_logit = inverse_opacity_activation(0.92) + jitter(0.3);
            cloud.push_back(pos, log_scale, plane_rot, opacity_logit, raw);
        }
    }
    return cloud;
}

GaussianCloud make_cluster(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    const Vec3 centers[3] = {{-0.8, 0.2, 0.1}, {0.6, -0.3, 0.4}, {0.1, 0.6, -0.5}};
    const Vec3 base_colors[3] = {{0.88, 0.30, 0.20}, {0.22, 0.80, 0.30}, {0.25, 0.35, 0.90}};
    constexpr int kCount = 200;

    GaussianCloud cloud;
    for (int i = 0; i < kCount; ++i) {
        const int blob = i % 3;
        const Vec3 pos = centers[blob] + 0.25 * Vec3(normal(rng), normal(rng), normal(rng));

        Vec3 log_scale;
        for (int c = 0; c < 3; ++c) log_scale[c] = std::log(0.04 + 0.08 * unit(rng));

        Vec4 q(normal(rng), normal(rng), normal(rng), normal(rng));
        q.normalize();

        const double opacity_logit = inverse_opacity_activation(0.4 + 0.55 * unit(rng));

        Vec3 color = base_colors[blob];
        for (int c = 0; c < 3; ++c) {
            color[c] = std::clamp(color[c] + 0.08 * (2.0 * unit(rng) - 1.0), 0.02, 0.98);
        }
        Vec3 raw;
        for (int c = 0; c < 3; ++c) raw[c] = inverse_opacity_activation(color[c]);

        cloud.push_back(pos, log_scale, q, opacity_logit, raw);
    }
    return cloud;
}

} // namespace

Scene load_scene(const std::filesystem::path& manifest_path) {
    const json manifest = load_json(manifest_path);
    const std::filesystem::path dir = manifest_path.parent_path();

    if (!manifest.contains("views") || !manifest.contains("points") ||
        !manifest.contains("train") || !manifest.contains("test")) {
        throw LoadError("manifest " + manifest_path.string() +
                        ": needs 'views', 'points', 'train', and 'test'");
    }

    std::vector<ViewData> views;
    for (const json& entry : manifest.at("views")) {
        ViewData view;
        const std::string image_rel = entry.at("image").get<std::string>();
        view.name = image_rel;
        view.image = read_png(dir / image_rel);
        view.camera = camera_from_json(entry.at("camera"), manifest_path);
        if (view.image.width() != view.camera.width ||
            view.image.height() != view.camera.height) {
            throw LoadError("manifest " + manifest_path.string() + ": image '" + image_rel +
                            "' is " + std::to_string(view.image.width()) + "x" +
                            std::to_string(view.image.height()) + " but camera expects " +
                            std::to_string(view.camera.width) + "x" +
                            std::to_string(view.camera.height));
        }
        if (entry.contains("depth") && !entry.at("depth").is_null()) {
            const std::string depth_rel = entry.at("depth").get<std::string>();
            view.depth = read_pfm(dir / depth_rel);
            view.has_depth = true;
            if (view.depth.width() != view.camera.width ||
                view.depth.height() != view.camera.height) {
                throw LoadError("manifest " + manifest_path.string() + ": depth '" + depth_rel +
                                "' size does not match the camera");
            }
        }
        views.push_back(std::move(view));
    }

    std::set<int> seen;
    auto pick = [&](const char* key) {
        std::vector<int> idx;
        for (const json& v : manifest.at(key)) {
            const int i = v.get<int>();
            if (i < 0 || static_cast<std::size_t>(i) >= views.size()) {
                throw LoadError("manifest " + manifest_path.string() + ": " + key + " index " +
                                std::to_string(i) + " out of range");
            }
            if (!seen.insert(i).second) {
                throw LoadError("manifest " + manifest_path.string() +
                                ": train/test splits overlap at view " + std::to_string(i));
            }
            idx.push_back(i);
        }
        return idx;
    };

    Scene scene;
    for (int i : pick("train")) scene.train_views.push_back(views[i]);
    for (int i : pick("test")) scene.test_views.push_back(views[i]);
    if (scene.train_views.empty()) {
        throw LoadError("manifest " + manifest_path.string() + ": needs at least 1 training view");
    }

    scene.initial_points = load_point_cloud(dir / manifest.at("points").get<std::string>());
    return scene;
}

Camera load_camera_json(const std::filesystem::path& path) {
    return camera_from_json(load_json(path), path);
}

std::filesystem::path make_synthetic(const std::string& spec_name,
                                     const std::filesystem::path& out_dir, uint64_t seed,
                                     const SyntheticOptions& options) {
    std::mt19937_64 rng(seed);

    GaussianCloud cloud;
    if (spec_name == "textured-plane") {
        cloud = make_textured_plane(rng);
    } else if (spec_name == "cluster") {
        cloud = make_cluster(rng);
    } else {
        throw ValidationError("make_synthetic: unknown scene spec '" + spec_name + "'");
    }

    std::filesystem::create_directories(out_dir);

    // Camera ring: a short arc of azimuths, held-out views interleaved
    // between training views.
    const int n_views = options.train_views + options.test_views;
    if (options.train_views < 1 || options.test_views < 0) {
        throw ValidationError("make_synthetic: needs >= 1 training view");
    }
    const double focal = 1.07 * options.width; // ~50 degrees horizontal
    constexpr double kRadius = 3.2;
    constexpr double kElevationDeg = 18.0;

    std::set<int> test_slots;
    for (int j = 0; j < options.test_views; ++j) {
        const int slot = static_cast<int>(
            std::lround((j + 1) * (n_views - 1) / static_cast<double>(options.test_views + 1)));
        test_slots.insert(slot);
    }
    // Degenerate rounding can collide; fall back to trailing slots.
    while (static_cast<int>(test_slots.size()) < options.test_views) {
        for (int s = n_views - 1; s >= 0; --s) {
            if (test_slots.insert(s).second) break;
        }
    }

    std::vector<Camera> cameras;
    const double el = kElevationDeg * std::numbers::pi / 180.0;
    for (int i = 0; i < n_views; ++i) {
        const double az_deg = n_views == 1 ? 0.0 : -18.0 + 36.0 * i / (n_views - 1);
        const double az = az_deg * std::numbers::pi / 180.0;
        const Vec3 eye(kRadius * std::sin(az) * std::cos(el), kRadius * std::sin(el),
                       -kRadius * std::cos(az) * std::cos(el));
        cameras.push_back(look_at(eye, Vec3::Zero(), focal, options.width, options.height));
    }

    const Vec3 background = Vec3::Zero();
    json views = json::array();
    std::vector<int> train_idx, test_idx;
    for (int i = 0; i < n_views; ++i) {
        const bool is_test = test_slots.count(i) > 0;
        const RenderOutput out = render(cloud, cameras[i], background);

        char img_name[64];
        std::snprintf(img_name, sizeof(img_name), "view_%03d.png", i);
        write_png(out.color, out_dir / img_name);

        json entry = {{"image", img_name}, {"camera", camera_to_json(cameras[i])}};
        if (!is_test) {
            char depth_name[64];
            std::snprintf(depth_name, sizeof(depth_name), "depth_%03d.pfm", i);
            write_pfm(out.depth, out_dir / depth_name);
            entry["depth"] = depth_name;
        }
        views.push_back(entry);
        (is_test ? test_idx : train_idx).push_back(i);
    }

    // Sparse noisy initialization: 5% of the ground-truth primitives with
    // positions perturbed by 1% of the scene extent.
    const std::size_t n_init =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.05 * cloud.size())));
    std::vector<std::size_t> order(cloud.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = 0; i < n_init; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
        std::swap(order[i], order[pick(rng)]);
    }
    const double sigma = 0.01 * scene_extent(cloud.positions);
    std::normal_distribution<double> normal(0.0, 1.0);
    const ActivatedCloud act = activate(cloud);
    PointCloud init;
    for (std::size_t k = 0; k < n_init; ++k) {
        const std::size_t i = order[k];
        const Vec3 noise(normal(rng), normal(rng), normal(rng));
        init.positions.push_back(cloud.positions[i] + sigma * noise);
        init.colors.push_back(act.colors[i]);
    }
    save_point_cloud(init, out_dir / "points.ply");

    json manifest = {
        {"scene", spec_name}, {"points", "points.ply"},   {"views", views},
        {"train", train_idx}, {"test", test_idx},
    };
    const std::filesystem::path manifest_path = out_dir / "manifest.json";
    std::ofstream out(manifest_path);
    out << manifest.dump(2) << "\n";
    if (!out) throw LoadError("make_synthetic: cannot write " + manifest_path.string());
    return manifest_path;
}

} // namespace splat
