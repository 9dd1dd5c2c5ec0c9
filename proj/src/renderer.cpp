#include "splat/renderer.hpp"

#include "splat/activations.hpp"
#include "splat/covariance.hpp"
#include "splat/errors.hpp"
#include "splat/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splat {

namespace {

// Compositing stops once the residual transmittance drops below this; the
// discarded tail can shift a pixel by at most the same amount.
constexpr double kMinTransmittance = 1e-14;

/// One primitive prepared for rasterization, in depth order.
struct RasterGaussian {
    double mx, my;      // projected mean, pixels
    double la, lb, lc;  // conic = cov2d^-1: [[la, lb], [lb, lc]]
    double alpha;       // activated opacity
    double r, g, b;     // activated color
    double z;           // camera-space depth
    int orig;           // row in the source cloud
    int x0, x1, y0, y1; // clipped pixel bounding box (inclusive)
};

/// Projected, sorted, conic-ified cloud plus per-pixel contributor lists
/// (CSR over pixels, each slice in depth order).
struct RasterScene {
    int width = 0;
    int height = 0;
    std::vector<RasterGaussian> prims;
    std::vector<int> offsets; // size W*H + 1
    std::vector<int> lists;   // indices into prims
};

RasterScene prepare_raster(const GaussianCloud& cloud, const Camera& camera,
                           const RenderOptions& options) {
    RasterScene scene;
    scene.width = camera.width;
    scene.height = camera.height;

    std::vector<ProjectedGaussian> projected = project(cloud, camera);

    // Global front-to-back order; ties resolved by source row.
    std::sort(projected.begin(), projected.end(),
              [](const ProjectedGaussian& a, const ProjectedGaussian& b) {
                  if (a.depth != b.depth) return a.depth < b.depth;
                  return a.index < b.index;
              });

    const ActivatedCloud act = activate(cloud);

    // Outside this radius every sample falls below the skip threshold even at
    // opacity 1, so pixels beyond the box match the unbounded evaluation
    // exactly. Two pixels of margin keep the geometric boundary itself inside.
    const double skip = std::max(options.skip_threshold, 1e-12);
    const double log_skip = std::log(1.0 / skip);

    scene.prims.reserve(projected.size());
    for (const ProjectedGaussian& pg : projected) {
        RasterGaussian rg;
        rg.mx = pg.mean2d.x();
        rg.my = pg.mean2d.y();

        const double a = pg.cov2d(0, 0);
        const double bcov = pg.cov2d(0, 1);
        const double c = pg.cov2d(1, 1);
        const double det = a * c - bcov * bcov;
        rg.la = c / det;
        rg.lb = -bcov / det;
        rg.lc = a / det;

        rg.alpha = act.opacities[pg.index];
        rg.r = act.colors[pg.index].x();
        rg.g = act.colors[pg.index].y();
        rg.b = act.colors[pg.index].z();
        rg.z = pg.depth;
        rg.orig = pg.index;

        const double mid = 0.5 * (a + c);
        const double lam_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
        const double radius = std::sqrt(std::max(0.0, 2.0 * log_skip * lam_max)) + 2.0;

        rg.x0 = std::max(0, static_cast<int>(std::ceil(rg.mx - radius - 0.5)));
        rg.x1 = std::min(scene.width - 1, static_cast<int>(std::floor(rg.mx + radius - 0.5)));
        rg.y0 = std::max(0, static_cast<int>(std::ceil(rg.my - radius - 0.5)));
        rg.y1 = std::min(scene.height - 1, static_cast<int>(std::floor(rg.my + radius - 0.5)));
        scene.prims.push_back(rg);
    }

    // CSR contributor lists. Filling in depth order keeps every slice sorted.
    const std::size_t n_pixels = static_cast<std::size_t>(scene.width) * scene.height;
    scene.offsets.assign(n_pixels + 1, 0);
    for (const RasterGaussian& rg : scene.prims) {
        for (int y = rg.y0; y <= rg.y1; ++y) {
            for (int x = rg.x0; x <= rg.x1; ++x) {
                ++scene.offsets[static_cast<std::size_t>(y) * scene.width + x + 1];
            }
        }
    }
    std::partial_sum(scene.offsets.begin(), scene.offsets.end(), scene.offsets.begin());
    scene.lists.resize(scene.offsets.back());
    std::vector<int> cursor(n_pixels, 0);
    for (std::size_t s = 0; s < scene.prims.size(); ++s) {
        const RasterGaussian& rg = scene.prims[s];
        for (int y = rg.y0; y <= rg.y1; ++y) {
            for (int x = rg.x0; x <= rg.x1; ++x) {
                const std::size_t px = static_cast<std::size_t>(y) * scene.width + x;
                scene.lists[scene.offsets[px] + cursor[px]++] = static_cast<int>(s);
            }
        }
    }
    return scene;
}

/// Evaluates one sample; returns false if it is skipped.
inline bool sample_alpha(const RasterGaussian& rg, double px, double py,
                         const RenderOptions& opt, double& a_out, double& g_out) {
    const double dx = px - rg.mx;
    const double dy = py - rg.my;
    const double sigma = 0.5 * (rg.la * dx * dx + 2.0 * rg.lb * dx * dy + rg.lc * dy * dy);
    if (sigma < 0.0) return false;
    const double falloff = std::exp(-sigma);
    double a = rg.alpha * falloff;
    if (a > opt.alpha_clamp) a = opt.alpha_clamp;
    if (a < opt.skip_threshold) return false;
    a_out = a;
    g_out = falloff;
    return true;
}

// ---------------------------------------------------------------------------
// Backward helpers
// ---------------------------------------------------------------------------

/// Per-primitive gradients w.r.t. projected-space quantities, accumulated
/// over pixels before being chained through the projection.
struct ScreenGrad {
    double dmx = 0.0, dmy = 0.0;          // d/d mean2d
    double dla = 0.0, dlb = 0.0, dlc = 0.0; // d/d conic entries (00, 01, 11)
    double dz = 0.0;                       // d/d camera depth (compositing path)
    double dalpha = 0.0;                   // d/d activated opacity
    double dr = 0.0, dg = 0.0, db = 0.0;   // d/d activated color
};

struct Contribution {
    int s;
    double a;
    double falloff;
};

/// Quaternion-to-rotation derivative tables, d R / d q_k for unit q.
void rotation_quat_derivatives(const Vec4& q, Mat3 d_dq[4]) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    d_dq[0] << 0, -2 * z, 2 * y,
               2 * z, 0, -2 * x,
               -2 * y, 2 * x, 0;
    d_dq[1] << 0, 2 * y, 2 * z,
               2 * y, -4 * x, -2 * w,
               2 * z, 2 * w, -4 * x;
    d_dq[2] << -4 * y, 2 * x, 2 * w,
               2 * x, 0, 2 * z,
               -2 * w, 2 * z, -4 * y;
    d_dq[3] << -4 * z, -2 * w, 2 * x,
               2 * w, -4 * z, 2 * y,
               2 * x, 2 * y, 0;
}

} // namespace

RenderOutput render(const GaussianCloud& cloud, const Camera& camera, const Vec3& background,
                    const RenderOptions& options) {
    const RasterScene scene = prepare_raster(cloud, camera, options);
    const int w = scene.width;
    const int h = scene.height;

    RenderOutput out;
    out.color = Image(w, h, 3);
    out.depth = Image(w, h, 1);
    out.accum_alpha = Image(w, h, 1);

    parallel_for(0, h, options.threads, [&](int y) {
        const double py = y + 0.5;
        for (int x = 0; x < w; ++x) {
            const double px = x + 0.5;
            const std::size_t pix = static_cast<std::size_t>(y) * w + x;
            double cr = 0.0, cg = 0.0, cb = 0.0, depth = 0.0;
            double transmittance = 1.0;
            for (int k = scene.offsets[pix]; k < scene.offsets[pix + 1]; ++k) {
                const RasterGaussian& rg = scene.prims[scene.lists[k]];
                double a, falloff;
                if (!sample_alpha(rg, px, py, options, a, falloff)) continue;
                const double weight = a * transmittance;
                cr += rg.r * weight;
                cg += rg.g * weight;
                cb += rg.b * weight;
                depth += rg.z * weight;
                transmittance *= 1.0 - a;
                if (transmittance < kMinTransmittance) break;
            }
            out.color.at(y, x, 0) = cr + background.x() * transmittance;
            out.color.at(y, x, 1) = cg + background.y() * transmittance;
            out.color.at(y, x, 2) = cb + background.z() * transmittance;
            out.depth.at(y, x) = depth;
            out.accum_alpha.at(y, x) = 1.0 - transmittance;
        }
    });
    return out;
}

BackwardResult render_backward(const GaussianCloud& cloud, const Camera& camera,
                               const Vec3& background, const Image& d_color,
                               const Image& d_depth, const RenderOptions& options) {
    if (d_color.width() != camera.width || d_color.height() != camera.height ||
        d_color.channels() != 3) {
        throw ValidationError("render_backward: d_color shape does not match camera image size");
    }
    if (d_depth.width() != camera.width || d_depth.height() != camera.height ||
        d_depth.channels() != 1) {
        throw ValidationError("render_backward: d_depth shape does not match camera image size");
    }

    const RasterScene scene = prepare_raster(cloud, camera, options);
    const int w = scene.width;
    const int h = scene.height;
    const std::size_t n = cloud.size();
    const std::size_t m = scene.prims.size();

    BackwardResult result;
    result.grads = GradientBuffer::zeros(n);
    result.alpha_grads.assign(n, 0.0);
    result.mean2d_grad_norms.assign(n, 0.0);
    result.visible.assign(n, 0);
    for (const RasterGaussian& rg : scene.prims) result.visible[rg.orig] = 1;

    // Stage 1: accumulate screen-space gradients per primitive. Rows are
    // processed in waves; each worker owns a private buffer and finished rows
    // merge in row order, so the reduction is identical for any thread count.
    std::vector<ScreenGrad> total(m);
    const int wave = std::max(1, resolve_threads(options.threads));
    std::vector<std::vector<ScreenGrad>> row_buf(wave, std::vector<ScreenGrad>(m));
    std::vector<std::vector<uint8_t>> row_flag(wave, std::vector<uint8_t>(m, 0));
    std::vector<std::vector<int>> row_touched(wave);

    for (int wave_start = 0; wave_start < h; wave_start += wave) {
        const int wave_end = std::min(h, wave_start + wave);
        parallel_for(wave_start, wave_end, options.threads, [&](int y) {
            std::vector<ScreenGrad>& buf = row_buf[y - wave_start];
            std::vector<uint8_t>& touched_flag = row_flag[y - wave_start];
            std::vector<int>& touched = row_touched[y - wave_start];
            std::vector<Contribution> stack;
            const double py = y + 0.5;
            for (int x = 0; x < w; ++x) {
                const double px = x + 0.5;
                const std::size_t pix = static_cast<std::size_t>(y) * w + x;
                const double dldc0 = d_color.at(y, x, 0);
                const double dldc1 = d_color.at(y, x, 1);
                const double dldc2 = d_color.at(y, x, 2);
                const double dldd = d_depth.at(y, x);
                if (dldc0 == 0.0 && dldc1 == 0.0 && dldc2 == 0.0 && dldd == 0.0) continue;

                // Replay the forward walk to collect accepted samples.
                stack.clear();
                double transmittance = 1.0;
                for (int k = scene.offsets[pix]; k < scene.offsets[pix + 1]; ++k) {
                    const int s = scene.lists[k];
                    const RasterGaussian& rg = scene.prims[s];
                    double a, falloff;
                    if (!sample_alpha(rg, px, py, options, a, falloff)) continue;
                    stack.push_back({s, a, falloff});
                    transmittance *= 1.0 - a;
                    if (transmittance < kMinTransmittance) break;
                }

                // Back-to-front sweep with suffix accumulators.
                const double t_final = transmittance;
                double t_after = t_final;
                double suf_r = 0.0, suf_g = 0.0, suf_b = 0.0, suf_z = 0.0;
                for (std::size_t j = stack.size(); j-- > 0;) {
                    const Contribution& cb = stack[j];
                    const RasterGaussian& rg = scene.prims[cb.s];
                    const double one_minus_a = 1.0 - cb.a;
                    const double t_here = t_after / one_minus_a;
                    const double weight = cb.a * t_here;

                    ScreenGrad& sg = buf[cb.s];
                    if (!touched_flag[cb.s]) {
                        touched_flag[cb.s] = 1;
                        touched.push_back(cb.s);
                    }

                    sg.dr += dldc0 * weight;
                    sg.dg += dldc1 * weight;
                    sg.db += dldc2 * weight;
                    sg.dz += dldd * weight;

                    const double dl_da =
                        dldc0 * (rg.r * t_here - (suf_r + background.x() * t_final) / one_minus_a) +
                        dldc1 * (rg.g * t_here - (suf_g + background.y() * t_final) / one_minus_a) +
                        dldc2 * (rg.b * t_here - (suf_b + background.z() * t_final) / one_minus_a) +
                        dldd * (rg.z * t_here - suf_z / one_minus_a);

                    // The clamp is flat where active: alpha and shape receive
                    // no gradient through a clamped sample.
                    if (cb.a < options.alpha_clamp) {
                        const double dx = px - rg.mx;
                        const double dy = py - rg.my;
                        sg.dalpha += dl_da * cb.falloff;
                        const double dl_dsigma = -dl_da * rg.alpha * cb.falloff;
                        // Per-slot values; the symmetric partner slot receives
                        // the same amount in stage 2.
                        sg.dla += dl_dsigma * 0.5 * dx * dx;
                        sg.dlb += dl_dsigma * 0.5 * dx * dy;
                        sg.dlc += dl_dsigma * 0.5 * dy * dy;
                        const double dl_ddx = dl_dsigma * (rg.la * dx + rg.lb * dy);
                        const double dl_ddy = dl_dsigma * (rg.lb * dx + rg.lc * dy);
                        sg.dmx -= dl_ddx;
                        sg.dmy -= dl_ddy;
                    }

                    suf_r += rg.r * weight;
                    suf_g += rg.g * weight;
                    suf_b += rg.b * weight;
                    suf_z += rg.z * weight;
                    t_after = t_here;
                }
            }
        });
        // Ordered merge keeps the floating-point sum independent of scheduling.
        for (int y = wave_start; y < wave_end; ++y) {
            std::vector<ScreenGrad>& buf = row_buf[y - wave_start];
            std::vector<uint8_t>& touched_flag = row_flag[y - wave_start];
            std::vector<int>& touched = row_touched[y - wave_start];
            for (int s : touched) {
                ScreenGrad& acc = total[s];
                const ScreenGrad& add = buf[s];
                acc.dmx += add.dmx;
                acc.dmy += add.dmy;
                acc.dla += add.dla;
                acc.dlb += add.dlb;
                acc.dlc += add.dlc;
                acc.dz += add.dz;
                acc.dalpha += add.dalpha;
                acc.dr += add.dr;
                acc.dg += add.dg;
                acc.db += add.db;
                buf[s] = ScreenGrad{};
                touched_flag[s] = 0;
            }
            touched.clear();
        }
    }

    // Stage 2: chain screen-space gradients through projection, covariance
    // factorization, and activations. Rows are disjoint, so this is a plain
    // parallel map.
    const Mat3& wmat = camera.rotation;
    parallel_for(0, static_cast<int>(m), options.threads, [&](int si) {
        const RasterGaussian& rg = scene.prims[si];
        const ScreenGrad& sg = total[si];
        const int i = rg.orig;

        result.alpha_grads[i] = sg.dalpha;
        result.mean2d_grad_norms[i] = std::hypot(sg.dmx, sg.dmy);

        const Vec3 p_cam = camera.to_camera(cloud.positions[i]);
        const double x = p_cam.x(), y = p_cam.y(), z = p_cam.z();
        const double fx = camera.fx, fy = camera.fy;

        const Vec4 q_raw = cloud.rotations[i];
        const double q_norm = q_raw.norm();
        const Vec4 q = q_raw / q_norm;
        const Vec3 scale = cloud.log_scales[i].array().exp();
        const Mat3 rot = quaternion_to_rotation(q);
        const Mat3 mmat = rot * scale.asDiagonal();
        const Mat3 sigma3 = mmat * mmat.transpose();

        Eigen::Matrix<double, 2, 3> jac;
        jac << fx / z, 0.0, -fx * x / (z * z),
               0.0, fy / z, -fy * y / (z * z);
        const Eigen::Matrix<double, 2, 3> p = jac * wmat;

        // d / d cov2d from d / d conic (conic = cov2d^-1).
        Mat2 conic;
        conic << rg.la, rg.lb, rg.lb, rg.lc;
        Mat2 g_conic;
        g_conic << sg.dla, sg.dlb, sg.dlb, sg.dlc;
        const Mat2 g_cov = -conic * g_conic * conic;

        const Mat3 g_sigma = p.transpose() * g_cov * p;
        const Eigen::Matrix<double, 2, 3> g_p = 2.0 * g_cov * p * sigma3;
        const Eigen::Matrix<double, 2, 3> g_jac = g_p * wmat.transpose();

        const double inv_z2 = 1.0 / (z * z);
        double dx_cam = sg.dmx * fx / z + g_jac(0, 2) * (-fx * inv_z2);
        double dy_cam = sg.dmy * fy / z + g_jac(1, 2) * (-fy * inv_z2);
        double dz_cam = sg.dmx * (-fx * x * inv_z2) + sg.dmy * (-fy * y * inv_z2) +
                        g_jac(0, 0) * (-fx * inv_z2) + g_jac(1, 1) * (-fy * inv_z2) +
                        g_jac(0, 2) * (2.0 * fx * x * inv_z2 / z) +
                        g_jac(1, 2) * (2.0 * fy * y * inv_z2 / z) + sg.dz;
        result.grads.positions[i] = wmat.transpose() * Vec3(dx_cam, dy_cam, dz_cam);

        const Mat3 g_m = 2.0 * g_sigma * mmat;
        const Mat3 g_rot = g_m * scale.asDiagonal();
        Vec3 g_scale;
        for (int j = 0; j < 3; ++j) g_scale[j] = g_m.col(j).dot(rot.col(j));
        result.grads.log_scales[i] = g_scale.cwiseProduct(scale);

        Mat3 d_dq[4];
        rotation_quat_derivatives(q, d_dq);
        Vec4 g_q_unit;
        for (int k = 0; k < 4; ++k) g_q_unit[k] = (g_rot.cwiseProduct(d_dq[k])).sum();
        result.grads.rotations[i] = (g_q_unit - q.dot(g_q_unit) * q) / q_norm;

        const double alpha = rg.alpha;
        result.grads.opacity_logits[i] = sg.dalpha * alpha * (1.0 - alpha);

        const Vec3 color(rg.r, rg.g, rg.b);
        const Vec3 g_color(sg.dr, sg.dg, sg.db);
        result.grads.colors_raw[i] =
            g_color.cwiseProduct(color.cwiseProduct(Vec3::Ones() - color));
    });

    return result;
}

} // namespace splat
