#include "splat/losses.hpp"

#include "splat/errors.hpp"

#include <array>
#include <cmath>
#include <iostream>
#include <string>

namespace splat {

namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_window_1d() {
    std::array<double, kWindow> g{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - (kWindow - 1) / 2.0;
        g[i] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
        sum += g[i];
    }
    for (double& v : g) v /= sum;
    return g;
}

/// Valid-mode separable Gaussian blur of one channel.
/// `src` is H x W (channel `c` of a packed image); result is (H-10) x (W-10).
std::vector<double> blur_valid(const Image& img, int c, const std::array<double, kWindow>& g,
                               std::vector<double>& tmp) {
    const int w = img.width(), h = img.height();
    const int vw = w - kWindow + 1;
    const int vh = h - kWindow + 1;
    tmp.assign(static_cast<std::size_t>(h) * vw, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < vw; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k) acc += g[k] * img.at(y, x + k, c);
            tmp[static_cast<std::size_t>(y) * vw + x] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(vh) * vw, 0.0);
    for (int y = 0; y < vh; ++y) {
        for (int x = 0; x < vw; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k) acc += g[k] * tmp[static_cast<std::size_t>(y + k) * vw + x];
            out[static_cast<std::size_t>(y) * vw + x] = acc;
        }
    }
    return out;
}

void require_ssim_size(const Image& img) {
    if (img.width() < kWindow || img.height() < kWindow) {
        throw ValidationError("ssim: image must be at least " + std::to_string(kWindow) + "x" +
                              std::to_string(kWindow) + ", got " + std::to_string(img.width()) +
                              "x" + std::to_string(img.height()));
    }
}

struct SsimFields {
    int vw = 0, vh = 0;
    std::vector<double> mu_x, mu_y, mu_xx, mu_yy, mu_xy;
};

SsimFields ssim_fields(const Image& x, const Image& y, int c) {
    const int w = x.width(), h = x.height();
    Image xx(w, h, 1), yy(w, h, 1), xy(w, h, 1);
    for (int r = 0; r < h; ++r) {
        for (int col = 0; col < w; ++col) {
            const double xv = x.at(r, col, c);
            const double yv = y.at(r, col, c);
            xx.at(r, col) = xv * xv;
            yy.at(r, col) = yv * yv;
            xy.at(r, col) = xv * yv;
        }
    }
    static const std::array<double, kWindow> g = gaussian_window_1d();
    std::vector<double> tmp;
    SsimFields f;
    f.vw = w - kWindow + 1;
    f.vh = h - kWindow + 1;
    f.mu_x = blur_valid(x, c, g, tmp);
    f.mu_y = blur_valid(y, c, g, tmp);
    f.mu_xx = blur_valid(xx, 0, g, tmp);
    f.mu_yy = blur_valid(yy, 0, g, tmp);
    f.mu_xy = blur_valid(xy, 0, g, tmp);
    return f;
}

} // namespace

void LossWeights::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ValidationError("LossWeights: lambda must be in [0, 1]");
    }
    if (!(w_depth >= 0.0)) {
        throw ValidationError("LossWeights: w_depth must be >= 0");
    }
}

LossResult l1_loss(const Image& rendered, const Image& target) {
    require_same_shape(rendered, target, "l1_loss");
    LossResult res;
    res.grad = Image(rendered.width(), rendered.height(), rendered.channels());
    const std::size_t count = rendered.size();
    if (count == 0) return res;
    double sum = 0.0;
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double d = rendered.raw()[i] - target.raw()[i];
        sum += std::abs(d);
        res.grad.raw()[i] = (d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0));
    }
    res.value = sum * inv;
    return res;
}

double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    require_ssim_size(a);
    double total = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < a.channels(); ++c) {
        const SsimFields f = ssim_fields(a, b, c);
        for (std::size_t i = 0; i < f.mu_x.size(); ++i) {
            const double mx = f.mu_x[i], my = f.mu_y[i];
            const double var_x = f.mu_xx[i] - mx * mx;
            const double var_y = f.mu_yy[i] - my * my;
            const double cov = f.mu_xy[i] - mx * my;
            const double s = ((2.0 * mx * my + kC1) * (2.0 * cov + kC2)) /
                             ((mx * mx + my * my + kC1) * (var_x + var_y + kC2));
            total += s;
        }
        count += f.mu_x.size();
    }
    return total / static_cast<double>(count);
}

LossResult d_ssim_loss(const Image& rendered, const Image& target) {
    require_same_shape(rendered, target, "d_ssim_loss");
    require_ssim_size(rendered);

    static const std::array<double, kWindow> g1 = gaussian_window_1d();

    LossResult res;
    res.grad = Image(rendered.width(), rendered.height(), rendered.channels());

    double total = 0.0;
    const std::size_t count = static_cast<std::size_t>(rendered.channels()) *
                              (rendered.width() - kWindow + 1) * (rendered.height() - kWindow + 1);
    // d loss / d S at each window position, for loss = (1 - mean S) / 2.
    const double d_loss_d_s = -0.5 / static_cast<double>(count);

    for (int c = 0; c < rendered.channels(); ++c) {
        const SsimFields f = ssim_fields(rendered, target, c);
        for (int vy = 0; vy < f.vh; ++vy) {
            for (int vx = 0; vx < f.vw; ++vx) {
                const std::size_t i = static_cast<std::size_t>(vy) * f.vw + vx;
                const double mx = f.mu_x[i], my = f.mu_y[i];
                const double var_x = f.mu_xx[i] - mx * mx;
                const double var_y = f.mu_yy[i] - my * my;
                const double cov = f.mu_xy[i] - mx * my;

                const double a1 = 2.0 * mx * my + kC1;
                const double a2 = 2.0 * cov + kC2;
                const double b1 = mx * mx + my * my + kC1;
                const double b2 = var_x + var_y + kC2;
                const double s = (a1 * a2) / (b1 * b2);
                total += s;

                const double ds_da1 = a2 / (b1 * b2);
                const double ds_da2 = a1 / (b1 * b2);
                const double ds_db1 = -s / b1;
                const double ds_db2 = -s / b2;

                // d S / d rendered_k = w_k * (beta + gamma * target_k + delta * rendered_k)
                const double beta =
                    2.0 * my * ds_da1 + 2.0 * mx * ds_db1 - 2.0 * my * ds_da2 - 2.0 * mx * ds_db2;
                const double gamma = 2.0 * ds_da2;
                const double delta = 2.0 * ds_db2;

                for (int wy = 0; wy < kWindow; ++wy) {
                    for (int wx = 0; wx < kWindow; ++wx) {
                        const double wgt = g1[wy] * g1[wx];
                        const int py = vy + wy;
                        const int pxx = vx + wx;
                        const double xv = rendered.at(py, pxx, c);
                        const double yv = target.at(py, pxx, c);
                        res.grad.at(py, pxx, c) +=
                            d_loss_d_s * wgt * (beta + gamma * yv + delta * xv);
                    }
                }
            }
        }
    }
    res.value = (1.0 - total / static_cast<double>(count)) / 2.0;
    return res;
}

PearsonResult pearson_depth_loss(const Image& d_render, const Image& d_est, const Image& mask) {
    require_same_shape(d_render, d_est, "pearson_depth_loss");
    require_same_shape(d_render, mask, "pearson_depth_loss(mask)");
    if (d_render.channels() != 1) {
        throw ValidationError("pearson_depth_loss: depth images must be single-channel");
    }

    const std::size_t total = d_render.size();
    std::size_t n = 0;
    double sum_r = 0.0, sum_e = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        if (mask.raw()[i] == 0.0) continue;
        ++n;
        sum_r += d_render.raw()[i];
        sum_e += d_est.raw()[i];
    }
    if (n < 2) {
        throw DegenerateInputError("pearson_depth_loss: needs >= 2 masked pixels, got " +
                                   std::to_string(n));
    }
    const double mean_r = sum_r / static_cast<double>(n);
    const double mean_e = sum_e / static_cast<double>(n);

    double cov = 0.0, var_r = 0.0, var_e = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        if (mask.raw()[i] == 0.0) continue;
        const double cr = d_render.raw()[i] - mean_r;
        const double ce = d_est.raw()[i] - mean_e;
        cov += cr * ce;
        var_r += cr * cr;
        var_e += ce * ce;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    cov *= inv_n;
    var_r *= inv_n;
    var_e *= inv_n;

    PearsonResult res;
    res.grad = Image(d_render.width(), d_render.height(), 1);
    res.variance_guard_active = (var_e == 0.0);
    if (res.variance_guard_active) {
        std::cerr << "splat: warning: pearson_depth_loss saw a constant estimated depth over the "
                     "mask; correlation defined by the epsilon guard\n";
    }

    const double denom = std::sqrt(var_r * var_e + kPearsonEpsilon);
    res.value = 1.0 - cov / denom;

    const double denom3 = denom * denom * denom;
    for (std::size_t i = 0; i < total; ++i) {
        if (mask.raw()[i] == 0.0) continue;
        const double cr = d_render.raw()[i] - mean_r;
        const double ce = d_est.raw()[i] - mean_e;
        res.grad.raw()[i] = -ce * inv_n / denom + cov * var_e * cr * inv_n / denom3;
    }
    return res;
}

TotalLossResult total_loss(const RenderOutput& rendered, const Image& target, const Image& d_est,
                           const LossWeights& weights, bool skip_degenerate_depth) {
    weights.validate();
    require_same_shape(rendered.color, target, "total_loss");

    TotalLossResult res;
    res.d_color = Image(target.width(), target.height(), 3);
    res.d_depth = Image(target.width(), target.height(), 1);

    const LossResult l1 = l1_loss(rendered.color, target);
    res.l1 = l1.value;
    const double l1_w = 1.0 - weights.lambda;
    for (std::size_t i = 0; i < res.d_color.size(); ++i) {
        res.d_color.raw()[i] = l1_w * l1.grad.raw()[i];
    }

    if (weights.lambda > 0.0) {
        const LossResult dss = d_ssim_loss(rendered.color, target);
        res.d_ssim = dss.value;
        for (std::size_t i = 0; i < res.d_color.size(); ++i) {
            res.d_color.raw()[i] += weights.lambda * dss.grad.raw()[i];
        }
    }

    // Depth supervision only where the render actually hit geometry.
    res.mask = Image(target.width(), target.height(), 1);
    std::size_t masked = 0;
    for (std::size_t i = 0; i < res.mask.size(); ++i) {
        if (rendered.accum_alpha.raw()[i] >= 0.5) {
            res.mask.raw()[i] = 1.0;
            ++masked;
        }
    }

    if (weights.w_depth > 0.0) {
        require_same_shape(rendered.depth, d_est, "total_loss(d_est)");
        if (masked < 2) {
            if (!skip_degenerate_depth) {
                throw DegenerateInputError(
                    "total_loss: depth mask has fewer than 2 pixels (accum_alpha >= 0.5)");
            }
        } else {
            const PearsonResult p = pearson_depth_loss(rendered.depth, d_est, res.mask);
            res.depth = p.value;
            res.depth_term_used = true;
            for (std::size_t i = 0; i < res.d_depth.size(); ++i) {
                res.d_depth.raw()[i] = weights.w_depth * p.grad.raw()[i];
            }
        }
    }

    res.total = l1_w * res.l1 + weights.lambda * res.d_ssim + weights.w_depth * res.depth;
    return res;
}

double psnr(const Image& a, const Image& b) {
    require_same_shape(a, b, "psnr");
    if (a.size() == 0) return 100.0;
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.raw()[i] - b.raw()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

} // namespace splat
