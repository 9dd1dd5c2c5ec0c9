#include "splat/trainer.hpp"

#include "splat/activations.hpp"
#include "splat/adc.hpp"
#include "splat/errors.hpp"
#include "splat/losses.hpp"
#include "splat/parallel.hpp"
#include "splat/ply_io.hpp"
#include "splat/renderer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace splat {

namespace {

using nlohmann::json;

json event_to_json(const AdcEvent& ev) {
    json j{{"type", ev.type},
           {"indices", ev.indices},
           {"n_before", ev.n_before},
           {"n_after", ev.n_after}};
    if (ev.type == "densify") {
        j["clones"] = ev.clones;
        j["splits"] = ev.splits;
    }
    return j;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double spread_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

} // namespace

GaussianCloud init_cloud(const PointCloud& points) {
    const std::size_t n = points.positions.size();
    if (n == 0) throw ValidationError("init_cloud: empty point set");
    if (points.colors.size() != n) {
        throw ValidationError("init_cloud: positions and colors differ in length");
    }

    const double extent = scene_extent(points.positions);
    const double fallback_scale = extent > 0.0 ? extent / 100.0 : 0.01;

    const double opacity_logit = inverse_opacity_activation(0.1);

    GaussianCloud cloud;
    std::vector<double> dist2;
    for (std::size_t i = 0; i < n; ++i) {
        // Mean distance to the 3 nearest neighbors (fewer if N is small).
        dist2.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            dist2.push_back((points.positions[j] - points.positions[i]).squaredNorm());
        }
        double scale = fallback_scale;
        if (!dist2.empty()) {
            const std::size_t k = std::min<std::size_t>(3, dist2.size());
            std::partial_sort(dist2.begin(), dist2.begin() + k, dist2.end());
            double mean = 0.0;
            for (std::size_t m = 0; m < k; ++m) mean += std::sqrt(dist2[m]);
            mean /= static_cast<double>(k);
            scale = mean > 0.0 ? mean : fallback_scale;
        }

        Vec3 raw_color;
        for (int c = 0; c < 3; ++c) {
            const double v = std::clamp(points.colors[i][c], 1.0 / 510.0, 1.0 - 1.0 / 510.0);
            raw_color[c] = inverse_opacity_activation(v);
        }

        cloud.push_back(points.positions[i], Vec3::Constant(std::log(scale)),
                        Vec4(1.0, 0.0, 0.0, 0.0), opacity_logit, raw_color);
    }
    return cloud;
}

void MetricsLog::write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw LoadError("MetricsLog::write: cannot open: " + path.string());
    for (const std::string& line : lines) out << line << "\n";
}

std::string MetricsLog::joined() const {
    std::string all;
    for (const std::string& line : lines) {
        all += line;
        all += "\n";
    }
    return all;
}

TrainResult train(const Scene& scene, const TrainConfig& config,
                  const TrainRunOptions& run_options) {
    config.validate();
    if (scene.train_views.empty()) throw ValidationError("train: scene has no training views");
    for (const ViewData& v : scene.train_views) {
        if (v.image.width() != v.camera.width || v.image.height() != v.camera.height) {
            throw ValidationError("train: view image size does not match its camera");
        }
        if (config.weights.w_depth > 0.0 && !v.has_depth) {
            throw ValidationError("train: w_depth > 0 but training view '" + v.name +
                                  "' has no depth map");
        }
    }

    TrainResult result;
    result.cloud = init_cloud(scene.initial_points);

    LearningRates lrs = config.lrs;
    lrs.position_decay_steps =
        config.position_decay_steps > 0 ? config.position_decay_steps : config.max_iterations;
    OptimizerState opt = OptimizerState::init(result.cloud, lrs);
    AdcState adc_state = AdcState::zeros(result.cloud.size());
    std::mt19937_64 rng(config.seed);

    AdcConfig adc = config.adc;
    if (adc.size_threshold <= 0.0) {
        const double extent = scene_extent(scene.initial_points.positions);
        adc.size_threshold = 0.01 * (extent > 0.0 ? extent : 1.0);
    }

    RenderOptions ropts = config.render_options;
    ropts.threads = config.threads;

    const int n_views = static_cast<int>(scene.train_views.size());

    auto run_eval = [&](int iteration) {
        if (scene.test_views.empty()) return;
        const EvalResult ev = evaluate(result.cloud, scene.test_views, config.background, ropts);
        json j{{"iter", iteration},
               {"eval", {{"psnr", ev.psnr},
                         {"ssim", ev.ssim},
                         {"mean_psnr", ev.mean_psnr},
                         {"mean_ssim", ev.mean_ssim}}}};
        result.log.append(j.dump());
        if (run_options.verbose) {
            std::cerr << "[iter " << iteration << "] eval psnr " << ev.mean_psnr << " ssim "
                      << ev.mean_ssim << "\n";
        }
    };

    for (int k = 1; k <= config.max_iterations; ++k) {
        // --- render + loss + backward over this iteration's views ---
        std::vector<int> view_ids;
        if (config.view_sampling == ViewSampling::RoundRobin) {
            view_ids.push_back((k - 1) % n_views);
        } else {
            for (int v = 0; v < n_views; ++v) view_ids.push_back(v);
        }
        const double view_weight = 1.0 / static_cast<double>(view_ids.size());

        double loss_total = 0.0, loss_l1 = 0.0, loss_dssim = 0.0, loss_depth = 0.0;
        bool depth_used = false;
        GradientBuffer grads = GradientBuffer::zeros(result.cloud.size());

        for (int v : view_ids) {
            const ViewData& view = scene.train_views[v];
            const RenderOutput rendered = render(result.cloud, view.camera, config.background,
                                                 ropts);
            const TotalLossResult loss =
                total_loss(rendered, view.image, view.depth, config.weights,
                           /*skip_degenerate_depth=*/true);
            loss_total += view_weight * loss.total;
            loss_l1 += view_weight * loss.l1;
            loss_dssim += view_weight * loss.d_ssim;
            loss_depth += view_weight * loss.depth;
            depth_used = depth_used || loss.depth_term_used;

            if (!std::isfinite(loss.total)) {
                json j{{"iter", k}, {"abort", "non-finite loss"}, {"view", v}};
                result.log.append(j.dump());
                if (!run_options.abort_checkpoint_path.empty()) {
                    save_checkpoint(result.cloud, run_options.abort_checkpoint_path);
                }
                throw TrainingError("train: non-finite loss at iteration " + std::to_string(k));
            }

            const BackwardResult bw = render_backward(result.cloud, view.camera,
                                                      config.background, loss.d_color,
                                                      loss.d_depth, ropts);
            for (std::size_t i = 0; i < result.cloud.size(); ++i) {
                grads.positions[i] += view_weight * bw.grads.positions[i];
                grads.log_scales[i] += view_weight * bw.grads.log_scales[i];
                grads.rotations[i] += view_weight * bw.grads.rotations[i];
                grads.opacity_logits[i] += view_weight * bw.grads.opacity_logits[i];
                grads.colors_raw[i] += view_weight * bw.grads.colors_raw[i];
            }

            // Error attribution: the tracked signal is the per-view gradient,
            // not the view-averaged one.
            if (adc.use_logit_gradient) {
                track_max_alpha(adc_state, bw.grads.opacity_logits);
            } else {
                track_max_alpha(adc_state, bw.alpha_grads);
            }
            if (adc.mode == DensifyMode::Baseline) {
                track_positional(adc_state, bw.mean2d_grad_norms, bw.visible);
            }
        }

        adam_step(result.cloud, opt, grads, k);

        // --- density control ---
        std::vector<AdcEvent> events;
        if (adc.is_densify_step(k)) {
            const std::vector<int> selected = adc.mode == DensifyMode::Proposed
                                                  ? select_densify(adc_state, adc)
                                                  : baseline_select_densify(adc_state, adc);
            AdcEvent ev;
            ev.type = "densify";
            ev.indices = selected;
            ev.n_before = result.cloud.size();
            const DensifyResult dres = densify(result.cloud, opt, adc_state, selected, adc, rng);
            ev.n_after = dres.n_after;
            ev.clones = dres.clones;
            ev.splits = dres.splits;
            events.push_back(std::move(ev));
        }
        if (adc.opacity_reset && adc.opacity_reset_interval > 0 &&
            k % adc.opacity_reset_interval == 0) {
            AdcEvent ev;
            ev.type = "opacity_reset";
            ev.n_before = result.cloud.size();
            const int lowered = opacity_reset(result.cloud, adc);
            ev.n_after = result.cloud.size();
            ev.indices = {lowered};
            events.push_back(std::move(ev));
        }
        if (adc.is_prune_step(k)) {
            AdcEvent ev1;
            ev1.type = "prune_opacity";
            ev1.n_before = result.cloud.size();
            ev1.indices = prune_transparent(result.cloud, opt, adc_state, k, adc);
            ev1.n_after = result.cloud.size();
            events.push_back(std::move(ev1));

            AdcEvent ev2;
            ev2.type = "prune_budget";
            ev2.n_before = result.cloud.size();
            ev2.indices = enforce_budget(result.cloud, opt, adc_state, adc);
            ev2.n_after = result.cloud.size();
            events.push_back(std::move(ev2));
        }

        // --- structured record ---
        json rec{{"iter", k},
                 {"loss",
                  {{"total", loss_total},
                   {"l1", loss_l1},
                   {"dssim", loss_dssim},
                   {"depth", loss_depth},
                   {"depth_used", depth_used}}},
                 {"n", result.cloud.size()}};
        if (!events.empty()) {
            json evs = json::array();
            for (const AdcEvent& ev : events) evs.push_back(event_to_json(ev));
            rec["events"] = evs;
        }
        result.log.append(rec.dump());

        if (k % config.eval_interval == 0 && k != config.max_iterations) run_eval(k);
        if (run_options.verbose && k % 100 == 0) {
            std::cerr << "[iter " << k << "] loss " << loss_total << " n " << result.cloud.size()
                      << "\n";
        }
    }

    if (config.max_iterations > 0) run_eval(config.max_iterations);
    json fin{{"final", true},
             {"n", result.cloud.size()},
             {"iterations", config.max_iterations}};
    result.log.append(fin.dump());
    return result;
}

EvalResult evaluate(const GaussianCloud& cloud, const std::vector<ViewData>& views,
                    const Vec3& background, const RenderOptions& options) {
    EvalResult res;
    for (const ViewData& view : views) {
        const RenderOutput out = render(cloud, view.camera, background, options);
        res.psnr.push_back(psnr(out.color, view.image));
        res.ssim.push_back(ssim(out.color, view.image));
    }
    res.mean_psnr = mean_of(res.psnr);
    res.mean_ssim = mean_of(res.ssim);
    return res;
}

std::string AblationResult::table() const {
    std::ostringstream out;
    out << "configuration                     psnr            ssim            n_final\n";
    for (const AblationRow& r : rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-32s %6.2f +- %4.2f  %5.3f +- %5.3f  %8.1f\n",
                      r.name.c_str(), r.mean_psnr, r.spread_psnr, r.mean_ssim, r.spread_ssim,
                      r.mean_final_n);
        out << buf;
    }
    return out.str();
}

const AblationRow& AblationResult::row(const std::string& name) const {
    for (const AblationRow& r : rows) {
        if (r.name == name) return r;
    }
    throw ValidationError("AblationResult: no row named '" + name + "'");
}

AblationResult ablate(const Scene& scene, const TrainConfig& base_config, int n_seeds,
                      int parallel_runs) {
    if (n_seeds < 1) throw ValidationError("ablate: n_seeds must be >= 1");

    struct Variant {
        std::string name;
        TrainConfig config;
    };
    std::vector<Variant> variants;

    variants.push_back({"full", base_config});

    TrainConfig aggressive = base_config;
    aggressive.adc.prune_start = 500;
    aggressive.adc.tau_prune = 0.005;
    variants.push_back({"no_conservative_pruning", aggressive});

    TrainConfig positional = base_config;
    positional.adc.mode = DensifyMode::Baseline;
    variants.push_back({"no_error_driven_densification", positional});

    TrainConfig no_depth = base_config;
    no_depth.weights.w_depth = 0.0;
    variants.push_back({"no_depth_loss", no_depth});

    struct RunResult {
        double psnr = 0.0, ssim = 0.0, final_n = 0.0;
    };
    const int total_runs = static_cast<int>(variants.size()) * n_seeds;
    std::vector<RunResult> results(total_runs);

    // Independent runs; a work queue keeps the output identical for any
    // worker count because each run lands in its own slot.
    std::mutex queue_mutex;
    int next = 0;
    auto worker = [&]() {
        for (;;) {
            int job;
            {
                std::lock_guard<std::mutex> lock(queue_mutex);
                if (next >= total_runs) return;
                job = next++;
            }
            const int vi = job / n_seeds;
            const int si = job % n_seeds;
            TrainConfig cfg = variants[vi].config;
            cfg.seed = base_config.seed + static_cast<uint64_t>(si);
            cfg.threads = 1; // runs are the parallel unit here
            const TrainResult tr = train(scene, cfg);
            RenderOptions ropts = cfg.render_options;
            ropts.threads = 1;
            const EvalResult ev = evaluate(tr.cloud, scene.test_views, cfg.background, ropts);
            results[job] = {ev.mean_psnr, ev.mean_ssim, static_cast<double>(tr.cloud.size())};
        }
    };

    const int workers = std::min(total_runs, resolve_threads(parallel_runs));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    AblationResult out;
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
        AblationRow row;
        row.name = variants[vi].name;
        row.w_depth = variants[vi].config.weights.w_depth;
        for (int si = 0; si < n_seeds; ++si) {
            const RunResult& r = results[vi * n_seeds + si];
            row.psnr.push_back(r.psnr);
            row.ssim.push_back(r.ssim);
            row.final_n.push_back(r.final_n);
        }
        row.mean_psnr = mean_of(row.psnr);
        row.spread_psnr = spread_of(row.psnr);
        row.mean_ssim = mean_of(row.ssim);
        row.spread_ssim = spread_of(row.ssim);
        row.mean_final_n = mean_of(row.final_n);
        out.rows.push_back(std::move(row));
    }
    return out;
}

} // namespace splat
