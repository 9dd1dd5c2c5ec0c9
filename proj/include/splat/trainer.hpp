#pragma once

#include "splat/config.hpp"
#include "splat/scene.hpp"
#include "splat/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace splat {

/// Builds the starting cloud from a colored point set: isotropic scale from
/// the mean distance to the 3 nearest neighbors (scene-extent/100 fallback
/// for degenerate neighborhoods), identity rotations, opacity 0.1, colors
/// mapped through the inverse activation.
GaussianCloud init_cloud(const PointCloud& points);

/// Newline-delimited structured training log. Each line is one JSON record;
/// the content is fully determined by (scene, config), so identical runs
/// produce byte-identical logs.
struct MetricsLog {
    std::vector<std::string> lines;

    void append(std::string line) { lines.push_back(std::move(line)); }
    void write(const std::filesystem::path& path) const;
    std::string joined() const;
};

struct TrainResult {
    GaussianCloud cloud;
    MetricsLog log;
};

/// Optional run plumbing that does not affect the math.
struct TrainRunOptions {
    std::filesystem::path abort_checkpoint_path; // written before aborting, if set
    bool verbose = false;                        // progress lines on stderr
};

/// Runs the full optimization loop: render -> loss -> backward -> Adam ->
/// gradient tracking, with densification at densification steps and
/// opacity/budget pruning at pruning steps. Deterministic under a fixed seed.
/// Aborts with TrainingError (after writing a diagnostic checkpoint when
/// configured) if the loss turns non-finite.
TrainResult train(const Scene& scene, const TrainConfig& config,
                  const TrainRunOptions& run_options = {});

struct EvalResult {
    std::vector<double> psnr;
    std::vector<double> ssim;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
};

/// PSNR/SSIM of the cloud rendered against each view's image.
EvalResult evaluate(const GaussianCloud& cloud, const std::vector<ViewData>& views,
                    const Vec3& background, const RenderOptions& options = {});

/// One row of the ablation comparison.
struct AblationRow {
    std::string name;
    std::vector<double> psnr;    // per seed
    std::vector<double> ssim;    // per seed
    std::vector<double> final_n; // per seed
    double w_depth = 0.0;
    double mean_psnr = 0.0, spread_psnr = 0.0;
    double mean_ssim = 0.0, spread_ssim = 0.0;
    double mean_final_n = 0.0;
};

struct AblationResult {
    std::vector<AblationRow> rows;

    std::string table() const;
    const AblationRow& row(const std::string& name) const;
};

/// Runs the four-way component ablation over `n_seeds` consecutive seeds:
/// the full configuration, aggressive (standard-schedule) pruning,
/// positional-trigger densification, and no depth loss. Runs execute on
/// `parallel_runs` worker threads; results are independent of that choice.
AblationResult ablate(const Scene& scene, const TrainConfig& base_config, int n_seeds,
                      int parallel_runs = 0);

} // namespace splat
