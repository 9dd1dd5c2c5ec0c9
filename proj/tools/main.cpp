// splatopt: train, render, and evaluate budgeted Gaussian-splat scenes.

#include "splat/config.hpp"
#include "splat/errors.hpp"
#include "splat/image_io.hpp"
#include "splat/losses.hpp"
#include "splat/ply_io.hpp"
#include "splat/renderer.hpp"
#include "splat/scene_io.hpp"
#include "splat/trainer.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int run_make_synthetic(const std::string& spec, const fs::path& out_dir, uint64_t seed,
                       const splat::SyntheticOptions& opts) {
    const fs::path manifest = splat::make_synthetic(spec, out_dir, seed, opts);
    std::cout << "wrote " << manifest.string() << "\n";
    return 0;
}

int run_train(const fs::path& manifest, const fs::path& config_path, const fs::path& out_dir,
              const std::vector<std::string>& overrides, bool quiet) {
    splat::TrainConfig config;
    if (!config_path.empty()) config = splat::parse_config(config_path);
    splat::apply_config_overrides(config, overrides);

    const splat::Scene scene = splat::load_scene(manifest);
    fs::create_directories(out_dir);

    splat::TrainRunOptions run;
    run.abort_checkpoint_path = out_dir / "abort.ply";
    run.verbose = !quiet;

    const splat::TrainResult result = splat::train(scene, config, run);

    splat::save_checkpoint(result.cloud, out_dir / "final.ply");
    result.log.write(out_dir / "metrics.jsonl");
    splat::write_config(config, out_dir / "config.resolved.txt");

    std::cout << "final primitives: " << result.cloud.size() << "\n";
    if (!scene.test_views.empty()) {
        splat::RenderOptions ropts = config.render_options;
        ropts.threads = config.threads;
        const splat::EvalResult ev =
            splat::evaluate(result.cloud, scene.test_views, config.background, ropts);
        std::printf("held-out psnr %.3f dB, ssim %.4f\n", ev.mean_psnr, ev.mean_ssim);
    }
    std::cout << "wrote " << (out_dir / "final.ply").string() << " and "
              << (out_dir / "metrics.jsonl").string() << "\n";
    return 0;
}

int run_render(const fs::path& checkpoint, const fs::path& camera_json, const fs::path& out_png,
               const std::string& background) {
    const splat::GaussianCloud cloud = splat::load_checkpoint(checkpoint);
    const splat::Camera camera = splat::load_camera_json(camera_json);

    splat::TrainConfig tmp; // reuse the config parser for the background triple
    splat::apply_config_overrides(tmp, {"background=" + background});

    const splat::RenderOutput out = splat::render(cloud, camera, tmp.background);
    splat::write_png(out.color, out_png);
    std::cout << "wrote " << out_png.string() << "\n";
    return 0;
}

int run_eval(const fs::path& checkpoint, const fs::path& manifest, const std::string& split,
             const std::string& background) {
    const splat::GaussianCloud cloud = splat::load_checkpoint(checkpoint);
    const splat::Scene scene = splat::load_scene(manifest);

    splat::TrainConfig tmp;
    splat::apply_config_overrides(tmp, {"background=" + background});

    const auto& views = split == "train" ? scene.train_views : scene.test_views;
    if (views.empty()) {
        std::cerr << "eval: no views in split '" << split << "'\n";
        return 1;
    }
    const splat::EvalResult ev = splat::evaluate(cloud, views, tmp.background);
    for (std::size_t i = 0; i < ev.psnr.size(); ++i) {
        std::printf("view %zu: psnr %.3f dB, ssim %.4f\n", i, ev.psnr[i], ev.ssim[i]);
    }
    std::printf("mean: psnr %.3f dB, ssim %.4f\n", ev.mean_psnr, ev.mean_ssim);
    return 0;
}

int run_ablate(const fs::path& manifest, const fs::path& config_path, int seeds, int jobs,
               const fs::path& out_json, const std::vector<std::string>& overrides) {
    splat::TrainConfig config;
    if (!config_path.empty()) config = splat::parse_config(config_path);
    splat::apply_config_overrides(config, overrides);

    const splat::Scene scene = splat::load_scene(manifest);
    const splat::AblationResult result = splat::ablate(scene, config, seeds, jobs);
    std::cout << result.table();

    if (!out_json.empty()) {
        std::string payload = "{\n";
        for (std::size_t i = 0; i < result.rows.size(); ++i) {
            const auto& r = result.rows[i];
            char buf[256];
            std::snprintf(buf, sizeof(buf),
                          "  \"%s\": {\"psnr\": %.6f, \"ssim\": %.6f, \"n\": %.1f}%s\n",
                          r.name.c_str(), r.mean_psnr, r.mean_ssim, r.mean_final_n,
                          i + 1 == result.rows.size() ? "" : ",");
            payload += buf;
        }
        payload += "}\n";
        std::ofstream out(out_json);
        out << payload;
        std::cout << "wrote " << out_json.string() << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"budgeted few-shot Gaussian splatting trainer"};
    app.require_subcommand(1);

    // make-synthetic
    auto* synth = app.add_subcommand("make-synthetic", "generate a synthetic scene on disk");
    std::string synth_spec;
    fs::path synth_out;
    uint64_t synth_seed = 0;
    splat::SyntheticOptions synth_opts;
    synth->add_option("spec", synth_spec, "scene spec: textured-plane or cluster")->required();
    synth->add_option("out_dir", synth_out, "output directory")->required();
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--width", synth_opts.width, "image width");
    synth->add_option("--height", synth_opts.height, "image height");
    synth->add_option("--train-views", synth_opts.train_views, "number of training views");
    synth->add_option("--test-views", synth_opts.test_views, "number of held-out views");

    // train
    auto* train_cmd = app.add_subcommand("train", "optimize a scene");
    fs::path train_manifest, train_config, train_out = "run";
    std::vector<std::string> train_set;
    bool train_quiet = false;
    train_cmd->add_option("manifest", train_manifest, "scene manifest JSON")->required();
    train_cmd->add_option("--config", train_config, "config file (key = value lines)");
    train_cmd->add_option("--out", train_out, "output directory");
    train_cmd->add_option("--set", train_set, "config overrides key=value");
    train_cmd->add_flag("--quiet", train_quiet, "suppress progress output");

    // render
    auto* render_cmd = app.add_subcommand("render", "render a checkpoint from a camera");
    fs::path render_ckpt, render_cam, render_out = "render.png";
    std::string render_bg = "0,0,0";
    render_cmd->add_option("checkpoint", render_ckpt, "checkpoint PLY")->required();
    render_cmd->add_option("camera", render_cam, "camera JSON")->required();
    render_cmd->add_option("--out", render_out, "output PNG");
    render_cmd->add_option("--background", render_bg, "background r,g,b");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint against a manifest");
    fs::path eval_ckpt, eval_manifest;
    std::string eval_split = "test", eval_bg = "0,0,0";
    eval_cmd->add_option("checkpoint", eval_ckpt, "checkpoint PLY")->required();
    eval_cmd->add_option("manifest", eval_manifest, "scene manifest JSON")->required();
    eval_cmd->add_option("--split", eval_split, "train or test")->check(CLI::IsMember({"train", "test"}));
    eval_cmd->add_option("--background", eval_bg, "background r,g,b");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "run the component ablation");
    fs::path ablate_manifest, ablate_config, ablate_out;
    int ablate_seeds = 5, ablate_jobs = 0;
    std::vector<std::string> ablate_set;
    ablate_cmd->add_option("manifest", ablate_manifest, "scene manifest JSON")->required();
    ablate_cmd->add_option("--config", ablate_config, "base config file");
    ablate_cmd->add_option("--seeds", ablate_seeds, "number of seeds");
    ablate_cmd->add_option("--jobs", ablate_jobs, "parallel runs (0 = hardware)");
    ablate_cmd->add_option("--out", ablate_out, "write summary JSON here");
    ablate_cmd->add_option("--set", ablate_set, "config overrides key=value");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return run_make_synthetic(synth_spec, synth_out, synth_seed, synth_opts);
        if (train_cmd->parsed()) {
            return run_train(train_manifest, train_config, train_out, train_set, train_quiet);
        }
        if (render_cmd->parsed()) return run_render(render_ckpt, render_cam, render_out, render_bg);
        if (eval_cmd->parsed()) return run_eval(eval_ckpt, eval_manifest, eval_split, eval_bg);
        if (ablate_cmd->parsed()) {
            return run_ablate(ablate_manifest, ablate_config, ablate_seeds, ablate_jobs,
                              ablate_out, ablate_set);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
