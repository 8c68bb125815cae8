// attacknet command-line interface.
//
// Commands: train, eval, cross-eval, fused, flops, params, bench, gradcam.
// Configuration is a flat key=value file (one pair per line, '#' comments);
// unknown keys are rejected. Artifacts are written to --out via a .partial
// temp file plus rename, so interrupted runs never leave half-written files
// under their final names. Exit code 0 iff every declared artifact landed.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "attacknet/gradcam.hpp"
#include "attacknet/metrics.hpp"
#include "attacknet/model.hpp"
#include "attacknet/protocol.hpp"
#include "attacknet/trainer.hpp"

namespace fs = std::filesystem;
using namespace attacknet;

namespace {

// ---------------------------------------------------------------------------
// Run configuration: model hyperparameters plus augmentation, dataset, and
// output-directory plumbing, all in one flat key=value file.
// ---------------------------------------------------------------------------

struct RunConfig {
    ModelConfig model;
    AugmentSpec aug;
    std::string dataset;       // train-command dataset root
    double train_ratio = 0.48;
    std::string out = "out";

    std::string to_text() const {
        std::ostringstream os;
        os << model.to_text();
        char buf[64];
        auto f = [&](const char* k, double v) {
            std::snprintf(buf, sizeof(buf), "%s=%.9g\n", k, v);
            os << buf;
        };
        os << "augment_enabled=" << (aug.enabled ? 1 : 0) << "\n";
        f("augment_rotation_deg", aug.rotation_deg);
        f("augment_shear_deg", aug.shear_deg);
        f("augment_shift_frac", aug.shift_frac);
        f("augment_zoom_hi", aug.zoom_hi);
        f("augment_zoom_lo", aug.zoom_lo);
        if (!dataset.empty()) os << "dataset=" << dataset << "\n";
        os << "out=" << out << "\n";
        f("train_ratio", train_ratio);
        return os.str();
    }
};

RunConfig parse_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);

    RunConfig rc;
    std::ostringstream model_text;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string raw = line;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const auto b = raw.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = raw.find_last_not_of(" \t\r");
        raw = raw.substr(b, e - b + 1);
        const auto eq = raw.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        std::string key = raw.substr(0, eq);
        std::string val = raw.substr(eq + 1);
        auto strip = [](std::string& s) {
            const auto b2 = s.find_first_not_of(" \t");
            const auto e2 = s.find_last_not_of(" \t");
            s = (b2 == std::string::npos) ? "" : s.substr(b2, e2 - b2 + 1);
        };
        strip(key);
        strip(val);

        try {
            if (key == "augment_enabled") rc.aug.enabled = std::stoul(val) != 0;
            else if (key == "augment_rotation_deg") rc.aug.rotation_deg = std::stof(val);
            else if (key == "augment_shift_frac") rc.aug.shift_frac = std::stof(val);
            else if (key == "augment_shear_deg") rc.aug.shear_deg = std::stof(val);
            else if (key == "augment_zoom_lo") rc.aug.zoom_lo = std::stof(val);
            else if (key == "augment_zoom_hi") rc.aug.zoom_hi = std::stof(val);
            else if (key == "dataset") rc.dataset = val;
            else if (key == "train_ratio") rc.train_ratio = std::stod(val);
            else if (key == "out") rc.out = val;
            else model_text << raw << "\n";  // ModelConfig keys; rejects unknowns
        } catch (const std::invalid_argument&) {
            throw ConfigError("config key " + key + ": bad value '" + val + "'");
        } catch (const std::out_of_range&) {
            throw ConfigError("config key " + key + ": value out of range");
        }
    }
    rc.model = ModelConfig::from_text(model_text.str());
    return rc;
}

// ---------------------------------------------------------------------------
// Atomic-ish artifact writing: <name>.partial then rename.
// ---------------------------------------------------------------------------

void write_artifact(const fs::path& path, const std::string& contents) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".partial";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open for writing: " + tmp.string());
        os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!os) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_checkpoint_artifact(const Model& m, const fs::path& path) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".partial";
    save_checkpoint(m, tmp.string());
    fs::rename(tmp, path);
}

std::string dataset_name(const std::string& root) {
    fs::path p(root);
    if (p.filename().empty()) p = p.parent_path();  // trailing slash
    return p.filename().string();
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_train(const RunConfig& rc) {
    if (rc.dataset.empty()) throw ConfigError("train: config must set dataset=<root>");
    const std::string name = dataset_name(rc.dataset);
    DatasetManifest mf = load_dataset(rc.dataset, name, rc.train_ratio, rc.model.seed);

    Prng p(rc.model.seed);
    Model m = build_model(rc.model, p);
    auto [best, log] = fit(std::move(m), mf, mf, rc.aug, p);

    const fs::path out(rc.out);
    write_artifact(out / "config.txt", rc.to_text());
    write_artifact(out / ("trainlog_" + name + ".csv"), log.to_csv());
    write_checkpoint_artifact(best, out / ("model_" + name + ".atkn"));
    EvalReport rep = evaluate_model(best, load_split(mf, Split::Val, rc.model.input_h,
                                                     rc.model.input_w));
    write_artifact(out / ("eval_" + name + ".csv"), rep.to_csv());
    std::cout << rep.to_text();
    std::cout << "stopped_after_epochs," << log.records.size() << "\n";
    std::cout << "best_epoch," << log.best_epoch << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& root, const std::string& out_dir) {
    Model m = load_checkpoint(ckpt);
    const std::string name = dataset_name(root);
    DatasetManifest mf = load_dataset(root, name, 0.48, m.cfg.seed);
    auto data = load_split(mf, Split::Val, m.cfg.input_h, m.cfg.input_w);
    if (data.empty()) throw ConfigError("eval: dataset has an empty val split");

    EvalReport rep = evaluate_model(m, data);
    std::vector<Label> labels;
    for (const auto& s : data) labels.push_back(static_cast<Label>(s.label));
    RocCurve curve = roc(genuine_scores(m, data), labels);

    const fs::path out(out_dir);
    write_artifact(out / ("eval_" + name + ".csv"), rep.to_csv());
    write_artifact(out / ("roc_" + name + ".csv"), curve.to_csv());
    std::cout << rep.to_text();
    std::cout << "auc," << fmt6(curve.auc) << "\n";
    return 0;
}

int cmd_cross_eval(const RunConfig& rc, const std::vector<std::string>& roots) {
    std::vector<DatasetManifest> datasets;
    for (const auto& r : roots) {
        datasets.push_back(load_dataset(r, dataset_name(r), rc.train_ratio, rc.model.seed));
    }
    CrossEvalMatrix m = run_cross_eval(datasets, rc.model, rc.aug, rc.model.seed);

    const fs::path out(rc.out);
    write_artifact(out / "config.txt", rc.to_text());
    write_artifact(out / "matrix.txt", render_matrix_text(m));
    write_artifact(out / "matrix.csv", render_matrix_csv(m));
    for (std::size_t i = 0; i < m.train_names.size(); ++i) {
        write_artifact(out / ("trainlog_" + m.train_names[i] + ".csv"), m.logs[i].to_csv());
        write_checkpoint_artifact(m.models[i], out / ("model_" + m.train_names[i] + ".atkn"));
    }
    std::cout << render_matrix_text(m);
    return 0;
}

int cmd_fused(const RunConfig& rc, const std::vector<std::string>& roots) {
    if (roots.size() < 2) throw ConfigError("fused: need at least two dataset roots");
    std::vector<DatasetManifest> datasets;
    for (const auto& r : roots) {
        datasets.push_back(load_dataset(r, dataset_name(r), rc.train_ratio, rc.model.seed));
    }
    FusedResult f = run_fused(datasets, rc.model, rc.aug, rc.model.seed);

    const fs::path out(rc.out);
    write_artifact(out / "config.txt", rc.to_text());
    write_artifact(out / "trainlog_fused.csv", f.log.to_csv());
    write_checkpoint_artifact(f.model, out / "model_fused.atkn");
    for (std::size_t i = 0; i < f.source_names.size(); ++i) {
        write_artifact(out / ("eval_" + f.source_names[i] + ".csv"), f.reports[i].to_csv());
        std::cout << "=== source " << f.source_names[i] << " ===\n" << f.reports[i].to_text();
    }
    return 0;
}

int cmd_params(const ModelConfig& cfg) {
    Prng p(1);
    Model m = build_model(cfg, p);
    const std::size_t n = param_count(m);
    char mbuf[32];
    std::snprintf(mbuf, sizeof(mbuf), "%.1f", static_cast<double>(n) / 1e6);
    std::cout << "params," << n << "\n";
    std::cout << "params_M," << mbuf << "\n";
    return 0;
}

int cmd_flops(const ModelConfig& cfg) {
    Prng p(1);
    Model m = build_model(cfg, p);
    const std::size_t f = flop_count(m);
    char mbuf[32];
    std::snprintf(mbuf, sizeof(mbuf), "%.1f", static_cast<double>(f) / 1e6);
    std::cout << "flops," << f << "\n";
    std::cout << "mflops," << mbuf << "\n";
    return 0;
}

int cmd_bench(const std::string& ckpt, std::size_t iterations) {
    if (iterations == 0) throw ConfigError("bench: iterations must be >= 1");
    Model m = ckpt.empty() ? [] {
        Prng p(1);
        return build_model(ModelConfig{}, p);
    }() : load_checkpoint(ckpt);

    Prng p(7);
    Tensor x = prng_uniform(p, {1, m.cfg.input_channels, m.cfg.input_h, m.cfg.input_w}, 0.0f,
                            1.0f);
    for (int i = 0; i < 50; ++i) m.forward(x, nn::Mode::Infer, nullptr, nullptr);

    std::vector<double> ms(iterations);
    for (std::size_t i = 0; i < iterations; ++i) {
        // Re-randomize the input cheaply between runs.
        x[i % x.size()] = p.uniform01();
        const auto t0 = std::chrono::steady_clock::now();
        m.forward(x, nn::Mode::Infer, nullptr, nullptr);
        const auto t1 = std::chrono::steady_clock::now();
        ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    std::sort(ms.begin(), ms.end());
    double mean = 0.0;
    for (double v : ms) mean += v;
    mean /= static_cast<double>(iterations);
    const double median = ms[(iterations - 1) / 2];
    const double p95 = ms[std::min(iterations - 1, static_cast<std::size_t>(
                                                       0.95 * static_cast<double>(iterations)))];
    std::cout << "iterations," << iterations << "\n";
    std::cout << "mean_ms," << fmt6(mean) << "\n";
    std::cout << "median_ms," << fmt6(median) << "\n";
    std::cout << "p95_ms," << fmt6(p95) << "\n";
    std::cout << "fps," << fmt6(1000.0 / mean) << "\n";
    return 0;
}

int cmd_gradcam(const std::string& ckpt, const std::string& image, const std::string& target,
                const std::string& out_path, float alpha) {
    Model m = load_checkpoint(ckpt);
    Label cls;
    if (target == "bonafide") cls = Label::Bonafide;
    else if (target == "attack") cls = Label::Attack;
    else throw ConfigError("gradcam: target must be 'bonafide' or 'attack'");

    ImageRecord img = decode_image(image);
    if (img.height != m.cfg.input_h || img.width != m.cfg.input_w) {
        img = resize_bilinear(img, m.cfg.input_h, m.cfg.input_w);
    }
    GradCamMap map = grad_cam(m, img.pixels, cls);
    Tensor overlay = render_heatmap(map, img.pixels, alpha);

    const fs::path out(out_path);
    fs::create_directories(out.parent_path().empty() ? fs::path(".") : out.parent_path());
    const fs::path tmp = out.string() + ".partial";
    write_ppm(overlay, tmp.string());
    fs::rename(tmp, out);

    std::size_t arg = 0;
    for (std::size_t i = 1; i < map.raw.size(); ++i)
        if (map.raw[i] > map.raw[arg]) arg = i;
    const std::size_t w = map.raw.dim(1);
    std::cout << "argmax_row," << arg / w << "\n";
    std::cout << "argmax_col," << arg % w << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AttackNet liveness-detection training and evaluation engine"};
    app.require_subcommand(1);

    std::string config_path, out_dir, ckpt, data_root, image_path, target = "bonafide",
                             gradcam_out = "gradcam.ppm";
    std::vector<std::string> roots;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::size_t iterations = 50000;
    float alpha = 0.5f;

    auto add_config = [&](CLI::App* sub, bool required) {
        auto* opt = sub->add_option("--config", config_path, "key=value config file");
        if (required) opt->required();
        sub->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--out", out_dir, "output directory override");
    };

    auto* train = app.add_subcommand("train", "train on one dataset");
    add_config(train, true);

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset val split");
    eval->add_option("--checkpoint", ckpt, "model checkpoint")->required();
    eval->add_option("--data", data_root, "dataset root")->required();
    eval->add_option("--out", out_dir, "output directory");

    auto* cross = app.add_subcommand("cross-eval", "train-on-each / evaluate-on-all matrix");
    add_config(cross, true);
    cross->add_option("roots", roots, "dataset roots")->required();

    auto* fused = app.add_subcommand("fused", "train once on fused datasets");
    add_config(fused, true);
    fused->add_option("roots", roots, "dataset roots (>= 2)")->required();

    auto* flops = app.add_subcommand("flops", "per-image forward FLOPs");
    add_config(flops, false);

    auto* params = app.add_subcommand("params", "trainable parameter count");
    add_config(params, false);

    auto* bench = app.add_subcommand("bench", "single-image inference latency");
    bench->add_option("--checkpoint", ckpt, "model checkpoint (default: fresh default config)");
    bench->add_option("--iterations", iterations, "number of timed inferences");

    auto* gradcam = app.add_subcommand("gradcam", "write a class-activation overlay");
    gradcam->add_option("--checkpoint", ckpt, "model checkpoint")->required();
    gradcam->add_option("--image", image_path, "input PPM image")->required();
    gradcam->add_option("--target", target, "target class: bonafide|attack");
    gradcam->add_option("--out-path", gradcam_out, "output overlay PPM path");
    gradcam->add_option("--alpha", alpha, "overlay opacity in [0,1]");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig rc;
        if (!config_path.empty()) rc = parse_run_config(config_path);
        if (seed_set) rc.model.seed = seed;
        if (!out_dir.empty()) rc.out = out_dir;
        rc.model.validate();
        rc.aug.validate();

        if (train->parsed()) return cmd_train(rc);
        if (eval->parsed()) return cmd_eval(ckpt, data_root, out_dir.empty() ? "out" : out_dir);
        if (cross->parsed()) return cmd_cross_eval(rc, roots);
        if (fused->parsed()) return cmd_fused(rc, roots);
        if (flops->parsed()) return cmd_flops(rc.model);
        if (params->parsed()) return cmd_params(rc.model);
        if (bench->parsed()) return cmd_bench(ckpt, iterations);
        if (gradcam->parsed())
            return cmd_gradcam(ckpt, image_path, target, gradcam_out, alpha);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
