#include "attacknet/protocol.hpp"

#include <cstdio>
#include <sstream>

#include "attacknet/errors.hpp"

namespace attacknet {

std::vector<Label> predict(Model& m, const std::vector<LoadedSample>& data) {
    const std::size_t bs = m.cfg.batch_size;
    const std::size_t c = m.cfg.input_channels, h = m.cfg.input_h, w = m.cfg.input_w;
    const std::size_t img = c * h * w;
    std::vector<Label> preds;
    preds.reserve(data.size());
    for (std::size_t start = 0; start < data.size(); start += bs) {
        const std::size_t n = std::min(bs, data.size() - start);
        Tensor x({n, c, h, w});
        for (std::size_t i = 0; i < n; ++i) {
            std::copy(data[start + i].image.data(), data[start + i].image.data() + img,
                      x.data() + i * img);
        }
        Tensor probs = m.forward(x, nn::Mode::Infer, nullptr, nullptr);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < m.cfg.num_classes; ++j) {
                if (probs.at2(i, j) > probs.at2(i, best)) best = j;
            }
            preds.push_back(static_cast<Label>(best));
        }
    }
    return preds;
}

std::vector<double> genuine_scores(Model& m, const std::vector<LoadedSample>& data) {
    const std::size_t bs = m.cfg.batch_size;
    const std::size_t c = m.cfg.input_channels, h = m.cfg.input_h, w = m.cfg.input_w;
    const std::size_t img = c * h * w;
    std::vector<double> scores;
    scores.reserve(data.size());
    for (std::size_t start = 0; start < data.size(); start += bs) {
        const std::size_t n = std::min(bs, data.size() - start);
        Tensor x({n, c, h, w});
        for (std::size_t i = 0; i < n; ++i) {
            std::copy(data[start + i].image.data(), data[start + i].image.data() + img,
                      x.data() + i * img);
        }
        Tensor probs = m.forward(x, nn::Mode::Infer, nullptr, nullptr);
        for (std::size_t i = 0; i < n; ++i) {
            scores.push_back(static_cast<double>(
                probs.at2(i, static_cast<std::size_t>(Label::Bonafide))));
        }
    }
    return scores;
}

EvalReport evaluate_model(Model& m, const std::vector<LoadedSample>& data) {
    if (data.empty()) throw ConfigError("evaluate_model: empty dataset");
    const std::vector<Label> preds = predict(m, data);
    std::vector<Label> labels;
    labels.reserve(data.size());
    for (const auto& s : data) labels.push_back(static_cast<Label>(s.label));
    return eval_report(confusion(preds, labels));
}

CrossEvalMatrix run_cross_eval(const std::vector<DatasetManifest>& datasets,
                               const ModelConfig& cfg, const AugmentSpec& aug,
                               std::uint64_t seed) {
    if (datasets.empty()) throw ConfigError("run_cross_eval: needs at least 1 dataset");
    cfg.validate();

    CrossEvalMatrix out;
    for (const auto& d : datasets) {
        out.train_names.push_back(d.name);
        out.eval_names.push_back(d.name);
    }

    // Preload every dataset's Val split once.
    std::vector<std::vector<LoadedSample>> val_data;
    for (const auto& d : datasets) {
        val_data.push_back(load_split(d, Split::Val, cfg.input_h, cfg.input_w));
    }

    Prng seeder(seed);
    for (std::size_t ti = 0; ti < datasets.size(); ++ti) {
        const std::uint64_t run_seed = seeder.derive(ti + 1);
        Prng run_prng(run_seed);
        ModelConfig run_cfg = cfg;
        run_cfg.seed = run_seed;
        Model model = build_model(run_cfg, run_prng);
        auto [best, log] = fit(std::move(model), datasets[ti], datasets[ti], aug, run_prng);
        for (std::size_t ej = 0; ej < datasets.size(); ++ej) {
            out.cells.push_back(evaluate_model(best, val_data[ej]));
        }
        out.logs.push_back(std::move(log));
        out.models.push_back(std::move(best));
    }
    return out;
}

FusedResult run_fused(const std::vector<DatasetManifest>& datasets, const ModelConfig& cfg,
                      const AugmentSpec& aug, std::uint64_t seed) {
    cfg.validate();
    DatasetManifest fused = fuse(datasets, seed);

    FusedResult res;
    const std::uint64_t run_seed = Prng(seed).derive(0x5u);
    Prng run_prng(run_seed);
    ModelConfig run_cfg = cfg;
    run_cfg.seed = run_seed;
    Model model = build_model(run_cfg, run_prng);
    auto [best, log] = fit(std::move(model), fused, fused, aug, run_prng);
    res.log = std::move(log);

    // Per-source evaluation on each source's Val split.
    auto all_val = load_split(fused, Split::Val, cfg.input_h, cfg.input_w);
    for (const auto& d : datasets) {
        std::vector<LoadedSample> src_val;
        for (const auto& s : all_val)
            if (s.source == d.name) src_val.push_back(s);
        res.source_names.push_back(d.name);
        res.reports.push_back(evaluate_model(best, src_val));
    }
    res.model = std::move(best);
    return res;
}

namespace {

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

std::string render_matrix_text(const CrossEvalMatrix& m) {
    std::ostringstream os;
    for (std::size_t ti = 0; ti < m.train_names.size(); ++ti) {
        for (std::size_t ej = 0; ej < m.eval_names.size(); ++ej) {
            const EvalReport& r = m.cell(ti, ej);
            os << "=== train " << m.train_names[ti] << " / eval " << m.eval_names[ej] << " ===\n";
            os << "metric     B          A\n";
            os << "precision  " << fmt6(r.bonafide.precision.value) << "   "
               << fmt6(r.attack.precision.value) << "\n";
            os << "recall     " << fmt6(r.bonafide.recall.value) << "   "
               << fmt6(r.attack.recall.value) << "\n";
            os << "f1         " << fmt6(r.bonafide.f1.value) << "   " << fmt6(r.attack.f1.value)
               << "\n";
            os << "far        " << fmt6(r.far) << "   " << fmt6(r.frr) << "\n";
            os << "frr        " << fmt6(r.frr) << "   " << fmt6(r.far) << "\n";
            os << "hter       " << fmt6(r.hter) << "\n";
        }
    }
    return os.str();
}

std::string render_matrix_csv(const CrossEvalMatrix& m) {
    std::ostringstream os;
    os << "train,eval,class,precision,recall,f1,far,frr,hter\n";
    for (std::size_t ti = 0; ti < m.train_names.size(); ++ti) {
        for (std::size_t ej = 0; ej < m.eval_names.size(); ++ej) {
            const EvalReport& r = m.cell(ti, ej);
            os << m.train_names[ti] << "," << m.eval_names[ej] << ",bonafide,"
               << fmt6(r.bonafide.precision.value) << "," << fmt6(r.bonafide.recall.value) << ","
               << fmt6(r.bonafide.f1.value) << "," << fmt6(r.far) << "," << fmt6(r.frr) << ","
               << fmt6(r.hter) << "\n";
            os << m.train_names[ti] << "," << m.eval_names[ej] << ",attack,"
               << fmt6(r.attack.precision.value) << "," << fmt6(r.attack.recall.value) << ","
               << fmt6(r.attack.f1.value) << "," << fmt6(r.frr) << "," << fmt6(r.far) << ","
               << fmt6(r.hter) << "\n";
        }
    }
    return os.str();
}

}  // namespace attacknet
