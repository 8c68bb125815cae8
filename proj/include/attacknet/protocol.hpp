#pragma once

#include <string>
#include <vector>

#include "attacknet/data_io.hpp"
#include "attacknet/metrics.hpp"
#include "attacknet/model.hpp"
#include "attacknet/trainer.hpp"

namespace attacknet {

/// Infer-mode predictions (argmax, ties to bonafide) over loaded samples.
std::vector<Label> predict(Model& m, const std::vector<LoadedSample>& data);

/// Genuine-class probabilities, for ROC sweeps.
std::vector<double> genuine_scores(Model& m, const std::vector<LoadedSample>& data);

EvalReport evaluate_model(Model& m, const std::vector<LoadedSample>& data);

struct CrossEvalMatrix {
    std::vector<std::string> train_names;
    std::vector<std::string> eval_names;
    std::vector<EvalReport> cells;  // row-major: train index * eval count + eval index
    std::vector<TrainLog> logs;     // one per train dataset
    std::vector<Model> models;      // best checkpoint per train dataset

    const EvalReport& cell(std::size_t train_i, std::size_t eval_j) const {
        return cells[train_i * eval_names.size() + eval_j];
    }
};

/// Train one model per dataset and evaluate each on every dataset's Val
/// split. Per-dataset seeds are derived from the global seed so runs are
/// independent of list extensions.
CrossEvalMatrix run_cross_eval(const std::vector<DatasetManifest>& datasets,
                               const ModelConfig& cfg, const AugmentSpec& aug,
                               std::uint64_t seed);

struct FusedResult {
    std::vector<std::string> source_names;
    std::vector<EvalReport> reports;  // one per source tag
    TrainLog log;
    Model model;
};

/// Fuse >= 2 datasets, train once, evaluate per source tag.
FusedResult run_fused(const std::vector<DatasetManifest>& datasets, const ModelConfig& cfg,
                      const AugmentSpec& aug, std::uint64_t seed);

std::string render_matrix_text(const CrossEvalMatrix& m);

/// Flat CSV: train,eval,class,precision,recall,f1,far,frr,hter -- two class
/// rows per cell; the attack row carries the class-swapped FAR/FRR.
std::string render_matrix_csv(const CrossEvalMatrix& m);

}  // namespace attacknet
