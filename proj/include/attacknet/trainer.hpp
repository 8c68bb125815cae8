#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "attacknet/data_io.hpp"
#include "attacknet/model.hpp"
#include "attacknet/prng.hpp"

namespace attacknet {

enum class StopReason { MaxEpochs, EarlyStop };

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> records;
    StopReason stop_reason = StopReason::MaxEpochs;
    std::size_t best_epoch = 0;

    /// CSV: header epoch,train_loss,train_acc,val_loss,val_acc; 6-decimal fixed.
    std::string to_csv() const;
};

struct AugmentSpec {
    bool enabled = false;
    float rotation_deg = 15.0f;
    float shift_frac = 0.1f;
    float shear_deg = 10.0f;
    float zoom_lo = 0.9f;
    float zoom_hi = 1.1f;

    void validate() const;
};

/// One bias-corrected Adam update; moments updated in place.
void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::uint64_t t,
                 float lr, float beta1, float beta2, float eps);

/// Apply one Adam step across all model parameters; grads aligned with
/// Model::params(). Increments the shared step counter.
void adam_step(Model& model, const std::vector<Tensor>& grads);

/// Affine warp about the image center (rotation then shear then uniform
/// zoom, then pixel shift), bilinear sampling, zero fill outside.
/// x is [C,H,W] in [0,1].
Tensor affine_transform(const Tensor& x, float theta_deg, float tx, float ty, float shear_deg,
                        float zoom);

/// One randomly sampled affine transform within the given AugmentSpec ranges.
Tensor augment(const Tensor& x, const AugmentSpec& spec, Prng& p);

/// Image decoded, resized to the model input size, paired with its label.
struct LoadedSample {
    Tensor image;  // [3,H,W]
    std::size_t label = 0;
    std::string source;
};

std::vector<LoadedSample> load_split(const DatasetManifest& mf, Split split, std::size_t h,
                                     std::size_t w);

std::pair<double, double> evaluate_loss_acc(Model& m, const std::vector<LoadedSample>& data);
std::pair<double, double> evaluate_loss_acc(Model& m, const DatasetManifest& data, Split split);

/// Patience rule: any strict decrease of the validation loss resets the
/// stall counter; training stops once the loss has failed to improve for
/// `patience` consecutive epochs.
struct EarlyStopper {
    explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

    /// Record one epoch's validation loss; returns true when training
    /// should stop after this epoch.
    bool observe(std::size_t epoch, double val_loss);

    bool improved_last() const { return improved_last_; }
    std::size_t best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_loss_; }

private:
    std::size_t patience_;
    double best_loss_ = std::numeric_limits<double>::infinity();
    std::size_t best_epoch_ = 0;
    std::size_t stall_ = 0;
    bool improved_last_ = false;
};

/// Mini-batch training with per-epoch seeded shuffle, early stopping on
/// validation loss, and best-epoch weight restoration. Uses the Train split
/// of `train` and the Val split of `val`.
std::pair<Model, TrainLog> fit(Model m, const DatasetManifest& train, const DatasetManifest& val,
                               const AugmentSpec& aug, Prng& p);

}  // namespace attacknet
