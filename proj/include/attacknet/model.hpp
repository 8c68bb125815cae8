#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attacknet/layers.hpp"
#include "attacknet/prng.hpp"
#include "attacknet/tensor.hpp"

namespace attacknet {

/// All architecture/training hyperparameters. Defaults reproduce the
/// reference budget: 291,042 parameters, ~22.7 MFLOPs per image.
struct ModelConfig {
    std::size_t input_h = 32;
    std::size_t input_w = 32;
    std::size_t input_channels = 3;
    std::size_t phase1_filters = 16;
    std::size_t phase2_filters = 32;
    bool double_filters = true;  // enforce phase2 = 2 * phase1
    float leaky_alpha = 0.1f;
    std::size_t dense_width = 128;
    std::size_t num_classes = 2;
    float dropout_conv = 0.25f;
    float dropout_dense = 0.5f;
    float lr = 0.001f;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    std::uint64_t seed = 42;
    float adam_beta1 = 0.9f;
    float adam_beta2 = 0.999f;
    float adam_eps = 1e-8f;

    void validate() const;
    std::size_t flatten_dim() const {
        return phase2_filters * (input_h / 4) * (input_w / 4);
    }

    /// Flat key=value serialization (one pair per line, sorted keys).
    std::string to_text() const;
    static ModelConfig from_text(const std::string& text);

    bool operator==(const ModelConfig&) const = default;
};

struct NamedTensor {
    std::string name;
    Tensor* tensor;
};

struct NamedTensorView {
    std::string name;
    const Tensor* tensor;
};

/// Per-layer caches for one forward pass; consumed by the matching backward.
struct ForwardCache {
    nn::Conv2dCache<float> conv[6];
    nn::BatchNormCache<float> bn[6];
    nn::LeakyReluCache<float> act1, act2, act_r1, act4, act5, act_r2;
    nn::MaxPoolCache<float> pool1, pool2;
    nn::DropoutCache<float> drop1, drop2, drop_dense;
    nn::DenseCache<float> dense1, dense2;
    nn::TanhCache<float> tanh1;
    Tensor phase2_activation;  // pre-pool tap used by Grad-CAM
    std::vector<std::size_t> conv_stack_out_shape;
    nn::Mode mode = nn::Mode::Infer;
};

/// AttackNet: two residual conv phases, a tanh dense head, softmax output.
class Model {
public:
    ModelConfig cfg;

    Tensor conv_w[6], conv_b[6];
    nn::BatchNormState bn[6];
    Tensor dense1_w, dense1_b, dense2_w, dense2_b;

    // Adam state, aligned with params() ordering.
    std::vector<Tensor> adam_m, adam_v;
    std::uint64_t adam_t = 0;

    /// Trainable parameters in a fixed, documented order (28 tensors for the
    /// default graph: 6 conv w+b pairs, 6 BN gamma+beta pairs, 2 dense pairs).
    std::vector<NamedTensor> params();
    std::vector<NamedTensorView> params() const;

    /// Train mode updates BatchNorm running statistics and consumes the Prng
    /// for dropout; infer mode touches neither.
    Tensor forward(const Tensor& x, nn::Mode mode, Prng* prng, ForwardCache* cache);

    /// Full reverse-mode pass; grads aligned with params() ordering.
    /// Requires a train-mode cache.
    std::vector<Tensor> backward(const ForwardCache& cache, const Tensor& dlogits);

    /// Gradient of the given logit combination at the phase-2 pre-pool
    /// activation (infer-mode cache). Used by Grad-CAM.
    Tensor backward_to_phase2_tap(const ForwardCache& cache, const Tensor& dlogits) const;
};

Model build_model(const ModelConfig& cfg, Prng& p);

std::size_t param_count(const Model& m);

/// Forward-pass FLOPs for batch 1 under the convention documented in
/// model.cpp (multiply-accumulate ops counted as 2, plus bias/residual adds
/// and softmax; comparison-dominated ops and folded inference BatchNorm
/// uncounted).
std::size_t flop_count(const Model& m);

void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace attacknet
