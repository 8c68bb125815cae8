#pragma once

#include "attacknet/data_io.hpp"
#include "attacknet/model.hpp"
#include "attacknet/tensor.hpp"

namespace attacknet {

struct GradCamMap {
    Tensor raw;        // [h,w] at feature-map resolution, values in [0,1]
    Tensor upsampled;  // [H,W] at input resolution
    Label target_class = Label::Bonafide;
};

/// Gradient-weighted class activation map over the last conv layer of
/// phase 2 (pre-pool). x is a single [3,H,W] image.
GradCamMap grad_cam(Model& m, const Tensor& x, Label target);

/// Blend the map through a blue->red ramp over the base image.
/// base is [3,H,W] in [0,1]; alpha in [0,1] is the overlay opacity.
Tensor render_heatmap(const GradCamMap& map, const Tensor& base, float alpha);

}  // namespace attacknet
