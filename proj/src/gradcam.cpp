#include "attacknet/gradcam.hpp"

#include <algorithm>
#include <cmath>

#include "attacknet/errors.hpp"

namespace attacknet {

GradCamMap grad_cam(Model& m, const Tensor& x, Label target) {
    if (x.rank() != 3 || x.dim(0) != m.cfg.input_channels || x.dim(1) != m.cfg.input_h ||
        x.dim(2) != m.cfg.input_w) {
        throw ShapeError("grad_cam: image must be [" + std::to_string(m.cfg.input_channels) + "," +
                         std::to_string(m.cfg.input_h) + "," + std::to_string(m.cfg.input_w) +
                         "], got " + shape_str(x));
    }
    const std::size_t cls = static_cast<std::size_t>(target);
    if (cls >= m.cfg.num_classes) throw ConfigError("grad_cam: target class out of range");

    Tensor batch = x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)});
    ForwardCache cache;
    m.forward(batch, nn::Mode::Infer, nullptr, &cache);

    // Gradient of the target pre-softmax logit (softmax gradients saturate).
    Tensor dlogits({1, m.cfg.num_classes}, 0.0f);
    dlogits[cls] = 1.0f;
    Tensor tap_grad = m.backward_to_phase2_tap(cache, dlogits);  // [1,C,h,w]

    const Tensor& act = cache.phase2_activation;  // [1,C,h,w]
    const std::size_t c = act.dim(1), h = act.dim(2), w = act.dim(3);

    // Channel weights: spatial mean of the gradients.
    std::vector<float> weights(c, 0.0f);
    for (std::size_t ch = 0; ch < c; ++ch) {
        float s = 0.0f;
        const float* g = &tap_grad.at4(0, ch, 0, 0);
        for (std::size_t i = 0; i < h * w; ++i) s += g[i];
        weights[ch] = s / static_cast<float>(h * w);
    }

    GradCamMap map;
    map.target_class = target;
    map.raw = Tensor({h, w}, 0.0f);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const float* a = &act.at4(0, ch, 0, 0);
        for (std::size_t i = 0; i < h * w; ++i) map.raw[i] += weights[ch] * a[i];
    }
    for (std::size_t i = 0; i < h * w; ++i) map.raw[i] = std::max(map.raw[i], 0.0f);

    // Min-max normalize; an identically-zero map stays zero.
    float lo = map.raw[0], hi = map.raw[0];
    for (std::size_t i = 1; i < h * w; ++i) {
        lo = std::min(lo, map.raw[i]);
        hi = std::max(hi, map.raw[i]);
    }
    if (hi > lo) {
        for (std::size_t i = 0; i < h * w; ++i) map.raw[i] = (map.raw[i] - lo) / (hi - lo);
    } else {
        for (std::size_t i = 0; i < h * w; ++i) map.raw[i] = 0.0f;
    }

    // Bilinear upsample to input resolution.
    ImageRecord fake;
    fake.height = h;
    fake.width = w;
    fake.pixels = Tensor({3, h, w});
    for (std::size_t ch = 0; ch < 3; ++ch)
        for (std::size_t i = 0; i < h * w; ++i) fake.pixels[ch * h * w + i] = map.raw[i];
    ImageRecord up = resize_bilinear(fake, m.cfg.input_h, m.cfg.input_w);
    map.upsampled = Tensor({m.cfg.input_h, m.cfg.input_w});
    for (std::size_t i = 0; i < map.upsampled.size(); ++i) map.upsampled[i] = up.pixels[i];
    return map;
}

namespace {

// Blue -> cyan -> green -> yellow -> red ramp, like common jet-style
// colormaps but piecewise-linear and documented here.
void ramp_color(float t, float& r, float& g, float& b) {
    t = std::clamp(t, 0.0f, 1.0f);
    if (t < 0.25f) {
        r = 0.0f;
        g = t / 0.25f;
        b = 1.0f;
    } else if (t < 0.5f) {
        r = 0.0f;
        g = 1.0f;
        b = 1.0f - (t - 0.25f) / 0.25f;
    } else if (t < 0.75f) {
        r = (t - 0.5f) / 0.25f;
        g = 1.0f;
        b = 0.0f;
    } else {
        r = 1.0f;
        g = 1.0f - (t - 0.75f) / 0.25f;
        b = 0.0f;
    }
}

}  // namespace

Tensor render_heatmap(const GradCamMap& map, const Tensor& base, float alpha) {
    if (!(alpha >= 0.0f && alpha <= 1.0f)) throw ConfigError("render_heatmap: alpha must be in [0,1]");
    if (base.rank() != 3 || base.dim(0) != 3) {
        throw ShapeError("render_heatmap: base must be [3,H,W]");
    }
    const std::size_t h = base.dim(1), w = base.dim(2);
    if (map.upsampled.dim(0) != h || map.upsampled.dim(1) != w) {
        throw ShapeError("render_heatmap: map resolution does not match base image");
    }
    Tensor out(base.shape());
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            float r, g, b;
            ramp_color(map.upsampled[i * w + j], r, g, b);
            const float rgb[3] = {r, g, b};
            for (std::size_t c = 0; c < 3; ++c) {
                const float base_v = base[(c * h + i) * w + j];
                out[(c * h + i) * w + j] =
                    std::clamp((1.0f - alpha) * base_v + alpha * rgb[c], 0.0f, 1.0f);
            }
        }
    }
    return out;
}

}  // namespace attacknet
