#include "attacknet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace attacknet {

std::string TrainLog::to_csv() const {
    std::ostringstream os;
    os << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    char buf[160];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.train_loss,
                      r.train_acc, r.val_loss, r.val_acc);
        os << buf;
    }
    return os.str();
}

void AugmentSpec::validate() const {
    if (rotation_deg < 0 || shift_frac < 0 || shear_deg < 0) {
        throw ConfigError("augment ranges must be non-negative");
    }
    if (!(zoom_lo > 0 && zoom_lo <= 1.0f && zoom_hi >= 1.0f)) {
        throw ConfigError("zoom interval must contain 1 and be positive");
    }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::uint64_t t,
                 float lr, float beta1, float beta2, float eps) {
    if (!param.same_shape(grad) || !param.same_shape(m) || !param.same_shape(v)) {
        throw ShapeError("adam_update: param/grad/moment shapes must agree");
    }
    if (t < 1) throw ConfigError("adam_update: step index must be >= 1");
    const float bc1 = 1.0f - std::pow(beta1, static_cast<float>(t));
    const float bc2 = 1.0f - std::pow(beta2, static_cast<float>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0f - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0f - beta2) * grad[i] * grad[i];
        const float mhat = m[i] / bc1;
        const float vhat = v[i] / bc2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

void adam_step(Model& model, const std::vector<Tensor>& grads) {
    auto prs = model.params();
    if (grads.size() != prs.size()) throw ShapeError("adam_step: gradient count mismatch");
    ++model.adam_t;
    for (std::size_t i = 0; i < prs.size(); ++i) {
        adam_update(*prs[i].tensor, grads[i], model.adam_m[i], model.adam_v[i], model.adam_t,
                    model.cfg.lr, model.cfg.adam_beta1, model.cfg.adam_beta2, model.cfg.adam_eps);
    }
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

Tensor affine_transform(const Tensor& x, float theta_deg, float tx, float ty, float shear_deg,
                        float zoom) {
    if (x.rank() != 3) throw ShapeError("affine_transform: expected [C,H,W]");
    const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);

    constexpr float kDegToRad = 0.01745329251994329577f;
    const float theta = theta_deg * kDegToRad;
    const float phi = shear_deg * kDegToRad;

    // Forward map about the image center: A = R(theta) . Shear(phi) . zoom.
    const float ct = std::cos(theta), st = std::sin(theta), tp = std::tan(phi);
    const float a00 = zoom * ct, a01 = zoom * (ct * tp - st);
    const float a10 = zoom * st, a11 = zoom * (st * tp + ct);
    // Inverse for output-to-source sampling.
    const float det = a00 * a11 - a01 * a10;
    const float i00 = a11 / det, i01 = -a01 / det;
    const float i10 = -a10 / det, i11 = a00 / det;

    const float cx = (static_cast<float>(w) - 1.0f) / 2.0f;
    const float cy = (static_cast<float>(h) - 1.0f) / 2.0f;

    Tensor out(x.shape(), 0.0f);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const float ox = static_cast<float>(j) - cx - tx;
            const float oy = static_cast<float>(i) - cy - ty;
            const float sx = i00 * ox + i01 * oy + cx;
            const float sy = i10 * ox + i11 * oy + cy;
            if (sx < -1.0f || sy < -1.0f || sx > static_cast<float>(w) ||
                sy > static_cast<float>(h)) {
                continue;  // zero fill
            }
            const long x0 = static_cast<long>(std::floor(sx));
            const long y0 = static_cast<long>(std::floor(sy));
            const float fx = sx - static_cast<float>(x0);
            const float fy = sy - static_cast<float>(y0);
            for (std::size_t ch = 0; ch < c; ++ch) {
                const float* plane = x.data() + ch * h * w;
                auto tap = [&](long yy, long xx) -> float {
                    if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w))
                        return 0.0f;
                    return plane[yy * static_cast<long>(w) + xx];
                };
                const float v = (1 - fy) * ((1 - fx) * tap(y0, x0) + fx * tap(y0, x0 + 1)) +
                                fy * ((1 - fx) * tap(y0 + 1, x0) + fx * tap(y0 + 1, x0 + 1));
                out[(ch * h + i) * w + j] = std::clamp(v, 0.0f, 1.0f);
            }
        }
    }
    return out;
}

Tensor augment(const Tensor& x, const AugmentSpec& spec, Prng& p) {
    spec.validate();
    if (x.rank() != 3) throw ShapeError("augment: expected [C,H,W]");
    auto sym = [&p](float range) { return range > 0.0f ? p.uniform(-range, range) : 0.0f; };
    const float theta = sym(spec.rotation_deg);
    const float tx = sym(spec.shift_frac) * static_cast<float>(x.dim(2));
    const float ty = sym(spec.shift_frac) * static_cast<float>(x.dim(1));
    const float phi = sym(spec.shear_deg);
    const float zoom = spec.zoom_lo == spec.zoom_hi ? spec.zoom_lo
                                                    : p.uniform(spec.zoom_lo, spec.zoom_hi);
    return affine_transform(x, theta, tx, ty, phi, zoom);
}

// ---------------------------------------------------------------------------
// Data loading
// ---------------------------------------------------------------------------

std::vector<LoadedSample> load_split(const DatasetManifest& mf, Split split, std::size_t h,
                                     std::size_t w) {
    std::vector<LoadedSample> out;
    for (const Sample* smp : mf.in_split(split)) {
        ImageRecord rec = decode_image(smp->path);
        if (rec.height != h || rec.width != w) rec = resize_bilinear(rec, h, w);
        out.push_back({std::move(rec.pixels), static_cast<std::size_t>(smp->label), smp->source});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

std::pair<double, double> evaluate_loss_acc(Model& m, const std::vector<LoadedSample>& data) {
    if (data.empty()) throw ConfigError("evaluate_loss_acc: empty dataset");
    const std::size_t bs = m.cfg.batch_size;
    const std::size_t c = m.cfg.input_channels, h = m.cfg.input_h, w = m.cfg.input_w;
    const std::size_t img = c * h * w;

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < data.size(); start += bs) {
        const std::size_t n = std::min(bs, data.size() - start);
        Tensor x({n, c, h, w});
        std::vector<std::size_t> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::copy(data[start + i].image.data(), data[start + i].image.data() + img,
                      x.data() + i * img);
            labels[i] = data[start + i].label;
        }
        Tensor probs = m.forward(x, nn::Mode::Infer, nullptr, nullptr);
        auto [batch_loss, dlogits] = nn::cross_entropy_loss(probs, labels);
        loss_sum += static_cast<double>(batch_loss) * static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            // argmax; ties go to the lower class index
            std::size_t best = 0;
            for (std::size_t j = 1; j < m.cfg.num_classes; ++j) {
                if (probs.at2(i, j) > probs.at2(i, best)) best = j;
            }
            if (best == labels[i]) ++correct;
        }
    }
    return {loss_sum / static_cast<double>(data.size()),
            static_cast<double>(correct) / static_cast<double>(data.size())};
}

std::pair<double, double> evaluate_loss_acc(Model& m, const DatasetManifest& data, Split split) {
    return evaluate_loss_acc(m, load_split(data, split, m.cfg.input_h, m.cfg.input_w));
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

bool EarlyStopper::observe(std::size_t epoch, double val_loss) {
    if (val_loss < best_loss_) {
        best_loss_ = val_loss;
        best_epoch_ = epoch;
        stall_ = 0;
        improved_last_ = true;
        return false;
    }
    improved_last_ = false;
    ++stall_;
    return stall_ >= patience_;
}

std::pair<Model, TrainLog> fit(Model m, const DatasetManifest& train, const DatasetManifest& val,
                               const AugmentSpec& aug, Prng& p) {
    m.cfg.validate();
    aug.validate();
    const ModelConfig cfg = m.cfg;

    auto train_data = load_split(train, Split::Train, cfg.input_h, cfg.input_w);
    auto val_data = load_split(val, Split::Val, cfg.input_h, cfg.input_w);
    if (train_data.empty()) throw ConfigError("fit: empty train split");
    if (val_data.empty()) throw ConfigError("fit: empty val split");
    {
        bool has[2] = {false, false};
        for (const auto& s : train_data) has[s.label != 0] = true;
        if (!has[0] || !has[1]) throw ConfigError("fit: train split must contain both classes");
    }

    const std::size_t c = cfg.input_channels, h = cfg.input_h, w = cfg.input_w;
    const std::size_t img = c * h * w;

    TrainLog log;
    Model best = m;
    EarlyStopper stopper(cfg.patience);

    std::vector<std::size_t> order(train_data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        // Seeded per-epoch shuffle.
        for (std::size_t i = order.size(); i-- > 1;) {
            std::swap(order[i], order[p.next_index(i + 1)]);
        }

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - start);
            Tensor x({n, c, h, w});
            std::vector<std::size_t> labels(n);
            for (std::size_t i = 0; i < n; ++i) {
                const LoadedSample& s = train_data[order[start + i]];
                if (aug.enabled) {
                    Tensor a = augment(s.image, aug, p);
                    std::copy(a.data(), a.data() + img, x.data() + i * img);
                } else {
                    std::copy(s.image.data(), s.image.data() + img, x.data() + i * img);
                }
                labels[i] = s.label;
            }
            ForwardCache cache;
            Tensor probs = m.forward(x, nn::Mode::Train, &p, &cache);
            auto [batch_loss, dlogits] = nn::cross_entropy_loss(probs, labels);
            loss_sum += static_cast<double>(batch_loss) * static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t bestc = 0;
                for (std::size_t j = 1; j < cfg.num_classes; ++j) {
                    if (probs.at2(i, j) > probs.at2(i, bestc)) bestc = j;
                }
                if (bestc == labels[i]) ++correct;
            }
            auto grads = m.backward(cache, dlogits);
            adam_step(m, grads);
        }

        auto [val_loss, val_acc] = evaluate_loss_acc(m, val_data);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train_data.size());
        rec.train_acc = static_cast<double>(correct) / static_cast<double>(train_data.size());
        rec.val_loss = val_loss;
        rec.val_acc = val_acc;
        log.records.push_back(rec);

        const bool stop = stopper.observe(epoch, val_loss);
        if (stopper.improved_last()) {
            log.best_epoch = epoch;
            best = m;
        }
        if (stop) {
            log.stop_reason = StopReason::EarlyStop;
            return {std::move(best), std::move(log)};
        }
    }
    log.stop_reason = StopReason::MaxEpochs;
    return {std::move(best), std::move(log)};
}

}  // namespace attacknet
