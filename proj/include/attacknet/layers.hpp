#pragma once

#include <cmath>
#include <cstddef>
#include <tuple>
#include <vector>

#include "attacknet/errors.hpp"
#include "attacknet/prng.hpp"
#include "attacknet/tensor.hpp"

namespace attacknet::nn {

// ---------------------------------------------------------------------------
// conv2d: 3x3 kernel, stride 1, zero padding 1 ("same"). Implemented with
// im2col so the hot path is a matmul.
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2dCache {
    TensorT<T> x;  // [N,C,H,W]
};

namespace detail {

// col is [C*9, H*W] for one sample of x (zero padded by 1).
template <typename T>
void im2col_3x3(const TensorT<T>& x, std::size_t n, std::vector<T>& col) {
    const std::size_t c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
    col.assign(c_in * 9 * h * w, T{});
    for (std::size_t c = 0; c < c_in; ++c) {
        for (std::size_t ku = 0; ku < 3; ++ku) {
            for (std::size_t kv = 0; kv < 3; ++kv) {
                T* dst = col.data() + ((c * 3 + ku) * 3 + kv) * h * w;
                for (std::size_t i = 0; i < h; ++i) {
                    const long si = static_cast<long>(i + ku) - 1;
                    if (si < 0 || si >= static_cast<long>(h)) continue;
                    const long j0 = std::max(0L, 1L - static_cast<long>(kv));
                    const long j1 = std::min(static_cast<long>(w),
                                             static_cast<long>(w) + 1 - static_cast<long>(kv));
                    const T* src = &x.at4(n, c, static_cast<std::size_t>(si), 0);
                    for (long j = j0; j < j1; ++j) {
                        dst[i * w + j] = src[j + static_cast<long>(kv) - 1];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_3x3(const std::vector<T>& col, TensorT<T>& dx, std::size_t n) {
    const std::size_t c_in = dx.dim(1), h = dx.dim(2), w = dx.dim(3);
    for (std::size_t c = 0; c < c_in; ++c) {
        for (std::size_t ku = 0; ku < 3; ++ku) {
            for (std::size_t kv = 0; kv < 3; ++kv) {
                const T* src = col.data() + ((c * 3 + ku) * 3 + kv) * h * w;
                for (std::size_t i = 0; i < h; ++i) {
                    const long si = static_cast<long>(i + ku) - 1;
                    if (si < 0 || si >= static_cast<long>(h)) continue;
                    const long j0 = std::max(0L, 1L - static_cast<long>(kv));
                    const long j1 = std::min(static_cast<long>(w),
                                             static_cast<long>(w) + 1 - static_cast<long>(kv));
                    T* dst = &dx.at4(n, c, static_cast<std::size_t>(si), 0);
                    for (long j = j0; j < j1; ++j) {
                        dst[j + static_cast<long>(kv) - 1] += src[i * w + j];
                    }
                }
            }
        }
    }
}

}  // namespace detail

template <typename T>
std::pair<TensorT<T>, Conv2dCache<T>> conv2d_forward(const TensorT<T>& x, const TensorT<T>& w,
                                                     const TensorT<T>& b) {
    if (x.rank() != 4 || w.rank() != 4) throw ShapeError("conv2d: x and w must be rank 4");
    if (w.dim(2) != 3 || w.dim(3) != 3) throw ShapeError("conv2d: kernel must be 3x3");
    if (x.dim(1) != w.dim(1)) {
        throw ShapeError("conv2d: channel mismatch " + shape_str(x) + " vs " + shape_str(w));
    }
    const std::size_t n = x.dim(0), h = x.dim(2), wd = x.dim(3), f = w.dim(0), cin = x.dim(1);
    if (b.size() != f) throw ShapeError("conv2d: bias length must equal filter count");

    TensorT<T> y({n, f, h, wd});
    std::vector<T> col;
    const std::size_t hw = h * wd, k = cin * 9;
    for (std::size_t s = 0; s < n; ++s) {
        detail::im2col_3x3(x, s, col);
        // y[s] = w[F,K] * col[K,HW] + b
        for (std::size_t fo = 0; fo < f; ++fo) {
            T* yrow = &y.at4(s, fo, 0, 0);
            const T bias = b[fo];
            for (std::size_t j = 0; j < hw; ++j) yrow[j] = bias;
            const T* wrow = w.data() + fo * k;
            for (std::size_t p = 0; p < k; ++p) {
                const T wv = wrow[p];
                if (wv == T{}) continue;
                const T* crow = col.data() + p * hw;
                for (std::size_t j = 0; j < hw; ++j) yrow[j] += wv * crow[j];
            }
        }
    }
    return {std::move(y), Conv2dCache<T>{x}};
}

template <typename T>
std::tuple<TensorT<T>, TensorT<T>, TensorT<T>> conv2d_backward(const Conv2dCache<T>& cache,
                                                               const TensorT<T>& dy,
                                                               const TensorT<T>& w) {
    const TensorT<T>& x = cache.x;
    const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3), f = w.dim(0);
    if (dy.rank() != 4 || dy.dim(0) != n || dy.dim(1) != f || dy.dim(2) != h || dy.dim(3) != wd) {
        throw ShapeError("conv2d_backward: dy shape mismatch");
    }
    TensorT<T> dx(x.shape(), T{});
    TensorT<T> dw(w.shape(), T{});
    TensorT<T> db({f}, T{});

    const std::size_t hw = h * wd, k = cin * 9;
    std::vector<T> col, dcol(k * hw);
    for (std::size_t s = 0; s < n; ++s) {
        detail::im2col_3x3(x, s, col);
        for (std::size_t fo = 0; fo < f; ++fo) {
            const T* dyrow = &dy.at4(s, fo, 0, 0);
            T acc = T{};
            for (std::size_t j = 0; j < hw; ++j) acc += dyrow[j];
            db[fo] += acc;
            // dw[fo] += dy[fo] . col^T
            T* dwrow = dw.data() + fo * k;
            for (std::size_t p = 0; p < k; ++p) {
                const T* crow = col.data() + p * hw;
                T s2 = T{};
                for (std::size_t j = 0; j < hw; ++j) s2 += dyrow[j] * crow[j];
                dwrow[p] += s2;
            }
        }
        // dcol = w^T . dy[s]
        std::fill(dcol.begin(), dcol.end(), T{});
        for (std::size_t fo = 0; fo < f; ++fo) {
            const T* dyrow = &dy.at4(s, fo, 0, 0);
            const T* wrow = w.data() + fo * k;
            for (std::size_t p = 0; p < k; ++p) {
                const T wv = wrow[p];
                if (wv == T{}) continue;
                T* drow = dcol.data() + p * hw;
                for (std::size_t j = 0; j < hw; ++j) drow[j] += wv * dyrow[j];
            }
        }
        detail::col2im_3x3(dcol, dx, s);
    }
    return {std::move(dx), std::move(dw), std::move(db)};
}

// ---------------------------------------------------------------------------
// LeakyReLU: h(x) = max{x, alpha*x}, 0 <= alpha < 1. Derivative at 0 is alpha.
// ---------------------------------------------------------------------------

template <typename T>
struct LeakyReluCache {
    TensorT<T> x;
};

template <typename T>
std::pair<TensorT<T>, LeakyReluCache<T>> leaky_relu_forward(const TensorT<T>& x, T alpha) {
    if (!(alpha >= T{0} && alpha < T{1})) throw ConfigError("leaky_relu: alpha must be in [0,1)");
    TensorT<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : alpha * x[i];
    return {std::move(y), LeakyReluCache<T>{x}};
}

template <typename T>
TensorT<T> leaky_relu_backward(const LeakyReluCache<T>& cache, const TensorT<T>& dy, T alpha) {
    if (!cache.x.same_shape(dy)) throw ShapeError("leaky_relu_backward: dy shape mismatch");
    TensorT<T> dx(dy.shape());
    for (std::size_t i = 0; i < dy.size(); ++i) {
        dx[i] = cache.x[i] > T{0} ? dy[i] : alpha * dy[i];
    }
    return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm over [N,C,H,W], statistics per channel across N*H*W.
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNormStateT {
    TensorT<T> gamma;         // [C]
    TensorT<T> beta;          // [C]
    TensorT<T> running_mean;  // [C]
    TensorT<T> running_var;   // [C]
    T momentum = T{0.1};
    T epsilon = T{1e-5};

    static BatchNormStateT identity(std::size_t channels) {
        BatchNormStateT s;
        s.gamma = TensorT<T>({channels}, T{1});
        s.beta = TensorT<T>({channels}, T{0});
        s.running_mean = TensorT<T>({channels}, T{0});
        s.running_var = TensorT<T>({channels}, T{1});
        return s;
    }
};

using BatchNormState = BatchNormStateT<float>;

enum class Mode { Train, Infer };

template <typename T>
struct BatchNormCache {
    TensorT<T> xhat;     // normalized input
    TensorT<T> inv_std;  // [C]
    TensorT<T> mean;     // [C]
    TensorT<T> x;        // saved input (for dvar/dmu terms)
};

template <typename T>
std::pair<TensorT<T>, BatchNormCache<T>> batchnorm_forward(const TensorT<T>& x,
                                                           BatchNormStateT<T>& s, Mode mode) {
    if (x.rank() != 4) throw ShapeError("batchnorm: input must be rank 4");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (s.gamma.size() != c) throw ShapeError("batchnorm: channel count mismatch");
    const std::size_t m = n * h * w;
    if (mode == Mode::Train && m < 2) throw ShapeError("batchnorm: train mode needs N*H*W >= 2");

    TensorT<T> y(x.shape());
    BatchNormCache<T> cache;
    cache.inv_std = TensorT<T>({c});
    cache.mean = TensorT<T>({c});

    if (mode == Mode::Train) {
        cache.xhat = TensorT<T>(x.shape());
        cache.x = x;
        for (std::size_t ch = 0; ch < c; ++ch) {
            T mean = T{};
            for (std::size_t s0 = 0; s0 < n; ++s0)
                for (std::size_t i = 0; i < h * w; ++i) mean += (&x.at4(s0, ch, 0, 0))[i];
            mean /= static_cast<T>(m);
            T var = T{};
            for (std::size_t s0 = 0; s0 < n; ++s0)
                for (std::size_t i = 0; i < h * w; ++i) {
                    const T d = (&x.at4(s0, ch, 0, 0))[i] - mean;
                    var += d * d;
                }
            var /= static_cast<T>(m);  // biased batch variance

            const T inv_std = T{1} / std::sqrt(var + s.epsilon);
            cache.mean[ch] = mean;
            cache.inv_std[ch] = inv_std;
            const T g = s.gamma[ch], be = s.beta[ch];
            for (std::size_t s0 = 0; s0 < n; ++s0) {
                const T* xs = &x.at4(s0, ch, 0, 0);
                T* xh = &cache.xhat.at4(s0, ch, 0, 0);
                T* ys = &y.at4(s0, ch, 0, 0);
                for (std::size_t i = 0; i < h * w; ++i) {
                    xh[i] = (xs[i] - mean) * inv_std;
                    ys[i] = g * xh[i] + be;
                }
            }
            s.running_mean[ch] = (T{1} - s.momentum) * s.running_mean[ch] + s.momentum * mean;
            s.running_var[ch] = (T{1} - s.momentum) * s.running_var[ch] + s.momentum * var;
        }
    } else {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T inv_std = T{1} / std::sqrt(s.running_var[ch] + s.epsilon);
            const T scale = s.gamma[ch] * inv_std;
            const T shift = s.beta[ch] - scale * s.running_mean[ch];
            cache.inv_std[ch] = inv_std;
            cache.mean[ch] = s.running_mean[ch];
            for (std::size_t s0 = 0; s0 < n; ++s0) {
                const T* xs = &x.at4(s0, ch, 0, 0);
                T* ys = &y.at4(s0, ch, 0, 0);
                for (std::size_t i = 0; i < h * w; ++i) ys[i] = scale * xs[i] + shift;
            }
        }
    }
    return {std::move(y), std::move(cache)};
}

/// Train-mode backward. Returns (dx, dgamma, dbeta).
template <typename T>
std::tuple<TensorT<T>, TensorT<T>, TensorT<T>> batchnorm_backward(const BatchNormCache<T>& cache,
                                                                  const TensorT<T>& dy,
                                                                  const BatchNormStateT<T>& s) {
    const TensorT<T>& xhat = cache.xhat;
    if (!xhat.same_shape(dy)) throw ShapeError("batchnorm_backward: dy shape mismatch");
    const std::size_t n = dy.dim(0), c = dy.dim(1), h = dy.dim(2), w = dy.dim(3);
    const T m = static_cast<T>(n * h * w);

    TensorT<T> dx(dy.shape());
    TensorT<T> dgamma({c}, T{});
    TensorT<T> dbeta({c}, T{});

    for (std::size_t ch = 0; ch < c; ++ch) {
        T sum_dy = T{}, sum_dy_xhat = T{};
        for (std::size_t s0 = 0; s0 < n; ++s0) {
            const T* dys = &dy.at4(s0, ch, 0, 0);
            const T* xh = &xhat.at4(s0, ch, 0, 0);
            for (std::size_t i = 0; i < h * w; ++i) {
                sum_dy += dys[i];
                sum_dy_xhat += dys[i] * xh[i];
            }
        }
        dbeta[ch] = sum_dy;
        dgamma[ch] = sum_dy_xhat;
        const T g = s.gamma[ch], inv_std = cache.inv_std[ch];
        for (std::size_t s0 = 0; s0 < n; ++s0) {
            const T* dys = &dy.at4(s0, ch, 0, 0);
            const T* xh = &xhat.at4(s0, ch, 0, 0);
            T* dxs = &dx.at4(s0, ch, 0, 0);
            for (std::size_t i = 0; i < h * w; ++i) {
                dxs[i] = g * inv_std / m * (m * dys[i] - sum_dy - xh[i] * sum_dy_xhat);
            }
        }
    }
    return {std::move(dx), std::move(dgamma), std::move(dbeta)};
}

/// Infer-mode backward (running statistics are constants): dx = dy * gamma * inv_std.
template <typename T>
TensorT<T> batchnorm_backward_infer(const BatchNormCache<T>& cache, const TensorT<T>& dy,
                                    const BatchNormStateT<T>& s) {
    const std::size_t n = dy.dim(0), c = dy.dim(1), h = dy.dim(2), w = dy.dim(3);
    TensorT<T> dx(dy.shape());
    for (std::size_t ch = 0; ch < c; ++ch) {
        const T scale = s.gamma[ch] * cache.inv_std[ch];
        for (std::size_t s0 = 0; s0 < n; ++s0) {
            const T* dys = &dy.at4(s0, ch, 0, 0);
            T* dxs = &dx.at4(s0, ch, 0, 0);
            for (std::size_t i = 0; i < h * w; ++i) dxs[i] = scale * dys[i];
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Inverted dropout: survivors scaled by 1/(1-rate) at train time; inference
// is the identity.
// ---------------------------------------------------------------------------

template <typename T>
struct DropoutCache {
    TensorT<T> mask;  // 0 or 1/(1-rate); empty for infer / rate 0
};

template <typename T>
std::pair<TensorT<T>, DropoutCache<T>> dropout_forward(const TensorT<T>& x, T rate, Mode mode,
                                                       Prng& p) {
    if (!(rate >= T{0} && rate < T{1})) throw ConfigError("dropout: rate must be in [0,1)");
    if (mode == Mode::Infer || rate == T{0}) {
        return {x, DropoutCache<T>{}};
    }
    const T scale = T{1} / (T{1} - rate);
    TensorT<T> mask(x.shape());
    TensorT<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const bool keep = p.uniform01() >= static_cast<float>(rate);
        mask[i] = keep ? scale : T{0};
        y[i] = x[i] * mask[i];
    }
    return {std::move(y), DropoutCache<T>{std::move(mask)}};
}

template <typename T>
TensorT<T> dropout_backward(const DropoutCache<T>& cache, const TensorT<T>& dy) {
    if (cache.mask.size() == 0) return dy;  // identity path
    return mul(dy, cache.mask);
}

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2. Gradient goes to the argmax; row-major-first
// position wins ties.
// ---------------------------------------------------------------------------

template <typename T>
struct MaxPoolCache {
    std::vector<std::size_t> argmax;  // flat input index per output element
    std::vector<std::size_t> in_shape;
};

template <typename T>
std::pair<TensorT<T>, MaxPoolCache<T>> maxpool2x2_forward(const TensorT<T>& x) {
    if (x.rank() != 4) throw ShapeError("maxpool2x2: input must be rank 4");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 != 0 || w % 2 != 0) throw ShapeError("maxpool2x2: spatial extents must be even");

    TensorT<T> y({n, c, h / 2, w / 2});
    MaxPoolCache<T> cache;
    cache.argmax.resize(y.size());
    cache.in_shape = x.shape();

    std::size_t out = 0;
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t i = 0; i < h; i += 2) {
                for (std::size_t j = 0; j < w; j += 2) {
                    std::size_t best = ((s * c + ch) * h + i) * w + j;
                    T bv = x[best];
                    const std::size_t cand[3] = {best + 1, best + w, best + w + 1};
                    for (std::size_t k = 0; k < 3; ++k) {
                        if (x[cand[k]] > bv) {
                            bv = x[cand[k]];
                            best = cand[k];
                        }
                    }
                    y[out] = bv;
                    cache.argmax[out] = best;
                    ++out;
                }
            }
        }
    }
    return {std::move(y), std::move(cache)};
}

template <typename T>
TensorT<T> maxpool2x2_backward(const MaxPoolCache<T>& cache, const TensorT<T>& dy) {
    if (dy.size() != cache.argmax.size()) throw ShapeError("maxpool2x2_backward: dy size mismatch");
    TensorT<T> dx(cache.in_shape, T{});
    for (std::size_t i = 0; i < dy.size(); ++i) dx[cache.argmax[i]] += dy[i];
    return dx;
}

// ---------------------------------------------------------------------------
// Dense: y = x.w + b, x [N,D], w [D,M], b [M].
// ---------------------------------------------------------------------------

template <typename T>
struct DenseCache {
    TensorT<T> x;
};

template <typename T>
std::pair<TensorT<T>, DenseCache<T>> dense_forward(const TensorT<T>& x, const TensorT<T>& w,
                                                   const TensorT<T>& b) {
    if (x.rank() != 2 || w.rank() != 2) throw ShapeError("dense: x and w must be rank 2");
    if (x.dim(1) != w.dim(0)) {
        throw ShapeError("dense: inner extents differ, " + shape_str(x) + " vs " + shape_str(w));
    }
    if (b.size() != w.dim(1)) throw ShapeError("dense: bias length mismatch");
    TensorT<T> y = matmul(x, w);
    for (std::size_t i = 0; i < y.dim(0); ++i)
        for (std::size_t j = 0; j < y.dim(1); ++j) y.at2(i, j) += b[j];
    return {std::move(y), DenseCache<T>{x}};
}

template <typename T>
std::tuple<TensorT<T>, TensorT<T>, TensorT<T>> dense_backward(const DenseCache<T>& cache,
                                                              const TensorT<T>& dy,
                                                              const TensorT<T>& w) {
    const TensorT<T>& x = cache.x;
    if (dy.rank() != 2 || dy.dim(0) != x.dim(0) || dy.dim(1) != w.dim(1)) {
        throw ShapeError("dense_backward: dy shape mismatch");
    }
    const std::size_t n = x.dim(0), d = x.dim(1), m = w.dim(1);
    // dx = dy . w^T
    TensorT<T> dx({n, d}, T{});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const T g = dy.at2(i, j);
            const T* wrow = w.data();
            for (std::size_t p = 0; p < d; ++p) dx.at2(i, p) += g * wrow[p * m + j];
        }
    // dw = x^T . dy
    TensorT<T> dw({d, m}, T{});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < d; ++p) {
            const T xv = x.at2(i, p);
            if (xv == T{}) continue;
            T* dwrow = dw.data() + p * m;
            const T* dyrow = dy.data() + i * m;
            for (std::size_t j = 0; j < m; ++j) dwrow[j] += xv * dyrow[j];
        }
    TensorT<T> db({m}, T{});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) db[j] += dy.at2(i, j);
    return {std::move(dx), std::move(dw), std::move(db)};
}

// ---------------------------------------------------------------------------
// tanh
// ---------------------------------------------------------------------------

template <typename T>
struct TanhCache {
    TensorT<T> y;
};

template <typename T>
std::pair<TensorT<T>, TanhCache<T>> tanh_forward(const TensorT<T>& x) {
    TensorT<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
    return {y, TanhCache<T>{y}};
}

template <typename T>
TensorT<T> tanh_backward(const TanhCache<T>& cache, const TensorT<T>& dy) {
    if (!cache.y.same_shape(dy)) throw ShapeError("tanh_backward: dy shape mismatch");
    TensorT<T> dx(dy.shape());
    for (std::size_t i = 0; i < dy.size(); ++i) {
        dx[i] = dy[i] * (T{1} - cache.y[i] * cache.y[i]);
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Residual add: elementwise sum; backward passes dy unchanged to both inputs.
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> residual_add(const TensorT<T>& a, const TensorT<T>& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("residual_add: shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
    return add(a, b);
}

// ---------------------------------------------------------------------------
// Softmax over rows with max-subtraction, and categorical cross-entropy with
// the fused (probs - onehot)/N logit gradient.
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> softmax(const TensorT<T>& z) {
    if (z.rank() != 2 || z.dim(1) < 2) throw ShapeError("softmax: input must be [N,C], C >= 2");
    const std::size_t n = z.dim(0), c = z.dim(1);
    TensorT<T> out(z.shape());
    for (std::size_t i = 0; i < n; ++i) {
        T mx = z.at2(i, 0);
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, z.at2(i, j));
        T sum = T{};
        for (std::size_t j = 0; j < c; ++j) {
            const T e = std::exp(z.at2(i, j) - mx);
            out.at2(i, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < c; ++j) out.at2(i, j) /= sum;
    }
    return out;
}

template <typename T>
std::pair<T, TensorT<T>> cross_entropy_loss(const TensorT<T>& probs,
                                            const std::vector<std::size_t>& labels) {
    if (probs.rank() != 2) throw ShapeError("cross_entropy: probs must be [N,C]");
    const std::size_t n = probs.dim(0), c = probs.dim(1);
    if (labels.size() != n) throw ShapeError("cross_entropy: label count mismatch");

    T loss = T{};
    TensorT<T> dlogits(probs.shape());
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] >= c) throw ShapeError("cross_entropy: label out of range");
        const T p = std::max(probs.at2(i, labels[i]), static_cast<T>(1e-12));
        loss -= std::log(p);
        for (std::size_t j = 0; j < c; ++j) {
            dlogits.at2(i, j) = (probs.at2(i, j) - (j == labels[i] ? T{1} : T{0})) /
                                static_cast<T>(n);
        }
    }
    return {loss / static_cast<T>(n), std::move(dlogits)};
}

}  // namespace attacknet::nn
