#pragma once

// Differentiable operator set: dilated 1-D convolution, batch normalization,
// ReLU, dropout, fully-connected, softmax, channel concatenation, residual
// add. Forward ops are pure; each backward op consumes the tensors its
// forward saved and returns/accumulates gradients.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "fenet/common.hpp"
#include "fenet/tensor.hpp"

namespace fenet {

// ---------------------------------------------------------------------------
// Dilated 1-D convolution
// ---------------------------------------------------------------------------

struct ConvKernel {
    std::size_t out_c = 0, in_c = 0, width = 0;
    std::vector<double> w;  // [out_c][in_c][width]
    std::vector<double> b;  // [out_c]

    ConvKernel() = default;
    ConvKernel(std::size_t out_channels, std::size_t in_channels, std::size_t width_)
        : out_c(out_channels), in_c(in_channels), width(width_),
          w(out_channels * in_channels * width_, 0.0), b(out_channels, 0.0) {
        require(width_ % 2 == 1 && width_ >= 1, ErrorKind::invalid_input,
                "ConvKernel: width must be odd, got " + std::to_string(width_));
    }

    double& wt(std::size_t oc, std::size_t ic, std::size_t t) { return w[(oc * in_c + ic) * width + t]; }
    double wt(std::size_t oc, std::size_t ic, std::size_t t) const { return w[(oc * in_c + ic) * width + t]; }
};

// Centered taps with zero "same" padding: out(n) = b + sum_t in(n - d*t') k(t'),
// t' in {-(w-1)/2 .. (w-1)/2}. Output length equals input length; the
// receptive field of one output element spans d*(w-1)+1 inputs.
inline Tensor conv1d_dilated(const Tensor& input, const ConvKernel& k, int d) {
    require(d >= 1, ErrorKind::invalid_input, "conv1d_dilated: dilation must be >= 1");
    require(input.c == k.in_c, ErrorKind::invalid_input,
            "conv1d_dilated: input has " + std::to_string(input.c) + " channels, kernel expects " +
                std::to_string(k.in_c));
    require(input.len >= 1, ErrorKind::invalid_input, "conv1d_dilated: empty input");
    require(input.finite() && all_finite(k.w) && all_finite(k.b), ErrorKind::numeric,
            "conv1d_dilated: non-finite values");

    const int L = static_cast<int>(input.len);
    const int half = static_cast<int>(k.width - 1) / 2;
    Tensor out(input.n, k.out_c, input.len);
    for (std::size_t bi = 0; bi < input.n; ++bi) {
        for (std::size_t oc = 0; oc < k.out_c; ++oc) {
            for (int pos = 0; pos < L; ++pos) {
                double acc = k.b[oc];
                for (std::size_t ic = 0; ic < k.in_c; ++ic) {
                    for (int t = -half; t <= half; ++t) {
                        int src = pos - d * t;
                        if (src < 0 || src >= L) continue;
                        acc += input.at(bi, ic, static_cast<std::size_t>(src)) *
                               k.wt(oc, ic, static_cast<std::size_t>(t + half));
                    }
                }
                out.at(bi, oc, static_cast<std::size_t>(pos)) = acc;
            }
        }
    }
    return out;
}

struct ConvGrads {
    Tensor input_grad;
    std::vector<double> kernel_grad;  // same layout as ConvKernel::w
    std::vector<double> bias_grad;    // same layout as ConvKernel::b
};

inline ConvGrads conv1d_dilated_backward(const Tensor& upstream, const Tensor& saved_input,
                                         const ConvKernel& k, int d) {
    require(d >= 1, ErrorKind::invalid_input, "conv1d_dilated_backward: dilation must be >= 1");
    require(upstream.n == saved_input.n && upstream.c == k.out_c && upstream.len == saved_input.len &&
                saved_input.c == k.in_c,
            ErrorKind::invalid_input, "conv1d_dilated_backward: shape mismatch");

    const int L = static_cast<int>(saved_input.len);
    const int half = static_cast<int>(k.width - 1) / 2;
    ConvGrads g{Tensor::zeros_like(saved_input), std::vector<double>(k.w.size(), 0.0),
                std::vector<double>(k.b.size(), 0.0)};
    for (std::size_t bi = 0; bi < saved_input.n; ++bi) {
        for (std::size_t oc = 0; oc < k.out_c; ++oc) {
            for (int pos = 0; pos < L; ++pos) {
                const double up = upstream.at(bi, oc, static_cast<std::size_t>(pos));
                g.bias_grad[oc] += up;
                for (std::size_t ic = 0; ic < k.in_c; ++ic) {
                    for (int t = -half; t <= half; ++t) {
                        int src = pos - d * t;
                        if (src < 0 || src >= L) continue;
                        const std::size_t ti = static_cast<std::size_t>(t + half);
                        g.kernel_grad[(oc * k.in_c + ic) * k.width + ti] +=
                            up * saved_input.at(bi, ic, static_cast<std::size_t>(src));
                        g.input_grad.at(bi, ic, static_cast<std::size_t>(src)) += up * k.wt(oc, ic, ti);
                    }
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

inline Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.v) v = v > 0.0 ? v : 0.0;
    return out;
}

inline Tensor relu_backward(const Tensor& upstream, const Tensor& saved_input) {
    check_same_shape(upstream, saved_input, "relu_backward");
    Tensor out = Tensor::zeros_like(upstream);
    for (std::size_t i = 0; i < out.v.size(); ++i)
        out.v[i] = saved_input.v[i] > 0.0 ? upstream.v[i] : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Batch normalization (per channel, statistics over batch x length)
// ---------------------------------------------------------------------------

struct BatchNorm {
    std::vector<double> gamma, beta;        // learnable scale/shift
    std::vector<double> dgamma, dbeta;      // gradient accumulators
    std::vector<double> run_mean, run_var;  // inference statistics
    double momentum = 0.1;
    double eps = 1e-5;

    BatchNorm() = default;
    explicit BatchNorm(std::size_t channels)
        : gamma(channels, 1.0), beta(channels, 0.0), dgamma(channels, 0.0), dbeta(channels, 0.0),
          run_mean(channels, 0.0), run_var(channels, 1.0) {}

    std::size_t channels() const { return gamma.size(); }
};

struct BnCache {
    Tensor xhat;
    std::vector<double> inv_std;  // per channel
    bool training = false;
};

inline Tensor batch_norm_forward(const Tensor& x, BatchNorm& bn, bool training, BnCache& cache) {
    require(x.c == bn.channels(), ErrorKind::invalid_input, "batch_norm: channel count mismatch");
    if (training)
        require(x.n >= 2, ErrorKind::invalid_input, "batch_norm: training mode needs batch size >= 2");

    const std::size_t count = x.n * x.len;  // elements per channel
    cache.training = training;
    cache.inv_std.assign(x.c, 0.0);
    cache.xhat = Tensor::zeros_like(x);
    Tensor out = Tensor::zeros_like(x);

    for (std::size_t ch = 0; ch < x.c; ++ch) {
        double mean, var;
        if (training) {
            double sum = 0.0;
            for (std::size_t b = 0; b < x.n; ++b)
                for (std::size_t i = 0; i < x.len; ++i) sum += x.at(b, ch, i);
            mean = sum / static_cast<double>(count);
            double sq = 0.0;
            for (std::size_t b = 0; b < x.n; ++b)
                for (std::size_t i = 0; i < x.len; ++i) {
                    double dlt = x.at(b, ch, i) - mean;
                    sq += dlt * dlt;
                }
            var = sq / static_cast<double>(count);  // biased, matches the normalizer
            bn.run_mean[ch] = (1.0 - bn.momentum) * bn.run_mean[ch] + bn.momentum * mean;
            bn.run_var[ch] = (1.0 - bn.momentum) * bn.run_var[ch] + bn.momentum * var;
        } else {
            mean = bn.run_mean[ch];
            var = bn.run_var[ch];
        }
        const double inv = 1.0 / std::sqrt(var + bn.eps);
        cache.inv_std[ch] = inv;
        for (std::size_t b = 0; b < x.n; ++b)
            for (std::size_t i = 0; i < x.len; ++i) {
                double xh = (x.at(b, ch, i) - mean) * inv;
                cache.xhat.at(b, ch, i) = xh;
                out.at(b, ch, i) = bn.gamma[ch] * xh + bn.beta[ch];
            }
    }
    return out;
}

// Accumulates dgamma/dbeta into bn and returns the input gradient. In training
// mode the batch statistics are part of the differentiated graph.
inline Tensor batch_norm_backward(const Tensor& upstream, BatchNorm& bn, const BnCache& cache) {
    check_same_shape(upstream, cache.xhat, "batch_norm_backward");
    const std::size_t count = upstream.n * upstream.len;
    Tensor dx = Tensor::zeros_like(upstream);
    for (std::size_t ch = 0; ch < upstream.c; ++ch) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t b = 0; b < upstream.n; ++b)
            for (std::size_t i = 0; i < upstream.len; ++i) {
                double dy = upstream.at(b, ch, i);
                sum_dy += dy;
                sum_dy_xhat += dy * cache.xhat.at(b, ch, i);
            }
        bn.dgamma[ch] += sum_dy_xhat;
        bn.dbeta[ch] += sum_dy;

        const double scale = bn.gamma[ch] * cache.inv_std[ch];
        if (cache.training) {
            const double inv_count = 1.0 / static_cast<double>(count);
            for (std::size_t b = 0; b < upstream.n; ++b)
                for (std::size_t i = 0; i < upstream.len; ++i) {
                    double dy = upstream.at(b, ch, i);
                    dx.at(b, ch, i) = scale * (dy - sum_dy * inv_count -
                                               cache.xhat.at(b, ch, i) * sum_dy_xhat * inv_count);
                }
        } else {
            for (std::size_t b = 0; b < upstream.n; ++b)
                for (std::size_t i = 0; i < upstream.len; ++i)
                    dx.at(b, ch, i) = scale * upstream.at(b, ch, i);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Dropout (inverted scaling: inference is the identity)
// ---------------------------------------------------------------------------

inline Tensor dropout_forward(const Tensor& x, double rate, bool training, Rng& rng, Tensor& mask_out) {
    require(rate >= 0.0 && rate < 1.0, ErrorKind::invalid_input, "dropout: rate must be in [0,1)");
    if (!training || rate == 0.0) {
        mask_out = Tensor(x.n, x.c, x.len, 1.0);
        return x;
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    mask_out = Tensor::zeros_like(x);
    Tensor out = Tensor::zeros_like(x);
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        if (rng.uniform() >= rate) {
            mask_out.v[i] = keep_scale;
            out.v[i] = x.v[i] * keep_scale;
        }
    }
    return out;
}

inline Tensor dropout_backward(const Tensor& upstream, const Tensor& mask) {
    check_same_shape(upstream, mask, "dropout_backward");
    Tensor dx = upstream;
    for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= mask.v[i];
    return dx;
}

// ---------------------------------------------------------------------------
// Fully connected
// ---------------------------------------------------------------------------

struct FcLayer {
    std::size_t in = 0, out = 0;
    std::vector<double> w;   // [out][in]
    std::vector<double> b;   // [out]
    std::vector<double> dw;  // gradient accumulators
    std::vector<double> db;

    FcLayer() = default;
    FcLayer(std::size_t in_, std::size_t out_)
        : in(in_), out(out_), w(in_ * out_, 0.0), b(out_, 0.0), dw(in_ * out_, 0.0), db(out_, 0.0) {}
};

// x is (n, features, 1); returns (n, out, 1)
inline Tensor fully_connected(const Tensor& x, const FcLayer& fc) {
    require(x.c == fc.in && x.len == 1, ErrorKind::invalid_input,
            "fully_connected: expected (n," + std::to_string(fc.in) + ",1), got " + x.shape_str());
    Tensor y(x.n, fc.out, 1);
    for (std::size_t b = 0; b < x.n; ++b)
        for (std::size_t o = 0; o < fc.out; ++o) {
            double acc = fc.b[o];
            const double* wrow = &fc.w[o * fc.in];
            for (std::size_t i = 0; i < fc.in; ++i) acc += wrow[i] * x.at(b, i, 0);
            y.at(b, o, 0) = acc;
        }
    return y;
}

// Accumulates dw/db into fc and returns the input gradient.
inline Tensor fully_connected_backward(const Tensor& upstream, const Tensor& saved_input, FcLayer& fc) {
    require(upstream.c == fc.out && saved_input.c == fc.in && upstream.n == saved_input.n,
            ErrorKind::invalid_input, "fully_connected_backward: shape mismatch");
    Tensor dx(saved_input.n, fc.in, 1);
    for (std::size_t b = 0; b < upstream.n; ++b)
        for (std::size_t o = 0; o < fc.out; ++o) {
            const double up = upstream.at(b, o, 0);
            fc.db[o] += up;
            double* dwrow = &fc.dw[o * fc.in];
            const double* wrow = &fc.w[o * fc.in];
            for (std::size_t i = 0; i < fc.in; ++i) {
                dwrow[i] += up * saved_input.at(b, i, 0);
                dx.at(b, i, 0) += up * wrow[i];
            }
        }
    return dx;
}

// (n, c, len) -> (n, c*len, 1); the buffer layout is unchanged
inline Tensor flatten(Tensor x) {
    x.c = x.c * x.len;
    x.len = 1;
    return x;
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

inline std::vector<double> softmax(std::span<const double> logits) {
    require(!logits.empty(), ErrorKind::invalid_input, "softmax: empty input");
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (double& p : out) p /= sum;
    return out;
}

// Row-wise softmax over the channel axis of (n, k, 1)
inline Tensor softmax_rows(const Tensor& logits) {
    require(logits.len == 1 && logits.c >= 1, ErrorKind::invalid_input, "softmax_rows: expected (n,k,1)");
    Tensor out = Tensor::zeros_like(logits);
    for (std::size_t b = 0; b < logits.n; ++b) {
        std::span<const double> row(&logits.v[b * logits.c], logits.c);
        auto p = softmax(row);
        for (std::size_t i = 0; i < logits.c; ++i) out.at(b, i, 0) = p[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Concatenation and residual add
// ---------------------------------------------------------------------------

// Stacks single-channel maps (n,1,L) into one (n,R,L) feature map.
inline Tensor concat_channels(const std::vector<Tensor>& rows) {
    require(!rows.empty(), ErrorKind::invalid_input, "concat_channels: no rows");
    const std::size_t n = rows[0].n, len = rows[0].len;
    std::size_t total_c = 0;
    for (const Tensor& r : rows) {
        require(r.n == n && r.len == len, ErrorKind::invalid_input, "concat_channels: row shape mismatch");
        total_c += r.c;
    }
    Tensor out(n, total_c, len);
    for (std::size_t b = 0; b < n; ++b) {
        std::size_t ch = 0;
        for (const Tensor& r : rows)
            for (std::size_t rc = 0; rc < r.c; ++rc, ++ch)
                for (std::size_t i = 0; i < len; ++i) out.at(b, ch, i) = r.at(b, rc, i);
    }
    return out;
}

// Splits the channel axis back into per-row gradients (inverse of concat).
inline std::vector<Tensor> split_channels(const Tensor& x, const std::vector<std::size_t>& row_channels) {
    std::size_t total = 0;
    for (std::size_t rc : row_channels) total += rc;
    require(total == x.c, ErrorKind::invalid_input, "split_channels: channel counts do not sum");
    std::vector<Tensor> out;
    out.reserve(row_channels.size());
    std::size_t ch0 = 0;
    for (std::size_t rc : row_channels) {
        Tensor t(x.n, rc, x.len);
        for (std::size_t b = 0; b < x.n; ++b)
            for (std::size_t ch = 0; ch < rc; ++ch)
                for (std::size_t i = 0; i < x.len; ++i) t.at(b, ch, i) = x.at(b, ch0 + ch, i);
        out.push_back(std::move(t));
        ch0 += rc;
    }
    return out;
}

inline Tensor residual_add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "residual_add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b.v[i];
    return out;
}

}  // namespace fenet
