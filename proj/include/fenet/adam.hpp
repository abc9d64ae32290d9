#pragma once

// Adam optimizer over a flat parameter vector (bias-corrected moments).

#include <cstddef>
#include <span>
#include <vector>

#include "fenet/common.hpp"

namespace fenet {

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step = 0;
    std::vector<double> m, v;  // first/second moments, sized on first use

    void reset(std::size_t n) {
        step = 0;
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }
};

inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& s) {
    require(params.size() == grads.size(), ErrorKind::invalid_input, "adam_step: param/grad size mismatch");
    if (s.m.size() != params.size()) {
        require(s.step == 0, ErrorKind::invalid_input, "adam_step: parameter count changed mid-run");
        s.reset(params.size());
    }
    for (double g : grads)
        require(std::isfinite(g), ErrorKind::numeric, "adam_step: non-finite gradient, step aborted");

    s.step += 1;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        params[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
    }
}

}  // namespace fenet
