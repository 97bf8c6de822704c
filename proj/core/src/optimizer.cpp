#include "zsretinex/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace zsretinex {

void AdamConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("adam: learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("adam: beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("adam: beta2 must lie in [0, 1)");
    if (!(eps > 0.0)) throw std::invalid_argument("adam: eps must be positive");
}

AdamState adam_init(const std::vector<const Tensor*>& params, const AdamConfig& config) {
    config.validate();
    AdamState state;
    state.config = config;
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const Tensor* p : params) {
        state.m.emplace_back(p->shape());
        state.v.emplace_back(p->shape());
    }
    return state;
}

AdamState adam_init(const NetParams& params, const AdamConfig& config) { return adam_init(params.tensors(), config); }

void adam_step(const std::vector<Tensor*>& params, AdamState& state) {
    if (params.size() != state.m.size()) throw std::logic_error("adam: parameter list does not match optimizer state");
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (!params[k]->has_grad()) {
            throw std::logic_error("adam: parameter " + std::to_string(k) + " has no gradient");
        }
        if (params[k]->shape() != state.m[k].shape()) throw std::logic_error("adam: parameter shape changed");
    }

    const AdamConfig& c = state.config;
    ++state.t;
    const double t = static_cast<double>(state.t);
    const double correct1 = 1.0 - std::pow(c.beta1, t);
    const double correct2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const auto g = p.grad();
        double* m = state.m[k].data();
        double* v = state.v[k].data();
        double* w = p.data();
        for (std::size_t i = 0; i < p.numel(); ++i) {
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correct1;
            const double v_hat = v[i] / correct2;
            w[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
        }
    }
}

void adam_step(NetParams& params, AdamState& state) { adam_step(params.tensors(), state); }

}  // namespace zsretinex
