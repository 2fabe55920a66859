// SPDX-License-Identifier: Apache-2.0
#include "laser/optim.hpp"

#include <cmath>
#include <string>

#include "laser/error.hpp"

namespace laser {

AdamW::AdamW(std::size_t parameter_count) : AdamW(parameter_count, Hyper{}) {}

AdamW::AdamW(std::size_t parameter_count, Hyper hyper) : hyper_(hyper) {
    m_.assign(parameter_count, 0.0);
    v_.assign(parameter_count, 0.0);
}

void AdamW::step(std::vector<double>& params, const std::vector<double>& grads, double lr_now) {
    if (params.size() != grads.size() || params.size() != m_.size()) {
        throw Error(ErrorKind::ShapeMismatch,
                    "adamw: params=" + std::to_string(params.size()) + " grads=" +
                        std::to_string(grads.size()) + " state=" + std::to_string(m_.size()));
    }
    if (!(lr_now >= 0.0) || !std::isfinite(lr_now)) {
        throw Error(ErrorKind::InvalidArgument, "learning rate must be >= 0 and finite");
    }
    for (double g : grads) {
        if (!std::isfinite(g)) {
            throw Error(ErrorKind::NonFiniteGrad, "adamw received a non-finite gradient");
        }
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        m_[i] = hyper_.beta1 * m_[i] + (1.0 - hyper_.beta1) * g;
        v_[i] = hyper_.beta2 * v_[i] + (1.0 - hyper_.beta2) * g * g;
        const double m_hat = m_[i] / bc1;
        const double v_hat = v_[i] / bc2;
        params[i] -= lr_now * (m_hat / (std::sqrt(v_hat) + hyper_.eps) +
                               hyper_.weight_decay * params[i]);
    }
}

} // namespace laser
