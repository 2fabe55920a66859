// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

namespace laser {

// AdamW with decoupled weight decay. The decay is applied against the
// pre-step parameters, together with the bias-corrected moment update:
//
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
class AdamW {
public:
    struct Hyper {
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.01;
    };

    AdamW() = default;
    explicit AdamW(std::size_t parameter_count);
    AdamW(std::size_t parameter_count, Hyper hyper);

    // One update with learning rate lr_now (the schedule lives outside).
    void step(std::vector<double>& params, const std::vector<double>& grads, double lr_now);

    std::uint64_t step_count() const noexcept { return step_; }
    const Hyper& hyper() const noexcept { return hyper_; }

private:
    Hyper hyper_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::uint64_t step_ = 0;
};

} // namespace laser
