// SPDX-License-Identifier: Apache-2.0
#include "laser/loss.hpp"

#include "laser/error.hpp"

namespace laser {

LossBreakdown laser_loss(const EmbeddingSequence& x, const EmbeddingSequence& xp,
                         const SoftDtwConfig& sdtw_cfg, const CidmConfig& cidm_cfg) {
    LossBreakdown out;
    LossValueWithGrads align;
    if (sdtw_cfg.use_divergence) {
        align = sdtw_divergence(x, xp, sdtw_cfg);
    } else {
        AlignmentResult res = sdtw_align(x, xp, sdtw_cfg);
        align = LossValueWithGrads{res.value, std::move(res.grad_x), std::move(res.grad_xp)};
    }
    if (sdtw_cfg.length_normalize) {
        const double inv = 1.0 / (static_cast<double>(x.t()) * static_cast<double>(xp.t()));
        align.value *= inv;
        align.grad_x.scale(inv);
        align.grad_xp.scale(inv);
    }

    const CidmResult reg_x = cidm_normalized(x, cidm_cfg);
    const CidmResult reg_xp = cidm_normalized(xp, cidm_cfg);

    out.align_term = align.value;
    out.reg_x = reg_x.value;
    out.reg_xp = reg_xp.value;
    out.total = align.value + cidm_cfg.alpha * (reg_x.value + reg_xp.value);
    out.grad_x = std::move(align.grad_x);
    out.grad_x.add_scaled(reg_x.grad, cidm_cfg.alpha);
    out.grad_xp = std::move(align.grad_xp);
    out.grad_xp.add_scaled(reg_xp.grad, cidm_cfg.alpha);
    return out;
}

BatchLoss batch_laser_loss(
    const std::vector<std::pair<EmbeddingSequence, EmbeddingSequence>>& pairs,
    const SoftDtwConfig& sdtw_cfg, const CidmConfig& cidm_cfg) {
    if (pairs.empty()) {
        throw Error(ErrorKind::EmptyBatch, "batch_laser_loss requires at least one pair");
    }
    BatchLoss out;
    out.per_pair.reserve(pairs.size());
    for (const auto& [x, xp] : pairs) {
        out.per_pair.push_back(laser_loss(x, xp, sdtw_cfg, cidm_cfg));
    }
    const double inv = 1.0 / static_cast<double>(pairs.size());
    bool uniform_shapes = true;
    for (const LossBreakdown& lb : out.per_pair) {
        out.mean.align_term += lb.align_term;
        out.mean.reg_x += lb.reg_x;
        out.mean.reg_xp += lb.reg_xp;
        out.mean.total += lb.total;
        uniform_shapes = uniform_shapes &&
                         lb.grad_x.same_shape(out.per_pair.front().grad_x) &&
                         lb.grad_xp.same_shape(out.per_pair.front().grad_xp);
    }
    out.mean.align_term *= inv;
    out.mean.reg_x *= inv;
    out.mean.reg_xp *= inv;
    out.mean.total *= inv;
    if (uniform_shapes) {
        out.mean.grad_x = Matrix(out.per_pair.front().grad_x.rows(),
                                 out.per_pair.front().grad_x.cols(), 0.0);
        out.mean.grad_xp = Matrix(out.per_pair.front().grad_xp.rows(),
                                  out.per_pair.front().grad_xp.cols(), 0.0);
        for (const LossBreakdown& lb : out.per_pair) {
            out.mean.grad_x.add_scaled(lb.grad_x, inv);
            out.mean.grad_xp.add_scaled(lb.grad_xp, inv);
        }
    }
    return out;
}

} // namespace laser
