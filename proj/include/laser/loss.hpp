// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>
#include <vector>

#include "laser/cidm.hpp"
#include "laser/matrix.hpp"
#include "laser/sequence.hpp"
#include "laser/softdtw.hpp"

namespace laser {

// One correspondence pair's combined objective:
//
//   L(X, X') = align(X, X') + alpha * (f(X)/m^2 + f(X')/n^2)
//
// where align is the soft-DTW divergence (default) or raw soft-DTW, and f is
// the Contrastive-IDM regularizer. reg_x and reg_xp are reported after the
// length normalization but before alpha, so total always reconstructs as
// align_term + alpha * (reg_x + reg_xp).
struct LossBreakdown {
    double align_term = 0.0;
    double reg_x = 0.0;
    double reg_xp = 0.0;
    double total = 0.0;
    Matrix grad_x;  // m x D
    Matrix grad_xp; // n x D
};

LossBreakdown laser_loss(const EmbeddingSequence& x, const EmbeddingSequence& xp,
                         const SoftDtwConfig& sdtw_cfg, const CidmConfig& cidm_cfg);

struct BatchLoss {
    // Arithmetic mean of the per-pair terms. Mean gradients are filled only
    // when every pair shares one shape; otherwise they are left empty and
    // callers reduce the per-pair gradients themselves (weight 1/batch).
    LossBreakdown mean;
    std::vector<LossBreakdown> per_pair;
};

BatchLoss batch_laser_loss(const std::vector<std::pair<EmbeddingSequence, EmbeddingSequence>>& pairs,
                           const SoftDtwConfig& sdtw_cfg, const CidmConfig& cidm_cfg);

} // namespace laser
