// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "laser/matrix.hpp"
#include "laser/sequence.hpp"

namespace laser {

struct CidmConfig {
    int sigma = 1;        // window size separating temporally distant frames, >= 1
    double lambda = 1.1;  // repulsion margin, > 0
    double alpha = 0.4;   // regularization weight in the combined loss, >= 0

    void validate() const;
};

struct CidmResult {
    double value = 0.0;
    Matrix grad; // m x D
};

// Contrastive-IDM temporal regularizer, general window form:
//
//   f(X) = sum_{i,j} [ y_ij * W(i,j) * max(0, lambda - D_X(i,j))
//                      + (1 - y_ij) * D_X(i,j) / W(i,j) ]
//
// with y_ij = 1 iff |i - j| >= sigma and W(i,j) = (i - j)^2 + 1. Temporally
// distant frames are pushed apart while they sit closer than the margin;
// temporally close frames are pulled together. The i = j terms fall in the
// attraction branch and contribute exactly 0. The hinge subgradient at
// D = lambda is taken on the inactive side (0).
CidmResult cidm_general(const EmbeddingSequence& x, const CidmConfig& cfg);

// sigma = 1 specialization: only the repulsion branch survives,
//   f(X) = sum_{i != j} W(i,j) * max(0, lambda - D_X(i,j)),
// which is nonnegative. Requires cfg.sigma == 1 and matches cidm_general
// term for term.
CidmResult cidm_sigma1(const EmbeddingSequence& x, const CidmConfig& cfg);

// f(X) / m^2 with the gradient scaled identically. f grows quadratically in
// the sequence length, so the combined loss uses this form.
CidmResult cidm_normalized(const EmbeddingSequence& x, const CidmConfig& cfg);

} // namespace laser
