// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "laser/matrix.hpp"
#include "laser/sequence.hpp"

namespace laser {

struct SoftDtwConfig {
    double gamma = 0.1;          // smoothing factor, > 0
    bool use_divergence = true;  // normalized soft-DTW as the loss-side term
    bool wavefront = false;      // anti-diagonal forward traversal (optional)
    int threads = 1;             // worker cap for the wavefront traversal
    bool length_normalize = false; // scale the alignment term by 1/(m*n); off by default

    void validate() const;
};

// Smoothed minimum of three values:
//   min_gamma(a, b, c) = -gamma * ln(exp(-a/gamma) + exp(-b/gamma) + exp(-c/gamma))
// computed with the hard minimum subtracted before exponentiating. Inputs may
// be +inf (at most two of them); the result always lies in
// [min(a,b,c) - gamma*ln 3, min(a,b,c)].
double softmin3(double a, double b, double c, double gamma);

struct ForwardResult {
    double value = 0.0;
    Matrix r; // (m+1) x (n+1) accumulated-cost table; r(0,0)=0, +inf borders
};

// Soft-DTW forward dynamic program over the squared-Euclidean cost matrix:
//   r[i][j] = delta[i][j] + min_gamma(r[i-1][j-1], r[i-1][j], r[i][j-1]).
ForwardResult sdtw_forward(const EmbeddingSequence& x, const EmbeddingSequence& xp,
                           const SoftDtwConfig& cfg);

struct BackwardResult {
    Matrix e;       // m x n expected-alignment matrix
    Matrix grad_x;  // m x D
    Matrix grad_xp; // n x D
};

// Exact backward pass. e[i][j] is the Gibbs-weighted probability that an
// alignment path visits cell (i, j); the gradients chain it through the
// squared-Euclidean cost. `r` must be the table produced by sdtw_forward on
// the same inputs; transition weights are recomputed from it rather than
// stored, keeping memory at O(mn).
BackwardResult sdtw_backward(const EmbeddingSequence& x, const EmbeddingSequence& xp,
                             const Matrix& r, const SoftDtwConfig& cfg);

struct AlignmentResult {
    double value = 0.0;
    Matrix r;
    Matrix e;
    Matrix grad_x;
    Matrix grad_xp;
};

// Forward plus backward in one call.
AlignmentResult sdtw_align(const EmbeddingSequence& x, const EmbeddingSequence& xp,
                           const SoftDtwConfig& cfg);

struct LossValueWithGrads {
    double value = 0.0;
    Matrix grad_x;
    Matrix grad_xp;
};

// Soft-DTW divergence:
//   div(X, X') = sdtw(X, X') - sdtw(X, X)/2 - sdtw(X', X')/2.
// Zero at X = X' with vanishing gradient there; the self terms contribute to
// the gradients through both argument roles.
LossValueWithGrads sdtw_divergence(const EmbeddingSequence& x, const EmbeddingSequence& xp,
                                   const SoftDtwConfig& cfg);

struct HardDtwResult {
    double value = 0.0;
    // Alignment path as 1-based (i, j) pairs from (1,1) to (m,n).
    std::vector<std::pair<int, int>> path;
};

// Classical DTW (the gamma -> 0 limit): minimal path cost plus one optimal
// monotonic path. Ties prefer the diagonal step, then (i-1, j).
HardDtwResult hard_dtw(const EmbeddingSequence& x, const EmbeddingSequence& xp);

// Brute-force oracle: enumerates every monotonic alignment path (m, n <= 8)
// and soft-minimizes the total path costs via log-sum-exp. Independent of the
// dynamic program above; exists to check it.
double sdtw_oracle(const EmbeddingSequence& x, const EmbeddingSequence& xp, double gamma);

// Delannoy number D(a, b) with D(a, 0) = D(0, b) = 1. The number of monotonic
// alignment paths through an m x n grid is delannoy_number(m-1, n-1).
std::uint64_t delannoy_number(int a, int b);

} // namespace laser
