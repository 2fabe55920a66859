// SPDX-License-Identifier: Apache-2.0
#include "laser/cidm.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "laser/error.hpp"

namespace laser {

void CidmConfig::validate() const {
    if (sigma < 1) {
        throw Error(ErrorKind::InvalidArgument, "sigma must be >= 1, got " + std::to_string(sigma));
    }
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw Error(ErrorKind::InvalidArgument,
                    "lambda must be positive and finite, got " + std::to_string(lambda));
    }
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw Error(ErrorKind::InvalidArgument,
                    "alpha must be >= 0 and finite, got " + std::to_string(alpha));
    }
}

CidmResult cidm_general(const EmbeddingSequence& x, const CidmConfig& cfg) {
    cfg.validate();
    const int m = x.t(), d = x.d();
    const Matrix dist = self_distance_matrix(x);
    CidmResult out;
    out.grad = Matrix(m, d, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* xi = x.row(i);
        for (int j = 0; j < m; ++j) {
            const double* xj = x.row(j);
            const double w = static_cast<double>(i - j) * static_cast<double>(i - j) + 1.0;
            if (std::abs(i - j) >= cfg.sigma) {
                const double hinge = cfg.lambda - dist(i, j);
                if (hinge > 0.0) {
                    out.value += w * hinge;
                    // d/dx_i of -W * D(i,j)
                    for (int k = 0; k < d; ++k) {
                        const double diff = 2.0 * (xi[k] - xj[k]);
                        out.grad(i, k) -= w * diff;
                        out.grad(j, k) += w * diff;
                    }
                }
            } else {
                out.value += dist(i, j) / w;
                for (int k = 0; k < d; ++k) {
                    const double diff = 2.0 * (xi[k] - xj[k]);
                    out.grad(i, k) += diff / w;
                    out.grad(j, k) -= diff / w;
                }
            }
        }
    }
    return out;
}

CidmResult cidm_sigma1(const EmbeddingSequence& x, const CidmConfig& cfg) {
    if (cfg.sigma != 1) {
        throw Error(ErrorKind::SigmaNotOne,
                    "cidm_sigma1 requires sigma = 1, got " + std::to_string(cfg.sigma));
    }
    cfg.validate();
    const int m = x.t(), d = x.d();
    const Matrix dist = self_distance_matrix(x);
    CidmResult out;
    out.grad = Matrix(m, d, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* xi = x.row(i);
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            const double w = static_cast<double>(i - j) * static_cast<double>(i - j) + 1.0;
            const double hinge = cfg.lambda - dist(i, j);
            if (hinge > 0.0) {
                out.value += w * hinge;
                const double* xj = x.row(j);
                for (int k = 0; k < d; ++k) {
                    const double diff = 2.0 * (xi[k] - xj[k]);
                    out.grad(i, k) -= w * diff;
                    out.grad(j, k) += w * diff;
                }
            }
        }
    }
    return out;
}

CidmResult cidm_normalized(const EmbeddingSequence& x, const CidmConfig& cfg) {
    CidmResult out = cidm_general(x, cfg);
    const double inv = 1.0 / (static_cast<double>(x.t()) * static_cast<double>(x.t()));
    out.value *= inv;
    out.grad.scale(inv);
    return out;
}

} // namespace laser
