// SPDX-License-Identifier: Apache-2.0
#include "laser/softdtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "laser/error.hpp"
#include "laser/parallel.hpp"

namespace laser {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_dims(const EmbeddingSequence& x, const EmbeddingSequence& xp, const char* op) {
    if (x.d() != xp.d()) {
        throw Error(ErrorKind::DimensionMismatch,
                    std::string(op) + ": sequences have D=" + std::to_string(x.d()) +
                        " and D=" + std::to_string(xp.d()));
    }
}

} // namespace

void SoftDtwConfig::validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw Error(ErrorKind::InvalidArgument,
                    "gamma must be positive and finite, got " + std::to_string(gamma));
    }
    if (threads < 1) {
        throw Error(ErrorKind::InvalidArgument, "threads must be >= 1");
    }
}

double softmin3(double a, double b, double c, double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw Error(ErrorKind::InvalidArgument,
                    "gamma must be positive and finite, got " + std::to_string(gamma));
    }
    if (std::isnan(a) || std::isnan(b) || std::isnan(c)) {
        throw Error(ErrorKind::NonFiniteValue, "softmin3 received NaN");
    }
    const double mn = std::min({a, b, c});
    if (mn == kInf) {
        throw Error(ErrorKind::AllInfinite, "softmin3 requires at least one finite input");
    }
    // exp of -inf is 0, so +inf arguments drop out exactly.
    const double s = std::exp((mn - a) / gamma) + std::exp((mn - b) / gamma) +
                     std::exp((mn - c) / gamma);
    return mn - gamma * std::log(s);
}

namespace {

// Unchecked softmin for the DP interior; boundary cells make at most two
// arguments infinite and all finite values are produced by the recursion.
inline double softmin3_fast(double a, double b, double c, double gamma) {
    const double mn = std::min({a, b, c});
    const double s = std::exp((mn - a) / gamma) + std::exp((mn - b) / gamma) +
                     std::exp((mn - c) / gamma);
    return mn - gamma * std::log(s);
}

} // namespace

ForwardResult sdtw_forward(const EmbeddingSequence& x, const EmbeddingSequence& xp,
                           const SoftDtwConfig& cfg) {
    cfg.validate();
    check_dims(x, xp, "sdtw_forward");
    const int m = x.t(), n = xp.t();
    const Matrix delta = cost_matrix(x, xp);
    Matrix r(m + 1, n + 1, kInf);
    r(0, 0) = 0.0;
    if (!cfg.wavefront) {
        for (int i = 1; i <= m; ++i) {
            for (int j = 1; j <= n; ++j) {
                r(i, j) = delta(i - 1, j - 1) +
                          softmin3_fast(r(i - 1, j - 1), r(i - 1, j), r(i, j - 1), cfg.gamma);
            }
        }
    } else {
        // Anti-diagonal traversal: cells on one diagonal depend only on the
        // two previous diagonals, so they can be computed in any order.
        for (int s = 2; s <= m + n; ++s) {
            const int i_lo = std::max(1, s - n);
            const int i_hi = std::min(m, s - 1);
            const int count = i_hi - i_lo + 1;
            const int workers = count >= 64 ? cfg.threads : 1;
            parallel_for(count, workers, [&](int k) {
                const int i = i_lo + k;
                const int j = s - i;
                r(i, j) = delta(i - 1, j - 1) +
                          softmin3_fast(r(i - 1, j - 1), r(i - 1, j), r(i, j - 1), cfg.gamma);
            });
        }
    }
    return ForwardResult{r(m, n), std::move(r)};
}

BackwardResult sdtw_backward(const EmbeddingSequence& x, const EmbeddingSequence& xp,
                             const Matrix& r, const SoftDtwConfig& cfg) {
    cfg.validate();
    check_dims(x, xp, "sdtw_backward");
    const int m = x.t(), n = xp.t();
    if (r.rows() != m + 1 || r.cols() != n + 1) {
        throw Error(ErrorKind::TableMismatch,
                    "DP table is " + std::to_string(r.rows()) + "x" + std::to_string(r.cols()) +
                        ", expected " + std::to_string(m + 1) + "x" + std::to_string(n + 1));
    }
    if (!std::isfinite(r(m, n)) || r(0, 0) != 0.0) {
        throw Error(ErrorKind::TableMismatch, "DP table was not produced by sdtw_forward");
    }
    const Matrix delta = cost_matrix(x, xp);
    const double gamma = cfg.gamma;

    // Padded tables; index shift of +1 relative to delta.
    Matrix rt(m + 2, n + 2, 0.0);
    for (int i = 0; i <= m; ++i) {
        for (int j = 0; j <= n; ++j) rt(i, j) = r(i, j);
    }
    for (int i = 0; i <= m; ++i) rt(i, n + 1) = -kInf;
    for (int j = 0; j <= n; ++j) rt(m + 1, j) = -kInf;
    rt(m + 1, n + 1) = r(m, n);

    Matrix dpad(m + 2, n + 2, 0.0);
    for (int i = 1; i <= m; ++i) {
        for (int j = 1; j <= n; ++j) dpad(i, j) = delta(i - 1, j - 1);
    }

    Matrix epad(m + 2, n + 2, 0.0);
    epad(m + 1, n + 1) = 1.0;
    for (int j = n; j >= 1; --j) {
        for (int i = m; i >= 1; --i) {
            // Each transition weight exp((r_next - r_here - delta_next)/gamma)
            // is <= 1 by the recursion, so nothing overflows.
            const double a = std::exp((rt(i + 1, j) - rt(i, j) - dpad(i + 1, j)) / gamma);
            const double b = std::exp((rt(i, j + 1) - rt(i, j) - dpad(i, j + 1)) / gamma);
            const double c = std::exp((rt(i + 1, j + 1) - rt(i, j) - dpad(i + 1, j + 1)) / gamma);
            epad(i, j) = a * epad(i + 1, j) + b * epad(i, j + 1) + c * epad(i + 1, j + 1);
        }
    }

    BackwardResult out;
    out.e = Matrix(m, n);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out.e(i, j) = epad(i + 1, j + 1);
    }
    const int d = x.d();
    out.grad_x = Matrix(m, d, 0.0);
    out.grad_xp = Matrix(n, d, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* xi = x.row(i);
        for (int j = 0; j < n; ++j) {
            const double w = 2.0 * out.e(i, j);
            if (w == 0.0) continue;
            const double* yj = xp.row(j);
            for (int k = 0; k < d; ++k) {
                const double diff = xi[k] - yj[k];
                out.grad_x(i, k) += w * diff;
                out.grad_xp(j, k) -= w * diff;
            }
        }
    }
    return out;
}

AlignmentResult sdtw_align(const EmbeddingSequence& x, const EmbeddingSequence& xp,
                           const SoftDtwConfig& cfg) {
    ForwardResult fwd = sdtw_forward(x, xp, cfg);
    BackwardResult bwd = sdtw_backward(x, xp, fwd.r, cfg);
    return AlignmentResult{fwd.value, std::move(fwd.r), std::move(bwd.e), std::move(bwd.grad_x),
                           std::move(bwd.grad_xp)};
}

LossValueWithGrads sdtw_divergence(const EmbeddingSequence& x, const EmbeddingSequence& xp,
                                   const SoftDtwConfig& cfg) {
    const AlignmentResult xy = sdtw_align(x, xp, cfg);
    const AlignmentResult xx = sdtw_align(x, x, cfg);
    const AlignmentResult yy = sdtw_align(xp, xp, cfg);

    LossValueWithGrads out;
    out.value = xy.value - 0.5 * xx.value - 0.5 * yy.value;
    // The self terms see the sequence in both argument roles.
    out.grad_x = xy.grad_x;
    out.grad_x.add_scaled(xx.grad_x, -0.5);
    out.grad_x.add_scaled(xx.grad_xp, -0.5);
    out.grad_xp = xy.grad_xp;
    out.grad_xp.add_scaled(yy.grad_x, -0.5);
    out.grad_xp.add_scaled(yy.grad_xp, -0.5);
    return out;
}

HardDtwResult hard_dtw(const EmbeddingSequence& x, const EmbeddingSequence& xp) {
    check_dims(x, xp, "hard_dtw");
    const int m = x.t(), n = xp.t();
    const Matrix delta = cost_matrix(x, xp);
    Matrix r(m + 1, n + 1, kInf);
    r(0, 0) = 0.0;
    for (int i = 1; i <= m; ++i) {
        for (int j = 1; j <= n; ++j) {
            r(i, j) = delta(i - 1, j - 1) +
                      std::min({r(i - 1, j - 1), r(i - 1, j), r(i, j - 1)});
        }
    }
    HardDtwResult out;
    out.value = r(m, n);
    int i = m, j = n;
    out.path.emplace_back(i, j);
    while (i > 1 || j > 1) {
        if (i == 1) {
            --j;
        } else if (j == 1) {
            --i;
        } else {
            const double diag = r(i - 1, j - 1);
            const double up = r(i - 1, j);
            const double left = r(i, j - 1);
            if (diag <= up && diag <= left) {
                --i;
                --j;
            } else if (up <= left) {
                --i;
            } else {
                --j;
            }
        }
        out.path.emplace_back(i, j);
    }
    std::reverse(out.path.begin(), out.path.end());
    return out;
}

namespace {

void enumerate_paths(const Matrix& delta, int i, int j, double cost, std::vector<double>& out) {
    cost += delta(i, j);
    const int m = delta.rows(), n = delta.cols();
    if (i == m - 1 && j == n - 1) {
        out.push_back(cost);
        return;
    }
    if (i + 1 < m) enumerate_paths(delta, i + 1, j, cost, out);
    if (j + 1 < n) enumerate_paths(delta, i, j + 1, cost, out);
    if (i + 1 < m && j + 1 < n) enumerate_paths(delta, i + 1, j + 1, cost, out);
}

} // namespace

double sdtw_oracle(const EmbeddingSequence& x, const EmbeddingSequence& xp, double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw Error(ErrorKind::InvalidArgument, "gamma must be positive and finite");
    }
    check_dims(x, xp, "sdtw_oracle");
    if (x.t() > 8 || xp.t() > 8) {
        throw Error(ErrorKind::SizeExceeded,
                    "oracle enumerates paths only for m, n <= 8, got " + std::to_string(x.t()) +
                        "x" + std::to_string(xp.t()));
    }
    const Matrix delta = cost_matrix(x, xp);
    std::vector<double> costs;
    costs.reserve(delannoy_number(x.t() - 1, xp.t() - 1));
    enumerate_paths(delta, 0, 0, 0.0, costs);
    const double cmin = *std::min_element(costs.begin(), costs.end());
    double s = 0.0;
    for (double c : costs) s += std::exp((cmin - c) / gamma);
    return cmin - gamma * std::log(s);
}

std::uint64_t delannoy_number(int a, int b) {
    if (a < 0 || b < 0) {
        throw Error(ErrorKind::InvalidArgument, "delannoy_number requires a, b >= 0");
    }
    std::vector<std::uint64_t> prev(static_cast<std::size_t>(b) + 1, 1);
    std::vector<std::uint64_t> cur(static_cast<std::size_t>(b) + 1, 1);
    for (int i = 1; i <= a; ++i) {
        cur[0] = 1;
        for (int j = 1; j <= b; ++j) {
            cur[static_cast<std::size_t>(j)] = prev[static_cast<std::size_t>(j)] +
                                               cur[static_cast<std::size_t>(j) - 1] +
                                               prev[static_cast<std::size_t>(j) - 1];
        }
        std::swap(prev, cur);
    }
    return prev[static_cast<std::size_t>(b)];
}

} // namespace laser
