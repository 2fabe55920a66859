// SPDX-License-Identifier: Apache-2.0
#include "laser/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "laser/error.hpp"

namespace laser {

std::size_t EncoderParams::param_count() const {
    return w_feat.size() + b_feat.size() + w_proj.size() + b_proj.size();
}

std::vector<double> EncoderParams::to_flat() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    flat.insert(flat.end(), w_feat.data(), w_feat.data() + w_feat.size());
    flat.insert(flat.end(), b_feat.begin(), b_feat.end());
    flat.insert(flat.end(), w_proj.data(), w_proj.data() + w_proj.size());
    flat.insert(flat.end(), b_proj.begin(), b_proj.end());
    return flat;
}

void EncoderParams::from_flat(const std::vector<double>& flat) {
    if (flat.size() != param_count()) {
        throw Error(ErrorKind::ShapeMismatch,
                    "flat vector has " + std::to_string(flat.size()) + " entries, expected " +
                        std::to_string(param_count()));
    }
    std::size_t off = 0;
    std::memcpy(w_feat.data(), flat.data() + off, w_feat.size() * sizeof(double));
    off += w_feat.size();
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + b_feat.size()), b_feat.begin());
    off += b_feat.size();
    std::memcpy(w_proj.data(), flat.data() + off, w_proj.size() * sizeof(double));
    off += w_proj.size();
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + b_proj.size()), b_proj.begin());
}

EncoderParams init_encoder(int d_in, int hidden, int d_proj, RngSeed seed) {
    if (d_in < 1 || hidden < 1 || d_proj < 1) {
        throw Error(ErrorKind::InvalidArgument, "encoder dims must be >= 1");
    }
    Rng rng(seed);
    EncoderParams params;
    params.w_feat = Matrix(d_in, hidden);
    params.b_feat.assign(static_cast<std::size_t>(hidden), 0.0);
    params.w_proj = Matrix(hidden, d_proj);
    params.b_proj.assign(static_cast<std::size_t>(d_proj), 0.0);

    const double bound1 = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (std::size_t i = 0; i < params.w_feat.size(); ++i) {
        params.w_feat.data()[i] = bound1 * (2.0 * rng.next_double() - 1.0);
    }
    for (double& b : params.b_feat) b = bound1 * (2.0 * rng.next_double() - 1.0);
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (std::size_t i = 0; i < params.w_proj.size(); ++i) {
        params.w_proj.data()[i] = bound2 * (2.0 * rng.next_double() - 1.0);
    }
    for (double& b : params.b_proj) b = bound2 * (2.0 * rng.next_double() - 1.0);
    return params;
}

EmbeddingSequence encoder_forward(const EncoderParams& params, const EmbeddingSequence& z,
                                  EncoderCache* cache) {
    const int t = z.t(), d_in = params.d_in(), h = params.hidden(), d_out = params.d_proj();
    if (z.d() != d_in) {
        throw Error(ErrorKind::DimensionMismatch,
                    "encoder expects D_in=" + std::to_string(d_in) + ", got " +
                        std::to_string(z.d()));
    }
    Matrix hidden(t, h);
    Matrix proj(t, d_out);
    std::vector<double> norms(static_cast<std::size_t>(t));
    Matrix out(t, d_out);
    for (int i = 0; i < t; ++i) {
        const double* zi = z.row(i);
        for (int j = 0; j < h; ++j) {
            double acc = params.b_feat[static_cast<std::size_t>(j)];
            for (int k = 0; k < d_in; ++k) acc += zi[k] * params.w_feat(k, j);
            hidden(i, j) = std::tanh(acc);
        }
        for (int j = 0; j < d_out; ++j) {
            double acc = params.b_proj[static_cast<std::size_t>(j)];
            for (int k = 0; k < h; ++k) acc += hidden(i, k) * params.w_proj(k, j);
            proj(i, j) = acc;
        }
        double norm = 0.0;
        for (int j = 0; j < d_out; ++j) norm += proj(i, j) * proj(i, j);
        norm = std::sqrt(norm);
        if (!std::isfinite(norm)) {
            throw Error(ErrorKind::NonFiniteValue,
                        "projection output for frame " + std::to_string(i) + " is not finite");
        }
        if (norm <= 1e-12) {
            throw Error(ErrorKind::ZeroRow,
                        "projection output for frame " + std::to_string(i) + " has norm " +
                            std::to_string(norm));
        }
        norms[static_cast<std::size_t>(i)] = norm;
        for (int j = 0; j < d_out; ++j) out(i, j) = proj(i, j) / norm;
    }
    if (cache) {
        cache->h = std::move(hidden);
        cache->p = std::move(proj);
        cache->p_norm = std::move(norms);
    }
    return EmbeddingSequence(std::move(out), true);
}

std::vector<double> encoder_backward(const EncoderParams& params, const EmbeddingSequence& z,
                                     const EncoderCache& cache, const Matrix& grad_out) {
    const int t = z.t(), d_in = params.d_in(), h = params.hidden(), d_out = params.d_proj();
    if (grad_out.rows() != t || grad_out.cols() != d_out) {
        throw Error(ErrorKind::ShapeMismatch, "grad_out shape does not match encoder output");
    }
    if (cache.h.rows() != t || cache.p.rows() != t) {
        throw Error(ErrorKind::ShapeMismatch, "cache does not match the input sequence");
    }
    Matrix g_wfeat(d_in, h, 0.0);
    std::vector<double> g_bfeat(static_cast<std::size_t>(h), 0.0);
    Matrix g_wproj(h, d_out, 0.0);
    std::vector<double> g_bproj(static_cast<std::size_t>(d_out), 0.0);

    std::vector<double> gp(static_cast<std::size_t>(d_out));
    std::vector<double> gpre(static_cast<std::size_t>(h));
    for (int i = 0; i < t; ++i) {
        const double norm = cache.p_norm[static_cast<std::size_t>(i)];
        // x = p/||p||  =>  dL/dp = (g - (g.x) x) / ||p||
        double gdotx = 0.0;
        for (int j = 0; j < d_out; ++j) {
            gdotx += grad_out(i, j) * cache.p(i, j) / norm;
        }
        for (int j = 0; j < d_out; ++j) {
            const double xj = cache.p(i, j) / norm;
            gp[static_cast<std::size_t>(j)] = (grad_out(i, j) - gdotx * xj) / norm;
            g_bproj[static_cast<std::size_t>(j)] += gp[static_cast<std::size_t>(j)];
        }
        for (int k = 0; k < h; ++k) {
            const double hk = cache.h(i, k);
            double gh = 0.0;
            for (int j = 0; j < d_out; ++j) {
                g_wproj(k, j) += hk * gp[static_cast<std::size_t>(j)];
                gh += params.w_proj(k, j) * gp[static_cast<std::size_t>(j)];
            }
            gpre[static_cast<std::size_t>(k)] = gh * (1.0 - hk * hk);
            g_bfeat[static_cast<std::size_t>(k)] += gpre[static_cast<std::size_t>(k)];
        }
        const double* zi = z.row(i);
        for (int k = 0; k < d_in; ++k) {
            for (int j = 0; j < h; ++j) {
                g_wfeat(k, j) += zi[k] * gpre[static_cast<std::size_t>(j)];
            }
        }
    }

    std::vector<double> flat;
    flat.reserve(params.param_count());
    flat.insert(flat.end(), g_wfeat.data(), g_wfeat.data() + g_wfeat.size());
    flat.insert(flat.end(), g_bfeat.begin(), g_bfeat.end());
    flat.insert(flat.end(), g_wproj.data(), g_wproj.data() + g_wproj.size());
    flat.insert(flat.end(), g_bproj.begin(), g_bproj.end());
    return flat;
}

namespace {

constexpr char kCheckpointMagic[4] = {'L', 'A', 'S', 'R'};
constexpr std::uint32_t kCheckpointVersion = 1;

void append_u32_le(std::string& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<char>((v >> s) & 0xFF));
}

void append_f64_le(std::string& out, double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int s = 0; s < 64; s += 8) out.push_back(static_cast<char>((bits >> s) & 0xFF));
}

std::uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

double read_f64_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | p[b];
    return std::bit_cast<double>(bits);
}

} // namespace

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path) {
    std::string bytes;
    bytes.reserve(16 + 8 * params.param_count());
    bytes.append(kCheckpointMagic, 4);
    append_u32_le(bytes, kCheckpointVersion);
    append_u32_le(bytes, static_cast<std::uint32_t>(params.d_in()));
    append_u32_le(bytes, static_cast<std::uint32_t>(params.hidden()));
    append_u32_le(bytes, static_cast<std::uint32_t>(params.d_proj()));
    for (double v : params.to_flat()) append_f64_le(bytes, v);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
        throw Error(ErrorKind::IoFailure, "write failed on " + path.string());
    }
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 20 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
        throw Error(ErrorKind::MalformedHeader, path.string() + ": not a checkpoint file");
    }
    const std::uint32_t version = read_u32_le(p + 4);
    if (version != kCheckpointVersion) {
        throw Error(ErrorKind::MalformedHeader,
                    path.string() + ": unsupported checkpoint version " + std::to_string(version));
    }
    const int d_in = static_cast<int>(read_u32_le(p + 8));
    const int hidden = static_cast<int>(read_u32_le(p + 12));
    const int d_proj = static_cast<int>(read_u32_le(p + 16));
    if (d_in < 1 || hidden < 1 || d_proj < 1) {
        throw Error(ErrorKind::MalformedHeader, path.string() + ": bad dimensions in header");
    }
    EncoderParams params;
    params.w_feat = Matrix(d_in, hidden);
    params.b_feat.assign(static_cast<std::size_t>(hidden), 0.0);
    params.w_proj = Matrix(hidden, d_proj);
    params.b_proj.assign(static_cast<std::size_t>(d_proj), 0.0);
    const std::size_t expected = 20 + 8 * params.param_count();
    if (bytes.size() != expected) {
        throw Error(ErrorKind::MalformedHeader,
                    path.string() + ": expected " + std::to_string(expected) + " bytes, got " +
                        std::to_string(bytes.size()));
    }
    std::vector<double> flat(params.param_count());
    std::size_t off = 20;
    for (double& v : flat) {
        v = read_f64_le(p + off);
        off += 8;
    }
    params.from_flat(flat);
    return params;
}

} // namespace laser
