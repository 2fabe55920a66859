// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "laser/matrix.hpp"
#include "laser/rng.hpp"
#include "laser/sequence.hpp"

namespace laser {

// Desk-scale trainable encoder: a tanh hidden layer standing in for the
// learnable top of a pretrained feature model, followed by a linear
// projection whose rows are L2-normalized.
//
//   h = tanh(z W_feat + b_feat),  p = h W_proj + b_proj,  x = p / ||p||
struct EncoderParams {
    Matrix w_feat;               // D_in x H
    std::vector<double> b_feat;  // H
    Matrix w_proj;               // H x D_proj
    std::vector<double> b_proj;  // D_proj

    int d_in() const { return w_feat.rows(); }
    int hidden() const { return w_feat.cols(); }
    int d_proj() const { return w_proj.cols(); }

    std::size_t param_count() const;
    std::vector<double> to_flat() const;
    void from_flat(const std::vector<double>& flat);
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for weights and biases.
EncoderParams init_encoder(int d_in, int hidden, int d_proj, RngSeed seed);

struct EncoderCache {
    Matrix h;                    // T x H, post-tanh
    Matrix p;                    // T x D_proj, pre-normalization
    std::vector<double> p_norm;  // T
};

// Forward pass; output rows are unit-norm. The optional cache captures the
// intermediates the backward pass needs.
EmbeddingSequence encoder_forward(const EncoderParams& params, const EmbeddingSequence& z,
                                  EncoderCache* cache = nullptr);

// Gradient of a scalar loss with respect to all parameters, given the loss
// gradient at the encoder output (T x D_proj). Flat layout matches to_flat.
std::vector<double> encoder_backward(const EncoderParams& params, const EmbeddingSequence& z,
                                     const EncoderCache& cache, const Matrix& grad_out);

// Checkpoint file: magic "LASR", u32 little-endian version (=1), u32 dims
// (D_in, H, D_proj), then the parameter blocks as float64 little-endian in
// to_flat order. Round-trips bit-exactly.
void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_checkpoint(const std::filesystem::path& path);

} // namespace laser
