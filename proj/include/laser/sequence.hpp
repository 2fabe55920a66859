// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "laser/matrix.hpp"

namespace laser {

// A length-T sequence of D-dimensional embedding vectors, one frame per row.
// Immutable after construction; every entry is finite, T >= 1, D >= 1.
// When `normalized` is set, every row has unit Euclidean norm (within 1e-6).
class EmbeddingSequence {
public:
    explicit EmbeddingSequence(Matrix frames, bool normalized = false);

    static EmbeddingSequence from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        return EmbeddingSequence(Matrix::from_rows(rows));
    }

    int t() const noexcept { return frames_.rows(); }
    int d() const noexcept { return frames_.cols(); }
    const Matrix& frames() const noexcept { return frames_; }
    const double* row(int i) const { return frames_.row(i); }
    bool normalized() const noexcept { return normalized_; }

private:
    Matrix frames_;
    bool normalized_;
};

enum class SeqFormat { Eseq, Csv };

// Scales every row to unit Euclidean norm. Rows with norm below 1e-12 are
// rejected (zero-row).
EmbeddingSequence l2_normalize_rows(const EmbeddingSequence& seq);

// File formats
//
// eseq (binary): magic "ESEQ", then u32 little-endian version (=1), T, D,
// followed by T*D IEEE-754 float32 little-endian values, row-major. Values
// already representable in float32 round-trip bit-exactly; in-memory data is
// always double.
//
// csv (text): one frame per line, comma-separated, shortest round-trip float
// formatting, "\n" line endings, no header.
EmbeddingSequence read_sequence(const std::filesystem::path& path, SeqFormat format);
void write_sequence(const EmbeddingSequence& seq, const std::filesystem::path& path,
                    SeqFormat format);

// Pairwise frame cost delta[i][j] = ||x_i - x'_j||^2 (squared Euclidean),
// the ground cost shared by the alignment and regularization terms.
Matrix cost_matrix(const EmbeddingSequence& x, const EmbeddingSequence& xp);

// Self-distance matrix d[i][j] = ||x_i - x_j||^2. Symmetric, zero diagonal
// by construction.
Matrix self_distance_matrix(const EmbeddingSequence& x);

} // namespace laser
