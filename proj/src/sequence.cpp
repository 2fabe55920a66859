// SPDX-License-Identifier: Apache-2.0
#include "laser/sequence.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <system_error>

#include "laser/error.hpp"

namespace laser {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MalformedHeader: return "malformed-header";
        case ErrorKind::NonFiniteValue: return "non-finite-value";
        case ErrorKind::DimensionMismatch: return "dimension-mismatch";
        case ErrorKind::ZeroRow: return "zero-row";
        case ErrorKind::IoFailure: return "io-failure";
        case ErrorKind::AllInfinite: return "all-infinite";
        case ErrorKind::TableMismatch: return "table-mismatch";
        case ErrorKind::SigmaNotOne: return "sigma-not-one";
        case ErrorKind::SizeExceeded: return "size-exceeded";
        case ErrorKind::DegenerateOutputLength: return "degenerate-output-length";
        case ErrorKind::EmptyBatch: return "empty-batch";
        case ErrorKind::ShapeMismatch: return "shape-mismatch";
        case ErrorKind::NonFiniteGrad: return "non-finite-grad";
        case ErrorKind::TooShortSequence: return "too-short-sequence";
        case ErrorKind::NoPositives: return "no-positives";
        case ErrorKind::NonFiniteLoss: return "non-finite-loss";
        case ErrorKind::InvalidArgument: return "invalid-argument";
    }
    return "unknown-error";
}

EmbeddingSequence::EmbeddingSequence(Matrix frames, bool normalized)
    : frames_(std::move(frames)), normalized_(normalized) {
    if (frames_.rows() < 1 || frames_.cols() < 1) {
        throw Error(ErrorKind::DimensionMismatch,
                    "sequence requires T >= 1 and D >= 1, got " +
                        std::to_string(frames_.rows()) + "x" + std::to_string(frames_.cols()));
    }
    for (int i = 0; i < frames_.rows(); ++i) {
        for (int j = 0; j < frames_.cols(); ++j) {
            if (!std::isfinite(frames_(i, j))) {
                throw Error(ErrorKind::NonFiniteValue,
                            "frame " + std::to_string(i) + " dim " + std::to_string(j) +
                                " is not finite");
            }
        }
    }
    if (normalized_) {
        for (int i = 0; i < frames_.rows(); ++i) {
            double s = 0.0;
            for (int j = 0; j < frames_.cols(); ++j) s += frames_(i, j) * frames_(i, j);
            if (std::abs(std::sqrt(s) - 1.0) > 1e-6) {
                throw Error(ErrorKind::InvalidArgument,
                            "row " + std::to_string(i) + " tagged normalized but has norm " +
                                std::to_string(std::sqrt(s)));
            }
        }
    }
}

EmbeddingSequence l2_normalize_rows(const EmbeddingSequence& seq) {
    Matrix out(seq.t(), seq.d());
    for (int i = 0; i < seq.t(); ++i) {
        double s = 0.0;
        for (int j = 0; j < seq.d(); ++j) s += seq.row(i)[j] * seq.row(i)[j];
        const double norm = std::sqrt(s);
        if (norm < 1e-12) {
            throw Error(ErrorKind::ZeroRow, "row " + std::to_string(i) + " has norm " +
                                                std::to_string(norm) + " (< 1e-12)");
        }
        for (int j = 0; j < seq.d(); ++j) out(i, j) = seq.row(i)[j] / norm;
    }
    return EmbeddingSequence(std::move(out), true);
}

namespace {

constexpr char kEseqMagic[4] = {'E', 'S', 'E', 'Q'};
constexpr std::uint32_t kEseqVersion = 1;

std::uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void append_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoFailure, "cannot open " + path.string() + " for reading");
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw Error(ErrorKind::IoFailure, "read failed on " + path.string());
    }
    return bytes;
}

EmbeddingSequence read_eseq(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 16) {
        throw Error(ErrorKind::MalformedHeader,
                    path.string() + ": file too short for eseq header (" +
                        std::to_string(bytes.size()) + " bytes, need 16)");
    }
    if (std::memcmp(bytes.data(), kEseqMagic, 4) != 0) {
        throw Error(ErrorKind::MalformedHeader, path.string() + ": bad magic at byte offset 0");
    }
    const std::uint32_t version = read_u32_le(p + 4);
    if (version != kEseqVersion) {
        throw Error(ErrorKind::MalformedHeader,
                    path.string() + ": unsupported version " + std::to_string(version) +
                        " at byte offset 4");
    }
    const std::uint32_t t = read_u32_le(p + 8);
    const std::uint32_t d = read_u32_le(p + 12);
    if (t < 1 || d < 1) {
        throw Error(ErrorKind::MalformedHeader,
                    path.string() + ": T and D must be >= 1 (byte offsets 8, 12)");
    }
    const std::size_t expected = 16 + 4ull * t * d;
    if (bytes.size() != expected) {
        throw Error(ErrorKind::MalformedHeader,
                    path.string() + ": payload size mismatch, expected " +
                        std::to_string(expected) + " bytes total, got " +
                        std::to_string(bytes.size()));
    }
    Matrix frames(static_cast<int>(t), static_cast<int>(d));
    std::size_t offset = 16;
    for (std::uint32_t i = 0; i < t; ++i) {
        for (std::uint32_t j = 0; j < d; ++j, offset += 4) {
            const float v = std::bit_cast<float>(read_u32_le(p + offset));
            if (!std::isfinite(v)) {
                throw Error(ErrorKind::NonFiniteValue,
                            path.string() + ": non-finite value at byte offset " +
                                std::to_string(offset) + " (frame " + std::to_string(i) +
                                ", dim " + std::to_string(j) + ")");
            }
            frames(static_cast<int>(i), static_cast<int>(j)) = static_cast<double>(v);
        }
    }
    return EmbeddingSequence(std::move(frames));
}

EmbeddingSequence read_csv(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    std::vector<std::vector<double>> rows;
    std::size_t line_start = 0;
    int line_no = 1;
    while (line_start < bytes.size()) {
        std::size_t line_end = bytes.find('\n', line_start);
        if (line_end == std::string::npos) line_end = bytes.size();
        if (line_end > line_start) { // skip empty trailing line
            std::vector<double> row;
            std::size_t field_start = line_start;
            while (field_start <= line_end) {
                std::size_t field_end = bytes.find(',', field_start);
                if (field_end == std::string::npos || field_end > line_end) field_end = line_end;
                double v = 0.0;
                const char* first = bytes.data() + field_start;
                const char* last = bytes.data() + field_end;
                auto [ptr, ec] = std::from_chars(first, last, v);
                if (ec != std::errc() || ptr != last) {
                    throw Error(ErrorKind::MalformedHeader,
                                path.string() + ": unparsable number at line " +
                                    std::to_string(line_no) + ", byte offset " +
                                    std::to_string(field_start));
                }
                if (!std::isfinite(v)) {
                    throw Error(ErrorKind::NonFiniteValue,
                                path.string() + ": non-finite value at line " +
                                    std::to_string(line_no) + ", byte offset " +
                                    std::to_string(field_start));
                }
                row.push_back(v);
                if (field_end == line_end) break;
                field_start = field_end + 1;
            }
            if (!rows.empty() && row.size() != rows.front().size()) {
                throw Error(ErrorKind::DimensionMismatch,
                            path.string() + ": line " + std::to_string(line_no) + " has " +
                                std::to_string(row.size()) + " fields, expected " +
                                std::to_string(rows.front().size()));
            }
            rows.push_back(std::move(row));
        }
        line_start = line_end + 1;
        ++line_no;
    }
    if (rows.empty()) {
        throw Error(ErrorKind::MalformedHeader, path.string() + ": empty csv file");
    }
    Matrix frames(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int i = 0; i < frames.rows(); ++i) {
        for (int j = 0; j < frames.cols(); ++j) frames(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return EmbeddingSequence(std::move(frames));
}

void append_shortest(std::string& out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
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

} // namespace

EmbeddingSequence read_sequence(const std::filesystem::path& path, SeqFormat format) {
    return format == SeqFormat::Eseq ? read_eseq(path) : read_csv(path);
}

void write_sequence(const EmbeddingSequence& seq, const std::filesystem::path& path,
                    SeqFormat format) {
    std::string bytes;
    if (format == SeqFormat::Eseq) {
        bytes.reserve(16 + 4ull * seq.frames().size());
        bytes.append(kEseqMagic, 4);
        append_u32_le(bytes, kEseqVersion);
        append_u32_le(bytes, static_cast<std::uint32_t>(seq.t()));
        append_u32_le(bytes, static_cast<std::uint32_t>(seq.d()));
        for (int i = 0; i < seq.t(); ++i) {
            for (int j = 0; j < seq.d(); ++j) {
                append_u32_le(bytes, std::bit_cast<std::uint32_t>(
                                         static_cast<float>(seq.frames()(i, j))));
            }
        }
    } else {
        for (int i = 0; i < seq.t(); ++i) {
            for (int j = 0; j < seq.d(); ++j) {
                if (j > 0) bytes.push_back(',');
                append_shortest(bytes, seq.frames()(i, j));
            }
            bytes.push_back('\n');
        }
    }
    write_file_bytes(path, bytes);
}

Matrix cost_matrix(const EmbeddingSequence& x, const EmbeddingSequence& xp) {
    if (x.d() != xp.d()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "cost_matrix: sequences have D=" + std::to_string(x.d()) + " and D=" +
                        std::to_string(xp.d()));
    }
    const int m = x.t(), n = xp.t(), d = x.d();
    Matrix delta(m, n);
    for (int i = 0; i < m; ++i) {
        const double* xi = x.row(i);
        for (int j = 0; j < n; ++j) {
            const double* yj = xp.row(j);
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
                const double diff = xi[k] - yj[k];
                s += diff * diff;
            }
            delta(i, j) = s;
        }
    }
    return delta;
}

Matrix self_distance_matrix(const EmbeddingSequence& x) {
    const int m = x.t(), d = x.d();
    Matrix dist(m, m, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* xi = x.row(i);
        for (int j = i + 1; j < m; ++j) {
            const double* xj = x.row(j);
            double s = 0.0;
            for (int k = 0; k < d; ++k) {
                const double diff = xi[k] - xj[k];
                s += diff * diff;
            }
            dist(i, j) = s;
            dist(j, i) = s;
        }
    }
    return dist;
}

} // namespace laser
