// SPDX-License-Identifier: Apache-2.0
#include "laser/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "laser/error.hpp"

namespace laser {

void PerturbConfig::validate() const {
    if (speed_factors.empty()) {
        throw Error(ErrorKind::InvalidArgument, "speed_factors must be non-empty");
    }
    for (double f : speed_factors) {
        if (!(f > 0.0) || !std::isfinite(f)) {
            throw Error(ErrorKind::InvalidArgument,
                        "speed factors must be positive and finite, got " + std::to_string(f));
        }
    }
    if (!(transform_strength >= 0.0) || !std::isfinite(transform_strength)) {
        throw Error(ErrorKind::InvalidArgument, "transform_strength must be >= 0 and finite");
    }
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
        throw Error(ErrorKind::InvalidArgument, "noise_std must be >= 0 and finite");
    }
}

void SyntheticCorpusSpec::validate() const {
    if (n_items < 1) throw Error(ErrorKind::InvalidArgument, "n_items must be >= 1");
    if (len_range.first < 2 || len_range.second < len_range.first) {
        throw Error(ErrorKind::InvalidArgument, "len_range requires 2 <= T_min <= T_max");
    }
    if (dim < 1) throw Error(ErrorKind::InvalidArgument, "dim must be >= 1");
    if (n_content_classes < 1) {
        throw Error(ErrorKind::InvalidArgument, "n_content_classes must be >= 1");
    }
    if (!(jitter_std >= 0.0) || !std::isfinite(jitter_std)) {
        throw Error(ErrorKind::InvalidArgument, "jitter_std must be >= 0 and finite");
    }
    if (segment_len_range.first < 1 || segment_len_range.second < segment_len_range.first) {
        throw Error(ErrorKind::InvalidArgument, "segment_len_range requires 1 <= lo <= hi");
    }
}

EmbeddingSequence time_resample(const EmbeddingSequence& x, double factor) {
    if (x.t() < 2) {
        throw Error(ErrorKind::InvalidArgument, "time_resample requires T >= 2");
    }
    if (!(factor > 0.0) || !std::isfinite(factor)) {
        throw Error(ErrorKind::InvalidArgument, "factor must be positive and finite");
    }
    const int t = x.t(), d = x.d();
    const long long len = std::llround(static_cast<double>(t) / factor);
    if (len < 1) {
        throw Error(ErrorKind::DegenerateOutputLength,
                    "resampling T=" + std::to_string(t) + " by factor " + std::to_string(factor) +
                        " yields an empty sequence");
    }
    const int out_t = static_cast<int>(len);
    Matrix out(out_t, d);
    for (int k = 0; k < out_t; ++k) {
        const double pos = out_t == 1
                               ? 0.5 * static_cast<double>(t - 1)
                               : static_cast<double>(k) * static_cast<double>(t - 1) /
                                     static_cast<double>(out_t - 1);
        int i0 = static_cast<int>(pos);
        double w = pos - i0;
        if (i0 >= t - 1) {
            i0 = t - 2;
            w = 1.0;
        }
        const double* a = x.row(i0);
        const double* b = x.row(i0 + 1);
        for (int j = 0; j < d; ++j) out(k, j) = (1.0 - w) * a[j] + w * b[j];
    }
    return EmbeddingSequence(std::move(out));
}

EmbeddingSequence feature_transform(const EmbeddingSequence& x, double strength,
                                    double noise_std, RngSeed seed) {
    if (!(strength >= 0.0) || !std::isfinite(strength)) {
        throw Error(ErrorKind::InvalidArgument, "strength must be >= 0 and finite");
    }
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
        throw Error(ErrorKind::InvalidArgument, "noise_std must be >= 0 and finite");
    }
    Rng rng(seed);
    const int t = x.t(), d = x.d();
    Matrix out = x.frames();

    if (strength != 0.0 && d >= 2) {
        // Orthonormal basis (u, v) of a random 2-plane, Gram-Schmidt on
        // Gaussian draws; the redraw loop is deterministic given the stream.
        std::vector<double> u(static_cast<std::size_t>(d)), v(static_cast<std::size_t>(d));
        auto draw_unit = [&](std::vector<double>& vec, const std::vector<double>* against) {
            while (true) {
                for (double& e : vec) e = rng.next_gaussian();
                if (against) {
                    double dot = 0.0;
                    for (int j = 0; j < d; ++j) dot += vec[static_cast<std::size_t>(j)] * (*against)[static_cast<std::size_t>(j)];
                    for (int j = 0; j < d; ++j) vec[static_cast<std::size_t>(j)] -= dot * (*against)[static_cast<std::size_t>(j)];
                }
                double norm = 0.0;
                for (double e : vec) norm += e * e;
                norm = std::sqrt(norm);
                if (norm > 1e-9) {
                    for (double& e : vec) e /= norm;
                    return;
                }
            }
        };
        draw_unit(u, nullptr);
        draw_unit(v, &u);
        const double c = std::cos(strength), s = std::sin(strength);
        for (int i = 0; i < t; ++i) {
            double a = 0.0, b = 0.0;
            for (int j = 0; j < d; ++j) {
                a += out(i, j) * u[static_cast<std::size_t>(j)];
                b += out(i, j) * v[static_cast<std::size_t>(j)];
            }
            // frame' = frame + (cos-1)(a u + b v) + sin (a v - b u)
            for (int j = 0; j < d; ++j) {
                out(i, j) += (c - 1.0) * (a * u[static_cast<std::size_t>(j)] + b * v[static_cast<std::size_t>(j)]) +
                             s * (a * v[static_cast<std::size_t>(j)] - b * u[static_cast<std::size_t>(j)]);
            }
        }
    } else if (strength != 0.0 && d == 1) {
        for (int i = 0; i < t; ++i) out(i, 0) *= 1.0 + strength;
    }

    if (noise_std > 0.0) {
        for (int i = 0; i < t; ++i) {
            for (int j = 0; j < d; ++j) out(i, j) += noise_std * rng.next_gaussian();
        }
    }
    return EmbeddingSequence(std::move(out));
}

std::pair<EmbeddingSequence, EmbeddingSequence> make_pair(const EmbeddingSequence& x,
                                                          const PerturbConfig& cfg) {
    cfg.validate();
    std::vector<double> factors = cfg.speed_factors;
    std::sort(factors.begin(), factors.end());
    factors.erase(std::unique(factors.begin(), factors.end()), factors.end());
    Rng rng(cfg.seed);
    const double f = factors[rng.uniform_index(factors.size())];
    EmbeddingSequence resampled = time_resample(x, f);
    EmbeddingSequence perturbed =
        feature_transform(resampled, cfg.transform_strength, cfg.noise_std, RngSeed{rng.next_u64()});
    return {x, std::move(perturbed)};
}

Matrix make_prototypes(int n_classes, int dim, Rng rng) {
    Matrix protos(n_classes, dim);
    for (int c = 0; c < n_classes; ++c) {
        double norm = 0.0;
        do {
            norm = 0.0;
            for (int j = 0; j < dim; ++j) {
                protos(c, j) = rng.next_gaussian();
                norm += protos(c, j) * protos(c, j);
            }
            norm = std::sqrt(norm);
        } while (norm < 1e-9);
        for (int j = 0; j < dim; ++j) protos(c, j) /= norm;
    }
    return protos;
}

std::vector<int> random_class_walk(int t, int n_classes, std::pair<int, int> segment_len_range,
                                   Rng& rng) {
    std::vector<int> classes;
    classes.reserve(static_cast<std::size_t>(t));
    const int span = segment_len_range.second - segment_len_range.first + 1;
    int cur = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_classes)));
    while (static_cast<int>(classes.size()) < t) {
        const int seg = segment_len_range.first +
                        static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(span)));
        for (int k = 0; k < seg && static_cast<int>(classes.size()) < t; ++k) classes.push_back(cur);
        if (n_classes > 1) {
            const int step = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_classes - 1)));
            cur = step >= cur ? step + 1 : step;
        }
    }
    return classes;
}

EmbeddingSequence realize_classes(const std::vector<int>& classes, const Matrix& prototypes,
                                  double jitter_std, Rng& rng) {
    const int t = static_cast<int>(classes.size());
    const int d = prototypes.cols();
    Matrix frames(t, d);
    for (int i = 0; i < t; ++i) {
        const double* proto = prototypes.row(classes[static_cast<std::size_t>(i)]);
        for (int j = 0; j < d; ++j) {
            frames(i, j) = proto[j] + (jitter_std > 0.0 ? jitter_std * rng.next_gaussian() : 0.0);
        }
    }
    return EmbeddingSequence(std::move(frames));
}

CorpusManifest generate_corpus(const SyntheticCorpusSpec& spec,
                               const std::filesystem::path& out_dir) {
    spec.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw Error(ErrorKind::IoFailure,
                    "cannot create " + out_dir.string() + ": " + ec.message());
    }
    const Rng root{spec.seed};
    const Matrix protos = make_prototypes(spec.n_content_classes, spec.dim, root.split(0));

    CorpusManifest manifest;
    manifest.manifest_path = out_dir / "manifest.jsonl";
    std::ofstream mf(manifest.manifest_path, std::ios::binary | std::ios::trunc);
    if (!mf) {
        throw Error(ErrorKind::IoFailure, "cannot open " + manifest.manifest_path.string());
    }
    const int t_span = spec.len_range.second - spec.len_range.first + 1;
    for (int i = 0; i < spec.n_items; ++i) {
        Rng item_rng = root.split(static_cast<std::uint64_t>(i) + 1);
        const int t = spec.len_range.first +
                      static_cast<int>(item_rng.uniform_index(static_cast<std::uint64_t>(t_span)));
        ManifestEntry entry;
        entry.classes = random_class_walk(t, spec.n_content_classes, spec.segment_len_range,
                                          item_rng);
        entry.t = t;
        char name[32];
        std::snprintf(name, sizeof(name), "item-%05d.eseq", i);
        entry.id = std::string(name, 10); // "item-NNNNN"
        entry.path = name;
        EmbeddingSequence seq = realize_classes(entry.classes, protos, spec.jitter_std, item_rng);
        write_sequence(seq, out_dir / entry.path, SeqFormat::Eseq);

        nlohmann::ordered_json line;
        line["id"] = entry.id;
        line["path"] = entry.path;
        line["t"] = entry.t;
        line["classes"] = entry.classes;
        mf << line.dump() << "\n";
        manifest.entries.push_back(std::move(entry));
    }
    mf.flush();
    if (!mf) {
        throw Error(ErrorKind::IoFailure, "write failed on " + manifest.manifest_path.string());
    }
    return manifest;
}

CorpusManifest read_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoFailure, "cannot open " + manifest_path.string());
    }
    CorpusManifest manifest;
    manifest.manifest_path = manifest_path;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::MalformedHeader,
                        manifest_path.string() + ": line " + std::to_string(line_no) + ": " +
                            e.what());
        }
        ManifestEntry entry;
        try {
            entry.id = j.at("id").get<std::string>();
            entry.path = j.at("path").get<std::string>();
            entry.t = j.at("t").get<int>();
            entry.classes = j.at("classes").get<std::vector<int>>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::MalformedHeader,
                        manifest_path.string() + ": line " + std::to_string(line_no) + ": " +
                            e.what());
        }
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

EmbeddingSequence load_manifest_item(const CorpusManifest& manifest, std::size_t index) {
    const std::filesystem::path base = manifest.manifest_path.parent_path();
    return read_sequence(base / manifest.entries.at(index).path, SeqFormat::Eseq);
}

std::vector<EmbeddingSequence> load_corpus(const CorpusManifest& manifest) {
    std::vector<EmbeddingSequence> out;
    out.reserve(manifest.entries.size());
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        out.push_back(load_manifest_item(manifest, i));
    }
    return out;
}

} // namespace laser
