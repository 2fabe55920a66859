// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "laser/rng.hpp"
#include "laser/sequence.hpp"

namespace laser {

// Feature-level correspondence perturbations: duration is altered by linear
// time resampling, speaker-like nuisance by a global rotation of feature
// space plus small Gaussian noise. Content ordering survives both.
struct PerturbConfig {
    std::vector<double> speed_factors = {0.9, 1.0, 1.1};
    double transform_strength = 0.1; // rotation angle in radians
    double noise_std = 0.01;
    RngSeed seed;

    void validate() const;
};

// Linear interpolation along the time axis to length round(T / factor).
// Output frames are convex combinations of adjacent input frames; endpoints
// map to endpoints whenever the output has at least two frames (a length-1
// output takes the midpoint position).
EmbeddingSequence time_resample(const EmbeddingSequence& x, double factor);

// Rotates every frame by `strength` radians in one random 2-plane of feature
// space (sign-preserving scaling by 1 + strength when D = 1), then adds
// i.i.d. Gaussian noise of standard deviation `noise_std`. The rotation
// preserves norms and pairwise inner products; everything is a pure function
// of (input, seed).
EmbeddingSequence feature_transform(const EmbeddingSequence& x, double strength,
                                    double noise_std, RngSeed seed);

// Speed perturbation followed by the feature transform, the speed factor
// drawn uniformly from cfg.speed_factors (considered as a set: duplicates
// and ordering do not affect the draw).
std::pair<EmbeddingSequence, EmbeddingSequence> make_pair(const EmbeddingSequence& x,
                                                          const PerturbConfig& cfg);

// Synthetic corpus: each item is a random walk over class prototype vectors,
// piecewise-constant segments with Gaussian jitter, so sequences carry
// temporal structure for alignment to exploit.
struct SyntheticCorpusSpec {
    int n_items = 200;
    std::pair<int, int> len_range = {20, 60}; // inclusive
    int dim = 16;
    int n_content_classes = 6;
    RngSeed seed;
    double jitter_std = 0.05;
    std::pair<int, int> segment_len_range = {3, 8}; // inclusive

    void validate() const;
};

struct ManifestEntry {
    std::string id;
    std::string path; // relative to the manifest file
    int t = 0;
    std::vector<int> classes; // one per frame
};

struct CorpusManifest {
    std::filesystem::path manifest_path;
    std::vector<ManifestEntry> entries;
};

// Writes n_items eseq files plus a JSON-lines manifest (fields id, path, t,
// classes) into out_dir. Deterministic given the seed: prototypes derive
// from stream 0 of the corpus seed and item i from stream i + 1.
CorpusManifest generate_corpus(const SyntheticCorpusSpec& spec,
                               const std::filesystem::path& out_dir);

CorpusManifest read_manifest(const std::filesystem::path& manifest_path);

EmbeddingSequence load_manifest_item(const CorpusManifest& manifest, std::size_t index);
std::vector<EmbeddingSequence> load_corpus(const CorpusManifest& manifest);

// Unit-norm Gaussian prototype directions, one row per class. Shared by the
// corpus generator and the query-by-example task builder so both live in the
// same latent space for a given seed.
Matrix make_prototypes(int n_classes, int dim, Rng rng);

// Piecewise-constant class walk of length t.
std::vector<int> random_class_walk(int t, int n_classes, std::pair<int, int> segment_len_range,
                                   Rng& rng);

// Frames for a class walk: prototype rows plus Gaussian jitter.
EmbeddingSequence realize_classes(const std::vector<int>& classes, const Matrix& prototypes,
                                  double jitter_std, Rng& rng);

} // namespace laser
