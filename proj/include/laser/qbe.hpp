// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "laser/encoder.hpp"
#include "laser/perturb.hpp"
#include "laser/sequence.hpp"

namespace laser {

struct QbeItem {
    std::string id;
    EmbeddingSequence seq;
};

struct QbeTask {
    std::vector<QbeItem> queries;
    std::vector<QbeItem> docs;
    std::set<std::pair<std::string, std::string>> relevance; // (query_id, doc_id)

    void validate() const; // unique ids, relevance references existing ids
};

using QbeScores = std::map<std::pair<std::string, std::string>, double>;

// Negative DTW distance normalized by alignment path length; 0 means a
// zero-cost alignment exists, more negative means a worse match.
double qbe_score(const EmbeddingSequence& query, const EmbeddingSequence& doc);

QbeScores score_all(const QbeTask& task, int threads = 1);

// Simplified term-weighted value. For a detection threshold theta (a pair is
// detected when its score >= theta),
//   TWV(theta) = 1 - mean_q [ P_miss(q, theta) + beta * P_fa(q, theta) ]
// averaged over queries with at least one positive. The sweep covers every
// observed score plus +inf (detect nothing); ties resolve to the lowest
// threshold.
struct MtwvResult {
    double mtwv = 0.0;
    double threshold = 0.0;
};

MtwvResult mtwv(const QbeTask& task, const QbeScores& scores, double beta = 1.0);

struct QbeReport {
    QbeScores scores;
    double mtwv = 0.0;
    double best_threshold = 0.0;
    double top1 = 0.0; // fraction of queries whose best-scoring doc is a positive

    std::string to_json() const;
};

// Score every query-document pair (optionally through an encoder first) and
// assemble the report.
QbeReport qbe_eval(const QbeTask& task, double beta = 1.0, int threads = 1);
QbeReport qbe_eval(const EncoderParams& encoder, const QbeTask& task, double beta = 1.0,
                   int threads = 1);

// Planted-term synthetic task: each term is a short class walk over the same
// prototype space as the synthetic corpus generator; the query is one
// realization and its positive document a speed/feature-perturbed
// realization of the same walk. All other documents are negatives.
struct PlantedTaskSpec {
    int n_terms = 50;
    std::pair<int, int> len_range = {12, 24}; // query length, inclusive
    int dim = 16;
    int n_content_classes = 6;
    RngSeed seed;
    double jitter_std = 0.05;
    std::pair<int, int> segment_len_range = {3, 8};
    // Positive documents carry a much stronger nuisance than the training
    // perturbation, so retrieval genuinely depends on content-preserving
    // encodings rather than residual numeric traces.
    PerturbConfig perturb = task_perturb_default();

    static PerturbConfig task_perturb_default() {
        PerturbConfig p;
        p.transform_strength = 0.4;
        p.noise_std = 0.15;
        return p;
    }

    void validate() const;
};

QbeTask make_planted_task(const PlantedTaskSpec& spec);

// Task definition file: JSON object with fields `queries` and `docs` (paths
// to JSON-lines manifests, relative to the task file) and `positives`, an
// array of [query_id, doc_id] pairs.
void write_task(const QbeTask& task, const std::filesystem::path& dir,
                const std::string& task_filename = "task.json");
QbeTask load_task(const std::filesystem::path& task_file);

} // namespace laser
