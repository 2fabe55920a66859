// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "laser/cidm.hpp"
#include "laser/encoder.hpp"
#include "laser/perturb.hpp"
#include "laser/rng.hpp"
#include "laser/softdtw.hpp"

namespace laser {

enum class Ablation { WithReg, WithoutReg };

struct TrainConfig {
    std::uint64_t total_updates = 3600;
    std::uint64_t warmup_updates = 1000;
    int batch_size = 8;
    double peak_lr = 1e-3; // desk-scale default; full-scale presets use 2e-5
    RngSeed seed;
    Ablation ablation = Ablation::WithReg; // WithoutReg drops the regularizer (alpha = 0)
    int d_in = 16;
    int hidden = 32;
    int d_proj = 8;
    int threads = 1; // per-pair forward/backward parallelism inside a batch

    SoftDtwConfig sdtw;
    CidmConfig cidm;

    void validate() const;
};

struct TrainRecord {
    std::uint64_t update = 0;
    double align_term = 0.0;
    double reg_x = 0.0;
    double reg_xp = 0.0;
    double total = 0.0;
    double collapse_index = 0.0; // over the batch's encoded original sequences
    double grad_norm = 0.0;
    double lr = 0.0;
};

// One JSON object per record; the metrics file is one line per update.
std::string train_record_to_jsonl(const TrainRecord& record);

// Linear warmup from 0 to peak over warmup_updates, constant afterwards.
// Updates are 1-based; lr(warmup_updates) = peak.
double lr_schedule(std::uint64_t update, const TrainConfig& cfg);

// Mean over sequences of the mean pairwise squared frame distance (i != j).
// Zero exactly when every sequence has all frames identical; collapsed
// representations drive it toward zero.
double collapse_index(const std::vector<EmbeddingSequence>& xs);

struct TrainResult {
    EncoderParams params;
    std::vector<TrainRecord> records;
    double final_collapse_index = 0.0; // over the whole encoded corpus
};

// Correspondence training loop: per update, sample a batch, perturb each
// item into a pair, encode both sides, take the combined alignment +
// regularization loss, and apply one AdamW step on the mean gradient.
// Deterministic given (corpus, cfg.seed, pert.seed), regardless of threads.
// A non-finite loss aborts: a diagnostic record is emitted first, then a
// non-finite-loss error is thrown.
TrainResult train(const std::vector<EmbeddingSequence>& corpus, const TrainConfig& cfg,
                  const PerturbConfig& pert,
                  const std::function<void(const TrainRecord&)>& on_record = nullptr);

} // namespace laser
