// SPDX-License-Identifier: Apache-2.0
#include "laser/trainer.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include <json.hpp>

#include "laser/error.hpp"
#include "laser/loss.hpp"
#include "laser/optim.hpp"
#include "laser/parallel.hpp"

namespace laser {

void TrainConfig::validate() const {
    if (total_updates < 1) {
        throw Error(ErrorKind::InvalidArgument, "total_updates must be >= 1");
    }
    if (warmup_updates > total_updates) {
        throw Error(ErrorKind::InvalidArgument, "warmup_updates must be <= total_updates");
    }
    if (batch_size < 1) {
        throw Error(ErrorKind::InvalidArgument, "batch_size must be >= 1");
    }
    if (!(peak_lr >= 0.0) || !std::isfinite(peak_lr)) {
        throw Error(ErrorKind::InvalidArgument, "peak_lr must be >= 0 and finite");
    }
    if (d_in < 1 || hidden < 1 || d_proj < 1) {
        throw Error(ErrorKind::InvalidArgument, "encoder dims must be >= 1");
    }
    if (threads < 1) {
        throw Error(ErrorKind::InvalidArgument, "threads must be >= 1");
    }
    sdtw.validate();
    cidm.validate();
}

std::string train_record_to_jsonl(const TrainRecord& record) {
    nlohmann::ordered_json j;
    j["update"] = record.update;
    j["align_term"] = record.align_term;
    j["reg_x"] = record.reg_x;
    j["reg_xp"] = record.reg_xp;
    j["total"] = record.total;
    j["collapse_index"] = record.collapse_index;
    j["grad_norm"] = record.grad_norm;
    j["lr"] = record.lr;
    return j.dump();
}

double lr_schedule(std::uint64_t update, const TrainConfig& cfg) {
    if (update < 1) {
        throw Error(ErrorKind::InvalidArgument, "updates are 1-based");
    }
    if (cfg.warmup_updates == 0 || update >= cfg.warmup_updates) return cfg.peak_lr;
    return cfg.peak_lr * static_cast<double>(update) / static_cast<double>(cfg.warmup_updates);
}

double collapse_index(const std::vector<EmbeddingSequence>& xs) {
    if (xs.empty()) {
        throw Error(ErrorKind::EmptyBatch, "collapse_index requires at least one sequence");
    }
    double total = 0.0;
    for (const EmbeddingSequence& x : xs) {
        const int t = x.t();
        if (t < 2) {
            throw Error(ErrorKind::TooShortSequence,
                        "collapse_index requires T >= 2, got T=" + std::to_string(t));
        }
        const Matrix dist = self_distance_matrix(x);
        double sum = 0.0;
        for (int i = 0; i < t; ++i) {
            for (int j = 0; j < t; ++j) {
                if (i != j) sum += dist(i, j);
            }
        }
        total += sum / (static_cast<double>(t) * static_cast<double>(t - 1));
    }
    return total / static_cast<double>(xs.size());
}

namespace {

struct PairWork {
    LossBreakdown loss;
    std::vector<double> param_grad;
    std::optional<EmbeddingSequence> encoded_x;
};

} // namespace

TrainResult train(const std::vector<EmbeddingSequence>& corpus, const TrainConfig& cfg,
                  const PerturbConfig& pert,
                  const std::function<void(const TrainRecord&)>& on_record) {
    cfg.validate();
    pert.validate();
    if (corpus.empty()) {
        throw Error(ErrorKind::EmptyBatch, "training corpus is empty");
    }

    CidmConfig cidm_cfg = cfg.cidm;
    if (cfg.ablation == Ablation::WithoutReg) cidm_cfg.alpha = 0.0;

    const Rng root{cfg.seed};
    EncoderParams params = init_encoder(cfg.d_in, cfg.hidden, cfg.d_proj,
                                        root.split_seed(0));
    std::vector<double> flat = params.to_flat();
    AdamW opt(flat.size());
    const Rng pert_root{pert.seed};

    TrainResult result;
    result.records.reserve(cfg.total_updates);

    auto emit = [&](const TrainRecord& rec) {
        if (on_record) on_record(rec);
        result.records.push_back(rec);
    };

    // Numeric blowups during an update surface as an abort: a diagnostic
    // record goes out first, then a non-finite-loss error.
    auto abort_update = [&](std::uint64_t update, double lr, const std::string& why) {
        TrainRecord diag;
        diag.update = update;
        diag.lr = lr;
        diag.align_term = diag.reg_x = diag.reg_xp = diag.total =
            std::numeric_limits<double>::quiet_NaN();
        diag.collapse_index = diag.grad_norm = std::numeric_limits<double>::quiet_NaN();
        emit(diag);
        throw Error(ErrorKind::NonFiniteLoss,
                    "aborted at update " + std::to_string(update) + ": " + why);
    };

    for (std::uint64_t update = 1; update <= cfg.total_updates; ++update) {
        const double lr = lr_schedule(update, cfg);
        Rng batch_rng = root.split(update);
        std::vector<std::size_t> indices(static_cast<std::size_t>(cfg.batch_size));
        for (auto& idx : indices) idx = batch_rng.uniform_index(corpus.size());

        const Rng update_pert = pert_root.split(update);
        std::vector<PairWork> work(indices.size());
        try {
            parallel_for(static_cast<int>(indices.size()), cfg.threads, [&](int k) {
                PerturbConfig item_pert = pert;
                item_pert.seed = update_pert.split_seed(static_cast<std::uint64_t>(k));
                const EmbeddingSequence& item = corpus[indices[static_cast<std::size_t>(k)]];
                auto [orig, perturbed] = make_pair(item, item_pert);

                EncoderCache cache_x, cache_xp;
                EmbeddingSequence enc_x = encoder_forward(params, orig, &cache_x);
                EmbeddingSequence enc_xp = encoder_forward(params, perturbed, &cache_xp);
                LossBreakdown lb = laser_loss(enc_x, enc_xp, cfg.sdtw, cidm_cfg);

                std::vector<double> grad = encoder_backward(params, orig, cache_x, lb.grad_x);
                const std::vector<double> grad_xp =
                    encoder_backward(params, perturbed, cache_xp, lb.grad_xp);
                for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += grad_xp[i];

                PairWork& slot = work[static_cast<std::size_t>(k)];
                slot.loss = std::move(lb);
                slot.param_grad = std::move(grad);
                slot.encoded_x = std::move(enc_x);
            });
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::NonFiniteValue || e.kind() == ErrorKind::ZeroRow ||
                e.kind() == ErrorKind::NonFiniteGrad) {
                abort_update(update, lr, e.what());
            }
            throw;
        }

        // Reduction in batch order keeps the run bit-reproducible.
        TrainRecord rec;
        rec.update = update;
        rec.lr = lr;
        std::vector<double> mean_grad(flat.size(), 0.0);
        std::vector<EmbeddingSequence> encoded_batch;
        encoded_batch.reserve(work.size());
        const double inv = 1.0 / static_cast<double>(work.size());
        for (const PairWork& w : work) {
            rec.align_term += inv * w.loss.align_term;
            rec.reg_x += inv * w.loss.reg_x;
            rec.reg_xp += inv * w.loss.reg_xp;
            rec.total += inv * w.loss.total;
            for (std::size_t i = 0; i < mean_grad.size(); ++i) {
                mean_grad[i] += inv * w.param_grad[i];
            }
            encoded_batch.push_back(*w.encoded_x);
        }
        rec.collapse_index = collapse_index(encoded_batch);
        double norm_sq = 0.0;
        for (double g : mean_grad) norm_sq += g * g;
        rec.grad_norm = std::sqrt(norm_sq);

        if (!std::isfinite(rec.total) || !std::isfinite(rec.grad_norm)) {
            emit(rec);
            throw Error(ErrorKind::NonFiniteLoss,
                        "non-finite loss or gradient at update " + std::to_string(update));
        }

        opt.step(flat, mean_grad, lr);
        params.from_flat(flat);
        emit(rec);
    }

    result.params = std::move(params);
    std::vector<EmbeddingSequence> encoded_corpus;
    encoded_corpus.reserve(corpus.size());
    for (const EmbeddingSequence& item : corpus) {
        encoded_corpus.push_back(encoder_forward(result.params, item));
    }
    result.final_collapse_index = collapse_index(encoded_corpus);
    return result;
}

} // namespace laser
