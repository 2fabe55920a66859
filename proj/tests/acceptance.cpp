// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Each criterion prints one [PASS]/[FAIL] line with its
// headline numbers and elapsed time; the process exits nonzero if any fail.
//
//   1. forward DP vs brute-force path-enumeration oracle
//   2. analytic gradients vs central finite differences (five gradient paths)
//   3. limit and identity properties (divergence zero, softmin bounds,
//      gamma -> 0 against the Delannoy bound)
//   4. general-window regularizer vs its window-1 specialization
//   5. collapse ablation: regularized vs alignment-only training arms
//   6. byte-identical metrics on rerun with identical seeds
//   7. training loss decreases in the regularized arm
//   8. bit-exact file round-trips (eseq and checkpoints)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "laser/cidm.hpp"
#include "laser/encoder.hpp"
#include "laser/loss.hpp"
#include "laser/perturb.hpp"
#include "laser/qbe.hpp"
#include "laser/softdtw.hpp"
#include "laser/trainer.hpp"
#include "support/test_util.hpp"

using namespace laser;
using laser::testing::max_grad_rel_err;
using laser::testing::random_sequence;
using laser::testing::random_sequence_off_hinge;
using laser::testing::rel_err;
namespace fs = std::filesystem;

namespace {

constexpr int kThreads = 2;

struct Outcome {
    bool pass = true;
    std::string detail;
    double seconds = 0.0;
};

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

bool report(int index, const std::string& name, const Outcome& outcome) {
    std::printf("[%s] C%d %s (%s, %.1fs)\n", outcome.pass ? "PASS" : "FAIL", index, name.c_str(),
                outcome.detail.c_str(), outcome.seconds);
    std::fflush(stdout);
    return outcome.pass;
}

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

// ---- criterion 1: oracle equivalence --------------------------------------

Outcome criterion_oracle() {
    Timer timer;
    Outcome out;
    Rng rng(RngSeed{20260809});
    const double gammas[3] = {0.05, 0.1, 1.0};
    double worst = 0.0;
    for (int iter = 0; iter < 50; ++iter) {
        const int m = 1 + static_cast<int>(rng.uniform_index(6));
        const int n = 1 + static_cast<int>(rng.uniform_index(6));
        const int d = 1 + static_cast<int>(rng.uniform_index(4));
        SoftDtwConfig cfg;
        cfg.gamma = gammas[iter % 3];
        const EmbeddingSequence x = random_sequence(m, d, rng);
        const EmbeddingSequence xp = random_sequence(n, d, rng);
        const double dp = sdtw_forward(x, xp, cfg).value;
        const double oracle = sdtw_oracle(x, xp, cfg.gamma);
        worst = std::max(worst, std::abs(dp - oracle) / std::max(1.0, std::abs(oracle)));
    }
    out.seconds = timer.seconds();
    out.pass = worst <= 1e-9 && out.seconds < 10.0;
    out.detail = "max rel err " + fmt("%.2e", worst) + " over 50 instances";
    return out;
}

// ---- criterion 2: gradient correctness ------------------------------------

Outcome criterion_gradients() {
    Timer timer;
    Outcome out;
    const double h = 1e-4;
    Rng rng(RngSeed{424242});
    double worst_core = 0.0; // paths (a)-(d), tolerance 1e-4
    double worst_enc = 0.0;  // path (e), tolerance 1e-3

    // (a) raw soft-DTW
    {
        SoftDtwConfig cfg;
        for (int iter = 0; iter < 20; ++iter) {
            const EmbeddingSequence x =
                random_sequence(1 + static_cast<int>(rng.uniform_index(7)), 3, rng);
            const EmbeddingSequence xp =
                random_sequence(1 + static_cast<int>(rng.uniform_index(7)), 3, rng);
            const AlignmentResult res = sdtw_align(x, xp, cfg);
            worst_core = std::max(
                worst_core,
                max_grad_rel_err(
                    [&](const Matrix& f) {
                        return sdtw_forward(EmbeddingSequence(f), xp, cfg).value;
                    },
                    x.frames(), res.grad_x, h));
            worst_core = std::max(
                worst_core,
                max_grad_rel_err(
                    [&](const Matrix& f) {
                        return sdtw_forward(x, EmbeddingSequence(f), cfg).value;
                    },
                    xp.frames(), res.grad_xp, h));
        }
    }

    // (b) soft-DTW divergence
    {
        SoftDtwConfig cfg;
        for (int iter = 0; iter < 20; ++iter) {
            const EmbeddingSequence x =
                random_sequence(2 + static_cast<int>(rng.uniform_index(5)), 3, rng);
            const EmbeddingSequence xp =
                random_sequence(2 + static_cast<int>(rng.uniform_index(5)), 3, rng);
            const LossValueWithGrads div = sdtw_divergence(x, xp, cfg);
            worst_core = std::max(
                worst_core,
                max_grad_rel_err(
                    [&](const Matrix& f) {
                        return sdtw_divergence(EmbeddingSequence(f), xp, cfg).value;
                    },
                    x.frames(), div.grad_x, h));
        }
    }

    // (c) Contrastive-IDM at sigma = 1 and sigma = 3
    for (const int sigma : {1, 3}) {
        CidmConfig cfg;
        cfg.sigma = sigma;
        for (int iter = 0; iter < 20; ++iter) {
            const int m = 2 + static_cast<int>(rng.uniform_index(6));
            const EmbeddingSequence x = random_sequence_off_hinge(m, 3, cfg.lambda, 1e-3, rng);
            const CidmResult res = cidm_general(x, cfg);
            worst_core = std::max(
                worst_core,
                max_grad_rel_err(
                    [&](const Matrix& f) { return cidm_general(EmbeddingSequence(f), cfg).value; },
                    x.frames(), res.grad, h));
        }
    }

    // (d) full combined loss
    {
        SoftDtwConfig scfg;
        CidmConfig ccfg;
        for (int iter = 0; iter < 20; ++iter) {
            const EmbeddingSequence x = random_sequence_off_hinge(
                2 + static_cast<int>(rng.uniform_index(4)), 3, ccfg.lambda, 1e-3, rng);
            const EmbeddingSequence xp = random_sequence_off_hinge(
                2 + static_cast<int>(rng.uniform_index(4)), 3, ccfg.lambda, 1e-3, rng);
            const LossBreakdown lb = laser_loss(x, xp, scfg, ccfg);
            worst_core = std::max(
                worst_core,
                max_grad_rel_err(
                    [&](const Matrix& f) {
                        return laser_loss(EmbeddingSequence(f), xp, scfg, ccfg).total;
                    },
                    x.frames(), lb.grad_x, h));
            worst_core = std::max(
                worst_core,
                max_grad_rel_err(
                    [&](const Matrix& f) {
                        return laser_loss(x, EmbeddingSequence(f), scfg, ccfg).total;
                    },
                    xp.frames(), lb.grad_xp, h));
        }
    }

    // (e) combined loss through the encoder, w.r.t. all parameters
    {
        SoftDtwConfig scfg;
        CidmConfig ccfg;
        int done = 0;
        std::uint64_t attempt = 0;
        while (done < 20) {
            Rng inst = rng.split(1000 + attempt++);
            const EncoderParams params = init_encoder(4, 5, 3, RngSeed{inst.next_u64()});
            const EmbeddingSequence z =
                random_sequence(2 + static_cast<int>(inst.uniform_index(4)), 4, inst);
            const EmbeddingSequence zp =
                random_sequence(2 + static_cast<int>(inst.uniform_index(4)), 4, inst);

            EncoderCache cache_x, cache_xp;
            const EmbeddingSequence x = encoder_forward(params, z, &cache_x);
            const EmbeddingSequence xp = encoder_forward(params, zp, &cache_xp);

            // skip instances whose encoded self-distances sit near the hinge
            bool hinge_safe = true;
            for (const EmbeddingSequence* seq : {&x, &xp}) {
                const Matrix dist = self_distance_matrix(*seq);
                for (int i = 0; i < seq->t() && hinge_safe; ++i) {
                    for (int j = 0; j < seq->t() && hinge_safe; ++j) {
                        if (i != j && std::abs(dist(i, j) - ccfg.lambda) < 1e-3) {
                            hinge_safe = false;
                        }
                    }
                }
            }
            if (!hinge_safe) continue;
            ++done;

            const LossBreakdown lb = laser_loss(x, xp, scfg, ccfg);
            std::vector<double> grad = encoder_backward(params, z, cache_x, lb.grad_x);
            const std::vector<double> grad2 = encoder_backward(params, zp, cache_xp, lb.grad_xp);
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += grad2[i];

            std::vector<double> flat = params.to_flat();
            auto loss_at = [&]() {
                EncoderParams p = params;
                p.from_flat(flat);
                return laser_loss(encoder_forward(p, z), encoder_forward(p, zp), scfg, ccfg)
                    .total;
            };
            for (std::size_t i = 0; i < flat.size(); ++i) {
                const double fd = laser::testing::central_diff(loss_at, flat, i, h);
                worst_enc = std::max(worst_enc, rel_err(grad[i], fd));
            }
        }
    }

    out.seconds = timer.seconds();
    out.pass = worst_core <= 1e-4 && worst_enc <= 1e-3 && out.seconds < 60.0;
    out.detail = "max rel err " + fmt("%.2e", worst_core) + " core, " + fmt("%.2e", worst_enc) +
                 " through encoder";
    return out;
}

// ---- criterion 3: limit and identity properties ----------------------------

Outcome criterion_limits() {
    Timer timer;
    Outcome out;
    Rng rng(RngSeed{333});
    bool ok = true;
    std::string why;

    // divergence of X with itself
    double worst_div = 0.0;
    SoftDtwConfig cfg;
    for (int iter = 0; iter < 100; ++iter) {
        const EmbeddingSequence x =
            random_sequence(1 + static_cast<int>(rng.uniform_index(10)), 4, rng);
        worst_div = std::max(worst_div, std::abs(sdtw_divergence(x, x, cfg).value));
    }
    if (worst_div > 1e-9) {
        ok = false;
        why += " div(X,X) up to " + fmt("%.2e", worst_div);
    }

    // softmin bounds on 1e4 random triples
    double worst_bound = 0.0;
    for (int iter = 0; iter < 10000; ++iter) {
        const double a = 20.0 * rng.next_gaussian();
        const double b = 20.0 * rng.next_gaussian();
        const double c = 20.0 * rng.next_gaussian();
        const double gamma = 0.01 + rng.next_double();
        const double s = softmin3(a, b, c, gamma);
        const double mn = std::min({a, b, c});
        worst_bound = std::max(worst_bound, s - mn);
        worst_bound = std::max(worst_bound, (mn - gamma * std::log(3.0)) - s);
    }
    if (worst_bound > 1e-12) {
        ok = false;
        why += " softmin bound violated by " + fmt("%.2e", worst_bound);
    }

    // gamma -> 0 limit against the Delannoy bound
    SoftDtwConfig small_gamma;
    small_gamma.gamma = 1e-3;
    double worst_gap = 0.0;
    for (int iter = 0; iter < 50; ++iter) {
        const int m = 1 + static_cast<int>(rng.uniform_index(6));
        const int n = 1 + static_cast<int>(rng.uniform_index(6));
        const EmbeddingSequence x = random_sequence(m, 2, rng);
        const EmbeddingSequence xp = random_sequence(n, 2, rng);
        const double soft = sdtw_forward(x, xp, small_gamma).value;
        const double hard = hard_dtw(x, xp).value;
        const double bound = 1e-3 * std::log(static_cast<double>(delannoy_number(m, n)));
        const double gap = std::abs(soft - hard);
        worst_gap = std::max(worst_gap, gap - bound);
    }
    if (worst_gap > 1e-12) {
        ok = false;
        why += " gamma->0 gap exceeds Delannoy bound by " + fmt("%.2e", worst_gap);
    }

    out.seconds = timer.seconds();
    out.pass = ok && out.seconds < 10.0;
    out.detail = ok ? "div zero to " + fmt("%.2e", worst_div) + ", bounds tight" : why;
    return out;
}

// ---- criterion 4: Eq. 1 / Eq. 3 consistency --------------------------------

Outcome criterion_cidm_consistency() {
    Timer timer;
    Outcome out;
    Rng rng(RngSeed{444});
    CidmConfig cfg;
    double worst = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
        const EmbeddingSequence x =
            random_sequence(1 + static_cast<int>(rng.uniform_index(14)), 4, rng);
        const CidmResult a = cidm_general(x, cfg);
        const CidmResult b = cidm_sigma1(x, cfg);
        worst = std::max(worst, std::abs(a.value - b.value));
        for (std::size_t i = 0; i < a.grad.size(); ++i) {
            worst = std::max(worst, std::abs(a.grad.data()[i] - b.grad.data()[i]));
        }
    }

    // the three hand-computed reference examples
    bool hand_ok = true;
    {
        CidmConfig c1;
        c1.sigma = 2;
        c1.lambda = 1.0;
        const EmbeddingSequence ex1 = EmbeddingSequence::from_rows({{0.0}, {0.0}, {1.0}});
        hand_ok = hand_ok && std::abs(cidm_general(ex1, c1).value - 1.0) <= 1e-12;

        CidmConfig c2;
        c2.lambda = 1.0;
        const EmbeddingSequence ex2 = EmbeddingSequence::from_rows({{0.3, 0.4}, {0.3, 0.4}});
        hand_ok = hand_ok && std::abs(cidm_sigma1(ex2, c2).value - 4.0) <= 1e-12;
        hand_ok = hand_ok && std::abs(cidm_normalized(ex2, c2).value - 1.0) <= 1e-12;

        const EmbeddingSequence ex3 = EmbeddingSequence::from_rows({{0.7}});
        hand_ok = hand_ok && cidm_general(ex3, c2).value == 0.0;
    }

    out.seconds = timer.seconds();
    out.pass = worst <= 1e-12 && hand_ok && out.seconds < 5.0;
    out.detail = "max deviation " + fmt("%.2e", worst) + (hand_ok ? ", hand examples exact" : ", hand examples FAILED");
    return out;
}

// ---- criteria 5-7: ablation runs -------------------------------------------

struct RunArtifacts {
    std::string metrics;
    double final_collapse = 0.0;
    double first_decile_mean = 0.0;
    double last_decile_mean = 0.0;
    EncoderParams params;
};

RunArtifacts run_arm(const std::vector<EmbeddingSequence>& corpus, std::uint64_t seed,
                     Ablation ablation) {
    TrainConfig cfg;
    cfg.seed = RngSeed{seed};
    cfg.ablation = ablation;
    cfg.threads = kThreads;
    PerturbConfig pert;
    pert.seed = RngSeed{seed + 1000};

    RunArtifacts art;
    std::ostringstream metrics;
    const TrainResult result = train(corpus, cfg, pert, [&](const TrainRecord& rec) {
        metrics << train_record_to_jsonl(rec) << "\n";
    });
    art.metrics = metrics.str();
    art.final_collapse = result.final_collapse_index;
    const std::size_t decile = result.records.size() / 10;
    for (std::size_t i = 0; i < decile; ++i) {
        art.first_decile_mean += result.records[i].total / static_cast<double>(decile);
        art.last_decile_mean +=
            result.records[result.records.size() - decile + i].total / static_cast<double>(decile);
    }
    art.params = result.params;
    return art;
}

struct AblationOutcomes {
    Outcome c5;
    Outcome c6;
    Outcome c7;
};

AblationOutcomes criteria_ablation(const fs::path& work) {
    AblationOutcomes out;
    Timer timer5;

    SyntheticCorpusSpec spec;
    spec.seed = RngSeed{7};
    const CorpusManifest manifest = generate_corpus(spec, work / "corpus");
    const std::vector<EmbeddingSequence> corpus = load_corpus(manifest);

    PlantedTaskSpec task_spec;
    task_spec.seed = RngSeed{7};
    const QbeTask task = make_planted_task(task_spec);

    const std::uint64_t seeds[3] = {1, 2, 3};
    std::vector<RunArtifacts> with_runs, without_runs;
    std::vector<double> with_mtwv, without_mtwv;
    for (const std::uint64_t seed : seeds) {
        with_runs.push_back(run_arm(corpus, seed, Ablation::WithReg));
        without_runs.push_back(run_arm(corpus, seed, Ablation::WithoutReg));
        with_mtwv.push_back(qbe_eval(with_runs.back().params, task, 1.0, kThreads).mtwv);
        without_mtwv.push_back(qbe_eval(without_runs.back().params, task, 1.0, kThreads).mtwv);
    }

    // criterion 5: every without-run collapse at most 1/5 of every with-run,
    // and mtwv(with) > mtwv(without) per seed
    bool collapse_ok = true;
    double worst_ratio = 0.0;
    for (const RunArtifacts& wo : without_runs) {
        for (const RunArtifacts& wi : with_runs) {
            const double ratio = wo.final_collapse / wi.final_collapse;
            worst_ratio = std::max(worst_ratio, ratio);
            collapse_ok = collapse_ok && ratio <= 0.2;
        }
    }
    bool mtwv_ok = true;
    for (std::size_t i = 0; i < 3; ++i) {
        mtwv_ok = mtwv_ok && with_mtwv[i] > without_mtwv[i];
    }
    out.c5.seconds = timer5.seconds();
    out.c5.pass = collapse_ok && mtwv_ok && out.c5.seconds < 300.0;
    {
        std::ostringstream d;
        d << "collapse ratio <= " << fmt("%.2e", worst_ratio) << "; mtwv with/without";
        for (std::size_t i = 0; i < 3; ++i) {
            d << " " << fmt("%.2f", with_mtwv[i]) << "/" << fmt("%.2f", without_mtwv[i]);
        }
        out.c5.detail = d.str();
    }

    // criterion 6: byte-identical metrics files on rerun
    Timer timer6;
    bool identical = true;
    for (std::size_t i = 0; i < 3; ++i) {
        const RunArtifacts with_again = run_arm(corpus, seeds[i], Ablation::WithReg);
        const RunArtifacts without_again = run_arm(corpus, seeds[i], Ablation::WithoutReg);
        identical = identical && with_again.metrics == with_runs[i].metrics;
        identical = identical && without_again.metrics == without_runs[i].metrics;

        const fs::path f1 = work / ("metrics_with_" + std::to_string(seeds[i]) + ".jsonl");
        const fs::path f2 = work / ("metrics_with_" + std::to_string(seeds[i]) + "_rerun.jsonl");
        std::ofstream(f1, std::ios::binary) << with_runs[i].metrics;
        std::ofstream(f2, std::ios::binary) << with_again.metrics;
    }
    out.c6.seconds = timer6.seconds();
    out.c6.pass = identical;
    out.c6.detail = identical ? "6 reruns byte-identical" : "metrics differ across reruns";

    // criterion 7: loss decreases in the regularized arm
    bool decreases = true;
    std::ostringstream d7;
    for (std::size_t i = 0; i < 3; ++i) {
        decreases = decreases && with_runs[i].last_decile_mean < with_runs[i].first_decile_mean;
        d7 << (i ? " " : "") << fmt("%.1f", with_runs[i].first_decile_mean) << "->"
           << fmt("%.1f", with_runs[i].last_decile_mean);
    }
    out.c7.pass = decreases;
    out.c7.detail = d7.str();
    out.c7.seconds = 0.0;
    return out;
}

// ---- criterion 8: format round-trips ----------------------------------------

Outcome criterion_roundtrips(const fs::path& work) {
    Timer timer;
    Outcome out;
    Rng rng(RngSeed{888});
    bool ok = true;

    const fs::path seq_path = work / "roundtrip.eseq";
    for (int iter = 0; iter < 100 && ok; ++iter) {
        const int t = 1 + static_cast<int>(rng.uniform_index(30));
        const int d = 1 + static_cast<int>(rng.uniform_index(12));
        Matrix m(t, d);
        for (std::size_t i = 0; i < m.size(); ++i) {
            m.data()[i] = static_cast<double>(static_cast<float>(4.0 * rng.next_gaussian()));
        }
        write_sequence(EmbeddingSequence{Matrix(m)}, seq_path, SeqFormat::Eseq);
        ok = ok && read_sequence(seq_path, SeqFormat::Eseq).frames() == m;
    }

    const fs::path ckpt_path = work / "roundtrip.lasr";
    const EncoderParams params = init_encoder(16, 32, 8, RngSeed{rng.next_u64()});
    save_checkpoint(params, ckpt_path);
    ok = ok && load_checkpoint(ckpt_path).to_flat() == params.to_flat();

    out.seconds = timer.seconds();
    out.pass = ok;
    out.detail = ok ? "100 eseq + checkpoint bit-exact" : "round-trip mismatch";
    return out;
}

} // namespace

int main() {
    const fs::path work = fs::temp_directory_path() / "laser_acceptance";
    std::error_code ec;
    fs::remove_all(work, ec);
    fs::create_directories(work);

    bool all = true;
    all &= report(1, "oracle-equivalence", criterion_oracle());
    all &= report(2, "gradient-correctness", criterion_gradients());
    all &= report(3, "limit-and-identity-properties", criterion_limits());
    all &= report(4, "regularizer-consistency", criterion_cidm_consistency());
    const AblationOutcomes ablation = criteria_ablation(work);
    all &= report(5, "collapse-ablation", ablation.c5);
    all &= report(6, "determinism", ablation.c6);
    all &= report(7, "training-sanity", ablation.c7);
    all &= report(8, "format-round-trips", criterion_roundtrips(work));

    std::printf("%s\n", all ? "ACCEPTANCE: all criteria passed"
                            : "ACCEPTANCE: one or more criteria FAILED");
    return all ? 0 : 1;
}
