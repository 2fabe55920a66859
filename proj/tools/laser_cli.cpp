// SPDX-License-Identifier: Apache-2.0
//
// laser — sequence-alignment self-supervision toolkit.
//
// Subcommands wire the library into reproducible experiments: combined-loss
// evaluation, gradient checking, synthetic corpus/pair generation, the
// correspondence training loop with its collapse ablation, query-by-example
// scoring, and plain DTW. Machine-readable JSON goes to stdout, human
// summaries to stderr. Exit codes: 0 success, 1 check failure, 2 usage or
// input error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "laser/encoder.hpp"
#include "laser/error.hpp"
#include "laser/loss.hpp"
#include "laser/perturb.hpp"
#include "laser/qbe.hpp"
#include "laser/softdtw.hpp"
#include "laser/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Flat JSON object overlaying a subcommand's flags: every key names a long
// option (without dashes); values already given explicitly on the command
// line win. Applied after parsing, before the command runs.
void apply_config_overlay(CLI::App* sub) {
    CLI::Option* copt = sub->get_option_no_throw("--config");
    if (copt == nullptr || copt->count() == 0) return;
    const auto path = copt->as<std::string>();
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw laser::Error(laser::ErrorKind::IoFailure, "cannot open config " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw laser::Error(laser::ErrorKind::MalformedHeader, path + ": " + e.what());
    }
    if (!j.is_object()) {
        throw laser::Error(laser::ErrorKind::MalformedHeader,
                           path + ": config overlay must be a JSON object");
    }
    auto scalar = [](const nlohmann::json& v) -> std::string {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        return v.dump();
    };
    for (const auto& [key, value] : j.items()) {
        CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (opt == nullptr || opt == copt) {
            throw laser::Error(laser::ErrorKind::InvalidArgument,
                               path + ": unknown config key \"" + key + "\"");
        }
        if (opt->count() > 0) continue;
        if (value.is_array()) {
            for (const auto& v : value) opt->add_result(scalar(v));
        } else {
            opt->add_result(scalar(value));
        }
        opt->run_callback();
    }
}

laser::SeqFormat detect_format(const fs::path& path, const std::string& format_flag) {
    if (format_flag == "eseq") return laser::SeqFormat::Eseq;
    if (format_flag == "csv") return laser::SeqFormat::Csv;
    return path.extension() == ".csv" ? laser::SeqFormat::Csv : laser::SeqFormat::Eseq;
}

struct LossFlags {
    double gamma = 0.1;
    double alpha = 0.4;
    double lambda = 1.1;
    int sigma = 1;
    bool raw_sdtw = false;
    bool length_normalize = false;
    std::string preset;
};

void add_loss_flags(CLI::App* sub, LossFlags& flags) {
    sub->add_option("--gamma", flags.gamma, "soft-DTW smoothing factor");
    sub->add_option("--alpha", flags.alpha, "regularization weight");
    sub->add_option("--lambda", flags.lambda, "repulsion margin");
    sub->add_option("--sigma", flags.sigma, "temporal window size");
    sub->add_flag("--raw-sdtw", flags.raw_sdtw,
                  "use raw soft-DTW instead of the divergence as the alignment term");
    sub->add_flag("--length-normalize", flags.length_normalize,
                  "scale the alignment term by 1/(m*n)");
    sub->add_option("--preset", flags.preset, "named hyperparameter preset")
        ->check(CLI::IsMember({"hubert", "wavlm"}));
}

// Presets carry the published hyperparameters; explicit flags override them.
void apply_preset(const CLI::App* sub, LossFlags& flags, double* lr) {
    if (flags.preset.empty()) return;
    const bool hubert = flags.preset == "hubert";
    if (!sub->count("--gamma")) flags.gamma = 0.1;
    if (!sub->count("--alpha")) flags.alpha = hubert ? 0.4 : 0.15;
    if (!sub->count("--lambda")) flags.lambda = hubert ? 1.1 : 1.0;
    if (!sub->count("--sigma")) flags.sigma = 1;
    if (lr != nullptr && sub->count("--lr") == 0u) *lr = 2.0e-5;
}

laser::SoftDtwConfig sdtw_config(const LossFlags& flags, int threads = 1) {
    laser::SoftDtwConfig cfg;
    cfg.gamma = flags.gamma;
    cfg.use_divergence = !flags.raw_sdtw;
    cfg.length_normalize = flags.length_normalize;
    cfg.threads = threads;
    return cfg;
}

laser::CidmConfig cidm_config(const LossFlags& flags) {
    laser::CidmConfig cfg;
    cfg.sigma = flags.sigma;
    cfg.lambda = flags.lambda;
    cfg.alpha = flags.alpha;
    return cfg;
}

int run_loss(const fs::path& a, const fs::path& b, const std::string& format,
             const LossFlags& flags) {
    const laser::EmbeddingSequence x = laser::read_sequence(a, detect_format(a, format));
    const laser::EmbeddingSequence xp = laser::read_sequence(b, detect_format(b, format));
    const laser::LossBreakdown lb =
        laser::laser_loss(x, xp, sdtw_config(flags), cidm_config(flags));
    ordered_json j;
    j["align_term"] = lb.align_term;
    j["reg_x"] = lb.reg_x;
    j["reg_xp"] = lb.reg_xp;
    j["total"] = lb.total;
    std::cout << j.dump() << "\n";
    return 0;
}

int run_grad_check(const fs::path& a, const fs::path& b, const std::string& format, double eps,
                   double tol, const LossFlags& flags) {
    const laser::EmbeddingSequence x = laser::read_sequence(a, detect_format(a, format));
    const laser::EmbeddingSequence xp = laser::read_sequence(b, detect_format(b, format));
    if (x.t() > 10 || xp.t() > 10) {
        throw laser::Error(laser::ErrorKind::InvalidArgument,
                           "grad-check expects small inputs (T <= 10)");
    }
    const laser::SoftDtwConfig scfg = sdtw_config(flags);
    const laser::CidmConfig ccfg = cidm_config(flags);

    // The hinge is non-differentiable at D = lambda; refuse inputs whose
    // finite differences would straddle it.
    for (const laser::EmbeddingSequence* seq : {&x, &xp}) {
        const laser::Matrix dist = laser::self_distance_matrix(*seq);
        for (int i = 0; i < seq->t(); ++i) {
            for (int j = 0; j < seq->t(); ++j) {
                if (i != j && std::abs(dist(i, j) - ccfg.lambda) < eps) {
                    std::cerr << "warning: a pair distance lies within eps of lambda; "
                                 "pair excluded from the check\n";
                    ordered_json skip;
                    skip["skipped"] = true;
                    skip["reason"] = "hinge-adjacent input";
                    std::cout << skip.dump() << "\n";
                    return 0;
                }
            }
        }
    }

    const laser::LossBreakdown lb = laser::laser_loss(x, xp, scfg, ccfg);

    double max_rel = 0.0;
    ordered_json worst;
    auto check_side = [&](const char* side, const laser::EmbeddingSequence& seq,
                          const laser::Matrix& analytic, bool is_first) {
        laser::Matrix frames = seq.frames();
        for (int i = 0; i < frames.rows(); ++i) {
            for (int j = 0; j < frames.cols(); ++j) {
                const double orig = frames(i, j);
                frames(i, j) = orig + eps;
                const laser::EmbeddingSequence hi{laser::Matrix(frames)};
                frames(i, j) = orig - eps;
                const laser::EmbeddingSequence lo{laser::Matrix(frames)};
                frames(i, j) = orig;
                const double f_hi = is_first ? laser::laser_loss(hi, xp, scfg, ccfg).total
                                             : laser::laser_loss(x, hi, scfg, ccfg).total;
                const double f_lo = is_first ? laser::laser_loss(lo, xp, scfg, ccfg).total
                                             : laser::laser_loss(x, lo, scfg, ccfg).total;
                const double fd = (f_hi - f_lo) / (2.0 * eps);
                const double an = analytic(i, j);
                const double rel =
                    std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
                if (rel > max_rel) {
                    max_rel = rel;
                    worst = ordered_json{{"sequence", side},
                                         {"frame", i},
                                         {"dim", j},
                                         {"analytic", an},
                                         {"numeric", fd}};
                }
            }
        }
    };
    check_side("a", x, lb.grad_x, true);
    check_side("b", xp, lb.grad_xp, false);

    const bool pass = max_rel <= tol;
    ordered_json j;
    j["max_rel_err"] = max_rel;
    j["tol"] = tol;
    j["eps"] = eps;
    j["pass"] = pass;
    j["worst"] = worst;
    std::cout << j.dump() << "\n";
    if (!pass) {
        std::cerr << "grad-check failed: max relative error " << max_rel << " > tol " << tol
                  << "\n";
    }
    return pass ? 0 : 1;
}

int run_gen_pairs(const fs::path& out_dir, const laser::SyntheticCorpusSpec& spec,
                  bool emit_pairs, const laser::PerturbConfig& pert) {
    const laser::CorpusManifest manifest = laser::generate_corpus(spec, out_dir);
    ordered_json summary;
    summary["manifest"] = manifest.manifest_path.string();
    summary["n_items"] = manifest.entries.size();
    if (emit_pairs) {
        const laser::Rng pert_root{pert.seed};
        const fs::path pairs_path = out_dir / "pairs.jsonl";
        std::ofstream pf(pairs_path, std::ios::binary | std::ios::trunc);
        if (!pf) {
            throw laser::Error(laser::ErrorKind::IoFailure, "cannot open " + pairs_path.string());
        }
        for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
            const laser::EmbeddingSequence item = laser::load_manifest_item(manifest, i);
            laser::PerturbConfig item_pert = pert;
            item_pert.seed = pert_root.split_seed(i);
            const auto [orig, perturbed] = laser::make_pair(item, item_pert);
            const std::string pert_name = manifest.entries[i].id + ".pair.eseq";
            laser::write_sequence(perturbed, out_dir / pert_name, laser::SeqFormat::Eseq);
            ordered_json line;
            line["id"] = manifest.entries[i].id;
            line["original"] = manifest.entries[i].path;
            line["perturbed"] = pert_name;
            line["t"] = orig.t();
            line["t_perturbed"] = perturbed.t();
            pf << line.dump() << "\n";
        }
        pf.flush();
        if (!pf) {
            throw laser::Error(laser::ErrorKind::IoFailure,
                               "write failed on " + pairs_path.string());
        }
        summary["pairs_manifest"] = pairs_path.string();
    }
    std::cout << summary.dump() << "\n";
    return 0;
}

int run_train(const fs::path& corpus_path, const fs::path& out_dir, laser::TrainConfig cfg,
              const laser::PerturbConfig& pert) {
    const laser::CorpusManifest manifest = laser::read_manifest(corpus_path);
    const std::vector<laser::EmbeddingSequence> corpus = laser::load_corpus(manifest);
    if (corpus.empty()) {
        throw laser::Error(laser::ErrorKind::EmptyBatch, "corpus manifest has no entries");
    }
    cfg.d_in = corpus.front().d();

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw laser::Error(laser::ErrorKind::IoFailure, "cannot create " + out_dir.string());
    }
    const fs::path metrics_path = out_dir / "metrics.jsonl";
    std::ofstream metrics(metrics_path, std::ios::binary | std::ios::trunc);
    if (!metrics) {
        throw laser::Error(laser::ErrorKind::IoFailure, "cannot open " + metrics_path.string());
    }

    const std::uint64_t report_every = std::max<std::uint64_t>(1, cfg.total_updates / 8);
    const laser::TrainResult result =
        laser::train(corpus, cfg, pert, [&](const laser::TrainRecord& rec) {
            metrics << laser::train_record_to_jsonl(rec) << "\n";
            if (rec.update % report_every == 0 || rec.update == cfg.total_updates) {
                std::cerr << "update " << rec.update << "/" << cfg.total_updates << " total "
                          << rec.total << " collapse " << rec.collapse_index << " lr " << rec.lr
                          << "\n";
            }
        });
    metrics.flush();
    if (!metrics) {
        throw laser::Error(laser::ErrorKind::IoFailure, "write failed on " + metrics_path.string());
    }

    const fs::path ckpt_path = out_dir / "checkpoint.lasr";
    laser::save_checkpoint(result.params, ckpt_path);

    ordered_json j;
    j["checkpoint"] = ckpt_path.string();
    j["metrics"] = metrics_path.string();
    j["updates"] = result.records.size();
    j["final_total"] = result.records.back().total;
    j["final_collapse_index"] = result.final_collapse_index;
    std::cout << j.dump() << "\n";
    return 0;
}

int run_eval_collapse(const fs::path& corpus_path, const std::optional<fs::path>& checkpoint,
                      bool random_encoder, int hidden, int d_proj, std::uint64_t seed) {
    const laser::CorpusManifest manifest = laser::read_manifest(corpus_path);
    const std::vector<laser::EmbeddingSequence> corpus = laser::load_corpus(manifest);
    if (corpus.empty()) {
        throw laser::Error(laser::ErrorKind::EmptyBatch, "corpus manifest has no entries");
    }
    laser::EncoderParams params;
    if (checkpoint) {
        params = laser::load_checkpoint(*checkpoint);
    } else if (random_encoder) {
        params = laser::init_encoder(corpus.front().d(), hidden, d_proj, laser::RngSeed{seed});
    } else {
        throw laser::Error(laser::ErrorKind::InvalidArgument,
                           "pass --checkpoint or --random-encoder");
    }
    std::vector<laser::EmbeddingSequence> encoded;
    encoded.reserve(corpus.size());
    for (const laser::EmbeddingSequence& item : corpus) {
        encoded.push_back(laser::encoder_forward(params, item));
    }
    ordered_json j;
    j["collapse_index"] = laser::collapse_index(encoded);
    j["n_sequences"] = encoded.size();
    std::cout << j.dump() << "\n";
    return 0;
}

int run_qbe_gen(const fs::path& out_dir, const laser::PlantedTaskSpec& spec) {
    const laser::QbeTask task = laser::make_planted_task(spec);
    laser::write_task(task, out_dir);
    ordered_json j;
    j["task"] = (out_dir / "task.json").string();
    j["n_queries"] = task.queries.size();
    j["n_docs"] = task.docs.size();
    std::cout << j.dump() << "\n";
    return 0;
}

int run_qbe_eval(const fs::path& task_path, const std::optional<fs::path>& checkpoint,
                 bool identity, double beta, int threads,
                 const std::optional<fs::path>& report_path) {
    const laser::QbeTask task = laser::load_task(task_path);
    laser::QbeReport report;
    if (checkpoint) {
        const laser::EncoderParams params = laser::load_checkpoint(*checkpoint);
        report = laser::qbe_eval(params, task, beta, threads);
    } else if (identity) {
        report = laser::qbe_eval(task, beta, threads);
    } else {
        throw laser::Error(laser::ErrorKind::InvalidArgument, "pass --checkpoint or --identity");
    }
    const std::string json = report.to_json();
    if (report_path) {
        std::ofstream out(*report_path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw laser::Error(laser::ErrorKind::IoFailure,
                               "cannot open " + report_path->string());
        }
        out << json << "\n";
        out.flush();
        if (!out) {
            throw laser::Error(laser::ErrorKind::IoFailure,
                               "write failed on " + report_path->string());
        }
    }
    std::cout << json << "\n";
    std::cerr << "mtwv " << report.mtwv << " top1 " << report.top1 << "\n";
    return 0;
}

int run_dtw(const fs::path& a, const fs::path& b, const std::string& format,
            const std::optional<double>& gamma, bool divergence) {
    const laser::EmbeddingSequence x = laser::read_sequence(a, detect_format(a, format));
    const laser::EmbeddingSequence xp = laser::read_sequence(b, detect_format(b, format));
    const laser::HardDtwResult hard = laser::hard_dtw(x, xp);
    ordered_json j;
    j["value"] = hard.value;
    ordered_json path = ordered_json::array();
    for (const auto& [pi, pj] : hard.path) path.push_back(ordered_json::array({pi, pj}));
    j["path"] = std::move(path);
    if (gamma) {
        laser::SoftDtwConfig cfg;
        cfg.gamma = *gamma;
        j["soft_value"] = laser::sdtw_forward(x, xp, cfg).value;
        if (divergence) j["divergence"] = laser::sdtw_divergence(x, xp, cfg).value;
    }
    std::cout << j.dump() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sequence-alignment self-supervision toolkit (soft-DTW divergence + "
                 "Contrastive-IDM)"};
    app.require_subcommand(1);

    // ---- loss ----
    auto* loss_cmd = app.add_subcommand("loss", "combined loss breakdown for a sequence pair");
    fs::path loss_a, loss_b;
    std::string loss_format = "auto";
    LossFlags loss_flags;
    loss_cmd->add_option("--a", loss_a, "first sequence file")->required();
    loss_cmd->add_option("--b", loss_b, "second sequence file")->required();
    loss_cmd->add_option("--format", loss_format, "input format")
        ->check(CLI::IsMember({"auto", "eseq", "csv"}));
    add_loss_flags(loss_cmd, loss_flags);
    loss_cmd->add_option("--config", "JSON config overlay (flag-for-flag)");

    // ---- grad-check ----
    auto* gc_cmd =
        app.add_subcommand("grad-check", "verify analytic gradients against finite differences");
    fs::path gc_a, gc_b;
    std::string gc_format = "auto";
    double gc_eps = 1e-4, gc_tol = 1e-4;
    LossFlags gc_flags;
    gc_cmd->add_option("--a", gc_a, "first sequence file")->required();
    gc_cmd->add_option("--b", gc_b, "second sequence file")->required();
    gc_cmd->add_option("--format", gc_format, "input format")
        ->check(CLI::IsMember({"auto", "eseq", "csv"}));
    gc_cmd->add_option("--eps", gc_eps, "finite-difference step");
    gc_cmd->add_option("--tol", gc_tol, "max relative error to pass");
    add_loss_flags(gc_cmd, gc_flags);
    gc_cmd->add_option("--config", "JSON config overlay (flag-for-flag)");

    // ---- gen-pairs ----
    auto* gen_cmd =
        app.add_subcommand("gen-pairs", "generate a synthetic corpus (and optional pairs)");
    fs::path gen_out;
    laser::SyntheticCorpusSpec gen_spec;
    std::uint64_t gen_seed = 1, gen_pair_seed = 2;
    bool gen_emit_pairs = false;
    laser::PerturbConfig gen_pert;
    gen_cmd->add_option("--out", gen_out, "output directory")->required();
    gen_cmd->add_option("--n-items", gen_spec.n_items, "number of sequences");
    gen_cmd->add_option("--t-min", gen_spec.len_range.first, "minimum length");
    gen_cmd->add_option("--t-max", gen_spec.len_range.second, "maximum length");
    gen_cmd->add_option("--dim", gen_spec.dim, "feature dimension");
    gen_cmd->add_option("--classes", gen_spec.n_content_classes, "latent content classes");
    gen_cmd->add_option("--jitter-std", gen_spec.jitter_std, "per-frame jitter std");
    gen_cmd->add_option("--seed", gen_seed, "corpus seed");
    gen_cmd->add_flag("--pairs", gen_emit_pairs, "also write perturbed counterparts");
    gen_cmd->add_option("--pair-seed", gen_pair_seed, "perturbation seed");
    gen_cmd->add_option("--speed-factors", gen_pert.speed_factors, "speed factor set");
    gen_cmd->add_option("--strength", gen_pert.transform_strength, "feature rotation angle");
    gen_cmd->add_option("--noise", gen_pert.noise_std, "additive noise std");
    gen_cmd->add_option("--config", "JSON config overlay (flag-for-flag)");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "run the correspondence training loop");
    fs::path train_corpus, train_out;
    laser::TrainConfig train_cfg;
    std::uint64_t train_seed = 1, train_pair_seed = 2;
    std::string train_ablation = "with_reg";
    LossFlags train_flags;
    laser::PerturbConfig train_pert;
    train_cmd->add_option("--corpus", train_corpus, "corpus manifest (JSON lines)")->required();
    train_cmd->add_option("--out", train_out, "output directory")->required();
    train_cmd->add_option("--updates", train_cfg.total_updates, "total updates");
    train_cmd->add_option("--warmup", train_cfg.warmup_updates, "warmup updates");
    train_cmd->add_option("--batch", train_cfg.batch_size, "batch size");
    train_cmd->add_option("--lr", train_cfg.peak_lr, "peak learning rate");
    train_cmd->add_option("--seed", train_seed, "training seed");
    train_cmd->add_option("--pair-seed", train_pair_seed, "perturbation seed");
    train_cmd->add_option("--ablation", train_ablation, "with_reg or without_reg")
        ->check(CLI::IsMember({"with_reg", "without_reg"}));
    train_cmd->add_option("--hidden", train_cfg.hidden, "hidden width");
    train_cmd->add_option("--d-proj", train_cfg.d_proj, "projection dimension");
    train_cmd->add_option("--threads", train_cfg.threads, "worker cap inside a batch");
    train_cmd->add_option("--speed-factors", train_pert.speed_factors, "speed factor set");
    train_cmd->add_option("--strength", train_pert.transform_strength, "feature rotation angle");
    train_cmd->add_option("--noise", train_pert.noise_std, "additive noise std");
    add_loss_flags(train_cmd, train_flags);
    train_cmd->add_option("--config", "JSON config overlay (flag-for-flag)");

    // ---- eval-collapse ----
    auto* col_cmd = app.add_subcommand("eval-collapse", "collapse index of an encoded corpus");
    fs::path col_corpus;
    std::optional<fs::path> col_checkpoint;
    bool col_random = false;
    int col_hidden = 32, col_dproj = 8;
    std::uint64_t col_seed = 1;
    col_cmd->add_option("--corpus", col_corpus, "corpus manifest")->required();
    col_cmd->add_option("--checkpoint", col_checkpoint, "encoder checkpoint");
    col_cmd->add_flag("--random-encoder", col_random, "use a freshly initialized encoder");
    col_cmd->add_option("--hidden", col_hidden, "hidden width for --random-encoder");
    col_cmd->add_option("--d-proj", col_dproj, "projection dim for --random-encoder");
    col_cmd->add_option("--seed", col_seed, "init seed for --random-encoder");
    col_cmd->add_option("--config", "JSON config overlay (flag-for-flag)");

    // ---- qbe ----
    auto* qbe_cmd = app.add_subcommand("qbe", "query-by-example task generation and scoring");
    bool qbe_gen = false, qbe_identity = false;
    fs::path qbe_out;
    std::optional<fs::path> qbe_task_path, qbe_checkpoint, qbe_report;
    laser::PlantedTaskSpec qbe_spec;
    std::uint64_t qbe_seed = 1;
    double qbe_beta = 1.0;
    int qbe_threads = 1;
    qbe_cmd->add_flag("--gen-task", qbe_gen, "generate a planted task instead of evaluating");
    qbe_cmd->add_option("--out", qbe_out, "output directory for --gen-task");
    qbe_cmd->add_option("--n-terms", qbe_spec.n_terms, "number of planted terms");
    qbe_cmd->add_option("--t-min", qbe_spec.len_range.first, "minimum query length");
    qbe_cmd->add_option("--t-max", qbe_spec.len_range.second, "maximum query length");
    qbe_cmd->add_option("--dim", qbe_spec.dim, "feature dimension");
    qbe_cmd->add_option("--classes", qbe_spec.n_content_classes, "latent content classes");
    qbe_cmd->add_option("--jitter-std", qbe_spec.jitter_std, "per-frame jitter std");
    qbe_cmd->add_option("--speed-factors", qbe_spec.perturb.speed_factors, "speed factor set");
    qbe_cmd->add_option("--strength", qbe_spec.perturb.transform_strength,
                        "feature rotation angle");
    qbe_cmd->add_option("--noise", qbe_spec.perturb.noise_std, "additive noise std");
    qbe_cmd->add_option("--seed", qbe_seed, "task seed");
    qbe_cmd->add_option("--task", qbe_task_path, "task definition file to evaluate");
    qbe_cmd->add_option("--checkpoint", qbe_checkpoint, "encoder checkpoint for evaluation");
    qbe_cmd->add_flag("--identity", qbe_identity, "evaluate on raw sequences (no encoder)");
    qbe_cmd->add_option("--beta", qbe_beta, "false-alarm weight in the term-weighted value");
    qbe_cmd->add_option("--threads", qbe_threads, "scoring workers");
    qbe_cmd->add_option("--report", qbe_report, "also write the report JSON to this file");
    qbe_cmd->add_option("--config", "JSON config overlay (flag-for-flag)");

    // ---- dtw ----
    auto* dtw_cmd = app.add_subcommand("dtw", "classical DTW value and path");
    fs::path dtw_a, dtw_b;
    std::string dtw_format = "auto";
    std::optional<double> dtw_gamma;
    bool dtw_div = false;
    dtw_cmd->add_option("--a", dtw_a, "first sequence file")->required();
    dtw_cmd->add_option("--b", dtw_b, "second sequence file")->required();
    dtw_cmd->add_option("--format", dtw_format, "input format")
        ->check(CLI::IsMember({"auto", "eseq", "csv"}));
    dtw_cmd->add_option("--gamma", dtw_gamma, "also report the soft value at this gamma");
    dtw_cmd->add_flag("--divergence", dtw_div, "also report the divergence (needs --gamma)");
    dtw_cmd->add_option("--config", "JSON config overlay (flag-for-flag)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(loss_cmd)) {
            apply_config_overlay(loss_cmd);
            apply_preset(loss_cmd, loss_flags, nullptr);
            return run_loss(loss_a, loss_b, loss_format, loss_flags);
        }
        if (app.got_subcommand(gc_cmd)) {
            apply_config_overlay(gc_cmd);
            apply_preset(gc_cmd, gc_flags, nullptr);
            return run_grad_check(gc_a, gc_b, gc_format, gc_eps, gc_tol, gc_flags);
        }
        if (app.got_subcommand(gen_cmd)) {
            apply_config_overlay(gen_cmd);
            gen_spec.seed = laser::RngSeed{gen_seed};
            gen_pert.seed = laser::RngSeed{gen_pair_seed};
            return run_gen_pairs(gen_out, gen_spec, gen_emit_pairs, gen_pert);
        }
        if (app.got_subcommand(train_cmd)) {
            apply_config_overlay(train_cmd);
            apply_preset(train_cmd, train_flags, &train_cfg.peak_lr);
            train_cfg.seed = laser::RngSeed{train_seed};
            train_cfg.ablation = train_ablation == "without_reg" ? laser::Ablation::WithoutReg
                                                                 : laser::Ablation::WithReg;
            train_cfg.sdtw = sdtw_config(train_flags);
            train_cfg.cidm = cidm_config(train_flags);
            train_pert.seed = laser::RngSeed{train_pair_seed};
            return run_train(train_corpus, train_out, train_cfg, train_pert);
        }
        if (app.got_subcommand(col_cmd)) {
            apply_config_overlay(col_cmd);
            return run_eval_collapse(col_corpus, col_checkpoint, col_random, col_hidden,
                                     col_dproj, col_seed);
        }
        if (app.got_subcommand(qbe_cmd)) {
            apply_config_overlay(qbe_cmd);
            if (qbe_gen) {
                if (qbe_out.empty()) {
                    throw laser::Error(laser::ErrorKind::InvalidArgument,
                                       "--gen-task requires --out");
                }
                qbe_spec.seed = laser::RngSeed{qbe_seed};
                return run_qbe_gen(qbe_out, qbe_spec);
            }
            if (!qbe_task_path) {
                throw laser::Error(laser::ErrorKind::InvalidArgument,
                                   "pass --task for evaluation or --gen-task to generate");
            }
            return run_qbe_eval(*qbe_task_path, qbe_checkpoint, qbe_identity, qbe_beta,
                                qbe_threads, qbe_report);
        }
        if (app.got_subcommand(dtw_cmd)) {
            apply_config_overlay(dtw_cmd);
            return run_dtw(dtw_a, dtw_b, dtw_format, dtw_gamma, dtw_div);
        }
    } catch (const laser::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
