// SPDX-License-Identifier: Apache-2.0
#include "laser/qbe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <unordered_set>

#include <json.hpp>

#include "laser/error.hpp"
#include "laser/parallel.hpp"
#include "laser/softdtw.hpp"

namespace laser {

void QbeTask::validate() const {
    std::unordered_set<std::string> qids, dids;
    for (const QbeItem& q : queries) {
        if (!qids.insert(q.id).second) {
            throw Error(ErrorKind::InvalidArgument, "duplicate query id " + q.id);
        }
    }
    for (const QbeItem& d : docs) {
        if (!dids.insert(d.id).second) {
            throw Error(ErrorKind::InvalidArgument, "duplicate doc id " + d.id);
        }
    }
    for (const auto& [qid, did] : relevance) {
        if (!qids.count(qid)) {
            throw Error(ErrorKind::InvalidArgument, "relevance references unknown query " + qid);
        }
        if (!dids.count(did)) {
            throw Error(ErrorKind::InvalidArgument, "relevance references unknown doc " + did);
        }
    }
}

double qbe_score(const EmbeddingSequence& query, const EmbeddingSequence& doc) {
    const HardDtwResult dtw = hard_dtw(query, doc);
    return -dtw.value / static_cast<double>(dtw.path.size());
}

QbeScores score_all(const QbeTask& task, int threads) {
    task.validate();
    const int nq = static_cast<int>(task.queries.size());
    const int nd = static_cast<int>(task.docs.size());
    std::vector<double> flat(static_cast<std::size_t>(nq) * static_cast<std::size_t>(nd));
    parallel_for(nq * nd, threads, [&](int idx) {
        const int qi = idx / nd, di = idx % nd;
        flat[static_cast<std::size_t>(idx)] =
            qbe_score(task.queries[static_cast<std::size_t>(qi)].seq,
                      task.docs[static_cast<std::size_t>(di)].seq);
    });
    QbeScores scores;
    for (int qi = 0; qi < nq; ++qi) {
        for (int di = 0; di < nd; ++di) {
            scores[{task.queries[static_cast<std::size_t>(qi)].id,
                    task.docs[static_cast<std::size_t>(di)].id}] =
                flat[static_cast<std::size_t>(qi) * static_cast<std::size_t>(nd) +
                     static_cast<std::size_t>(di)];
        }
    }
    return scores;
}

MtwvResult mtwv(const QbeTask& task, const QbeScores& scores, double beta) {
    task.validate();
    if (!(beta > 0.0) || !std::isfinite(beta)) {
        throw Error(ErrorKind::InvalidArgument, "beta must be positive and finite");
    }
    if (task.relevance.empty()) {
        throw Error(ErrorKind::NoPositives, "mtwv requires at least one positive pair");
    }

    // Per query: sorted positive and negative score lists.
    struct QueryScores {
        std::vector<double> pos;
        std::vector<double> neg;
    };
    std::vector<QueryScores> per_query;
    per_query.reserve(task.queries.size());
    for (const QbeItem& q : task.queries) {
        QueryScores qs;
        for (const QbeItem& d : task.docs) {
            const auto it = scores.find({q.id, d.id});
            if (it == scores.end()) {
                throw Error(ErrorKind::InvalidArgument,
                            "missing score for pair (" + q.id + ", " + d.id + ")");
            }
            if (task.relevance.count({q.id, d.id})) {
                qs.pos.push_back(it->second);
            } else {
                qs.neg.push_back(it->second);
            }
        }
        std::sort(qs.pos.begin(), qs.pos.end());
        std::sort(qs.neg.begin(), qs.neg.end());
        if (!qs.pos.empty()) per_query.push_back(std::move(qs));
    }

    std::vector<double> thresholds;
    thresholds.reserve(scores.size() + 1);
    for (const auto& [pair, s] : scores) thresholds.push_back(s);
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    thresholds.push_back(std::numeric_limits<double>::infinity());

    MtwvResult best;
    best.mtwv = -std::numeric_limits<double>::infinity();
    for (const double theta : thresholds) {
        double cost = 0.0;
        for (const QueryScores& qs : per_query) {
            // detected: score >= theta
            const auto miss_end = std::lower_bound(qs.pos.begin(), qs.pos.end(), theta);
            const double p_miss = static_cast<double>(miss_end - qs.pos.begin()) /
                                  static_cast<double>(qs.pos.size());
            double p_fa = 0.0;
            if (!qs.neg.empty()) {
                const auto fa_begin = std::lower_bound(qs.neg.begin(), qs.neg.end(), theta);
                p_fa = static_cast<double>(qs.neg.end() - fa_begin) /
                       static_cast<double>(qs.neg.size());
            }
            cost += p_miss + beta * p_fa;
        }
        const double twv = 1.0 - cost / static_cast<double>(per_query.size());
        if (twv > best.mtwv) {
            best.mtwv = twv;
            best.threshold = theta;
        }
    }
    return best;
}

namespace {

double top1_accuracy(const QbeTask& task, const QbeScores& scores) {
    int considered = 0;
    int hits = 0;
    for (const QbeItem& q : task.queries) {
        bool has_positive = false;
        for (const auto& [qid, did] : task.relevance) {
            if (qid == q.id) {
                has_positive = true;
                break;
            }
        }
        if (!has_positive) continue;
        ++considered;
        std::string best_doc;
        double best_score = -std::numeric_limits<double>::infinity();
        for (const QbeItem& d : task.docs) {
            const double s = scores.at({q.id, d.id});
            if (s > best_score) {
                best_score = s;
                best_doc = d.id;
            }
        }
        if (task.relevance.count({q.id, best_doc})) ++hits;
    }
    return considered == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(considered);
}

} // namespace

std::string QbeReport::to_json() const {
    nlohmann::ordered_json j;
    j["mtwv"] = mtwv;
    if (std::isfinite(best_threshold)) {
        j["best_threshold"] = best_threshold;
    } else {
        j["best_threshold"] = "inf";
    }
    j["top1"] = top1;
    nlohmann::ordered_json sc = nlohmann::ordered_json::object();
    for (const auto& [pair, s] : scores) {
        sc[pair.first + "|" + pair.second] = s;
    }
    j["scores"] = std::move(sc);
    return j.dump();
}

QbeReport qbe_eval(const QbeTask& task, double beta, int threads) {
    QbeReport report;
    report.scores = score_all(task, threads);
    const MtwvResult m = mtwv(task, report.scores, beta);
    report.mtwv = m.mtwv;
    report.best_threshold = m.threshold;
    report.top1 = top1_accuracy(task, report.scores);
    return report;
}

QbeReport qbe_eval(const EncoderParams& encoder, const QbeTask& task, double beta, int threads) {
    QbeTask encoded;
    encoded.relevance = task.relevance;
    encoded.queries.reserve(task.queries.size());
    encoded.docs.reserve(task.docs.size());
    for (const QbeItem& q : task.queries) {
        encoded.queries.push_back({q.id, encoder_forward(encoder, q.seq)});
    }
    for (const QbeItem& d : task.docs) {
        encoded.docs.push_back({d.id, encoder_forward(encoder, d.seq)});
    }
    return qbe_eval(encoded, beta, threads);
}

void PlantedTaskSpec::validate() const {
    if (n_terms < 1) throw Error(ErrorKind::InvalidArgument, "n_terms must be >= 1");
    if (len_range.first < 2 || len_range.second < len_range.first) {
        throw Error(ErrorKind::InvalidArgument, "len_range requires 2 <= lo <= hi");
    }
    if (dim < 1) throw Error(ErrorKind::InvalidArgument, "dim must be >= 1");
    if (n_content_classes < 1) {
        throw Error(ErrorKind::InvalidArgument, "n_content_classes must be >= 1");
    }
    if (!(jitter_std >= 0.0) || !std::isfinite(jitter_std)) {
        throw Error(ErrorKind::InvalidArgument, "jitter_std must be >= 0 and finite");
    }
    perturb.validate();
}

QbeTask make_planted_task(const PlantedTaskSpec& spec) {
    spec.validate();
    const Rng root{spec.seed};
    // Stream 0 matches generate_corpus, so a task built with the corpus seed
    // lives in the same prototype space as the training data.
    const Matrix protos = make_prototypes(spec.n_content_classes, spec.dim, root.split(0));

    QbeTask task;
    task.queries.reserve(static_cast<std::size_t>(spec.n_terms));
    task.docs.reserve(static_cast<std::size_t>(spec.n_terms));
    const int span = spec.len_range.second - spec.len_range.first + 1;
    for (int t = 0; t < spec.n_terms; ++t) {
        Rng term_rng = root.split(1000003 + static_cast<std::uint64_t>(t));
        const int len = spec.len_range.first +
                        static_cast<int>(term_rng.uniform_index(static_cast<std::uint64_t>(span)));
        const std::vector<int> classes =
            random_class_walk(len, spec.n_content_classes, spec.segment_len_range, term_rng);
        EmbeddingSequence query = realize_classes(classes, protos, spec.jitter_std, term_rng);

        PerturbConfig pc = spec.perturb;
        pc.seed = RngSeed{term_rng.next_u64()};
        EmbeddingSequence doc = make_pair(query, pc).second;

        char qid[16], did[16];
        std::snprintf(qid, sizeof(qid), "q-%04d", t);
        std::snprintf(did, sizeof(did), "d-%04d", t);
        task.queries.push_back({qid, std::move(query)});
        task.docs.push_back({did, std::move(doc)});
        task.relevance.insert({qid, did});
    }
    return task;
}

namespace {

void write_item_manifest(const std::vector<QbeItem>& items, const std::filesystem::path& dir,
                         const std::string& manifest_name, const std::string& subdir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / subdir, ec);
    if (ec) {
        throw Error(ErrorKind::IoFailure, "cannot create " + (dir / subdir).string());
    }
    std::ofstream mf(dir / manifest_name, std::ios::binary | std::ios::trunc);
    if (!mf) {
        throw Error(ErrorKind::IoFailure, "cannot open " + (dir / manifest_name).string());
    }
    for (const QbeItem& item : items) {
        const std::string rel = subdir + "/" + item.id + ".eseq";
        write_sequence(item.seq, dir / rel, SeqFormat::Eseq);
        nlohmann::ordered_json line;
        line["id"] = item.id;
        line["path"] = rel;
        line["t"] = item.seq.t();
        mf << line.dump() << "\n";
    }
    mf.flush();
    if (!mf) {
        throw Error(ErrorKind::IoFailure, "write failed on " + (dir / manifest_name).string());
    }
}

std::vector<QbeItem> read_item_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoFailure, "cannot open " + manifest_path.string());
    }
    std::vector<QbeItem> items;
    const std::filesystem::path base = manifest_path.parent_path();
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            items.push_back({j.at("id").get<std::string>(),
                             read_sequence(base / j.at("path").get<std::string>(),
                                           SeqFormat::Eseq)});
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::MalformedHeader,
                        manifest_path.string() + ": line " + std::to_string(line_no) + ": " +
                            e.what());
        }
    }
    return items;
}

} // namespace

void write_task(const QbeTask& task, const std::filesystem::path& dir,
                const std::string& task_filename) {
    task.validate();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorKind::IoFailure, "cannot create " + dir.string());
    }
    write_item_manifest(task.queries, dir, "queries.jsonl", "queries");
    write_item_manifest(task.docs, dir, "docs.jsonl", "docs");

    nlohmann::ordered_json j;
    j["queries"] = "queries.jsonl";
    j["docs"] = "docs.jsonl";
    nlohmann::ordered_json positives = nlohmann::ordered_json::array();
    for (const auto& [qid, did] : task.relevance) {
        positives.push_back(nlohmann::ordered_json::array({qid, did}));
    }
    j["positives"] = std::move(positives);

    std::ofstream out(dir / task_filename, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoFailure, "cannot open " + (dir / task_filename).string());
    }
    out << j.dump(2) << "\n";
    out.flush();
    if (!out) {
        throw Error(ErrorKind::IoFailure, "write failed on " + (dir / task_filename).string());
    }
}

QbeTask load_task(const std::filesystem::path& task_file) {
    std::ifstream in(task_file, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoFailure, "cannot open " + task_file.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedHeader, task_file.string() + ": " + e.what());
    }
    QbeTask task;
    const std::filesystem::path base = task_file.parent_path();
    try {
        task.queries = read_item_manifest(base / j.at("queries").get<std::string>());
        task.docs = read_item_manifest(base / j.at("docs").get<std::string>());
        for (const auto& p : j.at("positives")) {
            task.relevance.insert({p.at(0).get<std::string>(), p.at(1).get<std::string>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedHeader, task_file.string() + ": " + e.what());
    }
    task.validate();
    return task;
}

} // namespace laser
