// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "laser/error.hpp"
#include "laser/qbe.hpp"
#include "laser/trainer.hpp"
#include "support/test_util.hpp"

using namespace laser;
using laser::testing::random_sequence;
namespace fs = std::filesystem;

namespace {

QbeTask two_by_two() {
    // Two queries, two docs, one positive each; scores are injected by hand.
    QbeTask task;
    const EmbeddingSequence stub = EmbeddingSequence::from_rows({{0.0}});
    task.queries.push_back({"q0", stub});
    task.queries.push_back({"q1", stub});
    task.docs.push_back({"d0", stub});
    task.docs.push_back({"d1", stub});
    task.relevance.insert({"q0", "d0"});
    task.relevance.insert({"q1", "d1"});
    return task;
}

QbeScores scores_of(const QbeTask& task, double q0d0, double q0d1, double q1d0, double q1d1) {
    QbeScores s;
    s[{task.queries[0].id, task.docs[0].id}] = q0d0;
    s[{task.queries[0].id, task.docs[1].id}] = q0d1;
    s[{task.queries[1].id, task.docs[0].id}] = q1d0;
    s[{task.queries[1].id, task.docs[1].id}] = q1d1;
    return s;
}

} // namespace

TEST_SUITE_BEGIN("qbe");

TEST_CASE("score of a sequence against itself is zero") {
    Rng rng(RngSeed{90});
    const EmbeddingSequence x = random_sequence(7, 4, rng);
    CHECK(qbe_score(x, x) == doctest::Approx(0.0));
}

TEST_CASE("orthogonal single-frame sequences score minus two") {
    const EmbeddingSequence u = EmbeddingSequence::from_rows({{1.0, 0.0}});
    const EmbeddingSequence v = EmbeddingSequence::from_rows({{0.0, 1.0}});
    CHECK(qbe_score(u, v) == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("score is symmetric in its arguments") {
    Rng rng(RngSeed{91});
    for (int iter = 0; iter < 10; ++iter) {
        const EmbeddingSequence a =
            random_sequence(1 + static_cast<int>(rng.uniform_index(8)), 3, rng);
        const EmbeddingSequence b =
            random_sequence(1 + static_cast<int>(rng.uniform_index(8)), 3, rng);
        REQUIRE(qbe_score(a, b) == doctest::Approx(qbe_score(b, a)).epsilon(1e-12));
    }
}

TEST_CASE("noisier documents score strictly worse on planted instances") {
    PlantedTaskSpec spec;
    spec.n_terms = 1;
    spec.seed = RngSeed{92};
    double mean_clean = 0.0, mean_noisy = 0.0;
    for (int s = 0; s < 10; ++s) {
        PlantedTaskSpec clean = spec;
        clean.seed = RngSeed{static_cast<std::uint64_t>(100 + s)};
        clean.perturb.noise_std = 0.01;
        PlantedTaskSpec noisy = clean;
        noisy.perturb.noise_std = 0.3;
        const QbeTask a = make_planted_task(clean);
        const QbeTask b = make_planted_task(noisy);
        mean_clean += qbe_score(a.queries[0].seq, a.docs[0].seq);
        mean_noisy += qbe_score(b.queries[0].seq, b.docs[0].seq);
    }
    CHECK(mean_noisy < mean_clean);
}

TEST_CASE("mtwv is one when positives separate perfectly") {
    const QbeTask task = two_by_two();
    const QbeScores s = scores_of(task, -0.1, -5.0, -4.0, -0.2);
    const MtwvResult res = mtwv(task, s, 1.0);
    CHECK(res.mtwv == doctest::Approx(1.0));
    CHECK(res.threshold == doctest::Approx(-0.2)); // lowest maximizing threshold
}

TEST_CASE("all-tied scores give max(1 - beta, 0)") {
    const QbeTask task = two_by_two();
    const QbeScores s = scores_of(task, -1.0, -1.0, -1.0, -1.0);
    CHECK(mtwv(task, s, 1.0).mtwv == doctest::Approx(0.0));
    CHECK(mtwv(task, s, 0.5).mtwv == doctest::Approx(0.5));
    CHECK(mtwv(task, s, 2.0).mtwv == doctest::Approx(0.0));
}

TEST_CASE("inverted scores bottom out at zero via the detect-nothing threshold") {
    const QbeTask task = two_by_two();
    const QbeScores s = scores_of(task, -5.0, -0.1, -0.2, -4.0);
    const MtwvResult res = mtwv(task, s, 1.0);
    // 0 is attained at the detect-nothing threshold (P_miss=1, P_fa=0) and,
    // tied with it, at the detect-everything one; ties resolve low.
    CHECK(res.mtwv == doctest::Approx(0.0));
    CHECK(res.threshold == doctest::Approx(-5.0));
}

TEST_CASE("mtwv is invariant under strictly increasing score transforms") {
    Rng rng(RngSeed{93});
    const QbeTask task = two_by_two();
    for (int iter = 0; iter < 20; ++iter) {
        const double a = -5.0 * rng.next_double(), b = -5.0 * rng.next_double();
        const double c = -5.0 * rng.next_double(), d = -5.0 * rng.next_double();
        const QbeScores raw = scores_of(task, a, b, c, d);
        QbeScores warped;
        for (const auto& [k, v] : raw) warped[k] = std::exp(v) * 3.0 + 1.0;
        REQUIRE(mtwv(task, raw, 1.0).mtwv ==
                doctest::Approx(mtwv(task, warped, 1.0).mtwv).epsilon(1e-12));
    }
}

TEST_CASE("mtwv requires positives and complete scores") {
    QbeTask task = two_by_two();
    QbeScores s = scores_of(task, -1, -2, -3, -4);
    task.relevance.clear();
    CHECK_THROWS_WITH_AS(mtwv(task, s, 1.0), doctest::Contains("no-positives"), Error);

    task.relevance.insert({"q0", "d0"});
    s.erase({"q1", "d1"});
    CHECK_THROWS_AS(mtwv(task, s, 1.0), Error);
}

TEST_CASE("task validation catches duplicate and dangling ids") {
    QbeTask task;
    const EmbeddingSequence stub = EmbeddingSequence::from_rows({{0.0}});
    task.queries.push_back({"q0", stub});
    task.queries.push_back({"q0", stub});
    CHECK_THROWS_AS(task.validate(), Error);

    task.queries.pop_back();
    task.docs.push_back({"d0", stub});
    task.relevance.insert({"q0", "missing"});
    CHECK_THROWS_AS(task.validate(), Error);
}

TEST_CASE("identity matching on a planted task retrieves almost every query") {
    PlantedTaskSpec spec;
    spec.n_terms = 50;
    spec.seed = RngSeed{94};
    const QbeTask task = make_planted_task(spec);
    const QbeReport report = qbe_eval(task, 1.0, 2);
    CHECK(report.top1 >= 0.9);
    CHECK(report.mtwv > 0.5);
}

TEST_CASE("a collapsed encoder flattens all scores and the report shows it") {
    PlantedTaskSpec spec;
    spec.n_terms = 8;
    spec.seed = RngSeed{95};
    QbeTask task = make_planted_task(spec);
    // Collapse by hand: every sequence becomes a constant unit row.
    auto collapse = [](std::vector<QbeItem>& items) {
        for (QbeItem& item : items) {
            Matrix m(item.seq.t(), 2, 0.0);
            for (int i = 0; i < m.rows(); ++i) m(i, 0) = 1.0;
            item.seq = EmbeddingSequence(std::move(m));
        }
    };
    collapse(task.queries);
    collapse(task.docs);
    const QbeReport report = qbe_eval(task, 1.0, 1);
    for (const auto& [k, v] : report.scores) REQUIRE(std::abs(v) <= 1e-6);
    CHECK(report.mtwv == doctest::Approx(0.0));
}

TEST_CASE("near-collapsed embeddings flatten scores within 1e-6") {
    // all frames of all items within ~1e-8 of one point: every pairwise DTW
    // cost is O(1e-16) per frame, so scores agree to far better than 1e-6
    Rng rng(RngSeed{97});
    QbeTask task;
    for (int k = 0; k < 6; ++k) {
        const int t = 4 + static_cast<int>(rng.uniform_index(5));
        Matrix m(t, 3);
        for (int i = 0; i < t; ++i) {
            m(i, 0) = 1.0 + 1e-8 * rng.next_gaussian();
            m(i, 1) = 1e-8 * rng.next_gaussian();
            m(i, 2) = 1e-8 * rng.next_gaussian();
        }
        const std::string id = std::to_string(k);
        if (k < 3) {
            task.queries.push_back({"q" + id, EmbeddingSequence(std::move(m))});
        } else {
            task.docs.push_back({"d" + id, EmbeddingSequence(std::move(m))});
        }
    }
    task.relevance.insert({"q0", "d3"});
    std::vector<EmbeddingSequence> pooled;
    for (const QbeItem& q : task.queries) pooled.push_back(q.seq);
    for (const QbeItem& d : task.docs) pooled.push_back(d.seq);
    REQUIRE(collapse_index(pooled) < 1e-6);

    const QbeScores scores = score_all(task);
    double lo = 1e300, hi = -1e300;
    for (const auto& [k, v] : scores) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(hi - lo <= 1e-6);
}

TEST_CASE("task files round-trip through write and load") {
    PlantedTaskSpec spec;
    spec.n_terms = 4;
    spec.seed = RngSeed{96};
    const QbeTask task = make_planted_task(spec);
    const fs::path dir = fs::temp_directory_path() / "laser_qbe_tests" / "task";
    fs::remove_all(dir);
    write_task(task, dir);
    const QbeTask loaded = load_task(dir / "task.json");
    REQUIRE(loaded.queries.size() == task.queries.size());
    REQUIRE(loaded.docs.size() == task.docs.size());
    CHECK(loaded.relevance == task.relevance);
    for (std::size_t i = 0; i < task.queries.size(); ++i) {
        CHECK(loaded.queries[i].id == task.queries[i].id);
        REQUIRE(loaded.queries[i].seq.t() == task.queries[i].seq.t());
        // storage is float32
        for (int r = 0; r < task.queries[i].seq.t(); ++r) {
            for (int c = 0; c < task.queries[i].seq.d(); ++c) {
                REQUIRE(loaded.queries[i].seq.frames()(r, c) ==
                        doctest::Approx(task.queries[i].seq.frames()(r, c)).epsilon(1e-6));
            }
        }
    }
}

TEST_SUITE_END();
