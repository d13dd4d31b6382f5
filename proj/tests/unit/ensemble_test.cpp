#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "gifcat/ensemble.hpp"
#include "gifcat/error.hpp"
#include "gifcat/metrics.hpp"
#include "gifcat/rng.hpp"
#include "support/tempdir.hpp"

using namespace gifcat;

namespace {

PredictionMatrix make_matrix(std::vector<std::string> idx, std::vector<std::string> names,
                             std::vector<double> scores,
                             ScoreKind kind = ScoreKind::probability) {
    PredictionMatrix m;
    m.idx = std::move(idx);
    m.names = std::move(names);
    m.scores = std::move(scores);
    m.kind = kind;
    return m;
}

PredictionMatrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    PredictionMatrix m;
    for (std::size_t r = 0; r < rows; ++r) m.idx.push_back("t" + std::to_string(r));
    for (std::size_t c = 0; c < cols; ++c) m.names.push_back("c" + std::to_string(c));
    m.scores.resize(rows * cols);
    for (double& s : m.scores) s = rng.next_double();
    return m;
}

} // namespace

TEST_CASE("average_runs of identical matrices is that matrix") {
    Rng rng(1);
    const PredictionMatrix m = random_matrix(rng, 4, 3);
    const PredictionMatrix avg = average_runs({m, m, m});
    for (std::size_t i = 0; i < m.scores.size(); ++i) {
        CHECK(avg.scores[i] == doctest::Approx(m.scores[i]).epsilon(1e-15));
    }
}

TEST_CASE("average_runs hand case") {
    const auto a = make_matrix({"t"}, {"x", "y"}, {0.2, 0.8});
    const auto b = make_matrix({"t"}, {"x", "y"}, {0.4, 0.6});
    const PredictionMatrix avg = average_runs({a, b});
    CHECK(avg.scores[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(avg.scores[1] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(avg.kind == ScoreKind::probability);
}

TEST_CASE("average_runs equals the per-cell brute force and respects bounds") {
    Rng rng(2);
    std::vector<PredictionMatrix> runs;
    for (int k = 0; k < 10; ++k) {
        Rng local(100 + k);
        runs.push_back(random_matrix(local, 6, 5));
    }
    const PredictionMatrix avg = average_runs(runs);
    for (std::size_t i = 0; i < avg.scores.size(); ++i) {
        double sum = 0.0, lo = 1.0, hi = 0.0;
        for (const auto& r : runs) {
            sum += r.scores[i];
            lo = std::min(lo, r.scores[i]);
            hi = std::max(hi, r.scores[i]);
        }
        CHECK(avg.scores[i] == doctest::Approx(sum / 10.0).epsilon(1e-12));
        CHECK(avg.scores[i] >= lo);
        CHECK(avg.scores[i] <= hi);
    }

    // permutation invariance
    std::vector<PredictionMatrix> shuffled = runs;
    rng.shuffle(shuffled);
    const PredictionMatrix avg2 = average_runs(shuffled);
    for (std::size_t i = 0; i < avg.scores.size(); ++i) {
        CHECK(std::abs(avg.scores[i] - avg2.scores[i]) <= 1e-15);
    }
}

TEST_CASE("average_runs validates inputs") {
    CHECK_THROWS_AS(average_runs({}), ValidationError);
    const auto a = make_matrix({"t1"}, {"x"}, {0.5});
    const auto b = make_matrix({"t2"}, {"x"}, {0.5});
    CHECK_THROWS_AS(average_runs({a, b}), ValidationError);  // idx mismatch
    auto fused = a;
    fused.kind = ScoreKind::fused;
    CHECK_THROWS_AS(average_runs({fused}), ValidationError);
}

TEST_CASE("power_weighted_sum with one family, w=1, N=1 is the identity") {
    Rng rng(3);
    const PredictionMatrix m = random_matrix(rng, 5, 4);
    const PredictionMatrix fused = power_weighted_sum({m}, {1.0, {1.0}});
    CHECK(fused.kind == ScoreKind::fused);
    for (std::size_t i = 0; i < m.scores.size(); ++i) {
        CHECK(fused.scores[i] == m.scores[i]);
    }
}

TEST_CASE("power_weighted_sum reproduces the tuned-configuration spot value") {
    const auto p1 = make_matrix({"t"}, {"c"}, {0.9});
    const auto p2 = make_matrix({"t"}, {"c"}, {0.4});
    const auto p3 = make_matrix({"t"}, {"c"}, {0.5});
    const PredictionMatrix fused = power_weighted_sum({p1, p2, p3}, {1.8, {3.0, 1.8, 0.8}});
    // independent route: exp(N log p) instead of pow
    const double expected = 3.0 * std::exp(1.8 * std::log(0.9)) +
                            1.8 * std::exp(1.8 * std::log(0.4)) +
                            0.8 * std::exp(1.8 * std::log(0.5));
    CHECK(fused.scores[0] == doctest::Approx(expected).epsilon(1e-9));
    CHECK(fused.scores[0] == doctest::Approx(3.057412028854388).epsilon(1e-9));
}

TEST_CASE("power_weighted_sum of all-ones cells is exactly the weight sum") {
    const auto ones = make_matrix({"t"}, {"c"}, {1.0});
    const PredictionMatrix fused =
        power_weighted_sum({ones, ones, ones}, {2.7, {3.0, 1.8, 0.8}});
    CHECK(fused.scores[0] == 3.0 + 1.8 + 0.8);
}

TEST_CASE("power_weighted_sum stays within [0, sum of weights]") {
    Rng rng(4);
    const auto a = random_matrix(rng, 8, 6);
    const auto b = random_matrix(rng, 8, 6);
    PredictionMatrix bb = b;
    bb.idx = a.idx;
    bb.names = a.names;
    const EnsembleConfig cfg{1.8, {3.0, 0.7}};
    const PredictionMatrix fused = power_weighted_sum({a, bb}, cfg);
    for (double s : fused.scores) {
        CHECK(s >= 0.0);
        CHECK(s <= 3.7);
    }
}

TEST_CASE("raising one probability strictly raises the fused score") {
    const auto lo = make_matrix({"t"}, {"c"}, {0.4});
    const auto hi = make_matrix({"t"}, {"c"}, {0.41});
    const auto other = make_matrix({"t"}, {"c"}, {0.6});
    const EnsembleConfig cfg{1.8, {2.0, 1.0}};
    CHECK(power_weighted_sum({hi, other}, cfg).scores[0] >
          power_weighted_sum({lo, other}, cfg).scores[0]);
}

TEST_CASE("power_weighted_sum validates configuration and alignment") {
    const auto a = make_matrix({"t"}, {"c"}, {0.5});
    CHECK_THROWS_AS(power_weighted_sum({a}, {0.0, {1.0}}), ValidationError);     // N <= 0
    CHECK_THROWS_AS(power_weighted_sum({a}, {1.0, {-1.0}}), ValidationError);    // w <= 0
    CHECK_THROWS_AS(power_weighted_sum({a}, {1.0, {1.0, 2.0}}), ValidationError);  // arity
    const auto b = make_matrix({"other"}, {"c"}, {0.5});
    CHECK_THROWS_AS(power_weighted_sum({a, b}, {1.0, {1.0, 1.0}}), ValidationError);
    CHECK_THROWS_AS(power_weighted_sum({}, {1.0, {}}), ValidationError);
}

TEST_CASE("top_k returns all categories in score order when k == C") {
    const LabelSpace ls = LabelSpace::from_names({"a", "b", "c", "d", "e", "f"});
    const auto m = make_matrix({"t"}, ls.names(), {0.1, 0.9, 0.3, 0.8, 0.2, 0.5},
                               ScoreKind::fused);
    const auto picks = top_k(m, 6, ls, std::vector<std::size_t>(6, 0));
    CHECK(picks.at("t") == std::vector<std::string>{"b", "d", "f", "c", "e", "a"});
}

TEST_CASE("top_k breaks exact ties by prior then name") {
    const LabelSpace ls = LabelSpace::from_names({"a", "b", "c", "d"});
    const auto m = make_matrix({"t"}, ls.names(), {0.5, 0.5, 0.5, 0.5}, ScoreKind::fused);
    const std::vector<std::size_t> prior = {1, 7, 7, 3};
    const auto picks = top_k(m, 2, ls, prior);
    // scores all equal: priors pick b and c (7), tie between them -> "b" < "c"
    CHECK(picks.at("t") == std::vector<std::string>{"b", "c"});
}

TEST_CASE("top_k equals a full-sort oracle on random scores") {
    Rng rng(6);
    std::vector<std::string> names;
    for (int c = 0; c < 43; ++c) {
        names.push_back((c < 10 ? "cat0" : "cat") + std::to_string(c));
    }
    const LabelSpace ls = LabelSpace::from_names(names);
    std::vector<std::size_t> prior(43);
    for (auto& p : prior) p = rng.next_index(100);
    for (int trial = 0; trial < 50; ++trial) {
        PredictionMatrix m;
        m.idx = {"t"};
        m.names = ls.names();
        m.kind = ScoreKind::fused;
        m.scores.resize(43);
        for (double& s : m.scores) s = rng.next_index(8) * 0.125;  // force ties
        const auto picks = top_k(m, 6, ls, prior);

        std::vector<std::size_t> order(43);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (m.scores[a] != m.scores[b]) return m.scores[a] > m.scores[b];
            if (prior[a] != prior[b]) return prior[a] > prior[b];
            return ls.name(a) < ls.name(b);
        });
        std::vector<std::string> expected;
        for (int i = 0; i < 6; ++i) expected.push_back(ls.name(order[i]));
        CHECK(picks.at("t") == expected);
    }
}

TEST_CASE("top_k rejects k above C") {
    const LabelSpace ls = LabelSpace::from_names({"a", "b"});
    const auto m = make_matrix({"t"}, ls.names(), {0.5, 0.6}, ScoreKind::fused);
    CHECK_THROWS_AS(top_k(m, 3, ls, {0, 0}), ValidationError);
}

TEST_CASE("argmax is invariant under the power for a single family") {
    Rng rng(8);
    std::vector<std::string> names;
    for (int c = 0; c < 20; ++c) names.push_back("n" + std::to_string(c));
    const LabelSpace ls = LabelSpace::from_names(names);
    const std::vector<std::size_t> prior(20, 0);
    for (int trial = 0; trial < 30; ++trial) {
        PredictionMatrix m = random_matrix(rng, 3, 20);
        m.names = ls.names();
        const auto base = top_k(power_weighted_sum({m}, {1.0, {1.0}}), 6, ls, prior);
        for (double n : {0.5, 1.8, 3.0}) {
            const auto powered = top_k(power_weighted_sum({m}, {n, {1.0}}), 6, ls, prior);
            CHECK(powered == base);
        }
    }
}

TEST_CASE("grid_search returns the single point of a one-point grid") {
    const LabelSpace ls = LabelSpace::from_names({"a", "b", "c", "d", "e", "f", "g"});
    ThreadSet gold;
    gold.labeled = true;
    gold.threads = {{"t1", "", "", std::vector<std::string>{"a"}, {}},
                    {"t2", "", "", std::vector<std::string>{"b", "c"}, {}}};
    Rng rng(9);
    PredictionMatrix fam = random_matrix(rng, 2, 7);
    fam.idx = {"t1", "t2"};
    fam.names = ls.names();
    const std::vector<std::size_t> prior(7, 0);
    const GridSearchResult r =
        grid_search({fam}, gold, ls, prior, {1.0}, {{1.0}});
    CHECK(r.config.power == 1.0);
    CHECK(r.config.weights == std::vector<double>{1.0});
}

TEST_CASE("grid_search beats or matches the identity configuration it contains") {
    const LabelSpace ls = LabelSpace::from_names({"a", "b", "c", "d", "e", "f", "g", "h"});
    ThreadSet gold;
    gold.labeled = true;
    Rng rng(10);
    std::vector<PredictionMatrix> fams;
    for (int f = 0; f < 3; ++f) {
        Rng local(50 + f);
        PredictionMatrix m = random_matrix(local, 12, 8);
        m.names = ls.names();
        fams.push_back(std::move(m));
    }
    for (std::size_t t = 0; t < 12; ++t) {
        std::set<std::string> cats;
        while (cats.size() < 1 + rng.next_index(3)) {
            cats.insert(ls.name(rng.next_index(8)));
        }
        gold.threads.push_back({"t" + std::to_string(t), "", "",
                                std::vector<std::string>(cats.begin(), cats.end()), {}});
    }
    const std::vector<std::size_t> prior(8, 0);
    const std::vector<double> powers = {0.5, 1.0, 1.8};
    const std::vector<std::vector<double>> weights = {
        {1.0, 1.0, 1.0}, {3.0, 1.8, 0.8}, {0.5, 1.0, 2.0}};
    const GridSearchResult best = grid_search(fams, gold, ls, prior, powers, weights);

    const PredictionMatrix identity_fused = power_weighted_sum(fams, {1.0, {1.0, 1.0, 1.0}});
    const double identity_score =
        mean_recall_at_6(top_k(identity_fused, 6, ls, prior), gold).mean;
    CHECK(best.score >= identity_score);

    // the reported score is what the reported config actually achieves
    const PredictionMatrix refused = power_weighted_sum(fams, best.config);
    CHECK(mean_recall_at_6(top_k(refused, 6, ls, prior), gold).mean ==
          doctest::Approx(best.score).epsilon(1e-15));
}

TEST_CASE("grid_search matches hand evaluation on a three-point grid") {
    const LabelSpace ls = LabelSpace::from_names({"a", "b", "c", "d", "e", "f"});
    ThreadSet gold;
    gold.labeled = true;
    gold.threads = {{"t1", "", "", std::vector<std::string>{"a", "b"}, {}}};
    // family 1 favours a..f in order; family 2 reversed
    const auto f1 = make_matrix({"t1"}, ls.names(), {0.9, 0.8, 0.7, 0.6, 0.5, 0.4});
    const auto f2 = make_matrix({"t1"}, ls.names(), {0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
    const std::vector<std::size_t> prior(6, 0);
    const std::vector<double> powers = {1.0, 2.0};
    const std::vector<std::vector<double>> weights = {{1.0, 1.0}, {2.0, 1.0}};
    const GridSearchResult best = grid_search({f1, f2}, gold, ls, prior, powers, weights);
    // with k == C == 6 every configuration scores a full recall of 1
    CHECK(best.score == 1.0);
    // deterministic tie-break: first grid point in iteration order
    CHECK(best.config.power == 1.0);
    CHECK(best.config.weights == std::vector<double>{1.0, 1.0});
}

TEST_CASE("grid_search rejects an empty grid") {
    const LabelSpace ls = LabelSpace::from_names({"a"});
    ThreadSet gold;
    gold.labeled = true;
    CHECK_THROWS_AS(grid_search({}, gold, ls, {0}, {}, {{1.0}}), ValidationError);
    CHECK_THROWS_AS(grid_search({}, gold, ls, {0}, {1.0}, {}), ValidationError);
}

TEST_CASE("default grids include the identity and tuned points") {
    const auto powers = default_power_grid();
    CHECK(std::count(powers.begin(), powers.end(), 1.0) == 1);
    CHECK(std::count(powers.begin(), powers.end(), 1.8) == 1);
    const auto weights = default_weight_grid(3);
    const bool has_uniform = std::any_of(weights.begin(), weights.end(), [](const auto& w) {
        return w == std::vector<double>{3.0, 3.0, 3.0};
    });
    const bool has_tuned = std::any_of(weights.begin(), weights.end(), [](const auto& w) {
        return w == std::vector<double>{3.0, 1.8, 0.8};
    });
    CHECK(has_uniform);
    CHECK(has_tuned);
    for (const auto& w : weights) {
        CHECK(*std::max_element(w.begin(), w.end()) == 3.0);
    }
}

TEST_CASE("prediction matrices check alignment against a thread set") {
    ThreadSet ts;
    ts.threads = {{"t1", "", "", {}, {}}, {"t2", "", "", {}, {}}};
    const auto aligned = make_matrix({"t1", "t2"}, {"c"}, {0.1, 0.2});
    CHECK_NOTHROW(aligned.check_alignment(ts));
    const auto reordered = make_matrix({"t2", "t1"}, {"c"}, {0.1, 0.2});
    CHECK_THROWS_AS(reordered.check_alignment(ts), ValidationError);
    const auto short_m = make_matrix({"t1"}, {"c"}, {0.1});
    CHECK_THROWS_AS(short_m.check_alignment(ts), ValidationError);
}

TEST_CASE("scores csv round trips through disk") {
    testsup::TempDir dir;
    Rng rng(12);
    const PredictionMatrix m = random_matrix(rng, 7, 5);
    const std::string path = dir.file("scores.csv");
    write_scores_csv(path, m);
    const PredictionMatrix back = read_scores_csv(path);
    CHECK(back.idx == m.idx);
    CHECK(back.names == m.names);
    REQUIRE(back.scores.size() == m.scores.size());
    for (std::size_t i = 0; i < m.scores.size(); ++i) {
        CHECK(back.scores[i] == doctest::Approx(m.scores[i]).epsilon(1e-9));
    }
}

TEST_CASE("submission files round trip") {
    testsup::TempDir dir;
    std::unordered_map<std::string, std::vector<std::string>> preds;
    preds["t1"] = {"a", "b", "c", "d", "e", "f"};
    preds["t2"] = {"f", "e", "d", "c", "b", "a"};
    const std::string path = dir.file("submission.jsonl");
    write_submission(path, {"t1", "t2"}, preds);
    CHECK(read_submission(path) == preds);
}

TEST_CASE("run manifest loads and resolves relative paths") {
    testsup::TempDir dir;
    const std::string manifest_path = dir.file("manifest.json");
    {
        std::ofstream out(manifest_path);
        out << R"({"families":[
          {"name":"A","weight":3.0,"runs":["a1.csv","a2.csv"]},
          {"name":"B","runs":["/abs/b1.csv"]}
        ]})";
    }
    const RunManifest m = RunManifest::load(manifest_path);
    REQUIRE(m.families.size() == 2);
    CHECK(m.families[0].name == "A");
    CHECK(m.families[0].weight == 3.0);
    CHECK(m.families[0].run_paths == std::vector<std::string>{dir.file("a1.csv"),
                                                              dir.file("a2.csv")});
    CHECK(m.families[1].weight == 1.0);
    CHECK(m.families[1].run_paths == std::vector<std::string>{"/abs/b1.csv"});
}

TEST_CASE("run manifest rejects empty or malformed content") {
    testsup::TempDir dir;
    const std::string path = dir.file("bad.json");
    {
        std::ofstream out(path);
        out << R"({"families":[]})";
    }
    CHECK_THROWS_AS(RunManifest::load(path), ValidationError);
    {
        std::ofstream out(path);
        out << "not json";
    }
    CHECK_THROWS_AS(RunManifest::load(path), ParseError);
}
