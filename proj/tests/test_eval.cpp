#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "netsep/eval.hpp"
#include "netsep/synth.hpp"
#include "oracles.hpp"

using namespace netsep;

TEST_CASE("auc on hand-checked lists") {
    CHECK(auc(std::vector<double>{2, 3}, std::vector<double>{1}) == 1.0);
    CHECK(auc(std::vector<double>{1}, std::vector<double>{1}) == 0.5);
    CHECK(auc(std::vector<double>{1, 3}, std::vector<double>{2, 4}) == 0.25);
    CHECK_THROWS_AS(auc({}, std::vector<double>{1.0}), DataError);
    CHECK_THROWS_AS(auc(std::vector<double>{1.0}, {}), DataError);
}

TEST_CASE("auc equals brute-force pair counting exactly") {
    Rng rng(404);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t np = 1 + rng.index(200);
        const std::size_t nn = 1 + rng.index(200);
        std::vector<double> pos(np), neg(nn);
        // Coarse grid scores force plenty of ties.
        for (auto& x : pos) x = static_cast<double>(rng.index(20)) / 4.0;
        for (auto& x : neg) x = static_cast<double>(rng.index(20)) / 4.0;
        CHECK(auc(pos, neg) == oracle::brute_force_auc(pos, neg));
    }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
    Rng rng(405);
    std::vector<double> pos(150), neg(170);
    for (auto& x : pos) x = rng.unit() * 4.0;
    for (auto& x : neg) x = rng.unit() * 4.0;
    const double base = auc(pos, neg);
    auto transform = [](double x) { return std::exp(0.5 * x) + 3.0; };
    for (auto& x : pos) x = transform(x);
    for (auto& x : neg) x = transform(x);
    CHECK(auc(pos, neg) == doctest::Approx(base).epsilon(1e-15));
}

TEST_CASE("ndcg on hand-checked rankings") {
    auto item = [](double score, int label) { return ScoredEdge{0, 0, 1, score, label}; };
    SUBCASE("ideal ranking scores one") {
        const std::vector<ScoredEdge> ranked = {item(0.1, 1), item(0.2, 1), item(0.3, 0),
                                                item(0.4, 0), item(0.5, 0)};
        CHECK(ndcg_at(ranked, 1.0) == 1.0);
    }
    SUBCASE("no positives scores zero") {
        const std::vector<ScoredEdge> ranked = {item(0.1, 0), item(0.2, 0)};
        CHECK(ndcg_at(ranked, 1.0) == 0.0);
        CHECK(ndcg_at({}, 0.5) == 0.0);
    }
    SUBCASE("single positive at rank 2 of 5") {
        const std::vector<ScoredEdge> ranked = {item(0.1, 0), item(0.2, 1), item(0.3, 0),
                                                item(0.4, 0), item(0.5, 0)};
        CHECK(ndcg_at(ranked, 1.0) == doctest::Approx(1.0 / std::log2(3.0)).epsilon(1e-12));
        CHECK(ndcg_at(ranked, 1.0) == doctest::Approx(0.6309).epsilon(1e-3));
    }
    SUBCASE("cutoff counts via ceiling") {
        // 10 items, fraction 0.25 -> k = 3; positive at rank 4 is outside.
        std::vector<ScoredEdge> ranked;
        for (int i = 0; i < 10; ++i) ranked.push_back(item(0.1 * (i + 1), i == 3 ? 1 : 0));
        CHECK(ndcg_at(ranked, 0.25) == 0.0);
        CHECK(ndcg_at(ranked, 0.4) > 0.0);  // k = 4 reaches it
    }
}

TEST_CASE("ndcg matches the direct formula on random rankings") {
    Rng rng(505);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<ScoredEdge> items;
        const std::size_t n = 5 + rng.index(200);
        for (std::size_t i = 0; i < n; ++i) {
            items.push_back({static_cast<std::int64_t>(rng.index(8)),
                             static_cast<NodeId>(rng.index(30)), static_cast<NodeId>(1 + rng.index(30)),
                             static_cast<double>(rng.index(12)) / 3.0, rng.unit() < 0.1 ? 1 : 0});
        }
        const double frac = 0.01 + 0.99 * rng.unit();
        const auto ranked = rank_anomalies(items, 1.0);
        CHECK(ndcg_at(ranked, frac) == oracle::direct_ndcg(items, frac));
    }
}

TEST_CASE("ndcg does not depend on the input shuffle beyond the tie-break") {
    Rng rng(506);
    std::vector<ScoredEdge> items;
    for (int i = 0; i < 120; ++i) {
        items.push_back({i % 5, static_cast<NodeId>(i), static_cast<NodeId>(i + 1),
                         static_cast<double>(rng.index(6)), i % 7 == 0 ? 1 : 0});
    }
    const auto ranked_a = rank_anomalies(items, 1.0);
    std::reverse(items.begin(), items.end());
    const auto ranked_b = rank_anomalies(items, 1.0);
    CHECK(ndcg_at(ranked_a, 0.1) == ndcg_at(ranked_b, 0.1));
}

TEST_CASE("edgebank variants") {
    SUBCASE("training edge is remembered by both variants") {
        EdgeBank inf(EdgeBank::Variant::Infinite);
        EdgeBank win(EdgeBank::Variant::Windowed, 168);
        inf.observe(std::vector<Edge>{{1, 2}}, 0);
        win.observe(std::vector<Edge>{{1, 2}}, 0);
        CHECK(inf.score({1, 2}, 1) == 1.0);
        CHECK(win.score({1, 2}, 1) == 1.0);
    }
    SUBCASE("window cutoff at exactly one week") {
        EdgeBank inf(EdgeBank::Variant::Infinite);
        EdgeBank win(EdgeBank::Variant::Windowed, 168);
        inf.observe(std::vector<Edge>{{3, 4}}, 0);
        win.observe(std::vector<Edge>{{3, 4}}, 0);
        CHECK(inf.score({3, 4}, 169) == 1.0);
        CHECK(win.score({3, 4}, 168) == 1.0);  // exactly w windows ago: still in
        CHECK(win.score({3, 4}, 169) == 0.0);  // 169 windows ago: out
    }
    SUBCASE("never-seen edge scores zero") {
        EdgeBank inf(EdgeBank::Variant::Infinite);
        CHECK(inf.score({5, 6}, 10) == 0.0);
    }
    SUBCASE("infinite memory grows monotonically") {
        EdgeBank inf(EdgeBank::Variant::Infinite);
        Rng rng(606);
        std::size_t prev = 0;
        for (std::int64_t t = 0; t < 50; ++t) {
            std::vector<Edge> edges;
            for (int e = 0; e < 5; ++e) {
                edges.push_back({static_cast<NodeId>(rng.index(12)), static_cast<NodeId>(rng.index(12))});
            }
            inf.observe(edges, t);
            CHECK(inf.memory_size() >= prev);
            prev = inf.memory_size();
        }
    }
}

TEST_CASE("edgebank matches a brute-force memory scorer on random streams") {
    Rng rng(707);
    for (int stream = 0; stream < 1000; ++stream) {
        const int n = 4 + static_cast<int>(rng.index(8));
        const std::int64_t t_total = 4 + static_cast<std::int64_t>(rng.index(24));
        const std::int64_t w = 1 + static_cast<std::int64_t>(rng.index(6));
        auto windows = oracle::random_windows(n, static_cast<int>(t_total), 0.1, 708 + stream);

        EdgeBank inf(EdgeBank::Variant::Infinite);
        EdgeBank win(EdgeBank::Variant::Windowed, w);
        for (std::int64_t t = 0; t < t_total; ++t) {
            // Query a few random pairs before observing the window.
            for (int q = 0; q < 4; ++q) {
                const Edge e{static_cast<NodeId>(rng.index(static_cast<std::uint64_t>(n))),
                             static_cast<NodeId>(rng.index(static_cast<std::uint64_t>(n)))};
                CHECK(inf.score(e, t) == oracle::brute_force_memory_score(windows, e, t, true, w));
                CHECK(win.score(e, t) == oracle::brute_force_memory_score(windows, e, t, false, w));
            }
            inf.observe(windows[static_cast<std::size_t>(t)], t);
            win.observe(windows[static_cast<std::size_t>(t)], t);
        }
    }
}

TEST_CASE("negative samplers") {
    // Three windows of training data over 30 nodes, two test windows.
    auto windows = oracle::random_windows(30, 5, 0.08, 808);
    const auto seq = oracle::make_sequence(30, std::move(windows));
    const auto pools = NegativePools::build(seq, {0, 3}, {3, 5});

    SUBCASE("counts, collisions, self-loops") {
        const auto positives = seq.window(3);
        for (NegativeKind kind : {NegativeKind::Random, NegativeKind::Historical}) {
            NegativeSampler sampler(kind, pools, 1);
            const auto negs = sampler.sample(positives);
            CHECK(negs.size() == positives.size());
            for (const Edge& e : negs) {
                CHECK(e.src != e.dst);
                CHECK_FALSE(std::binary_search(positives.begin(), positives.end(), e));
            }
        }
    }
    SUBCASE("historical negatives come from the training pairs") {
        NegativeSampler sampler(NegativeKind::Historical, pools, 2);
        for (const Edge& e : sampler.sample(seq.window(4))) {
            CHECK(std::binary_search(pools.train_pairs.begin(), pools.train_pairs.end(), e));
        }
    }
    SUBCASE("inductive negatives are test-only pairs") {
        NegativeSampler sampler(NegativeKind::Inductive, pools, 3);
        for (const Edge& e : sampler.sample(seq.window(3))) {
            CHECK(std::binary_search(pools.test_only_pairs.begin(), pools.test_only_pairs.end(), e));
            CHECK_FALSE(std::binary_search(pools.train_pairs.begin(), pools.train_pairs.end(), e));
        }
    }
    SUBCASE("exhausted pool skips the window") {
        // Single training pair which is also the current window: nothing left.
        std::vector<std::vector<Edge>> tiny = {{{0, 1}}, {{0, 1}}};
        const auto tiny_seq = oracle::make_sequence(3, std::move(tiny));
        const auto tiny_pools = NegativePools::build(tiny_seq, {0, 1}, {1, 2});
        NegativeSampler sampler(NegativeKind::Historical, tiny_pools, 4);
        CHECK(sampler.sample(tiny_seq.window(1)).empty());
    }
    SUBCASE("fixed seed reproduces the draw") {
        NegativeSampler a(NegativeKind::Random, pools, 42);
        NegativeSampler b(NegativeKind::Random, pools, 42);
        const auto na = a.sample(seq.window(3));
        const auto nb = b.sample(seq.window(3));
        REQUIRE(na.size() == nb.size());
        for (std::size_t i = 0; i < na.size(); ++i) CHECK(na[i] == nb[i]);
    }
}

namespace {

// Deterministic alternating scenario: two anti-phase sources, rates 1.
SynthResult alternating_data(NodeId n, std::int64_t t, std::int64_t anomalies,
                             std::int64_t anomaly_from) {
    SynthConfig config;
    config.nodes = n;
    config.windows = t;
    config.seed = 1234;
    config.anomaly_count = anomalies;
    config.anomaly_from = anomaly_from;
    std::vector<SourceSpec> specs(2);
    specs[0].name = "day";
    specs[0].profile.kind = MixingProfile::Kind::SquareWave;
    specs[0].profile.period = 24;
    specs[0].profile.on_start = 0;
    specs[0].profile.on_len = 12;
    specs[0].blocks.push_back({0, n / 2, n / 2, 3 * n / 4, 1.0});
    specs[1].name = "night";
    specs[1].profile.kind = MixingProfile::Kind::SquareWave;
    specs[1].profile.period = 24;
    specs[1].profile.on_start = 12;
    specs[1].profile.on_len = 12;
    specs[1].blocks.push_back({3 * n / 4, n, 0, n / 4, 1.0});
    return generate(specs, config);
}

}  // namespace

TEST_CASE("edgebank baselines on strictly repeating traffic") {
    const auto data = alternating_data(40, 96, 0, 0);
    const auto [train, valid, test] = data.seq.split(48, 0);

    EdgeBankScorer scorer(EdgeBank::Variant::Infinite, kDefaultTau, data.seq, valid.begin);
    EvalOptions options;
    options.tasks = {Task::Random, Task::Historical};
    options.runs = 3;
    options.seed = 5;
    const auto report = run_eval(scorer, data.seq, train, valid, test, nullptr, options);

    // Every historical negative was seen in training, so all comparisons tie.
    CHECK(report.tasks.at("historical").auc_mean == 0.5);
    // Random negatives almost never hit the tiny support.
    CHECK(report.tasks.at("random").auc_mean > 0.9);
}

TEST_CASE("snmf detects planted anomalies on synthetic data") {
    const auto data = alternating_data(40, 96, 20, 48);
    const auto [train, valid, test] = data.seq.split(48, 0);

    const TrainContext ctx(data.seq, train);
    Hyperparams hyper;
    hyper.K = 2;
    hyper.L = 2;
    hyper.lambda1 = 1e-3;
    hyper.lambda2 = 1e-5;
    hyper.max_iters = 300;
    hyper.tol = 1e-8;
    hyper.seed = 6;
    const auto fitres = fit(ctx, hyper);

    SnmfScorer scorer(fitres.model, MixingHistory::from_mixing_matrix(fitres.model.W, 24));
    EvalOptions options;
    options.tasks = {Task::Anomaly, Task::Random, Task::Historical, Task::Inductive};
    options.runs = 2;
    options.seed = 9;
    const auto report = run_eval(scorer, data.seq, train, valid, test, &data.anomalies, options);

    CHECK(report.tasks.at("anomaly").auc_mean > 0.95);
    CHECK(report.tasks.at("anomaly").ndcg_mean > 0.5);
    CHECK(report.tasks.at("random").auc_mean > 0.9);
    CHECK(report.tasks.at("historical").auc_mean > 0.8);
}

TEST_CASE("run_eval is deterministic and honors missing labels") {
    const auto data = alternating_data(24, 72, 0, 0);
    const auto [train, valid, test] = data.seq.split(48, 0);
    const TrainContext ctx(data.seq, train);
    Hyperparams hyper;
    hyper.K = 1;
    hyper.L = 2;
    hyper.max_iters = 100;
    hyper.seed = 2;
    const auto fitres = fit(ctx, hyper);

    EvalOptions options;
    options.runs = 2;
    options.seed = 31;
    SnmfScorer s1(fitres.model, MixingHistory::from_mixing_matrix(fitres.model.W, 24));
    const auto r1 = run_eval(s1, data.seq, train, valid, test, nullptr, options);
    SnmfScorer s2(fitres.model, MixingHistory::from_mixing_matrix(fitres.model.W, 24));
    const auto r2 = run_eval(s2, data.seq, train, valid, test, nullptr, options);
    CHECK(r1.to_json() == r2.to_json());
    CHECK(r1.tasks.count("anomaly") == 0);  // no labels -> task dropped with a warning

    // A worker pool must not change the report.
    ThreadPool pool(4);
    SnmfScorer s3(fitres.model, MixingHistory::from_mixing_matrix(fitres.model.W, 24));
    const auto r3 = run_eval(s3, data.seq, train, valid, test, nullptr, options, &pool);
    CHECK(r3.to_json() == r1.to_json());
}

TEST_CASE("report serialization carries per-run arrays and summary stats") {
    const auto data = alternating_data(24, 72, 8, 48);
    const auto [train, valid, test] = data.seq.split(48, 0);
    const TrainContext ctx(data.seq, train);
    Hyperparams hyper;
    hyper.K = 1;
    hyper.L = 2;
    hyper.max_iters = 80;
    hyper.seed = 12;
    const auto fitres = fit(ctx, hyper);

    SnmfScorer scorer(fitres.model, MixingHistory::from_mixing_matrix(fitres.model.W, 24));
    EvalOptions options;
    options.runs = 4;
    options.seed = 77;
    const auto report = run_eval(scorer, data.seq, train, valid, test, &data.anomalies, options);

    for (const auto& [name, res] : report.tasks) {
        CHECK(res.auc_runs.size() == 4);
        for (double x : res.auc_runs) {
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
        }
        CHECK(res.auc_std >= 0.0);
    }
    const std::string json = report.to_json();
    CHECK(json.find("\"anomaly\"") != std::string::npos);
    CHECK(json.find("\"ndcg\"") != std::string::npos);
    CHECK(json.find("\"auc_mean\"") != std::string::npos);
}
