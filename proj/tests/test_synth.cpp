#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "netsep/synth.hpp"
#include "oracles.hpp"

using namespace netsep;
namespace fs = std::filesystem;

namespace {

SourceSpec constant_block(NodeId s0, NodeId s1, NodeId d0, NodeId d1, double rate, double level = 1.0) {
    SourceSpec s;
    s.name = "block";
    s.profile.kind = MixingProfile::Kind::Constant;
    s.profile.level = level;
    s.blocks.push_back({s0, s1, d0, d1, rate});
    return s;
}

}  // namespace

TEST_CASE("rate-one block fills every window") {
    SynthConfig config;
    config.nodes = 4;
    config.windows = 10;
    config.seed = 1;
    const auto out = generate({{constant_block(0, 2, 0, 2, 1.0)}}, config);
    for (std::int64_t t = 0; t < 10; ++t) {
        REQUIRE(out.seq.window(t).size() == 2);  // (0,1) and (1,0); self-loops excluded
        CHECK(out.seq.window_contains(t, {0, 1}));
        CHECK(out.seq.window_contains(t, {1, 0}));
    }
}

TEST_CASE("all-zero profiles give empty windows") {
    SynthConfig config;
    config.nodes = 6;
    config.windows = 8;
    config.seed = 2;
    const auto out = generate({{constant_block(0, 3, 3, 6, 0.7, 0.0)}}, config);
    CHECK(out.seq.total_edges() == 0);
    CHECK(out.seq.num_windows() == 8);
}

TEST_CASE("disjoint square waves alternate between block sizes") {
    SynthConfig config;
    config.nodes = 40;
    config.windows = 480;
    config.seed = 3;
    std::vector<SourceSpec> specs(2);
    specs[0].profile.kind = MixingProfile::Kind::SquareWave;
    specs[0].profile.period = 24;
    specs[0].profile.on_start = 0;
    specs[0].profile.on_len = 12;
    specs[0].blocks.push_back({0, 10, 10, 20, 0.5});  // 100 pairs at rate 0.5
    specs[1].profile.kind = MixingProfile::Kind::SquareWave;
    specs[1].profile.period = 24;
    specs[1].profile.on_start = 12;
    specs[1].profile.on_len = 12;
    specs[1].blocks.push_back({20, 30, 30, 40, 0.2});  // 100 pairs at rate 0.2
    const auto out = generate(specs, config);

    double sum_a = 0, sum_b = 0;
    std::int64_t count_a = 0, count_b = 0;
    for (std::int64_t t = 0; t < config.windows; ++t) {
        if (t % 24 < 12) {
            sum_a += static_cast<double>(out.seq.window(t).size());
            ++count_a;
        } else {
            sum_b += static_cast<double>(out.seq.window(t).size());
            ++count_b;
        }
    }
    // Binomial(100, rate) per window; the mean over 240 windows has sigma
    // sqrt(rate*(1-rate)*100/240).
    const double mean_a = sum_a / static_cast<double>(count_a);
    const double mean_b = sum_b / static_cast<double>(count_b);
    CHECK(std::abs(mean_a - 50.0) < 3.0 * std::sqrt(0.25 * 100.0 / 240.0));
    CHECK(std::abs(mean_b - 20.0) < 3.0 * std::sqrt(0.16 * 100.0 / 240.0));
}

TEST_CASE("generation is reproducible bit for bit") {
    const auto dir = fs::temp_directory_path() / "netsep_synth_tests";
    fs::create_directories(dir);
    SynthConfig config;
    config.nodes = 30;
    config.windows = 50;
    config.seed = 99;
    config.anomaly_count = 10;
    config.anomaly_from = 25;
    const auto specs = builtin_scenario("office+background", config.nodes);

    const auto a = generate(specs, config);
    const auto b = generate(specs, config);
    a.seq.save((dir / "a.nsg").string());
    b.seq.save((dir / "b.nsg").string());
    std::ifstream fa(dir / "a.nsg"), fb(dir / "b.nsg");
    const std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ca == cb);
    REQUIRE(a.anomalies.size() == b.anomalies.size());
    for (std::size_t i = 0; i < a.anomalies.size(); ++i) {
        CHECK(a.anomalies.triples()[i] == b.anomalies.triples()[i]);
    }

    // A worker pool must not change the draw.
    ThreadPool pool(4);
    const auto c = generate(specs, config, &pool);
    c.seq.save((dir / "c.nsg").string());
    std::ifstream fc(dir / "c.nsg");
    const std::string cc((std::istreambuf_iterator<char>(fc)), std::istreambuf_iterator<char>());
    CHECK(ca == cc);
}

TEST_CASE("anomalies only land on zero-probability pairs") {
    SynthConfig config;
    config.nodes = 50;
    config.windows = 60;
    config.seed = 7;
    config.anomaly_count = 25;
    config.anomaly_from = 30;
    const auto specs = builtin_scenario("office+background", config.nodes);
    const auto out = generate(specs, config);
    REQUIRE(out.anomalies.size() == 25);

    // Base probability of a pair under the mixture maximum.
    auto base_rate = [&](Edge e) {
        double p = 0.0;
        for (std::size_t l = 0; l < out.truth.u.size(); ++l) {
            p += out.truth.u[l].row(e.src).dot(out.truth.v[l].row(e.dst));
        }
        return p;
    };
    for (const TemporalEdge& a : out.anomalies.triples()) {
        CHECK(a.window >= 30);
        CHECK(a.window < 60);
        CHECK(base_rate({a.src, a.dst}) == 0.0);
        CHECK(out.seq.window_contains(a.window, {a.src, a.dst}));  // injected and labeled
    }
}

TEST_CASE("per-pair frequency converges to the specified probability") {
    SynthConfig config;
    config.nodes = 12;
    config.windows = 600;
    config.seed = 13;
    const auto out = generate({{constant_block(0, 6, 6, 12, 0.3)}}, config);
    // Chebyshev-style check at 3 sigma for each pair.
    const double sigma = std::sqrt(0.3 * 0.7 / 600.0);
    for (NodeId i = 0; i < 6; ++i) {
        for (NodeId j = 6; j < 12; ++j) {
            std::int64_t hits = 0;
            for (std::int64_t t = 0; t < 600; ++t) {
                if (out.seq.window_contains(t, {i, j})) ++hits;
            }
            const double freq = static_cast<double>(hits) / 600.0;
            CHECK(std::abs(freq - 0.3) < 3.0 * sigma + 1e-12);
        }
    }
}

TEST_CASE("infeasible anomaly injection is an error") {
    SynthConfig config;
    config.nodes = 3;
    config.windows = 4;
    config.seed = 1;
    config.anomaly_count = 1;
    config.anomaly_from = 2;
    // Every off-diagonal pair has positive probability.
    const auto out_specs = std::vector<SourceSpec>{constant_block(0, 3, 0, 3, 0.5)};
    CHECK_THROWS_WITH_AS(generate(out_specs, config), doctest::Contains("infeasible"), DataError);
}

TEST_CASE("mixture probabilities clip at one") {
    SynthConfig config;
    config.nodes = 4;
    config.windows = 20;
    config.seed = 4;
    // Two overlapping blocks, each rate 0.8: the summed rate clips to 1.
    std::vector<SourceSpec> specs = {constant_block(0, 2, 2, 4, 0.8), constant_block(0, 2, 2, 4, 0.8)};
    const auto out = generate(specs, config);
    for (std::int64_t t = 0; t < 20; ++t) {
        CHECK(out.seq.window(t).size() == 4);  // present with probability exactly 1
    }
}

TEST_CASE("declared tau must be divisible by seasonal periods") {
    SynthConfig config;
    config.nodes = 10;
    config.windows = 48;
    config.seed = 5;
    config.tau = 168;
    std::vector<SourceSpec> specs(1);
    specs[0].profile.kind = MixingProfile::Kind::SquareWave;
    specs[0].profile.period = 26;  // does not divide 168
    specs[0].blocks.push_back({0, 5, 5, 10, 0.5});
    CHECK_THROWS_AS(generate(specs, config), DataError);
    specs[0].profile.period = 24;
    CHECK_NOTHROW(generate(specs, config));
}

TEST_CASE("scenario files round trip through the loader") {
    const auto dir = fs::temp_directory_path() / "netsep_synth_tests";
    fs::create_directories(dir);
    const auto path = (dir / "scenario.json").string();
    {
        std::ofstream out(path);
        out << R"({
  "nodes": 24, "windows": 96, "seed": 11, "anomalies": 5, "anomaly_from": 48, "tau": 24,
  "sources": [
    {"name": "office", "profile": {"kind": "square", "period": 24, "on_start": 8, "on_len": 10},
     "blocks": [{"src": [0, 12], "dst": [12, 18], "rate": 1.0}]},
    {"name": "steady", "profile": {"kind": "constant", "level": 0.9},
     "blocks": [{"src": [18, 24], "dst": [0, 6], "rate": 0.4}]}
  ]
})";
    }
    const auto [config, specs] = load_scenario(path);
    CHECK(config.nodes == 24);
    CHECK(config.windows == 96);
    CHECK(config.anomaly_count == 5);
    CHECK(config.anomaly_from == 48);
    REQUIRE(config.tau.has_value());
    CHECK(*config.tau == 24);
    REQUIRE(specs.size() == 2);
    CHECK(specs[0].profile.kind == MixingProfile::Kind::SquareWave);
    CHECK(specs[1].profile.level == 0.9);
    CHECK(specs[1].blocks[0].rate == 0.4);
    CHECK_NOTHROW(generate(specs, config));

    CHECK_THROWS_AS(load_scenario((dir / "missing.json").string()), DataError);
}

TEST_CASE("unknown scenario names are rejected") {
    CHECK_THROWS_AS(builtin_scenario("office+nonsense", 100), DataError);
    CHECK(builtin_scenario("office+background+admin-burst", 200).size() == 3);
}
