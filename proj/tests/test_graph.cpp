#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <zlib.h>

#include "netsep/graph.hpp"
#include "oracles.hpp"

using namespace netsep;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "netsep_graph_tests";
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

WindowedGraphSequence ingest_events(
    const std::vector<std::tuple<std::int64_t, std::string, std::string>>& events,
    std::int64_t window_seconds) {
    IngestBuilder builder;
    for (const auto& [ts, src, dst] : events) builder.add(ts, src, dst);
    return builder.finalize(window_seconds);
}

}  // namespace

TEST_CASE("windowing and deduplication") {
    const auto seq = ingest_events({{0, "a", "b"}, {10, "a", "b"}, {3600, "b", "a"}}, 3600);
    REQUIRE(seq.num_windows() == 2);
    CHECK(seq.num_nodes() == 2);
    const NodeId a = seq.nodes().id_of("a");
    const NodeId b = seq.nodes().id_of("b");
    REQUIRE(seq.window(0).size() == 1);
    CHECK(seq.window(0)[0] == Edge{a, b});
    REQUIRE(seq.window(1).size() == 1);
    CHECK(seq.window(1)[0] == Edge{b, a});
    CHECK(seq.total_edges() == 2);
}

TEST_CASE("self-loop events are dropped but keep their window") {
    const auto seq = ingest_events({{5, "a", "a"}}, 3600);
    REQUIRE(seq.num_windows() == 1);
    CHECK(seq.window(0).empty());
    CHECK(seq.num_nodes() == 1);
}

TEST_CASE("a month of hourly windows") {
    // Hosts talking on day 1 and in the last hour of day 30.
    const auto seq = ingest_events({{1, "c1", "c2"}, {30 * 86400 - 1, "c2", "c3"}}, 3600);
    CHECK(seq.num_windows() == 720);
    CHECK(seq.window(719).size() == 1);
    std::size_t sum = 0;
    for (std::int64_t t = 0; t < seq.num_windows(); ++t) sum += seq.window(t).size();
    CHECK(sum == seq.total_edges());
}

TEST_CASE("empty intermediate windows are materialized") {
    const auto seq = ingest_events({{0, "a", "b"}, {3 * 3600, "a", "b"}}, 3600);
    REQUIRE(seq.num_windows() == 4);
    CHECK(seq.window(1).empty());
    CHECK(seq.window(2).empty());
}

TEST_CASE("ingest is insensitive to event order") {
    std::vector<std::tuple<std::int64_t, std::string, std::string>> events;
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
        events.emplace_back(static_cast<std::int64_t>(rng.index(86400 * 3)),
                            "h" + std::to_string(rng.index(20)), "h" + std::to_string(rng.index(20)));
    }
    const auto dir = temp_dir();
    const auto a = ingest_events(events, 3600);
    a.save((dir / "order_a.nsg").string());

    std::mt19937_64 shuffler(99);
    std::shuffle(events.begin(), events.end(), shuffler);
    const auto b = ingest_events(events, 3600);
    b.save((dir / "order_b.nsg").string());

    CHECK(read_file(dir / "order_a.nsg") == read_file(dir / "order_b.nsg"));
    CHECK(read_file(dir / "order_a.nsg.nodes") == read_file(dir / "order_b.nsg.nodes"));
}

TEST_CASE("save / load round trip is byte exact") {
    std::vector<std::tuple<std::int64_t, std::string, std::string>> events;
    Rng rng(13);
    for (int i = 0; i < 300; ++i) {
        events.emplace_back(static_cast<std::int64_t>(rng.index(86400)),
                            "host-" + std::to_string(rng.index(15)),
                            "host-" + std::to_string(rng.index(15)));
    }
    const auto dir = temp_dir();
    const auto seq = ingest_events(events, 3600);
    seq.save((dir / "rt1.nsg").string());
    const auto reloaded = WindowedGraphSequence::load((dir / "rt1.nsg").string());
    reloaded.save((dir / "rt2.nsg").string());
    CHECK(read_file(dir / "rt1.nsg") == read_file(dir / "rt2.nsg"));
    CHECK(read_file(dir / "rt1.nsg.nodes") == read_file(dir / "rt2.nsg.nodes"));
    CHECK(reloaded.t0() == seq.t0());
    CHECK(reloaded.window_seconds() == seq.window_seconds());
}

TEST_CASE("split covers the sequence") {
    std::vector<std::vector<Edge>> windows(720);
    windows[0].push_back({0, 1});
    const auto seq = oracle::make_sequence(3, std::move(windows));

    SUBCASE("paper-style month split") {
        const auto [train, valid, test] = seq.split(168, 24);
        CHECK(train.begin == 0);
        CHECK(train.end == 168);
        CHECK(valid.begin == 168);
        CHECK(valid.end == 192);
        CHECK(test.begin == 192);
        CHECK(test.end == 720);
        CHECK(test.size() == 22 * 24);
    }
    SUBCASE("no test range left") {
        std::vector<std::vector<Edge>> w10(10);
        w10[0].push_back({0, 1});
        const auto small = oracle::make_sequence(3, std::move(w10));
        CHECK_THROWS_AS(small.split(10, 0), DataError);
    }
    SUBCASE("single test window") {
        std::vector<std::vector<Edge>> w3(3);
        w3[0].push_back({0, 1});
        const auto small = oracle::make_sequence(3, std::move(w3));
        const auto [train, valid, test] = small.split(1, 1);
        CHECK(test.begin == 2);
        CHECK(test.end == 3);
    }
}

TEST_CASE("empty input is an error") {
    IngestBuilder builder;
    CHECK_THROWS_WITH_AS(builder.finalize(3600), "empty input", DataError);
}

TEST_CASE("zero window size is an error") {
    IngestBuilder builder;
    builder.add(0, "a", "b");
    CHECK_THROWS_AS(builder.finalize(0), DataError);
}

TEST_CASE("t0 override and events before t0") {
    IngestBuilder builder;
    builder.add(7200, "a", "b");
    auto seq = builder.finalize(3600, 3600);
    CHECK(seq.t0() == 3600);
    CHECK(seq.num_windows() == 2);
    CHECK(seq.window(1).size() == 1);

    IngestBuilder early;
    early.add(100, "a", "b");
    CHECK_THROWS_AS(early.finalize(3600, 3600), DataError);
}

TEST_CASE("node filter drops events touching excluded hosts") {
    IngestBuilder builder([](std::string_view name) { return name != "noisy"; });
    builder.add(0, "a", "noisy");
    builder.add(0, "a", "b");
    const auto seq = builder.finalize(3600);
    CHECK(seq.num_nodes() == 2);
    CHECK(seq.total_edges() == 1);
}

TEST_CASE("delimited reader: malformed records, filters, header") {
    const auto dir = temp_dir();
    const auto path = dir / "events.csv";
    {
        std::ofstream out(path);
        out << "time,src,dst,kind\n";
        out << "0,a,b,logon\n";
        out << "junk,a,b,logon\n";
        out << "3600,b,c,other\n";
        out << "3700,c,a,logon\n";
    }
    IngestFormat fmt;
    fmt.has_header = true;
    fmt.filter_col = 3;
    fmt.filter_val = "logon";

    SUBCASE("strict mode reports the line number") {
        IngestBuilder builder;
        CHECK_THROWS_WITH_AS(read_events(path.string(), fmt, builder),
                             doctest::Contains("line 3"), DataError);
    }
    SUBCASE("skip flag counts bad records and applies the filter") {
        fmt.skip_bad_records = true;
        IngestBuilder builder;
        const auto skipped = read_events(path.string(), fmt, builder);
        CHECK(skipped == 1);
        const auto seq = builder.finalize(3600);
        CHECK(seq.total_edges() == 2);  // "other" record filtered out
        CHECK(seq.num_windows() == 2);
    }
}

TEST_CASE("gzip input reads transparently") {
    const auto dir = temp_dir();
    const auto path = dir / "events.csv.gz";
    {
        gzFile f = gzopen(path.string().c_str(), "wb");
        REQUIRE(f != nullptr);
        const char* text = "0,a,b\n60,b,c\n7200,c,a\n";
        gzwrite(f, text, static_cast<unsigned>(std::strlen(text)));
        gzclose(f);
    }
    IngestBuilder builder;
    read_events(path.string(), IngestFormat{}, builder);
    const auto seq = builder.finalize(3600);
    CHECK(seq.num_windows() == 3);
    CHECK(seq.total_edges() == 3);
}

TEST_CASE("distinct pairs and containment") {
    std::vector<std::vector<Edge>> windows(3);
    windows[0] = {{0, 1}, {1, 2}};
    windows[1] = {{0, 1}};
    windows[2] = {{2, 0}};
    const auto seq = oracle::make_sequence(3, std::move(windows));
    const auto pairs = seq.distinct_pairs({0, 3});
    CHECK(pairs == std::vector<Edge>{{0, 1}, {1, 2}, {2, 0}});
    CHECK(seq.window_contains(1, {0, 1}));
    CHECK_FALSE(seq.window_contains(1, {1, 2}));
}

TEST_CASE("labels map raw events onto stored edges") {
    const auto seq = ingest_events({{0, "a", "b"}, {10, "b", "c"}, {3700, "a", "b"}}, 3600);
    const auto labels = seq.label_events({{5, "a", "b"},      // matches window 0
                                          {3650, "a", "b"},   // matches window 1
                                          {50, "c", "a"},     // not an edge: dropped
                                          {99999, "a", "b"}}); // out of range: dropped
    CHECK(labels.size() == 2);
    CHECK(labels.contains({0, seq.nodes().id_of("a"), seq.nodes().id_of("b")}));
    CHECK(labels.contains({1, seq.nodes().id_of("a"), seq.nodes().id_of("b")}));
}

TEST_CASE("label file round trip") {
    const auto dir = temp_dir();
    LabeledEdgeSet labels({{3, 1, 2}, {1, 0, 4}, {3, 1, 2}});
    CHECK(labels.size() == 2);  // duplicate collapsed
    labels.save((dir / "labels.csv").string());
    const auto loaded = LabeledEdgeSet::load((dir / "labels.csv").string());
    CHECK(loaded.size() == 2);
    CHECK(loaded.contains({1, 0, 4}));
    CHECK(loaded.contains({3, 1, 2}));
}

TEST_CASE("node index digest tracks content") {
    NodeIndex a({"alpha", "beta"});
    NodeIndex b({"alpha", "beta"});
    NodeIndex c({"alpha", "gamma"});
    CHECK(a.digest() == b.digest());
    CHECK(a.digest() != c.digest());
}
