#include "netsep/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "netsep/rng.hpp"

namespace netsep {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Profiles and specs

void MixingProfile::validate() const {
    auto check_rate = [](double x, const char* what) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw DataError(std::string(what) + " must be nonnegative");
    };
    switch (kind) {
        case Kind::Constant:
            check_rate(level, "profile level");
            break;
        case Kind::SquareWave:
            if (period < 1) throw DataError("square-wave period must be positive");
            if (on_len < 0 || on_start < 0) throw DataError("square-wave on-range must be nonnegative");
            check_rate(high, "square-wave high");
            check_rate(low, "square-wave low");
            break;
        case Kind::Bursts:
            if (!(burst_prob >= 0.0 && burst_prob <= 1.0)) throw DataError("burst probability must be in [0,1]");
            check_rate(burst_height, "burst height");
            break;
    }
}

double MixingProfile::value(std::int64_t t, std::uint64_t scenario_seed, int source_index) const {
    switch (kind) {
        case Kind::Constant:
            return level;
        case Kind::SquareWave: {
            const std::int64_t phase = t % period;
            const bool on = phase >= on_start && phase < on_start + on_len;
            return on ? high : low;
        }
        case Kind::Bursts: {
            Rng rng(derive_seed(scenario_seed, 0xB0057ULL + 131 * static_cast<std::uint64_t>(t) +
                                                   static_cast<std::uint64_t>(source_index)));
            return rng.bernoulli(burst_prob) ? burst_height : 0.0;
        }
    }
    return 0.0;
}

void SourceSpec::validate(NodeId n) const {
    profile.validate();
    if (blocks.empty()) throw DataError("source '" + name + "' has no blocks");
    for (const BlockSpec& b : blocks) {
        if (b.src_begin < 0 || b.src_end > n || b.src_begin >= b.src_end || b.dst_begin < 0 ||
            b.dst_end > n || b.dst_begin >= b.dst_end) {
            throw DataError("source '" + name + "': block ranges must be nonempty and within [0, N)");
        }
        if (!(b.rate >= 0.0 && b.rate <= 1.0)) {
            throw DataError("source '" + name + "': block rate must lie in [0, 1]");
        }
    }
}

void SourceSpec::build_factors(NodeId n, Mat& u, Mat& v) const {
    const int k = static_cast<int>(blocks.size());
    u = Mat::Zero(n, k);
    v = Mat::Zero(n, k);
    for (int c = 0; c < k; ++c) {
        const BlockSpec& b = blocks[static_cast<std::size_t>(c)];
        const double s = std::sqrt(b.rate);
        for (NodeId i = b.src_begin; i < b.src_end; ++i) u(i, c) = s;
        for (NodeId j = b.dst_begin; j < b.dst_end; ++j) v(j, c) = s;
    }
}

// ---------------------------------------------------------------------------
// Generation

namespace {

std::vector<std::string> synthetic_names(NodeId n) {
    int width = 1;
    for (NodeId x = n - 1; x >= 10; x /= 10) ++width;
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(n));
    char buf[32];
    for (NodeId i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), "h%0*d", width, i);
        names.emplace_back(buf);
    }
    return names;
}

}  // namespace

SynthResult generate(std::span<const SourceSpec> specs, const SynthConfig& config, ThreadPool* pool) {
    const NodeId n = config.nodes;
    const std::int64_t t_total = config.windows;
    const int num_sources = static_cast<int>(specs.size());
    if (n < 2) throw DataError("need at least two nodes");
    if (t_total < 1) throw DataError("need at least one window");
    if (num_sources < 1) throw DataError("need at least one source");
    for (const SourceSpec& s : specs) {
        s.validate(n);
        if (config.tau && s.profile.kind == MixingProfile::Kind::SquareWave &&
            *config.tau % s.profile.period != 0) {
            throw DataError("source '" + s.name + "': seasonal period " +
                            std::to_string(s.profile.period) + " does not divide tau " +
                            std::to_string(*config.tau));
        }
    }

    GroundTruth truth;
    for (const SourceSpec& s : specs) {
        Mat u, v;
        s.build_factors(n, u, v);
        truth.u.push_back(std::move(u));
        truth.v.push_back(std::move(v));
    }
    truth.w.resize(t_total, num_sources);
    for (std::int64_t t = 0; t < t_total; ++t) {
        for (int l = 0; l < num_sources; ++l) {
            truth.w(t, l) = specs[static_cast<std::size_t>(l)].profile.value(t, config.seed, l);
        }
    }

    // Support: off-diagonal pairs with a positive base rate under any source,
    // with their per-source base values.
    std::vector<Edge> support;
    {
        std::set<Edge> uniq;
        for (const SourceSpec& s : specs) {
            for (const BlockSpec& b : s.blocks) {
                for (NodeId i = b.src_begin; i < b.src_end; ++i) {
                    for (NodeId j = b.dst_begin; j < b.dst_end; ++j) {
                        if (i != j && b.rate > 0.0) uniq.insert({i, j});
                    }
                }
            }
        }
        support.assign(uniq.begin(), uniq.end());
    }
    Mat base = Mat::Zero(static_cast<Eigen::Index>(support.size()), num_sources);
    for (std::size_t e = 0; e < support.size(); ++e) {
        for (int l = 0; l < num_sources; ++l) {
            base(static_cast<Eigen::Index>(e), l) =
                truth.u[static_cast<std::size_t>(l)].row(support[e].src).dot(
                    truth.v[static_cast<std::size_t>(l)].row(support[e].dst));
        }
    }

    // Independent per-window draws; one derived stream per window keeps the
    // output identical whether or not windows run in parallel.
    std::vector<std::vector<Edge>> windows(static_cast<std::size_t>(t_total));
    auto draw_window = [&](std::int64_t t) {
        Rng rng(derive_seed(config.seed, 0x57A7ULL + static_cast<std::uint64_t>(t)));
        auto& out = windows[static_cast<std::size_t>(t)];
        for (std::size_t e = 0; e < support.size(); ++e) {
            const double p =
                std::min(1.0, truth.w.row(t).dot(base.row(static_cast<Eigen::Index>(e))));
            if (rng.bernoulli(p)) out.push_back(support[e]);
        }
    };
    if (pool != nullptr) {
        pool->parallel_for(0, t_total, draw_window);
    } else {
        for (std::int64_t t = 0; t < t_total; ++t) draw_window(t);
    }

    // Anomalies: distinct pairs with zero probability in every window.
    std::vector<TemporalEdge> labels;
    if (config.anomaly_count > 0) {
        const double total_pairs = static_cast<double>(n) * (static_cast<double>(n) - 1.0);
        if (static_cast<double>(support.size()) >= total_pairs) {
            throw DataError("anomaly injection infeasible: every pair has positive probability");
        }
        if (config.anomaly_from < 0 || config.anomaly_from >= t_total) {
            throw DataError("anomaly_from must index a window");
        }
        Rng rng(derive_seed(config.seed, 0xA40FULL));
        std::set<Edge> chosen;
        std::int64_t attempts = 0;
        const std::int64_t max_attempts = 1000 * config.anomaly_count + 100000;
        while (static_cast<std::int64_t>(chosen.size()) < config.anomaly_count) {
            if (++attempts > max_attempts) {
                throw DataError("anomaly injection infeasible: could not find enough zero-probability pairs");
            }
            const Edge e{static_cast<NodeId>(rng.index(static_cast<std::uint64_t>(n))),
                         static_cast<NodeId>(rng.index(static_cast<std::uint64_t>(n)))};
            if (e.src == e.dst || chosen.count(e) > 0 ||
                std::binary_search(support.begin(), support.end(), e)) {
                continue;
            }
            chosen.insert(e);
            const std::int64_t t =
                config.anomaly_from +
                static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(t_total - config.anomaly_from)));
            windows[static_cast<std::size_t>(t)].push_back(e);
            labels.push_back({t, e.src, e.dst});
        }
    }

    SynthResult result{
        WindowedGraphSequence(NodeIndex(synthetic_names(n)), config.window_seconds, 0,
                              std::move(windows)),
        LabeledEdgeSet(std::move(labels)), std::move(truth)};
    return result;
}

// ---------------------------------------------------------------------------
// Shipped scenarios

namespace {

SourceSpec office_source(NodeId n) {
    SourceSpec s;
    s.name = "office";
    s.profile.kind = MixingProfile::Kind::SquareWave;
    s.profile.period = 24;
    s.profile.on_start = 9;
    s.profile.on_len = 9;
    s.profile.high = 1.0;
    s.profile.low = 0.0;
    // Workstations reach the office servers during working hours.
    s.blocks.push_back({0, static_cast<NodeId>(n * 6 / 10), static_cast<NodeId>(n * 6 / 10),
                        static_cast<NodeId>(n * 7 / 10), 1.0});
    return s;
}

SourceSpec background_source(NodeId n) {
    SourceSpec s;
    s.name = "background";
    s.profile.kind = MixingProfile::Kind::Constant;
    s.profile.level = 1.0;
    // Automated traffic from appliances to the update servers, day and night.
    s.blocks.push_back({static_cast<NodeId>(n * 8 / 10), n, static_cast<NodeId>(n * 75 / 100),
                        static_cast<NodeId>(n * 8 / 10), 0.5});
    return s;
}

SourceSpec admin_burst_source(NodeId n) {
    SourceSpec s;
    s.name = "admin-burst";
    s.profile.kind = MixingProfile::Kind::Bursts;
    s.profile.burst_prob = 0.05;
    s.profile.burst_height = 1.0;
    // A couple of admin hosts occasionally touch everything.
    s.blocks.push_back({static_cast<NodeId>(n * 7 / 10), static_cast<NodeId>(n * 7 / 10 + 2), 0, n, 0.8});
    return s;
}

}  // namespace

std::vector<SourceSpec> builtin_scenario(const std::string& name, NodeId n) {
    std::vector<SourceSpec> out;
    std::size_t start = 0;
    while (start <= name.size()) {
        const std::size_t plus = name.find('+', start);
        const std::string part =
            name.substr(start, plus == std::string::npos ? std::string::npos : plus - start);
        if (part == "office") {
            out.push_back(office_source(n));
        } else if (part == "background") {
            out.push_back(background_source(n));
        } else if (part == "admin-burst") {
            out.push_back(admin_burst_source(n));
        } else {
            throw DataError("unknown scenario component '" + part + "'");
        }
        if (plus == std::string::npos) break;
        start = plus + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scenario files

std::pair<SynthConfig, std::vector<SourceSpec>> load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open scenario file '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError("scenario file '" + path + "': " + e.what());
    }

    try {
        SynthConfig config;
        config.nodes = doc.at("nodes").get<NodeId>();
        config.windows = doc.at("windows").get<std::int64_t>();
        config.seed = doc.value("seed", std::uint64_t{0});
        config.window_seconds = doc.value("window_seconds", std::int64_t{3600});
        config.anomaly_count = doc.value("anomalies", std::int64_t{0});
        config.anomaly_from = doc.value("anomaly_from", std::int64_t{0});
        if (doc.contains("tau")) config.tau = doc.at("tau").get<std::int64_t>();

        std::vector<SourceSpec> specs;
        for (const auto& src : doc.at("sources")) {
            SourceSpec s;
            s.name = src.value("name", "source-" + std::to_string(specs.size()));
            const auto& prof = src.at("profile");
            const std::string kind = prof.at("kind").get<std::string>();
            if (kind == "constant") {
                s.profile.kind = MixingProfile::Kind::Constant;
                s.profile.level = prof.value("level", 1.0);
            } else if (kind == "square") {
                s.profile.kind = MixingProfile::Kind::SquareWave;
                s.profile.period = prof.value("period", std::int64_t{24});
                s.profile.on_start = prof.value("on_start", std::int64_t{9});
                s.profile.on_len = prof.value("on_len", std::int64_t{9});
                s.profile.high = prof.value("high", 1.0);
                s.profile.low = prof.value("low", 0.0);
            } else if (kind == "bursts") {
                s.profile.kind = MixingProfile::Kind::Bursts;
                s.profile.burst_prob = prof.value("prob", 0.05);
                s.profile.burst_height = prof.value("height", 1.0);
            } else {
                throw DataError("scenario file: unknown profile kind '" + kind + "'");
            }
            for (const auto& blk : src.at("blocks")) {
                BlockSpec b;
                b.src_begin = blk.at("src").at(0).get<NodeId>();
                b.src_end = blk.at("src").at(1).get<NodeId>();
                b.dst_begin = blk.at("dst").at(0).get<NodeId>();
                b.dst_end = blk.at("dst").at(1).get<NodeId>();
                b.rate = blk.at("rate").get<double>();
                s.blocks.push_back(b);
            }
            specs.push_back(std::move(s));
        }
        return {config, std::move(specs)};
    } catch (const json::exception& e) {
        throw DataError("scenario file '" + path + "': " + e.what());
    }
}

}  // namespace netsep
