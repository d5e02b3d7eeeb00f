#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netsep/graph.hpp"
#include "netsep/linalg.hpp"
#include "netsep/thread_pool.hpp"

namespace netsep {

// Activity level of one source over time.
struct MixingProfile {
    enum class Kind { Constant, SquareWave, Bursts };
    Kind kind = Kind::Constant;
    double level = 1.0;  // Constant

    std::int64_t period = 24;  // SquareWave: high on [on_start, on_start + on_len) mod period
    std::int64_t on_start = 9;
    std::int64_t on_len = 9;
    double high = 1.0;
    double low = 0.0;

    double burst_prob = 0.05;  // Bursts: spike to burst_height, else 0
    double burst_height = 1.0;

    double value(std::int64_t t, std::uint64_t scenario_seed, int source_index) const;
    void validate() const;
};

// Rectangular origin-cluster -> destination-cluster block with a base rate.
struct BlockSpec {
    NodeId src_begin = 0, src_end = 0;
    NodeId dst_begin = 0, dst_end = 0;
    double rate = 0.0;  // in [0, 1]
};

// One latent activity source: blocks define the rank-K base factors
// (one factor column per block), the profile its mixing coefficient.
struct SourceSpec {
    std::string name;
    std::vector<BlockSpec> blocks;
    MixingProfile profile;

    // Base factors with u_i . v_j equal to the summed block rates for (i, j).
    void build_factors(NodeId n, Mat& u, Mat& v) const;
    void validate(NodeId n) const;
};

struct SynthConfig {
    NodeId nodes = 200;
    std::int64_t windows = 336;
    std::uint64_t seed = 0;
    std::int64_t window_seconds = 3600;
    std::int64_t anomaly_count = 0;
    std::int64_t anomaly_from = 0;  // anomalies land in windows [anomaly_from, windows)
    std::optional<std::int64_t> tau;  // declared seasonality; square-wave periods must divide it
};

struct GroundTruth {
    std::vector<Mat> u;  // per source
    std::vector<Mat> v;
    Mat w;  // windows x sources
};

struct SynthResult {
    WindowedGraphSequence seq;
    LabeledEdgeSet anomalies;
    GroundTruth truth;
};

// Each off-diagonal pair (i, j) in window t appears independently with
// probability min(1, sum_l w_tl u_il . v_jl). Anomalies are distinct pairs
// with probability exactly zero under the mixture, injected into uniformly
// drawn windows at or past anomaly_from and labeled. Bit-reproducible for a
// fixed seed regardless of the pool.
SynthResult generate(std::span<const SourceSpec> specs, const SynthConfig& config,
                     ThreadPool* pool = nullptr);

// Shipped scenarios: "office", "background", "admin-burst",
// "office+background", "office+background+admin-burst".
std::vector<SourceSpec> builtin_scenario(const std::string& name, NodeId n);

// JSON scenario file; see docs/scenario_format.md.
std::pair<SynthConfig, std::vector<SourceSpec>> load_scenario(const std::string& path);

}  // namespace netsep
