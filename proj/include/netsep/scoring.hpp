#pragma once

#include <span>
#include <string>
#include <vector>

#include "netsep/forecast.hpp"
#include "netsep/model.hpp"

namespace netsep {

// One ranked unit of output. label: 1 malicious, 0 normal, -1 unknown.
struct ScoredEdge {
    std::int64_t window = 0;
    NodeId src = 0;
    NodeId dst = 0;
    double score = 0.0;
    int label = -1;
};

// Link score h = sum_l w_l (u_{i,l} . v_{j,l}); higher means more normal.
double score_edge(const SnmfModel& m, const RowVec& w, NodeId i, NodeId j);

struct RefitOptions {
    int iters = 200;
    double tol = 1e-8;
    // Refit starts from the seasonal prediction floored elementwise at
    // init_floor_rel times the mean trained coefficient, so sources predicted
    // inactive can still come back when the data demands them.
    double init_floor_rel = 1e-3;
};

// Starting point for a window refit given the seasonal prediction.
RowVec refit_init(const SnmfModel& m, const RowVec& predicted, const RefitOptions& options);

struct WindowScoreResult {
    std::vector<ScoredEdge> scored;
    RowVec predicted;
    RowVec refitted;
};

// Scores every observed edge of window t with the seasonal prediction, then
// refits the window's mixing vector with embeddings frozen and appends it to
// the history. Scoring strictly precedes the refit.
WindowScoreResult score_window(const SnmfModel& m, const MixingKernel& kernel, MixingHistory& history,
                               std::span<const Edge> edges, std::int64_t t,
                               const RefitOptions& options = {}, ThreadPool* pool = nullptr);

// Ascending by score (lowest = most anomalous); ties break on
// (window, src, dst); truncated to ceil(top_fraction * size).
std::vector<ScoredEdge> rank_anomalies(std::vector<ScoredEdge> scored, double top_fraction);

// CSV "t,src,dst,score,label" with label in {0,1,NA}; rows ordered by window
// then (src, dst). Scores carry 17 significant digits.
void write_scores_csv(const std::string& path, std::span<const ScoredEdge> scored);

}  // namespace netsep
