#include "netsep/scoring.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>

namespace netsep {

double score_edge(const SnmfModel& m, const RowVec& w, NodeId i, NodeId j) {
    if (i == j) throw DataError("self-loops are outside the temporal edge set");
    if (i < 0 || j < 0 || i >= m.N || j >= m.N) throw DataError("node id out of range");
    if (w.size() != m.sources()) throw DataError("mixing vector has wrong length");
    double h = 0.0;
    for (int l = 0; l < m.sources(); ++l) {
        h += w(l) * m.U[static_cast<std::size_t>(l)].row(i).dot(m.V[static_cast<std::size_t>(l)].row(j));
    }
    return h;
}

WindowScoreResult score_window(const SnmfModel& m, const MixingKernel& kernel, MixingHistory& history,
                               std::span<const Edge> edges, std::int64_t t,
                               const RefitOptions& options, ThreadPool* pool) {
    WindowScoreResult result;
    result.predicted = history.predict(t);

    result.scored.resize(edges.size());
    auto body = [&](std::int64_t k) {
        const Edge e = edges[static_cast<std::size_t>(k)];
        result.scored[static_cast<std::size_t>(k)] =
            ScoredEdge{t, e.src, e.dst, score_edge(m, result.predicted, e.src, e.dst), -1};
    };
    if (pool != nullptr) {
        pool->parallel_for(0, static_cast<std::int64_t>(edges.size()), body);
    } else {
        for (std::int64_t k = 0; k < static_cast<std::int64_t>(edges.size()); ++k) body(k);
    }

    RowVec init = refit_init(m, result.predicted, options);
    result.refitted = refit_window_weights(m, kernel, edges, std::move(init), options.iters, options.tol);
    history.append(t, result.refitted);
    return result;
}

RowVec refit_init(const SnmfModel& m, const RowVec& predicted, const RefitOptions& options) {
    const double trained_mean = m.W.size() > 0 ? m.W.mean() : 0.0;
    const double floor = options.init_floor_rel * std::max(trained_mean, 0.0);
    return predicted.cwiseMax(floor > 0.0 ? floor : options.init_floor_rel);
}

std::vector<ScoredEdge> rank_anomalies(std::vector<ScoredEdge> scored, double top_fraction) {
    if (!(top_fraction > 0.0) || top_fraction > 1.0) {
        throw DataError("top_fraction must lie in (0, 1]");
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredEdge& a, const ScoredEdge& b) {
        if (a.score != b.score) return a.score < b.score;
        if (a.window != b.window) return a.window < b.window;
        if (a.src != b.src) return a.src < b.src;
        return a.dst < b.dst;
    });
    const auto keep = static_cast<std::size_t>(
        std::ceil(top_fraction * static_cast<double>(scored.size())));
    if (keep < scored.size()) scored.resize(keep);
    return scored;
}

void write_scores_csv(const std::string& path, std::span<const ScoredEdge> scored) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (f == nullptr) throw DataError("cannot open '" + path + "' for writing");
    std::fputs("t,src,dst,score,label\n", f);
    for (const ScoredEdge& e : scored) {
        if (e.label < 0) {
            std::fprintf(f, "%" PRId64 ",%d,%d,%.17g,NA\n", e.window, e.src, e.dst, e.score);
        } else {
            std::fprintf(f, "%" PRId64 ",%d,%d,%.17g,%d\n", e.window, e.src, e.dst, e.score, e.label);
        }
    }
    std::fclose(f);
}

}  // namespace netsep
