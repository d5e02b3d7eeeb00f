#pragma once

#include <span>
#include <string>
#include <vector>

#include "netsep/forecast.hpp"
#include "netsep/graph.hpp"
#include "netsep/model.hpp"

namespace netsep {

struct WeightedPair {
    NodeId src = 0;
    NodeId dst = 0;
    double weight = 0.0;
};

// All off-diagonal pairs with u_{i,l} . v_{j,l} > theta, with the coefficient.
// Works in row blocks; the full N x N reconstruction is never materialized.
std::vector<WeightedPair> export_source_graph(const SnmfModel& m, int source, double theta,
                                              ThreadPool* pool = nullptr);
void write_weighted_pairs_csv(const std::string& path, std::span<const WeightedPair> pairs);

// Quantiles of the off-diagonal coefficients of one source; helps pick theta.
std::vector<double> coefficient_quantiles(const SnmfModel& m, int source,
                                          std::span<const double> probabilities);

struct ClusterResult {
    std::vector<int> assignment;      // per node, labels canonical by centroid order
    int k = 0;                        // chosen cluster count
    double silhouette = 0.0;          // mean silhouette at the chosen k
    std::vector<int> tried_k;
    std::vector<double> tried_silhouette;
};

// Seeded multi-restart k-means on the concatenated embeddings (U_l || V_l),
// choosing k from k_range by the highest mean silhouette.
ClusterResult cluster_source_embeddings(const SnmfModel& m, int source, std::span<const int> k_range,
                                        std::uint64_t seed);
void write_clusters_csv(const std::string& path, const NodeIndex& nodes,
                        std::span<const int> assignment);

// Edge totals between cluster pairs over a window range (k x k counts).
std::vector<std::vector<std::int64_t>> cluster_pair_edge_counts(std::span<const int> assignment, int k,
                                                                const WindowedGraphSequence& seq,
                                                                WindowRange range);
void write_cluster_pair_counts_csv(const std::string& path,
                                   const std::vector<std::vector<std::int64_t>>& counts);

// CSV "t,w1,...,wL" in window order, full double precision.
void export_mixing_timeline(const MixingHistory& history, const std::string& path);

}  // namespace netsep
