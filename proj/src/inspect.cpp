#include "netsep/inspect.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>

#include "netsep/rng.hpp"

namespace netsep {

namespace {

constexpr Eigen::Index kRowBlock = 256;

void check_source(const SnmfModel& m, int source) {
    if (source < 0 || source >= m.sources()) {
        throw DataError("source index " + std::to_string(source) + " out of range [0, " +
                        std::to_string(m.sources()) + ")");
    }
}

struct File {
    std::FILE* f = nullptr;
    explicit File(const std::string& path) {
        f = std::fopen(path.c_str(), "wb");
        if (f == nullptr) throw DataError("cannot open '" + path + "' for writing");
    }
    ~File() {
        if (f != nullptr) std::fclose(f);
    }
};

}  // namespace

// ---------------------------------------------------------------------------
// Thresholded per-source graphs

std::vector<WeightedPair> export_source_graph(const SnmfModel& m, int source, double theta,
                                              ThreadPool* pool) {
    check_source(m, source);
    if (!(theta > 0.0)) throw DataError("theta must be positive");
    const Mat& u = m.U[static_cast<std::size_t>(source)];
    const Mat& v = m.V[static_cast<std::size_t>(source)];
    const Eigen::Index n = u.rows();

    const Eigen::Index blocks = (n + kRowBlock - 1) / kRowBlock;
    std::vector<std::vector<WeightedPair>> per_block(static_cast<std::size_t>(blocks));
    auto body = [&](std::int64_t b) {
        const Eigen::Index lo = static_cast<Eigen::Index>(b) * kRowBlock;
        const Eigen::Index hi = std::min(n, lo + kRowBlock);
        const Mat coeffs = u.middleRows(lo, hi - lo) * v.transpose();
        auto& out = per_block[static_cast<std::size_t>(b)];
        for (Eigen::Index r = 0; r < coeffs.rows(); ++r) {
            const NodeId i = static_cast<NodeId>(lo + r);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (static_cast<NodeId>(j) != i && coeffs(r, j) > theta) {
                    out.push_back({i, static_cast<NodeId>(j), coeffs(r, j)});
                }
            }
        }
    };
    if (pool != nullptr) {
        pool->parallel_for(0, blocks, body);
    } else {
        for (std::int64_t b = 0; b < blocks; ++b) body(b);
    }

    std::vector<WeightedPair> result;
    for (auto& blk : per_block) result.insert(result.end(), blk.begin(), blk.end());
    return result;
}

void write_weighted_pairs_csv(const std::string& path, std::span<const WeightedPair> pairs) {
    File out(path);
    std::fputs("src,dst,weight\n", out.f);
    for (const WeightedPair& p : pairs) {
        std::fprintf(out.f, "%d,%d,%.17g\n", p.src, p.dst, p.weight);
    }
}

std::vector<double> coefficient_quantiles(const SnmfModel& m, int source,
                                          std::span<const double> probabilities) {
    check_source(m, source);
    const Mat& u = m.U[static_cast<std::size_t>(source)];
    const Mat& v = m.V[static_cast<std::size_t>(source)];
    const Eigen::Index n = u.rows();
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1));
    for (Eigen::Index lo = 0; lo < n; lo += kRowBlock) {
        const Eigen::Index hi = std::min(n, lo + kRowBlock);
        const Mat coeffs = u.middleRows(lo, hi - lo) * v.transpose();
        for (Eigen::Index r = 0; r < coeffs.rows(); ++r) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (lo + r != j) values.push_back(coeffs(r, j));
            }
        }
    }
    std::sort(values.begin(), values.end());
    std::vector<double> out;
    for (double p : probabilities) {
        if (!(p >= 0.0 && p <= 1.0)) throw DataError("quantile probability outside [0, 1]");
        const auto idx = static_cast<std::size_t>(
            std::min<double>(static_cast<double>(values.size()) - 1.0,
                             std::floor(p * static_cast<double>(values.size()))));
        out.push_back(values[idx]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// k-means + silhouette

namespace {

// Lloyd iterations with greedy d^2-weighted seeding; returns inertia.
double kmeans_once(const Mat& data, int k, Rng& rng, std::vector<int>& assignment, Mat& centroids) {
    const Eigen::Index n = data.rows();
    centroids.resize(k, data.cols());

    // d^2 seeding
    std::vector<double> dist2(static_cast<std::size_t>(n), std::numeric_limits<double>::max());
    Eigen::Index first = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
    centroids.row(0) = data.row(first);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = (data.row(i) - centroids.row(c - 1)).squaredNorm();
            dist2[static_cast<std::size_t>(i)] = std::min(dist2[static_cast<std::size_t>(i)], d);
            total += dist2[static_cast<std::size_t>(i)];
        }
        Eigen::Index pick = 0;
        if (total > 0.0) {
            const double target = rng.unit() * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += dist2[static_cast<std::size_t>(i)];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
        }
        centroids.row(c) = data.row(pick);
    }

    assignment.assign(static_cast<std::size_t>(n), 0);
    double inertia = 0.0;
    for (int iter = 0; iter < 300; ++iter) {
        bool changed = false;
        inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = (data.row(i) - centroids.row(0)).squaredNorm();
            for (int c = 1; c < k; ++c) {
                const double d = (data.row(i) - centroids.row(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assignment[static_cast<std::size_t>(i)] != best) {
                assignment[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
            inertia += best_d;
        }
        Mat sums = Mat::Zero(k, data.cols());
        std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(assignment[static_cast<std::size_t>(i)]) += data.row(i);
            counts[static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)])]++;
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            } else {
                // Reseed an empty cluster at the point farthest from its centroid.
                Eigen::Index far = 0;
                double far_d = -1.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double d =
                        (data.row(i) - centroids.row(assignment[static_cast<std::size_t>(i)])).squaredNorm();
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                centroids.row(c) = data.row(far);
                changed = true;
            }
        }
        if (!changed && iter > 0) break;
    }
    return inertia;
}

double mean_silhouette(const Mat& dist, std::span<const int> assignment, int k) {
    const Eigen::Index n = dist.rows();
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
    for (int a : assignment) counts[static_cast<std::size_t>(a)]++;

    double total = 0.0;
    std::vector<double> sums(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i != j) sums[static_cast<std::size_t>(assignment[static_cast<std::size_t>(j)])] += dist(i, j);
        }
        const int own = assignment[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(own)] <= 1) continue;  // singleton: silhouette 0
        const double a = sums[static_cast<std::size_t>(own)] /
                         static_cast<double>(counts[static_cast<std::size_t>(own)] - 1);
        double b = std::numeric_limits<double>::max();
        for (int c = 0; c < k; ++c) {
            if (c == own || counts[static_cast<std::size_t>(c)] == 0) continue;
            b = std::min(b, sums[static_cast<std::size_t>(c)] /
                                static_cast<double>(counts[static_cast<std::size_t>(c)]));
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

// Labels ordered by centroid lexicographic order, so the labeling is a
// function of the partition geometry rather than of row order.
void canonicalize_labels(std::vector<int>& assignment, const Mat& centroids, int k) {
    std::vector<int> order(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) order[static_cast<std::size_t>(c)] = c;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        for (Eigen::Index d = 0; d < centroids.cols(); ++d) {
            if (centroids(a, d) != centroids(b, d)) return centroids(a, d) < centroids(b, d);
        }
        return a < b;
    });
    std::vector<int> relabel(static_cast<std::size_t>(k));
    for (int rank = 0; rank < k; ++rank) relabel[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])] = rank;
    for (int& a : assignment) a = relabel[static_cast<std::size_t>(a)];
}

}  // namespace

ClusterResult cluster_source_embeddings(const SnmfModel& m, int source, std::span<const int> k_range,
                                        std::uint64_t seed) {
    check_source(m, source);
    const Eigen::Index n = m.N;
    if (n < 3) throw DataError("clustering needs at least three nodes");
    if (k_range.empty()) throw DataError("empty cluster range");
    for (int k : k_range) {
        if (k < 2 || k > static_cast<int>(n) - 1) {
            throw DataError("cluster count " + std::to_string(k) + " outside [2, N-1]");
        }
    }

    Mat data(n, 2 * m.dim());
    data << m.U[static_cast<std::size_t>(source)], m.V[static_cast<std::size_t>(source)];

    Mat dist(n, n);
    double max_dist = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        dist(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d = (data.row(i) - data.row(j)).norm();
            dist(i, j) = d;
            dist(j, i) = d;
            max_dist = std::max(max_dist, d);
        }
    }
    if (max_dist == 0.0) throw DataError("degenerate embeddings: all rows identical");

    ClusterResult result;
    constexpr int kRestarts = 10;
    for (std::size_t ki = 0; ki < k_range.size(); ++ki) {
        const int k = k_range[ki];
        std::vector<int> best_assignment;
        Mat best_centroids;
        double best_inertia = std::numeric_limits<double>::max();
        for (int restart = 0; restart < kRestarts; ++restart) {
            Rng rng(derive_seed(seed, (static_cast<std::uint64_t>(k) << 16) +
                                          static_cast<std::uint64_t>(restart)));
            std::vector<int> assignment;
            Mat centroids;
            const double inertia = kmeans_once(data, k, rng, assignment, centroids);
            if (inertia < best_inertia) {
                best_inertia = inertia;
                best_assignment = std::move(assignment);
                best_centroids = std::move(centroids);
            }
        }
        canonicalize_labels(best_assignment, best_centroids, k);
        const double sil = mean_silhouette(dist, best_assignment, k);
        result.tried_k.push_back(k);
        result.tried_silhouette.push_back(sil);
        if (result.assignment.empty() || sil > result.silhouette) {
            result.silhouette = sil;
            result.k = k;
            result.assignment = std::move(best_assignment);
        }
    }
    return result;
}

void write_clusters_csv(const std::string& path, const NodeIndex& nodes,
                        std::span<const int> assignment) {
    File out(path);
    std::fputs("id,name,cluster\n", out.f);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        std::fprintf(out.f, "%zu,%s,%d\n", i, nodes.name_of(static_cast<NodeId>(i)).c_str(),
                     assignment[i]);
    }
}

std::vector<std::vector<std::int64_t>> cluster_pair_edge_counts(std::span<const int> assignment, int k,
                                                                const WindowedGraphSequence& seq,
                                                                WindowRange range) {
    std::vector<std::vector<std::int64_t>> counts(static_cast<std::size_t>(k),
                                                  std::vector<std::int64_t>(static_cast<std::size_t>(k), 0));
    for (std::int64_t t = range.begin; t < range.end; ++t) {
        for (const Edge& e : seq.window(t)) {
            counts[static_cast<std::size_t>(assignment[static_cast<std::size_t>(e.src)])]
                  [static_cast<std::size_t>(assignment[static_cast<std::size_t>(e.dst)])]++;
        }
    }
    return counts;
}

void write_cluster_pair_counts_csv(const std::string& path,
                                   const std::vector<std::vector<std::int64_t>>& counts) {
    File out(path);
    std::fputs("src_cluster,dst_cluster,edges\n", out.f);
    for (std::size_t a = 0; a < counts.size(); ++a) {
        for (std::size_t b = 0; b < counts[a].size(); ++b) {
            std::fprintf(out.f, "%zu,%zu,%" PRId64 "\n", a, b, counts[a][b]);
        }
    }
}

// ---------------------------------------------------------------------------
// Timelines

void export_mixing_timeline(const MixingHistory& history, const std::string& path) {
    File out(path);
    std::fputs("t", out.f);
    for (int l = 1; l <= history.dim(); ++l) std::fprintf(out.f, ",w%d", l);
    std::fputs("\n", out.f);
    for (std::size_t i = 0; i < history.size(); ++i) {
        std::fprintf(out.f, "%" PRId64, history.windows()[i]);
        const RowVec& row = history.row(i);
        for (Eigen::Index l = 0; l < row.size(); ++l) std::fprintf(out.f, ",%.17g", row(l));
        std::fputs("\n", out.f);
    }
}

}  // namespace netsep
