#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netsep/common.hpp"
#include "netsep/forecast.hpp"
#include "netsep/graph.hpp"
#include "netsep/linalg.hpp"
#include "netsep/thread_pool.hpp"

namespace netsep {

struct Hyperparams {
    int K = 5;                // embedding dimension per source
    int L = 4;                // number of activity sources
    double lambda1 = 1e-3;    // L1 penalty on the mixing matrix
    double lambda2 = 1e-5;    // L2 penalty on the embedding matrices
    int max_iters = 500;      // full update sweeps
    double tol = 1e-5;        // relative loss-change stopping threshold
    double eps_floor = 1e-12; // added to every update denominator
    std::uint64_t seed = 0;

    void validate() const;
};

// Factorization state: L origin/destination embedding pairs plus the
// per-window mixing matrix. All entries stay nonnegative. Immutable (and
// thread-safe to read) once fitting finishes.
class SnmfModel {
  public:
    Hyperparams hyper;
    NodeId N = 0;
    std::vector<Mat> U;  // L matrices, N x K
    std::vector<Mat> V;  // L matrices, N x K
    Mat W;               // T x L

    int sources() const { return static_cast<int>(U.size()); }
    int dim() const { return U.empty() ? 0 : static_cast<int>(U.front().cols()); }
    std::int64_t train_windows() const { return W.rows(); }

    bool all_finite() const;
    double min_entry() const;

    bool operator==(const SnmfModel& other) const;
};

// Preprocessed training structure over a contiguous window range: per-window
// edge lists plus row/column indexes over the distinct-edge union so that the
// update kernels never touch an N x N matrix. Borrows the sequence's edge
// storage; the sequence must outlive the context.
class TrainContext {
  public:
    TrainContext(const WindowedGraphSequence& seq, WindowRange range);

    NodeId num_nodes() const { return n_; }
    std::int64_t num_windows() const { return static_cast<std::int64_t>(windows_.size()); }
    std::span<const Edge> window(std::int64_t t) const { return windows_.at(static_cast<std::size_t>(t)); }
    std::size_t total_events() const { return total_events_; }

    std::span<const Edge> union_edges() const { return union_edges_; }
    // Occurrence list: windows containing union edge e.
    std::span<const std::int32_t> occurrences(std::size_t e) const;
    // CSR over union edges grouped by source row.
    std::span<const std::int64_t> row_ptr() const { return row_ptr_; }
    // Union edge indices grouped by destination column.
    std::span<const std::int64_t> col_ptr() const { return col_ptr_; }
    std::span<const std::int32_t> csc_edges() const { return csc_edges_; }

  private:
    NodeId n_ = 0;
    std::vector<std::span<const Edge>> windows_;
    std::size_t total_events_ = 0;
    std::vector<Edge> union_edges_;         // sorted by (src, dst)
    std::vector<std::int64_t> occ_ptr_;     // union_size + 1
    std::vector<std::int32_t> occ_windows_; // local window indices per union edge
    std::vector<std::int64_t> row_ptr_;     // N + 1
    std::vector<std::int64_t> col_ptr_;     // N + 1
    std::vector<std::int32_t> csc_edges_;   // permutation of union edge ids by (dst, src)
};

// Masked reconstruction kernels. Every quantity equals its dense N x N
// counterpart with the diagonal excluded, computed through K x K Gram
// products and rank-one diagonal corrections instead.
namespace kernels {

// d_l(i) = u_{i,l} . v_{i,l}: diagonal of the source-l reconstruction.
Vec reconstruction_diagonal(const Mat& u, const Mat& v);

// C(l,l') = <U_l^T U_l', V_l^T V_l'>_F  (full Frobenius product, diagonal included).
Eigen::MatrixXd cross_gram(const SnmfModel& m);

// D(l,l') = sum_i d_l(i) d_l'(i)  (diagonal-only part of C).
Eigen::MatrixXd diag_gram(const SnmfModel& m);

// Per-source sum of u_i . v_j over the given edges: <A, U_l V_l^T>_F.
Vec edge_affinity(const SnmfModel& m, std::span<const Edge> edges);

// Mixing-update denominator without lambda1/eps:
// <1 - I, U_l V_l^T (.) sum_l' w_l' U_l' V_l'^T>_F per source.
Vec mixing_denominator(const SnmfModel& m, const RowVec& w);

// sum_t w_tl A_t V_l  /  sum_t w_tl A_t^T U_l  (numerators of the embedding updates).
Mat origin_numerator(const SnmfModel& m, const TrainContext& ctx, int source);
Mat dest_numerator(const SnmfModel& m, const TrainContext& ctx, int source);

// Embedding-update denominators including the lambda2 term:
// sum_t w_tl (sum_l' w_tl' (1-I) (.) (U_l' V_l'^T)) V_l + lambda2 U_l, and the transpose analogue.
Mat origin_denominator(const SnmfModel& m, int source);
Mat dest_denominator(const SnmfModel& m, int source);

}  // namespace kernels

// Regularized masked squared error of the reconstruction over the training range.
double loss(const SnmfModel& m, const TrainContext& ctx, ThreadPool* pool = nullptr);

struct Gradients {
    Mat w;               // T x L
    std::vector<Mat> u;  // per source, N x K
    std::vector<Mat> v;
};

// Analytic partial derivatives of the training objective; test oracle and
// convergence diagnostic only, not used by the fit loop.
Gradients grad(const SnmfModel& m, const TrainContext& ctx);

// One full multiplicative-update pass: mixing rows, then every origin
// embedding, then every destination embedding. Preserves nonnegativity.
void sweep(SnmfModel& m, const TrainContext& ctx, ThreadPool* pool = nullptr);

struct FitResult {
    SnmfModel model;
    double initial_loss = 0.0;
    std::vector<double> trace;  // loss after each full sweep
    int sweeps = 0;
    bool converged = false;
};

FitResult fit(const TrainContext& ctx, const Hyperparams& hyper, ThreadPool* pool = nullptr);

// L x L kernel reused across mixing-coefficient refits while embeddings are frozen.
struct MixingKernel {
    Eigen::MatrixXd cross_minus_diag;
};
MixingKernel make_mixing_kernel(const SnmfModel& m);

// One simultaneous multiplicative update of a mixing row against an observed
// edge set; entries at zero stay at zero.
RowVec update_mixing_row(const SnmfModel& m, const MixingKernel& kernel, std::span<const Edge> edges,
                         const RowVec& w);
RowVec update_mixing_row(const SnmfModel& m, std::span<const Edge> edges, const RowVec& w);

// Iterates update_mixing_row from init until the row stabilizes.
RowVec refit_window_weights(const SnmfModel& m, const MixingKernel& kernel, std::span<const Edge> edges,
                            RowVec init, int iters = 200, double tol = 1e-8);
RowVec refit_window_weights(const SnmfModel& m, std::span<const Edge> edges, RowVec init,
                            int iters = 200, double tol = 1e-8);

// Versioned binary container (little-endian, row-major doubles); see
// docs/model_format.md. The history's appended rows persist next to the
// trained mixing block.
void save_model(const SnmfModel& m, const MixingHistory* history, std::uint64_t node_digest,
                const std::string& path);

struct LoadedModel {
    SnmfModel model;
    MixingHistory history;
    std::uint64_t node_digest = 0;
};
LoadedModel load_model(const std::string& path);

// Throws DataError naming the sweep when a non-finite value appears mid-fit.
void throw_if_not_finite(double loss_value, const SnmfModel& m, int sweep_index);

}  // namespace netsep
