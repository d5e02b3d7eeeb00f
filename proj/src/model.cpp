#include "netsep/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>

#include "netsep/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts are not supported");

namespace netsep {

// ---------------------------------------------------------------------------
// Hyperparams / SnmfModel

void Hyperparams::validate() const {
    if (K < 1) throw DataError("K must be >= 1");
    if (L < 1) throw DataError("L must be >= 1");
    if (lambda1 < 0 || lambda2 < 0) throw DataError("regularization weights must be nonnegative");
    if (max_iters < 1) throw DataError("max_iters must be >= 1");
    if (tol < 0) throw DataError("tol must be nonnegative");
    if (!(eps_floor > 0)) throw DataError("eps_floor must be positive");
}

bool SnmfModel::all_finite() const {
    if (!W.allFinite()) return false;
    for (const auto& u : U)
        if (!u.allFinite()) return false;
    for (const auto& v : V)
        if (!v.allFinite()) return false;
    return true;
}

double SnmfModel::min_entry() const {
    double m = W.size() > 0 ? W.minCoeff() : 0.0;
    for (const auto& u : U) m = std::min(m, u.minCoeff());
    for (const auto& v : V) m = std::min(m, v.minCoeff());
    return m;
}

bool SnmfModel::operator==(const SnmfModel& other) const {
    auto same_mat = [](const Mat& a, const Mat& b) {
        return a.rows() == b.rows() && a.cols() == b.cols() &&
               std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
    };
    if (N != other.N || U.size() != other.U.size() || V.size() != other.V.size()) return false;
    if (hyper.K != other.hyper.K || hyper.L != other.hyper.L || hyper.lambda1 != other.hyper.lambda1 ||
        hyper.lambda2 != other.hyper.lambda2 || hyper.max_iters != other.hyper.max_iters ||
        hyper.tol != other.hyper.tol || hyper.eps_floor != other.hyper.eps_floor ||
        hyper.seed != other.hyper.seed) {
        return false;
    }
    if (!same_mat(W, other.W)) return false;
    for (std::size_t l = 0; l < U.size(); ++l) {
        if (!same_mat(U[l], other.U[l]) || !same_mat(V[l], other.V[l])) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// TrainContext

TrainContext::TrainContext(const WindowedGraphSequence& seq, WindowRange range) {
    if (range.begin < 0 || range.end > seq.num_windows() || range.begin > range.end) {
        throw DataError("window range out of bounds");
    }
    n_ = seq.num_nodes();
    windows_.reserve(static_cast<std::size_t>(range.size()));
    for (std::int64_t t = range.begin; t < range.end; ++t) {
        windows_.push_back(seq.window(t));
        total_events_ += windows_.back().size();
    }

    // (edge, window) pairs sorted by edge give the union list, per-edge
    // occurrence windows, and the CSR row pointers in one pass.
    struct Occ {
        Edge e;
        std::int32_t t;
    };
    std::vector<Occ> occs;
    occs.reserve(total_events_);
    for (std::size_t t = 0; t < windows_.size(); ++t) {
        for (const Edge& e : windows_[t]) occs.push_back({e, static_cast<std::int32_t>(t)});
    }
    std::sort(occs.begin(), occs.end(), [](const Occ& a, const Occ& b) {
        return a.e != b.e ? a.e < b.e : a.t < b.t;
    });

    occ_ptr_.push_back(0);
    for (std::size_t i = 0; i < occs.size(); ++i) {
        if (union_edges_.empty() || union_edges_.back() != occs[i].e) {
            if (!union_edges_.empty()) occ_ptr_.push_back(static_cast<std::int64_t>(i));
            union_edges_.push_back(occs[i].e);
        }
        occ_windows_.push_back(occs[i].t);
    }
    occ_ptr_.push_back(static_cast<std::int64_t>(occs.size()));
    if (union_edges_.empty()) occ_ptr_ = {0};

    row_ptr_.assign(static_cast<std::size_t>(n_) + 1, 0);
    for (const Edge& e : union_edges_) row_ptr_[static_cast<std::size_t>(e.src) + 1]++;
    for (std::size_t i = 1; i < row_ptr_.size(); ++i) row_ptr_[i] += row_ptr_[i - 1];

    csc_edges_.resize(union_edges_.size());
    std::iota(csc_edges_.begin(), csc_edges_.end(), 0);
    std::sort(csc_edges_.begin(), csc_edges_.end(), [this](std::int32_t a, std::int32_t b) {
        const Edge& ea = union_edges_[static_cast<std::size_t>(a)];
        const Edge& eb = union_edges_[static_cast<std::size_t>(b)];
        if (ea.dst != eb.dst) return ea.dst < eb.dst;
        return ea.src < eb.src;
    });
    col_ptr_.assign(static_cast<std::size_t>(n_) + 1, 0);
    for (const Edge& e : union_edges_) col_ptr_[static_cast<std::size_t>(e.dst) + 1]++;
    for (std::size_t i = 1; i < col_ptr_.size(); ++i) col_ptr_[i] += col_ptr_[i - 1];
}

std::span<const std::int32_t> TrainContext::occurrences(std::size_t e) const {
    const auto lo = static_cast<std::size_t>(occ_ptr_.at(e));
    const auto hi = static_cast<std::size_t>(occ_ptr_.at(e + 1));
    return {occ_windows_.data() + lo, hi - lo};
}

// ---------------------------------------------------------------------------
// Shared internal pieces

namespace {

struct Grams {
    std::vector<Eigen::MatrixXd> gu;  // L*L entries, gu[a*L+b] = U_a^T U_b
    std::vector<Eigen::MatrixXd> gv;
    Mat dvec;                     // N x L, column l = rowwise U_l . V_l
    Eigen::MatrixXd cross;        // L x L, Frobenius products incl. diagonal
    Eigen::MatrixXd cross_masked; // cross minus the diagonal contribution
};

std::vector<Eigen::MatrixXd> pair_grams(const std::vector<Mat>& a, const std::vector<Mat>& b) {
    const int L = static_cast<int>(a.size());
    std::vector<Eigen::MatrixXd> g(static_cast<std::size_t>(L) * L);
    for (int x = 0; x < L; ++x) {
        for (int y = 0; y < L; ++y) {
            g[static_cast<std::size_t>(x) * L + y].noalias() = a[x].transpose() * b[y];
        }
    }
    return g;
}

Mat diag_vectors(const SnmfModel& m) {
    Mat d(m.N, m.sources());
    for (int l = 0; l < m.sources(); ++l) {
        d.col(l) = m.U[static_cast<std::size_t>(l)].cwiseProduct(m.V[static_cast<std::size_t>(l)]).rowwise().sum();
    }
    return d;
}

Grams compute_grams(const SnmfModel& m) {
    const int L = m.sources();
    Grams g;
    g.gu = pair_grams(m.U, m.U);
    g.gv = pair_grams(m.V, m.V);
    g.dvec = diag_vectors(m);
    g.cross.resize(L, L);
    for (int a = 0; a < L; ++a) {
        for (int b = 0; b < L; ++b) {
            g.cross(a, b) = g.gu[static_cast<std::size_t>(a) * L + b]
                                .cwiseProduct(g.gv[static_cast<std::size_t>(a) * L + b])
                                .sum();
        }
    }
    g.cross_masked = g.cross - g.dvec.transpose() * g.dvec;
    return g;
}

// Per-window, per-source reconstruction mass on observed edges:
// E(t,l) = <A_t, U_l V_l^T>_F. The W-update numerators and the loss both use it.
Mat window_affinities(const SnmfModel& m, const TrainContext& ctx, ThreadPool* pool) {
    const int L = m.sources();
    Mat e = Mat::Zero(ctx.num_windows(), L);
    auto body = [&](std::int64_t t) {
        RowVec acc = RowVec::Zero(L);
        for (const Edge& edge : ctx.window(t)) {
            for (int l = 0; l < L; ++l) {
                acc(l) += m.U[static_cast<std::size_t>(l)].row(edge.src).dot(
                    m.V[static_cast<std::size_t>(l)].row(edge.dst));
            }
        }
        e.row(t) = acc;
    };
    if (pool != nullptr) {
        pool->parallel_for(0, ctx.num_windows(), body);
    } else {
        for (std::int64_t t = 0; t < ctx.num_windows(); ++t) body(t);
    }
    return e;
}

// c(e,l) = sum over windows containing union edge e of w_{t,l}.
Mat edge_window_weights(const TrainContext& ctx, const Mat& w, ThreadPool* pool) {
    const auto edges = ctx.union_edges();
    const int L = static_cast<int>(w.cols());
    Mat c = Mat::Zero(static_cast<Eigen::Index>(edges.size()), L);
    auto body = [&](std::int64_t e) {
        RowVec acc = RowVec::Zero(L);
        for (std::int32_t t : ctx.occurrences(static_cast<std::size_t>(e))) acc += w.row(t);
        c.row(e) = acc;
    };
    if (pool != nullptr) {
        pool->parallel_for(0, static_cast<std::int64_t>(edges.size()), body);
    } else {
        for (std::int64_t e = 0; e < static_cast<std::int64_t>(edges.size()); ++e) body(e);
    }
    return c;
}

// rows i of sum_t w_tl A_t V_l via the union CSR.
Mat csr_numerator(const TrainContext& ctx, const Mat& cw, int l, const Mat& v, ThreadPool* pool) {
    Mat num = Mat::Zero(ctx.num_nodes(), v.cols());
    const auto edges = ctx.union_edges();
    const auto row_ptr = ctx.row_ptr();
    auto body = [&](std::int64_t i) {
        for (std::int64_t e = row_ptr[static_cast<std::size_t>(i)];
             e < row_ptr[static_cast<std::size_t>(i) + 1]; ++e) {
            num.row(i) += cw(e, l) * v.row(edges[static_cast<std::size_t>(e)].dst);
        }
    };
    if (pool != nullptr) {
        pool->parallel_for(0, ctx.num_nodes(), body);
    } else {
        for (std::int64_t i = 0; i < ctx.num_nodes(); ++i) body(i);
    }
    return num;
}

// rows j of sum_t w_tl A_t^T U_l via the union CSC.
Mat csc_numerator(const TrainContext& ctx, const Mat& cw, int l, const Mat& u, ThreadPool* pool) {
    Mat num = Mat::Zero(ctx.num_nodes(), u.cols());
    const auto edges = ctx.union_edges();
    const auto col_ptr = ctx.col_ptr();
    const auto csc = ctx.csc_edges();
    auto body = [&](std::int64_t j) {
        for (std::int64_t k = col_ptr[static_cast<std::size_t>(j)];
             k < col_ptr[static_cast<std::size_t>(j) + 1]; ++k) {
            const std::int32_t e = csc[static_cast<std::size_t>(k)];
            num.row(j) += cw(e, l) * u.row(edges[static_cast<std::size_t>(e)].src);
        }
    };
    if (pool != nullptr) {
        pool->parallel_for(0, ctx.num_nodes(), body);
    } else {
        for (std::int64_t j = 0; j < ctx.num_nodes(); ++j) body(j);
    }
    return num;
}

// sum_l' P(l,l') [ U_l' (V_l'^T V_l) - diag(d_l') V_l ] + lambda2 U_l, and the
// mirrored destination form. `primary` is the factor list being updated.
Mat embedding_denominator(const std::vector<Mat>& primary, const std::vector<Mat>& fixed,
                          const std::vector<Eigen::MatrixXd>& fixed_grams, const Mat& dvec,
                          const Eigen::MatrixXd& p, double lambda2, int l) {
    const int L = static_cast<int>(primary.size());
    Mat den = lambda2 * primary[static_cast<std::size_t>(l)];
    Vec dcoef = Vec::Zero(dvec.rows());
    for (int o = 0; o < L; ++o) {
        den.noalias() +=
            p(l, o) * (primary[static_cast<std::size_t>(o)] * fixed_grams[static_cast<std::size_t>(o) * L + l]);
        dcoef += p(l, o) * dvec.col(o);
    }
    den.noalias() -= dcoef.asDiagonal() * fixed[static_cast<std::size_t>(l)];
    return den;
}

Vec affinity_over_edges(const SnmfModel& m, std::span<const Edge> edges) {
    const int L = m.sources();
    Vec acc = Vec::Zero(L);
    for (const Edge& e : edges) {
        for (int l = 0; l < L; ++l) {
            acc(l) += m.U[static_cast<std::size_t>(l)].row(e.src).dot(
                m.V[static_cast<std::size_t>(l)].row(e.dst));
        }
    }
    return acc;
}

double loss_from_parts(const SnmfModel& m, const TrainContext& ctx, const Mat& affinities,
                       const Grams& grams) {
    const Eigen::MatrixXd p = m.W.transpose() * m.W;
    const double data_term = 0.5 * (static_cast<double>(ctx.total_events()) -
                                    2.0 * m.W.cwiseProduct(affinities).sum() +
                                    p.cwiseProduct(grams.cross_masked).sum());
    double reg = m.hyper.lambda1 * m.W.sum();
    for (int l = 0; l < m.sources(); ++l) {
        reg += 0.5 * m.hyper.lambda2 *
               (m.U[static_cast<std::size_t>(l)].squaredNorm() + m.V[static_cast<std::size_t>(l)].squaredNorm());
    }
    return data_term + reg;
}

void check_dimensions(const SnmfModel& m, const TrainContext& ctx) {
    if (m.N != ctx.num_nodes()) throw DataError("model and sequence disagree on node count");
    if (m.W.rows() != ctx.num_windows()) {
        throw DataError("mixing matrix has " + std::to_string(m.W.rows()) + " rows but the range has " +
                        std::to_string(ctx.num_windows()) + " windows");
    }
    if (m.sources() != m.hyper.L || static_cast<int>(m.V.size()) != m.hyper.L) {
        throw DataError("model source count mismatch");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Public kernels (Gram-identity forms; tests compare them to dense computation)

namespace kernels {

Vec reconstruction_diagonal(const Mat& u, const Mat& v) { return u.cwiseProduct(v).rowwise().sum(); }

Eigen::MatrixXd cross_gram(const SnmfModel& m) { return compute_grams(m).cross; }

Eigen::MatrixXd diag_gram(const SnmfModel& m) {
    const Mat d = diag_vectors(m);
    return d.transpose() * d;
}

Vec edge_affinity(const SnmfModel& m, std::span<const Edge> edges) {
    return affinity_over_edges(m, edges);
}

Vec mixing_denominator(const SnmfModel& m, const RowVec& w) {
    const Grams g = compute_grams(m);
    return g.cross_masked * w.transpose();
}

Mat origin_numerator(const SnmfModel& m, const TrainContext& ctx, int source) {
    const Mat cw = edge_window_weights(ctx, m.W, nullptr);
    return csr_numerator(ctx, cw, source, m.V[static_cast<std::size_t>(source)], nullptr);
}

Mat dest_numerator(const SnmfModel& m, const TrainContext& ctx, int source) {
    const Mat cw = edge_window_weights(ctx, m.W, nullptr);
    return csc_numerator(ctx, cw, source, m.U[static_cast<std::size_t>(source)], nullptr);
}

Mat origin_denominator(const SnmfModel& m, int source) {
    const Eigen::MatrixXd p = m.W.transpose() * m.W;
    return embedding_denominator(m.U, m.V, pair_grams(m.V, m.V), diag_vectors(m), p, m.hyper.lambda2,
                                 source);
}

Mat dest_denominator(const SnmfModel& m, int source) {
    const Eigen::MatrixXd p = m.W.transpose() * m.W;
    return embedding_denominator(m.V, m.U, pair_grams(m.U, m.U), diag_vectors(m), p, m.hyper.lambda2,
                                 source);
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// Loss / gradients

double loss(const SnmfModel& m, const TrainContext& ctx, ThreadPool* pool) {
    check_dimensions(m, ctx);
    const Mat affinities = window_affinities(m, ctx, pool);
    const Grams grams = compute_grams(m);
    return loss_from_parts(m, ctx, affinities, grams);
}

Gradients grad(const SnmfModel& m, const TrainContext& ctx) {
    check_dimensions(m, ctx);
    const Mat affinities = window_affinities(m, ctx, nullptr);
    const Grams grams = compute_grams(m);
    const Eigen::MatrixXd p = m.W.transpose() * m.W;
    const Mat cw = edge_window_weights(ctx, m.W, nullptr);

    Gradients g;
    g.w = (-affinities + m.W * grams.cross_masked).array() + m.hyper.lambda1;
    for (int l = 0; l < m.sources(); ++l) {
        g.u.push_back(embedding_denominator(m.U, m.V, grams.gv, grams.dvec, p, m.hyper.lambda2, l) -
                      csr_numerator(ctx, cw, l, m.V[static_cast<std::size_t>(l)], nullptr));
        g.v.push_back(embedding_denominator(m.V, m.U, grams.gu, grams.dvec, p, m.hyper.lambda2, l) -
                      csc_numerator(ctx, cw, l, m.U[static_cast<std::size_t>(l)], nullptr));
    }
    return g;
}

// ---------------------------------------------------------------------------
// Multiplicative updates

void sweep(SnmfModel& m, const TrainContext& ctx, ThreadPool* pool) {
    check_dimensions(m, ctx);
    const int L = m.sources();
    const double eps = m.hyper.eps_floor;

    // Mixing rows: simultaneous update per row from the row's previous values.
    {
        const Mat affinities = window_affinities(m, ctx, pool);
        const Grams grams = compute_grams(m);
        auto body = [&](std::int64_t t) {
            const RowVec w = m.W.row(t);
            RowVec den = (w * grams.cross_masked).array() + m.hyper.lambda1 + eps;
            den = den.cwiseMax(eps);
            m.W.row(t) = w.cwiseProduct(affinities.row(t)).cwiseQuotient(den);
        };
        if (pool != nullptr) {
            pool->parallel_for(0, ctx.num_windows(), body);
        } else {
            for (std::int64_t t = 0; t < ctx.num_windows(); ++t) body(t);
        }
    }

    const Eigen::MatrixXd p = m.W.transpose() * m.W;
    const Mat cw = edge_window_weights(ctx, m.W, pool);

    // Origin embeddings; sources update in order against the freshest state.
    {
        const auto gv = pair_grams(m.V, m.V);
        Mat dvec = diag_vectors(m);
        for (int l = 0; l < L; ++l) {
            const Mat num = csr_numerator(ctx, cw, l, m.V[static_cast<std::size_t>(l)], pool);
            Mat den = embedding_denominator(m.U, m.V, gv, dvec, p, m.hyper.lambda2, l);
            den = (den.array() + eps).cwiseMax(eps);
            Mat& u = m.U[static_cast<std::size_t>(l)];
            u = u.cwiseProduct(num).cwiseQuotient(den);
            dvec.col(l) = kernels::reconstruction_diagonal(u, m.V[static_cast<std::size_t>(l)]);
        }
    }

    // Destination embeddings.
    {
        const auto gu = pair_grams(m.U, m.U);
        Mat dvec = diag_vectors(m);
        for (int l = 0; l < L; ++l) {
            const Mat num = csc_numerator(ctx, cw, l, m.U[static_cast<std::size_t>(l)], pool);
            Mat den = embedding_denominator(m.V, m.U, gu, dvec, p, m.hyper.lambda2, l);
            den = (den.array() + eps).cwiseMax(eps);
            Mat& v = m.V[static_cast<std::size_t>(l)];
            v = v.cwiseProduct(num).cwiseQuotient(den);
            dvec.col(l) = kernels::reconstruction_diagonal(m.U[static_cast<std::size_t>(l)], v);
        }
    }
}

void throw_if_not_finite(double loss_value, const SnmfModel& m, int sweep_index) {
    if (std::isfinite(loss_value) && m.all_finite()) return;
    throw DataError("non-finite parameters at sweep " + std::to_string(sweep_index));
}

FitResult fit(const TrainContext& ctx, const Hyperparams& hyper, ThreadPool* pool) {
    hyper.validate();
    if (ctx.total_events() == 0) throw DataError("degenerate input: every training window is empty");
    const NodeId n = ctx.num_nodes();
    const std::int64_t t = ctx.num_windows();
    if (n < 2) throw DataError("degenerate input: need at least two nodes");

    SnmfModel m;
    m.hyper = hyper;
    m.N = n;
    Rng rng(hyper.seed);
    auto fill_uniform = [&rng](Mat& mat) {
        for (Eigen::Index r = 0; r < mat.rows(); ++r) {
            for (Eigen::Index c = 0; c < mat.cols(); ++c) mat(r, c) = 0.01 + rng.unit();
        }
    };
    m.W.resize(t, hyper.L);
    fill_uniform(m.W);
    for (int l = 0; l < hyper.L; ++l) {
        m.U.emplace_back(n, hyper.K);
        fill_uniform(m.U.back());
        m.V.emplace_back(n, hyper.K);
        fill_uniform(m.V.back());
    }

    // Scale the strictly positive start so the mean predicted off-diagonal
    // value matches the observed edge density.
    const double pairs = static_cast<double>(t) * n * (static_cast<double>(n) - 1.0);
    const double density = static_cast<double>(ctx.total_events()) / pairs;
    double mean_prediction = 0.0;
    for (int l = 0; l < hyper.L; ++l) {
        const Mat& u = m.U[static_cast<std::size_t>(l)];
        const Mat& v = m.V[static_cast<std::size_t>(l)];
        const double off_diag_mass =
            u.colwise().sum().dot(v.colwise().sum()) - kernels::reconstruction_diagonal(u, v).sum();
        mean_prediction += m.W.col(l).sum() * off_diag_mass / pairs;
    }
    const double scale = std::cbrt(density / mean_prediction);
    m.W *= scale;
    for (int l = 0; l < hyper.L; ++l) {
        m.U[static_cast<std::size_t>(l)] *= scale;
        m.V[static_cast<std::size_t>(l)] *= scale;
    }

    FitResult result;
    result.initial_loss = loss(m, ctx, pool);
    double prev = result.initial_loss;
    for (int s = 1; s <= hyper.max_iters; ++s) {
        sweep(m, ctx, pool);
        const double j = loss(m, ctx, pool);
        throw_if_not_finite(j, m, s);
        result.trace.push_back(j);
        result.sweeps = s;
        if (std::abs(prev - j) / std::max(prev, hyper.eps_floor) < hyper.tol) {
            result.converged = true;
            break;
        }
        prev = j;
    }
    result.model = std::move(m);
    return result;
}

// ---------------------------------------------------------------------------
// Mixing-row refits (embeddings frozen)

MixingKernel make_mixing_kernel(const SnmfModel& m) {
    return MixingKernel{compute_grams(m).cross_masked};
}

RowVec update_mixing_row(const SnmfModel& m, const MixingKernel& kernel, std::span<const Edge> edges,
                         const RowVec& w) {
    if (w.size() != m.sources()) throw DataError("mixing row has wrong length");
    const Vec num = affinity_over_edges(m, edges);
    RowVec den = (w * kernel.cross_minus_diag).array() + m.hyper.lambda1 + m.hyper.eps_floor;
    den = den.cwiseMax(m.hyper.eps_floor);
    return w.cwiseProduct(num.transpose()).cwiseQuotient(den);
}

RowVec update_mixing_row(const SnmfModel& m, std::span<const Edge> edges, const RowVec& w) {
    return update_mixing_row(m, make_mixing_kernel(m), edges, w);
}

RowVec refit_window_weights(const SnmfModel& m, const MixingKernel& kernel, std::span<const Edge> edges,
                            RowVec init, int iters, double tol) {
    if (init.size() != m.sources()) throw DataError("mixing row has wrong length");
    const double eps = m.hyper.eps_floor;
    const Vec num = affinity_over_edges(m, edges);
    RowVec w = std::move(init);
    for (int it = 0; it < iters; ++it) {
        RowVec den = (w * kernel.cross_minus_diag).array() + m.hyper.lambda1 + eps;
        den = den.cwiseMax(eps);
        const RowVec next = w.cwiseProduct(num.transpose()).cwiseQuotient(den);
        const double delta = (next - w).cwiseAbs().maxCoeff();
        const double scale = std::max(w.cwiseAbs().maxCoeff(), eps);
        w = next;
        if (delta / scale < tol) break;
    }
    return w;
}

RowVec refit_window_weights(const SnmfModel& m, std::span<const Edge> edges, RowVec init, int iters,
                            double tol) {
    return refit_window_weights(m, make_mixing_kernel(m), edges, std::move(init), iters, tol);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kMagic[8] = {'N', 'S', 'E', 'P', 'M', 'O', 'D', 'L'};

struct FileCloser {
    std::FILE* f;
    ~FileCloser() {
        if (f != nullptr) std::fclose(f);
    }
};

void write_raw(std::FILE* f, const void* data, std::size_t bytes) {
    if (std::fwrite(data, 1, bytes, f) != bytes) throw DataError("model write failed");
}
template <typename T>
void write_pod(std::FILE* f, T value) {
    write_raw(f, &value, sizeof(T));
}

void read_raw(std::FILE* f, void* data, std::size_t bytes) {
    if (std::fread(data, 1, bytes, f) != bytes) throw DataError("corrupt model file: truncated");
}
template <typename T>
T read_pod(std::FILE* f) {
    T value;
    read_raw(f, &value, sizeof(T));
    return value;
}

void write_matrix(std::FILE* f, const Mat& m) {
    write_raw(f, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

Mat read_matrix(std::FILE* f, Eigen::Index rows, Eigen::Index cols) {
    Mat m(rows, cols);
    read_raw(f, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    return m;
}

}  // namespace

void save_model(const SnmfModel& m, const MixingHistory* history, std::uint64_t node_digest,
                const std::string& path) {
    std::FILE* raw = std::fopen(path.c_str(), "wb");
    if (raw == nullptr) throw DataError("cannot open '" + path + "' for writing");
    FileCloser closer{raw};

    write_raw(raw, kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(raw, kModelFormatVersion);
    write_pod<std::uint64_t>(raw, static_cast<std::uint64_t>(m.N));
    write_pod<std::uint64_t>(raw, static_cast<std::uint64_t>(m.hyper.K));
    write_pod<std::uint64_t>(raw, static_cast<std::uint64_t>(m.hyper.L));
    write_pod<std::uint64_t>(raw, static_cast<std::uint64_t>(m.W.rows()));
    write_pod<double>(raw, m.hyper.lambda1);
    write_pod<double>(raw, m.hyper.lambda2);
    write_pod<std::int64_t>(raw, m.hyper.max_iters);
    write_pod<double>(raw, m.hyper.tol);
    write_pod<double>(raw, m.hyper.eps_floor);
    write_pod<std::uint64_t>(raw, m.hyper.seed);
    write_pod<std::uint64_t>(raw, node_digest);
    write_matrix(raw, m.W);
    for (const Mat& u : m.U) write_matrix(raw, u);
    for (const Mat& v : m.V) write_matrix(raw, v);

    // Append-log: history rows beyond the trained block.
    const std::int64_t trained = m.W.rows();
    std::uint64_t appended = 0;
    std::int64_t tau = kDefaultTau;
    if (history != nullptr) {
        tau = history->tau();
        appended = static_cast<std::uint64_t>(history->size()) - static_cast<std::uint64_t>(trained);
    }
    write_pod<std::int64_t>(raw, tau);
    write_pod<std::uint64_t>(raw, appended);
    if (history != nullptr) {
        for (std::size_t i = static_cast<std::size_t>(trained); i < history->size(); ++i) {
            write_pod<std::int64_t>(raw, history->windows()[i]);
            const RowVec& row = history->row(i);
            write_raw(raw, row.data(), sizeof(double) * static_cast<std::size_t>(row.size()));
        }
    }
}

LoadedModel load_model(const std::string& path) {
    std::FILE* raw = std::fopen(path.c_str(), "rb");
    if (raw == nullptr) throw DataError("cannot open model file '" + path + "'");
    FileCloser closer{raw};

    char magic[8];
    read_raw(raw, magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("'" + path + "' is not a netsep model file");
    }
    const auto version = read_pod<std::uint32_t>(raw);
    if (version != kModelFormatVersion) {
        throw DataError("unsupported model format version " + std::to_string(version));
    }

    SnmfModel m;
    const auto n = read_pod<std::uint64_t>(raw);
    const auto k = read_pod<std::uint64_t>(raw);
    const auto l = read_pod<std::uint64_t>(raw);
    const auto t = read_pod<std::uint64_t>(raw);
    if (n > (1ULL << 31) || k > (1ULL << 20) || l > (1ULL << 20) || t > (1ULL << 31) || k == 0 || l == 0) {
        throw DataError("corrupt model file: implausible dimensions");
    }
    m.N = static_cast<NodeId>(n);
    m.hyper.K = static_cast<int>(k);
    m.hyper.L = static_cast<int>(l);
    m.hyper.lambda1 = read_pod<double>(raw);
    m.hyper.lambda2 = read_pod<double>(raw);
    m.hyper.max_iters = static_cast<int>(read_pod<std::int64_t>(raw));
    m.hyper.tol = read_pod<double>(raw);
    m.hyper.eps_floor = read_pod<double>(raw);
    m.hyper.seed = read_pod<std::uint64_t>(raw);
    const auto digest = read_pod<std::uint64_t>(raw);
    m.W = read_matrix(raw, static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(l));
    for (std::uint64_t i = 0; i < l; ++i) {
        m.U.push_back(read_matrix(raw, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)));
    }
    for (std::uint64_t i = 0; i < l; ++i) {
        m.V.push_back(read_matrix(raw, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)));
    }

    const auto tau = read_pod<std::int64_t>(raw);
    const auto appended = read_pod<std::uint64_t>(raw);
    MixingHistory history = MixingHistory::from_mixing_matrix(m.W, tau);
    for (std::uint64_t i = 0; i < appended; ++i) {
        const auto window = read_pod<std::int64_t>(raw);
        RowVec row(static_cast<Eigen::Index>(l));
        read_raw(raw, row.data(), sizeof(double) * static_cast<std::size_t>(row.size()));
        history.append(window, std::move(row));
    }
    char extra;
    if (std::fread(&extra, 1, 1, raw) != 0) throw DataError("corrupt model file: trailing bytes");

    if (!m.all_finite() || m.min_entry() < 0.0) {
        throw DataError("corrupt model file: non-finite or negative parameters");
    }
    return LoadedModel{std::move(m), std::move(history), digest};
}

}  // namespace netsep
