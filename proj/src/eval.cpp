#include "netsep/eval.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

namespace netsep {

// ---------------------------------------------------------------------------
// Pools and samplers

NegativePools NegativePools::build(const WindowedGraphSequence& seq, WindowRange train,
                                   WindowRange test) {
    NegativePools pools;
    pools.n = seq.num_nodes();
    pools.train_pairs = seq.distinct_pairs(train);
    const std::vector<Edge> test_pairs = seq.distinct_pairs(test);
    pools.test_only_pairs.reserve(test_pairs.size());
    std::set_difference(test_pairs.begin(), test_pairs.end(), pools.train_pairs.begin(),
                        pools.train_pairs.end(), std::back_inserter(pools.test_only_pairs));
    return pools;
}

NegativeSampler::NegativeSampler(NegativeKind kind, const NegativePools& pools, std::uint64_t seed)
    : kind_(kind), pools_(&pools), rng_(seed) {}

std::vector<Edge> NegativeSampler::eligible_pool(NegativeKind kind, const NegativePools& pools,
                                                 std::span<const Edge> positives) {
    if (kind == NegativeKind::Random) return {};
    const std::vector<Edge>& base =
        kind == NegativeKind::Historical ? pools.train_pairs : pools.test_only_pairs;
    std::vector<Edge> eligible;
    eligible.reserve(base.size());
    std::set_difference(base.begin(), base.end(), positives.begin(), positives.end(),
                        std::back_inserter(eligible));
    return eligible;
}

std::vector<Edge> NegativeSampler::sample_from_pool(std::span<const Edge> eligible, std::size_t count) {
    std::vector<Edge> out;
    if (eligible.empty()) return out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(eligible[rng_.index(eligible.size())]);
    }
    return out;
}

std::vector<Edge> NegativeSampler::sample_random(std::span<const Edge> positives) {
    std::vector<Edge> out;
    const auto n = static_cast<std::uint64_t>(pools_->n);
    if (n < 2) return out;
    const double total_pairs = static_cast<double>(n) * (static_cast<double>(n) - 1.0);
    if (static_cast<double>(positives.size()) >= total_pairs) return out;  // nothing to rewire to
    out.reserve(positives.size());
    for (std::size_t i = 0; i < positives.size(); ++i) {
        Edge e;
        do {
            e = {static_cast<NodeId>(rng_.index(n)), static_cast<NodeId>(rng_.index(n))};
        } while (e.src == e.dst || std::binary_search(positives.begin(), positives.end(), e));
        out.push_back(e);
    }
    return out;
}

std::vector<Edge> NegativeSampler::sample(std::span<const Edge> positives) {
    if (positives.empty()) return {};
    if (kind_ == NegativeKind::Random) return sample_random(positives);
    const std::vector<Edge> eligible = eligible_pool(kind_, *pools_, positives);
    return sample_from_pool(eligible, positives.size());
}

// ---------------------------------------------------------------------------
// Metrics

double auc(std::span<const double> pos_scores, std::span<const double> neg_scores) {
    if (pos_scores.empty() || neg_scores.empty()) {
        throw DataError("auc requires nonempty score lists on both sides");
    }
    std::vector<std::pair<double, bool>> all;
    all.reserve(pos_scores.size() + neg_scores.size());
    for (double s : pos_scores) all.emplace_back(s, true);
    for (double s : neg_scores) all.emplace_back(s, false);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    // wins2 = 2 * #{pos > neg} + #{pos == neg}, exact in integers.
    std::uint64_t wins2 = 0;
    std::uint64_t neg_below = 0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        std::uint64_t pos_here = 0, neg_here = 0;
        while (j < all.size() && all[j].first == all[i].first) {
            all[j].second ? ++pos_here : ++neg_here;
            ++j;
        }
        wins2 += pos_here * (2 * neg_below + neg_here);
        neg_below += neg_here;
        i = j;
    }
    return static_cast<double>(wins2) /
           (2.0 * static_cast<double>(pos_scores.size()) * static_cast<double>(neg_scores.size()));
}

double ndcg_at(std::span<const ScoredEdge> ranked, double cutoff_fraction) {
    if (!(cutoff_fraction > 0.0) || cutoff_fraction > 1.0) {
        throw DataError("cutoff_fraction must lie in (0, 1]");
    }
    if (ranked.empty()) return 0.0;
    std::size_t total_pos = 0;
    for (const ScoredEdge& e : ranked) {
        if (e.label == 1) ++total_pos;
    }
    if (total_pos == 0) return 0.0;

    const auto k = static_cast<std::size_t>(
        std::ceil(cutoff_fraction * static_cast<double>(ranked.size())));
    double dcg = 0.0;
    for (std::size_t r = 1; r <= k && r <= ranked.size(); ++r) {
        if (ranked[r - 1].label == 1) dcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    }
    double idcg = 0.0;
    for (std::size_t r = 1; r <= std::min(k, total_pos); ++r) {
        idcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    }
    return dcg / idcg;
}

// ---------------------------------------------------------------------------
// EdgeBank

namespace {
std::uint64_t edge_key(Edge e) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e.src)) << 32) |
           static_cast<std::uint32_t>(e.dst);
}
}  // namespace

EdgeBank::EdgeBank(Variant variant, std::int64_t window_length)
    : variant_(variant), window_length_(window_length) {
    if (variant_ == Variant::Windowed && window_length_ < 1) {
        throw DataError("EdgeBank window length must be positive");
    }
}

void EdgeBank::observe(std::span<const Edge> edges, std::int64_t t) {
    for (const Edge& e : edges) {
        auto [it, inserted] = last_seen_.try_emplace(edge_key(e), t);
        if (!inserted) it->second = std::max(it->second, t);
    }
}

double EdgeBank::score(Edge e, std::int64_t t) const {
    const auto it = last_seen_.find(edge_key(e));
    if (it == last_seen_.end()) return 0.0;
    if (variant_ == Variant::Infinite) return 1.0;
    return (t - it->second) <= window_length_ ? 1.0 : 0.0;
}

// ---------------------------------------------------------------------------
// Scorers

SnmfScorer::SnmfScorer(const SnmfModel& model, MixingHistory history, RefitOptions options,
                       ThreadPool* pool)
    : model_(model),
      kernel_(make_mixing_kernel(model)),
      history_(std::move(history)),
      options_(options),
      pool_(pool) {}

void SnmfScorer::begin_window(std::int64_t t) { current_ = history_.predict(t); }

double SnmfScorer::score(Edge e) const { return score_edge(model_, current_, e.src, e.dst); }

void SnmfScorer::end_window(std::span<const Edge> edges, std::int64_t t) {
    RowVec init = refit_init(model_, current_, options_);
    history_.append(t, refit_window_weights(model_, kernel_, edges, std::move(init), options_.iters,
                                            options_.tol));
}

EdgeBankScorer::EdgeBankScorer(EdgeBank::Variant variant, std::int64_t window_length,
                               const WindowedGraphSequence& seq, std::int64_t from)
    : bank_(variant, window_length),
      name_(variant == EdgeBank::Variant::Infinite ? "edgebank-inf" : "edgebank-win") {
    for (std::int64_t t = 0; t < from && t < seq.num_windows(); ++t) {
        bank_.observe(seq.window(t), t);
    }
}

// ---------------------------------------------------------------------------
// Evaluation harness

std::string task_name(Task task) {
    switch (task) {
        case Task::Anomaly: return "anomaly";
        case Task::Random: return "random";
        case Task::Historical: return "historical";
        case Task::Inductive: return "inductive";
    }
    return "?";
}

std::optional<Task> task_from_name(const std::string& name) {
    if (name == "anomaly") return Task::Anomaly;
    if (name == "random") return Task::Random;
    if (name == "historical") return Task::Historical;
    if (name == "inductive") return Task::Inductive;
    return std::nullopt;
}

namespace {

NegativeKind kind_of(Task task) {
    switch (task) {
        case Task::Random: return NegativeKind::Random;
        case Task::Historical: return NegativeKind::Historical;
        case Task::Inductive: return NegativeKind::Inductive;
        default: throw DataError("task has no negative sampler");
    }
}

void finish_stats(const std::vector<double>& xs, double& mean, double& std_out) {
    if (xs.empty()) {
        mean = std_out = 0.0;
        return;
    }
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - m) * (x - m);
    var /= static_cast<double>(xs.size());
    mean = m;
    std_out = std::sqrt(std::max(0.0, var));
}

struct PerWindowRow {
    std::string task;
    int run;
    std::int64_t window;
    double value;
};

}  // namespace

EvalReport run_eval(WindowScorer& scorer, const WindowedGraphSequence& seq, WindowRange train,
                    WindowRange valid, WindowRange test, const LabeledEdgeSet* labels,
                    const EvalOptions& options, ThreadPool* pool) {
    if (options.runs < 1) throw DataError("need at least one run");
    const NegativePools pools = NegativePools::build(seq, train, test);

    bool do_anomaly = false;
    std::vector<Task> link_tasks;
    for (Task task : options.tasks) {
        if (task == Task::Anomaly) {
            if (labels == nullptr || labels->empty()) {
                log_warn("anomaly task skipped: no labels provided");
            } else {
                do_anomaly = true;
            }
        } else {
            link_tasks.push_back(task);
        }
    }
    const int runs = options.runs;

    // One sampler per (run, link task); each advances in window order.
    std::vector<std::vector<NegativeSampler>> samplers(static_cast<std::size_t>(runs));
    for (int r = 0; r < runs; ++r) {
        for (std::size_t k = 0; k < link_tasks.size(); ++k) {
            samplers[static_cast<std::size_t>(r)].emplace_back(
                kind_of(link_tasks[k]), pools,
                derive_seed(options.seed + static_cast<std::uint64_t>(r),
                            static_cast<std::uint64_t>(link_tasks[k])));
        }
    }

    std::vector<std::vector<double>> task_pos(link_tasks.size());
    std::vector<std::vector<std::vector<double>>> task_neg(
        link_tasks.size(), std::vector<std::vector<double>>(static_cast<std::size_t>(runs)));
    std::vector<std::int64_t> windows_used(link_tasks.size(), 0);
    std::vector<std::int64_t> windows_skipped(link_tasks.size(), 0);

    std::vector<double> normal_scores, malicious_scores;
    std::vector<ScoredEdge> anomaly_ranking;
    std::int64_t anomaly_windows = 0;

    std::vector<PerWindowRow> per_window;
    const bool want_per_window = !options.per_window_csv.empty();

    std::vector<double> obs_scores;
    for (std::int64_t t = valid.begin; t < test.end; ++t) {
        const std::span<const Edge> edges = seq.window(t);
        scorer.begin_window(t);

        if (t >= test.begin && !edges.empty()) {
            obs_scores.assign(edges.size(), 0.0);
            auto score_body = [&](std::int64_t k) {
                obs_scores[static_cast<std::size_t>(k)] = scorer.score(edges[static_cast<std::size_t>(k)]);
            };
            if (pool != nullptr) {
                pool->parallel_for(0, static_cast<std::int64_t>(edges.size()), score_body);
            } else {
                for (std::int64_t k = 0; k < static_cast<std::int64_t>(edges.size()); ++k) score_body(k);
            }

            if (do_anomaly) {
                ++anomaly_windows;
                for (std::size_t k = 0; k < edges.size(); ++k) {
                    const bool bad = labels->contains({t, edges[k].src, edges[k].dst});
                    (bad ? malicious_scores : normal_scores).push_back(obs_scores[k]);
                    anomaly_ranking.push_back({t, edges[k].src, edges[k].dst, obs_scores[k], bad ? 1 : 0});
                }
            }

            for (std::size_t task_idx = 0; task_idx < link_tasks.size(); ++task_idx) {
                const Task task = link_tasks[task_idx];
                const NegativeKind kind = kind_of(task);
                std::vector<Edge> eligible;
                if (kind != NegativeKind::Random) {
                    eligible = NegativeSampler::eligible_pool(kind, pools, edges);
                    if (eligible.empty()) {
                        ++windows_skipped[task_idx];
                        log_warn("window " + std::to_string(t) + ": no candidates for task '" +
                                 task_name(task) + "', skipped");
                        continue;
                    }
                }
                ++windows_used[task_idx];
                task_pos[task_idx].insert(task_pos[task_idx].end(), obs_scores.begin(), obs_scores.end());

                std::vector<std::vector<double>> run_scores(static_cast<std::size_t>(runs));
                auto run_body = [&](std::int64_t r) {
                    NegativeSampler& sampler = samplers[static_cast<std::size_t>(r)][task_idx];
                    const std::vector<Edge> negs = kind == NegativeKind::Random
                                                       ? sampler.sample(edges)
                                                       : sampler.sample_from_pool(eligible, edges.size());
                    auto& out = run_scores[static_cast<std::size_t>(r)];
                    out.reserve(negs.size());
                    for (const Edge& e : negs) out.push_back(scorer.score(e));
                };
                if (pool != nullptr) {
                    pool->parallel_for(0, runs, run_body);
                } else {
                    for (int r = 0; r < runs; ++r) run_body(r);
                }
                for (int r = 0; r < runs; ++r) {
                    auto& dest = task_neg[task_idx][static_cast<std::size_t>(r)];
                    const auto& src = run_scores[static_cast<std::size_t>(r)];
                    if (want_per_window && !src.empty()) {
                        per_window.push_back(
                            {task_name(task), r, t, auc(obs_scores, src)});
                    }
                    dest.insert(dest.end(), src.begin(), src.end());
                }
            }
        }
        scorer.end_window(edges, t);
    }

    EvalReport report;
    report.method = scorer.name();
    report.runs = runs;
    report.seed = options.seed;
    report.ndcg_frac = options.ndcg_frac;

    if (do_anomaly) {
        if (normal_scores.empty() || malicious_scores.empty()) {
            log_warn("anomaly task skipped: test range lacks " +
                     std::string(normal_scores.empty() ? "normal" : "labeled malicious") + " edges");
        } else {
            TaskResult res;
            const double anomaly_auc = auc(normal_scores, malicious_scores);
            const std::vector<ScoredEdge> ranked = rank_anomalies(std::move(anomaly_ranking), 1.0);
            const double ndcg = ndcg_at(ranked, options.ndcg_frac);
            res.auc_runs.assign(static_cast<std::size_t>(runs), anomaly_auc);
            res.ndcg_runs.assign(static_cast<std::size_t>(runs), ndcg);
            finish_stats(res.auc_runs, res.auc_mean, res.auc_std);
            finish_stats(res.ndcg_runs, res.ndcg_mean, res.ndcg_std);
            res.windows_used = anomaly_windows;
            report.tasks.emplace(task_name(Task::Anomaly), std::move(res));
        }
    }

    for (std::size_t task_idx = 0; task_idx < link_tasks.size(); ++task_idx) {
        TaskResult res;
        res.windows_used = windows_used[task_idx];
        res.windows_skipped = windows_skipped[task_idx];
        if (task_pos[task_idx].empty()) {
            log_warn("task '" + task_name(link_tasks[task_idx]) + "': no usable windows");
        } else {
            for (int r = 0; r < runs; ++r) {
                res.auc_runs.push_back(auc(task_pos[task_idx], task_neg[task_idx][static_cast<std::size_t>(r)]));
            }
            finish_stats(res.auc_runs, res.auc_mean, res.auc_std);
        }
        report.tasks.emplace(task_name(link_tasks[task_idx]), std::move(res));
    }

    if (want_per_window) {
        std::FILE* f = std::fopen(options.per_window_csv.c_str(), "wb");
        if (f == nullptr) throw DataError("cannot open '" + options.per_window_csv + "' for writing");
        std::fputs("task,run,window,auc\n", f);
        for (const PerWindowRow& row : per_window) {
            std::fprintf(f, "%s,%d,%" PRId64 ",%.17g\n", row.task.c_str(), row.run, row.window,
                         row.value);
        }
        std::fclose(f);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report serialization

std::string EvalReport::to_json() const {
    nlohmann::ordered_json doc;
    doc["method"] = method;
    doc["runs"] = runs;
    doc["seed"] = seed;
    doc["ndcg_frac"] = ndcg_frac;
    nlohmann::ordered_json tasks_doc;
    for (const auto& [name, res] : tasks) {
        nlohmann::ordered_json td;
        td["auc"] = res.auc_runs;
        td["auc_mean"] = res.auc_mean;
        td["auc_std"] = res.auc_std;
        if (!res.ndcg_runs.empty()) {
            td["ndcg"] = res.ndcg_runs;
            td["ndcg_mean"] = res.ndcg_mean;
            td["ndcg_std"] = res.ndcg_std;
        }
        td["windows_used"] = res.windows_used;
        td["windows_skipped"] = res.windows_skipped;
        tasks_doc[name] = std::move(td);
    }
    doc["tasks"] = std::move(tasks_doc);
    return doc.dump(2) + "\n";
}

void EvalReport::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << to_json();
}

}  // namespace netsep
