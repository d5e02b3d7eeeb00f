#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "netsep/graph.hpp"
#include "netsep/rng.hpp"
#include "netsep/scoring.hpp"

namespace netsep {

enum class NegativeKind { Random, Historical, Inductive };

// Shared candidate pools for the link-prediction tasks.
struct NegativePools {
    NodeId n = 0;
    std::vector<Edge> train_pairs;      // distinct pairs over the training range
    std::vector<Edge> test_only_pairs;  // distinct test-range pairs absent from training

    static NegativePools build(const WindowedGraphSequence& seq, WindowRange train, WindowRange test);
};

// Draws per-window negatives matching the positive count. Historical and
// inductive negatives come uniformly (with replacement) from the pool minus
// the window's positives; random negatives rewire both endpoints uniformly,
// rejecting self-loops and observed pairs.
class NegativeSampler {
  public:
    NegativeSampler(NegativeKind kind, const NegativePools& pools, std::uint64_t seed);

    NegativeKind kind() const { return kind_; }

    // Empty result means the window has no candidates and is skipped.
    std::vector<Edge> sample(std::span<const Edge> positives);

    // Pool minus positives (empty for the random kind, which needs no pool).
    static std::vector<Edge> eligible_pool(NegativeKind kind, const NegativePools& pools,
                                           std::span<const Edge> positives);
    std::vector<Edge> sample_from_pool(std::span<const Edge> eligible, std::size_t count);

  private:
    NegativeKind kind_;
    const NegativePools* pools_;
    Rng rng_;
    std::vector<Edge> sample_random(std::span<const Edge> positives);
};

// Mann-Whitney AUC: (#{pos > neg} + 0.5 #{pos = neg}) / (|pos| |neg|).
// Exact integer counting; throws if either side is empty.
double auc(std::span<const double> pos_scores, std::span<const double> neg_scores);

// NDCG over the top ceil(cutoff_fraction * size) of an anomaly ranking
// (ascending scores, labels 1 = malicious). 0 when no positives exist.
double ndcg_at(std::span<const ScoredEdge> ranked, double cutoff_fraction);

// Memorization baseline: an edge scores 1 when previously seen - ever
// (Infinite) or within the trailing window_length windows (Windowed).
class EdgeBank {
  public:
    enum class Variant { Infinite, Windowed };

    explicit EdgeBank(Variant variant, std::int64_t window_length = kDefaultTau);

    // Feed observed windows in order, strictly before any score query for
    // later windows.
    void observe(std::span<const Edge> edges, std::int64_t t);
    double score(Edge e, std::int64_t t) const;
    std::size_t memory_size() const { return last_seen_.size(); }

  private:
    Variant variant_;
    std::int64_t window_length_;
    std::unordered_map<std::uint64_t, std::int64_t> last_seen_;
};

// Per-window scoring strategy driven by the evaluation loop. Stateful parts
// (mixing history, memory) advance window by window through end_window.
class WindowScorer {
  public:
    virtual ~WindowScorer() = default;
    virtual std::string name() const = 0;
    virtual void begin_window(std::int64_t t) = 0;
    virtual double score(Edge e) const = 0;  // valid between begin/end; pure
    virtual void end_window(std::span<const Edge> edges, std::int64_t t) = 0;
};

class SnmfScorer : public WindowScorer {
  public:
    SnmfScorer(const SnmfModel& model, MixingHistory history, RefitOptions options = {},
               ThreadPool* pool = nullptr);
    std::string name() const override { return "snmf"; }
    void begin_window(std::int64_t t) override;
    double score(Edge e) const override;
    void end_window(std::span<const Edge> edges, std::int64_t t) override;
    const MixingHistory& history() const { return history_; }

  private:
    const SnmfModel& model_;
    MixingKernel kernel_;
    MixingHistory history_;
    RefitOptions options_;
    ThreadPool* pool_;
    RowVec current_;
};

class EdgeBankScorer : public WindowScorer {
  public:
    // Memory starts from all windows before `from`.
    EdgeBankScorer(EdgeBank::Variant variant, std::int64_t window_length,
                   const WindowedGraphSequence& seq, std::int64_t from);
    std::string name() const override { return name_; }
    void begin_window(std::int64_t t) override { current_t_ = t; }
    double score(Edge e) const override { return bank_.score(e, current_t_); }
    void end_window(std::span<const Edge> edges, std::int64_t t) override { bank_.observe(edges, t); }

  private:
    EdgeBank bank_;
    std::string name_;
    std::int64_t current_t_ = 0;
};

enum class Task { Anomaly, Random, Historical, Inductive };
std::string task_name(Task task);
std::optional<Task> task_from_name(const std::string& name);

struct TaskResult {
    std::vector<double> auc_runs;
    std::vector<double> ndcg_runs;  // anomaly task only
    double auc_mean = 0.0, auc_std = 0.0;
    double ndcg_mean = 0.0, ndcg_std = 0.0;
    std::int64_t windows_used = 0;
    std::int64_t windows_skipped = 0;
};

struct EvalReport {
    std::string method;
    int runs = 0;
    std::uint64_t seed = 0;
    double ndcg_frac = 0.0;
    std::map<std::string, TaskResult> tasks;

    std::string to_json() const;
    void save(const std::string& path) const;
};

struct EvalOptions {
    std::vector<Task> tasks{Task::Anomaly, Task::Random, Task::Historical, Task::Inductive};
    int runs = 10;
    std::uint64_t seed = 0;
    double ndcg_frac = 0.01;
    std::string per_window_csv;  // optional per-window AUC dump
};

// Walks the valid range (state updates only), then scores the test range:
// per window, observed edges are scored before any state update, negatives
// per task are drawn and scored for every run, and scores pool across
// windows. Runs differ only in their derived sampling seeds.
EvalReport run_eval(WindowScorer& scorer, const WindowedGraphSequence& seq, WindowRange train,
                    WindowRange valid, WindowRange test, const LabeledEdgeSet* labels,
                    const EvalOptions& options, ThreadPool* pool = nullptr);

}  // namespace netsep
