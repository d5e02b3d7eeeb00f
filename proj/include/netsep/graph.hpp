#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "netsep/common.hpp"

namespace netsep {

// string_view lookups into string-keyed maps.
struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
};
template <typename V>
using StringMap = std::unordered_map<std::string, V, StringHash, std::equal_to<>>;

// Dense bidirectional host-name index. Ids are assigned by lexicographic name
// order, so the index is a pure function of the name set.
class NodeIndex {
  public:
    NodeIndex() = default;
    // names must be sorted and unique.
    explicit NodeIndex(std::vector<std::string> names);

    NodeId size() const { return static_cast<NodeId>(names_.size()); }
    const std::string& name_of(NodeId id) const { return names_.at(static_cast<std::size_t>(id)); }
    NodeId id_of(std::string_view name) const;  // throws DataError if unknown
    bool contains(std::string_view name) const;

    // FNV-1a over the canonical "id,name\n" listing; stored in model files to
    // tie a model to the sequence it was trained on.
    std::uint64_t digest() const;

    const std::vector<std::string>& names() const { return names_; }

  private:
    std::vector<std::string> names_;
    StringMap<NodeId> ids_;
    void rebuild_map();
};

// Triples marked as ground-truth malicious.
class LabeledEdgeSet {
  public:
    LabeledEdgeSet() = default;
    explicit LabeledEdgeSet(std::vector<TemporalEdge> triples);  // sorts + dedups

    bool contains(const TemporalEdge& e) const;
    std::span<const TemporalEdge> triples() const { return triples_; }
    std::size_t size() const { return triples_.size(); }
    bool empty() const { return triples_.empty(); }

    void save(const std::string& path) const;
    static LabeledEdgeSet load(const std::string& path);

  private:
    std::vector<TemporalEdge> triples_;
};

// Fixed-window sequence of sparse directed graphs over a shared node set.
// Windows hold sorted, deduplicated edge lists without self-loops. Immutable
// once built; safe for concurrent reads.
class WindowedGraphSequence {
  public:
    WindowedGraphSequence() = default;
    WindowedGraphSequence(NodeIndex index, std::int64_t window_seconds, std::int64_t t0,
                          std::vector<std::vector<Edge>> windows);

    NodeId num_nodes() const { return index_.size(); }
    std::int64_t num_windows() const { return static_cast<std::int64_t>(windows_.size()); }
    std::int64_t window_seconds() const { return window_seconds_; }
    std::int64_t t0() const { return t0_; }
    const NodeIndex& nodes() const { return index_; }

    std::span<const Edge> window(std::int64_t t) const { return windows_.at(static_cast<std::size_t>(t)); }
    bool window_contains(std::int64_t t, Edge e) const;

    std::size_t total_edges() const;
    std::size_t total_edges(WindowRange range) const;
    // Distinct (src, dst) pairs over the range, sorted.
    std::vector<Edge> distinct_pairs(WindowRange range) const;

    // Contiguous, disjoint, exhaustive ranges (train | valid | test).
    std::tuple<WindowRange, WindowRange, WindowRange> split(std::int64_t train_windows,
                                                            std::int64_t valid_windows) const;

    WindowRange full_range() const { return {0, num_windows()}; }

    // Canonical text format plus "<path>.nodes" sidecar; rewriting a loaded
    // sequence reproduces the bytes exactly.
    void save(const std::string& path) const;
    static WindowedGraphSequence load(const std::string& path);

    // Maps raw labeled events (epoch, src name, dst name) onto triples present
    // in this sequence; events that miss drop with a warning.
    LabeledEdgeSet label_events(
        const std::vector<std::tuple<std::int64_t, std::string, std::string>>& events) const;

  private:
    NodeIndex index_;
    std::int64_t window_seconds_ = 0;
    std::int64_t t0_ = 0;
    std::vector<std::vector<Edge>> windows_;
};

// Accumulates raw events, then windows them. Events may arrive in any order;
// the result depends only on the event multiset.
class IngestBuilder {
  public:
    // node_filter: optional keep-predicate on host names.
    explicit IngestBuilder(std::function<bool(std::string_view)> node_filter = nullptr);

    void add(std::int64_t epoch_seconds, std::string_view src, std::string_view dst);
    std::size_t events_seen() const { return events_.size(); }

    // t0_override: window alignment origin; defaults to the minimum observed
    // timestamp rounded down to a whole window. Events before t0 are an error.
    WindowedGraphSequence finalize(std::int64_t window_seconds,
                                   std::optional<std::int64_t> t0_override = std::nullopt);

  private:
    struct RawEvent {
        std::int64_t ts;
        NodeId src;
        NodeId dst;
    };
    std::function<bool(std::string_view)> node_filter_;
    std::vector<std::string> scratch_names_;  // insertion order
    StringMap<NodeId> scratch_ids_;
    std::vector<RawEvent> events_;
    NodeId intern(std::string_view name);
};

// Column layout for delimited event logs.
struct IngestFormat {
    char delimiter = ',';
    int time_col = 0;
    int src_col = 1;
    int dst_col = 2;
    int filter_col = -1;       // -1: no record filter
    std::string filter_val;    // record kept iff field == filter_val
    std::int64_t t_min = INT64_MIN;  // drop events outside [t_min, t_max)
    std::int64_t t_max = INT64_MAX;
    bool skip_bad_records = false;
    bool has_header = false;
};

// Reads a delimited (optionally gzipped) event log into the builder.
// Malformed records raise DataError with the line number unless
// format.skip_bad_records is set; returns the number of skipped records.
std::size_t read_events(const std::string& path, const IngestFormat& format, IngestBuilder& builder);

// Same reader, collecting (epoch, src, dst) tuples; used for label files.
std::vector<std::tuple<std::int64_t, std::string, std::string>> read_raw_events(
    const std::string& path, const IngestFormat& format);

}  // namespace netsep
