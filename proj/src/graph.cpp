#include "netsep/graph.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <set>

#include "netsep/text_io.hpp"

namespace netsep {

namespace {

// RAII stdio handle; plain fprintf keeps large writes fast and byte-stable.
struct File {
    std::FILE* f = nullptr;
    explicit File(const std::string& path, const char* mode) {
        f = std::fopen(path.c_str(), mode);
        if (f == nullptr) throw DataError("cannot open '" + path + "'");
    }
    ~File() {
        if (f != nullptr) std::fclose(f);
    }
};

std::string nodes_sidecar_path(const std::string& path) { return path + ".nodes"; }

}  // namespace

// ---------------------------------------------------------------------------
// NodeIndex

NodeIndex::NodeIndex(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 1; i < names_.size(); ++i) {
        if (names_[i - 1] >= names_[i]) throw DataError("node names must be sorted and unique");
    }
    rebuild_map();
}

void NodeIndex::rebuild_map() {
    ids_.clear();
    ids_.reserve(names_.size());
    for (std::size_t i = 0; i < names_.size(); ++i) {
        ids_.emplace(names_[i], static_cast<NodeId>(i));
    }
}

NodeId NodeIndex::id_of(std::string_view name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) throw DataError("unknown node name '" + std::string(name) + "'");
    return it->second;
}

bool NodeIndex::contains(std::string_view name) const { return ids_.find(name) != ids_.end(); }

std::uint64_t NodeIndex::digest() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    char buf[32];
    for (std::size_t i = 0; i < names_.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,", i);
        feed(buf);
        feed(names_[i]);
        feed("\n");
    }
    return h;
}

// ---------------------------------------------------------------------------
// LabeledEdgeSet

LabeledEdgeSet::LabeledEdgeSet(std::vector<TemporalEdge> triples) : triples_(std::move(triples)) {
    std::sort(triples_.begin(), triples_.end());
    triples_.erase(std::unique(triples_.begin(), triples_.end()), triples_.end());
}

bool LabeledEdgeSet::contains(const TemporalEdge& e) const {
    return std::binary_search(triples_.begin(), triples_.end(), e);
}

void LabeledEdgeSet::save(const std::string& path) const {
    File out(path, "wb");
    for (const auto& e : triples_) {
        std::fprintf(out.f, "%" PRId64 ",%d,%d\n", e.window, e.src, e.dst);
    }
}

LabeledEdgeSet LabeledEdgeSet::load(const std::string& path) {
    LineReader reader(path);
    std::vector<TemporalEdge> triples;
    std::string line;
    while (reader.next(line)) {
        if (line.empty()) continue;
        const auto fields = split_fields(line, ',');
        if (fields.size() != 3) {
            throw DataError("labels '" + path + "' line " + std::to_string(reader.line_number()) +
                            ": expected t,src,dst");
        }
        const auto t = parse_int(fields[0]);
        const auto s = parse_int(fields[1]);
        const auto d = parse_int(fields[2]);
        if (!t || !s || !d) {
            throw DataError("labels '" + path + "' line " + std::to_string(reader.line_number()) +
                            ": bad integer field");
        }
        triples.push_back({*t, static_cast<NodeId>(*s), static_cast<NodeId>(*d)});
    }
    return LabeledEdgeSet(std::move(triples));
}

// ---------------------------------------------------------------------------
// WindowedGraphSequence

WindowedGraphSequence::WindowedGraphSequence(NodeIndex index, std::int64_t window_seconds,
                                             std::int64_t t0, std::vector<std::vector<Edge>> windows)
    : index_(std::move(index)), window_seconds_(window_seconds), t0_(t0), windows_(std::move(windows)) {
    const NodeId n = index_.size();
    for (auto& w : windows_) {
        std::sort(w.begin(), w.end());
        w.erase(std::unique(w.begin(), w.end()), w.end());
        for (const Edge& e : w) {
            if (e.src == e.dst) throw DataError("self-loop in window edge set");
            if (e.src < 0 || e.dst < 0 || e.src >= n || e.dst >= n) {
                throw DataError("edge references node id outside [0, N)");
            }
        }
    }
}

bool WindowedGraphSequence::window_contains(std::int64_t t, Edge e) const {
    const auto& w = windows_.at(static_cast<std::size_t>(t));
    return std::binary_search(w.begin(), w.end(), e);
}

std::size_t WindowedGraphSequence::total_edges() const { return total_edges(full_range()); }

std::size_t WindowedGraphSequence::total_edges(WindowRange range) const {
    std::size_t n = 0;
    for (std::int64_t t = range.begin; t < range.end; ++t) {
        n += windows_.at(static_cast<std::size_t>(t)).size();
    }
    return n;
}

std::vector<Edge> WindowedGraphSequence::distinct_pairs(WindowRange range) const {
    std::vector<Edge> pairs;
    pairs.reserve(total_edges(range));
    for (std::int64_t t = range.begin; t < range.end; ++t) {
        const auto& w = windows_.at(static_cast<std::size_t>(t));
        pairs.insert(pairs.end(), w.begin(), w.end());
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    return pairs;
}

std::tuple<WindowRange, WindowRange, WindowRange> WindowedGraphSequence::split(
    std::int64_t train_windows, std::int64_t valid_windows) const {
    const std::int64_t total = num_windows();
    if (train_windows < 0 || valid_windows < 0) throw DataError("negative split size");
    if (train_windows + valid_windows >= total) {
        throw DataError("split leaves no test windows: train=" + std::to_string(train_windows) +
                        " valid=" + std::to_string(valid_windows) + " total=" + std::to_string(total));
    }
    WindowRange train{0, train_windows};
    WindowRange valid{train_windows, train_windows + valid_windows};
    WindowRange test{train_windows + valid_windows, total};
    return {train, valid, test};
}

void WindowedGraphSequence::save(const std::string& path) const {
    {
        File out(path, "wb");
        std::fprintf(out.f, "%s N=%d W=%" PRId64 " T0=%" PRId64 " T=%" PRId64 "\n", kGraphFormatTag,
                     num_nodes(), window_seconds_, t0_, num_windows());
        for (std::int64_t t = 0; t < num_windows(); ++t) {
            for (const Edge& e : windows_[static_cast<std::size_t>(t)]) {
                std::fprintf(out.f, "%" PRId64 ",%d,%d\n", t, e.src, e.dst);
            }
        }
    }
    {
        File out(nodes_sidecar_path(path), "wb");
        for (NodeId i = 0; i < num_nodes(); ++i) {
            std::fprintf(out.f, "%d,%s\n", i, index_.name_of(i).c_str());
        }
    }
}

WindowedGraphSequence WindowedGraphSequence::load(const std::string& path) {
    LineReader reader(path);
    std::string line;
    if (!reader.next(line)) throw DataError("'" + path + "': empty graph file");

    std::int64_t n = 0, wsecs = 0, t0 = 0, num_windows = 0;
    if (std::sscanf(line.c_str(), "#netsep-graph v1 N=%" SCNd64 " W=%" SCNd64 " T0=%" SCNd64
                                  " T=%" SCNd64,
                    &n, &wsecs, &t0, &num_windows) != 4) {
        throw DataError("'" + path + "': bad or unsupported graph header: " + line);
    }
    if (n < 0 || wsecs <= 0 || num_windows < 0) throw DataError("'" + path + "': invalid header values");

    std::vector<std::vector<Edge>> windows(static_cast<std::size_t>(num_windows));
    while (reader.next(line)) {
        if (line.empty()) continue;
        const auto fields = split_fields(line, ',');
        const auto t = fields.size() == 3 ? parse_int(fields[0]) : std::nullopt;
        const auto s = fields.size() == 3 ? parse_int(fields[1]) : std::nullopt;
        const auto d = fields.size() == 3 ? parse_int(fields[2]) : std::nullopt;
        if (!t || !s || !d || *t < 0 || *t >= num_windows) {
            throw DataError("'" + path + "' line " + std::to_string(reader.line_number()) +
                            ": bad edge record");
        }
        windows[static_cast<std::size_t>(*t)].push_back(
            {static_cast<NodeId>(*s), static_cast<NodeId>(*d)});
    }

    const std::string nodes_path = nodes_sidecar_path(path);
    std::vector<std::string> names(static_cast<std::size_t>(n));
    {
        LineReader nodes(nodes_path);
        std::size_t seen = 0;
        while (nodes.next(line)) {
            if (line.empty()) continue;
            const std::size_t comma = line.find(',');
            if (comma == std::string::npos) {
                throw DataError("'" + nodes_path + "' line " + std::to_string(nodes.line_number()) +
                                ": expected id,name");
            }
            const auto id = parse_int(std::string_view(line).substr(0, comma));
            if (!id || *id < 0 || *id >= n) {
                throw DataError("'" + nodes_path + "' line " + std::to_string(nodes.line_number()) +
                                ": bad node id");
            }
            names[static_cast<std::size_t>(*id)] = line.substr(comma + 1);
            ++seen;
        }
        if (seen != static_cast<std::size_t>(n)) {
            throw DataError("'" + nodes_path + "': expected " + std::to_string(n) + " nodes, found " +
                            std::to_string(seen));
        }
    }
    return WindowedGraphSequence(NodeIndex(std::move(names)), wsecs, t0, std::move(windows));
}

LabeledEdgeSet WindowedGraphSequence::label_events(
    const std::vector<std::tuple<std::int64_t, std::string, std::string>>& events) const {
    std::vector<TemporalEdge> triples;
    std::size_t dropped = 0;
    for (const auto& [ts, src, dst] : events) {
        if (!index_.contains(src) || !index_.contains(dst)) {
            ++dropped;
            continue;
        }
        const NodeId s = index_.id_of(src);
        const NodeId d = index_.id_of(dst);
        if (s == d || ts < t0_) {
            ++dropped;
            continue;
        }
        const std::int64_t t = (ts - t0_) / window_seconds_;
        if (t >= num_windows() || !window_contains(t, {s, d})) {
            ++dropped;
            continue;
        }
        triples.push_back({t, s, d});
    }
    if (dropped > 0) {
        log_warn(std::to_string(dropped) + " labeled events did not match any stored edge; dropped");
    }
    return LabeledEdgeSet(std::move(triples));
}

// ---------------------------------------------------------------------------
// IngestBuilder

IngestBuilder::IngestBuilder(std::function<bool(std::string_view)> node_filter)
    : node_filter_(std::move(node_filter)) {}

NodeId IngestBuilder::intern(std::string_view name) {
    auto it = scratch_ids_.find(name);
    if (it != scratch_ids_.end()) return it->second;
    const NodeId id = static_cast<NodeId>(scratch_names_.size());
    scratch_names_.emplace_back(name);
    scratch_ids_.emplace(std::string(name), id);
    return id;
}

void IngestBuilder::add(std::int64_t epoch_seconds, std::string_view src, std::string_view dst) {
    if (node_filter_ && (!node_filter_(src) || !node_filter_(dst))) return;
    events_.push_back({epoch_seconds, intern(src), intern(dst)});
}

WindowedGraphSequence IngestBuilder::finalize(std::int64_t window_seconds,
                                              std::optional<std::int64_t> t0_override) {
    if (window_seconds <= 0) throw DataError("window_seconds must be positive");
    if (events_.empty()) throw DataError("empty input");

    std::int64_t min_ts = events_.front().ts;
    std::int64_t max_ts = events_.front().ts;
    for (const auto& e : events_) {
        min_ts = std::min(min_ts, e.ts);
        max_ts = std::max(max_ts, e.ts);
    }
    // Default alignment: earliest event rounded down to a whole window.
    std::int64_t t0;
    if (t0_override) {
        t0 = *t0_override;
        if (min_ts < t0) throw DataError("events precede the configured t0");
    } else {
        t0 = (min_ts / window_seconds) * window_seconds;
        if (min_ts < 0 && min_ts % window_seconds != 0) t0 -= window_seconds;
    }

    // Ids by sorted name so the result is independent of event order.
    std::vector<NodeId> order(scratch_names_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<NodeId>(i);
    std::sort(order.begin(), order.end(), [this](NodeId a, NodeId b) {
        return scratch_names_[static_cast<std::size_t>(a)] < scratch_names_[static_cast<std::size_t>(b)];
    });
    std::vector<NodeId> remap(scratch_names_.size());
    std::vector<std::string> sorted_names(scratch_names_.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        remap[static_cast<std::size_t>(order[rank])] = static_cast<NodeId>(rank);
        sorted_names[rank] = scratch_names_[static_cast<std::size_t>(order[rank])];
    }

    const std::int64_t num_windows = (max_ts - t0) / window_seconds + 1;
    std::vector<std::vector<Edge>> windows(static_cast<std::size_t>(num_windows));
    for (const auto& e : events_) {
        const NodeId s = remap[static_cast<std::size_t>(e.src)];
        const NodeId d = remap[static_cast<std::size_t>(e.dst)];
        if (s == d) continue;  // self-loops excluded
        const std::int64_t t = (e.ts - t0) / window_seconds;
        windows[static_cast<std::size_t>(t)].push_back({s, d});
    }
    return WindowedGraphSequence(NodeIndex(std::move(sorted_names)), window_seconds, t0,
                                 std::move(windows));
}

// ---------------------------------------------------------------------------
// Delimited event log reader

namespace {

struct ParsedRecord {
    std::int64_t ts;
    std::string_view src;
    std::string_view dst;
};

// nullopt: record filtered out. DataError: malformed.
std::optional<ParsedRecord> parse_record(std::string_view line, const IngestFormat& fmt,
                                         const std::string& path, std::size_t line_no) {
    const auto fields = split_fields(line, fmt.delimiter);
    const int needed = std::max({fmt.time_col, fmt.src_col, fmt.dst_col, fmt.filter_col});
    if (static_cast<int>(fields.size()) <= needed) {
        throw DataError("'" + path + "' line " + std::to_string(line_no) + ": expected at least " +
                        std::to_string(needed + 1) + " fields, got " + std::to_string(fields.size()));
    }
    if (fmt.filter_col >= 0 && fields[static_cast<std::size_t>(fmt.filter_col)] != fmt.filter_val) {
        return std::nullopt;
    }
    const auto ts = parse_int(fields[static_cast<std::size_t>(fmt.time_col)]);
    if (!ts) {
        throw DataError("'" + path + "' line " + std::to_string(line_no) + ": bad timestamp '" +
                        std::string(fields[static_cast<std::size_t>(fmt.time_col)]) + "'");
    }
    if (*ts < fmt.t_min || *ts >= fmt.t_max) return std::nullopt;
    const auto src = fields[static_cast<std::size_t>(fmt.src_col)];
    const auto dst = fields[static_cast<std::size_t>(fmt.dst_col)];
    if (src.empty() || dst.empty()) {
        throw DataError("'" + path + "' line " + std::to_string(line_no) + ": empty endpoint name");
    }
    return ParsedRecord{*ts, src, dst};
}

}  // namespace

std::size_t read_events(const std::string& path, const IngestFormat& fmt, IngestBuilder& builder) {
    LineReader reader(path);
    std::string line;
    std::size_t skipped = 0;
    bool first = true;
    while (reader.next(line)) {
        if (first && fmt.has_header) {
            first = false;
            continue;
        }
        first = false;
        if (line.empty()) continue;
        try {
            const auto rec = parse_record(line, fmt, path, reader.line_number());
            if (rec) builder.add(rec->ts, rec->src, rec->dst);
        } catch (const DataError&) {
            if (!fmt.skip_bad_records) throw;
            ++skipped;
        }
    }
    if (skipped > 0) log_warn("skipped " + std::to_string(skipped) + " malformed records in " + path);
    return skipped;
}

std::vector<std::tuple<std::int64_t, std::string, std::string>> read_raw_events(
    const std::string& path, const IngestFormat& fmt) {
    LineReader reader(path);
    std::string line;
    std::vector<std::tuple<std::int64_t, std::string, std::string>> out;
    std::size_t skipped = 0;
    bool first = true;
    while (reader.next(line)) {
        if (first && fmt.has_header) {
            first = false;
            continue;
        }
        first = false;
        if (line.empty()) continue;
        try {
            const auto rec = parse_record(line, fmt, path, reader.line_number());
            if (rec) out.emplace_back(rec->ts, std::string(rec->src), std::string(rec->dst));
        } catch (const DataError&) {
            if (!fmt.skip_bad_records) throw;
            ++skipped;
        }
    }
    if (skipped > 0) log_warn("skipped " + std::to_string(skipped) + " malformed records in " + path);
    return out;
}

}  // namespace netsep
