#pragma once

#include <compare>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace netsep {

inline constexpr const char* kToolkitVersion = "1.0.0";
inline constexpr const char* kGraphFormatTag = "#netsep-graph v1";
inline constexpr std::uint32_t kModelFormatVersion = 1;

using NodeId = std::int32_t;

// Directed host pair; self-loops are never stored.
struct Edge {
    NodeId src = 0;
    NodeId dst = 0;
    auto operator<=>(const Edge&) const = default;
};

// A temporal edge: window index plus host pair.
struct TemporalEdge {
    std::int64_t window = 0;
    NodeId src = 0;
    NodeId dst = 0;
    auto operator<=>(const TemporalEdge&) const = default;
};

// Contiguous half-open window range [begin, end).
struct WindowRange {
    std::int64_t begin = 0;
    std::int64_t end = 0;
    std::int64_t size() const { return end - begin; }
    bool contains(std::int64_t t) const { return t >= begin && t < end; }
};

// Raised for malformed input data or files; the CLI maps it to exit code 2.
class DataError : public std::runtime_error {
  public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

inline void log_line(const char* level, const std::string& msg) {
    std::fprintf(stderr, "netsep[%s]: %s\n", level, msg.c_str());
}
inline void log_info(const std::string& msg) { log_line("info", msg); }
inline void log_warn(const std::string& msg) { log_line("warn", msg); }
inline void log_error(const std::string& msg) { log_line("error", msg); }

}  // namespace netsep
