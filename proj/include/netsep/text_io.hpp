#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace netsep {

// Line-oriented reader over plain or gzip-compressed files (zlib reads both
// transparently). Strips trailing \n / \r\n.
class LineReader {
  public:
    explicit LineReader(const std::string& path);
    ~LineReader();
    LineReader(const LineReader&) = delete;
    LineReader& operator=(const LineReader&) = delete;

    // Returns false at end of input. line_number() refers to the last line read.
    bool next(std::string& line);
    std::size_t line_number() const { return line_number_; }

  private:
    void* file_ = nullptr;
    std::size_t line_number_ = 0;
};

std::vector<std::string_view> split_fields(std::string_view line, char delimiter);

// Strict integer / double parsing of a whole field; nullopt on any junk.
std::optional<std::int64_t> parse_int(std::string_view field);
std::optional<double> parse_double(std::string_view field);

}  // namespace netsep
