#include "netsep/text_io.hpp"

#include <zlib.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "netsep/common.hpp"

namespace netsep {

LineReader::LineReader(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (f == nullptr) {
        throw DataError("cannot open '" + path + "': " + std::strerror(errno));
    }
    gzbuffer(f, 1 << 16);
    file_ = f;
}

LineReader::~LineReader() {
    if (file_ != nullptr) gzclose(static_cast<gzFile>(file_));
}

bool LineReader::next(std::string& line) {
    gzFile f = static_cast<gzFile>(file_);
    line.clear();
    char buf[4096];
    bool got_any = false;
    while (gzgets(f, buf, sizeof(buf)) != nullptr) {
        got_any = true;
        line.append(buf);
        if (!line.empty() && line.back() == '\n') break;
    }
    if (!got_any) {
        int err = 0;
        const char* msg = gzerror(f, &err);
        if (err != Z_OK && err != Z_STREAM_END) {
            throw DataError(std::string("read error: ") + msg);
        }
        return false;
    }
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
    ++line_number_;
    return true;
}

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delimiter, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::optional<std::int64_t> parse_int(std::string_view field) {
    std::int64_t value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || field.empty()) return std::nullopt;
    return value;
}

std::optional<double> parse_double(std::string_view field) {
    double value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || field.empty()) return std::nullopt;
    return value;
}

}  // namespace netsep
