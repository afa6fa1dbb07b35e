#pragma once

#include <cctype>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "mqtc/errors.hpp"
#include "mqtc/grid.hpp"
#include "mqtc/pipeline.hpp"

namespace mqtc {

enum class MapFormat { kCsv, kPgm };

namespace detail {

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("failed to read " + path.string());
    return std::move(buffer).str();
}

// Write-temp-then-rename so a crash never leaves a half-written file behind.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw IoError("failed to write " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("failed to move " + tmp.string() + " to " + path.string());
}

inline std::optional<std::size_t> depth_for_side(std::size_t side) {
    if (side == 0 || (side & (side - 1)) != 0) return std::nullopt;
    std::size_t depth = 0;
    while ((std::size_t{1} << depth) < side) ++depth;
    if (depth > kMaxDepth) return std::nullopt;
    return depth;
}

inline double parse_cell_value(std::string_view token, std::size_t row, std::size_t col) {
    std::size_t begin = 0;
    std::size_t end = token.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(token[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(token[end - 1]))) --end;
    const std::string_view trimmed = token.substr(begin, end - begin);
    double value = 0.0;
    const auto [ptr, ec] =
        std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), value);
    if (ec != std::errc{} || ptr != trimmed.data() + trimmed.size()) {
        throw IngestionError("row " + std::to_string(row) + ", column " + std::to_string(col) +
                             ": cannot parse \"" + std::string(trimmed) + "\" as a number");
    }
    if (!(value >= 0.0 && value <= 1.0)) {
        throw IngestionError("row " + std::to_string(row) + ", column " + std::to_string(col) +
                             ": value " + std::to_string(value) + " outside [0, 1]");
    }
    return value;
}

inline OccupancyGrid parse_map_csv(std::string_view text) {
    std::vector<std::vector<double>> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = eol + 1;
        bool blank = true;
        for (const char ch : line) {
            if (!std::isspace(static_cast<unsigned char>(ch))) {
                blank = false;
                break;
            }
        }
        if (blank) continue;
        const std::size_t row_number = rows.size() + 1;
        std::vector<double> row;
        std::size_t cell_start = 0;
        while (true) {
            std::size_t comma = line.find(',', cell_start);
            const std::string_view token =
                line.substr(cell_start, comma == std::string_view::npos ? std::string_view::npos
                                                                        : comma - cell_start);
            row.push_back(parse_cell_value(token, row_number, row.size() + 1));
            if (comma == std::string_view::npos) break;
            cell_start = comma + 1;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IngestionError("map file contains no rows");
    const std::size_t side = rows.size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != side) {
            throw IngestionError("row " + std::to_string(r + 1) + " has " +
                                 std::to_string(rows[r].size()) + " columns, expected " +
                                 std::to_string(side) + " for a square map");
        }
    }
    const std::optional<std::size_t> depth = depth_for_side(side);
    if (!depth) {
        throw IngestionError("map side " + std::to_string(side) +
                             " is not a supported power of two");
    }
    std::vector<double> values;
    values.reserve(side * side);
    for (const auto& row : rows) values.insert(values.end(), row.begin(), row.end());
    return OccupancyGrid(*depth, std::move(values));
}

struct PgmTokenizer {
    std::string_view text;
    std::size_t pos = 0;

    // Whitespace- and comment-skipping token reader for the PGM header and
    // ASCII pixel data.
    std::optional<std::string_view> next() {
        while (pos < text.size()) {
            const char ch = text[pos];
            if (ch == '#') {
                while (pos < text.size() && text[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(ch))) {
                ++pos;
            } else {
                break;
            }
        }
        if (pos >= text.size()) return std::nullopt;
        const std::size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        return text.substr(start, pos - start);
    }

    std::size_t next_integer(const char* what) {
        const auto token = next();
        if (!token) throw IngestionError(std::string("unexpected end of PGM header, expected ") + what);
        std::size_t value = 0;
        const auto [ptr, ec] = std::from_chars(token->data(), token->data() + token->size(), value);
        if (ec != std::errc{} || ptr != token->data() + token->size()) {
            throw IngestionError(std::string("cannot parse PGM ") + what + " from \"" +
                                 std::string(*token) + "\"");
        }
        return value;
    }
};

inline OccupancyGrid parse_map_pgm(std::string_view text) {
    PgmTokenizer tok{text};
    const auto magic = tok.next();
    if (!magic || (*magic != "P2" && *magic != "P5")) {
        throw IngestionError("not a PGM file: expected magic P2 or P5");
    }
    const bool binary = (*magic == "P5");
    const std::size_t width = tok.next_integer("width");
    const std::size_t height = tok.next_integer("height");
    const std::size_t maxval = tok.next_integer("maxval");
    if (width != height) {
        throw IngestionError("PGM is " + std::to_string(width) + "x" + std::to_string(height) +
                             ", expected a square map");
    }
    const std::optional<std::size_t> depth = depth_for_side(width);
    if (!depth) {
        throw IngestionError("PGM side " + std::to_string(width) +
                             " is not a supported power of two");
    }
    if (maxval < 1 || maxval > 65535) {
        throw IngestionError("PGM maxval " + std::to_string(maxval) + " outside [1, 65535]");
    }

    std::vector<double> values;
    values.reserve(width * height);
    if (binary) {
        // Exactly one whitespace byte separates the maxval from the raster.
        std::size_t at = tok.pos + 1;
        const std::size_t bytes_per_pixel = maxval > 255 ? 2 : 1;
        if (at + width * height * bytes_per_pixel > text.size()) {
            throw IngestionError("PGM raster truncated: expected " +
                                 std::to_string(width * height * bytes_per_pixel) + " bytes");
        }
        for (std::size_t i = 0; i < width * height; ++i) {
            std::size_t gray;
            if (bytes_per_pixel == 1) {
                gray = static_cast<std::uint8_t>(text[at + i]);
            } else {
                gray = (static_cast<std::size_t>(static_cast<std::uint8_t>(text[at + 2 * i])) << 8) |
                       static_cast<std::uint8_t>(text[at + 2 * i + 1]);
            }
            if (gray > maxval) {
                throw IngestionError("PGM pixel " + std::to_string(i) + " value " +
                                     std::to_string(gray) + " exceeds maxval " +
                                     std::to_string(maxval));
            }
            values.push_back(static_cast<double>(gray) / static_cast<double>(maxval));
        }
    } else {
        for (std::size_t i = 0; i < width * height; ++i) {
            const std::size_t row = i / width + 1;
            const std::size_t col = i % width + 1;
            const auto token = tok.next();
            if (!token) {
                throw IngestionError("PGM raster truncated at row " + std::to_string(row) +
                                     ", column " + std::to_string(col));
            }
            std::size_t gray = 0;
            const auto [ptr, ec] =
                std::from_chars(token->data(), token->data() + token->size(), gray);
            if (ec != std::errc{} || ptr != token->data() + token->size() || gray > maxval) {
                throw IngestionError("row " + std::to_string(row) + ", column " +
                                     std::to_string(col) + ": bad PGM pixel \"" +
                                     std::string(*token) + "\"");
            }
            values.push_back(static_cast<double>(gray) / static_cast<double>(maxval));
        }
        if (tok.next()) throw IngestionError("trailing data after the PGM raster");
    }
    return OccupancyGrid(*depth, std::move(values));
}

}  // namespace detail

inline OccupancyGrid read_map(const std::filesystem::path& path, MapFormat format) {
    const std::string text = detail::read_file_bytes(path);
    try {
        return format == MapFormat::kPgm ? detail::parse_map_pgm(text)
                                         : detail::parse_map_csv(text);
    } catch (const IngestionError& e) {
        throw IngestionError(path.string() + ": " + e.what());
    }
}

// Format sniffed from the leading bytes: P2/P5 means PGM, anything else CSV.
inline OccupancyGrid read_map(const std::filesystem::path& path) {
    const std::string text = detail::read_file_bytes(path);
    const bool pgm = text.size() >= 2 && text[0] == 'P' && (text[1] == '2' || text[1] == '5');
    try {
        return pgm ? detail::parse_map_pgm(text) : detail::parse_map_csv(text);
    } catch (const IngestionError& e) {
        throw IngestionError(path.string() + ": " + e.what());
    }
}

// Map dump in the same CSV dialect read_map ingests. %.17g keeps the decimal
// round trip exact, so a re-read grid is bit-identical.
inline void write_map_csv(const OccupancyGrid& grid, const std::filesystem::path& path) {
    const std::size_t side = grid.side();
    std::string out;
    out.reserve(side * side * 20);
    char buffer[40];
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            std::snprintf(buffer, sizeof(buffer), "%.17g", grid(r, c));
            if (c > 0) out.push_back(',');
            out.append(buffer);
        }
        out.push_back('\n');
    }
    detail::write_file_atomic(path, out);
}

inline constexpr std::string_view kMetricsHeader =
    "step,budget_leaves,leaves_used,innovation_distortion,decode_distortion,estimate_error,"
    "payload_bits";

inline void write_metrics(std::span<const StepRecord> records, const std::filesystem::path& path) {
    bool with_nominal = false;
    for (const StepRecord& record : records) {
        if (record.nominal_bits) with_nominal = true;
    }
    std::string out(kMetricsHeader);
    if (with_nominal) out += ",nominal_bits";
    out.push_back('\n');
    char buffer[128];
    for (const StepRecord& record : records) {
        std::snprintf(buffer, sizeof(buffer), "%zu,%zu,%zu,%.12g,%.12g,%.12g,%zu", record.step,
                      record.budget_leaves, record.leaves_used, record.innovation_distortion,
                      record.decode_distortion, record.estimate_error, record.payload_bits);
        out.append(buffer);
        if (with_nominal) {
            out.push_back(',');
            out.append(std::to_string(record.nominal_bits.value_or(0)));
        }
        out.push_back('\n');
    }
    detail::write_file_atomic(path, out);
}

inline std::vector<StepRecord> read_metrics(const std::filesystem::path& path) {
    const std::string text = detail::read_file_bytes(path);
    std::vector<StepRecord> records;
    std::size_t pos = 0;
    bool header = true;
    bool with_nominal = false;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line(text.data() + pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        if (header) {
            if (line.substr(0, kMetricsHeader.size()) != kMetricsHeader) {
                throw IngestionError(path.string() + ": unexpected metrics header");
            }
            with_nominal = line.size() > kMetricsHeader.size();
            header = false;
            continue;
        }
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(
                start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        const std::size_t expected = with_nominal ? 8 : 7;
        if (fields.size() != expected) {
            throw IngestionError(path.string() + ": metrics row with " +
                                 std::to_string(fields.size()) + " fields, expected " +
                                 std::to_string(expected));
        }
        const auto to_size = [&](std::string_view f) {
            std::size_t v = 0;
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc{} || ptr != f.data() + f.size()) {
                throw IngestionError(path.string() + ": bad integer field \"" + std::string(f) +
                                     "\"");
            }
            return v;
        };
        const auto to_double = [&](std::string_view f) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc{} || ptr != f.data() + f.size()) {
                throw IngestionError(path.string() + ": bad numeric field \"" + std::string(f) +
                                     "\"");
            }
            return v;
        };
        StepRecord record;
        record.step = to_size(fields[0]);
        record.budget_leaves = to_size(fields[1]);
        record.leaves_used = to_size(fields[2]);
        record.innovation_distortion = to_double(fields[3]);
        record.decode_distortion = to_double(fields[4]);
        record.estimate_error = to_double(fields[5]);
        record.payload_bits = to_size(fields[6]);
        if (with_nominal) record.nominal_bits = to_size(fields[7]);
        records.push_back(record);
    }
    if (header) throw IngestionError(path.string() + ": empty metrics file");
    return records;
}

inline void write_payload_file(std::span<const std::uint8_t> bytes,
                               const std::filesystem::path& path) {
    detail::write_file_atomic(
        path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

inline std::vector<std::uint8_t> read_payload_file(const std::filesystem::path& path) {
    const std::string text = detail::read_file_bytes(path);
    return std::vector<std::uint8_t>(text.begin(), text.end());
}

}  // namespace mqtc
