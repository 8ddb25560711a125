#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "nids/flow.hpp"

namespace nids {

namespace drop_reason {
inline constexpr const char* non_finite = "non-finite";
inline constexpr const char* missing_field = "missing-field";
inline constexpr const char* unparseable = "unparseable";
inline constexpr const char* ragged = "ragged";
inline constexpr const char* zero_variance = "zero-variance";
inline constexpr const char* missing_values = "missing-values";
}  // namespace drop_reason

// Row and column accounting for one parse.
// Invariant: rows_read == rows_kept + sum(rows_dropped).
struct IngestReport {
    std::string source;
    std::size_t rows_read = 0;
    std::size_t rows_kept = 0;
    std::map<std::string, std::size_t> rows_dropped;
    std::vector<DroppedColumn> columns_dropped;
    std::size_t benign = 0;
    std::size_t malicious = 0;

    std::size_t total_dropped() const {
        std::size_t n = 0;
        for (const auto& [_, c] : rows_dropped) n += c;
        return n;
    }

    bool balanced() const { return rows_read == rows_kept + total_dropped() && benign + malicious == rows_kept; }

    void drop_row(const std::string& reason) { ++rows_dropped[reason]; }
};

inline void to_json(nlohmann::json& j, const IngestReport& r) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : r.columns_dropped) cols.push_back({{"name", c.name}, {"reason", c.reason}});
    j = nlohmann::json{{"source", r.source},
                       {"rows_read", r.rows_read},
                       {"rows_kept", r.rows_kept},
                       {"rows_dropped", r.rows_dropped},
                       {"columns_dropped", cols},
                       {"label_distribution", {{"0", r.benign}, {"1", r.malicious}}}};
}

struct IngestResult {
    LabeledDataset dataset;
    IngestReport report;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

enum class NumberStatus { ok, non_finite, unparseable };

struct ParsedNumber {
    NumberStatus status;
    double value;
};

// Strict decimal parse of a whole trimmed cell. Textual infinities/NaNs and
// overflow report non_finite; anything else that is not a number is
// unparseable.
inline ParsedNumber parse_number(std::string_view cell) {
    cell = trim(cell);
    if (cell.empty()) return {NumberStatus::non_finite, 0.0};
    std::string_view body = cell;
    if (body.front() == '+') body.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), v);
    if (ec == std::errc::result_out_of_range) return {NumberStatus::non_finite, 0.0};
    if (ec != std::errc() || ptr != body.data() + body.size()) {
        return {NumberStatus::unparseable, 0.0};
    }
    if (!std::isfinite(v)) return {NumberStatus::non_finite, v};
    return {NumberStatus::ok, v};
}

}  // namespace detail

}  // namespace nids
