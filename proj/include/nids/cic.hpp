#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nids/error.hpp"
#include "nids/flow.hpp"
#include "nids/ingest.hpp"

namespace nids {

// RFC 4180 style reader: comma separated, double-quoted fields may contain
// commas, quotes ("") and newlines. CR before LF is dropped.
class CsvReader {
public:
    explicit CsvReader(std::istream& in) : in_(in) {}

    // Reads the next record into `row`. Returns false at end of input.
    // Throws ParseError for a quoted field left open at end of input.
    bool next(std::vector<std::string>& row) {
        row.clear();
        int c = get();
        if (c == eof) return false;
        std::string field;
        bool quoted = false;
        bool after_quote = false;
        std::size_t quote_start = 0;
        for (;; c = get()) {
            if (quoted) {
                if (c == eof) throw ParseError("unterminated quoted CSV field", quote_start);
                if (c == '"') {
                    if (peek() == '"') {
                        get();
                        field.push_back('"');
                    } else {
                        quoted = false;
                        after_quote = true;
                    }
                } else {
                    field.push_back(static_cast<char>(c));
                }
                continue;
            }
            if (c == eof || c == '\n') {
                if (!field.empty() && field.back() == '\r' && !after_quote) field.pop_back();
                row.push_back(std::move(field));
                return true;
            }
            if (c == ',') {
                row.push_back(std::move(field));
                field.clear();
                after_quote = false;
            } else if (c == '"' && field.empty() && !after_quote) {
                quoted = true;
                quote_start = offset_ - 1;
            } else if (c == '\r' && after_quote) {
                // CR after a closing quote belongs to the line ending
            } else {
                field.push_back(static_cast<char>(c));
            }
        }
    }

    std::size_t offset() const { return offset_; }

private:
    static constexpr int eof = std::char_traits<char>::eof();

    int get() {
        int c = in_.get();
        if (c != eof) ++offset_;
        return c;
    }
    int peek() { return in_.peek(); }

    std::istream& in_;
    std::size_t offset_ = 0;
};

struct CicOptions {
    std::string label_column = "Label";
    LabelMap labels;
    // Default policy: a non-finite or empty cell marks its whole column as
    // unusable. With this flag set, such rows are dropped instead.
    bool drop_rows_with_non_finite = false;
    // Further header names read as categorical features, under their own name.
    std::vector<std::string> extra_categorical{"AppName", "Direction"};
    std::string source_name = "cic";
};

namespace detail {

struct CategoricalAlias {
    const char* feature;
    std::array<const char*, 3> headers;
};

// Header spellings seen across CICFlowMeter releases, plus our own canonical
// names so exported CSV files can be read back.
inline constexpr std::array<CategoricalAlias, 5> cic_categoricals{{
    {"SrcIP", {"source ip", "src ip", "srcip"}},
    {"DstIP", {"destination ip", "dst ip", "dstip"}},
    {"SrcPort", {"source port", "src port", "srcport"}},
    {"DstPort", {"destination port", "dst port", "dstport"}},
    {"Protocol", {"protocol", "protocol", "protocol"}},
}};

inline constexpr std::array<const char*, 4> cic_discarded{"flow id", "flowid", "timestamp", "source_tag"};

inline std::string strip_bom(std::string s) {
    if (s.size() >= 3 && static_cast<unsigned char>(s[0]) == 0xEF && static_cast<unsigned char>(s[1]) == 0xBB &&
        static_cast<unsigned char>(s[2]) == 0xBF) {
        s.erase(0, 3);
    }
    return s;
}

}  // namespace detail

// Parses a CICFlowMeter CSV. The five flow-key columns become categorical
// features, flow id and timestamp are discarded, and every other column is
// continuous. Columns with any missing/non-finite cell or with zero variance
// over the kept rows are dropped dataset-wide and reported.
inline IngestResult parse_cic_csv(std::istream& in, const CicOptions& options = {}) {
    using detail::lower;
    using detail::trim;

    IngestResult result;
    auto& report = result.report;
    report.source = options.source_name;

    CsvReader reader(in);
    std::vector<std::string> header;
    if (!reader.next(header)) throw ConfigError("CSV input has no header row");
    if (!header.empty()) header[0] = detail::strip_bom(header[0]);

    enum class Role { categorical, continuous, label, discarded };
    struct Column {
        std::string name;
        Role role;
        std::size_t slot = 0;
    };
    std::vector<Column> columns;
    std::optional<std::size_t> label_col;
    struct CatSpec {
        std::string feature;
        std::vector<std::string> headers;
    };
    std::vector<CatSpec> cat_specs;
    for (const auto& a : detail::cic_categoricals) {
        cat_specs.push_back({a.feature, {a.headers.begin(), a.headers.end()}});
    }
    for (const auto& e : options.extra_categorical) cat_specs.push_back({e, {lower(trim(e))}});
    std::vector<std::optional<std::size_t>> cat_col(cat_specs.size());
    std::vector<std::string> cont_names;
    std::map<std::string, int> seen_names;
    const std::string label_key = lower(trim(options.label_column));

    for (std::size_t i = 0; i < header.size(); ++i) {
        std::string name(trim(header[i]));
        const std::string key = lower(name);
        Column col{name, Role::continuous};
        if (key == label_key && !label_col) {
            col.role = Role::label;
            label_col = i;
        } else if (std::find(detail::cic_discarded.begin(), detail::cic_discarded.end(), key) !=
                   detail::cic_discarded.end()) {
            col.role = Role::discarded;
        } else {
            for (std::size_t c = 0; c < cat_specs.size(); ++c) {
                const auto& hs = cat_specs[c].headers;
                if (!cat_col[c] && std::find(hs.begin(), hs.end(), key) != hs.end()) {
                    col.role = Role::categorical;
                    col.slot = c;
                    cat_col[c] = i;
                    break;
                }
            }
        }
        if (col.role == Role::continuous) {
            // CICFlowMeter repeats "Fwd Header Length"; keep both, renamed
            int& n = seen_names[name];
            if (n > 0) name += "." + std::to_string(n);
            ++n;
            col.name = name;
            col.slot = cont_names.size();
            cont_names.push_back(name);
        }
        columns.push_back(std::move(col));
    }
    if (!label_col) throw ConfigError("CSV header has no label column '" + options.label_column + "'");

    std::vector<std::size_t> cat_present;
    for (std::size_t c = 0; c < cat_col.size(); ++c) {
        if (cat_col[c]) cat_present.push_back(c);
    }

    struct Pending {
        std::vector<std::string> cat;
        std::vector<double> cont;  // NaN marks a missing cell
        Label label;
        std::size_t ordinal;
    };
    std::vector<Pending> rows;
    std::vector<bool> column_missing(cont_names.size(), false);
    const double missing = std::numeric_limits<double>::quiet_NaN();

    std::vector<std::string> cells;
    std::size_t ordinal = 0;
    while (reader.next(cells)) {
        if (cells.size() == 1 && trim(cells[0]).empty()) continue;  // blank line
        ++report.rows_read;
        const std::size_t row_ordinal = ordinal++;
        if (cells.size() != columns.size()) {
            report.drop_row(drop_reason::ragged);
            continue;
        }
        Pending p;
        p.ordinal = row_ordinal;
        p.cat.resize(cat_specs.size());
        p.cont.resize(cont_names.size());
        bool bad = false;
        bool has_missing = false;
        const char* reason = nullptr;
        for (std::size_t i = 0; i < columns.size() && !bad; ++i) {
            const auto& col = columns[i];
            switch (col.role) {
                case Role::discarded:
                    break;
                case Role::label:
                    if (trim(cells[i]).empty()) {
                        bad = true;
                        reason = drop_reason::missing_field;
                    } else {
                        p.label = options.labels(cells[i]);
                    }
                    break;
                case Role::categorical: {
                    auto v = trim(cells[i]);
                    if (v.empty()) {
                        bad = true;
                        reason = drop_reason::missing_field;
                    } else {
                        p.cat[col.slot] = std::string(v);
                    }
                    break;
                }
                case Role::continuous: {
                    auto n = detail::parse_number(cells[i]);
                    if (n.status == detail::NumberStatus::unparseable) {
                        bad = true;
                        reason = drop_reason::unparseable;
                    } else if (n.status == detail::NumberStatus::non_finite) {
                        p.cont[col.slot] = missing;
                        has_missing = true;
                    } else {
                        p.cont[col.slot] = n.value;
                    }
                    break;
                }
            }
        }
        if (bad) {
            report.drop_row(reason);
            continue;
        }
        if (has_missing) {
            if (options.drop_rows_with_non_finite) {
                report.drop_row(drop_reason::non_finite);
                continue;
            }
            for (std::size_t k = 0; k < p.cont.size(); ++k) {
                if (std::isnan(p.cont[k])) column_missing[k] = true;
            }
        }
        std::vector<std::string> compact;
        compact.reserve(cat_present.size());
        for (auto c : cat_present) compact.push_back(std::move(p.cat[c]));
        p.cat = std::move(compact);
        rows.push_back(std::move(p));
    }

    // Column-level drops over the kept rows.
    std::vector<std::size_t> keep;
    for (std::size_t k = 0; k < cont_names.size(); ++k) {
        if (column_missing[k]) {
            report.columns_dropped.push_back({cont_names[k], drop_reason::missing_values});
            continue;
        }
        if (!rows.empty()) {
            double lo = rows.front().cont[k], hi = lo;
            for (const auto& r : rows) {
                lo = std::min(lo, r.cont[k]);
                hi = std::max(hi, r.cont[k]);
            }
            if (lo == hi) {
                report.columns_dropped.push_back({cont_names[k], drop_reason::zero_variance});
                continue;
            }
        }
        keep.push_back(k);
    }

    auto layout = std::make_shared<FieldLayout>();
    for (auto c : cat_present) layout->categorical.push_back(cat_specs[c].feature);
    for (auto k : keep) layout->continuous.push_back(cont_names[k]);

    auto& ds = result.dataset;
    ds.schema = FeatureSchema::from_layout(*layout);
    ds.provenance.files.push_back(options.source_name);
    ds.provenance.dropped_columns = report.columns_dropped;
    ds.records.reserve(rows.size());
    for (auto& p : rows) {
        std::vector<double> cont;
        cont.reserve(keep.size());
        for (auto k : keep) cont.push_back(p.cont[k]);
        ++report.rows_kept;
        ++(p.label == Label::Benign ? report.benign : report.malicious);
        ds.records.emplace_back(layout, std::move(p.cat), std::move(cont), p.label,
                                options.source_name + "#" + std::to_string(p.ordinal));
    }
    return result;
}

namespace detail {

inline std::string csv_quote(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string format_real(double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

}  // namespace detail

// Canonical CSV export: categorical columns, continuous columns, then
// "Label" (BENIGN / MALICIOUS). parse_cic_csv reads it back losslessly.
inline void write_canonical_csv(const LabeledDataset& data, std::ostream& out) {
    const auto cat = data.schema.names(FeatureKind::Categorical);
    const auto cont = data.schema.names(FeatureKind::Continuous);
    bool first = true;
    for (const auto& n : cat) {
        out << (first ? "" : ",") << detail::csv_quote(n);
        first = false;
    }
    for (const auto& n : cont) {
        out << (first ? "" : ",") << detail::csv_quote(n);
        first = false;
    }
    out << (first ? "" : ",") << "Label\n";
    for (const auto& r : data.records) {
        first = true;
        for (const auto& n : cat) {
            const auto* v = r.categorical(n);
            out << (first ? "" : ",") << detail::csv_quote(v ? *v : "");
            first = false;
        }
        for (const auto& n : cont) {
            auto v = r.continuous(n);
            out << (first ? "" : ",") << (v ? detail::format_real(*v) : "");
            first = false;
        }
        out << (first ? "" : ",") << (r.label() == Label::Benign ? "BENIGN" : "MALICIOUS") << '\n';
    }
}

}  // namespace nids
