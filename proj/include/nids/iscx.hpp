#pragma once

#include <expat.h>

#include <array>
#include <chrono>
#include <cstddef>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nids/error.hpp"
#include "nids/flow.hpp"
#include "nids/ingest.hpp"

namespace nids {

// Binds the 14 ISCX flow features to element names of the XML flow file.
// Defaults follow the public IDS 2012 labeled-flow files.
struct IscxFieldMap {
    std::string src_ip = "source";
    std::string dst_ip = "destination";
    std::string src_port = "sourcePort";
    std::string dst_port = "destinationPort";
    std::string app_name = "appName";
    std::string direction = "direction";
    std::string protocol = "protocolName";

    // Duration is taken from `duration` when that element is present,
    // otherwise computed as stop - start in seconds.
    std::string duration = "duration";
    std::string start_time = "startDateTime";
    std::string stop_time = "stopDateTime";

    std::string total_src_bytes = "totalSourceBytes";
    std::string total_dst_bytes = "totalDestinationBytes";
    std::string total_bytes = "totalBytes";
    std::string total_src_pkts = "totalSourcePackets";
    std::string total_dst_pkts = "totalDestinationPackets";
    std::string total_pkts = "totalPackets";

    std::string tag = "Tag";
};

struct IscxOptions {
    IscxFieldMap fields;
    LabelMap labels;
    std::string source_name = "iscx";
};

inline const FieldLayout& iscx_layout() {
    static const FieldLayout layout{
        {"SrcIP", "DstIP", "SrcPort", "DstPort", "AppName", "Direction", "Protocol"},
        {"Duration", "TotalSrcBytes", "TotalDstBytes", "TotalBytes", "TotalSrcPkts", "TotalDstPkts", "TotalPkts"}};
    return layout;
}

namespace detail {

// Seconds since the Unix epoch for "YYYY-MM-DDTHH:MM:SS[.fff]" (a space
// instead of 'T' is accepted). Returns nullopt for anything else.
inline std::optional<double> parse_timestamp(std::string_view s) {
    s = trim(s);
    auto digits = [&](std::size_t pos, std::size_t n) -> std::optional<int> {
        if (pos + n > s.size()) return std::nullopt;
        int v = 0;
        for (std::size_t i = pos; i < pos + n; ++i) {
            if (s[i] < '0' || s[i] > '9') return std::nullopt;
            v = v * 10 + (s[i] - '0');
        }
        return v;
    };
    if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
        s[16] != ':') {
        return std::nullopt;
    }
    auto y = digits(0, 4), mo = digits(5, 2), d = digits(8, 2), h = digits(11, 2), mi = digits(14, 2),
         sec = digits(17, 2);
    if (!y || !mo || !d || !h || !mi || !sec) return std::nullopt;
    if (*h > 23 || *mi > 59 || *sec > 60) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*mo)},
                                          std::chrono::day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) return std::nullopt;
    double frac = 0.0;
    if (s.size() > 19) {
        if (s[19] != '.' || s.size() == 20) return std::nullopt;
        double scale = 0.1;
        for (std::size_t i = 20; i < s.size(); ++i) {
            if (s[i] < '0' || s[i] > '9') return std::nullopt;
            frac += (s[i] - '0') * scale;
            scale /= 10.0;
        }
    }
    const auto days = std::chrono::sys_days(ymd).time_since_epoch().count();
    return static_cast<double>(days) * 86400.0 + *h * 3600.0 + *mi * 60.0 + *sec + frac;
}

class IscxBuilder {
public:
    explicit IscxBuilder(const IscxOptions& opt) : opt_(opt), layout_(std::make_shared<FieldLayout>(iscx_layout())) {
        result_.report.source = opt.source_name;
        result_.dataset.schema = FeatureSchema::from_layout(*layout_);
        result_.dataset.provenance.files.push_back(opt.source_name);
    }

    void start(std::string_view name) {
        ++depth_;
        if (depth_ == 2) {
            fields_.clear();
        } else if (depth_ == 3) {
            current_field_ = std::string(name);
            text_.clear();
        }
    }

    void end() {
        if (depth_ == 3) {
            fields_.try_emplace(current_field_, text_);
        } else if (depth_ == 2) {
            finish_flow();
        }
        --depth_;
    }

    void text(std::string_view t) {
        if (depth_ == 3) text_.append(t);
    }

    IngestResult take() { return std::move(result_); }

private:
    const std::string* field(const std::string& element) const {
        auto it = fields_.find(element);
        return it == fields_.end() ? nullptr : &it->second;
    }

    void finish_flow() {
        auto& report = result_.report;
        ++report.rows_read;
        const auto& f = opt_.fields;

        const std::array<const std::string*, 7> cat_src{&f.src_ip, &f.dst_ip, &f.src_port, &f.dst_port,
                                                        &f.app_name, &f.direction, &f.protocol};
        std::vector<std::string> cat;
        cat.reserve(cat_src.size());
        for (const auto* element : cat_src) {
            const auto* v = field(*element);
            if (!v) {
                report.drop_row(drop_reason::missing_field);
                return;
            }
            cat.emplace_back(trim(*v));
        }
        const auto* tag = field(f.tag);
        if (!tag) {
            report.drop_row(drop_reason::missing_field);
            return;
        }

        bool unparseable = false;
        bool non_finite = false;
        auto number = [&](const std::string& element) -> std::optional<double> {
            const auto* v = field(element);
            if (!v) return std::nullopt;
            auto p = parse_number(*v);
            if (p.status == NumberStatus::unparseable) unparseable = true;
            if (p.status == NumberStatus::non_finite) non_finite = true;
            return p.value;
        };

        auto src_bytes = number(f.total_src_bytes);
        auto dst_bytes = number(f.total_dst_bytes);
        auto src_pkts = number(f.total_src_pkts);
        auto dst_pkts = number(f.total_dst_pkts);
        auto total_bytes = number(f.total_bytes);
        auto total_pkts = number(f.total_pkts);

        std::optional<double> duration = number(f.duration);
        if (!duration) {
            const auto* start = field(f.start_time);
            const auto* stop = field(f.stop_time);
            if (start && stop) {
                auto t0 = parse_timestamp(*start);
                auto t1 = parse_timestamp(*stop);
                if (!t0 || !t1) {
                    unparseable = true;
                } else {
                    duration = *t1 - *t0;
                }
            }
        }
        if (unparseable) {
            report.drop_row(drop_reason::unparseable);
            return;
        }
        if (!src_bytes || !dst_bytes || !src_pkts || !dst_pkts || !duration) {
            report.drop_row(drop_reason::missing_field);
            return;
        }
        if (!total_bytes) total_bytes = *src_bytes + *dst_bytes;
        if (!total_pkts) total_pkts = *src_pkts + *dst_pkts;

        std::vector<double> cont{*duration, *src_bytes, *dst_bytes, *total_bytes, *src_pkts, *dst_pkts, *total_pkts};
        for (double v : cont) {
            if (!std::isfinite(v)) non_finite = true;
        }
        if (non_finite) {
            report.drop_row(drop_reason::non_finite);
            return;
        }

        const Label label = opt_.labels(*tag);
        ++report.rows_kept;
        ++(label == Label::Benign ? report.benign : report.malicious);
        result_.dataset.records.emplace_back(layout_, std::move(cat), std::move(cont), label,
                                             opt_.source_name + "#" + std::to_string(report.rows_read - 1));
    }

    const IscxOptions& opt_;
    std::shared_ptr<const FieldLayout> layout_;
    IngestResult result_;
    int depth_ = 0;
    std::string current_field_;
    std::string text_;
    std::unordered_map<std::string, std::string> fields_;
};

}  // namespace detail

// Parses an ISCX labeled-flow XML document: each child element of the root
// is one flow, and each child of a flow is a field. Flows with missing or
// unusable fields are dropped and counted. Malformed XML throws ParseError
// carrying the byte offset reported by the XML tokenizer.
inline IngestResult parse_iscx_xml(std::istream& in, const IscxOptions& options = {}) {
    std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
        XML_ParserCreate("UTF-8"), &XML_ParserFree);
    if (!parser) throw Error("cannot allocate XML parser");

    detail::IscxBuilder builder(options);
    XML_SetUserData(parser.get(), &builder);
    XML_SetElementHandler(
        parser.get(),
        [](void* ud, const XML_Char* name, const XML_Char**) { static_cast<detail::IscxBuilder*>(ud)->start(name); },
        [](void* ud, const XML_Char*) { static_cast<detail::IscxBuilder*>(ud)->end(); });
    XML_SetCharacterDataHandler(parser.get(), [](void* ud, const XML_Char* s, int len) {
        static_cast<detail::IscxBuilder*>(ud)->text(std::string_view(s, static_cast<std::size_t>(len)));
    });

    std::vector<char> buf(1 << 16);
    for (;;) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = in.gcount();
        const bool last = got < static_cast<std::streamsize>(buf.size());
        if (XML_Parse(parser.get(), buf.data(), static_cast<int>(got), last) == XML_STATUS_ERROR) {
            const auto off = XML_GetCurrentByteIndex(parser.get());
            throw ParseError(std::string("malformed XML: ") + XML_ErrorString(XML_GetErrorCode(parser.get())),
                             off < 0 ? ParseError::npos : static_cast<std::size_t>(off));
        }
        if (last) break;
    }
    return builder.take();
}

}  // namespace nids
