#pragma once

// Flow → 59-value statistical feature vector, plus the dataset CSV codec.
//
// Layout: [protocol, ip_version] followed by one 19-value block for each view
// (bidirectional, src→dst, dst→src):
//   duration_ms, iat_max_ms, iat_min_ms, iat_mean_ms, iat_std_ms,
//   bytes, size_max, size_min, size_mean, size_std, packets,
//   ack, cwr, ece, fin, psh, rst, syn, urg (packet counts with the flag set)
// Addresses and ports never enter the vector.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "greenflow/error.hpp"
#include "greenflow/flowmeter.hpp"

namespace greenflow {

inline constexpr std::size_t kViewFeatureCount = 19;
inline constexpr std::size_t kFeatureCount = 2 + 3 * kViewFeatureCount;
inline constexpr std::size_t kMetaColumnCount = 5;
inline constexpr std::size_t kCsvColumnCount = kFeatureCount + 1 + kMetaColumnCount;

static_assert(kFeatureCount == 59);
static_assert(kCsvColumnCount == 65);

using FeatureVector = std::array<double, kFeatureCount>;

enum class View { Bidirectional = 0, SrcToDst = 1, DstToSrc = 2 };

/// Offset of a view's 19-value block within the vector.
constexpr std::size_t view_offset(View v) { return 2 + static_cast<std::size_t>(v) * kViewFeatureCount; }

/// Index of a field within a view block.
enum class ViewField : std::size_t {
    DurationMs, IatMaxMs, IatMinMs, IatMeanMs, IatStdMs,
    Bytes, SizeMax, SizeMin, SizeMean, SizeStd, Packets,
    Ack, Cwr, Ece, Fin, Psh, Rst, Syn, Urg,
};

constexpr std::size_t feature_index(View v, ViewField f) { return view_offset(v) + static_cast<std::size_t>(f); }

inline const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = [] {
        std::array<std::string, kFeatureCount> n;
        n[0] = "protocol";
        n[1] = "ip_version";
        const char* views[] = {"bidirectional", "src2dst", "dst2src"};
        const char* fields[] = {"duration_ms", "iat_max_ms", "iat_min_ms", "iat_mean_ms", "iat_std_ms",
                                "bytes", "size_max", "size_min", "size_mean", "size_std", "packets",
                                "ack_packets", "cwr_packets", "ece_packets", "fin_packets", "psh_packets",
                                "rst_packets", "syn_packets", "urg_packets"};
        for (std::size_t v = 0; v < 3; ++v) {
            for (std::size_t f = 0; f < kViewFeatureCount; ++f) {
                n[2 + v * kViewFeatureCount + f] = std::string(views[v]) + "_" + fields[f];
            }
        }
        return n;
    }();
    return names;
}

namespace detail {

inline void fill_view(FeatureVector& out, View v, const DirStats& s) {
    const std::size_t o = view_offset(v);
    if (s.packets == 0) {
        return; // empty direction: all-zero block
    }
    out[o + 0] = s.duration_ms();
    out[o + 1] = s.iat_max_ms();
    out[o + 2] = s.iat_min_ms();
    out[o + 3] = s.iat_mean_ms();
    out[o + 4] = s.iat_std_ms();
    out[o + 5] = static_cast<double>(s.bytes);
    out[o + 6] = s.size_max;
    out[o + 7] = s.size_min;
    out[o + 8] = s.size_mean();
    out[o + 9] = s.size_std();
    out[o + 10] = static_cast<double>(s.packets);
    for (std::size_t i = 0; i < kTcpFlagCount; ++i) {
        out[o + 11 + i] = static_cast<double>(s.flag_counts[i]);
    }
}

} // namespace detail

inline FeatureVector vectorize(const Flow& flow) {
    FeatureVector v{};
    v[0] = flow.key.protocol;
    v[1] = flow.ip_version;
    detail::fill_view(v, View::Bidirectional, flow.bidir);
    detail::fill_view(v, View::SrcToDst, flow.s2d);
    detail::fill_view(v, View::DstToSrc, flow.d2s);
    return v;
}

/// Carried alongside a sample for error analysis; never a model input.
struct SampleMeta {
    std::string family;
    AttackType attack_type = AttackType::Other;
    std::string src_ip;
    std::string dst_ip;
    double start_ms = 0.0;

    bool operator==(const SampleMeta&) const = default;
};

struct LabeledSample {
    FeatureVector features{};
    std::uint8_t cls = 0; // 0 benign, 1 malicious
    SampleMeta meta;

    bool operator==(const LabeledSample&) const = default;
};

/// Requires a labeled flow.
inline LabeledSample make_sample(const Flow& flow) {
    if (!flow.label) {
        fail(ErrorCode::InvalidArgument, "make_sample: flow has no label");
    }
    LabeledSample s;
    s.features = vectorize(flow);
    s.cls = flow.label->cls == TrafficClass::Malicious ? 1 : 0;
    s.meta.family = flow.label->family;
    s.meta.attack_type = flow.label->attack_type;
    s.meta.src_ip = flow.src().ip.to_string();
    s.meta.dst_ip = flow.dst().ip.to_string();
    s.meta.start_ms = ns_to_ms(flow.start_ts);
    return s;
}

// ---------------------------------------------------------------------------
// CSV

namespace csv {

/// Shortest form that still round-trips: 17 significant digits.
inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

/// Splits one CSV record, honoring double-quoted fields.
inline std::vector<std::string> split_row(std::string_view row) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < row.size(); ++i) {
        const char c = row[i];
        if (quoted) {
            if (c == '"' && i + 1 < row.size() && row[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline std::optional<double> parse_real(std::string_view s) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

} // namespace csv

inline std::string csv_header() {
    std::string h;
    for (const auto& n : feature_names()) {
        h += n;
        h += ',';
    }
    h += "class,family,attack_type,src_ip,dst_ip,start_ts_ms";
    return h;
}

inline std::string to_csv_row(const LabeledSample& s) {
    std::string row;
    row.reserve(kFeatureCount * 8);
    for (double v : s.features) {
        row += csv::format_real(v);
        row += ',';
    }
    row += s.cls == 1 ? "1" : "0";
    row += ',';
    row += csv::quote(s.meta.family);
    row += ',';
    row += csv::quote(to_string(s.meta.attack_type));
    row += ',';
    row += csv::quote(s.meta.src_ip);
    row += ',';
    row += csv::quote(s.meta.dst_ip);
    row += ',';
    row += csv::format_real(s.meta.start_ms);
    return row;
}

inline LabeledSample from_csv_row(std::string_view row) {
    const auto cols = csv::split_row(row);
    if (cols.size() != kCsvColumnCount) {
        fail(ErrorCode::ColumnCountMismatch,
             "expected " + std::to_string(kCsvColumnCount) + " columns, got " + std::to_string(cols.size()));
    }
    LabeledSample s;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        const auto v = csv::parse_real(cols[i]);
        if (!v) {
            fail(ErrorCode::NonNumericFeature, feature_names()[i] + " = '" + cols[i] + "'");
        }
        s.features[i] = *v;
    }
    const std::string& cls = cols[kFeatureCount];
    if (cls != "0" && cls != "1") {
        fail(ErrorCode::InvalidClass, "class must be 0 or 1, got '" + cls + "'");
    }
    s.cls = cls == "1" ? 1 : 0;
    s.meta.family = cols[kFeatureCount + 1];
    const auto at = parse_attack_type(cols[kFeatureCount + 2]);
    if (!at) {
        fail(ErrorCode::InvalidArgument, "unknown attack_type '" + cols[kFeatureCount + 2] + "'");
    }
    s.meta.attack_type = *at;
    s.meta.src_ip = cols[kFeatureCount + 3];
    s.meta.dst_ip = cols[kFeatureCount + 4];
    const auto start = csv::parse_real(cols[kFeatureCount + 5]);
    if (!start) {
        fail(ErrorCode::NonNumericFeature, "start_ts_ms = '" + cols[kFeatureCount + 5] + "'");
    }
    s.meta.start_ms = *start;
    return s;
}

/// Provenance lines written as '#' comments above the header.
struct DatasetInfo {
    std::vector<std::string> notes;
};

inline constexpr std::string_view kDatasetMagic = "# greenflow-dataset v1";

inline void write_dataset(std::ostream& out, const std::vector<LabeledSample>& samples, const DatasetInfo& info = {}) {
    out << kDatasetMagic << '\n';
    out << "# std_divisor=n-1\n";
    for (const auto& n : info.notes) {
        out << "# " << n << '\n';
    }
    out << csv_header() << '\n';
    for (const auto& s : samples) {
        out << to_csv_row(s) << '\n';
    }
}

struct Dataset {
    std::vector<LabeledSample> samples;
    std::vector<std::string> comments;
};

inline Dataset read_dataset(std::istream& in) {
    Dataset d;
    std::string line;
    bool seen_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            d.comments.push_back(line);
            continue;
        }
        if (!seen_header) {
            if (line != csv_header()) {
                fail(ErrorCode::ColumnCountMismatch, "dataset header does not match the expected 65 columns");
            }
            seen_header = true;
            continue;
        }
        try {
            d.samples.push_back(from_csv_row(line));
        } catch (const Error& e) {
            throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!seen_header) {
        fail(ErrorCode::ColumnCountMismatch, "dataset has no header line");
    }
    return d;
}

} // namespace greenflow
