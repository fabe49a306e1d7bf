#pragma once

// Bidirectional five-tuple flow metering and ground-truth label joining.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "greenflow/capture.hpp"
#include "greenflow/error.hpp"

namespace greenflow {

struct Endpoint {
    IpAddress ip;
    std::uint16_t port = 0;

    auto operator<=>(const Endpoint&) const = default;
    bool operator==(const Endpoint&) const = default;
};

/// Canonical five-tuple: endpoint a sorts before (or equal to) endpoint b, so
/// a packet and its reply share a key.
struct FlowKey {
    IpAddress ip_a;
    IpAddress ip_b;
    std::uint16_t port_a = 0;
    std::uint16_t port_b = 0;
    std::uint8_t protocol = 0;

    Endpoint a() const { return {ip_a, port_a}; }
    Endpoint b() const { return {ip_b, port_b}; }

    auto operator<=>(const FlowKey&) const = default;
    bool operator==(const FlowKey&) const = default;
};

inline FlowKey make_key(Endpoint src, Endpoint dst, std::uint8_t protocol) {
    if (dst < src) {
        std::swap(src, dst);
    }
    return FlowKey{src.ip, dst.ip, src.port, dst.port, protocol};
}

inline FlowKey canonical_key(const ParsedPacket& p) {
    return make_key({p.src_ip, p.src_port}, {p.dst_ip, p.dst_port}, p.protocol);
}

} // namespace greenflow

template <>
struct std::hash<greenflow::FlowKey> {
    std::size_t operator()(const greenflow::FlowKey& k) const noexcept {
        const std::hash<greenflow::IpAddress> h;
        std::size_t v = h(k.ip_a);
        v ^= h(k.ip_b) + 0x9E3779B97F4A7C15ULL + (v << 6) + (v >> 2);
        v ^= (static_cast<std::size_t>(k.port_a) << 24 | static_cast<std::size_t>(k.port_b) << 8 | k.protocol) *
             0xFF51AFD7ED558CCDULL;
        return v;
    }
};

namespace greenflow {

/// Incremental per-direction statistics. Accumulators are exact integers
/// (sizes in bytes, gaps in ns) so derived moments carry no summation error.
struct DirStats {
    std::uint64_t packets = 0;
    std::uint64_t bytes = 0;
    TimeNs first_ts = 0;
    TimeNs last_ts = 0;
    std::uint32_t size_min = 0;
    std::uint32_t size_max = 0;
    std::uint64_t size_sum = 0;
    std::uint64_t size_sumsq = 0;
    TimeNs iat_min = 0;
    TimeNs iat_max = 0;
    std::int64_t iat_sum = 0;
    unsigned __int128 iat_sumsq = 0;
    std::uint64_t iat_count = 0;
    std::array<std::uint64_t, kTcpFlagCount> flag_counts{};

    void add(TimeNs ts, std::uint32_t size, TcpFlags flags) {
        if (packets == 0) {
            first_ts = last_ts = ts;
            size_min = size_max = size;
        } else {
            // Out-of-order arrivals contribute a zero gap.
            const TimeNs gap = std::max<TimeNs>(0, ts - last_ts);
            iat_min = iat_count == 0 ? gap : std::min(iat_min, gap);
            iat_max = iat_count == 0 ? gap : std::max(iat_max, gap);
            iat_sum += gap;
            iat_sumsq += static_cast<unsigned __int128>(gap) * static_cast<unsigned __int128>(gap);
            ++iat_count;
            first_ts = std::min(first_ts, ts);
            last_ts = std::max(last_ts, ts);
            size_min = std::min(size_min, size);
            size_max = std::max(size_max, size);
        }
        ++packets;
        bytes += size;
        size_sum += size;
        size_sumsq += static_cast<std::uint64_t>(size) * size;
        for (std::size_t i = 0; i < kTcpFlagCount; ++i) {
            if (flags.test(static_cast<TcpFlag>(i))) {
                ++flag_counts[i];
            }
        }
    }

    std::uint64_t flag(TcpFlag f) const { return flag_counts[static_cast<std::size_t>(f)]; }

    double duration_ms() const { return packets == 0 ? 0.0 : ns_to_ms(last_ts - first_ts); }
    double size_mean() const { return packets == 0 ? 0.0 : static_cast<double>(size_sum) / static_cast<double>(packets); }

    /// Sample standard deviation (divisor n-1); 0 below two packets.
    double size_std() const {
        if (packets < 2) {
            return 0.0;
        }
        const auto n = static_cast<unsigned __int128>(packets);
        const unsigned __int128 num = n * size_sumsq - static_cast<unsigned __int128>(size_sum) * size_sum;
        return std::sqrt(static_cast<double>(num) / (static_cast<double>(packets) * static_cast<double>(packets - 1)));
    }

    double iat_min_ms() const { return iat_count == 0 ? 0.0 : ns_to_ms(iat_min); }
    double iat_max_ms() const { return iat_count == 0 ? 0.0 : ns_to_ms(iat_max); }
    double iat_mean_ms() const {
        return iat_count == 0 ? 0.0 : static_cast<double>(iat_sum) / static_cast<double>(iat_count) / 1e6;
    }

    double iat_std_ms() const {
        if (iat_count < 2) {
            return 0.0;
        }
        const auto n = static_cast<unsigned __int128>(iat_count);
        const auto sum = static_cast<unsigned __int128>(iat_sum);
        const unsigned __int128 num = n * iat_sumsq - sum * sum;
        const double var_ns2 = static_cast<double>(num) /
                               (static_cast<double>(iat_count) * static_cast<double>(iat_count - 1));
        return std::sqrt(var_ns2) / 1e6;
    }
};

enum class TrafficClass : std::uint8_t { Benign = 0, Malicious = 1 };

enum class AttackType : std::uint8_t { PortScan, CommandAndControl, DoS, Other };

constexpr std::string_view to_string(TrafficClass c) { return c == TrafficClass::Benign ? "benign" : "malicious"; }

constexpr std::string_view to_string(AttackType t) {
    switch (t) {
    case AttackType::PortScan: return "port-scan";
    case AttackType::CommandAndControl: return "C&C";
    case AttackType::DoS: return "DoS";
    case AttackType::Other: return "other";
    }
    return "other";
}

inline std::optional<AttackType> parse_attack_type(std::string_view s) {
    for (auto t : {AttackType::PortScan, AttackType::CommandAndControl, AttackType::DoS, AttackType::Other}) {
        if (s == to_string(t)) {
            return t;
        }
    }
    return std::nullopt;
}

struct FlowLabel {
    TrafficClass cls = TrafficClass::Benign;
    std::string family;
    AttackType attack_type = AttackType::Other;

    bool operator==(const FlowLabel&) const = default;
};

struct Flow {
    FlowKey key;
    /// True when endpoint a of the key sent the first packet.
    bool initiator_is_a = true;
    std::uint8_t ip_version = 4;
    TimeNs start_ts = 0;
    DirStats bidir;
    DirStats s2d;
    DirStats d2s;
    std::optional<FlowLabel> label;

    Endpoint src() const { return initiator_is_a ? key.a() : key.b(); }
    Endpoint dst() const { return initiator_is_a ? key.b() : key.a(); }
};

struct FlowMeterConfig {
    std::int64_t idle_timeout_ms = 120'000;
    std::int64_t active_timeout_ms = 1'800'000;
    /// Close a flow after an RST, or once both directions have sent FIN.
    bool close_on_fin_rst = false;
    /// How often (in capture time) ingest sweeps idle flows into the outbox.
    std::int64_t sweep_interval_ms = 1'000;
};

/// Groups packets into bidirectional flows. Single-threaded; one meter per
/// capture file.
class FlowMeter {
public:
    explicit FlowMeter(FlowMeterConfig config = {}) : config_(config) {}

    const FlowMeterConfig& config() const { return config_; }
    std::size_t open_flows() const { return open_.size(); }
    std::uint64_t packets_ingested() const { return packets_; }

    void ingest(const ParsedPacket& p) {
        ++packets_;
        if (p.ts - last_sweep_ > ms_to_ns(config_.sweep_interval_ms)) {
            auto closed = expire(p.ts);
            outbox_.insert(outbox_.end(), std::make_move_iterator(closed.begin()),
                           std::make_move_iterator(closed.end()));
            last_sweep_ = p.ts;
        }
        const FlowKey key = canonical_key(p);
        auto it = open_.find(key);
        if (it != open_.end() && timed_out(it->second, p.ts)) {
            outbox_.push_back(std::move(it->second));
            open_.erase(it);
            it = open_.end();
        }
        if (it == open_.end()) {
            Flow f;
            f.key = key;
            f.initiator_is_a = Endpoint{p.src_ip, p.src_port} == key.a();
            f.ip_version = p.ip_version;
            f.start_ts = p.ts;
            it = open_.emplace(key, std::move(f)).first;
        }
        Flow& flow = it->second;
        const bool forward = Endpoint{p.src_ip, p.src_port} == flow.src();
        flow.bidir.add(p.ts, p.ip_total_bytes, p.tcp_flags);
        (forward ? flow.s2d : flow.d2s).add(p.ts, p.ip_total_bytes, p.tcp_flags);

        if (config_.close_on_fin_rst &&
            (p.tcp_flags.test(TcpFlag::Rst) ||
             (flow.s2d.flag(TcpFlag::Fin) > 0 && flow.d2s.flag(TcpFlag::Fin) > 0))) {
            outbox_.push_back(std::move(flow));
            open_.erase(it);
        }
    }

    /// Flows closed by ingest (timeouts hit by new packets, periodic sweeps,
    /// FIN/RST closure) since the last call.
    std::vector<Flow> take_closed() { return std::exchange(outbox_, {}); }

    /// Closes flows idle longer than the idle timeout or alive longer than the
    /// active timeout at time `now`. Result is ordered by (start_ts, key).
    std::vector<Flow> expire(TimeNs now) {
        std::vector<Flow> closed;
        for (auto it = open_.begin(); it != open_.end();) {
            if (timed_out(it->second, now)) {
                closed.push_back(std::move(it->second));
                it = open_.erase(it);
            } else {
                ++it;
            }
        }
        sort_flows(closed);
        return closed;
    }

    /// End of capture: everything still open plus the outbox.
    std::vector<Flow> flush() {
        std::vector<Flow> all = take_closed();
        for (auto& [_, f] : open_) {
            all.push_back(std::move(f));
        }
        open_.clear();
        sort_flows(all);
        return all;
    }

    static void sort_flows(std::vector<Flow>& flows) {
        std::sort(flows.begin(), flows.end(), [](const Flow& x, const Flow& y) {
            return std::tie(x.start_ts, x.key) < std::tie(y.start_ts, y.key);
        });
    }

private:
    bool timed_out(const Flow& f, TimeNs now) const {
        return now - f.bidir.last_ts > ms_to_ns(config_.idle_timeout_ms) ||
               now - f.start_ts > ms_to_ns(config_.active_timeout_ms);
    }

    FlowMeterConfig config_;
    std::unordered_map<FlowKey, Flow> open_;
    std::vector<Flow> outbox_;
    std::uint64_t packets_ = 0;
    TimeNs last_sweep_ = std::numeric_limits<TimeNs>::min() / 2;
};

// ---------------------------------------------------------------------------
// Labels

struct LabelRecord {
    TimeNs ts = 0;
    IpAddress src_ip;
    IpAddress dst_ip;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    TrafficClass label = TrafficClass::Benign;
    std::string detailed_label;
};

struct LabelFile {
    std::vector<LabelRecord> records;
    std::uint64_t malformed_rows = 0;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

/// "1525879831.015811" → ns, parsed digit-wise to avoid binary rounding.
inline std::optional<TimeNs> parse_epoch_seconds(std::string_view s) {
    const std::size_t dot = s.find('.');
    const std::string_view whole = s.substr(0, dot);
    std::int64_t secs = 0;
    auto [p, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), secs);
    if (ec != std::errc{} || p != whole.data() + whole.size() || whole.empty()) {
        return std::nullopt;
    }
    std::int64_t frac = 0;
    if (dot != std::string_view::npos) {
        const std::string_view digits = s.substr(dot + 1);
        std::int64_t scale = 100'000'000;
        for (char c : digits) {
            if (c < '0' || c > '9') {
                return std::nullopt;
            }
            frac += (c - '0') * scale;
            scale /= 10;
        }
    }
    return secs * 1'000'000'000 + frac;
}

inline std::optional<std::uint16_t> parse_port(std::string_view s) {
    unsigned v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty() || v > 65535) {
        return std::nullopt;
    }
    return static_cast<std::uint16_t>(v);
}

} // namespace detail

/// Reads the tab-separated label layout
/// `ts  src_ip  src_port  dst_ip  dst_port  label  detailed_label`.
/// Lines starting with '#' and blank lines are ignored; any other row that
/// does not parse is skipped and counted.
inline LabelFile parse_label_file(std::istream& in) {
    LabelFile out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const auto cols = detail::split(line, '\t');
        if (cols.size() != 7) {
            ++out.malformed_rows;
            continue;
        }
        const auto ts = detail::parse_epoch_seconds(detail::trim(cols[0]));
        const auto src = IpAddress::parse(detail::trim(cols[1]));
        const auto sport = detail::parse_port(detail::trim(cols[2]));
        const auto dst = IpAddress::parse(detail::trim(cols[3]));
        const auto dport = detail::parse_port(detail::trim(cols[4]));
        const std::string cls = detail::lower(detail::trim(cols[5]));
        if (!ts || !src || !sport || !dst || !dport || (cls != "benign" && cls != "malicious")) {
            ++out.malformed_rows;
            continue;
        }
        out.records.push_back(LabelRecord{*ts, *src, *dst, *sport, *dport,
                                          cls == "benign" ? TrafficClass::Benign : TrafficClass::Malicious,
                                          std::string(detail::trim(cols[6]))});
    }
    return out;
}

/// Substring rules mapping a detailed label to an attack type; first match wins.
class AttackTypeMap {
public:
    static AttackTypeMap defaults() {
        AttackTypeMap m;
        m.rules_ = {{"PartOfAHorizontalPortScan", AttackType::PortScan},
                    {"C&C", AttackType::CommandAndControl},
                    {"DDoS", AttackType::DoS},
                    {"DoS", AttackType::DoS}};
        return m;
    }

    /// Lines of `substring<TAB>attack_type`; '#' comments allowed.
    static AttackTypeMap parse(std::istream& in) {
        AttackTypeMap m;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') {
                continue;
            }
            const auto cols = detail::split(line, '\t');
            const auto type = cols.size() == 2 ? parse_attack_type(detail::trim(cols[1])) : std::nullopt;
            if (!type || cols[0].empty()) {
                fail(ErrorCode::InvalidArgument, "attack-type map row: " + line);
            }
            m.rules_.emplace_back(std::string(cols[0]), *type);
        }
        return m;
    }

    AttackType classify(std::string_view detailed_label) const {
        for (const auto& [needle, type] : rules_) {
            if (detailed_label.find(needle) != std::string_view::npos) {
                return type;
            }
        }
        return AttackType::Other;
    }

private:
    std::vector<std::pair<std::string, AttackType>> rules_;
};

/// Family is the detailed label up to the first '/', e.g. "Mirai/C&C" → "Mirai".
inline std::string family_of(std::string_view detailed_label) {
    return std::string(detailed_label.substr(0, detailed_label.find('/')));
}

struct DropReport {
    std::uint64_t conflicting = 0;
    std::uint64_t unmatched = 0;
    std::uint64_t malformed_label_rows = 0;
};

struct JoinResult {
    std::vector<Flow> labeled;
    DropReport drops;
};

/// Attaches labels to flows. A record matches a flow when its endpoints equal
/// the flow's (either direction) and |flow.start_ts - record.ts| <= tolerance.
/// Flows with no match, or with matches disagreeing on (label, detailed_label),
/// are dropped and counted.
inline JoinResult join_labels(std::vector<Flow> flows, const std::vector<LabelRecord>& records,
                              std::int64_t ts_tolerance_ms, const AttackTypeMap& attack_map = AttackTypeMap::defaults()) {
    using PairKey = std::pair<Endpoint, Endpoint>;
    struct PairHash {
        std::size_t operator()(const PairKey& k) const noexcept {
            const std::hash<IpAddress> h;
            return h(k.first.ip) * 31 + h(k.second.ip) * 17 + k.first.port * 65537u + k.second.port;
        }
    };
    std::unordered_map<PairKey, std::vector<std::size_t>, PairHash> index;
    for (std::size_t i = 0; i < records.size(); ++i) {
        Endpoint s{records[i].src_ip, records[i].src_port};
        Endpoint d{records[i].dst_ip, records[i].dst_port};
        if (d < s) {
            std::swap(s, d);
        }
        index[{s, d}].push_back(i);
    }

    const TimeNs tol = ms_to_ns(ts_tolerance_ms);
    JoinResult out;
    for (auto& f : flows) {
        const auto it = index.find({f.key.a(), f.key.b()});
        const LabelRecord* match = nullptr;
        bool conflict = false;
        if (it != index.end()) {
            for (std::size_t idx : it->second) {
                const LabelRecord& r = records[idx];
                const TimeNs diff = r.ts > f.start_ts ? r.ts - f.start_ts : f.start_ts - r.ts;
                if (diff > tol) {
                    continue;
                }
                if (match == nullptr) {
                    match = &r;
                } else if (match->label != r.label || match->detailed_label != r.detailed_label) {
                    conflict = true;
                }
            }
        }
        if (match == nullptr) {
            ++out.drops.unmatched;
        } else if (conflict) {
            ++out.drops.conflicting;
        } else {
            f.label = FlowLabel{match->label, family_of(match->detailed_label),
                                attack_map.classify(match->detailed_label)};
            out.labeled.push_back(std::move(f));
        }
    }
    return out;
}

} // namespace greenflow
