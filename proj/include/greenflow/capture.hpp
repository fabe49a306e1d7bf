#pragma once

// Classic capture-file reading and Ethernet/IP/TCP/UDP header decoding.
//
// Only header facts survive decoding: the reader keeps at most
// `max_header_bytes` of each record and decode_frame never copies bytes past
// the transport header.

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <arpa/inet.h>

#include "greenflow/error.hpp"

namespace greenflow {

/// Nanoseconds since the epoch. Captures carry µs or ns timestamps; everything
/// downstream that reports "ms" converts from this.
using TimeNs = std::int64_t;

constexpr TimeNs ms_to_ns(std::int64_t ms) { return ms * 1'000'000; }
constexpr double ns_to_ms(TimeNs ns) { return static_cast<double>(ns) / 1e6; }

/// IPv4 or IPv6 address as an opaque value. IPv4 occupies the first four
/// bytes; the remaining bytes are zero.
struct IpAddress {
    std::array<std::uint8_t, 16> bytes{};
    std::uint8_t version = 4;

    static IpAddress v4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
        IpAddress ip;
        ip.bytes[0] = a;
        ip.bytes[1] = b;
        ip.bytes[2] = c;
        ip.bytes[3] = d;
        return ip;
    }

    static IpAddress from_v4(std::span<const std::uint8_t> raw) {
        IpAddress ip;
        std::copy_n(raw.begin(), 4, ip.bytes.begin());
        return ip;
    }

    static IpAddress from_v6(std::span<const std::uint8_t> raw) {
        IpAddress ip;
        ip.version = 6;
        std::copy_n(raw.begin(), 16, ip.bytes.begin());
        return ip;
    }

    static std::optional<IpAddress> parse(std::string_view text) {
        const std::string s(text);
        IpAddress ip;
        if (inet_pton(AF_INET, s.c_str(), ip.bytes.data()) == 1) {
            return ip;
        }
        ip.version = 6;
        if (inet_pton(AF_INET6, s.c_str(), ip.bytes.data()) == 1) {
            return ip;
        }
        return std::nullopt;
    }

    std::string to_string() const {
        char buf[INET6_ADDRSTRLEN] = {};
        inet_ntop(version == 4 ? AF_INET : AF_INET6, bytes.data(), buf, sizeof buf);
        return buf;
    }

    auto operator<=>(const IpAddress&) const = default;
    bool operator==(const IpAddress&) const = default;
};

/// TCP control bits in the order used by the feature vector.
enum class TcpFlag : std::uint8_t { Ack, Cwr, Ece, Fin, Psh, Rst, Syn, Urg };

inline constexpr std::size_t kTcpFlagCount = 8;

struct TcpFlags {
    /// Raw byte 13 of the TCP header (CWR ECE URG ACK PSH RST SYN FIN, MSB first).
    std::uint8_t raw = 0;

    static constexpr std::uint8_t mask(TcpFlag f) {
        switch (f) {
        case TcpFlag::Ack: return 0x10;
        case TcpFlag::Cwr: return 0x80;
        case TcpFlag::Ece: return 0x40;
        case TcpFlag::Fin: return 0x01;
        case TcpFlag::Psh: return 0x08;
        case TcpFlag::Rst: return 0x04;
        case TcpFlag::Syn: return 0x02;
        case TcpFlag::Urg: return 0x20;
        }
        return 0;
    }

    bool test(TcpFlag f) const { return (raw & mask(f)) != 0; }
    void set(TcpFlag f) { raw = static_cast<std::uint8_t>(raw | mask(f)); }

    bool operator==(const TcpFlags&) const = default;
};

/// One decoded frame. Holds header facts only.
struct ParsedPacket {
    TimeNs ts = 0;
    IpAddress src_ip;
    IpAddress dst_ip;
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::uint8_t protocol = 0;
    std::uint8_t ip_version = 4;
    /// IP header + IP payload, from the IP length fields (never the frame length).
    std::uint32_t ip_total_bytes = 0;
    TcpFlags tcp_flags;

    bool operator==(const ParsedPacket&) const = default;
};

inline constexpr std::uint8_t kProtoIcmp = 1;
inline constexpr std::uint8_t kProtoTcp = 6;
inline constexpr std::uint8_t kProtoUdp = 17;

inline constexpr std::uint32_t kLinkEthernet = 1;
inline constexpr std::uint32_t kLinkRaw = 101;

enum class TsResolution { Microsecond, Nanosecond };

struct CaptureHeader {
    std::uint32_t magic = 0;
    TsResolution ts_resolution = TsResolution::Microsecond;
    bool swapped = false;
    std::uint16_t version_major = 2;
    std::uint16_t version_minor = 4;
    std::uint32_t snaplen = 0;
    std::uint32_t link_type = kLinkEthernet;
};

inline constexpr std::uint32_t kMagicMicro = 0xA1B2C3D4;
inline constexpr std::uint32_t kMagicNano = 0xA1B23C4D;

namespace detail {

constexpr std::uint32_t bswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xFF00) | ((v << 8) & 0xFF0000) | (v << 24);
}

inline std::uint32_t load_le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t load_be16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

inline void store_le32(std::uint8_t* p, std::uint32_t v) {
    p[0] = static_cast<std::uint8_t>(v);
    p[1] = static_cast<std::uint8_t>(v >> 8);
    p[2] = static_cast<std::uint8_t>(v >> 16);
    p[3] = static_cast<std::uint8_t>(v >> 24);
}

inline void store_be16(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v >> 8);
    p[1] = static_cast<std::uint8_t>(v);
}

} // namespace detail

/// Parses a 24-byte global header. Throws UnknownMagic or MalformedHeader.
inline CaptureHeader parse_capture_header(std::span<const std::uint8_t, 24> raw) {
    CaptureHeader h;
    const std::uint32_t magic = detail::load_le32(raw.data());
    h.magic = magic;
    if (magic == kMagicMicro || magic == kMagicNano) {
        h.swapped = false;
        h.ts_resolution = magic == kMagicMicro ? TsResolution::Microsecond : TsResolution::Nanosecond;
    } else if (magic == detail::bswap32(kMagicMicro) || magic == detail::bswap32(kMagicNano)) {
        h.swapped = true;
        h.ts_resolution = magic == detail::bswap32(kMagicMicro) ? TsResolution::Microsecond
                                                                : TsResolution::Nanosecond;
    } else {
        char buf[16];
        std::snprintf(buf, sizeof buf, "0x%08X", magic);
        fail(ErrorCode::UnknownMagic, std::string("capture magic ") + buf);
    }
    auto u32 = [&](std::size_t off) {
        const std::uint32_t v = detail::load_le32(raw.data() + off);
        return h.swapped ? detail::bswap32(v) : v;
    };
    const std::uint32_t versions = u32(4);
    // The two 16-bit version fields are stored in file byte order as well.
    if (h.swapped) {
        h.version_major = static_cast<std::uint16_t>((raw[4] << 8) | raw[5]);
        h.version_minor = static_cast<std::uint16_t>((raw[6] << 8) | raw[7]);
    } else {
        h.version_major = static_cast<std::uint16_t>(versions & 0xFFFF);
        h.version_minor = static_cast<std::uint16_t>(versions >> 16);
    }
    h.snaplen = u32(16);
    h.link_type = u32(20) & 0x0FFFFFFF; // upper bits may carry FCS info
    if (h.snaplen == 0) {
        fail(ErrorCode::MalformedHeader, "capture snaplen is 0");
    }
    return h;
}

/// One capture record: timestamp plus the leading bytes of the frame.
struct CaptureRecord {
    TimeNs ts = 0;
    std::uint32_t captured_len = 0;
    std::uint32_t original_len = 0;
    std::vector<std::uint8_t> frame; // at most max_header_bytes
};

struct CaptureStats {
    std::uint64_t records = 0;
    std::uint64_t truncated = 0;
};

/// Streaming reader over a classic capture file. One reader per stream;
/// readers for different files are independent.
class CaptureReader {
public:
    /// Ethernet + one VLAN tag + IPv6 with a few extension headers + TCP with options.
    static constexpr std::size_t kDefaultMaxHeaderBytes = 256;

    explicit CaptureReader(std::istream& in, std::size_t max_header_bytes = kDefaultMaxHeaderBytes)
        : in_(in), max_header_bytes_(max_header_bytes) {
        std::array<std::uint8_t, 24> raw{};
        if (!read_exact(raw.data(), raw.size())) {
            fail(ErrorCode::MalformedHeader, "stream shorter than the 24-byte capture header");
        }
        header_ = parse_capture_header(raw);
    }

    const CaptureHeader& header() const { return header_; }
    const CaptureStats& stats() const { return stats_; }

    /// Next record, or nullopt at end of stream. A record whose header promises
    /// more bytes than remain is dropped and counted in stats().truncated.
    std::optional<CaptureRecord> next() {
        if (done_) {
            return std::nullopt;
        }
        std::array<std::uint8_t, 16> rh{};
        const std::size_t got = read_some(rh.data(), rh.size());
        if (got == 0) {
            done_ = true;
            return std::nullopt;
        }
        if (got < rh.size()) {
            ++stats_.truncated;
            done_ = true;
            return std::nullopt;
        }
        auto u32 = [&](std::size_t off) {
            const std::uint32_t v = detail::load_le32(rh.data() + off);
            return header_.swapped ? detail::bswap32(v) : v;
        };
        const std::uint32_t ts_sec = u32(0);
        const std::uint32_t ts_frac = u32(4);
        CaptureRecord rec;
        rec.captured_len = u32(8);
        rec.original_len = u32(12);
        const std::int64_t frac_ns = header_.ts_resolution == TsResolution::Microsecond
                                         ? static_cast<std::int64_t>(ts_frac) * 1000
                                         : static_cast<std::int64_t>(ts_frac);
        rec.ts = static_cast<std::int64_t>(ts_sec) * 1'000'000'000 + frac_ns;

        const std::size_t keep = std::min<std::size_t>(rec.captured_len, max_header_bytes_);
        rec.frame.resize(keep);
        if (read_some(rec.frame.data(), keep) < keep || !skip(rec.captured_len - keep)) {
            ++stats_.truncated;
            done_ = true;
            return std::nullopt;
        }
        ++stats_.records;
        return rec;
    }

private:
    bool read_exact(std::uint8_t* dst, std::size_t n) { return read_some(dst, n) == n; }

    std::size_t read_some(std::uint8_t* dst, std::size_t n) {
        if (n == 0) {
            return 0;
        }
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        return static_cast<std::size_t>(in_.gcount());
    }

    bool skip(std::size_t n) {
        std::array<char, 4096> sink{};
        while (n > 0) {
            const std::size_t chunk = std::min(n, sink.size());
            in_.read(sink.data(), static_cast<std::streamsize>(chunk));
            if (static_cast<std::size_t>(in_.gcount()) != chunk) {
                return false;
            }
            n -= chunk;
        }
        return true;
    }

    std::istream& in_;
    std::size_t max_header_bytes_;
    CaptureHeader header_;
    CaptureStats stats_;
    bool done_ = false;
};

/// Why decode_frame declined to produce a packet.
enum class SkipReason { NonIp, Fragment, StackedVlan, UnsupportedLink, Malformed };

struct Skip {
    SkipReason reason = SkipReason::NonIp;
    bool operator==(const Skip&) const = default;
};

using DecodeResult = std::variant<ParsedPacket, Skip>;

namespace detail {

inline DecodeResult malformed() { return Skip{SkipReason::Malformed}; }

/// Fills ports and flags from the transport header at `l4` (captured bytes) of
/// `l4_len` bytes promised by the IP layer.
inline bool decode_transport(ParsedPacket& p, std::span<const std::uint8_t> l4, std::uint32_t l4_len) {
    if (p.protocol == kProtoTcp) {
        if (l4.size() < 20 || l4_len < 20) {
            return false;
        }
        const unsigned data_offset = (l4[12] >> 4) * 4u;
        if (data_offset < 20 || data_offset > l4_len) {
            return false;
        }
        p.src_port = load_be16(l4.data());
        p.dst_port = load_be16(l4.data() + 2);
        p.tcp_flags.raw = l4[13];
    } else if (p.protocol == kProtoUdp) {
        if (l4.size() < 8 || l4_len < 8) {
            return false;
        }
        p.src_port = load_be16(l4.data());
        p.dst_port = load_be16(l4.data() + 2);
    }
    return true;
}

inline DecodeResult decode_ipv4(std::span<const std::uint8_t> ip, TimeNs ts) {
    if (ip.size() < 20 || (ip[0] >> 4) != 4) {
        return malformed();
    }
    const unsigned ihl = (ip[0] & 0x0F) * 4u;
    const std::uint16_t total = load_be16(ip.data() + 2);
    if (ihl < 20 || ip.size() < ihl || total < ihl) {
        return malformed();
    }
    const std::uint16_t frag = load_be16(ip.data() + 6);
    if ((frag & 0x1FFF) != 0) {
        return Skip{SkipReason::Fragment};
    }
    ParsedPacket p;
    p.ts = ts;
    p.ip_version = 4;
    p.protocol = ip[9];
    p.ip_total_bytes = total;
    p.src_ip = IpAddress::from_v4(ip.subspan(12, 4));
    p.dst_ip = IpAddress::from_v4(ip.subspan(16, 4));
    if (!decode_transport(p, ip.subspan(ihl), total - ihl)) {
        return malformed();
    }
    return p;
}

inline DecodeResult decode_ipv6(std::span<const std::uint8_t> ip, TimeNs ts) {
    if (ip.size() < 40 || (ip[0] >> 4) != 6) {
        return malformed();
    }
    const std::uint16_t payload_len = load_be16(ip.data() + 4);
    ParsedPacket p;
    p.ts = ts;
    p.ip_version = 6;
    p.ip_total_bytes = 40u + payload_len;
    p.src_ip = IpAddress::from_v6(ip.subspan(8, 16));
    p.dst_ip = IpAddress::from_v6(ip.subspan(24, 16));

    std::uint8_t next = ip[6];
    std::size_t off = 40;
    for (;;) {
        if (next == 0 || next == 43 || next == 60) { // hop-by-hop, routing, destination options
            if (ip.size() < off + 2) {
                return malformed();
            }
            const std::size_t len = (static_cast<std::size_t>(ip[off + 1]) + 1) * 8;
            next = ip[off];
            off += len;
        } else if (next == 44) { // fragment
            if (ip.size() < off + 8) {
                return malformed();
            }
            if ((load_be16(ip.data() + off + 2) >> 3) != 0) {
                return Skip{SkipReason::Fragment};
            }
            next = ip[off];
            off += 8;
        } else if (next == 51) { // authentication header
            if (ip.size() < off + 2) {
                return malformed();
            }
            const std::size_t len = (static_cast<std::size_t>(ip[off + 1]) + 2) * 4;
            next = ip[off];
            off += len;
        } else {
            break;
        }
        if (off > p.ip_total_bytes) {
            return malformed();
        }
    }
    p.protocol = next;
    if (off > ip.size() && (next == kProtoTcp || next == kProtoUdp)) {
        return malformed();
    }
    const auto l4 = off <= ip.size() ? ip.subspan(off) : std::span<const std::uint8_t>{};
    if (!decode_transport(p, l4, p.ip_total_bytes - static_cast<std::uint32_t>(off))) {
        return malformed();
    }
    return p;
}

} // namespace detail

/// Decodes Ethernet II (optionally one 802.1Q tag) → IPv4/IPv6 → TCP/UDP.
/// IP packets carrying other transports are kept with ports 0.
inline DecodeResult decode_frame(std::span<const std::uint8_t> frame, std::uint32_t link_type, TimeNs ts = 0) {
    if (link_type == kLinkRaw) {
        if (frame.empty()) {
            return detail::malformed();
        }
        const int version = frame[0] >> 4;
        if (version == 4) {
            return detail::decode_ipv4(frame, ts);
        }
        if (version == 6) {
            return detail::decode_ipv6(frame, ts);
        }
        return Skip{SkipReason::NonIp};
    }
    if (link_type != kLinkEthernet) {
        return Skip{SkipReason::UnsupportedLink};
    }
    if (frame.size() < 14) {
        return detail::malformed();
    }
    std::size_t off = 12;
    std::uint16_t ethertype = detail::load_be16(frame.data() + off);
    if (ethertype == 0x8100) {
        if (frame.size() < 18) {
            return detail::malformed();
        }
        off += 4;
        ethertype = detail::load_be16(frame.data() + off);
        if (ethertype == 0x8100 || ethertype == 0x88A8) {
            return Skip{SkipReason::StackedVlan};
        }
    }
    off += 2;
    if (ethertype == 0x0800) {
        return detail::decode_ipv4(frame.subspan(off), ts);
    }
    if (ethertype == 0x86DD) {
        return detail::decode_ipv6(frame.subspan(off), ts);
    }
    return Skip{SkipReason::NonIp};
}

/// Writes microsecond-resolution little-endian capture files.
class CaptureWriter {
public:
    explicit CaptureWriter(std::ostream& out, std::uint32_t snaplen = 65535,
                           std::uint32_t link_type = kLinkEthernet)
        : out_(out), snaplen_(snaplen) {
        std::array<std::uint8_t, 24> h{};
        detail::store_le32(h.data(), kMagicMicro);
        h[4] = 2;
        h[6] = 4;
        detail::store_le32(h.data() + 16, snaplen);
        detail::store_le32(h.data() + 20, link_type);
        out_.write(reinterpret_cast<const char*>(h.data()), h.size());
    }

    /// `original_len` defaults to the frame size; a larger value records a
    /// snaplen-truncated frame.
    void write(TimeNs ts, std::span<const std::uint8_t> frame, std::uint32_t original_len = 0) {
        const auto incl = static_cast<std::uint32_t>(std::min<std::size_t>(frame.size(), snaplen_));
        std::array<std::uint8_t, 16> rh{};
        const TimeNs secs = ts / 1'000'000'000;
        detail::store_le32(rh.data(), static_cast<std::uint32_t>(secs));
        detail::store_le32(rh.data() + 4, static_cast<std::uint32_t>((ts - secs * 1'000'000'000) / 1000));
        detail::store_le32(rh.data() + 8, incl);
        detail::store_le32(rh.data() + 12, std::max<std::uint32_t>(original_len, incl));
        out_.write(reinterpret_cast<const char*>(rh.data()), rh.size());
        out_.write(reinterpret_cast<const char*>(frame.data()), incl);
    }

private:
    std::ostream& out_;
    std::uint32_t snaplen_;
};

/// Builds the header bytes of an Ethernet frame for `p` (IPv4 or IPv6, TCP/UDP
/// headers without options). Payload is not materialized: the IP length field
/// carries p.ip_total_bytes and the caller records the full length as
/// original_len. Checksums are left zero.
inline std::vector<std::uint8_t> encode_headers(const ParsedPacket& p) {
    std::vector<std::uint8_t> f(14, 0);
    f[0] = 0x02;
    f[6] = 0x02;
    f[11] = 0x01;
    const std::size_t l4_hdr = p.protocol == kProtoTcp ? 20 : p.protocol == kProtoUdp ? 8 : 0;
    if (p.ip_version == 4) {
        detail::store_be16(f.data() + 12, 0x0800);
        std::array<std::uint8_t, 20> ip{};
        ip[0] = 0x45;
        detail::store_be16(ip.data() + 2, static_cast<std::uint16_t>(p.ip_total_bytes));
        ip[8] = 64;
        ip[9] = p.protocol;
        std::copy_n(p.src_ip.bytes.begin(), 4, ip.begin() + 12);
        std::copy_n(p.dst_ip.bytes.begin(), 4, ip.begin() + 16);
        f.insert(f.end(), ip.begin(), ip.end());
    } else {
        detail::store_be16(f.data() + 12, 0x86DD);
        std::array<std::uint8_t, 40> ip{};
        ip[0] = 0x60;
        detail::store_be16(ip.data() + 4, static_cast<std::uint16_t>(p.ip_total_bytes - 40));
        ip[6] = p.protocol;
        ip[7] = 64;
        std::copy_n(p.src_ip.bytes.begin(), 16, ip.begin() + 8);
        std::copy_n(p.dst_ip.bytes.begin(), 16, ip.begin() + 24);
        f.insert(f.end(), ip.begin(), ip.end());
    }
    const std::size_t l4 = f.size();
    f.resize(l4 + l4_hdr, 0);
    if (l4_hdr > 0) {
        detail::store_be16(f.data() + l4, p.src_port);
        detail::store_be16(f.data() + l4 + 2, p.dst_port);
    }
    if (p.protocol == kProtoTcp) {
        f[l4 + 12] = 0x50;
        f[l4 + 13] = p.tcp_flags.raw;
    } else if (p.protocol == kProtoUdp) {
        const std::uint32_t ip_hdr = p.ip_version == 4 ? 20 : 40;
        detail::store_be16(f.data() + l4 + 4, static_cast<std::uint16_t>(p.ip_total_bytes - ip_hdr));
    }
    return f;
}

} // namespace greenflow

template <>
struct std::hash<greenflow::IpAddress> {
    std::size_t operator()(const greenflow::IpAddress& ip) const noexcept {
        std::uint64_t a = 0, b = 0;
        std::memcpy(&a, ip.bytes.data(), 8);
        std::memcpy(&b, ip.bytes.data() + 8, 8);
        return static_cast<std::size_t>(a * 0x9E3779B97F4A7C15ULL ^ (b + ip.version) * 0xC2B2AE3D27D4EB4FULL);
    }
};
