#pragma once

// Seeded generator of IoT-like traffic with ground-truth labels.
//
// Benign devices run TCP sessions, DNS and NTP lookups, and some connection
// attempts that fail (SYN answered by RST, or unanswered SYNs). Port scans
// are drawn from exactly the same failed-connection model, so they overlap
// benign traffic in feature space. C&C is a periodic heartbeat over one long
// TCP connection; DoS is a one-directional flood.
//
// All timestamps are whole microseconds so a capture written to disk and
// read back yields the same flows as the in-memory packets.

#include <algorithm>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "greenflow/capture.hpp"
#include "greenflow/features.hpp"
#include "greenflow/flowmeter.hpp"
#include "greenflow/random.hpp"

namespace greenflow {

struct SyntheticConfig {
    std::size_t sessions = 6000;
    std::uint64_t seed = 1;
    double duration_s = 3600.0;
    std::int64_t start_epoch_s = 1'600'000'000;
    int devices = 16;
    // Mixture weights; normalized internally.
    double benign = 0.35;
    double port_scan = 0.40;
    double command_and_control = 0.05;
    double dos = 0.20;
    /// Sessions whose label record is withheld (become unmatched flows).
    std::size_t unlabeled = 0;
    /// Sessions given a second, disagreeing label record.
    std::size_t conflicting = 0;
    int dos_max_packets = 200;
};

struct SyntheticTraffic {
    std::vector<ParsedPacket> packets; // sorted by timestamp
    std::vector<LabelRecord> labels;
};

namespace detail {

class TrafficBuilder {
public:
    explicit TrafficBuilder(const SyntheticConfig& cfg) : cfg_(cfg), rng_(derive_seed(cfg.seed, "synthetic")) {
        for (int d = 0; d < cfg.devices; ++d) {
            next_port_.push_back(static_cast<std::uint16_t>(20000 + rng_.index(20000)));
        }
    }

    SyntheticTraffic build() {
        const double total = cfg_.benign + cfg_.port_scan + cfg_.command_and_control + cfg_.dos;
        if (!(total > 0.0) || cfg_.devices < 1 || cfg_.devices > 250) {
            fail(ErrorCode::InvalidArgument, "synthetic: bad mixture or device count");
        }
        for (std::size_t s = 0; s < cfg_.sessions; ++s) {
            const double u = rng_.unit() * total;
            const TimeNs t0 = epoch_ns() + us(rng_.unit() * cfg_.duration_s * 1e6);
            const IpAddress dev = device(static_cast<int>(rng_.index(static_cast<std::uint64_t>(cfg_.devices))));
            const std::size_t first = out_.packets.size();
            select_device(dev);
            std::string detailed;
            TrafficClass cls = TrafficClass::Malicious;
            if (u < cfg_.benign) {
                cls = TrafficClass::Benign;
                detailed = "-";
                benign_session(dev, t0);
            } else if (u < cfg_.benign + cfg_.port_scan) {
                detailed = pick({"IRCBOT", "Kenjiro", "Mirai", "Hajime", "Hide&Seek", "Muhstik"}) +
                           "/PartOfAHorizontalPortScan";
                scan_or_fail(dev, t0);
            } else if (u < cfg_.benign + cfg_.port_scan + cfg_.command_and_control) {
                detailed = pick({"Mirai", "Hakai"}) + "/C&C-HeartBeat";
                command_and_control(dev, t0);
            } else {
                detailed = pick({"Kenjiro", "Mirai", "Muhstik"}) + "/DDoS";
                dos(dev, t0);
            }
            const ParsedPacket& p = out_.packets[first];
            LabelRecord rec{p.ts, p.src_ip, p.dst_ip, p.src_port, p.dst_port, cls, detailed};
            if (s < cfg_.unlabeled) {
                continue;
            }
            out_.labels.push_back(rec);
            if (s < cfg_.unlabeled + cfg_.conflicting) {
                rec.label = TrafficClass::Malicious;
                rec.detailed_label = rec.detailed_label.starts_with("Kenjiro") ? "Mirai/C&C" : "Kenjiro/C&C";
                out_.labels.push_back(rec);
            }
        }
        std::stable_sort(out_.packets.begin(), out_.packets.end(),
                         [](const ParsedPacket& a, const ParsedPacket& b) { return a.ts < b.ts; });
        return std::move(out_);
    }

private:
    static constexpr std::uint8_t S = 1u << static_cast<int>(TcpFlag::Syn);
    static constexpr std::uint8_t A = 1u << static_cast<int>(TcpFlag::Ack);
    static constexpr std::uint8_t F = 1u << static_cast<int>(TcpFlag::Fin);
    static constexpr std::uint8_t R = 1u << static_cast<int>(TcpFlag::Rst);
    static constexpr std::uint8_t P = 1u << static_cast<int>(TcpFlag::Psh);

    TimeNs epoch_ns() const { return cfg_.start_epoch_s * 1'000'000'000; }
    static TimeNs us(double micros) { return static_cast<TimeNs>(micros) * 1000; }
    TimeNs ms(double m) { return us(m * 1000.0); }

    static IpAddress device(int i) { return IpAddress::v4(192, 168, 1, static_cast<std::uint8_t>(10 + i)); }

    IpAddress public_ip() {
        const auto a = static_cast<std::uint8_t>(11 + rng_.index(180));
        const auto b = static_cast<std::uint8_t>(rng_.index(256));
        const auto c = static_cast<std::uint8_t>(rng_.index(256));
        const auto d = static_cast<std::uint8_t>(1 + rng_.index(254));
        return IpAddress::v4(a, b, c, d);
    }

    std::uint16_t port() {
        // Ephemeral ports advance per device so five-tuples never repeat.
        auto& p = next_port_[static_cast<std::size_t>(port_owner_)];
        p = static_cast<std::uint16_t>(p >= 60000 ? 20000 : p + 1);
        return p;
    }

    std::string pick(std::initializer_list<const char*> names) {
        return *(names.begin() + rng_.index(names.size()));
    }

    std::uint16_t pick_port(std::initializer_list<int> ports) {
        return static_cast<std::uint16_t>(*(ports.begin() + rng_.index(ports.size())));
    }

    void emit(TimeNs ts, const IpAddress& src, std::uint16_t sport, const IpAddress& dst, std::uint16_t dport,
              std::uint8_t proto, std::uint32_t size, std::uint8_t flags = 0) {
        ParsedPacket p;
        p.ts = ts;
        p.src_ip = src;
        p.dst_ip = dst;
        p.src_port = sport;
        p.dst_port = dport;
        p.protocol = proto;
        p.ip_version = 4;
        p.ip_total_bytes = size;
        p.tcp_flags = TcpFlags{flags};
        out_.packets.push_back(p);
    }

    void select_device(const IpAddress& dev) { port_owner_ = dev.bytes[3] - 10; }

    void benign_session(const IpAddress& dev, TimeNs t0) {
        const double u = rng_.unit();
        if (u < 0.40) {
            tcp_session(dev, t0);
        } else if (u < 0.65) {
            dns(dev, t0);
        } else if (u < 0.70) {
            const IpAddress srv = IpAddress::v4(162, 159, 200, static_cast<std::uint8_t>(1 + rng_.index(8)));
            const std::uint16_t sp = port();
            emit(t0, dev, sp, srv, 123, kProtoUdp, 76);
            emit(t0 + ms(5 + rng_.exponential(20)), srv, 123, dev, sp, kProtoUdp, 76);
        } else {
            scan_or_fail(dev, t0);
        }
    }

    void scan_or_fail(const IpAddress& dev, TimeNs t0) {
        const IpAddress dst = public_ip();
        const std::uint16_t sp = port();
        const std::uint16_t dp = pick_port({23, 22, 80, 8080, 2323, 37215});
        failed_connection(dev, dst, sp, dp, t0);
    }

    /// SYN answered by RST, a lone SYN, or a SYN retried with backoff.
    void failed_connection(const IpAddress& src, const IpAddress& dst, std::uint16_t sport, std::uint16_t dport,
                           TimeNs t0) {
        const double u = rng_.unit();
        const double v = rng_.unit();
        const std::uint32_t syn = v < 0.6 ? 60 : v < 0.85 ? 44 : 40;
        emit(t0, src, sport, dst, dport, kProtoTcp, syn, S);
        if (u < 0.5) {
            emit(t0 + ms(1 + rng_.uniform(0, 120)), dst, dport, src, sport, kProtoTcp, 40, R | A);
        } else if (u > 0.8) {
            const int retries = 1 + static_cast<int>(rng_.index(2));
            TimeNs t = t0;
            for (int r = 0; r < retries; ++r) {
                t += ms(1000.0 * (1 << r) + rng_.uniform(0, 50));
                emit(t, src, sport, dst, dport, kProtoTcp, syn, S);
            }
        }
    }

    void tcp_session(const IpAddress& dev, TimeNs t0) {
        const IpAddress srv = public_ip();
        const std::uint16_t sp = port();
        const std::uint16_t dp = pick_port({80, 443, 443, 8883, 1883});
        const double rtt = 2 + rng_.exponential(30);
        const double gap = 2 + rng_.uniform(0, 100);
        TimeNs t = t0;
        emit(t, dev, sp, srv, dp, kProtoTcp, 60, S);
        emit(t += ms(rtt), srv, dp, dev, sp, kProtoTcp, 60, S | A);
        emit(t += ms(0.2), dev, sp, srv, dp, kProtoTcp, 52, A);
        const int exchanges = 1 + static_cast<int>(rng_.index(12));
        for (int e = 0; e < exchanges; ++e) {
            t += ms(rng_.exponential(gap));
            emit(t, dev, sp, srv, dp, kProtoTcp, static_cast<std::uint32_t>(80 + rng_.index(520)), P | A);
            const int segments = 1 + static_cast<int>(rng_.index(4));
            for (int k = 0; k < segments; ++k) {
                t += ms(k == 0 ? rtt : rng_.uniform(0.05, 2));
                emit(t, srv, dp, dev, sp, kProtoTcp, static_cast<std::uint32_t>(200 + rng_.index(1300)), P | A);
            }
            emit(t += ms(0.3), dev, sp, srv, dp, kProtoTcp, 52, A);
        }
        emit(t += ms(rng_.exponential(gap)), dev, sp, srv, dp, kProtoTcp, 52, F | A);
        emit(t += ms(rtt), srv, dp, dev, sp, kProtoTcp, 52, F | A);
        emit(t += ms(0.2), dev, sp, srv, dp, kProtoTcp, 52, A);
    }

    void dns(const IpAddress& dev, TimeNs t0) {
        const IpAddress srv = rng_.bernoulli(0.5) ? IpAddress::v4(8, 8, 8, 8) : IpAddress::v4(1, 1, 1, 1);
        const std::uint16_t sp = port();
        const auto q = static_cast<std::uint32_t>(60 + rng_.index(30));
        TimeNs t = t0;
        emit(t, dev, sp, srv, 53, kProtoUdp, q);
        if (rng_.bernoulli(0.1)) {
            emit(t += ms(1000 + rng_.uniform(0, 20)), dev, sp, srv, 53, kProtoUdp, q);
        }
        t += ms(1 + rng_.exponential(15));
        emit(t, srv, 53, dev, sp, kProtoUdp, q + static_cast<std::uint32_t>(16 + rng_.index(200)));
    }

    void command_and_control(const IpAddress& dev, TimeNs t0) {
        const IpAddress srv = public_ip();
        const std::uint16_t sp = port();
        const std::uint16_t dp = pick_port({6667, 23, 443});
        const double period_ms = 1000.0 * rng_.uniform(20, 60);
        const double rtt = 20 + rng_.exponential(60);
        TimeNs t = t0;
        emit(t, dev, sp, srv, dp, kProtoTcp, 60, S);
        emit(t += ms(rtt), srv, dp, dev, sp, kProtoTcp, 60, S | A);
        emit(t += ms(0.2), dev, sp, srv, dp, kProtoTcp, 52, A);
        const int beats = 5 + static_cast<int>(rng_.index(16));
        for (int b = 0; b < beats; ++b) {
            t += ms(period_ms + rng_.uniform(-500, 500));
            emit(t, dev, sp, srv, dp, kProtoTcp, static_cast<std::uint32_t>(60 + rng_.index(60)), P | A);
            emit(t += ms(rtt), srv, dp, dev, sp, kProtoTcp, static_cast<std::uint32_t>(60 + rng_.index(60)), P | A);
            emit(t += ms(0.2), dev, sp, srv, dp, kProtoTcp, 52, A);
        }
    }

    void dos(const IpAddress& dev, TimeNs t0) {
        const IpAddress victim = public_ip();
        const std::uint16_t sp = port();
        const int n = 20 + static_cast<int>(rng_.index(static_cast<std::uint64_t>(std::max(1, cfg_.dos_max_packets - 19))));
        const bool udp = rng_.bernoulli(0.6);
        const auto size = udp ? static_cast<std::uint32_t>(60 + rng_.index(1340)) : 40u;
        const std::uint16_t dp = udp ? pick_port({53, 80, 123, 1900}) : pick_port({80, 443, 22});
        const double gap = rng_.uniform(0.05, 2.0);
        TimeNs t = t0;
        for (int k = 0; k < n; ++k) {
            emit(t, dev, sp, victim, dp, udp ? kProtoUdp : kProtoTcp, size, udp ? 0 : S);
            t += ms(rng_.exponential(gap)) + 1000;
        }
    }

    const SyntheticConfig& cfg_;
    Rng rng_;
    std::vector<std::uint16_t> next_port_;
    int port_owner_ = 0;
    SyntheticTraffic out_;
};

} // namespace detail

inline SyntheticTraffic generate_traffic(const SyntheticConfig& cfg) { return detail::TrafficBuilder(cfg).build(); }

/// pcap (µs timestamps, Ethernet, header-only frames with full original length).
inline void write_capture(std::ostream& out, const std::vector<ParsedPacket>& packets) {
    CaptureWriter w(out);
    for (const auto& p : packets) {
        const auto frame = encode_headers(p);
        w.write(p.ts, frame, static_cast<std::uint32_t>(14 + p.ip_total_bytes));
    }
}

/// Tab-separated: ts  src_ip  src_port  dst_ip  dst_port  label  detailed_label.
inline void write_label_file(std::ostream& out, const std::vector<LabelRecord>& labels) {
    out << "# ts\tsrc_ip\tsrc_port\tdst_ip\tdst_port\tlabel\tdetailed_label\n";
    char ts[48];
    for (const auto& r : labels) {
        std::snprintf(ts, sizeof ts, "%" PRId64 ".%06" PRId64, r.ts / 1'000'000'000, (r.ts % 1'000'000'000) / 1000);
        out << ts << '\t' << r.src_ip.to_string() << '\t' << r.src_port << '\t' << r.dst_ip.to_string() << '\t'
            << r.dst_port << '\t' << (r.label == TrafficClass::Benign ? "benign" : "malicious") << '\t'
            << r.detailed_label << '\n';
    }
}

/// Packets → flows → labeled samples, all in memory.
inline std::vector<LabeledSample> synthetic_samples(const SyntheticConfig& cfg) {
    const SyntheticTraffic traffic = generate_traffic(cfg);
    FlowMeter meter;
    for (const auto& p : traffic.packets) {
        meter.ingest(p);
    }
    auto joined = join_labels(meter.flush(), traffic.labels, 1000);
    std::vector<LabeledSample> out;
    out.reserve(joined.labeled.size());
    for (const auto& f : joined.labeled) {
        out.push_back(make_sample(f));
    }
    return out;
}

} // namespace greenflow
