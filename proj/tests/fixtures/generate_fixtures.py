#!/usr/bin/env python3
"""Regenerates the capture fixtures and their reference outputs.

Captures are written with scapy; reference outputs come from scapy's reader
(per-record timestamps) and NFStream (per-flow counters), both independent of
the C++ code under test.  Requires: pip install scapy nfstream
"""
import os
import random
from decimal import Decimal
import sys

from scapy.all import Ether, Dot1Q, IP, IPv6, TCP, UDP, ICMP, ARP, Raw, wrpcap, rdpcap
from scapy.utils import PcapWriter

HERE = os.path.dirname(os.path.abspath(__file__))
BASE = 1_600_000_000  # epoch seconds


def at(pkt, ms):
    pkt.time = BASE + ms / 1000.0
    return pkt


def eth():
    return Ether(src="02:00:00:00:00:01", dst="02:00:00:00:00:02")


def tcp4(src, dst, sport, dport, flags, payload, ms, vlan=False):
    l2 = eth() / Dot1Q(vlan=7) if vlan else eth()
    p = l2 / IP(src=src, dst=dst) / TCP(sport=sport, dport=dport, flags=flags, options=[])
    if payload:
        p = p / Raw(b"\x00" * payload)
    return at(p, ms)


def udp4(src, dst, sport, dport, payload, ms):
    p = eth() / IP(src=src, dst=dst) / UDP(sport=sport, dport=dport) / Raw(b"\x00" * payload)
    return at(p, ms)


def golden():
    c, s = "192.168.1.10", "93.184.216.34"
    d = "8.8.8.8"
    pkts = [
        tcp4(c, s, 40000, 80, "S", 0, 0),
        tcp4(s, c, 80, 40000, "SA", 0, 10),
        tcp4(c, s, 40000, 80, "A", 0, 20),
        udp4(c, d, 5353, 53, 32, 30),
        udp4(d, c, 53, 5353, 92, 45),
        tcp4(c, s, 40000, 80, "PA", 100, 50),
        tcp4(s, c, 80, 40000, "PA", 500, 80),
        tcp4(c, s, 40000, 80, "FA", 0, 90),
        tcp4(s, c, 80, 40000, "FA", 0, 100),
        tcp4(c, s, 40000, 80, "A", 0, 110),
        udp4(c, d, 5353, 53, 32, 200),
        tcp4("10.0.0.5", "10.0.0.6", 1234, 23, "SEC", 0, 300, vlan=True),
    ]
    wrpcap(os.path.join(HERE, "golden_12.pcap"), pkts)


def reader_reference():
    """Three frames, microsecond and nanosecond variants, plus the reference dump."""
    pkts = [
        tcp4("10.1.0.1", "10.1.0.2", 1111, 80, "S", 0, 0),
        at(eth() / ARP(psrc="10.1.0.1", pdst="10.1.0.2"), 0.5),
        udp4("10.1.0.1", "10.1.0.3", 2222, 53, 10, 1.25),
    ]
    pkts[0].time = Decimal(BASE) + Decimal("0.123456789")
    pkts[1].time = Decimal(BASE) + Decimal("1.000001")
    pkts[2].time = Decimal(BASE) + Decimal("2.250000500")
    wrpcap(os.path.join(HERE, "reader_3_us.pcap"), pkts)
    w = PcapWriter(os.path.join(HERE, "reader_3_ns.pcap"), nano=True)
    for p in pkts:
        w.write(p)
    w.close()
    with open(os.path.join(HERE, "reader_3_ref.tsv"), "w") as out:
        out.write("# file\tindex\tts_ns\tcaptured_len\n")
        for name in ("reader_3_us.pcap", "reader_3_ns.pcap"):
            for i, p in enumerate(rdpcap(os.path.join(HERE, name))):
                ts_ns = int(Decimal(p.time) * 1_000_000_000)
                out.write(f"{name}\t{i}\t{ts_ns}\t{len(bytes(p))}\n")


def flow_reference():
    """Random multi-flow capture compared against NFStream's flow counters."""
    rng = random.Random(20240601)
    hosts = [f"172.16.0.{i}" for i in range(1, 9)]
    servers = [f"198.51.100.{i}" for i in range(1, 5)]
    pkts = []
    t = 0.0
    for conv in range(40):
        h, sv = rng.choice(hosts), rng.choice(servers)
        sport = rng.randint(20000, 60000)
        dport = rng.choice([80, 443, 53, 8080, 23])
        udp = rng.random() < 0.3
        start = t + rng.uniform(0, 2000)
        n = rng.randint(1, 12)
        ts = start
        for k in range(n):
            fwd = (k % 2 == 0) or rng.random() < 0.3
            src, dst = (h, sv) if fwd else (sv, h)
            sp, dp = (sport, dport) if fwd else (dport, sport)
            size = rng.randint(0, 400)
            if udp:
                p = eth() / IP(src=src, dst=dst) / UDP(sport=sp, dport=dp) / Raw(b"\x00" * size)
            else:
                flags = "S" if k == 0 else rng.choice(["A", "PA", "FA", "R"])
                p = eth() / IP(src=src, dst=dst) / TCP(sport=sp, dport=dp, flags=flags, options=[])
                if size:
                    p = p / Raw(b"\x00" * size)
            pkts.append(at(p, ts))
            ts += rng.randint(1, 500)
        t += rng.uniform(0, 500)
    pkts.append(at(eth() / IP(src="172.16.0.1", dst="198.51.100.1") / ICMP(), 1234))
    pkts.append(at(eth() / IPv6(src="2001:db8::1", dst="2001:db8::2") / UDP(sport=5000, dport=6000) / Raw(b"\x00" * 20), 1500))
    pkts.sort(key=lambda p: p.time)
    path = os.path.join(HERE, "flows_ref.pcap")
    wrpcap(path, pkts)

    from nfstream import NFStreamer
    df = NFStreamer(source=path, accounting_mode=1, statistical_analysis=True,
                    n_dissections=0, idle_timeout=120, active_timeout=1800).to_pandas()
    cols = ["src_ip", "src_port", "dst_ip", "dst_port", "protocol",
            "bidirectional_packets", "bidirectional_bytes",
            "src2dst_packets", "src2dst_bytes", "dst2src_packets", "dst2src_bytes",
            "bidirectional_duration_ms", "bidirectional_min_ps", "bidirectional_max_ps",
            "bidirectional_syn_packets", "bidirectional_ack_packets", "bidirectional_rst_packets",
            "bidirectional_fin_packets", "bidirectional_psh_packets"]
    df = df[cols].sort_values(["src_ip", "src_port", "dst_ip", "dst_port", "protocol"])
    df.to_csv(os.path.join(HERE, "flows_ref_nfstream.tsv"), sep="\t", index=False)


if __name__ == "__main__":
    golden()
    reader_reference()
    flow_reference()
    print("fixtures written to", HERE, file=sys.stderr)
