#pragma once

// Encapsulation codecs for the three tunneling schemes compared by the
// simulator:
//
//   GTP_4G        IPv4(20) | UDP(8) | GTP-U(8)            36 bytes
//   IPINIP_ICNA   CompactOuterIp(12) | IPv4 inner(20)      32 bytes
//   GRE_HANDOVER  IPv4(20) | GRE with key(8)               28 bytes
//
// All multi-byte fields are big-endian. Fields not named in the structs
// below are written as zero. The compact outer header layout is:
//
//   0..3  source address
//   4..7  destination address
//   8     protocol
//   9     reserved (0)
//   10..11 length of everything after this header
//
// With OuterHeaderMode::kStandard the ICNA outer header is a plain 20-byte
// IPv4 header instead, giving a 40-byte scheme overhead.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace corenet::wire {

enum class Scheme : std::uint8_t { kNone, kGtp4g, kIpInIpIcna, kGreHandover };

std::string_view to_string(Scheme scheme);
// Accepts NONE, GTP_4G, IPINIP_ICNA, GRE_HANDOVER. Throws kInvalidScheme.
Scheme parse_scheme(std::string_view text);

enum class IpProtocol : std::uint8_t { kUdp, kGre, kIpInIp, kOther };

std::uint8_t protocol_number(IpProtocol protocol);
IpProtocol protocol_from_number(std::uint8_t number);

enum class OuterHeaderMode : std::uint8_t { kCompact, kStandard };

struct Ipv4Header {
  static constexpr std::size_t kSize = 20;
  static constexpr std::uint8_t kVersion = 4;
  IpProtocol protocol = IpProtocol::kOther;
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  std::uint16_t total_length = 0;  // header + payload
  friend bool operator==(const Ipv4Header&, const Ipv4Header&) = default;
};

struct CompactOuterIpHeader {
  static constexpr std::size_t kSize = 12;
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  IpProtocol protocol = IpProtocol::kIpInIp;
  std::uint16_t payload_length = 0;
  friend bool operator==(const CompactOuterIpHeader&, const CompactOuterIpHeader&) = default;
};

struct UdpHeader {
  static constexpr std::size_t kSize = 8;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint16_t length = 0;  // header + payload
  std::uint16_t checksum = 0;
  friend bool operator==(const UdpHeader&, const UdpHeader&) = default;
};

struct GtpUHeader {
  static constexpr std::size_t kSize = 8;
  static constexpr std::uint8_t kFlags = 0x30;       // version 1, PT=1
  static constexpr std::uint8_t kGpdu = 0xff;
  static constexpr std::uint16_t kUdpPort = 2152;
  std::uint8_t flags = kFlags;
  std::uint8_t message_type = kGpdu;
  std::uint16_t length = 0;  // bytes following the 8-byte header
  std::uint32_t teid = 0;
  friend bool operator==(const GtpUHeader&, const GtpUHeader&) = default;
};

struct GreHeader {
  static constexpr std::size_t kSize = 8;
  static constexpr std::uint16_t kKeyPresent = 0x2000;
  static constexpr std::uint16_t kProtoIpv4 = 0x0800;
  std::uint16_t flags = kKeyPresent;
  std::uint16_t protocol_type = kProtoIpv4;
  std::uint32_t key = 0;
  friend bool operator==(const GreHeader&, const GreHeader&) = default;
};

using Header = std::variant<Ipv4Header, CompactOuterIpHeader, UdpHeader, GtpUHeader, GreHeader>;

std::size_t header_size(const Header& header);

// Addresses and identifiers a scheme needs. Which fields are required:
//   GTP_4G:       outer_src, outer_dst, teid
//   IPINIP_ICNA:  outer_src, outer_dst, inner_src, inner_dst
//   GRE_HANDOVER: outer_src, outer_dst, gre_key
//   NONE:         nothing
// Fields a scheme does not use are cleared by decapsulate.
struct Addressing {
  std::optional<std::uint32_t> outer_src;
  std::optional<std::uint32_t> outer_dst;
  std::optional<std::uint32_t> inner_src;
  std::optional<std::uint32_t> inner_dst;
  std::optional<std::uint32_t> teid;
  std::optional<std::uint32_t> gre_key;
  friend bool operator==(const Addressing&, const Addressing&) = default;
};

struct EncapsulatedFrame {
  Scheme scheme = Scheme::kNone;
  std::vector<Header> headers;  // outermost first
  std::vector<std::uint8_t> payload;

  std::size_t header_bytes() const;
  std::size_t size() const { return header_bytes() + payload.size(); }
  std::vector<std::uint8_t> encode() const;
};

struct Decapsulated {
  Scheme scheme = Scheme::kNone;
  Addressing addressing;
  std::vector<std::uint8_t> payload;
  friend bool operator==(const Decapsulated&, const Decapsulated&) = default;
};

// Largest payload any scheme can carry without overflowing a 16-bit length.
constexpr std::size_t kMaxPayload = 65535 - 40;

EncapsulatedFrame encapsulate(Scheme scheme, const Addressing& addressing,
                              std::span<const std::uint8_t> payload,
                              OuterHeaderMode outer = OuterHeaderMode::kCompact);

Decapsulated decapsulate(const EncapsulatedFrame& frame);

// Parses raw bytes that are claimed to carry `scheme`.
EncapsulatedFrame parse_frame(Scheme scheme, std::span<const std::uint8_t> bytes,
                              OuterHeaderMode outer = OuterHeaderMode::kCompact);

Decapsulated decapsulate(Scheme scheme, std::span<const std::uint8_t> bytes,
                         OuterHeaderMode outer = OuterHeaderMode::kCompact);

// Fixed per-scheme header total: 36 / 32 (40 standard) / 28 / 0.
std::size_t scheme_header_bytes(Scheme scheme, OuterHeaderMode outer = OuterHeaderMode::kCompact);

double tunneling_overhead_percent(Scheme scheme, long long payload_bytes,
                                  OuterHeaderMode outer = OuterHeaderMode::kCompact);

// A bare user IPv4 packet: 20-byte header followed by data.
struct IpPacket {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> make_ip_packet(std::uint32_t src, std::uint32_t dst,
                                         std::span<const std::uint8_t> payload);
IpPacket parse_ip_packet(std::span<const std::uint8_t> bytes);

std::string to_hex(std::span<const std::uint8_t> bytes);

// Deterministic reference frames, one `<scheme> <hex>` line each.
std::vector<std::string> golden_vectors(OuterHeaderMode outer = OuterHeaderMode::kCompact);

}  // namespace corenet::wire
