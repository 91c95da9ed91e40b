#include "corenet/wire_codecs.hpp"

#include <array>
#include <cstdio>

#include "corenet/error.hpp"

namespace corenet::wire {
namespace {

constexpr std::uint8_t kIpv4VersionIhl = 0x45;

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  put16(out, static_cast<std::uint16_t>(v >> 16));
  put16(out, static_cast<std::uint16_t>(v));
}

std::uint16_t get16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

std::uint32_t get32(std::span<const std::uint8_t> b, std::size_t at) {
  return (static_cast<std::uint32_t>(get16(b, at)) << 16) | get16(b, at + 2);
}

struct Encoder {
  std::vector<std::uint8_t>& out;

  void operator()(const Ipv4Header& h) const {
    out.push_back(kIpv4VersionIhl);
    out.push_back(0);  // tos
    put16(out, h.total_length);
    put32(out, 0);     // id, flags, fragment offset
    out.push_back(0);  // ttl
    out.push_back(protocol_number(h.protocol));
    put16(out, 0);     // checksum
    put32(out, h.src);
    put32(out, h.dst);
  }
  void operator()(const CompactOuterIpHeader& h) const {
    put32(out, h.src);
    put32(out, h.dst);
    out.push_back(protocol_number(h.protocol));
    out.push_back(0);
    put16(out, h.payload_length);
  }
  void operator()(const UdpHeader& h) const {
    put16(out, h.src_port);
    put16(out, h.dst_port);
    put16(out, h.length);
    put16(out, h.checksum);
  }
  void operator()(const GtpUHeader& h) const {
    out.push_back(h.flags);
    out.push_back(h.message_type);
    put16(out, h.length);
    put32(out, h.teid);
  }
  void operator()(const GreHeader& h) const {
    put16(out, h.flags);
    put16(out, h.protocol_type);
    put32(out, h.key);
  }
};

// Cursor over a byte span that reports truncation as a malformed frame.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::kMalformedFrame, std::string("truncated ") + what);
    }
    auto view = bytes_.subspan(pos_, n);
    pos_ += n;
    return view;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

Ipv4Header read_ipv4(Reader& r, std::size_t remaining_with_header) {
  auto b = r.take(Ipv4Header::kSize, "IPv4 header");
  if (b[0] != kIpv4VersionIhl) throw Error(ErrorCode::kMalformedFrame, "IPv4 version/IHL");
  Ipv4Header h;
  h.total_length = get16(b, 2);
  h.protocol = protocol_from_number(b[9]);
  h.src = get32(b, 12);
  h.dst = get32(b, 16);
  if (h.total_length != remaining_with_header) {
    throw Error(ErrorCode::kMalformedFrame, "IPv4 total length disagrees with frame size");
  }
  return h;
}

CompactOuterIpHeader read_compact(Reader& r, std::size_t remaining_with_header) {
  auto b = r.take(CompactOuterIpHeader::kSize, "compact outer header");
  CompactOuterIpHeader h;
  h.src = get32(b, 0);
  h.dst = get32(b, 4);
  h.protocol = protocol_from_number(b[8]);
  h.payload_length = get16(b, 10);
  if (h.payload_length + CompactOuterIpHeader::kSize != remaining_with_header) {
    throw Error(ErrorCode::kMalformedFrame, "compact header length disagrees with frame size");
  }
  return h;
}

void require(bool ok, ErrorCode code, const char* what) {
  if (!ok) throw Error(code, what);
}

std::uint16_t checked_length(std::size_t n) {
  if (n > 0xffff) throw Error(ErrorCode::kDomain, "payload too large for a 16-bit length field");
  return static_cast<std::uint16_t>(n);
}

template <class T>
const T* header_as(const EncapsulatedFrame& frame, std::size_t i) {
  if (i >= frame.headers.size()) return nullptr;
  return std::get_if<T>(&frame.headers[i]);
}

}  // namespace

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kNone: return "NONE";
    case Scheme::kGtp4g: return "GTP_4G";
    case Scheme::kIpInIpIcna: return "IPINIP_ICNA";
    case Scheme::kGreHandover: return "GRE_HANDOVER";
  }
  return "INVALID";
}

Scheme parse_scheme(std::string_view text) {
  for (auto s : {Scheme::kNone, Scheme::kGtp4g, Scheme::kIpInIpIcna, Scheme::kGreHandover}) {
    if (text == to_string(s)) return s;
  }
  throw Error(ErrorCode::kInvalidScheme, std::string(text));
}

std::uint8_t protocol_number(IpProtocol protocol) {
  switch (protocol) {
    case IpProtocol::kUdp: return 17;
    case IpProtocol::kGre: return 47;
    case IpProtocol::kIpInIp: return 4;
    case IpProtocol::kOther: return 255;
  }
  return 255;
}

IpProtocol protocol_from_number(std::uint8_t number) {
  switch (number) {
    case 17: return IpProtocol::kUdp;
    case 47: return IpProtocol::kGre;
    case 4: return IpProtocol::kIpInIp;
    default: return IpProtocol::kOther;
  }
}

std::size_t header_size(const Header& header) {
  return std::visit([](const auto& h) { return std::decay_t<decltype(h)>::kSize; }, header);
}

std::size_t EncapsulatedFrame::header_bytes() const {
  std::size_t n = 0;
  for (const auto& h : headers) n += header_size(h);
  return n;
}

std::vector<std::uint8_t> EncapsulatedFrame::encode() const {
  std::vector<std::uint8_t> out;
  out.reserve(size());
  for (const auto& h : headers) std::visit(Encoder{out}, h);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

std::size_t scheme_header_bytes(Scheme scheme, OuterHeaderMode outer) {
  switch (scheme) {
    case Scheme::kNone: return 0;
    case Scheme::kGtp4g: return Ipv4Header::kSize + UdpHeader::kSize + GtpUHeader::kSize;
    case Scheme::kIpInIpIcna:
      return (outer == OuterHeaderMode::kCompact ? CompactOuterIpHeader::kSize : Ipv4Header::kSize) +
             Ipv4Header::kSize;
    case Scheme::kGreHandover: return Ipv4Header::kSize + GreHeader::kSize;
  }
  throw Error(ErrorCode::kInvalidScheme, "unknown scheme value");
}

EncapsulatedFrame encapsulate(Scheme scheme, const Addressing& a, std::span<const std::uint8_t> payload,
                              OuterHeaderMode outer) {
  if (payload.size() > kMaxPayload) throw Error(ErrorCode::kDomain, "payload exceeds maximum frame size");
  auto need = [](const std::optional<std::uint32_t>& field, const char* name) {
    if (!field) throw Error(ErrorCode::kIncompleteAddressing, name);
    return *field;
  };

  EncapsulatedFrame frame;
  frame.scheme = scheme;
  frame.payload.assign(payload.begin(), payload.end());
  const std::size_t n = payload.size();

  switch (scheme) {
    case Scheme::kNone:
      break;
    case Scheme::kGtp4g: {
      Ipv4Header ip{IpProtocol::kUdp, need(a.outer_src, "outer_src"), need(a.outer_dst, "outer_dst"),
                    checked_length(n + 36)};
      UdpHeader udp{GtpUHeader::kUdpPort, GtpUHeader::kUdpPort, checked_length(n + 16), 0};
      GtpUHeader gtp;
      gtp.teid = need(a.teid, "teid");
      gtp.length = checked_length(n);
      frame.headers = {ip, udp, gtp};
      break;
    }
    case Scheme::kIpInIpIcna: {
      const auto osrc = need(a.outer_src, "outer_src");
      const auto odst = need(a.outer_dst, "outer_dst");
      Ipv4Header inner{IpProtocol::kOther, need(a.inner_src, "inner_src"), need(a.inner_dst, "inner_dst"),
                       checked_length(n + Ipv4Header::kSize)};
      if (outer == OuterHeaderMode::kCompact) {
        frame.headers = {CompactOuterIpHeader{osrc, odst, IpProtocol::kIpInIp, checked_length(n + 20)}, inner};
      } else {
        frame.headers = {Ipv4Header{IpProtocol::kIpInIp, osrc, odst, checked_length(n + 40)}, inner};
      }
      break;
    }
    case Scheme::kGreHandover: {
      Ipv4Header ip{IpProtocol::kGre, need(a.outer_src, "outer_src"), need(a.outer_dst, "outer_dst"),
                    checked_length(n + 28)};
      GreHeader gre;
      gre.key = need(a.gre_key, "gre_key");
      frame.headers = {ip, gre};
      break;
    }
    default:
      throw Error(ErrorCode::kInvalidScheme, "unknown scheme value");
  }
  return frame;
}

Decapsulated decapsulate(const EncapsulatedFrame& frame) {
  Decapsulated out;
  out.scheme = frame.scheme;
  out.payload = frame.payload;
  auto mismatch = [&] {
    return Error(ErrorCode::kSchemeMismatch,
                 std::string("header order does not match ") + std::string(to_string(frame.scheme)));
  };

  switch (frame.scheme) {
    case Scheme::kNone:
      if (!frame.headers.empty()) throw mismatch();
      break;
    case Scheme::kGtp4g: {
      const auto* ip = header_as<Ipv4Header>(frame, 0);
      const auto* udp = header_as<UdpHeader>(frame, 1);
      const auto* gtp = header_as<GtpUHeader>(frame, 2);
      if (!ip || !udp || !gtp || frame.headers.size() != 3) throw mismatch();
      out.addressing.outer_src = ip->src;
      out.addressing.outer_dst = ip->dst;
      out.addressing.teid = gtp->teid;
      break;
    }
    case Scheme::kIpInIpIcna: {
      std::uint32_t osrc = 0, odst = 0;
      if (const auto* c = header_as<CompactOuterIpHeader>(frame, 0)) {
        osrc = c->src;
        odst = c->dst;
      } else if (const auto* o = header_as<Ipv4Header>(frame, 0); o && o->protocol == IpProtocol::kIpInIp) {
        osrc = o->src;
        odst = o->dst;
      } else {
        throw mismatch();
      }
      const auto* inner = header_as<Ipv4Header>(frame, 1);
      if (!inner || frame.headers.size() != 2) throw mismatch();
      out.addressing.outer_src = osrc;
      out.addressing.outer_dst = odst;
      out.addressing.inner_src = inner->src;
      out.addressing.inner_dst = inner->dst;
      break;
    }
    case Scheme::kGreHandover: {
      const auto* ip = header_as<Ipv4Header>(frame, 0);
      const auto* gre = header_as<GreHeader>(frame, 1);
      if (!ip || !gre || frame.headers.size() != 2) throw mismatch();
      out.addressing.outer_src = ip->src;
      out.addressing.outer_dst = ip->dst;
      out.addressing.gre_key = gre->key;
      break;
    }
    default:
      throw Error(ErrorCode::kInvalidScheme, "unknown scheme value");
  }
  return out;
}

EncapsulatedFrame parse_frame(Scheme scheme, std::span<const std::uint8_t> bytes, OuterHeaderMode outer) {
  const std::size_t minimum = scheme_header_bytes(scheme, outer);
  if (bytes.size() < minimum) {
    throw Error(ErrorCode::kMalformedFrame, std::to_string(bytes.size()) + " bytes, " +
                                                std::string(to_string(scheme)) + " needs at least " +
                                                std::to_string(minimum));
  }
  Reader r(bytes);
  EncapsulatedFrame frame;
  frame.scheme = scheme;

  switch (scheme) {
    case Scheme::kNone:
      break;
    case Scheme::kGtp4g: {
      auto ip = read_ipv4(r, r.remaining());
      require(ip.protocol == IpProtocol::kUdp, ErrorCode::kSchemeMismatch, "outer IPv4 does not carry UDP");
      const std::size_t after_ip = r.remaining();
      auto ub = r.take(UdpHeader::kSize, "UDP header");
      UdpHeader udp{get16(ub, 0), get16(ub, 2), get16(ub, 4), get16(ub, 6)};
      require(udp.length == after_ip, ErrorCode::kMalformedFrame, "UDP length disagrees with frame size");
      require(udp.dst_port == GtpUHeader::kUdpPort, ErrorCode::kSchemeMismatch, "UDP port is not GTP-U");
      auto gb = r.take(GtpUHeader::kSize, "GTP-U header");
      GtpUHeader gtp;
      gtp.flags = gb[0];
      gtp.message_type = gb[1];
      gtp.length = get16(gb, 2);
      gtp.teid = get32(gb, 4);
      require((gtp.flags & 0xf0) == GtpUHeader::kFlags, ErrorCode::kSchemeMismatch, "not a GTPv1-U header");
      require(gtp.length == r.remaining(), ErrorCode::kMalformedFrame, "GTP length disagrees with frame size");
      frame.headers = {ip, udp, gtp};
      break;
    }
    case Scheme::kIpInIpIcna: {
      const std::size_t total = r.remaining();
      if (outer == OuterHeaderMode::kCompact) {
        auto c = read_compact(r, total);
        require(c.protocol == IpProtocol::kIpInIp, ErrorCode::kSchemeMismatch, "outer header does not carry IP");
        frame.headers.emplace_back(c);
      } else {
        auto o = read_ipv4(r, total);
        require(o.protocol == IpProtocol::kIpInIp, ErrorCode::kSchemeMismatch, "outer header does not carry IP");
        frame.headers.emplace_back(o);
      }
      frame.headers.emplace_back(read_ipv4(r, r.remaining()));
      break;
    }
    case Scheme::kGreHandover: {
      auto ip = read_ipv4(r, r.remaining());
      require(ip.protocol == IpProtocol::kGre, ErrorCode::kSchemeMismatch, "outer IPv4 does not carry GRE");
      auto gb = r.take(GreHeader::kSize, "GRE header");
      GreHeader gre;
      gre.flags = get16(gb, 0);
      gre.protocol_type = get16(gb, 2);
      gre.key = get32(gb, 4);
      require(gre.flags == GreHeader::kKeyPresent, ErrorCode::kMalformedFrame, "GRE key-present flag not set");
      frame.headers = {ip, gre};
      break;
    }
    default:
      throw Error(ErrorCode::kInvalidScheme, "unknown scheme value");
  }
  auto rest = r.rest();
  frame.payload.assign(rest.begin(), rest.end());
  return frame;
}

Decapsulated decapsulate(Scheme scheme, std::span<const std::uint8_t> bytes, OuterHeaderMode outer) {
  return decapsulate(parse_frame(scheme, bytes, outer));
}

double tunneling_overhead_percent(Scheme scheme, long long payload_bytes, OuterHeaderMode outer) {
  if (payload_bytes < 0) throw Error(ErrorCode::kDomain, "negative payload size");
  const double header = static_cast<double>(scheme_header_bytes(scheme, outer));
  if (header == 0.0) return 0.0;
  return header / (header + static_cast<double>(payload_bytes)) * 100.0;
}

std::vector<std::uint8_t> make_ip_packet(std::uint32_t src, std::uint32_t dst,
                                         std::span<const std::uint8_t> payload) {
  EncapsulatedFrame f;
  f.headers = {Ipv4Header{IpProtocol::kOther, src, dst, checked_length(payload.size() + Ipv4Header::kSize)}};
  f.payload.assign(payload.begin(), payload.end());
  return f.encode();
}

IpPacket parse_ip_packet(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto h = read_ipv4(r, bytes.size());
  auto rest = r.rest();
  return IpPacket{h.src, h.dst, {rest.begin(), rest.end()}};
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

std::vector<std::string> golden_vectors(OuterHeaderMode outer) {
  // 10.0.0.1 -> 10.0.0.2 inner, 192.168.0.1 -> 192.168.0.2 outer.
  constexpr std::uint32_t kInnerA = 0x0a000001, kInnerB = 0x0a000002;
  constexpr std::uint32_t kOuterA = 0xc0a80001, kOuterB = 0xc0a80002;

  std::vector<std::uint8_t> counting(16);
  for (std::size_t i = 0; i < counting.size(); ++i) counting[i] = static_cast<std::uint8_t>(i);
  const std::vector<std::uint8_t> empty;

  struct Case {
    Scheme scheme;
    Addressing addressing;
    const std::vector<std::uint8_t>* payload;
  };
  const std::array cases{
      Case{Scheme::kNone, {}, &counting},
      Case{Scheme::kGtp4g, {kOuterA, kOuterB, {}, {}, 7u, {}}, &counting},
      Case{Scheme::kGtp4g, {kOuterB, kOuterA, {}, {}, 0xdeadbeefu, {}}, &empty},
      Case{Scheme::kIpInIpIcna, {kOuterA, kOuterB, kInnerA, kInnerB, {}, {}}, &counting},
      Case{Scheme::kIpInIpIcna, {kOuterB, kOuterA, kInnerB, kInnerA, {}, {}}, &empty},
      Case{Scheme::kGreHandover, {kOuterA, kOuterB, {}, {}, {}, 0x00010001u}, &counting},
      Case{Scheme::kGreHandover, {kOuterB, kOuterA, {}, {}, {}, 0xffffffffu}, &empty},
  };

  std::vector<std::string> lines;
  for (const auto& c : cases) {
    auto frame = encapsulate(c.scheme, c.addressing, *c.payload, outer);
    lines.push_back(std::string(to_string(c.scheme)) + " " + to_hex(frame.encode()));
  }
  return lines;
}

}  // namespace corenet::wire
