#include "corenet/topology.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <sstream>

#include "corenet/error.hpp"

namespace corenet::topo {
namespace {

constexpr int kUnreached = std::numeric_limits<int>::max();
constexpr std::uint32_t kCoreBase = 0xc0a80000;      // 192.168.0.0
constexpr std::uint32_t kExternalBase = 0xcb007100;  // 203.0.113.0

}  // namespace

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::kUe: return "UE";
    case NodeKind::kEnbBs: return "BS";
    case NodeKind::kSgw: return "SGW";
    case NodeKind::kPgw: return "PGW";
    case NodeKind::kMme: return "MME";
    case NodeKind::kHss: return "HSS";
    case NodeKind::kUce: return "UCE";
    case NodeKind::kCgw: return "CGW";
    case NodeKind::kL3Switch: return "L3S";
    case NodeKind::kInternetHost: return "HOST";
  }
  return "?";
}

std::string to_string(NodeId id) { return std::string(to_string(id.kind)) + std::to_string(id.index); }

std::string_view to_string(Arch arch) { return arch == Arch::kEpc4g ? "4g" : "icna"; }

Arch parse_arch(std::string_view text) {
  if (text == "4g" || text == "EPC_4G") return Arch::kEpc4g;
  if (text == "icna" || text == "ICNA") return Arch::kIcna;
  throw Error(ErrorCode::kConfig, "unknown architecture '" + std::string(text) + "'");
}

AddressSpace Address::space() const {
  if ((value >> 24) == 10) return AddressSpace::kMobileInner;
  if ((value >> 16) == 0xc0a8) return AddressSpace::kCoreOuter;
  return AddressSpace::kExternal;
}

std::string to_string(Address a) {
  std::ostringstream os;
  os << (a.value >> 24) << '.' << ((a.value >> 16) & 0xff) << '.' << ((a.value >> 8) & 0xff) << '.'
     << (a.value & 0xff);
  return os.str();
}

Address InnerAddressPool::allocate() {
  if (next_ >= 0x0b000000) throw Error(ErrorCode::kPrecondition, "inner address space exhausted");
  return Address{next_++};
}

// ---------------------------------------------------------------------------
// Topology

int Topology::id_of(NodeId n) const {
  auto it = ids_.find(n);
  if (it == ids_.end()) throw Error(ErrorCode::kPrecondition, "node " + to_string(n) + " not in topology");
  return it->second;
}

std::vector<NodeId> Topology::nodes_of(NodeKind kind) const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_) {
    if (n.kind == kind) out.push_back(n);
  }
  return out;
}

std::vector<Link> Topology::links() const {
  std::vector<Link> out;
  out.reserve(link_kind_.size());
  for (const auto& [key, wired] : link_kind_) out.push_back({key.first, key.second, wired});
  return out;
}

std::optional<bool> Topology::link_wired(NodeId a, NodeId b) const {
  if (!contains(a) || !contains(b)) return std::nullopt;
  int x = id_of(a), y = id_of(b);
  auto it = link_kind_.find({std::min(x, y), std::max(x, y)});
  if (it == link_kind_.end()) return std::nullopt;
  return it->second;
}

Address Topology::address_of(NodeId n) const {
  auto it = addresses_.find(n);
  if (it == addresses_.end()) throw Error(ErrorCode::kPrecondition, to_string(n) + " has no locator address");
  return it->second;
}

std::optional<NodeId> Topology::node_at(Address a) const {
  for (const auto& [node, addr] : addresses_) {
    if (addr == a) return node;
  }
  return std::nullopt;
}

int Topology::add_node(NodeKind kind) {
  const int id = static_cast<int>(nodes_.size());
  NodeId n{kind, kind_count_[kind]++};
  nodes_.push_back(n);
  ids_[n] = id;
  adj_.emplace_back();
  if (kind == NodeKind::kInternetHost) {
    addresses_[n] = Address{kExternalBase + 1 + static_cast<std::uint32_t>(n.index)};
  } else if (kind != NodeKind::kUe) {
    addresses_[n] = Address{kCoreBase + 1 + static_cast<std::uint32_t>(id)};
  }
  return id;
}

void Topology::add_link(int a, int b, bool wired) {
  if (a == b) throw Error(ErrorCode::kPrecondition, "self link");
  auto key = std::make_pair(std::min(a, b), std::max(a, b));
  if (link_kind_.count(key)) return;
  link_kind_[key] = wired;
  auto insert_sorted = [](std::vector<int>& v, int x) { v.insert(std::lower_bound(v.begin(), v.end(), x), x); };
  insert_sorted(adj_[static_cast<std::size_t>(a)], b);
  insert_sorted(adj_[static_cast<std::size_t>(b)], a);
}

void Topology::remove_link(int a, int b) {
  link_kind_.erase({std::min(a, b), std::max(a, b)});
  auto drop = [](std::vector<int>& v, int x) { v.erase(std::remove(v.begin(), v.end(), x), v.end()); };
  drop(adj_[static_cast<std::size_t>(a)], b);
  drop(adj_[static_cast<std::size_t>(b)], a);
}

void Topology::attach_radio(NodeId ue, NodeId bs) {
  if (ue.kind != NodeKind::kUe || bs.kind != NodeKind::kEnbBs) {
    throw Error(ErrorCode::kPrecondition, "radio links join a UE and a base station");
  }
  detach_radio(ue);
  add_link(id_of(ue), id_of(bs), false);
}

void Topology::detach_radio(NodeId ue) {
  const int u = id_of(ue);
  const auto neighbors = adj_[static_cast<std::size_t>(u)];
  for (int n : neighbors) remove_link(u, n);
}

std::optional<NodeId> Topology::radio_bs(NodeId ue) const {
  const auto& n = adj_.at(static_cast<std::size_t>(id_of(ue)));
  if (n.empty()) return std::nullopt;
  return nodes_[static_cast<std::size_t>(n.front())];
}

std::vector<int> Topology::bfs(int from) const {
  std::vector<int> dist(nodes_.size(), kUnreached);
  std::deque<int> queue{from};
  dist[static_cast<std::size_t>(from)] = 0;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (int v : adj_[static_cast<std::size_t>(u)]) {
      if (dist[static_cast<std::size_t>(v)] == kUnreached) {
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

int Topology::hop_distance(NodeId a, NodeId b) const {
  int d = bfs(id_of(a))[static_cast<std::size_t>(id_of(b))];
  if (d == kUnreached) throw Error(ErrorCode::kNoRoute, to_string(a) + " -> " + to_string(b));
  return d;
}

std::vector<std::string> Topology::edge_list() const {
  std::vector<std::string> out;
  for (const auto& [key, wired] : link_kind_) {
    out.push_back(to_string(nodes_[static_cast<std::size_t>(key.first)]) + " " +
                  to_string(nodes_[static_cast<std::size_t>(key.second)]) + (wired ? " wired" : " wireless"));
  }
  return out;
}

NodeId Topology::sgw_for(NodeId enb) const {
  if (arch_ != Arch::kEpc4g) throw Error(ErrorCode::kInvalidScenario, "SGW requested in an ICNA topology");
  return {NodeKind::kSgw, enb.index};
}

NodeId Topology::gateway() const {
  return arch_ == Arch::kEpc4g ? NodeId{NodeKind::kPgw, 0} : NodeId{NodeKind::kCgw, 0};
}

NodeId Topology::controller() const {
  return arch_ == Arch::kEpc4g ? NodeId{NodeKind::kMme, 0} : NodeId{NodeKind::kUce, 0};
}

// ---------------------------------------------------------------------------
// Construction

class TopologyBuilder {
 public:
  explicit TopologyBuilder(const TopologyConfig& c) {
    t_.arch_ = c.arch;
    t_.hops_ = c.hops;
  }

  int node(NodeKind kind) { return t_.add_node(kind); }

  // Joins a and b with a chain of exactly `hops` wired links.
  void chain(int a, int b, int hops, const char* role) {
    int prev = a;
    for (int i = 1; i < hops; ++i) {
      int sw = t_.add_node(NodeKind::kL3Switch);
      t_.add_link(prev, sw, true);
      prev = sw;
    }
    t_.add_link(prev, b, true);
    required_.push_back({a, b, hops, role});
  }

  void wire(int a, int b) { t_.add_link(a, b, true); }
  void radio(int ue, int bs) { t_.add_link(ue, bs, false); }

  Topology finish() {
    for (const auto& r : required_) {
      const int got = t_.bfs(r.a)[static_cast<std::size_t>(r.b)];
      if (got != r.hops) {
        throw Error(ErrorCode::kUnrealizableTopology,
                    std::string(r.role) + " " + to_string(t_.node(r.a)) + "-" + to_string(t_.node(r.b)) +
                        " needs " + std::to_string(r.hops) + " hops but a shorter path of " +
                        std::to_string(got) + " exists through other anchors");
      }
    }
    return std::move(t_);
  }

 private:
  struct Requirement {
    int a, b, hops;
    const char* role;
  };
  Topology t_;
  std::vector<Requirement> required_;
};

Topology build_topology(const TopologyConfig& c) {
  c.hops.validate();
  if (c.n_bs < 1 || c.n_ue < 0) throw Error(ErrorCode::kPrecondition, "need at least one base station");
  const auto& h = c.hops;
  TopologyBuilder b(c);

  // Anchors first so that their ids precede every switch; base-station
  // chains are laid before the rest so equal-length routes prefer them.
  std::vector<int> ues, bss;
  for (int i = 0; i < c.n_ue; ++i) ues.push_back(b.node(NodeKind::kUe));
  for (int i = 0; i < c.n_bs; ++i) bss.push_back(b.node(NodeKind::kEnbBs));

  if (c.arch == Arch::kEpc4g) {
    std::vector<int> sgws;
    for (int i = 0; i < c.n_bs; ++i) sgws.push_back(b.node(NodeKind::kSgw));
    const int pgw = b.node(NodeKind::kPgw);
    const int mme = b.node(NodeKind::kMme);
    const int hss = b.node(NodeKind::kHss);
    const int host = b.node(NodeKind::kInternetHost);

    for (int i = 0; i + 1 < c.n_bs; ++i) b.chain(bss[i], bss[i + 1], h.lambda, "eNB-eNB");
    for (int i = 0; i < c.n_bs; ++i) b.chain(bss[i], sgws[i], h.alpha, "eNB-SGW");
    for (int i = 0; i < c.n_bs; ++i) b.chain(sgws[i], pgw, h.beta, "SGW-PGW");
    for (int i = 0; i < c.n_bs; ++i) b.chain(bss[i], mme, h.gamma, "eNB-MME");
    b.chain(mme, hss, h.delta, "MME-HSS");
    for (int i = 0; i < c.n_bs; ++i) b.chain(mme, sgws[i], h.epsilon, "MME-SGW");
    b.wire(pgw, host);
  } else {
    const int uce = b.node(NodeKind::kUce);
    const int hss = b.node(NodeKind::kHss);
    const int cgw = b.node(NodeKind::kCgw);
    const int host = b.node(NodeKind::kInternetHost);

    for (int i = 0; i + 1 < c.n_bs; ++i) b.chain(bss[i], bss[i + 1], h.lambda, "BS-BS");
    for (int i = 0; i < c.n_bs; ++i) b.chain(bss[i], uce, h.gamma, "BS-UCE");
    b.chain(uce, hss, h.delta, "UCE-HSS");
    b.chain(uce, cgw, h.epsilon, "UCE-CGW");
    for (int i = 0; i < c.n_bs; ++i) b.chain(bss[i], cgw, h.alpha, "BS-CGW");
    b.wire(cgw, host);
  }
  for (int i = 0; i < c.n_ue; ++i) b.radio(ues[i], bss[static_cast<std::size_t>(i % c.n_bs)]);
  return b.finish();
}

Topology build_topology(const delay::HopCounts& hops, Arch arch) {
  TopologyConfig c;
  c.arch = arch;
  c.hops = hops;
  return build_topology(c);
}

std::vector<NodeId> compute_route(const Topology& t, NodeId src, NodeId dst) {
  const int s = t.id_of(src);
  const int d = t.id_of(dst);
  if (s == d) return {src};
  // Distances to dst, then walk forward taking the smallest-id neighbor that
  // stays on a shortest path.
  std::vector<int> dist(t.nodes().size(), kUnreached);
  std::deque<int> queue{d};
  dist[static_cast<std::size_t>(d)] = 0;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (int v : t.neighbors(u)) {
      if (dist[static_cast<std::size_t>(v)] == kUnreached) {
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        queue.push_back(v);
      }
    }
  }
  if (dist[static_cast<std::size_t>(s)] == kUnreached) {
    throw Error(ErrorCode::kNoRoute, to_string(src) + " -> " + to_string(dst));
  }
  std::vector<NodeId> path{src};
  int u = s;
  while (u != d) {
    for (int v : t.neighbors(u)) {
      if (dist[static_cast<std::size_t>(v)] == dist[static_cast<std::size_t>(u)] - 1) {
        u = v;
        break;
      }
    }
    path.push_back(t.node(u));
  }
  return path;
}

std::vector<NodeId> anchored_route(const Topology& t, const std::vector<NodeId>& waypoints) {
  if (waypoints.empty()) return {};
  std::vector<NodeId> path{waypoints.front()};
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    auto leg = compute_route(t, waypoints[i - 1], waypoints[i]);
    path.insert(path.end(), leg.begin() + 1, leg.end());
  }
  return path;
}

std::vector<NodeId> ue_data_route(const Topology& t, NodeId ue_a, NodeId ue_b) {
  auto bs_a = t.radio_bs(ue_a);
  auto bs_b = t.radio_bs(ue_b);
  if (!bs_a || !bs_b) throw Error(ErrorCode::kNoRoute, "UE without radio attachment");
  if (t.arch() == Arch::kIcna) return anchored_route(t, {ue_a, *bs_a, *bs_b, ue_b});
  return anchored_route(t, {ue_a, *bs_a, t.sgw_for(*bs_a), t.gateway(), t.sgw_for(*bs_b), *bs_b, ue_b});
}

std::string_view to_string(Destination d) {
  return d == Destination::kSameMobileNetwork ? "SAME_MOBILE_NETWORK" : "EXTERNAL";
}

Destination classify_destination(NodeId bs, Address dst) {
  switch (dst.space()) {
    case AddressSpace::kMobileInner: return Destination::kSameMobileNetwork;
    case AddressSpace::kExternal: return Destination::kExternal;
    case AddressSpace::kCoreOuter: break;
  }
  throw Error(ErrorCode::kInvalidDestination,
              to_string(dst) + " is a core locator, not a destination (at " + to_string(bs) + ")");
}

// ---------------------------------------------------------------------------
// Binding and bearer state

void BindingTable::bind(Address inner, Binding binding) {
  if (inner.space() != AddressSpace::kMobileInner) {
    throw Error(ErrorCode::kPrecondition, to_string(inner) + " is not a UE identifier");
  }
  entries_[inner] = binding;
}

void BindingTable::update_serving(Address inner, Address serving_outer) {
  auto it = entries_.find(inner);
  if (it == entries_.end()) throw Error(ErrorCode::kUnknownUe, to_string(inner));
  it->second.serving_outer = serving_outer;
}

const Binding& BindingTable::lookup(Address inner) const {
  auto it = entries_.find(inner);
  if (it == entries_.end()) throw Error(ErrorCode::kUnknownUe, to_string(inner));
  return it->second;
}

Address uce_lookup(const BindingTable& table, Address inner) { return table.lookup(inner).serving_outer; }

std::uint32_t TeidAllocator::allocate(NodeId gateway) {
  auto& next = next_[gateway];
  if (next == 0) next = 1;
  if (next == std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kPrecondition, "TEID space exhausted at " + to_string(gateway));
  }
  return next++;
}

const Bearer& BearerTable::establish(NodeId ue, NodeId sgw, NodeId pgw, TeidAllocator& teids) {
  Bearer b;
  b.sgw = sgw;
  b.pgw = pgw;
  b.teid_uplink = teids.allocate(sgw);
  b.teid_downlink = teids.allocate(sgw);
  return entries_[ue] = b;
}

const Bearer& BearerTable::lookup(NodeId ue) const {
  auto it = entries_.find(ue);
  if (it == entries_.end()) throw Error(ErrorCode::kUnknownUe, to_string(ue) + " has no bearer");
  return it->second;
}

}  // namespace corenet::topo
