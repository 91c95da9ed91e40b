#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corenet/delay_model.hpp"

namespace corenet::topo {

enum class NodeKind { kUe, kEnbBs, kSgw, kPgw, kMme, kHss, kUce, kCgw, kL3Switch, kInternetHost };

std::string_view to_string(NodeKind kind);

struct NodeId {
  NodeKind kind = NodeKind::kUe;
  int index = 0;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

std::string to_string(NodeId id);

enum class Arch { kEpc4g, kIcna };

std::string_view to_string(Arch arch);
Arch parse_arch(std::string_view text);  // "4g" | "icna"

enum class AddressSpace { kMobileInner, kCoreOuter, kExternal };

// Address space is a function of the value: 10.0.0.0/8 holds UE identifiers,
// 192.168.0.0/16 holds core locators, everything else is external.
struct Address {
  std::uint32_t value = 0;
  AddressSpace space() const;
  friend auto operator<=>(const Address&, const Address&) = default;
};

std::string to_string(Address a);

// Hands out UE inner addresses; each value is issued at most once.
class InnerAddressPool {
 public:
  Address allocate();
  std::size_t issued() const { return next_ - kFirst; }

 private:
  static constexpr std::uint32_t kFirst = 0x0a000001;  // 10.0.0.1
  std::uint32_t next_ = kFirst;
};

struct Link {
  int a = 0;  // node ids, a < b
  int b = 0;
  bool wired = true;
};

class Topology {
 public:
  Arch arch() const { return arch_; }
  const delay::HopCounts& hops() const { return hops_; }

  const std::vector<NodeId>& nodes() const { return nodes_; }
  bool contains(NodeId n) const { return ids_.count(n) != 0; }
  int id_of(NodeId n) const;
  NodeId node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::vector<NodeId> nodes_of(NodeKind kind) const;

  std::vector<Link> links() const;
  std::optional<bool> link_wired(NodeId a, NodeId b) const;
  const std::vector<int>& neighbors(int id) const { return adj_.at(static_cast<std::size_t>(id)); }

  // Locator or external address; UEs have none (their inner address is
  // issued at attach time).
  Address address_of(NodeId n) const;
  std::optional<NodeId> node_at(Address a) const;

  // UE radio attachment is the only mutable part of the graph.
  void attach_radio(NodeId ue, NodeId bs);
  void detach_radio(NodeId ue);
  std::optional<NodeId> radio_bs(NodeId ue) const;

  int hop_distance(NodeId a, NodeId b) const;

  // One `<node> <node> <wired|wireless>` line per link.
  std::vector<std::string> edge_list() const;

  // Role anchors of the default topologies.
  NodeId sgw_for(NodeId enb) const;  // EPC only: one SGW per eNB
  NodeId gateway() const;            // PGW (EPC) or CGW (ICNA)
  NodeId controller() const;         // MME (EPC) or UCE (ICNA)
  NodeId internet_host() const { return {NodeKind::kInternetHost, 0}; }

 private:
  friend class TopologyBuilder;
  int add_node(NodeKind kind);
  void add_link(int a, int b, bool wired);
  void remove_link(int a, int b);
  std::vector<int> bfs(int from) const;

  Arch arch_ = Arch::kIcna;
  delay::HopCounts hops_;
  std::vector<NodeId> nodes_;
  std::map<NodeId, int> ids_;
  std::map<NodeKind, int> kind_count_;
  std::vector<std::vector<int>> adj_;  // sorted ascending
  std::map<std::pair<int, int>, bool> link_kind_;
  std::map<NodeId, Address> addresses_;
};

struct TopologyConfig {
  Arch arch = Arch::kIcna;
  delay::HopCounts hops;
  int n_bs = 2;
  int n_ue = 2;  // UE i starts on BS (i mod n_bs)
};

// Anchors are joined by chains of L3 switches of exactly the configured
// length. Throws kUnrealizableTopology when a shortcut through other anchors
// makes some configured pair closer than required.
Topology build_topology(const TopologyConfig& config);
Topology build_topology(const delay::HopCounts& hops, Arch arch);

// Hop-count shortest path; ties go to the lexicographically smallest
// sequence of node ids. Throws kNoRoute.
std::vector<NodeId> compute_route(const Topology& t, NodeId src, NodeId dst);

// Concatenation of shortest routes through each waypoint in turn.
std::vector<NodeId> anchored_route(const Topology& t, const std::vector<NodeId>& waypoints);

// User-plane path between two UEs given current radio attachment: through
// SGW and PGW anchors for EPC, directly between base stations for ICNA.
std::vector<NodeId> ue_data_route(const Topology& t, NodeId ue_a, NodeId ue_b);

enum class Destination { kSameMobileNetwork, kExternal };

std::string_view to_string(Destination d);

// Throws kInvalidDestination for core locators, which never name a host.
Destination classify_destination(NodeId bs, Address dst);

struct Binding {
  Address serving_outer;
  NodeId uce;
  Address gateway;
};

class BindingTable {
 public:
  void bind(Address inner, Binding binding);
  void update_serving(Address inner, Address serving_outer);
  const Binding& lookup(Address inner) const;
  bool contains(Address inner) const { return entries_.count(inner) != 0; }
  std::size_t size() const { return entries_.size(); }
  const std::map<Address, Binding>& entries() const { return entries_; }

 private:
  std::map<Address, Binding> entries_;
};

// Serving base-station locator for a UE identifier. Throws kUnknownUe.
Address uce_lookup(const BindingTable& table, Address inner);

class TeidAllocator {
 public:
  // Never returns zero and never repeats a value for the same gateway.
  std::uint32_t allocate(NodeId gateway);

 private:
  std::map<NodeId, std::uint32_t> next_;
};

struct Bearer {
  std::uint32_t teid_uplink = 0;
  std::uint32_t teid_downlink = 0;
  NodeId sgw;
  NodeId pgw;
};

class BearerTable {
 public:
  const Bearer& establish(NodeId ue, NodeId sgw, NodeId pgw, TeidAllocator& teids);
  const Bearer& lookup(NodeId ue) const;
  bool contains(NodeId ue) const { return entries_.count(ue) != 0; }
  const std::map<NodeId, Bearer>& entries() const { return entries_; }

 private:
  std::map<NodeId, Bearer> entries_;
};

}  // namespace corenet::topo
