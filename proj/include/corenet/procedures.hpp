#pragma once

// Signaling procedures and user-plane forwarding for both architectures,
// executed on the event engine. A procedure is a serialized chain of
// messages: each message leaves when the previous one has been received.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corenet/delay_model.hpp"
#include "corenet/simnet.hpp"
#include "corenet/topology.hpp"
#include "corenet/wire_codecs.hpp"

namespace corenet::proc {

enum class MessageName {
  kAttachRequest,
  kAttachAccept,
  kAttachComplete,
  kUpdateLocationRequest,
  kUpdateLocationAnswer,
  kCreateSessionRequest,
  kCreateSessionResponse,
  kModifyBearerRequest,
  kModifyBearerResponse,
  kInitialContextSetupRequest,
  kInitialContextSetupResponse,
  kHandoverRequest,
  kHandoverAcknowledgment,
  kHandoverRequired,
  kHandoverCommand,
  kHandoverNotify,
  kPathSwitchRequest,
  kPathSwitchResponse,
  kPathModifyRequest,
  kPathModifyResponse,
  kGatewayAllocationRequest,
  kGatewayAllocationResponse,
  kIpAllocationRequest,
  kIpAllocationResponse,
  kReleaseResources,
  // Opaque security exchanges, chart transcripts only.
  kAuthenticationInformationRequest,
  kAuthenticationInformationAnswer,
  kSecurityRequest,
  kSecurityResponse,
  // UE radio confirmation after context setup; 4G closed-form attach only.
  kRadioBearerSetupComplete,
  // Serving-BS resolution at the UCE.
  kLocationQuery,
  kLocationResponse,
  kDataPacket,
};

std::string_view to_string(MessageName name);

struct ControlMessage {
  MessageName name = MessageName::kAttachRequest;
  topo::NodeId from;
  topo::NodeId to;
  int size_bytes = 0;
  std::string step;
};

struct TranscriptEntry {
  double sent_ms = 0.0;
  double received_ms = 0.0;
  ControlMessage message;
};

struct HandoverWindow {
  double detach_ms = 0.0;  // UE leaves the source BS
  double commit_ms = 0.0;  // gateway switches its downlink path
};

struct Transcript {
  std::vector<TranscriptEntry> entries;
  // Last receive time minus first send time.
  double final_latency_ms = 0.0;
  std::int64_t packets_injected = 0;
  std::int64_t packets_delivered = 0;
  std::int64_t packets_lost = 0;
  std::int64_t packets_in_flight = 0;
  std::optional<HandoverWindow> window;

  std::vector<MessageName> names() const;
  // `t_ms name from to` per entry, t_ms being the receive time.
  std::vector<std::string> to_lines() const;
  // CSV with header sent_ms,received_ms,step,name,from,to,size_bytes.
  std::string to_csv() const;
};

enum class ProcedureKind {
  kAttach4g,
  kAttachIcna,
  kDataMhIh,
  kDataMhMh,
  kDataIhMh,
  kX2Ho4g,
  kS1Ho4g,
  kInterGwHoIcna,
  kIntraGwHoIcna,
};

std::string_view to_string(ProcedureKind kind);
ProcedureKind parse_procedure_kind(std::string_view text);

// kChart follows the message sequence charts, including opaque security
// exchanges. kClosedForm keeps exactly the legs the closed-form totals count.
enum class Scope { kChart, kClosedForm };

struct GreBridge {
  std::uint32_t key = 0;
  topo::NodeId source_bs;
  topo::NodeId target_bs;
  bool active = false;
};

struct BridgeEvent {
  double at_ms = 0.0;
  topo::NodeId ue;
  std::uint32_t key = 0;
  bool created = false;  // false: released
};

struct DropRecord {
  double at_ms = 0.0;
  topo::NodeId at;
  std::string cause;
};

struct WorldConfig {
  topo::TopologyConfig topology;
  delay::DelayParams params;
  delay::ModelOptions model;
  sim::WirelessMode mode = sim::WirelessMode::kExpectedValue;
  std::uint64_t seed = 1;
  wire::OuterHeaderMode outer = wire::OuterHeaderMode::kCompact;
  bool trace = false;
};

struct ProcedureOptions {
  Scope scope = Scope::kChart;
  topo::NodeId ue{topo::NodeKind::kUe, 0};
  std::optional<topo::NodeId> peer_ue;    // DATA_MH_MH destination, default UE1
  std::optional<topo::NodeId> target_bs;  // handovers, default next BS
  bool bridging = true;                   // INTER_GW_HO_ICNA only
};

struct UeContext {
  bool attached = false;
  std::optional<topo::Address> inner;
  topo::NodeId serving_bs;
};

// A simulated network: topology, entity state and the event engine.
// Not copyable or movable; the engine refers to the topology.
class World {
 public:
  explicit World(const WorldConfig& config);
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  const WorldConfig& config() const { return config_; }
  topo::Topology& topology() { return topology_; }
  const topo::Topology& topology() const { return topology_; }
  sim::Simulator& simulator() { return sim_; }
  const sim::Simulator& simulator() const { return sim_; }
  topo::Arch arch() const { return topology_.arch(); }

  const topo::BindingTable& bindings() const { return bindings_; }
  const topo::BearerTable& bearers() const { return bearers_; }
  const UeContext& ue(topo::NodeId ue) const;
  const std::map<topo::NodeId, GreBridge>& bridges() const { return bridges_; }
  const std::vector<BridgeEvent>& bridge_log() const { return bridge_log_; }
  const std::vector<DropRecord>& drops() const { return drops_; }
  // CGW view of where each UE is served (ICNA downlink path).
  std::optional<topo::Address> gateway_route(topo::Address inner) const;

  Transcript run_procedure(ProcedureKind kind, const ProcedureOptions& opts = {});

  // Closed-form attach followed by one data round trip between the UE
  // and the gateway, matching the terms of the total-delay expressions.
  Transcript run_total_transmission(topo::NodeId ue = {topo::NodeKind::kUe, 0});

  // Continuous downlink from the Internet host to `ue` with an inter-gateway
  // handover triggered part-way through.
  struct TrafficOptions {
    double rate_per_ms = 1.0;
    bool bridging = true;
    double trigger_after_ms = 50.0;  // from flow start
    double flow_duration_ms = 300.0;
    topo::NodeId ue{topo::NodeKind::kUe, 0};
    std::optional<topo::NodeId> target_bs;
  };
  Transcript handover_with_traffic(const TrafficOptions& opts);

 private:
  struct Step {
    MessageName name;
    topo::NodeId from;
    topo::NodeId to;
    std::string label;
    int size_bytes = 0;
    std::function<void()> on_receive;
  };
  struct ActiveScript {
    std::vector<Step> steps;
    std::size_t next = 0;
    bool done = false;
  };
  struct Flow {
    topo::NodeId src;
    topo::Address dst_inner;
    topo::Address src_addr;
    sim::SimTime interval;
    sim::SimTime stop;
    bool active = false;
  };
  struct Pending {
    std::vector<std::vector<std::uint8_t>> packets;  // user IP packets
    bool query_outstanding = false;
  };

  void on_event(const sim::SimEvent& event);
  void on_control(const sim::Packet& packet, sim::SimTime sent);
  void on_data(const sim::Packet& packet, sim::SimTime sent);
  void on_timer(const sim::Timer& timer);

  void start_script(std::vector<Step> steps);
  void send_step(const Step& step);
  void run_script(std::vector<Step> steps);
  void record(const sim::Packet& packet, sim::SimTime sent);
  Transcript finish_transcript(Transcript t, std::int64_t injected0, std::int64_t delivered0,
                               std::size_t drops0) const;
  std::vector<topo::NodeId> route(topo::NodeId from, topo::NodeId to);

  std::vector<Step> attach_steps(topo::NodeId ue, Scope scope);
  std::vector<Step> handover_steps(ProcedureKind kind, topo::NodeId ue, topo::NodeId target, bool bridging);
  std::vector<Step> gateway_round_trip_steps(topo::NodeId ue);

  // User plane
  void run_data(ProcedureKind kind, const ProcedureOptions& opts);
  std::vector<std::uint8_t> make_payload();
  void inject_from_ue(topo::NodeId ue, topo::Address dst);
  void inject_from_host(topo::Address dst_inner);
  void forward(topo::NodeId from, topo::NodeId to, wire::Scheme scheme, const wire::Addressing& addressing,
               const std::vector<std::uint8_t>& payload);
  void deliver_to_ue(topo::NodeId bs, topo::NodeId ue, const std::vector<std::uint8_t>& ip_packet);
  void delivered(const sim::Packet& packet, sim::SimTime sent);
  void drop(topo::NodeId at, std::string cause);
  // Holds an untunneled user packet at `at` and picks its next hop.
  void ingress(topo::NodeId at, const std::vector<std::uint8_t>& ip_packet);
  void bs_downlink(topo::NodeId bs, const std::vector<std::uint8_t>& ip_packet);
  void resolve_then_forward(topo::NodeId resolver, topo::Address dst_inner, std::vector<std::uint8_t> ip_packet);
  void on_location_query(const sim::Packet& packet);
  void on_location_response(const sim::Packet& packet);

  std::optional<topo::NodeId> ue_with_inner(topo::Address inner) const;
  std::optional<topo::NodeId> ue_with_teid(std::uint32_t teid, bool uplink) const;
  void require_arch(topo::Arch arch, ProcedureKind kind) const;
  void require_attached(topo::NodeId ue) const;
  topo::NodeId default_target(topo::NodeId ue) const;
  void switch_radio(topo::NodeId ue, topo::NodeId target);

  WorldConfig config_;
  topo::Topology topology_;
  sim::Simulator sim_;

  topo::BindingTable bindings_;
  topo::BearerTable bearers_;
  topo::TeidAllocator teids_;
  topo::InnerAddressPool inner_pool_;
  std::map<topo::NodeId, UeContext> ues_;
  std::map<topo::Address, topo::Address> gateway_routes_;                    // CGW: inner -> BS locator
  std::map<std::pair<topo::NodeId, topo::Address>, topo::Address> bs_cache_;  // BS: UCE answers
  std::map<std::pair<topo::NodeId, topo::Address>, Pending> pending_;
  std::map<std::pair<topo::NodeId, topo::NodeId>, std::vector<topo::NodeId>> routes_;
  std::map<topo::NodeId, GreBridge> bridges_;
  std::vector<BridgeEvent> bridge_log_;
  std::uint32_t next_gre_key_ = 1;
  std::vector<DropRecord> drops_;
  std::uint64_t next_packet_id_ = 1;

  std::unique_ptr<ActiveScript> script_;
  std::uint64_t script_packet_ = 0;
  std::vector<Step> queued_script_;  // started by the "handover" timer
  Transcript* recording_ = nullptr;
  // false: record scripted steps only
  bool record_unscripted_ = true;
  std::optional<Flow> flow_;
  std::int64_t injected_ = 0;
  std::int64_t delivered_ = 0;
  // Set while a data procedure waits for its packet.
  bool awaiting_delivery_ = false;
  std::optional<sim::SimTime> detach_at_;
  std::optional<sim::SimTime> commit_at_;
};

// Convenience: one world, run `kind` (after the attach it needs) and return
// the transcript of `kind` alone.
Transcript run_procedure(ProcedureKind kind, const WorldConfig& config, const ProcedureOptions& opts = {});

// Consecutive handovers of UE0 along a chain of base stations, one every
// `interval_ms` of simulated time; returns the latency of each handover.
std::vector<double> run_handover_chain(topo::Arch arch, int handovers, const WorldConfig& base,
                                       double interval_ms = 0.0);

}  // namespace corenet::proc
