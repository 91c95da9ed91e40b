#include "corenet/procedures.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "corenet/error.hpp"

namespace corenet::proc {

using topo::Address;
using topo::Arch;
using topo::NodeId;
using topo::NodeKind;

namespace {

constexpr std::size_t kIdBytes = 8;

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get32(const std::vector<std::uint8_t>& b, std::size_t at) {
  if (b.size() < at + 4) throw Error(ErrorCode::kMalformedFrame, "short lookup message");
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

Arch arch_of(ProcedureKind kind) {
  switch (kind) {
    case ProcedureKind::kAttach4g:
    case ProcedureKind::kX2Ho4g:
    case ProcedureKind::kS1Ho4g: return Arch::kEpc4g;
    default: return Arch::kIcna;
  }
}

bool is_handover(ProcedureKind kind) {
  return kind == ProcedureKind::kX2Ho4g || kind == ProcedureKind::kS1Ho4g ||
         kind == ProcedureKind::kInterGwHoIcna || kind == ProcedureKind::kIntraGwHoIcna;
}

bool is_data(ProcedureKind kind) {
  return kind == ProcedureKind::kDataMhIh || kind == ProcedureKind::kDataMhMh || kind == ProcedureKind::kDataIhMh;
}

ProcedureKind attach_kind(Arch arch) {
  return arch == Arch::kEpc4g ? ProcedureKind::kAttach4g : ProcedureKind::kAttachIcna;
}

struct RecordingGuard {
  Transcript*& slot;
  bool& unscripted;
  RecordingGuard(Transcript*& s, bool& u, Transcript* t, bool all) : slot(s), unscripted(u) {
    slot = t;
    unscripted = all;
  }
  ~RecordingGuard() {
    slot = nullptr;
    unscripted = true;
  }
};

}  // namespace

std::string_view to_string(MessageName name) {
  switch (name) {
    case MessageName::kAttachRequest: return "AttachRequest";
    case MessageName::kAttachAccept: return "AttachAccept";
    case MessageName::kAttachComplete: return "AttachComplete";
    case MessageName::kUpdateLocationRequest: return "UpdateLocationRequest";
    case MessageName::kUpdateLocationAnswer: return "UpdateLocationAnswer";
    case MessageName::kCreateSessionRequest: return "CreateSessionRequest";
    case MessageName::kCreateSessionResponse: return "CreateSessionResponse";
    case MessageName::kModifyBearerRequest: return "ModifyBearerRequest";
    case MessageName::kModifyBearerResponse: return "ModifyBearerResponse";
    case MessageName::kInitialContextSetupRequest: return "InitialContextSetupRequest";
    case MessageName::kInitialContextSetupResponse: return "InitialContextSetupResponse";
    case MessageName::kHandoverRequest: return "HandoverRequest";
    case MessageName::kHandoverAcknowledgment: return "HandoverAcknowledgment";
    case MessageName::kHandoverRequired: return "HandoverRequired";
    case MessageName::kHandoverCommand: return "HandoverCommand";
    case MessageName::kHandoverNotify: return "HandoverNotify";
    case MessageName::kPathSwitchRequest: return "PathSwitchRequest";
    case MessageName::kPathSwitchResponse: return "PathSwitchResponse";
    case MessageName::kPathModifyRequest: return "PathModifyRequest";
    case MessageName::kPathModifyResponse: return "PathModifyResponse";
    case MessageName::kGatewayAllocationRequest: return "GatewayAllocationRequest";
    case MessageName::kGatewayAllocationResponse: return "GatewayAllocationResponse";
    case MessageName::kIpAllocationRequest: return "IpAllocationRequest";
    case MessageName::kIpAllocationResponse: return "IpAllocationResponse";
    case MessageName::kReleaseResources: return "ReleaseResources";
    case MessageName::kAuthenticationInformationRequest: return "AuthenticationInformationRequest";
    case MessageName::kAuthenticationInformationAnswer: return "AuthenticationInformationAnswer";
    case MessageName::kSecurityRequest: return "SecurityRequest";
    case MessageName::kSecurityResponse: return "SecurityResponse";
    case MessageName::kRadioBearerSetupComplete: return "RadioBearerSetupComplete";
    case MessageName::kLocationQuery: return "LocationQuery";
    case MessageName::kLocationResponse: return "LocationResponse";
    case MessageName::kDataPacket: return "DataPacket";
  }
  return "Unknown";
}

std::vector<MessageName> Transcript::names() const {
  std::vector<MessageName> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.message.name);
  return out;
}

std::vector<std::string> Transcript::to_lines() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    char t[32];
    std::snprintf(t, sizeof t, "%.6f", e.received_ms);
    out.push_back(std::string(t) + " " + std::string(to_string(e.message.name)) + " " +
                  topo::to_string(e.message.from) + " " + topo::to_string(e.message.to));
  }
  return out;
}

std::string Transcript::to_csv() const {
  std::ostringstream os;
  os << "sent_ms,received_ms,step,name,from,to,size_bytes\n";
  for (const auto& e : entries) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,", e.sent_ms, e.received_ms);
    os << buf << e.message.step << ',' << to_string(e.message.name) << ',' << topo::to_string(e.message.from)
       << ',' << topo::to_string(e.message.to) << ',' << e.message.size_bytes << '\n';
  }
  return os.str();
}

std::string_view to_string(ProcedureKind kind) {
  switch (kind) {
    case ProcedureKind::kAttach4g: return "ATTACH_4G";
    case ProcedureKind::kAttachIcna: return "ATTACH_ICNA";
    case ProcedureKind::kDataMhIh: return "DATA_MH_IH";
    case ProcedureKind::kDataMhMh: return "DATA_MH_MH";
    case ProcedureKind::kDataIhMh: return "DATA_IH_MH";
    case ProcedureKind::kX2Ho4g: return "X2_HO_4G";
    case ProcedureKind::kS1Ho4g: return "S1_HO_4G";
    case ProcedureKind::kInterGwHoIcna: return "INTER_GW_HO_ICNA";
    case ProcedureKind::kIntraGwHoIcna: return "INTRA_GW_HO_ICNA";
  }
  return "INVALID";
}

ProcedureKind parse_procedure_kind(std::string_view text) {
  for (int i = 0; i <= static_cast<int>(ProcedureKind::kIntraGwHoIcna); ++i) {
    auto k = static_cast<ProcedureKind>(i);
    if (text == to_string(k)) return k;
  }
  throw Error(ErrorCode::kInvalidKind, "unknown procedure '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// World

World::World(const WorldConfig& config)
    : config_(config),
      topology_(topo::build_topology(config.topology)),
      sim_(topology_, sim::LinkModel{config.params, config.model, config.mode, config.seed}) {
  sim_.enable_trace(config.trace);
  sim_.set_handler([this](const sim::SimEvent& e) { on_event(e); });
  for (auto ue : topology_.nodes_of(NodeKind::kUe)) {
    UeContext ctx;
    ctx.serving_bs = *topology_.radio_bs(ue);
    ues_[ue] = ctx;
  }
}

const UeContext& World::ue(NodeId ue) const {
  auto it = ues_.find(ue);
  if (it == ues_.end()) throw Error(ErrorCode::kUnknownUe, topo::to_string(ue));
  return it->second;
}

std::optional<Address> World::gateway_route(Address inner) const {
  auto it = gateway_routes_.find(inner);
  if (it == gateway_routes_.end()) return std::nullopt;
  return it->second;
}

std::vector<NodeId> World::route(NodeId from, NodeId to) {
  if (from.kind == NodeKind::kUe || to.kind == NodeKind::kUe) {
    if (!topology_.link_wired(from, to)) {
      throw Error(ErrorCode::kNoRoute, topo::to_string(from) + " has no radio link to " + topo::to_string(to));
    }
    return {from, to};
  }
  auto key = std::make_pair(from, to);
  auto it = routes_.find(key);
  if (it != routes_.end()) return it->second;
  return routes_.emplace(key, topo::compute_route(topology_, from, to)).first->second;
}

void World::on_event(const sim::SimEvent& event) {
  if (const auto* d = std::get_if<sim::Deliver>(&event.action)) {
    if (d->packet.kind == sim::PacketKind::kControl) {
      on_control(d->packet, d->sent);
    } else {
      on_data(d->packet, d->sent);
    }
  } else {
    on_timer(std::get<sim::Timer>(event.action));
  }
}

void World::record(const sim::Packet& packet, sim::SimTime sent) {
  if (!recording_) return;
  if (!record_unscripted_ && packet.id != script_packet_) return;
  ControlMessage m;
  m.name = static_cast<MessageName>(packet.message);
  m.from = packet.from;
  m.to = packet.to;
  m.size_bytes = packet.size_bytes;
  m.step = packet.step;
  recording_->entries.push_back(TranscriptEntry{sent.ms(), sim_.now().ms(), std::move(m)});
}

Transcript World::finish_transcript(Transcript t, std::int64_t injected0, std::int64_t delivered0,
                                    std::size_t drops0) const {
  if (!t.entries.empty()) {
    double first = t.entries.front().sent_ms;
    double last = t.entries.front().received_ms;
    for (const auto& e : t.entries) {
      first = std::min(first, e.sent_ms);
      last = std::max(last, e.received_ms);
    }
    t.final_latency_ms = last - first;
  }
  t.packets_injected = injected_ - injected0;
  t.packets_delivered = delivered_ - delivered0;
  t.packets_lost = static_cast<std::int64_t>(drops_.size() - drops0);
  t.packets_in_flight = t.packets_injected - t.packets_delivered - t.packets_lost;
  if (detach_at_ && commit_at_) t.window = HandoverWindow{detach_at_->ms(), commit_at_->ms()};
  return t;
}

// ---------------------------------------------------------------------------
// Scripts

void World::start_script(std::vector<Step> steps) {
  if (steps.empty()) throw Error(ErrorCode::kPrecondition, "empty procedure");
  script_ = std::make_unique<ActiveScript>();
  script_->steps = std::move(steps);
  script_->next = 1;
  send_step(script_->steps.front());
}

void World::send_step(const Step& step) {
  sim::Packet p;
  p.kind = sim::PacketKind::kControl;
  p.name = std::string(to_string(step.name));
  p.message = static_cast<int>(step.name);
  p.from = step.from;
  p.to = step.to;
  p.size_bytes = step.size_bytes;
  p.id = next_packet_id_++;
  p.step = step.label;
  script_packet_ = p.id;
  const auto path = route(step.from, step.to);
  sim_.transmit(std::move(p), path);
}

void World::run_script(std::vector<Step> steps) {
  start_script(std::move(steps));
  while (!script_->done && sim_.step()) {
  }
  if (!script_->done) throw Error(ErrorCode::kInvalidState, "procedure stalled");
}

void World::on_control(const sim::Packet& packet, sim::SimTime sent) {
  const auto name = static_cast<MessageName>(packet.message);
  if (name == MessageName::kLocationQuery) {
    record(packet, sent);
    on_location_query(packet);
    return;
  }
  if (name == MessageName::kLocationResponse) {
    record(packet, sent);
    on_location_response(packet);
    return;
  }
  if (!script_ || script_->done || packet.id != script_packet_) {
    throw Error(ErrorCode::kInvalidState, "unexpected " + packet.name + " at " + topo::to_string(packet.to));
  }
  record(packet, sent);
  auto& s = *script_;
  if (const auto& hook = s.steps[s.next - 1].on_receive) hook();
  if (s.next < s.steps.size()) {
    send_step(s.steps[s.next]);
    ++s.next;
  } else {
    s.done = true;
  }
}

void World::on_timer(const sim::Timer& timer) {
  if (timer.tag == "flow") {
    if (!flow_ || !flow_->active) return;
    inject_from_host(flow_->dst_inner);
    const auto next = sim_.now() + flow_->interval;
    if (next < flow_->stop) {
      sim_.schedule(next, sim::Timer{timer.owner, "flow"});
    } else {
      flow_->active = false;
    }
  } else if (timer.tag == "handover") {
    start_script(std::move(queued_script_));
    queued_script_.clear();
  } else {
    throw Error(ErrorCode::kInvalidState, "unknown timer '" + timer.tag + "'");
  }
}

std::vector<World::Step> World::attach_steps(NodeId ue, Scope scope) {
  const auto& ctx = this->ue(ue);
  if (ctx.attached) throw Error(ErrorCode::kInvalidState, topo::to_string(ue) + " is already attached");
  const NodeId bs = ctx.serving_bs;
  const NodeId ctl = topology_.controller();
  const NodeId hss{NodeKind::kHss, 0};
  const NodeId gw = topology_.gateway();
  const int sc = config_.params.control_bytes;
  const bool chart = scope == Scope::kChart;
  std::vector<Step> steps;
  auto add = [&](MessageName n, NodeId from, NodeId to, std::string label, std::function<void()> hook = {}) {
    steps.push_back(Step{n, from, to, std::move(label), sc, std::move(hook)});
  };
  auto mark_attached = [this, ue, bs] {
    auto& c = ues_.at(ue);
    c.attached = true;
    c.serving_bs = bs;
  };

  if (topology_.arch() == Arch::kIcna) {
    add(MessageName::kAttachRequest, ue, bs, "1");
    add(MessageName::kAttachRequest, bs, ctl, "1");
    if (chart) {
      add(MessageName::kAuthenticationInformationRequest, ctl, hss, "sec");
      add(MessageName::kAuthenticationInformationAnswer, hss, ctl, "sec");
      add(MessageName::kSecurityRequest, ctl, bs, "sec");
      add(MessageName::kSecurityRequest, bs, ue, "sec");
      add(MessageName::kSecurityResponse, ue, bs, "sec");
      add(MessageName::kSecurityResponse, bs, ctl, "sec");
    }
    add(MessageName::kUpdateLocationRequest, ctl, hss, "2");
    add(MessageName::kUpdateLocationAnswer, hss, ctl, "2");
    add(MessageName::kGatewayAllocationRequest, ctl, gw, "3");
    add(MessageName::kGatewayAllocationResponse, gw, ctl, "3");
    add(MessageName::kIpAllocationRequest, bs, ctl, "4", [this, ue, bs, ctl, gw] {
      const Address inner = inner_pool_.allocate();
      ues_.at(ue).inner = inner;
      bindings_.bind(inner, topo::Binding{topology_.address_of(bs), ctl, topology_.address_of(gw)});
    });
    add(MessageName::kIpAllocationResponse, ctl, bs, "4");
    add(MessageName::kAttachAccept, ctl, bs, "5");
    add(MessageName::kAttachAccept, bs, ue, "5");
    add(MessageName::kAttachComplete, ue, bs, "6");
    add(MessageName::kAttachComplete, bs, ctl, "6", mark_attached);
    return steps;
  }

  const NodeId sgw = topology_.sgw_for(bs);
  int n = 0;
  auto next = [&n] { return std::to_string(++n); };
  add(MessageName::kAttachRequest, ue, bs, next());
  add(MessageName::kAttachRequest, bs, ctl, next());
  add(MessageName::kUpdateLocationRequest, ctl, hss, next());
  add(MessageName::kUpdateLocationAnswer, hss, ctl, next());
  if (chart) {
    add(MessageName::kSecurityRequest, ctl, bs, "sec");
    add(MessageName::kSecurityRequest, bs, ue, "sec");
    add(MessageName::kSecurityResponse, ue, bs, "sec");
    add(MessageName::kSecurityResponse, bs, ctl, "sec");
  }
  add(MessageName::kCreateSessionRequest, ctl, sgw, next());
  add(MessageName::kModifyBearerRequest, sgw, gw, next(), [this, ue, sgw, gw] {
    ues_.at(ue).inner = inner_pool_.allocate();
    bearers_.establish(ue, sgw, gw, teids_);
  });
  add(MessageName::kModifyBearerResponse, gw, sgw, next());
  add(MessageName::kCreateSessionResponse, sgw, ctl, next());
  add(MessageName::kAttachAccept, ctl, bs, next());
  add(MessageName::kAttachAccept, bs, ue, next());
  if (!chart) add(MessageName::kRadioBearerSetupComplete, ue, bs, "rb");
  add(MessageName::kInitialContextSetupRequest, ctl, bs, next());
  add(MessageName::kInitialContextSetupResponse, bs, ctl, next());
  add(MessageName::kAttachComplete, ue, bs, next());
  add(MessageName::kAttachComplete, bs, ctl, next());
  add(MessageName::kModifyBearerRequest, ctl, sgw, next());
  add(MessageName::kModifyBearerResponse, sgw, ctl, next(), mark_attached);
  return steps;
}

std::vector<World::Step> World::handover_steps(ProcedureKind kind, NodeId ue, NodeId target, bool bridging) {
  require_attached(ue);
  const NodeId s = ues_.at(ue).serving_bs;
  if (target.kind != NodeKind::kEnbBs || !topology_.contains(target)) {
    throw Error(ErrorCode::kPrecondition, topo::to_string(target) + " is not a base station");
  }
  if (target == s) throw Error(ErrorCode::kPrecondition, "target is the serving base station");
  const NodeId ctl = topology_.controller();
  const NodeId gw = topology_.gateway();
  const int sc = config_.params.control_bytes;
  std::vector<Step> steps;
  auto add = [&](MessageName n, NodeId from, NodeId to, std::string label, std::function<void()> hook = {}) {
    steps.push_back(Step{n, from, to, std::move(label), sc, std::move(hook)});
  };
  auto detach = [this, ue, target] {
    detach_at_ = sim_.now();
    switch_radio(ue, target);
  };
  auto relocate_bearer = [this, ue, target, gw] {
    bearers_.establish(ue, topology_.sgw_for(target), gw, teids_);
    commit_at_ = sim_.now();
  };
  const Address inner = ues_.at(ue).inner.value_or(Address{});

  switch (kind) {
    case ProcedureKind::kX2Ho4g: {
      const NodeId sgw_t = topology_.sgw_for(target);
      add(MessageName::kHandoverRequest, s, target, "1");
      add(MessageName::kHandoverAcknowledgment, target, s, "1", detach);
      add(MessageName::kPathSwitchRequest, target, ctl, "2");
      add(MessageName::kCreateSessionRequest, ctl, sgw_t, "3");
      add(MessageName::kModifyBearerRequest, sgw_t, gw, "4", relocate_bearer);
      add(MessageName::kModifyBearerResponse, gw, sgw_t, "4");
      add(MessageName::kCreateSessionResponse, sgw_t, ctl, "5");
      add(MessageName::kPathSwitchResponse, ctl, target, "6");
      add(MessageName::kReleaseResources, ctl, s, "7");
      break;
    }
    case ProcedureKind::kS1Ho4g: {
      const NodeId sgw_t = topology_.sgw_for(target);
      add(MessageName::kHandoverRequired, s, ctl, "1");
      add(MessageName::kHandoverRequest, ctl, target, "2");
      add(MessageName::kHandoverAcknowledgment, target, ctl, "3");
      add(MessageName::kHandoverCommand, ctl, s, "4", detach);
      add(MessageName::kHandoverNotify, s, ctl, "5");
      add(MessageName::kModifyBearerRequest, ctl, sgw_t, "6");
      add(MessageName::kModifyBearerRequest, sgw_t, gw, "7", relocate_bearer);
      add(MessageName::kModifyBearerResponse, gw, sgw_t, "7");
      add(MessageName::kModifyBearerResponse, sgw_t, ctl, "8");
      add(MessageName::kReleaseResources, ctl, s, "9");
      break;
    }
    case ProcedureKind::kInterGwHoIcna: {
      if (bridging) {
        auto it = bridges_.find(ue);
        if (it != bridges_.end() && it->second.active) {
          throw Error(ErrorCode::kInvalidState, topo::to_string(ue) + " already has an active bridge");
        }
      }
      add(MessageName::kHandoverRequest, s, target, "1");
      add(MessageName::kHandoverAcknowledgment, target, s, "1", [this, ue, s, target, bridging, detach] {
        if (bridging) {
          auto& b = bridges_[ue];
          if (b.active) throw Error(ErrorCode::kInvalidState, topo::to_string(ue) + " already has an active bridge");
          b = GreBridge{next_gre_key_++, s, target, true};
          bridge_log_.push_back(BridgeEvent{sim_.now().ms(), ue, b.key, true});
        }
        detach();
      });
      add(MessageName::kPathSwitchRequest, target, ctl, "2.a",
          [this, inner, target] { bindings_.update_serving(inner, topology_.address_of(target)); });
      add(MessageName::kPathModifyRequest, ctl, gw, "3", [this, inner, target] {
        gateway_routes_[inner] = topology_.address_of(target);
        commit_at_ = sim_.now();
      });
      add(MessageName::kPathModifyResponse, gw, ctl, "3");
      add(MessageName::kPathSwitchResponse, ctl, target, "2.b");
      add(MessageName::kReleaseResources, target, s, "4", [this, ue] {
        auto it = bridges_.find(ue);
        if (it != bridges_.end() && it->second.active) {
          it->second.active = false;
          bridge_log_.push_back(BridgeEvent{sim_.now().ms(), ue, it->second.key, false});
        }
      });
      break;
    }
    case ProcedureKind::kIntraGwHoIcna:
      add(MessageName::kHandoverRequired, s, ctl, "1.a");
      add(MessageName::kHandoverRequest, ctl, target, "2.a");
      add(MessageName::kHandoverAcknowledgment, target, ctl, "2.b",
          [this, inner, target] { bindings_.update_serving(inner, topology_.address_of(target)); });
      add(MessageName::kHandoverCommand, ctl, s, "1.b", detach);
      add(MessageName::kModifyBearerRequest, ctl, gw, "3", [this, inner, target] {
        gateway_routes_[inner] = topology_.address_of(target);
        commit_at_ = sim_.now();
      });
      add(MessageName::kModifyBearerResponse, gw, ctl, "3");
      add(MessageName::kReleaseResources, ctl, s, "4");
      break;
    default:
      throw Error(ErrorCode::kInvalidKind, std::string(to_string(kind)) + " is not a handover");
  }
  return steps;
}

std::vector<World::Step> World::gateway_round_trip_steps(NodeId ue) {
  const NodeId bs = ues_.at(ue).serving_bs;
  const int sd = config_.params.data_bytes;
  std::vector<NodeId> hops;
  if (topology_.arch() == Arch::kIcna) {
    hops = {ue, bs, topology_.gateway(), bs, ue};
  } else {
    const NodeId sgw = topology_.sgw_for(bs);
    hops = {ue, bs, sgw, topology_.gateway(), sgw, bs, ue};
  }
  std::vector<Step> steps;
  for (std::size_t i = 1; i < hops.size(); ++i) {
    steps.push_back(Step{MessageName::kDataPacket, hops[i - 1], hops[i], "data", sd, {}});
  }
  return steps;
}

void World::require_arch(Arch arch, ProcedureKind kind) const {
  if (topology_.arch() != arch) {
    throw Error(ErrorCode::kInvalidScenario, std::string(to_string(kind)) + " needs a " +
                                                 std::string(topo::to_string(arch)) + " topology");
  }
}

void World::require_attached(NodeId ue) const {
  if (!this->ue(ue).attached) throw Error(ErrorCode::kInvalidState, topo::to_string(ue) + " is not attached");
}

NodeId World::default_target(NodeId ue) const {
  const NodeId s = this->ue(ue).serving_bs;
  const int n_bs = static_cast<int>(topology_.nodes_of(NodeKind::kEnbBs).size());
  if (n_bs < 2) throw Error(ErrorCode::kPrecondition, "handover needs at least two base stations");
  return NodeId{NodeKind::kEnbBs, s.index + 1 < n_bs ? s.index + 1 : s.index - 1};
}

void World::switch_radio(NodeId ue, NodeId target) {
  topology_.attach_radio(ue, target);
  ues_.at(ue).serving_bs = target;
}

Transcript World::run_procedure(ProcedureKind kind, const ProcedureOptions& opts) {
  if (!is_data(kind)) require_arch(arch_of(kind), kind);
  Transcript t;
  const auto i0 = injected_;
  const auto d0 = delivered_;
  const auto drops0 = drops_.size();
  detach_at_.reset();
  commit_at_.reset();
  {
    RecordingGuard guard(recording_, record_unscripted_, &t, true);
    if (kind == ProcedureKind::kAttach4g || kind == ProcedureKind::kAttachIcna) {
      run_script(attach_steps(opts.ue, opts.scope));
    } else if (is_handover(kind)) {
      const NodeId target = opts.target_bs.value_or(default_target(opts.ue));
      run_script(handover_steps(kind, opts.ue, target, opts.bridging));
    } else {
      run_data(kind, opts);
    }
  }
  return finish_transcript(std::move(t), i0, d0, drops0);
}

Transcript World::run_total_transmission(NodeId ue) {
  Transcript t;
  {
    RecordingGuard guard(recording_, record_unscripted_, &t, true);
    auto steps = attach_steps(ue, Scope::kClosedForm);
    auto data = gateway_round_trip_steps(ue);
    steps.insert(steps.end(), std::make_move_iterator(data.begin()), std::make_move_iterator(data.end()));
    run_script(std::move(steps));
  }
  return finish_transcript(std::move(t), injected_, delivered_, drops_.size());
}

Transcript World::handover_with_traffic(const TrafficOptions& opts) {
  require_arch(Arch::kIcna, ProcedureKind::kInterGwHoIcna);
  if (!(opts.rate_per_ms >= 0.0) || !(opts.flow_duration_ms > 0.0) || !(opts.trigger_after_ms >= 0.0)) {
    throw Error(ErrorCode::kPrecondition, "traffic needs a non-negative rate and a positive duration");
  }
  if (!ue(opts.ue).attached) {
    RecordingGuard guard(recording_, record_unscripted_, nullptr, true);
    run_script(attach_steps(opts.ue, Scope::kClosedForm));
  }
  const NodeId target = opts.target_bs.value_or(default_target(opts.ue));
  queued_script_ = handover_steps(ProcedureKind::kInterGwHoIcna, opts.ue, target, opts.bridging);

  Transcript t;
  const auto i0 = injected_;
  const auto d0 = delivered_;
  const auto drops0 = drops_.size();
  detach_at_.reset();
  commit_at_.reset();
  {
    RecordingGuard guard(recording_, record_unscripted_, &t, false);
    const auto start = sim_.now();
    const NodeId host = topology_.internet_host();
    if (opts.rate_per_ms > 0.0) {
      flow_ = Flow{host, *ues_.at(opts.ue).inner, topology_.address_of(host),
                   sim::SimTime::from_ms(1.0 / opts.rate_per_ms),
                   start + sim::SimTime::from_ms(opts.flow_duration_ms), true};
      sim_.schedule(start, sim::Timer{host, "flow"});
    }
    sim_.schedule(start + sim::SimTime::from_ms(opts.trigger_after_ms),
                  sim::Timer{ues_.at(opts.ue).serving_bs, "handover"});
    sim_.run();
    flow_.reset();
    if (!script_ || !script_->done) throw Error(ErrorCode::kInvalidState, "handover did not complete");
  }
  return finish_transcript(std::move(t), i0, d0, drops0);
}

// ---------------------------------------------------------------------------
// User plane

std::vector<std::uint8_t> World::make_payload() {
  const std::uint64_t id = next_packet_id_++;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(config_.params.data_bytes));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = i < kIdBytes ? static_cast<std::uint8_t>(id >> (8 * (kIdBytes - 1 - i))) : static_cast<std::uint8_t>(i);
  }
  return out;
}

void World::run_data(ProcedureKind kind, const ProcedureOptions& opts) {
  require_attached(opts.ue);
  awaiting_delivery_ = true;
  switch (kind) {
    case ProcedureKind::kDataMhIh:
      inject_from_ue(opts.ue, topology_.address_of(topology_.internet_host()));
      break;
    case ProcedureKind::kDataMhMh: {
      const NodeId peer = opts.peer_ue.value_or(NodeId{NodeKind::kUe, 1});
      if (peer == opts.ue) throw Error(ErrorCode::kPrecondition, "peer is the sending UE");
      require_attached(peer);
      inject_from_ue(opts.ue, *ues_.at(peer).inner);
      break;
    }
    case ProcedureKind::kDataIhMh:
      inject_from_host(*ues_.at(opts.ue).inner);
      break;
    default:
      throw Error(ErrorCode::kInvalidKind, std::string(to_string(kind)) + " is not a data procedure");
  }
  while (awaiting_delivery_ && sim_.step()) {
  }
  awaiting_delivery_ = false;
}

void World::inject_from_ue(NodeId ue, Address dst) {
  const auto& ctx = ues_.at(ue);
  auto ip = wire::make_ip_packet(ctx.inner->value, dst.value, make_payload());
  ++injected_;
  sim::Packet p;
  p.kind = sim::PacketKind::kData;
  p.name = "DataPacket";
  p.message = static_cast<int>(MessageName::kDataPacket);
  p.from = ue;
  p.to = ctx.serving_bs;
  p.size_bytes = config_.params.data_bytes;
  p.id = next_packet_id_++;
  p.frame = std::move(ip);
  const auto path = route(ue, ctx.serving_bs);
  sim_.transmit(std::move(p), path);
}

void World::inject_from_host(Address dst_inner) {
  const NodeId host = topology_.internet_host();
  auto ip = wire::make_ip_packet(topology_.address_of(host).value, dst_inner.value, make_payload());
  ++injected_;
  forward(host, topology_.gateway(), wire::Scheme::kNone, {}, ip);
}

void World::forward(NodeId from, NodeId to, wire::Scheme scheme, const wire::Addressing& addressing,
                    const std::vector<std::uint8_t>& payload) {
  sim::Packet p;
  p.kind = sim::PacketKind::kData;
  p.name = "DataPacket";
  p.message = static_cast<int>(MessageName::kDataPacket);
  p.from = from;
  p.to = to;
  p.size_bytes = config_.params.data_bytes;
  p.id = next_packet_id_++;
  p.scheme = scheme;
  p.frame = scheme == wire::Scheme::kNone ? payload
                                          : wire::encapsulate(scheme, addressing, payload, config_.outer).encode();
  const auto path = route(from, to);
  sim_.transmit(std::move(p), path);
}

void World::deliver_to_ue(NodeId bs, NodeId ue, const std::vector<std::uint8_t>& ip_packet) {
  forward(bs, ue, wire::Scheme::kNone, {}, ip_packet);
}

void World::delivered(const sim::Packet& packet, sim::SimTime sent) {
  record(packet, sent);
  ++delivered_;
  awaiting_delivery_ = false;
}

void World::drop(NodeId at, std::string cause) {
  drops_.push_back(DropRecord{sim_.now().ms(), at, std::move(cause)});
  awaiting_delivery_ = false;
}

std::optional<NodeId> World::ue_with_inner(Address inner) const {
  for (const auto& [id, ctx] : ues_) {
    if (ctx.inner && *ctx.inner == inner) return id;
  }
  return std::nullopt;
}

std::optional<NodeId> World::ue_with_teid(std::uint32_t teid, bool uplink) const {
  for (const auto& [id, b] : bearers_.entries()) {
    if ((uplink ? b.teid_uplink : b.teid_downlink) == teid) return id;
  }
  return std::nullopt;
}

void World::on_data(const sim::Packet& packet, sim::SimTime sent) {
  const NodeId at = packet.to;
  switch (packet.scheme) {
    case wire::Scheme::kNone:
      if (at.kind == NodeKind::kUe || at.kind == NodeKind::kInternetHost) {
        delivered(packet, sent);
        return;
      }
      record(packet, sent);
      ingress(at, packet.frame);
      return;

    case wire::Scheme::kIpInIpIcna: {
      record(packet, sent);
      auto d = wire::decapsulate(packet.scheme, packet.frame, config_.outer);
      if (d.addressing.outer_dst != topology_.address_of(at).value) {
        drop(at, "misrouted");
        return;
      }
      auto ip = wire::make_ip_packet(*d.addressing.inner_src, *d.addressing.inner_dst, d.payload);
      if (at.kind == NodeKind::kEnbBs) {
        bs_downlink(at, ip);
      } else {
        ingress(at, ip);
      }
      return;
    }

    case wire::Scheme::kGtp4g: {
      record(packet, sent);
      auto d = wire::decapsulate(packet.scheme, packet.frame, config_.outer);
      const std::uint32_t teid = *d.addressing.teid;
      if (at.kind == NodeKind::kSgw) {
        if (packet.from.kind == NodeKind::kEnbBs) {
          auto ue = ue_with_teid(teid, true);
          if (!ue) return drop(at, "unknown-teid");
          const auto& b = bearers_.lookup(*ue);
          wire::Addressing a;
          a.outer_src = topology_.address_of(at).value;
          a.outer_dst = topology_.address_of(b.pgw).value;
          a.teid = b.teid_uplink;
          forward(at, b.pgw, wire::Scheme::kGtp4g, a, d.payload);
        } else {
          auto ue = ue_with_teid(teid, false);
          if (!ue) return drop(at, "unknown-teid");
          const NodeId enb = ues_.at(*ue).serving_bs;
          wire::Addressing a;
          a.outer_src = topology_.address_of(at).value;
          a.outer_dst = topology_.address_of(enb).value;
          a.teid = teid;
          forward(at, enb, wire::Scheme::kGtp4g, a, d.payload);
        }
      } else if (at.kind == NodeKind::kPgw) {
        if (!ue_with_teid(teid, true)) return drop(at, "unknown-teid");
        ingress(at, d.payload);
      } else {
        auto ue = ue_with_teid(teid, false);
        if (!ue) return drop(at, "unknown-teid");
        if (topology_.radio_bs(*ue) != at) return drop(at, "ue-detached");
        deliver_to_ue(at, *ue, d.payload);
      }
      return;
    }

    case wire::Scheme::kGreHandover: {
      record(packet, sent);
      auto d = wire::decapsulate(packet.scheme, packet.frame, config_.outer);
      auto ip = wire::parse_ip_packet(d.payload);
      auto ue = ue_with_inner(Address{ip.dst});
      if (!ue) return drop(at, "unknown-ue");
      auto it = bridges_.find(*ue);
      if (it == bridges_.end() || it->second.key != *d.addressing.gre_key || it->second.target_bs != at) {
        return drop(at, "unknown-gre-key");
      }
      if (topology_.radio_bs(*ue) != at) return drop(at, "ue-detached");
      deliver_to_ue(at, *ue, d.payload);
      return;
    }
  }
}

void World::ingress(NodeId at, const std::vector<std::uint8_t>& ip_packet) {
  const auto ip = wire::parse_ip_packet(ip_packet);
  const Address dst{ip.dst};
  const Address here = topology_.address_of(at);

  if (topology_.arch() == Arch::kEpc4g) {
    if (at.kind == NodeKind::kEnbBs) {
      auto ue = ue_with_inner(Address{ip.src});
      if (!ue || !bearers_.contains(*ue)) return drop(at, "no-bearer");
      const auto& b = bearers_.lookup(*ue);
      wire::Addressing a;
      a.outer_src = here.value;
      a.outer_dst = topology_.address_of(b.sgw).value;
      a.teid = b.teid_uplink;
      return forward(at, b.sgw, wire::Scheme::kGtp4g, a, ip_packet);
    }
    // PGW
    if (dst.space() == topo::AddressSpace::kExternal) {
      auto host = topology_.node_at(dst);
      if (!host) return drop(at, "no-route");
      return forward(at, *host, wire::Scheme::kNone, {}, ip_packet);
    }
    auto ue = ue_with_inner(dst);
    if (!ue || !bearers_.contains(*ue)) return drop(at, "unknown-ue");
    const auto& b = bearers_.lookup(*ue);
    wire::Addressing a;
    a.outer_src = here.value;
    a.outer_dst = topology_.address_of(b.sgw).value;
    a.teid = b.teid_downlink;
    return forward(at, b.sgw, wire::Scheme::kGtp4g, a, ip_packet);
  }

  auto ipinip_to = [&](NodeId next, Address outer_dst) {
    wire::Addressing a;
    a.outer_src = here.value;
    a.outer_dst = outer_dst.value;
    a.inner_src = ip.src;
    a.inner_dst = ip.dst;
    forward(at, next, wire::Scheme::kIpInIpIcna, a, ip.payload);
  };

  if (at.kind == NodeKind::kCgw) {
    if (dst.space() == topo::AddressSpace::kExternal) {
      auto host = topology_.node_at(dst);
      if (!host) return drop(at, "no-route");
      return forward(at, *host, wire::Scheme::kNone, {}, ip_packet);
    }
    auto it = gateway_routes_.find(dst);
    if (it == gateway_routes_.end()) return resolve_then_forward(at, dst, ip_packet);
    auto bs = topology_.node_at(it->second);
    if (!bs) return drop(at, "no-route");
    return ipinip_to(*bs, it->second);
  }

  // ICNA base station, uplink from a UE.
  if (topo::classify_destination(at, dst) == topo::Destination::kExternal) {
    const NodeId gw = topology_.gateway();
    return ipinip_to(gw, topology_.address_of(gw));
  }
  auto peer = ue_with_inner(dst);
  if (peer && topology_.radio_bs(*peer) == at) return deliver_to_ue(at, *peer, ip_packet);
  auto cached = bs_cache_.find({at, dst});
  if (cached == bs_cache_.end()) return resolve_then_forward(at, dst, ip_packet);
  auto bs = topology_.node_at(cached->second);
  if (!bs) return drop(at, "no-route");
  ipinip_to(*bs, cached->second);
}

void World::bs_downlink(NodeId bs, const std::vector<std::uint8_t>& ip_packet) {
  const auto ip = wire::parse_ip_packet(ip_packet);
  auto ue = ue_with_inner(Address{ip.dst});
  if (!ue) return drop(bs, "unknown-ue");
  if (topology_.radio_bs(*ue) == bs) return deliver_to_ue(bs, *ue, ip_packet);
  auto it = bridges_.find(*ue);
  if (it == bridges_.end() || it->second.source_bs != bs) return drop(bs, "ue-detached-no-bridge");
  if (!it->second.active) return drop(bs, "bridge-released");
  wire::Addressing a;
  a.outer_src = topology_.address_of(bs).value;
  a.outer_dst = topology_.address_of(it->second.target_bs).value;
  a.gre_key = it->second.key;
  forward(bs, it->second.target_bs, wire::Scheme::kGreHandover, a, ip_packet);
}

void World::resolve_then_forward(NodeId resolver, Address dst_inner, std::vector<std::uint8_t> ip_packet) {
  auto& p = pending_[{resolver, dst_inner}];
  p.packets.push_back(std::move(ip_packet));
  if (p.query_outstanding) return;
  p.query_outstanding = true;
  sim::Packet q;
  q.kind = sim::PacketKind::kControl;
  q.name = "LocationQuery";
  q.message = static_cast<int>(MessageName::kLocationQuery);
  q.from = resolver;
  q.to = topology_.controller();
  q.size_bytes = config_.params.control_bytes;
  q.id = next_packet_id_++;
  put32(q.frame, dst_inner.value);
  const auto path = route(q.from, q.to);
  sim_.transmit(std::move(q), path);
}

void World::on_location_query(const sim::Packet& packet) {
  const Address inner{get32(packet.frame, 0)};
  sim::Packet r;
  r.kind = sim::PacketKind::kControl;
  r.name = "LocationResponse";
  r.message = static_cast<int>(MessageName::kLocationResponse);
  r.from = packet.to;
  r.to = packet.from;
  r.size_bytes = config_.params.control_bytes;
  r.id = next_packet_id_++;
  put32(r.frame, inner.value);
  if (bindings_.contains(inner)) {
    r.frame.push_back(1);
    put32(r.frame, topo::uce_lookup(bindings_, inner).value);
  } else {
    r.frame.push_back(0);
    put32(r.frame, 0);
  }
  const auto path = route(r.from, r.to);
  sim_.transmit(std::move(r), path);
}

void World::on_location_response(const sim::Packet& packet) {
  const NodeId resolver = packet.to;
  const Address inner{get32(packet.frame, 0)};
  const bool found = packet.frame.at(4) != 0;
  const Address serving{get32(packet.frame, 5)};
  if (found) {
    if (resolver.kind == NodeKind::kCgw) {
      // A path update that landed first is newer than this answer.
      gateway_routes_.try_emplace(inner, serving);
    } else {
      bs_cache_[{resolver, inner}] = serving;
    }
  }
  auto node = pending_.extract({resolver, inner});
  if (node.empty()) return;
  for (auto& ip : node.mapped().packets) {
    if (found) {
      ingress(resolver, ip);
    } else {
      drop(resolver, "unknown-ue");
    }
  }
}

// ---------------------------------------------------------------------------

Transcript run_procedure(ProcedureKind kind, const WorldConfig& config, const ProcedureOptions& opts) {
  World w(config);
  if (is_handover(kind) || is_data(kind)) {
    ProcedureOptions attach = opts;
    const auto ak = attach_kind(w.arch());
    w.run_procedure(ak, attach);
    if (kind == ProcedureKind::kDataMhMh) {
      attach.ue = opts.peer_ue.value_or(NodeId{NodeKind::kUe, 1});
      w.run_procedure(ak, attach);
    }
  }
  return w.run_procedure(kind, opts);
}

std::vector<double> run_handover_chain(Arch arch, int handovers, const WorldConfig& base, double interval_ms) {
  if (handovers < 1) throw Error(ErrorCode::kPrecondition, "need at least one handover");
  if (!(interval_ms >= 0.0)) throw Error(ErrorCode::kPrecondition, "negative handover interval");
  WorldConfig config = base;
  config.topology.arch = arch;
  config.topology.n_bs = handovers + 1;
  config.topology.n_ue = 1;
  World w(config);
  ProcedureOptions opts;
  opts.scope = Scope::kClosedForm;
  w.run_procedure(attach_kind(arch), opts);
  const auto kind = arch == Arch::kEpc4g ? ProcedureKind::kX2Ho4g : ProcedureKind::kInterGwHoIcna;
  std::vector<double> out;
  for (int i = 1; i <= handovers; ++i) {
    auto& engine = w.simulator();
    engine.run_until(engine.now() + sim::SimTime::from_ms(interval_ms));
    opts.target_bs = NodeId{NodeKind::kEnbBs, i};
    out.push_back(w.run_procedure(kind, opts).final_latency_ms);
  }
  return out;
}

}  // namespace corenet::proc
