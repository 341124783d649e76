#include "falconc/flow_ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "falconc/csv.hpp"
#include "falconc/error.hpp"

namespace falconc {

// ---------------------------------------------------------------------------
// Addresses and keys

std::optional<Ipv4> parse_ipv4(std::string_view text) {
  Ipv4 address = 0;
  int octets = 0;
  std::size_t pos = 0;
  while (octets < 4) {
    const std::size_t dot = text.find('.', pos);
    const std::string_view part =
        text.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos);
    if (part.empty() || part.size() > 3) return std::nullopt;
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (ec != std::errc{} || ptr != part.data() + part.size() || value > 255) return std::nullopt;
    address = (address << 8) | value;
    ++octets;
    if (dot == std::string_view::npos) break;
    pos = dot + 1;
    if (octets == 4) return std::nullopt;  // trailing ".x"
  }
  if (octets != 4) return std::nullopt;
  return address;
}

std::string format_ipv4(Ipv4 address) {
  return std::to_string((address >> 24) & 0xff) + '.' + std::to_string((address >> 16) & 0xff) +
         '.' + std::to_string((address >> 8) & 0xff) + '.' + std::to_string(address & 0xff);
}

FlowKey FlowKey::canonical(Endpoint a, Endpoint b, std::uint8_t protocol) {
  if (b < a) std::swap(a, b);
  return FlowKey{a, b, protocol};
}

// ---------------------------------------------------------------------------
// Labels

namespace {

constexpr std::array<std::string_view, 6> kReconAttacks = {
    "TCP Port Scan",   "Service Version Detection", "OS Fingerprinting",
    "Aggressive Scan", "SYN Stealth Scan",          "Vulnerability Scan"};

constexpr std::array<std::string_view, 8> kDosAttacks = {
    "UDP Flood",  "ICMP Flood", "PSHACK Flood",       "ICMP Fragmentation",
    "TCP Flood",  "SYN Flood",  "SynonymousIP Flood", "Slowloris Scan"};

std::string normalize_name(std::string_view text) {
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

}  // namespace

std::span<const std::string_view> recon_attacks() { return kReconAttacks; }
std::span<const std::string_view> dos_attacks() { return kDosAttacks; }

std::optional<TrafficClass> attack_class(std::string_view attack) {
  const std::string wanted = normalize_name(attack);
  for (auto name : kReconAttacks) {
    if (normalize_name(name) == wanted) return TrafficClass::Recon;
  }
  for (auto name : kDosAttacks) {
    if (normalize_name(name) == wanted) return TrafficClass::DoS;
  }
  return std::nullopt;
}

std::string_view to_string(TrafficClass c) {
  switch (c) {
    case TrafficClass::Benign: return "benign";
    case TrafficClass::Recon: return "recon";
    case TrafficClass::DoS: return "dos";
  }
  return "?";
}

std::string_view to_string(ChargingState s) {
  return s == ChargingState::Charging ? "charging" : "idle";
}

std::string_view to_string(Testbed t) { return t == Testbed::EVSE_A ? "EVSE-A" : "EVSE-B"; }

TrafficClass parse_traffic_class(std::string_view text) {
  const std::string n = normalize_name(text);
  if (n == "benign") return TrafficClass::Benign;
  if (n == "recon") return TrafficClass::Recon;
  if (n == "dos") return TrafficClass::DoS;
  throw DataError("unknown traffic class: '" + std::string(text) + "'");
}

ChargingState parse_charging_state(std::string_view text) {
  const std::string n = normalize_name(text);
  if (n == "charging") return ChargingState::Charging;
  if (n == "idle") return ChargingState::Idle;
  throw DataError("unknown charging state: '" + std::string(text) + "'");
}

Testbed parse_testbed(std::string_view text) {
  const std::string n = normalize_name(text);
  if (n == "evsea" || n == "a") return Testbed::EVSE_A;
  if (n == "evseb" || n == "b") return Testbed::EVSE_B;
  throw DataError("unknown testbed: '" + std::string(text) + "'");
}

void ScenarioLabel::validate() const {
  const bool none = normalize_name(attack) == "none";
  if ((traffic_class == TrafficClass::Benign) != none) {
    throw DataError("label inconsistent: class '" + std::string(to_string(traffic_class)) +
                    "' with attack '" + attack + "'");
  }
  if (none) return;
  const auto known = attack_class(attack);
  if (!known) throw DataError("unknown attack name: '" + attack + "'");
  if (*known != traffic_class) {
    throw DataError("attack '" + attack + "' is not a " +
                    std::string(to_string(traffic_class)) + " attack");
  }
}

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& entry : entries) {
    if (!seen.insert(entry.path.lexically_normal().string()).second) {
      throw DataError("duplicate manifest path: " + entry.path.string());
    }
    entry.label.validate();
  }
}

DatasetManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("manifest is not valid JSON: ") + e.what());
  }
  DatasetManifest manifest;
  const nlohmann::json* entries = &doc;
  if (doc.is_object()) {
    if (doc.contains("testbed")) manifest.testbed = parse_testbed(doc["testbed"].get<std::string>());
    if (!doc.contains("entries")) throw DataError("manifest object lacks an \"entries\" array");
    entries = &doc["entries"];
  }
  if (!entries->is_array()) throw DataError("manifest entries must be a JSON array");
  for (const auto& item : *entries) {
    if (!item.is_object() || !item.contains("path") || !item.contains("class")) {
      throw DataError("manifest entry needs at least \"path\" and \"class\"");
    }
    ManifestEntry entry;
    entry.path = item["path"].get<std::string>();
    if (entry.path.is_relative() && !base_dir.empty()) entry.path = base_dir / entry.path;
    entry.label.traffic_class = parse_traffic_class(item["class"].get<std::string>());
    entry.label.attack = item.value("attack", std::string("none"));
    entry.label.state = parse_charging_state(item.value("state", std::string("idle")));
    manifest.entries.push_back(std::move(entry));
  }
  manifest.validate();
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_manifest(text.str(), path.parent_path());
}

// ---------------------------------------------------------------------------
// Packet aggregation

namespace {

constexpr std::uint8_t kFin = 0x01;
constexpr std::uint8_t kSyn = 0x02;
constexpr std::uint8_t kRst = 0x04;
constexpr std::uint8_t kPsh = 0x08;
constexpr std::uint8_t kAck = 0x10;
constexpr std::uint8_t kUrg = 0x20;

void add_packet(DirectionStats& stats, double size) {
  if (stats.packets == 0) {
    stats.min_size = stats.max_size = size;
  } else {
    stats.min_size = std::min(stats.min_size, size);
    stats.max_size = std::max(stats.max_size, size);
  }
  ++stats.packets;
  stats.bytes += static_cast<std::uint64_t>(size);
}

void finish(DirectionStats& stats) {
  stats.mean_size = stats.packets ? static_cast<double>(stats.bytes) / stats.packets : 0.0;
}

struct ParsedPacket {
  const PacketRecord* record;
  Endpoint src;
  Endpoint dst;
};

}  // namespace

AggregateResult aggregate_packets(std::span<const PacketRecord> packets, double idle_timeout) {
  if (!(idle_timeout > 0.0)) throw UsageError("idle_timeout must be positive");

  AggregateResult result;
  std::vector<ParsedPacket> parsed;
  parsed.reserve(packets.size());
  for (const auto& p : packets) {
    const auto src = parse_ipv4(p.src_ip);
    const auto dst = parse_ipv4(p.dst_ip);
    if (!src || !dst || !std::isfinite(p.timestamp)) {
      ++result.rejected_packets;
      continue;
    }
    parsed.push_back({&p, {*src, p.src_port}, {*dst, p.dst_port}});
  }
  result.accepted_packets = parsed.size();

  // Total order on packet content makes the result independent of input order.
  std::sort(parsed.begin(), parsed.end(), [](const ParsedPacket& a, const ParsedPacket& b) {
    return *a.record < *b.record;
  });

  struct Active {
    std::size_t index;
    double last_seen;
  };
  std::map<FlowKey, Active> active;

  for (const auto& p : parsed) {
    const PacketRecord& rec = *p.record;
    const FlowKey key = FlowKey::canonical(p.src, p.dst, rec.protocol);
    auto it = active.find(key);
    if (it == active.end() || rec.timestamp - it->second.last_seen > idle_timeout) {
      FlowRecord flow;
      flow.src = p.src;
      flow.dst = p.dst;
      flow.protocol = rec.protocol;
      flow.start_time = rec.timestamp;
      result.flows.push_back(std::move(flow));
      it = active.insert_or_assign(key, Active{result.flows.size() - 1, rec.timestamp}).first;
    }
    FlowRecord& flow = result.flows[it->second.index];
    it->second.last_seen = rec.timestamp;
    flow.end_time = rec.timestamp;

    const bool forward = p.src == flow.src && p.dst == flow.dst;
    add_packet(forward ? flow.fwd : flow.bwd, static_cast<double>(rec.length));
    const std::uint8_t f = rec.tcp_flags;
    flow.flags.fin += (f & kFin) != 0;
    flow.flags.syn += (f & kSyn) != 0;
    flow.flags.rst += (f & kRst) != 0;
    flow.flags.psh += (f & kPsh) != 0;
    flow.flags.ack += (f & kAck) != 0;
    flow.flags.urg += (f & kUrg) != 0;
  }

  // Flows were opened in packet order, so they are already sorted by start
  // time; ties are broken by the packet total order above.
  for (std::size_t i = 0; i < result.flows.size(); ++i) {
    auto& flow = result.flows[i];
    flow.duration = flow.end_time - flow.start_time;
    finish(flow.fwd);
    finish(flow.bwd);
    flow.flow_id = std::to_string(i);
  }
  return result;
}

PacketLoadResult read_packet_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read(path);
  constexpr std::array<std::string_view, 8> kColumns = {
      "timestamp", "src_ip", "dst_ip", "src_port", "dst_port", "protocol", "length", "tcp_flags"};
  std::array<std::size_t, 8> idx{};
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    const auto col = table.column(kColumns[i]);
    if (!col) throw DataError(path.string() + ": packet CSV lacks column '" + std::string(kColumns[i]) + "'");
    idx[i] = *col;
  }

  PacketLoadResult result;
  for (const auto& row : table.rows) {
    const auto ts = csv::parse_double(row[idx[0]]);
    const auto sport = csv::parse_int(row[idx[3]]);
    const auto dport = csv::parse_int(row[idx[4]]);
    const auto proto = csv::parse_int(row[idx[5]]);
    const auto length = csv::parse_int(row[idx[6]]);
    const auto flags = row[idx[7]].empty() ? std::optional<long long>(0) : csv::parse_int(row[idx[7]]);
    const bool ok = ts && sport && dport && proto && length && flags && *sport >= 0 &&
                    *sport <= 65535 && *dport >= 0 && *dport <= 65535 && *proto >= 0 &&
                    *proto <= 255 && *length >= 0 && *flags >= 0 && *flags <= 255;
    if (!ok) {
      ++result.rows_rejected;
      continue;
    }
    PacketRecord p;
    p.timestamp = *ts;
    p.src_ip = row[idx[1]];
    p.dst_ip = row[idx[2]];
    p.src_port = static_cast<std::uint16_t>(*sport);
    p.dst_port = static_cast<std::uint16_t>(*dport);
    p.protocol = static_cast<std::uint8_t>(*proto);
    p.length = static_cast<std::uint64_t>(*length);
    p.tcp_flags = static_cast<std::uint8_t>(*flags);
    result.packets.push_back(std::move(p));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Flow tables

namespace {

enum class Core {
  FlowId, SrcIp, DstIp, SrcPort, DstPort, Protocol, StartTime, EndTime, Duration,
  PacketsFwd, PacketsBwd, BytesFwd, BytesBwd,
  MinFwd, MaxFwd, MeanFwd, MinBwd, MaxBwd, MeanBwd,
  Syn, Ack, Psh, Rst, Fin, Urg,
  LabelClass, LabelAttack, LabelState,
  Count
};

constexpr std::size_t kCoreCount = static_cast<std::size_t>(Core::Count);

constexpr std::array<std::string_view, kCoreCount> kCoreNames = {
    "flow_id",     "src_ip",      "dst_ip",       "src_port",    "dst_port",   "protocol",
    "start_time",  "end_time",    "duration",     "packets_fwd", "packets_bwd", "bytes_fwd",
    "bytes_bwd",   "min_ps_fwd",  "max_ps_fwd",   "mean_ps_fwd", "min_ps_bwd", "max_ps_bwd",
    "mean_ps_bwd", "syn_count",   "ack_count",    "psh_count",   "rst_count",  "fin_count",
    "urg_count",   "label_class", "label_attack", "label_state"};

struct Alias {
  std::string_view name;
  Core target;
  double scale;
};

// NFStream column names; times there are in milliseconds.
constexpr std::array<Alias, 18> kAliases = {{
    {"bidirectional_first_seen_ms", Core::StartTime, 1e-3},
    {"bidirectional_last_seen_ms", Core::EndTime, 1e-3},
    {"bidirectional_duration_ms", Core::Duration, 1e-3},
    {"src2dst_packets", Core::PacketsFwd, 1.0},
    {"dst2src_packets", Core::PacketsBwd, 1.0},
    {"src2dst_bytes", Core::BytesFwd, 1.0},
    {"dst2src_bytes", Core::BytesBwd, 1.0},
    {"src2dst_min_ps", Core::MinFwd, 1.0},
    {"src2dst_max_ps", Core::MaxFwd, 1.0},
    {"src2dst_mean_ps", Core::MeanFwd, 1.0},
    {"dst2src_min_ps", Core::MinBwd, 1.0},
    {"dst2src_max_ps", Core::MaxBwd, 1.0},
    {"dst2src_mean_ps", Core::MeanBwd, 1.0},
    {"bidirectional_syn_packets", Core::Syn, 1.0},
    {"bidirectional_ack_packets", Core::Ack, 1.0},
    {"bidirectional_psh_packets", Core::Psh, 1.0},
    {"bidirectional_rst_packets", Core::Rst, 1.0},
    {"bidirectional_fin_packets", Core::Fin, 1.0},
}};

struct Binding {
  std::optional<std::size_t> column;
  double scale = 1.0;
};

struct ColumnMap {
  std::array<Binding, kCoreCount> core;
  std::vector<std::size_t> extra_columns;
};

ColumnMap map_columns(const csv::Table& table, const std::filesystem::path& path) {
  ColumnMap map;
  std::set<std::string> seen;
  for (const auto& name : table.header) {
    if (!seen.insert(csv::to_lower(name)).second) {
      throw DataError(path.string() + ": duplicate column '" + name + "'");
    }
  }
  std::vector<bool> consumed(table.header.size(), false);
  for (std::size_t c = 0; c < kCoreCount; ++c) {
    if (auto col = table.column(kCoreNames[c])) {
      map.core[c] = {col, 1.0};
      consumed[*col] = true;
    }
  }
  for (const auto& alias : kAliases) {
    if (auto col = table.column(alias.name)) {
      auto& binding = map.core[static_cast<std::size_t>(alias.target)];
      if (!binding.column) binding = {col, alias.scale};
      consumed[*col] = true;
    }
  }
  // NFStream's URG counter name does not fit the array above.
  if (auto col = table.column("bidirectional_urg_packets")) {
    auto& binding = map.core[static_cast<std::size_t>(Core::Urg)];
    if (!binding.column) binding = {col, 1.0};
    consumed[*col] = true;
  }
  for (Core required : {Core::SrcIp, Core::DstIp, Core::SrcPort, Core::DstPort, Core::Protocol}) {
    if (!map.core[static_cast<std::size_t>(required)].column) {
      throw DataError(path.string() + ": flow CSV lacks column '" +
                      std::string(kCoreNames[static_cast<std::size_t>(required)]) + "'");
    }
  }
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (!consumed[i]) map.extra_columns.push_back(i);
  }
  return map;
}

FeatureValue parse_feature(const std::string& cell) {
  if (auto v = csv::parse_double(cell)) return *v;
  return cell;
}

// Returns nullopt when the row must be rejected.
std::optional<LabeledFlow> parse_flow_row(const csv::Table& table, const ColumnMap& map,
                                          const std::vector<std::string>& row) {
  auto cell = [&](Core c) -> const std::string* {
    const auto& b = map.core[static_cast<std::size_t>(c)];
    return b.column ? &row[*b.column] : nullptr;
  };
  auto real = [&](Core c, double fallback) -> std::optional<double> {
    const auto* s = cell(c);
    if (!s) return fallback;
    auto v = csv::parse_double(*s);
    if (!v) return std::nullopt;
    return *v * map.core[static_cast<std::size_t>(c)].scale;
  };
  auto count = [&](Core c) -> std::optional<std::uint64_t> {
    const auto* s = cell(c);
    if (!s) return 0;
    auto v = csv::parse_int(*s);
    if (!v || *v < 0) return std::nullopt;
    return static_cast<std::uint64_t>(*v);
  };

  LabeledFlow out;
  FlowRecord& f = out.flow;
  if (const auto* id = cell(Core::FlowId)) f.flow_id = *id;

  const auto src_ip = parse_ipv4(*cell(Core::SrcIp));
  const auto dst_ip = parse_ipv4(*cell(Core::DstIp));
  const auto src_port = csv::parse_int(*cell(Core::SrcPort));
  const auto dst_port = csv::parse_int(*cell(Core::DstPort));
  const auto proto = csv::parse_int(*cell(Core::Protocol));
  if (!src_ip || !dst_ip || !src_port || !dst_port || !proto) return std::nullopt;
  if (*src_port < 0 || *src_port > 65535 || *dst_port < 0 || *dst_port > 65535 || *proto < 0 ||
      *proto > 255) {
    return std::nullopt;
  }
  f.src = {*src_ip, static_cast<std::uint16_t>(*src_port)};
  f.dst = {*dst_ip, static_cast<std::uint16_t>(*dst_port)};
  f.protocol = static_cast<std::uint8_t>(*proto);

  const bool has_times = cell(Core::StartTime) && cell(Core::EndTime);
  const auto start = real(Core::StartTime, 0.0);
  const auto end = real(Core::EndTime, 0.0);
  const auto duration = real(Core::Duration, 0.0);
  if (!start || !end || !duration) return std::nullopt;
  if (has_times) {
    f.start_time = *start;
    f.end_time = *end;
  } else {
    f.start_time = cell(Core::StartTime) ? *start : 0.0;
    f.end_time = f.start_time + *duration;
  }
  if (f.end_time < f.start_time) return std::nullopt;
  f.duration = f.end_time - f.start_time;

  struct Dir {
    DirectionStats& stats;
    Core packets, bytes, min, max, mean;
  };
  for (Dir d : {Dir{f.fwd, Core::PacketsFwd, Core::BytesFwd, Core::MinFwd, Core::MaxFwd, Core::MeanFwd},
                Dir{f.bwd, Core::PacketsBwd, Core::BytesBwd, Core::MinBwd, Core::MaxBwd, Core::MeanBwd}}) {
    const auto packets = count(d.packets);
    const auto bytes = count(d.bytes);
    const auto mn = real(d.min, 0.0);
    const auto mx = real(d.max, 0.0);
    const auto mean = real(d.mean, 0.0);
    if (!packets || !bytes || !mn || !mx || !mean) return std::nullopt;
    if (*mn < 0.0 || *mx < 0.0 || *mean < 0.0) return std::nullopt;
    if (*packets > 0) {
      const double slack = 1e-9 * std::max(1.0, *mx);
      if (*mn > *mean + slack || *mean > *mx + slack) return std::nullopt;
    }
    d.stats = {*packets, *bytes, *mn, *mx, *mean};
  }

  for (auto [core, slot] : {std::pair{Core::Syn, &f.flags.syn}, std::pair{Core::Ack, &f.flags.ack},
                            std::pair{Core::Psh, &f.flags.psh}, std::pair{Core::Rst, &f.flags.rst},
                            std::pair{Core::Fin, &f.flags.fin}, std::pair{Core::Urg, &f.flags.urg}}) {
    const auto v = count(core);
    if (!v) return std::nullopt;
    *slot = *v;
  }

  if (const auto* cls = cell(Core::LabelClass); cls && !cls->empty()) {
    try {
      ScenarioLabel label;
      label.traffic_class = parse_traffic_class(*cls);
      const auto* attack = cell(Core::LabelAttack);
      label.attack = attack && !attack->empty() ? *attack : "none";
      const auto* state = cell(Core::LabelState);
      label.state = state && !state->empty() ? parse_charging_state(*state) : ChargingState::Idle;
      label.validate();
      out.label = std::move(label);
    } catch (const DataError&) {
      return std::nullopt;
    }
  }

  for (std::size_t col : map.extra_columns) {
    f.extra_features.emplace(table.header[col], parse_feature(row[col]));
  }
  return out;
}

LoadResult read_one(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
  const csv::Table table = csv::read(path);
  const ColumnMap map = map_columns(table, path);
  LoadResult result;
  FileReport report{path, 0, 0};
  for (const auto& row : table.rows) {
    if (auto flow = parse_flow_row(table, map, row)) {
      result.flows.push_back(std::move(*flow));
      ++report.rows_loaded;
    } else {
      ++report.rows_rejected;
    }
  }
  result.files.push_back(std::move(report));
  return result;
}

std::vector<std::string> sorted_lower_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string line;
  std::getline(in, line);
  auto header = csv::parse(line).header;
  for (auto& h : header) h = csv::to_lower(h);
  std::sort(header.begin(), header.end());
  return header;
}

void assign_missing_ids(std::vector<LabeledFlow>& flows) {
  for (std::size_t i = 0; i < flows.size(); ++i) {
    if (flows[i].flow.flow_id.empty()) flows[i].flow.flow_id = std::to_string(i);
  }
}

}  // namespace

std::span<const std::string_view> core_columns() { return kCoreNames; }

bool is_core_column(std::string_view name) {
  const std::string lower = csv::to_lower(name);
  for (auto n : kCoreNames) {
    if (n == lower) return true;
  }
  for (const auto& a : kAliases) {
    if (a.name == lower) return true;
  }
  return lower == "bidirectional_urg_packets";
}

LoadResult read_flow_csv(const std::filesystem::path& path) {
  LoadResult result = read_one(path);
  assign_missing_ids(result.flows);
  return result;
}

LoadResult load_flows(const DatasetManifest& manifest) {
  manifest.validate();
  LoadResult result;
  if (manifest.entries.empty()) return result;

  for (const auto& entry : manifest.entries) {
    if (!std::filesystem::exists(entry.path)) throw DataError("missing file: " + entry.path.string());
  }
  const auto reference = sorted_lower_header(manifest.entries.front().path);
  for (const auto& entry : manifest.entries) {
    if (sorted_lower_header(entry.path) != reference) {
      throw DataError("header of " + entry.path.string() + " differs from " +
                      manifest.entries.front().path.string());
    }
  }

  std::vector<std::future<LoadResult>> pending;
  pending.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries) {
    pending.push_back(std::async(std::launch::async, [&entry] { return read_one(entry.path); }));
  }
  for (std::size_t i = 0; i < pending.size(); ++i) {
    LoadResult part = pending[i].get();
    for (auto& flow : part.flows) {
      flow.label = manifest.entries[i].label;
      result.flows.push_back(std::move(flow));
    }
    result.files.push_back(std::move(part.files.front()));
  }
  assign_missing_ids(result.flows);
  return result;
}

LoadResult load_packet_flows(const DatasetManifest& manifest, double idle_timeout) {
  manifest.validate();
  LoadResult result;
  for (const auto& entry : manifest.entries) {
    if (!std::filesystem::exists(entry.path)) throw DataError("missing file: " + entry.path.string());
    const PacketLoadResult packets = read_packet_csv(entry.path);
    AggregateResult agg = aggregate_packets(packets.packets, idle_timeout);
    FileReport report{entry.path, agg.flows.size(), packets.rows_rejected + agg.rejected_packets};
    for (auto& flow : agg.flows) {
      flow.flow_id.clear();
      result.flows.push_back({std::move(flow), entry.label});
    }
    result.files.push_back(std::move(report));
  }
  assign_missing_ids(result.flows);
  return result;
}

std::string flow_csv_text(std::span<const LabeledFlow> flows) {
  std::set<std::string> extras;
  for (const auto& lf : flows) {
    for (const auto& [name, value] : lf.flow.extra_features) extras.insert(name);
  }
  std::vector<std::string> header(kCoreNames.begin(), kCoreNames.end());
  header.insert(header.end(), extras.begin(), extras.end());

  std::ostringstream out;
  csv::write_row(out, header);
  auto num = [](double v) { return csv::format_double(v); };
  auto cnt = [](std::uint64_t v) { return std::to_string(v); };
  for (const auto& lf : flows) {
    const FlowRecord& f = lf.flow;
    std::vector<std::string> row = {
        f.flow_id,
        format_ipv4(f.src.ip),
        format_ipv4(f.dst.ip),
        std::to_string(f.src.port),
        std::to_string(f.dst.port),
        std::to_string(f.protocol),
        num(f.start_time),
        num(f.end_time),
        num(f.duration),
        cnt(f.fwd.packets),
        cnt(f.bwd.packets),
        cnt(f.fwd.bytes),
        cnt(f.bwd.bytes),
        num(f.fwd.min_size),
        num(f.fwd.max_size),
        num(f.fwd.mean_size),
        num(f.bwd.min_size),
        num(f.bwd.max_size),
        num(f.bwd.mean_size),
        cnt(f.flags.syn),
        cnt(f.flags.ack),
        cnt(f.flags.psh),
        cnt(f.flags.rst),
        cnt(f.flags.fin),
        cnt(f.flags.urg),
        lf.label ? std::string(to_string(lf.label->traffic_class)) : std::string{},
        lf.label ? lf.label->attack : std::string{},
        lf.label ? std::string(to_string(lf.label->state)) : std::string{},
    };
    for (const auto& name : extras) {
      const auto it = f.extra_features.find(name);
      if (it == f.extra_features.end()) {
        row.emplace_back();
      } else if (const double* d = std::get_if<double>(&it->second)) {
        row.push_back(num(*d));
      } else {
        row.push_back(std::get<std::string>(it->second));
      }
    }
    csv::write_row(out, row);
  }
  return out.str();
}

void write_flow_csv(const std::filesystem::path& path, std::span<const LabeledFlow> flows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << flow_csv_text(flows);
}

std::vector<std::string> default_drop_list() {
  return {"id",
          "expiration_id",
          "src_mac",
          "src_oui",
          "dst_mac",
          "dst_oui",
          "application_name",
          "application_category_name",
          "application_is_guessed",
          "application_confidence"};
}

std::vector<LabeledFlow> drop_unusable_columns(std::vector<LabeledFlow> flows,
                                               std::span<const std::string> drop_list,
                                               std::vector<std::string>* warnings) {
  for (const auto& name : drop_list) {
    if (is_core_column(name)) throw UsageError("cannot drop core flow field '" + name + "'");
  }
  for (const auto& name : drop_list) {
    const std::string wanted = csv::to_lower(name);
    bool found = false;
    for (auto& lf : flows) {
      auto& extras = lf.flow.extra_features;
      for (auto it = extras.begin(); it != extras.end();) {
        if (csv::to_lower(it->first) == wanted) {
          it = extras.erase(it);
          found = true;
        } else {
          ++it;
        }
      }
    }
    if (!found && warnings) warnings->push_back("column '" + name + "' not present; nothing dropped");
  }
  return flows;
}

}  // namespace falconc
