#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace falconc {

using Ipv4 = std::uint32_t;

std::optional<Ipv4> parse_ipv4(std::string_view text);
std::string format_ipv4(Ipv4 address);

struct Endpoint {
  Ipv4 ip = 0;
  std::uint16_t port = 0;

  auto operator<=>(const Endpoint&) const = default;
};

// One packet as exported by a capture front end. IPs stay textual here;
// they are validated during aggregation.
struct PacketRecord {
  double timestamp = 0.0;
  std::string src_ip;
  std::string dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t protocol = 0;
  std::uint64_t length = 0;
  std::uint8_t tcp_flags = 0;

  auto operator<=>(const PacketRecord&) const = default;
};

// Bidirectional 5-tuple with the lower (ip, port) endpoint first, so both
// directions of a conversation produce the same key.
struct FlowKey {
  Endpoint lower;
  Endpoint upper;
  std::uint8_t protocol = 0;

  static FlowKey canonical(Endpoint a, Endpoint b, std::uint8_t protocol);

  auto operator<=>(const FlowKey&) const = default;
};

struct DirectionStats {
  std::uint64_t packets = 0;
  std::uint64_t bytes = 0;
  double min_size = 0.0;
  double max_size = 0.0;
  double mean_size = 0.0;

  bool operator==(const DirectionStats&) const = default;
};

struct TcpFlagCounts {
  std::uint64_t syn = 0;
  std::uint64_t ack = 0;
  std::uint64_t psh = 0;
  std::uint64_t rst = 0;
  std::uint64_t fin = 0;
  std::uint64_t urg = 0;

  bool operator==(const TcpFlagCounts&) const = default;
};

// Non-core dataset columns. Cells that parse as finite numbers are stored
// as doubles, anything else (including empty cells) as text.
using FeatureValue = std::variant<double, std::string>;

struct FlowRecord {
  std::string flow_id;
  Endpoint src;  // endpoint that sent the first packet ("forward")
  Endpoint dst;
  std::uint8_t protocol = 0;
  double start_time = 0.0;
  double end_time = 0.0;
  double duration = 0.0;
  DirectionStats fwd;
  DirectionStats bwd;
  TcpFlagCounts flags;
  std::map<std::string, FeatureValue> extra_features;

  FlowKey key() const { return FlowKey::canonical(src, dst, protocol); }

  bool operator==(const FlowRecord&) const = default;
};

enum class TrafficClass { Benign, Recon, DoS };
enum class ChargingState { Charging, Idle };
enum class Testbed { EVSE_A, EVSE_B };

std::string_view to_string(TrafficClass c);
std::string_view to_string(ChargingState s);
std::string_view to_string(Testbed t);
TrafficClass parse_traffic_class(std::string_view text);
ChargingState parse_charging_state(std::string_view text);
Testbed parse_testbed(std::string_view text);

struct ScenarioLabel {
  TrafficClass traffic_class = TrafficClass::Benign;
  std::string attack = "none";
  ChargingState state = ChargingState::Idle;

  // Benign iff attack is "none"; attack names must belong to their class.
  void validate() const;

  bool operator==(const ScenarioLabel&) const = default;
};

// Attack names recognised for each class. Comparison ignores case, spaces,
// hyphens and underscores.
std::span<const std::string_view> recon_attacks();
std::span<const std::string_view> dos_attacks();
std::optional<TrafficClass> attack_class(std::string_view attack);

struct ManifestEntry {
  std::filesystem::path path;
  ScenarioLabel label;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  Testbed testbed = Testbed::EVSE_A;

  void validate() const;
};

// Accepts either a JSON array of {"path","class","attack","state"} or an
// object {"testbed": ..., "entries": [...]}. Relative paths resolve against
// the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(std::string_view json_text,
                               const std::filesystem::path& base_dir = {});

struct LabeledFlow {
  FlowRecord flow;
  std::optional<ScenarioLabel> label;

  bool operator==(const LabeledFlow&) const = default;
};

struct FileReport {
  std::filesystem::path path;
  std::size_t rows_loaded = 0;
  std::size_t rows_rejected = 0;
};

struct LoadResult {
  std::vector<LabeledFlow> flows;
  std::vector<FileReport> files;
};

struct AggregateResult {
  std::vector<FlowRecord> flows;
  std::size_t accepted_packets = 0;
  std::size_t rejected_packets = 0;
};

inline constexpr double kDefaultIdleTimeout = 120.0;

// Groups packets into bidirectional flows on the canonical 5-tuple. A gap
// longer than idle_timeout between consecutive packets of one key starts a
// new flow. Input order does not matter. Flow ids are the 0-based position
// in the returned start-time order.
AggregateResult aggregate_packets(std::span<const PacketRecord> packets,
                                  double idle_timeout = kDefaultIdleTimeout);

struct PacketLoadResult {
  std::vector<PacketRecord> packets;
  std::size_t rows_rejected = 0;
};

PacketLoadResult read_packet_csv(const std::filesystem::path& path);

// Reads one flow table. Core columns are matched case-insensitively,
// including the usual NFStream names; everything else lands in
// extra_features. Label columns (label_class, label_attack, label_state)
// are optional. Rows with unparseable core cells are rejected and counted.
LoadResult read_flow_csv(const std::filesystem::path& path);

// Loads every manifest file and stamps its rows with the entry's label.
// Files must share a header. Flows without a flow_id column get sequential
// ids across the whole manifest.
LoadResult load_flows(const DatasetManifest& manifest);

// Same as load_flows but each manifest file is a packet CSV that is
// aggregated into flows first.
LoadResult load_packet_flows(const DatasetManifest& manifest,
                             double idle_timeout = kDefaultIdleTimeout);

void write_flow_csv(const std::filesystem::path& path, std::span<const LabeledFlow> flows);
std::string flow_csv_text(std::span<const LabeledFlow> flows);

// Core field and label column names (never droppable, never extras).
std::span<const std::string_view> core_columns();
bool is_core_column(std::string_view name);

// The ID column, MAC address/OUI columns and guessed-application columns.
std::vector<std::string> default_drop_list();

// Removes the named extra columns. Unknown names add a warning; naming a
// core field throws UsageError.
std::vector<LabeledFlow> drop_unusable_columns(std::vector<LabeledFlow> flows,
                                               std::span<const std::string> drop_list,
                                               std::vector<std::string>* warnings = nullptr);

}  // namespace falconc
