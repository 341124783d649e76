#include "falconc/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "falconc/audit.hpp"
#include "falconc/autoencoder.hpp"
#include "falconc/boundary.hpp"
#include "falconc/csv.hpp"
#include "falconc/error.hpp"
#include "falconc/feature_pipeline.hpp"
#include "falconc/flow_ingest.hpp"
#include "falconc/model_io.hpp"
#include "falconc/random.hpp"
#include "falconc/sweep.hpp"

namespace falconc::cli {

namespace {

using ojson = nlohmann::ordered_json;

struct Options {
  // ingest
  std::string manifest;
  std::vector<std::string> packets;
  bool aggregate = false;
  double idle_timeout = kDefaultIdleTimeout;
  std::vector<std::string> drop = default_drop_list();
  bool keep_all = false;
  // shared
  std::string out;
  std::string flows;
  std::string model;
  bool benign_only = false;
  std::uint64_t seed = 0;
  // train / sweep
  std::size_t hidden = 80;
  std::size_t latent = 41;
  std::size_t epochs = 100;
  std::size_t batch = 32;
  std::size_t patience = 10;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double min_delta = 1e-5;
  double test_fraction = 0.2;
  bool linear_output = false;
  std::string history;
  // profile
  std::vector<std::string> data;
  std::string summary;
  // calibrate
  std::string mode = "naive";
  double tau = 0.6;
  double gap = 0.3;
  double margin = 0.05;
  double max_width = 0.5;
  std::string train;
  bool guard_malicious = false;
  // label
  std::string boundary;
  // sweep
  std::size_t min_latent = 1;
  std::size_t max_latent = 49;
  std::size_t trials = 5;
  std::size_t window = 5;
  std::size_t threads = 0;
  double holdout = 0.2;
  // audit
  std::string ids_log;
  std::string labels;
  std::string text;
};

void add_train_options(CLI::App* sub, Options& o) {
  sub->add_option("--hidden", o.hidden, "Encoder/decoder hidden width");
  sub->add_option("--epochs", o.epochs, "Maximum training epochs");
  sub->add_option("--lr", o.lr, "ADAM learning rate");
  sub->add_option("--batch", o.batch, "Mini-batch size");
  sub->add_option("--patience", o.patience, "Early-stopping patience (epochs)");
  sub->add_option("--min-delta", o.min_delta, "Minimum loss improvement that resets patience");
  sub->add_option("--beta1", o.beta1, "ADAM beta1");
  sub->add_option("--beta2", o.beta2, "ADAM beta2");
  sub->add_option("--epsilon", o.epsilon, "ADAM epsilon");
  sub->add_flag("--linear-output", o.linear_output, "Drop the ReLU on the output layer");
  sub->add_option("--seed", o.seed, "Seed for every random choice in the run");
  sub->add_option("--flows", o.flows, "Flow CSV")->required();
  sub->add_flag("--benign-only", o.benign_only, "Keep only flows labeled benign");
}

void build(CLI::App& app, Options& o) {
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* ingest = app.add_subcommand("ingest", "Load labeled flow tables or aggregate packets into flows");
  ingest->add_option("--manifest", o.manifest, "JSON manifest of labeled input files");
  ingest->add_option("--packets", o.packets, "Unlabeled packet CSV(s) to aggregate")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  ingest->add_flag("--aggregate", o.aggregate, "Manifest files are packet CSVs");
  ingest->add_option("--idle-timeout", o.idle_timeout, "Flow idle timeout in seconds");
  ingest->add_option("--drop", o.drop, "Extra columns to drop (replaces the default list)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  ingest->add_flag("--keep-all", o.keep_all, "Drop no columns");
  ingest->add_option("--out", o.out, "Output flow CSV")->required();

  auto* train = app.add_subcommand("train", "Train the autoencoder on benign flows");
  add_train_options(train, o);
  train->add_option("--latent", o.latent, "Latent dimension");
  train->add_option("--test-fraction", o.test_fraction, "Held-out benign fraction");
  train->add_option("--history", o.history, "Training curve CSV (default: <out>.history.csv)");
  train->add_option("--out", o.out, "Output model JSON")->required();

  auto* profile = app.add_subcommand("profile", "Per-flow reconstruction error profile");
  profile->add_option("--model", o.model, "Model JSON")->required();
  profile->add_option("--flows", o.flows, "Flow CSV split into seen/unseen groups automatically");
  profile->add_option("--data", o.data, "Explicit TAG=PATH flow CSVs")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  profile->add_option("--summary", o.summary, "Per-tag summary JSON (default: <out>.summary.json)");
  profile->add_option("--out", o.out, "Output profile CSV")->required();

  auto* calibrate = app.add_subcommand("calibrate", "Build a decision boundary");
  calibrate->add_option("--mode", o.mode, "naive or refined")
      ->check(CLI::IsMember({"naive", "refined"}));
  calibrate->add_option("--tau", o.tau, "Benign threshold on reconstruction error");
  calibrate->add_option("--gap", o.gap, "Single-linkage gap for outlier clusters");
  calibrate->add_option("--margin", o.margin, "Padding around carved intervals");
  calibrate->add_option("--max-width", o.max_width, "Widest cluster that may be carved");
  calibrate->add_option("--model", o.model, "Model JSON");
  calibrate->add_option("--train", o.train, "Training flow CSV (benign rows are used)");
  calibrate->add_flag("--guard-malicious", o.guard_malicious,
                      "Drop carved intervals that contain a malicious error from --train");
  calibrate->add_option("--out", o.out, "Output boundary JSON")->required();

  auto* label = app.add_subcommand("label", "Label flows benign or malicious");
  label->add_option("--model", o.model, "Model JSON")->required();
  label->add_option("--boundary", o.boundary, "Boundary JSON")->required();
  label->add_option("--flows", o.flows, "Flow CSV")->required();
  label->add_option("--out", o.out, "Output label CSV")->required();

  auto* sweep = app.add_subcommand("sweep", "Latent dimension sweep");
  add_train_options(sweep, o);
  sweep->add_option("--min-latent", o.min_latent, "Smallest latent dimension");
  sweep->add_option("--max-latent", o.max_latent, "Largest latent dimension");
  sweep->add_option("--trials", o.trials, "Models per latent dimension");
  sweep->add_option("--window", o.window, "Rolling average window");
  sweep->add_option("--holdout", o.holdout, "Held-out benign fraction for scoring");
  sweep->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  sweep->add_option("--summary", o.summary, "Per-dimension summary CSV (default: <out>.summary.csv)");
  sweep->add_option("--out", o.out, "Per-trial CSV")->required();

  auto* audit_cmd = app.add_subcommand("audit", "Compare IDS decisions to flow labels");
  audit_cmd->add_option("--ids-log", o.ids_log, "IDS decision CSV")->required();
  audit_cmd->add_option("--labels", o.labels, "Label CSV from the label subcommand")->required();
  audit_cmd->add_option("--text", o.text, "Write the text summary here instead of stdout");
  audit_cmd->add_option("--out", o.out, "Output audit JSON")->required();
}

std::vector<std::string> reversed(std::vector<std::string> args) {
  std::reverse(args.begin(), args.end());
  return args;
}

CLI::App* selected(CLI::App& app) {
  const auto subs = app.get_subcommands();
  return subs.empty() ? nullptr : subs.front();
}

std::string json_scalar(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

// Turns config entries for options the user left unset into extra argv.
std::vector<std::string> config_args(CLI::App* sub, const nlohmann::json& config,
                                     const std::set<std::string>& given) {
  std::vector<std::string> extra;
  auto apply = [&](const nlohmann::json& section, bool strict) {
    for (const auto& [key, value] : section.items()) {
      if (value.is_object()) continue;
      std::string name = key;
      std::replace(name.begin(), name.end(), '_', '-');
      CLI::Option* opt = sub->get_option_no_throw("--" + name);
      if (!opt) {
        if (strict) throw UsageError("config key '" + key + "' is not an option of " + sub->get_name());
        continue;
      }
      if (given.contains("--" + name)) continue;  // command line wins
      if (opt->get_type_size() == 0) {
        if (value.is_boolean() && value.get<bool>()) extra.push_back("--" + name);
        continue;
      }
      if (value.is_array()) {
        for (const auto& item : value) {
          extra.push_back("--" + name);
          extra.push_back(json_scalar(item));
        }
      } else {
        extra.push_back("--" + name);
        extra.push_back(json_scalar(value));
      }
    }
  };
  apply(config, false);
  if (config.contains(sub->get_name()) && config[sub->get_name()].is_object()) {
    apply(config[sub->get_name()], true);
  }
  return extra;
}

nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  try {
    auto doc = nlohmann::json::parse(in);
    if (!doc.is_object()) throw UsageError("config file must hold a JSON object");
    return doc;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config file is not valid JSON: " + std::string(e.what()));
  }
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << text;
}

std::string with_suffix(const std::string& path, std::string_view suffix) {
  return path + std::string(suffix);
}

// Machine-readable record of one run: resolved options, seeds and outputs.
void write_run_manifest(CLI::App* sub, const Options& o, const ojson& seeds,
                        const std::vector<std::string>& outputs) {
  ojson options = ojson::object();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help") continue;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      if (opt->get_type_size() == 0) options[name] = true;
      else if (results.size() == 1 && opt->get_expected_max() <= 1) options[name] = results.front();
      else options[name] = results;
    } else {
      options[name] = opt->get_default_str();
    }
  }
  const std::string resolved = sub->get_name() + options.dump();
  std::ostringstream id;
  id << std::hex << std::setw(16) << std::setfill('0') << fnv1a(resolved);

  ojson doc;
  doc["run_id"] = id.str();
  doc["subcommand"] = sub->get_name();
  doc["created"] = utc_timestamp();
  doc["options"] = options;
  doc["seed"] = o.seed;
  doc["derived_seeds"] = seeds;
  doc["outputs"] = outputs;
  write_text(o.out + ".run.json", doc.dump(2) + "\n");
}

std::vector<LabeledFlow> load_flow_table(const std::string& path, std::ostream& out) {
  LoadResult loaded = read_flow_csv(path);
  if (loaded.files.front().rows_rejected > 0) {
    out << path << ": rejected " << loaded.files.front().rows_rejected << " malformed rows\n";
  }
  return std::move(loaded.flows);
}

std::vector<LabeledFlow> benign_subset(std::vector<LabeledFlow> flows) {
  std::erase_if(flows, [](const LabeledFlow& f) {
    return !f.label || f.label->traffic_class != TrafficClass::Benign;
  });
  return flows;
}

bool is_benign(const LabeledFlow& f) {
  return f.label && f.label->traffic_class == TrafficClass::Benign;
}

std::string fmt(double v) { return csv::format_double(v); }

// ---------------------------------------------------------------------------

int cmd_ingest(CLI::App* sub, const Options& o, std::ostream& out, std::ostream& err) {
  if (o.manifest.empty() == o.packets.empty()) {
    throw UsageError("ingest needs exactly one of --manifest or --packets");
  }
  LoadResult loaded;
  if (!o.manifest.empty()) {
    const DatasetManifest manifest = load_manifest(o.manifest);
    loaded = o.aggregate ? load_packet_flows(manifest, o.idle_timeout) : load_flows(manifest);
  } else {
    for (const auto& path : o.packets) {
      if (!std::filesystem::exists(path)) throw DataError("missing file: " + path);
      const PacketLoadResult packets = read_packet_csv(path);
      AggregateResult agg = aggregate_packets(packets.packets, o.idle_timeout);
      loaded.files.push_back({path, agg.flows.size(), packets.rows_rejected + agg.rejected_packets});
      for (auto& f : agg.flows) {
        f.flow_id = std::to_string(loaded.flows.size());
        loaded.flows.push_back({std::move(f), std::nullopt});
      }
    }
  }

  std::vector<std::string> warnings;
  const std::vector<std::string> drop = o.keep_all ? std::vector<std::string>{} : o.drop;
  // The default list names NFStream columns that may not exist; only warn
  // about names the user asked for.
  auto flows = drop_unusable_columns(std::move(loaded.flows), drop,
                                     sub->get_option("--drop")->count() ? &warnings : nullptr);
  for (const auto& w : warnings) err << "warning: " << w << "\n";

  for (const auto& f : loaded.files) {
    out << f.path.string() << ": " << f.rows_loaded << " rows loaded, " << f.rows_rejected
        << (o.aggregate || !o.packets.empty() ? " packets rejected\n" : " rows rejected\n");
  }
  write_flow_csv(o.out, flows);
  out << "wrote " << flows.size() << " flows to " << o.out << "\n";
  write_run_manifest(sub, o, ojson::object(), {o.out});
  return kExitOk;
}

int cmd_train(CLI::App* sub, Options& o, std::ostream& out) {
  auto flows = load_flow_table(o.flows, out);
  if (o.benign_only) flows = benign_subset(std::move(flows));
  if (flows.size() < 3) throw DataError("training needs at least three flows, got " + std::to_string(flows.size()));

  const SplitConfig split_config{o.test_fraction, derive_seed(o.seed, "split")};
  const SplitIndices split = split_indices(flows.size(), split_config);
  std::vector<LabeledFlow> train_flows;
  for (std::size_t i : split.train) train_flows.push_back(flows[i]);

  ModelFile model;
  model.encoding = fit_encoding(train_flows);
  FeatureMatrix encoded = apply_encoding(model.encoding, train_flows);
  model.standardizer = fit_standardizer(encoded.rows);
  const FeatureMatrix train_matrix = standardize(model.standardizer, std::move(encoded));

  const std::size_t d = train_matrix.width();
  const Architecture arch{d, o.hidden, o.latent, o.linear_output};
  TrainConfig& tc = model.train_config;
  tc.max_epochs = o.epochs;
  tc.learning_rate = o.lr;
  tc.batch_size = o.batch;
  tc.beta1 = o.beta1;
  tc.beta2 = o.beta2;
  tc.epsilon = o.epsilon;
  tc.early_stop_patience = o.patience;
  tc.early_stop_min_delta = o.min_delta;
  tc.seed = derive_seed(o.seed, "train");

  TrainResult fit = train(train_matrix, arch, tc);
  model.params = std::move(fit.params);
  model.history = std::move(fit.history);
  model.metadata.seed = o.seed;
  model.metadata.created = utc_timestamp();
  model.metadata.feature_count = d;
  model.metadata.split = split_config;
  for (const auto& f : train_flows) model.metadata.training_flow_ids.push_back(f.flow.flow_id);
  save_model(o.out, model);

  const std::string history_path = o.history.empty() ? with_suffix(o.out, ".history.csv") : o.history;
  std::ostringstream hist;
  csv::write_row(hist, {"epoch", "loss"});
  for (std::size_t e = 0; e < model.history.losses.size(); ++e) {
    csv::write_row(hist, {std::to_string(e + 1), fmt(model.history.losses[e])});
  }
  write_text(history_path, hist.str());

  out << "features d=" << d << ", train=" << split.train.size() << ", held out=" << split.test.size()
      << "\n";
  out << "epochs run=" << model.history.stopped_epoch << " (" << to_string(model.history.stop_reason)
      << "), best epoch=" << model.history.best_epoch
      << ", best loss=" << fmt(model.history.losses[model.history.best_epoch - 1]) << "\n";
  write_run_manifest(sub, o, {{"split", split_config.seed}, {"train", tc.seed}}, {o.out, history_path});
  return kExitOk;
}

std::vector<NamedDataset> auto_tagged(const ModelFile& model, const std::vector<LabeledFlow>& flows) {
  const std::set<std::string> seen(model.metadata.training_flow_ids.begin(),
                                   model.metadata.training_flow_ids.end());
  const bool have_split = !seen.empty();
  std::vector<std::pair<std::string, std::vector<LabeledFlow>>> groups = {
      {have_split ? "seen_benign" : "benign", {}},
      {have_split ? "unseen_benign" : "benign_other", {}},
      {have_split ? "unseen_malicious" : "malicious", {}},
      {"unlabeled", {}}};
  for (const auto& f : flows) {
    if (!f.label) groups[3].second.push_back(f);
    else if (!is_benign(f)) groups[2].second.push_back(f);
    else if (!have_split || seen.contains(f.flow.flow_id)) groups[0].second.push_back(f);
    else groups[1].second.push_back(f);
  }
  std::vector<NamedDataset> out;
  for (auto& [tag, group] : groups) {
    if (!group.empty()) out.emplace_back(tag, model.prepare(group));
  }
  return out;
}

int cmd_profile(CLI::App* sub, const Options& o, std::ostream& out) {
  if (o.flows.empty() && o.data.empty()) throw UsageError("profile needs --flows or --data");
  const ModelFile model = load_model(o.model);
  std::vector<NamedDataset> datasets;
  if (!o.flows.empty()) datasets = auto_tagged(model, load_flow_table(o.flows, out));
  for (const auto& spec : o.data) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--data expects TAG=PATH, got '" + spec + "'");
    datasets.emplace_back(spec.substr(0, eq), model.prepare(load_flow_table(spec.substr(eq + 1), out)));
  }
  const ErrorProfile profile = profile_errors(model.params, datasets);

  std::ostringstream csv_out;
  csv::write_row(csv_out, {"tag", "flow_id", "class", "error"});
  for (const auto& s : profile.samples) {
    csv::write_row(csv_out, {s.tag, s.row_id, s.label ? std::string(to_string(s.label->traffic_class)) : "",
                             fmt(s.error)});
  }
  write_text(o.out, csv_out.str());

  ojson summary = ojson::array();
  for (const auto& t : profile.summaries) {
    summary.push_back({{"tag", t.tag}, {"count", t.count}, {"min", t.min}, {"mean", t.mean},
                       {"max", t.max}, {"p50", t.p50}, {"p90", t.p90}, {"p95", t.p95}, {"p99", t.p99}});
    out << std::left << std::setw(18) << t.tag << " n=" << t.count << " min=" << fmt(t.min)
        << " mean=" << fmt(t.mean) << " max=" << fmt(t.max) << "\n";
  }
  const std::string summary_path = o.summary.empty() ? with_suffix(o.out, ".summary.json") : o.summary;
  write_text(summary_path, summary.dump(2) + "\n");
  write_run_manifest(sub, o, ojson::object(), {o.out, summary_path});
  return kExitOk;
}

int cmd_calibrate(CLI::App* sub, const Options& o, std::ostream& out) {
  DecisionBoundary boundary;
  std::optional<ErrorProfile> training_profile;
  if (o.mode == "naive") {
    boundary = calibrate_naive(o.tau);
  } else {
    if (o.model.empty() || o.train.empty()) throw UsageError("refined calibration needs --model and --train");
    const ModelFile model = load_model(o.model);
    const auto flows = load_flow_table(o.train, out);
    const std::set<std::string> seen(model.metadata.training_flow_ids.begin(),
                                     model.metadata.training_flow_ids.end());
    std::vector<LabeledFlow> benign;
    std::vector<LabeledFlow> malicious;
    for (const auto& f : flows) {
      if (is_benign(f)) benign.push_back(f);
      else if (f.label) malicious.push_back(f);
    }
    // Restrict to the model's own training rows when the file contains them.
    std::vector<LabeledFlow> training;
    for (const auto& f : benign) {
      if (seen.contains(f.flow.flow_id)) training.push_back(f);
    }
    if (training.empty()) training = benign;
    if (training.empty()) throw DataError(o.train + " holds no benign flows to calibrate on");

    std::vector<NamedDataset> sets = {{"train", model.prepare(training)}};
    training_profile = profile_errors(model.params, sets);

    std::vector<double> guard;
    if (o.guard_malicious && !malicious.empty()) {
      guard = reconstruction_errors(model.params, model.prepare(malicious).rows);
    }
    boundary = calibrate_refined(training_profile->samples,
                                 {o.tau, o.gap, o.margin, o.max_width}, guard);
  }
  save_boundary(o.out, boundary);

  out << (boundary.kind == BoundaryKind::Naive ? "naive" : "refined") << " boundary, benign intervals:";
  for (const auto& iv : boundary.benign_intervals) out << " [" << fmt(iv.lo) << ", " << fmt(iv.hi) << "]";
  out << "\n";
  if (training_profile) {
    const MetricsReport naive = evaluate(calibrate_naive(o.tau), *training_profile);
    const MetricsReport refined = evaluate(boundary, *training_profile);
    out << "benign training accuracy: naive=" << fmt(naive.benign_accuracy)
        << " refined=" << fmt(refined.benign_accuracy) << "\n";
  }
  write_run_manifest(sub, o, ojson::object(), {o.out});
  return kExitOk;
}

int cmd_label(CLI::App* sub, const Options& o, std::ostream& out) {
  const ModelFile model = load_model(o.model);
  const DecisionBoundary boundary = load_boundary(o.boundary);
  const auto flows = load_flow_table(o.flows, out);
  const std::vector<NamedDataset> sets = {{"label", model.prepare(flows)}};
  const ErrorProfile profile = profile_errors(model.params, sets);
  const auto labels = label_samples(boundary, profile.samples);
  write_label_csv(o.out, labels);

  const auto malicious = std::count_if(labels.begin(), labels.end(),
                                       [](const LabelOutcome& l) { return l.predicted == Verdict::Malicious; });
  out << "labeled " << labels.size() << " flows: " << (labels.size() - static_cast<std::size_t>(malicious))
      << " benign, " << malicious << " malicious\n";
  const bool all_truth = !profile.samples.empty() &&
                         std::all_of(profile.samples.begin(), profile.samples.end(),
                                     [](const ProfileSample& s) { return s.label.has_value(); });
  if (all_truth) {
    const MetricsReport m = evaluate(boundary, profile);
    out << "accuracy=" << fmt(m.accuracy) << " precision=" << fmt(m.precision)
        << " recall=" << fmt(m.recall) << " fpr=" << fmt(m.false_positive_rate) << "\n";
  }
  write_run_manifest(sub, o, ojson::object(), {o.out});
  return kExitOk;
}

int cmd_sweep(CLI::App* sub, const Options& o, std::ostream& out, std::ostream& err) {
  auto flows = load_flow_table(o.flows, out);
  if (o.benign_only) flows = benign_subset(std::move(flows));
  if (flows.size() < 4) throw DataError("sweep needs at least four benign flows");
  const EncodingSpec spec = fit_encoding(flows);
  FeatureMatrix encoded = apply_encoding(spec, flows);
  const StandardizerParams standardizer = fit_standardizer(encoded.rows);
  const FeatureMatrix matrix = standardize(standardizer, std::move(encoded));

  SweepConfig config;
  config.min_latent = o.min_latent;
  config.max_latent = o.max_latent;
  config.trials_per_dim = o.trials;
  config.rolling_window = o.window;
  config.hidden_dim = o.hidden;
  config.linear_output = o.linear_output;
  config.holdout_fraction = o.holdout;
  config.threads = o.threads;
  config.train.max_epochs = o.epochs;
  config.train.learning_rate = o.lr;
  config.train.batch_size = o.batch;
  config.train.beta1 = o.beta1;
  config.train.beta2 = o.beta2;
  config.train.epsilon = o.epsilon;
  config.train.early_stop_patience = o.patience;
  config.train.early_stop_min_delta = o.min_delta;
  config.train.seed = derive_seed(o.seed, "sweep");

  const SweepReport report = run_sweep(matrix, config);
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";
  write_text(o.out, sweep_trials_csv_text(report));
  const std::string summary_path = o.summary.empty() ? with_suffix(o.out, ".summary.csv") : o.summary;
  write_text(summary_path, sweep_summary_csv_text(report));
  ojson doc;
  doc["recommended_dim"] = report.recommended_dim;
  doc["grand_mean_of_dim_means"] = report.grand_mean;
  doc["rolling_window"] = report.rolling_window;
  doc["warnings"] = report.warnings;
  const std::string report_path = with_suffix(o.out, ".report.json");
  write_text(report_path, doc.dump(2) + "\n");

  out << "recommended latent dim " << report.recommended_dim << " (grand mean of dim means "
      << fmt(report.grand_mean) << ")\n";
  write_run_manifest(sub, o, {{"sweep", config.train.seed}}, {o.out, summary_path, report_path});
  return kExitOk;
}

int cmd_audit(CLI::App* sub, const Options& o, std::ostream& out) {
  const IdsDecisionLog log = read_ids_log(o.ids_log);
  const auto labels = read_label_csv(o.labels);
  const AuditReport report = audit(log, labels);
  write_text(o.out, audit_json_text(report));
  const std::string text = audit_text_summary(report);
  if (o.text.empty()) out << text;
  else write_text(o.text, text);
  write_run_manifest(sub, o, ojson::object(), {o.out});
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  try {
    // --config is handled here so it may appear anywhere on the line.
    std::vector<std::string> args;
    std::string config_path;
    for (std::size_t i = 0; i < raw_args.size(); ++i) {
      if (raw_args[i] == "--config") {
        if (i + 1 >= raw_args.size()) throw UsageError("--config needs a path");
        config_path = raw_args[++i];
      } else if (raw_args[i].rfind("--config=", 0) == 0) {
        config_path = raw_args[i].substr(9);
      } else {
        args.push_back(raw_args[i]);
      }
    }
    if (config_path.empty()) {
      if (const char* env = std::getenv("FALCONC_CONFIG"); env && *env) config_path = env;
    }

    std::vector<std::string> final_args = args;
    if (!config_path.empty()) {
      const nlohmann::json config = load_config(config_path);
      Options scratch;
      CLI::App probe("falconc");
      build(probe, scratch);
      std::set<std::string> given;
      CLI::App* sub = nullptr;
      for (const auto& a : args) {
        if (a.rfind("--", 0) == 0) given.insert(a.substr(0, a.find('=')));
        else if (!sub) sub = probe.get_subcommand_no_throw(a);
      }
      if (sub) {
        const auto extra = config_args(sub, config, given);
        final_args.insert(final_args.end(), extra.begin(), extra.end());
      }
    }

    Options o;
    CLI::App app("Flow labeling with a benign-trained autoencoder", "falconc");
    build(app, o);
    try {
      app.parse(reversed(final_args));
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << "\n";
      return kExitUsage;
    }

    CLI::App* sub = selected(app);
    const std::string name = sub->get_name();
    if (name == "ingest") return cmd_ingest(sub, o, out, err);
    if (name == "train") return cmd_train(sub, o, out);
    if (name == "profile") return cmd_profile(sub, o, out);
    if (name == "calibrate") return cmd_calibrate(sub, o, out);
    if (name == "label") return cmd_label(sub, o, out);
    if (name == "sweep") return cmd_sweep(sub, o, out, err);
    if (name == "audit") return cmd_audit(sub, o, out);
    err << "error: unknown subcommand " << name << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace falconc::cli
