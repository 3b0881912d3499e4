#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nilm/dataio.hpp"
#include "nilm/errors.hpp"
#include "nilm/log.hpp"
#include "nilm/metrics.hpp"
#include "nilm/mhnet.hpp"
#include "nilm/random.hpp"
#include "nilm/simulator.hpp"
#include "nilm/training.hpp"

namespace nilm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

fs::path with_suffix(const fs::path& path, const std::string& suffix) {
  return fs::path(path.string() + suffix);
}

fs::path replace_extension(const fs::path& path, const std::string& ext) {
  fs::path p = path;
  return p.replace_extension(ext);
}

// Written once before the heavy work and again when the command finishes.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& argv, const fs::path& out)
      : path_(with_suffix(out, ".manifest.json")) {
    doc_ = {{"command", std::move(command)},
            {"argv", argv},
            {"version", NILM_VERSION},
            {"started_at", utc_now()},
            {"status", "running"}};
  }
  json& operator[](const char* key) { return doc_[key]; }
  void write() { write_text(path_, doc_.dump(2) + "\n"); }
  void finish() {
    doc_["finished_at"] = utc_now();
    doc_["status"] = "ok";
    write();
  }

 private:
  fs::path path_;
  json doc_;
};

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Default on-threshold: 5% of the catalog rating, or of the peak when the
// appliance is not in the catalog.
double default_threshold(const std::string& appliance, std::span<const double> series) {
  const auto catalog = sim::default_catalog();
  for (const auto& a : catalog)
    if (a.name == appliance) return 0.05 * a.rated_power;
  double peak = 0.0;
  for (double v : series) peak = std::max(peak, v);
  return peak > 0.0 ? 0.05 * peak : 1.0;
}

double default_scale(const std::string& appliance, std::span<const double> series) {
  for (const auto& a : sim::default_catalog())
    if (a.name == appliance) return a.rated_power;
  double peak = 0.0;
  for (double v : series) peak = std::max(peak, v);
  return peak > 0.0 ? peak : 1.0;
}

std::vector<std::string> appliance_columns(const data::Table& table) {
  std::vector<std::string> names;
  for (const auto& c : table.columns) {
    if (c.size() > 2 && c.ends_with("_p") && c != "agg_p" && !c.ends_with("_pred_p"))
      names.push_back(c.substr(0, c.size() - 2));
  }
  return names;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s.empty() ? "(none)" : s;
}

std::vector<double> q_or_zero(const data::Table& table) {
  if (table.has("agg_q")) return table.column("agg_q");
  return std::vector<double>(table.rows(), 0.0);
}

void require_rows(const data::Table& table, const fs::path& path) {
  if (!table.has("agg_p")) throw UsageError(path.string() + ": missing column 'agg_p'");
  if (table.rows() == 0) throw UsageError(path.string() + ": no data rows");
}

// simulate ------------------------------------------------------------------

struct SimulateArgs {
  fs::path catalog, scenario, out;
  std::size_t duration = 0;
  std::uint64_t seed = 0;
  double noise = 0.0;
  double density = 1.0;
  std::string appliances;
};

std::vector<sim::ApplianceModel> load_catalog(const SimulateArgs& a) {
  std::vector<sim::ApplianceModel> catalog;
  if (a.catalog.empty()) {
    catalog = sim::default_catalog();
  } else {
    const json j = read_json(a.catalog);
    try {
      const json& list = j.is_object() ? j.at("appliances") : j;
      catalog = list.get<std::vector<sim::ApplianceModel>>();
    } catch (const json::exception& e) {
      throw ConfigError(a.catalog.string() + ": " + e.what());
    }
  }
  for (const auto& app : catalog) app.validate();
  if (a.appliances.empty()) return catalog;
  std::vector<sim::ApplianceModel> subset;
  for (const auto& name : split_list(a.appliances))
    subset.push_back(sim::find_appliance(catalog, name));
  return subset;
}

sim::VoltageScenario load_scenario(const SimulateArgs& a, std::uint64_t seed) {
  if (a.scenario.empty()) return sim::VoltageScenario::random_steps(a.duration, seed);
  const json j = read_json(a.scenario);
  try {
    const std::string type = j.value("type", std::string(j.contains("segments") ? "segments" : ""));
    sim::VoltageScenario s;
    if (type == "constant") {
      s = sim::VoltageScenario::constant(a.duration, j.value("level", sim::kNominalVoltage));
    } else if (type == "random_steps") {
      s = sim::VoltageScenario::random_steps(a.duration, j.value("seed", seed),
                                             j.value("min_step_s", std::size_t{60}),
                                             j.value("max_step_s", std::size_t{600}));
    } else if (type == "segments") {
      s = j.get<sim::VoltageScenario>();
      if (s.duration_s == 0) s.duration_s = a.duration;
    } else {
      throw ConfigError(a.scenario.string() + ": unknown scenario type '" + type +
                        "' (constant, random_steps, segments)");
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(a.scenario.string() + ": " + e.what());
  }
}

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  if (a.duration == 0) throw UsageError("--duration must be >= 1");
  const auto apps = load_catalog(a);
  const auto scenario = load_scenario(a, Rng::derive(a.seed, 2).next());

  Manifest manifest("simulate", argv, a.out);
  manifest["config"] = {{"appliances", apps},
                        {"scenario", scenario},
                        {"duration_s", a.duration},
                        {"noise_sigma", a.noise},
                        {"density", a.density}};
  manifest["seeds"] = {{"seed", a.seed}};
  manifest["inputs"] = {{"catalog", a.catalog.string()}, {"scenario", a.scenario.string()}};
  manifest["outputs"] = {{"series", a.out.string()}};
  manifest.write();

  const auto schedule =
      sim::generate_schedule(apps, a.duration, Rng::derive(a.seed, 1).next(), a.density);
  const auto series =
      sim::synthesize(apps, schedule, scenario, a.noise, Rng::derive(a.seed, 3).next());
  sim::write_csv(series, a.out);
  manifest.finish();
  out << "wrote " << series.length() << " rows for " << apps.size() << " appliances to "
      << a.out.string() << "\n";
  return kExitOk;
}

// train ---------------------------------------------------------------------

struct TrainArgs {
  fs::path data, config, out;
  std::string appliance;
  std::uint64_t seed = 0;
};

struct TrainingData {
  std::vector<double> p, q, target;
  std::vector<std::uint8_t> valid;
};

TrainingData load_training_data(const TrainArgs& a) {
  TrainingData d;
  if (fs::is_directory(a.data)) {
    auto rec = data::load_ukdale_house(a.data, a.appliance);
    d.p = std::move(rec.aggregate_p);
    d.q = std::move(rec.aggregate_q);
    d.target = std::move(rec.appliance_p);
    d.valid = std::move(rec.valid);
    return d;
  }
  const data::Table table = data::read_table(a.data);
  require_rows(table, a.data);
  std::string column = a.appliance + "_p";
  if (!table.has(column)) column = a.appliance;
  if (!table.has(column) || column == "agg_p" || column == "t")
    throw UsageError(a.data.string() + ": no column for appliance '" + a.appliance +
                     "'; available appliances: " + join(appliance_columns(table)));
  d.p = table.column("agg_p");
  d.q = q_or_zero(table);
  d.target = table.column(column);
  return d;
}

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  json cfg = a.config.empty() ? json::object() : read_json(a.config);
  if (!cfg.is_object()) throw ConfigError(a.config.string() + ": expected a JSON object");
  const TrainingData d = load_training_data(a);

  MhNetConfig model_cfg;
  train::TrainConfig train_cfg;
  data::WindowSpec spec;
  try {
    const json model_j = cfg.value("model", json::object());
    model_cfg = model_j.get<MhNetConfig>();
    if (!model_j.contains("output_scale")) model_cfg.output_scale = default_scale(a.appliance, d.target);
    train_cfg = cfg.value("train", json::object()).get<train::TrainConfig>();
    const json win = cfg.value("windows", json::object());
    spec.stride = win.value("stride", spec.stride);
    spec.on_threshold = win.value("on_threshold", 0.0);
    spec.min_on_s = win.value("min_on_s", spec.min_on_s);
  } catch (const json::exception& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  model_cfg.validate();
  if (spec.on_threshold <= 0.0) spec.on_threshold = default_threshold(a.appliance, d.target);
  spec.input_len = model_cfg.input_len;
  spec.output_len = model_cfg.output_len;
  train_cfg.seed = Rng::derive(a.seed, 2).next();
  train_cfg.checkpoint_path = a.out;
  train_cfg.validate();
  ensure_parent(a.out);

  Manifest manifest("train", argv, a.out);
  json train_j = train_cfg;
  manifest["config"] = {{"model", model_cfg},
                        {"train", train_j},
                        {"windows",
                         {{"stride", spec.stride},
                          {"on_threshold", spec.on_threshold},
                          {"min_on_s", spec.min_on_s}}},
                        {"appliance", a.appliance}};
  manifest["seeds"] = {{"seed", a.seed}};
  manifest["inputs"] = {{"data", a.data.string()}, {"config", a.config.string()}};
  const fs::path report_path = with_suffix(a.out, ".report.json");
  const fs::path epochs_path = with_suffix(a.out, ".epochs.csv");
  manifest["outputs"] = {{"checkpoint", a.out.string()},
                         {"report", report_path.string()},
                         {"epochs", epochs_path.string()}};
  manifest.write();

  const auto windows = data::make_windows(d.p, d.q, d.target, spec, std::nullopt, d.valid,
                                          a.appliance);
  if (windows.empty()) throw UsageError("train: no usable windows in " + a.data.string());
  MhNetModel model = MhNetModel::build(model_cfg, Rng::derive(a.seed, 1).next());
  model.set_metadata({a.appliance, windows.norm, spec.on_threshold, spec.min_on_s});
  const train::TrainReport report = train::train(model, windows, train_cfg);

  json report_j = report.to_json();
  report_j["appliance"] = a.appliance;
  report_j.erase("wall_time_s");
  write_text(report_path, report_j.dump(2) + "\n");
  write_text(epochs_path, report.epochs_csv());
  manifest["wall_time_s"] = report.wall_time_s;
  manifest.finish();
  out << a.appliance << ": best epoch " << report.best_epoch << ", validation loss "
      << report.best_val_loss << " (mean predictor " << report.baseline_val_loss << ")\n";
  return kExitOk;
}

// disaggregate --------------------------------------------------------------

struct DisaggregateArgs {
  fs::path data, models, out;
};

struct LoadedModel {
  std::string name;
  fs::path path;
  MhNetModel model;
};

std::vector<LoadedModel> load_models(const fs::path& where) {
  std::vector<fs::path> files;
  if (fs::is_directory(where)) {
    for (const auto& e : fs::directory_iterator(where))
      if (e.is_regular_file() && e.path().extension() == ".mhn") files.push_back(e.path());
  } else if (fs::exists(where)) {
    files.push_back(where);
  } else {
    throw IoError("no such model path: " + where.string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError(where.string() + ": no .mhn checkpoints");
  std::vector<LoadedModel> models;
  for (const auto& f : files) {
    MhNetModel m = load(f);
    std::string name = m.metadata().appliance.empty() ? f.stem().string() : m.metadata().appliance;
    models.push_back({std::move(name), f, std::move(m)});
  }
  return models;
}

int cmd_disaggregate(const DisaggregateArgs& a, const std::vector<std::string>& argv,
                     std::ostream& out) {
  const data::Table table = data::read_table(a.data);
  require_rows(table, a.data);
  const auto models = load_models(a.models);
  const std::size_t T = table.rows();

  std::size_t first = 0;
  std::size_t last = T;
  for (const auto& m : models) {
    const auto& c = m.model.config();
    if (T < c.input_len)
      throw UsageError(a.data.string() + ": " + std::to_string(T) + " rows is shorter than the " +
                       m.name + " model window of " + std::to_string(c.input_len));
    first = std::max(first, c.margin());
    last = std::min(last, c.margin() + T - c.input_len + c.output_len);
  }

  const fs::path long_path = replace_extension(a.out, ".long.csv");
  Manifest manifest("disaggregate", argv, a.out);
  json model_list = json::array();
  for (const auto& m : models)
    model_list.push_back({{"appliance", m.name},
                          {"checkpoint", m.path.string()},
                          {"config", m.model.config()},
                          {"metadata", m.model.metadata()}});
  manifest["config"] = {{"models", model_list}};
  manifest["seeds"] = json::object();
  manifest["inputs"] = {{"data", a.data.string()}, {"models", a.models.string()}};
  manifest["outputs"] = {{"series", a.out.string()}, {"long", long_path.string()}};
  manifest["input_rows"] = T;
  manifest["margin"] = first;
  manifest["output_rows"] = last - first;
  manifest["row_note"] =
      "output rows = input rows minus the leading and trailing window margins";
  manifest.write();

  const auto& p = table.column("agg_p");
  const auto q = q_or_zero(table);
  std::vector<std::vector<double>> power;
  std::vector<std::vector<std::uint8_t>> onoff;
  for (const auto& m : models) {
    const auto pred = metrics::predict_series(m.model, p, q);
    std::vector<double> cropped(pred.power.begin() + static_cast<std::ptrdiff_t>(first - pred.first),
                                pred.power.begin() + static_cast<std::ptrdiff_t>(last - pred.first));
    const double thr = m.model.metadata().on_threshold;
    std::vector<std::uint8_t> on;
    if (thr > 0.0) {
      on = metrics::onoff_from_power(cropped, thr, m.model.metadata().min_on_s);
    } else {
      for (std::size_t k = first; k < last; ++k) on.push_back(pred.onoff_prob[k - pred.first] > 0.5);
    }
    power.push_back(std::move(cropped));
    onoff.push_back(std::move(on));
  }

  std::string wide;
  for (std::size_t c = 0; c < table.columns.size(); ++c) wide += (c ? "," : "") + table.columns[c];
  for (const auto& m : models) wide += "," + m.name + "_pred_p," + m.name + "_pred_on";
  wide += "\n";
  std::string lng = "t,appliance,series,value\n";
  const bool has_t = table.has("t");
  for (std::size_t r = first; r < last; ++r) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      const double v = table.values[c][r];
      wide += c ? "," : "";
      wide += table.columns[c].ends_with("_on") ? std::to_string(static_cast<int>(v)) : fmt6(v);
    }
    const std::string t = has_t ? fmt6(table.column("t")[r]) : std::to_string(r);
    for (std::size_t k = 0; k < models.size(); ++k) {
      const double v = power[k][r - first];
      const int on = onoff[k][r - first];
      wide += "," + fmt6(v) + "," + std::to_string(on);
      lng += t + "," + models[k].name + ",pred_p," + fmt6(v) + "\n";
      lng += t + "," + models[k].name + ",pred_on," + std::to_string(on) + "\n";
      if (table.has(models[k].name + "_p"))
        lng += t + "," + models[k].name + ",actual_p," +
               fmt6(table.column(models[k].name + "_p")[r]) + "\n";
    }
    wide += "\n";
  }
  write_text(a.out, wide);
  write_text(long_path, lng);
  manifest.finish();
  out << "wrote " << (last - first) << " of " << T << " rows (margin " << first << ") for "
      << models.size() << " models to " << a.out.string() << "\n";
  return kExitOk;
}

// evaluate ------------------------------------------------------------------

struct EvaluateArgs {
  fs::path pred, truth, out;
  std::size_t sae_period = metrics::kDefaultSaePeriod;
  double on_threshold = 0.0;
  std::size_t min_on = 3;
};

int cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  const data::Table pred = data::read_table(a.pred);
  const data::Table truth = data::read_table(a.truth);
  if (pred.rows() == 0 || truth.rows() == 0) throw UsageError("evaluate: empty input");

  // Row mapping pred -> truth, by timestamp when both carry one.
  std::vector<std::size_t> rows(pred.rows());
  if (pred.has("t") && truth.has("t")) {
    const auto& tp = pred.column("t");
    const auto& tt = truth.column("t");
    std::size_t j = 0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
      while (j < tt.size() && tt[j] < tp[i]) ++j;
      if (j == tt.size() || tt[j] != tp[i])
        throw UsageError("evaluate: prediction timestamp " + fmt6(tp[i]) +
                         " has no matching truth row");
      rows[i] = j;
    }
  } else {
    if (pred.rows() != truth.rows())
      throw UsageError("evaluate: series lengths differ (" + std::to_string(pred.rows()) +
                       " vs " + std::to_string(truth.rows()) + ")");
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  }

  std::vector<std::pair<std::string, std::string>> targets;  // name, pred column
  for (const auto& c : pred.columns)
    if (c.ends_with("_pred_p")) targets.emplace_back(c.substr(0, c.size() - 7), c);
  if (targets.empty())
    for (const auto& name : appliance_columns(pred)) targets.emplace_back(name, name + "_p");
  if (targets.empty()) throw UsageError(a.pred.string() + ": no prediction columns");

  Manifest manifest("evaluate", argv, a.out);
  const fs::path csv_path = replace_extension(a.out, ".csv");
  manifest["config"] = {{"sae_period", a.sae_period},
                        {"on_threshold", a.on_threshold},
                        {"min_on_s", a.min_on}};
  manifest["seeds"] = json::object();
  manifest["inputs"] = {{"pred", a.pred.string()}, {"truth", a.truth.string()}};
  manifest["outputs"] = {{"json", a.out.string()}, {"csv", csv_path.string()}};
  manifest.write();

  metrics::EvalReport report;
  report.dataset = a.truth.filename().string();
  report.protocol = "evaluate";
  report.sae_period = a.sae_period;
  json thresholds = json::object();
  for (const auto& [name, column] : targets) {
    const std::string truth_col = truth.has(name + "_p") ? name + "_p" : name;
    if (!truth.has(truth_col))
      throw UsageError(a.truth.string() + ": no truth column for '" + name +
                       "'; available appliances: " + join(appliance_columns(truth)));
    const auto& full = truth.column(truth_col);
    std::vector<double> actual(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) actual[i] = full[rows[i]];
    metrics::Thresholds thr;
    thr.on_threshold = a.on_threshold > 0.0 ? a.on_threshold : default_threshold(name, full);
    thr.min_on_s = a.min_on;
    thr.sae_period = a.sae_period;
    thresholds[name] = thr.on_threshold;
    report.rows.push_back(metrics::evaluate_series(name, actual, pred.column(column), thr));
  }
  manifest["resolved_thresholds"] = thresholds;

  write_text(a.out, report.to_json().dump(2) + "\n");
  write_text(csv_path, report.to_csv());
  manifest.finish();
  out << report.to_csv();
  return kExitOk;
}

int cmd_replay(const fs::path& manifest_path, std::ostream& out, std::ostream& err) {
  const json m = read_json(manifest_path);
  if (!m.contains("argv") || !m["argv"].is_array())
    throw ConfigError(manifest_path.string() + ": manifest has no argv");
  return run(m["argv"].get<std::vector<std::string>>(), out, err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Non-intrusive load monitoring toolkit", "nilm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", NILM_VERSION);

  SimulateArgs sim_a;
  auto* sim_cmd = app.add_subcommand("simulate", "Synthesize an aggregate meter series");
  sim_cmd->add_option("--catalog", sim_a.catalog, "Appliance catalog JSON (default: built-in)");
  sim_cmd->add_option("--scenario", sim_a.scenario, "Voltage scenario JSON (default: random steps)");
  sim_cmd->add_option("--duration", sim_a.duration, "Length in seconds")->required();
  sim_cmd->add_option("--seed", sim_a.seed, "Random seed");
  sim_cmd->add_option("--out", sim_a.out, "Output CSV")->required();
  sim_cmd->add_option("--noise", sim_a.noise, "Aggregate noise sigma in watts");
  sim_cmd->add_option("--density", sim_a.density, "Usage density in (0, 1]");
  sim_cmd->add_option("--appliances", sim_a.appliances, "Comma-separated subset of the catalog");

  TrainArgs train_a;
  auto* train_cmd = app.add_subcommand("train", "Train one appliance model");
  train_cmd->add_option("--data", train_a.data, "Meter CSV or UK-DALE house directory")->required();
  train_cmd->add_option("--appliance", train_a.appliance, "Target appliance")->required();
  train_cmd->add_option("--config", train_a.config, "JSON with model/train/windows sections");
  train_cmd->add_option("--out", train_a.out, "Checkpoint path")->required();
  train_cmd->add_option("--seed", train_a.seed, "Random seed");

  DisaggregateArgs dis_a;
  auto* dis_cmd = app.add_subcommand("disaggregate", "Predict appliance power from an aggregate");
  dis_cmd->add_option("--data", dis_a.data, "CSV with agg_p (and optionally agg_q)")->required();
  dis_cmd->add_option("--models", dis_a.models, "Directory of .mhn checkpoints")->required();
  dis_cmd->add_option("--out", dis_a.out, "Output CSV")->required();

  EvaluateArgs eval_a;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against ground truth");
  eval_cmd->add_option("--pred", eval_a.pred, "Prediction CSV")->required();
  eval_cmd->add_option("--truth", eval_a.truth, "Ground-truth CSV")->required();
  eval_cmd->add_option("--sae-period", eval_a.sae_period, "SAE period in samples");
  eval_cmd->add_option("--out", eval_a.out, "Report JSON (a CSV is written next to it)")->required();
  eval_cmd->add_option("--on-threshold", eval_a.on_threshold, "On threshold in watts");
  eval_cmd->add_option("--min-on", eval_a.min_on, "Minimum on/off run in seconds");

  fs::path replay_manifest;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  replay_cmd->add_option("manifest", replay_manifest, "Manifest JSON")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  log::configure_from_env();
  try {
    if (*sim_cmd) return cmd_simulate(sim_a, args, out);
    if (*train_cmd) return cmd_train(train_a, args, out);
    if (*dis_cmd) return cmd_disaggregate(dis_a, args, out);
    if (*eval_cmd) return cmd_evaluate(eval_a, args, out);
    if (*replay_cmd) return cmd_replay(replay_manifest, out, err);
  } catch (const LoadError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace nilm::cli
