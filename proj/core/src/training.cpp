#include "nilm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "nilm/errors.hpp"
#include "nilm/log.hpp"
#include "nilm/ops.hpp"
#include "nilm/random.hpp"

namespace nilm::train {

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("train: learning_rate must be finite and >= 0");
  if (!(onoff_loss_weight >= 0.0)) throw ConfigError("train: onoff_loss_weight must be >= 0");
  if (early_stop_patience == 0) throw ConfigError("train: early_stop_patience must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction <= 0.5))
    throw ConfigError("train: validation_fraction must be in (0, 0.5]");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"onoff_loss_weight", c.onoff_loss_weight},
       {"seed", c.seed},
       {"early_stop_patience", c.early_stop_patience},
       {"validation_fraction", c.validation_fraction}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.onoff_loss_weight = j.value("onoff_loss_weight", d.onoff_loss_weight);
  c.seed = j.value("seed", d.seed);
  c.early_stop_patience = j.value("early_stop_patience", d.early_stop_patience);
  c.validation_fraction = j.value("validation_fraction", d.validation_fraction);
}

Tensor loss(const Tensor& gated, const Tensor& onoff_prob, std::span<const double> target_power,
            std::span<const std::uint8_t> target_onoff, double lambda) {
  const std::size_t L = gated.size();
  if (onoff_prob.size() != L || target_power.size() != L || target_onoff.size() != L)
    throw DimensionError("loss: output and target lengths differ");
  const Tensor target({L}, std::vector<double>(target_power.begin(), target_power.end()));
  const Tensor mse = ops::mean(ops::square(ops::sub(gated, target)));
  if (lambda == 0.0) return mse;

  std::vector<double> y(L), not_y(L);
  for (std::size_t i = 0; i < L; ++i) {
    y[i] = target_onoff[i] ? 1.0 : 0.0;
    not_y[i] = 1.0 - y[i];
  }
  const Tensor p = ops::clamp(onoff_prob, kProbabilityClamp, 1.0 - kProbabilityClamp);
  const Tensor log_p = ops::log(p);
  const Tensor log_not_p = ops::log(ops::add(ops::mul(p, -1.0), 1.0));
  const Tensor ll = ops::add(ops::mul(Tensor({L}, std::move(y)), log_p),
                             ops::mul(Tensor({L}, std::move(not_y)), log_not_p));
  const Tensor bce = ops::mul(ops::mean(ll), -1.0);
  return ops::add(mse, ops::mul(bce, lambda));
}

nlohmann::json TrainReport::to_json() const {
  return {{"train_loss", train_loss},
          {"val_loss", val_loss},
          {"best_epoch", best_epoch},
          {"best_val_loss", best_val_loss},
          {"baseline_val_loss", baseline_val_loss},
          {"train_windows", train_windows},
          {"val_windows", val_windows},
          {"early_stopped", early_stopped},
          {"checkpoint", checkpoint_path.string()},
          {"wall_time_s", wall_time_s}};
}

std::string TrainReport::epochs_csv() const {
  std::string out = "epoch,train_loss,val_loss\n";
  char buf[96];
  for (std::size_t e = 0; e < train_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e + 1, train_loss[e],
                  e < val_loss.size() ? val_loss[e] : train_loss[e]);
    out += buf;
  }
  return out;
}

Split chronological_split(const data::WindowSet& windows, double validation_fraction) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ConfigError("split: validation_fraction must be in [0, 1)");
  Split split;
  const std::size_t n = windows.size();
  std::size_t n_val = 0;
  if (validation_fraction > 0.0 && n >= 2)
    n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n))), 1,
        n - 1);
  const std::size_t first_val = n - n_val;
  const std::size_t m = windows.spec.input_len;
  const std::size_t val_start =
      n_val ? windows.windows[first_val].start : std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < first_val; ++i)
    if (windows.windows[i].start + m <= val_start) split.train.push_back(i);
  for (std::size_t i = first_val; i < n; ++i) split.validation.push_back(i);
  return split;
}

double mean_loss(const MhNetModel& model, const data::WindowSet& windows,
                 std::span<const std::size_t> indices, double lambda) {
  if (indices.empty()) return 0.0;
  NoGradGuard no_grad;
  double total = 0.0;
  for (const std::size_t i : indices) {
    const auto& w = windows.windows.at(i);
    const MhNetOutput out = model.forward(w.input_tensor());
    total += loss(out.gated, out.onoff_prob, w.target_power, w.target_onoff, lambda).item();
  }
  return total / static_cast<double>(indices.size());
}

double mean_predictor_loss(const data::WindowSet& windows, std::span<const std::size_t> fit,
                           std::span<const std::size_t> score, double lambda) {
  if (fit.empty() || score.empty()) return 0.0;
  double power = 0.0, on = 0.0, count = 0.0;
  for (const std::size_t i : fit) {
    const auto& w = windows.windows.at(i);
    for (std::size_t u = 0; u < w.target_power.size(); ++u) {
      power += w.target_power[u];
      on += w.target_onoff[u];
      count += 1.0;
    }
  }
  power /= count;
  on /= count;
  NoGradGuard no_grad;
  const std::size_t L = windows.spec.output_len;
  const Tensor gated({L}, power);
  const Tensor prob({L}, on);
  double total = 0.0;
  for (const std::size_t i : score) {
    const auto& w = windows.windows.at(i);
    total += loss(gated, prob, w.target_power, w.target_onoff, lambda).item();
  }
  return total / static_cast<double>(score.size());
}

Adam::Adam(std::vector<Tensor> parameters, double learning_rate, double beta1, double beta2,
           double epsilon)
    : params_(std::move(parameters)), lr_(learning_rate), beta1_(beta1), beta2_(beta2),
      eps_(epsilon) {
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

TrainReport train(MhNetModel& model, const data::WindowSet& windows, const TrainConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto& mc = model.config();
  if (mc.input_len != windows.spec.input_len || mc.output_len != windows.spec.output_len)
    throw DimensionError("train: window geometry does not match the model");

  const Split split = chronological_split(windows, cfg.validation_fraction);
  if (split.train.empty())
    throw UsageError("train: no training windows (" + std::to_string(windows.size()) +
                     " windows before the validation split)");
  const std::span<const std::size_t> val_idx =
      split.validation.empty() ? std::span<const std::size_t>(split.train)
                               : std::span<const std::size_t>(split.validation);

  const double lambda = cfg.onoff_loss_weight;
  TrainReport report;
  report.train_windows = split.train.size();
  report.val_windows = split.validation.size();
  report.baseline_val_loss = mean_predictor_loss(windows, split.train, val_idx, lambda);

  std::vector<Tensor> params;
  for (auto& np : model.parameters()) params.push_back(np.tensor);
  Adam adam(params, cfg.learning_rate);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order = split.train;
  std::vector<double> best = model.flat_parameters();
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_total = 0.0;
    std::size_t batch = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - begin);
      adam.zero_grad();
      for (std::size_t b = begin; b < end; ++b) {
        const auto& w = windows.windows[order[b]];
        const MhNetOutput out = model.forward(w.input_tensor());
        Tensor l = loss(out.gated, out.onoff_prob, w.target_power, w.target_onoff, lambda);
        const double value = l.item();
        if (!std::isfinite(value))
          throw DivergenceError(static_cast<int>(epoch), static_cast<int>(batch),
                                "non-finite training loss at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(batch));
        epoch_total += value;
        ops::mul(l, scale).backward();
      }
      adam.step();
    }
    report.train_loss.push_back(epoch_total / static_cast<double>(order.size()));

    const double val = mean_loss(model, windows, val_idx, lambda);
    if (!std::isfinite(val))
      throw DivergenceError(static_cast<int>(epoch), -1,
                            "non-finite validation loss at epoch " + std::to_string(epoch));
    report.val_loss.push_back(val);
    log::info("epoch " + std::to_string(epoch) + " train " +
              std::to_string(report.train_loss.back()) + " val " + std::to_string(val));

    if (val < best_val) {
      best_val = val;
      best = model.flat_parameters();
      report.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      report.early_stopped = true;
      break;
    }
  }

  model.assign_parameters(best);
  model.zero_grad();
  report.best_val_loss = best_val;
  if (!cfg.checkpoint_path.empty()) {
    save(model, cfg.checkpoint_path);
    report.checkpoint_path = cfg.checkpoint_path;
  }
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string to_string(Protocol p) { return p == Protocol::kConstant ? "constant" : "dynamic"; }

namespace {

std::vector<std::string> resolve_targets(const ProtocolConfig& c) {
  if (c.appliances.empty()) throw ConfigError("protocol: no appliances");
  std::vector<std::string> t = c.targets;
  if (t.empty())
    for (const auto& a : c.appliances) t.push_back(a.name);
  for (const auto& name : t) (void)sim::find_appliance(c.appliances, name);
  return t;
}

metrics::Thresholds thresholds_for(const ProtocolConfig& c, const sim::ApplianceModel& a) {
  metrics::Thresholds thr;
  thr.on_threshold = c.on_threshold_fraction * a.rated_power;
  thr.min_on_s = c.min_on_s;
  thr.sae_period = c.sae_period;
  return thr;
}

}  // namespace

data::WindowSet protocol_windows(const ProtocolConfig& config, const sim::MeterSeries& series,
                                 const std::string& target,
                                 const std::optional<Normalization>& norm, std::size_t stride) {
  const auto& app = sim::find_appliance(config.appliances, target);
  data::WindowSpec spec = config.windows;
  spec.input_len = config.model.input_len;
  spec.output_len = config.model.output_len;
  spec.stride = stride;
  spec.on_threshold = config.on_threshold_fraction * app.rated_power;
  spec.min_on_s = config.min_on_s;
  return data::make_windows(series.aggregate_p, series.aggregate_q,
                            series.appliance_p[series.index_of(target)], spec, norm, {}, target);
}

ProtocolResult run_protocol(const ProtocolConfig& config) {
  config.model.validate();
  config.train.validate();
  const auto targets = resolve_targets(config);

  // Seeds: schedule, train voltage, test schedule, test voltage, noise.
  const std::uint64_t s = config.seed;
  const auto train_schedule = sim::generate_schedule(config.appliances, config.train_duration_s,
                                                     Rng::derive(s, 1).next(), config.density);
  const auto test_schedule = sim::generate_schedule(config.appliances, config.test_duration_s,
                                                    Rng::derive(s, 2).next(), config.density);
  const auto flat = sim::VoltageScenario::constant(config.train_duration_s,
                                                   config.constant_voltage);
  const auto stepped = sim::VoltageScenario::random_steps(
      config.train_duration_s, Rng::derive(s, 3).next(), config.voltage_step_min_s,
      config.voltage_step_max_s);
  const auto test_voltage = sim::VoltageScenario::random_steps(
      config.test_duration_s, Rng::derive(s, 4).next(), config.voltage_step_min_s,
      config.voltage_step_max_s);
  const std::uint64_t noise_seed = Rng::derive(s, 5).next();

  const auto train_const =
      sim::synthesize(config.appliances, train_schedule, flat, config.noise_sigma, noise_seed);
  const auto train_dyn =
      sim::synthesize(config.appliances, train_schedule, stepped, config.noise_sigma, noise_seed);
  const auto test = sim::synthesize(config.appliances, test_schedule, test_voltage,
                                    config.noise_sigma, Rng::derive(s, 6).next());

  ProtocolResult result;
  for (auto* r : {&result.constant_trained, &result.dynamic_trained, &result.mean_baseline}) {
    r->dataset = "synthetic";
    r->seed = s;
    r->sae_period = config.sae_period;
  }
  result.constant_trained.protocol = to_string(Protocol::kConstant);
  result.dynamic_trained.protocol = to_string(Protocol::kDynamic);
  result.mean_baseline.protocol = "mean-predictor";

  const std::size_t test_stride = config.test_stride ? config.test_stride : config.model.output_len;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const std::string& name = targets[k];
    const auto& app = sim::find_appliance(config.appliances, name);
    const auto thr = thresholds_for(config, app);

    MhNetConfig mc = config.model;
    mc.output_scale = app.rated_power;
    const std::uint64_t model_seed = Rng::derive(s, 100 + k).next();

    for (const Protocol arm : {Protocol::kConstant, Protocol::kDynamic}) {
      const auto& series = arm == Protocol::kConstant ? train_const : train_dyn;
      const auto train_windows =
          protocol_windows(config, series, name, std::nullopt, config.windows.stride);
      MhNetModel model = MhNetModel::build(mc, model_seed);
      TrainConfig tc = config.train;
      tc.checkpoint_path.clear();
      const TrainReport rep = train(model, train_windows, tc);
      model.set_metadata({name, train_windows.norm, thr.on_threshold, thr.min_on_s});

      const auto test_windows = protocol_windows(config, test, name, train_windows.norm, test_stride);
      result.test_windows = test_windows.size();
      metrics::EvalRow row = metrics::evaluate(model, test_windows, thr);
      if (arm == Protocol::kConstant) {
        result.constant_trained.rows.push_back(row);
        result.constant_reports.push_back(rep);
      } else {
        result.dynamic_trained.rows.push_back(row);
        result.dynamic_reports.push_back(rep);

        // Constant predictor fitted on the dynamic training targets.
        double mean_power = 0.0;
        for (const double v : series.appliance_p[series.index_of(name)]) mean_power += v;
        mean_power /= static_cast<double>(series.length());
        const auto truth = metrics::stitch(model, test_windows).actual;
        const std::vector<double> flat_pred(truth.size(), mean_power);
        result.mean_baseline.rows.push_back(metrics::evaluate_series(name, truth, flat_pred, thr));
      }
    }
  }
  return result;
}

}  // namespace nilm::train
