#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nilm/dataio.hpp"
#include "nilm/metrics.hpp"
#include "nilm/mhnet.hpp"
#include "nilm/simulator.hpp"

namespace nilm::train {

/// Lower/upper clamp applied to on/off probabilities inside the BCE term.
inline constexpr double kProbabilityClamp = 1e-7;

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double onoff_loss_weight = 1.0;  // lambda
  std::uint64_t seed = 0;
  std::size_t early_stop_patience = 10;
  double validation_fraction = 0.2;
  // Best-validation weights are written here when nonempty.
  std::filesystem::path checkpoint_path;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// MSE(gated, target_power) + lambda * BCE(clamp(onoff_prob), target_onoff).
Tensor loss(const Tensor& gated, const Tensor& onoff_prob, std::span<const double> target_power,
            std::span<const std::uint8_t> target_onoff, double lambda);

struct TrainReport {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;    // per epoch
  std::size_t best_epoch = 0;      // 1-based
  double best_val_loss = 0.0;
  double baseline_val_loss = 0.0;  // mean predictor on the same split
  std::size_t train_windows = 0;
  std::size_t val_windows = 0;
  bool early_stopped = false;
  std::filesystem::path checkpoint_path;
  double wall_time_s = 0.0;

  nlohmann::json to_json() const;
  /// `epoch,train_loss,val_loss`
  std::string epochs_csv() const;
};

/// Chronological split: the last fraction of windows validates; training
/// windows that overlap the validation span are discarded.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};
Split chronological_split(const data::WindowSet& windows, double validation_fraction);

/// Mean loss of the model over the selected windows (no graph is recorded).
double mean_loss(const MhNetModel& model, const data::WindowSet& windows,
                 std::span<const std::size_t> indices, double lambda);

/// Loss of the constant predictor fitted on `fit`: gated = mean target power,
/// onoff_prob = on-fraction, scored over `score`.
double mean_predictor_loss(const data::WindowSet& windows, std::span<const std::size_t> fit,
                           std::span<const std::size_t> score, double lambda);

/// Adam with bias correction.
class Adam {
 public:
  Adam(std::vector<Tensor> parameters, double learning_rate, double beta1 = 0.9,
       double beta2 = 0.999, double epsilon = 1e-8);
  void step();
  void zero_grad();

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

/// Mini-batch training with seeded shuffling and early stopping. The model is
/// left holding the best-validation parameters.
TrainReport train(MhNetModel& model, const data::WindowSet& windows, const TrainConfig& cfg);

// Constant- vs dynamic-voltage protocol ----------------------------------------

enum class Protocol { kConstant, kDynamic };
std::string to_string(Protocol p);

struct ProtocolConfig {
  std::vector<sim::ApplianceModel> appliances;  // everything plugged in
  std::vector<std::string> targets;             // appliances to model; empty = all
  std::size_t train_duration_s = 7200;
  std::size_t test_duration_s = 3600;
  double noise_sigma = 5.0;
  double density = 1.0;
  double constant_voltage = sim::kNominalVoltage;
  std::size_t voltage_step_min_s = 60;
  std::size_t voltage_step_max_s = 600;
  double on_threshold_fraction = 0.05;  // of rated power
  std::size_t min_on_s = 3;
  std::size_t sae_period = metrics::kDefaultSaePeriod;
  MhNetConfig model;
  data::WindowSpec windows;  // thresholds are filled in per target
  std::size_t test_stride = 0;  // 0: output_len
  TrainConfig train;
  std::uint64_t seed = 0;
};

struct ProtocolResult {
  metrics::EvalReport constant_trained;
  metrics::EvalReport dynamic_trained;
  metrics::EvalReport mean_baseline;  // constant predictor from the dynamic training set
  std::vector<TrainReport> constant_reports;
  std::vector<TrainReport> dynamic_reports;
  std::size_t test_windows = 0;
};

/// Both arms share the appliance schedule and differ only in the supply
/// voltage (230 V flat vs random steps over 205-240 V). Each target gets one
/// model per arm; every model is scored on the same dynamic-voltage test set.
ProtocolResult run_protocol(const ProtocolConfig& config);

/// Training windows for one target under one arm of the protocol.
data::WindowSet protocol_windows(const ProtocolConfig& config, const sim::MeterSeries& series,
                                 const std::string& target,
                                 const std::optional<Normalization>& norm, std::size_t stride);

}  // namespace nilm::train
