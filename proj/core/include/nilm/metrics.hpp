#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nilm/dataio.hpp"
#include "nilm/mhnet.hpp"

namespace nilm::metrics {

/// Mean absolute error over all samples.
double mae(std::span<const double> actual, std::span<const double> predicted);

/// Signal aggregate error as printed: (1/n) sum_p (1/m) |sum actual_p - sum predicted_p|
/// over n disjoint periods of m samples. A trailing partial period is dropped
/// with a warning.
double sae(std::span<const double> actual, std::span<const double> predicted,
           std::size_t period_len);

/// Threshold rule with run-length filtering: dips shorter than min_on_s inside
/// an on-run are filled, then above-threshold runs shorter than min_on_s are
/// suppressed.
std::vector<std::uint8_t> onoff_from_power(std::span<const double> series, double threshold,
                                           std::size_t min_on_s);

struct Classification {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
  std::size_t true_negative = 0;
  double precision = 0.0;   // fraction
  double recall = 0.0;      // fraction
  double f1_percent = 0.0;  // 0..100
};

/// Per-sample confusion counts. Zero denominators yield 0 for the affected
/// ratio (and F1 = 0 when precision + recall = 0).
Classification f1(std::span<const std::uint8_t> predicted_on,
                  std::span<const std::uint8_t> actual_on);

inline constexpr std::size_t kDefaultSaePeriod = 600;

struct Thresholds {
  double on_threshold = 0.0;  // watts
  std::size_t min_on_s = 3;
  std::size_t sae_period = kDefaultSaePeriod;
};

struct EvalRow {
  std::string appliance;
  double mae = 0.0;        // watts
  double sae = 0.0;        // watts
  double f1 = 0.0;         // percent
  double precision = 0.0;  // fraction
  double recall = 0.0;     // fraction
};

/// Continuous predicted/actual series assembled from overlapping windows.
struct Stitched {
  std::vector<std::size_t> index;  // source-series second of each sample
  std::vector<double> predicted;   // mean of the covering windows' gated output
  std::vector<double> actual;
  std::vector<double> onoff_prob;  // mean of the covering windows' gate
};

Stitched stitch(const MhNetModel& model, const data::WindowSet& windows);

/// Model output over a whole aggregate series (raw watts, normalised with the
/// model's metadata). Windows tile the series via covering_starts; only
/// seconds [first, first + power.size()) are covered.
struct SeriesPrediction {
  std::size_t first = 0;
  std::vector<double> power;       // gated, averaged over covering windows
  std::vector<double> onoff_prob;
};

SeriesPrediction predict_series(const MhNetModel& model, std::span<const double> agg_p,
                                std::span<const double> agg_q);

/// MAE/SAE/F1 of two aligned power series; on/off states of both come from
/// onoff_from_power with the given thresholds.
EvalRow evaluate_series(const std::string& appliance, std::span<const double> actual,
                        std::span<const double> predicted, const Thresholds& thresholds);

/// Runs the model over every window, stitches, and scores the result.
EvalRow evaluate(const MhNetModel& model, const data::WindowSet& windows,
                 const Thresholds& thresholds);

struct EvalReport {
  std::vector<EvalRow> rows;
  std::string dataset;
  std::string protocol;
  std::uint64_t seed = 0;
  std::size_t sae_period = kDefaultSaePeriod;

  /// Arithmetic mean of every numeric column.
  EvalRow average() const;
  const EvalRow& row(const std::string& appliance) const;

  nlohmann::json to_json() const;
  /// `appliance,MAE,SAE,F1` plus a trailing Average row.
  std::string to_csv() const;
};

}  // namespace nilm::metrics
