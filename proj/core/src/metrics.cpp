#include "nilm/metrics.hpp"

#include <cmath>

#include "nilm/errors.hpp"
#include "nilm/log.hpp"

namespace nilm::metrics {

namespace {

void require_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw UsageError(std::string(what) + ": series lengths differ (" + std::to_string(a) +
                     " vs " + std::to_string(b) + ")");
  if (a == 0) throw UsageError(std::string(what) + ": empty series");
}

}  // namespace

double mae(std::span<const double> actual, std::span<const double> predicted) {
  require_aligned(actual.size(), predicted.size(), "mae");
  double total = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) total += std::abs(actual[i] - predicted[i]);
  return total / static_cast<double>(actual.size());
}

double sae(std::span<const double> actual, std::span<const double> predicted,
           std::size_t period_len) {
  require_aligned(actual.size(), predicted.size(), "sae");
  if (period_len == 0) throw UsageError("sae: period length must be >= 1");
  if (period_len > actual.size())
    throw UsageError("sae: period length " + std::to_string(period_len) +
                     " exceeds series length " + std::to_string(actual.size()));
  const std::size_t periods = actual.size() / period_len;
  if (const std::size_t rest = actual.size() % period_len; rest != 0)
    log::warn("sae: dropping " + std::to_string(rest) + " trailing samples (period " +
              std::to_string(period_len) + ")");
  double total = 0.0;
  for (std::size_t p = 0; p < periods; ++p) {
    double sum_actual = 0.0;
    double sum_predicted = 0.0;
    for (std::size_t i = p * period_len; i < (p + 1) * period_len; ++i) {
      sum_actual += actual[i];
      sum_predicted += predicted[i];
    }
    total += std::abs(sum_actual - sum_predicted) / static_cast<double>(period_len);
  }
  return total / static_cast<double>(periods);
}

std::vector<std::uint8_t> onoff_from_power(std::span<const double> series, double threshold,
                                           std::size_t min_on_s) {
  if (!(threshold > 0.0)) throw UsageError("onoff_from_power: threshold must be > 0");
  std::vector<std::uint8_t> on(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) on[i] = series[i] > threshold;
  if (min_on_s <= 1) return on;

  // Runs of equal state as [begin, end).
  auto for_each_run = [&on](std::uint8_t state, auto&& fn) {
    std::size_t i = 0;
    while (i < on.size()) {
      if (on[i] != state) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < on.size() && on[j] == state) ++j;
      fn(i, j);
      i = j;
    }
  };
  for_each_run(0, [&](std::size_t b, std::size_t e) {
    const bool interior = b > 0 && e < on.size();
    if (interior && e - b < min_on_s) std::fill(on.begin() + b, on.begin() + e, 1);
  });
  for_each_run(1, [&](std::size_t b, std::size_t e) {
    if (e - b < min_on_s) std::fill(on.begin() + b, on.begin() + e, 0);
  });
  return on;
}

Classification f1(std::span<const std::uint8_t> predicted_on,
                  std::span<const std::uint8_t> actual_on) {
  if (predicted_on.size() != actual_on.size())
    throw UsageError("f1: series lengths differ (" + std::to_string(predicted_on.size()) +
                     " vs " + std::to_string(actual_on.size()) + ")");
  Classification c;
  for (std::size_t i = 0; i < actual_on.size(); ++i) {
    const bool p = predicted_on[i] != 0;
    const bool a = actual_on[i] != 0;
    if (p && a) ++c.true_positive;
    else if (p) ++c.false_positive;
    else if (a) ++c.false_negative;
    else ++c.true_negative;
  }
  const double tp = static_cast<double>(c.true_positive);
  const auto predicted_pos = c.true_positive + c.false_positive;
  const auto actual_pos = c.true_positive + c.false_negative;
  c.precision = predicted_pos == 0 ? 0.0 : tp / static_cast<double>(predicted_pos);
  c.recall = actual_pos == 0 ? 0.0 : tp / static_cast<double>(actual_pos);
  const double denom = c.precision + c.recall;
  c.f1_percent = denom == 0.0 ? 0.0 : 100.0 * 2.0 * c.precision * c.recall / denom;
  return c;
}

Stitched stitch(const MhNetModel& model, const data::WindowSet& windows) {
  if (windows.empty()) throw UsageError("stitch: no windows");
  const auto& cfg = model.config();
  if (cfg.input_len != windows.spec.input_len || cfg.output_len != windows.spec.output_len)
    throw DimensionError("stitch: window geometry does not match the model");

  const std::size_t margin = windows.margin();
  const std::size_t L = cfg.output_len;
  std::size_t lo = windows.windows.front().start + margin;
  std::size_t hi = lo;
  for (const auto& w : windows.windows) {
    lo = std::min(lo, w.start + margin);
    hi = std::max(hi, w.start + margin + L);
  }
  const std::size_t span = hi - lo;
  std::vector<double> sum(span, 0.0), prob(span, 0.0), actual(span, 0.0);
  std::vector<std::size_t> count(span, 0);

  NoGradGuard no_grad;
  for (const auto& w : windows.windows) {
    const MhNetOutput out = model.forward(w.input_tensor());
    auto gated = out.gated.data();
    auto gate = out.onoff_prob.data();
    for (std::size_t u = 0; u < L; ++u) {
      const std::size_t k = w.start + margin + u - lo;
      sum[k] += gated[u];
      prob[k] += gate[u];
      actual[k] = w.target_power[u];
      ++count[k];
    }
  }

  Stitched s;
  for (std::size_t k = 0; k < span; ++k) {
    if (count[k] == 0) continue;
    const double n = static_cast<double>(count[k]);
    s.index.push_back(lo + k);
    s.predicted.push_back(sum[k] / n);
    s.onoff_prob.push_back(prob[k] / n);
    s.actual.push_back(actual[k]);
  }
  return s;
}

SeriesPrediction predict_series(const MhNetModel& model, std::span<const double> agg_p,
                                std::span<const double> agg_q) {
  const auto& cfg = model.config();
  const std::size_t T = agg_p.size();
  if (agg_q.size() != T)
    throw DimensionError("predict_series: P and Q lengths differ (" + std::to_string(T) +
                         " vs " + std::to_string(agg_q.size()) + ")");
  if (T < cfg.input_len)
    throw SizeError("predict_series: series of " + std::to_string(T) +
                    " samples is shorter than the model window " +
                    std::to_string(cfg.input_len));
  const std::size_t m = cfg.input_len;
  const std::size_t L = cfg.output_len;
  const std::size_t margin = cfg.margin();
  const Normalization& norm = model.metadata().norm;

  SeriesPrediction out;
  out.first = margin;
  const std::size_t span = T - m + L;
  out.power.assign(span, 0.0);
  out.onoff_prob.assign(span, 0.0);
  std::vector<std::size_t> count(span, 0);

  NoGradGuard no_grad;
  std::vector<double> window(2 * m);
  for (const std::size_t start : data::covering_starts(T, m, L)) {
    for (std::size_t t = 0; t < m; ++t) {
      window[t] = norm.normalize(0, agg_p[start + t]);
      window[m + t] = norm.normalize(1, agg_q[start + t]);
    }
    const MhNetOutput y = model.forward(Tensor({2, m}, window));
    auto gated = y.gated.data();
    auto prob = y.onoff_prob.data();
    for (std::size_t u = 0; u < L; ++u) {
      const std::size_t k = start + u;  // (start + margin + u) - margin
      if (k >= span) continue;
      out.power[k] += gated[u];
      out.onoff_prob[k] += prob[u];
      ++count[k];
    }
  }
  for (std::size_t k = 0; k < span; ++k) {
    if (count[k] == 0) throw UsageError("predict_series: uncovered second " + std::to_string(k));
    out.power[k] /= static_cast<double>(count[k]);
    out.onoff_prob[k] /= static_cast<double>(count[k]);
  }
  return out;
}

EvalRow evaluate_series(const std::string& appliance, std::span<const double> actual,
                        std::span<const double> predicted, const Thresholds& thresholds) {
  require_aligned(actual.size(), predicted.size(), "evaluate");
  EvalRow row;
  row.appliance = appliance;
  row.mae = mae(actual, predicted);
  const std::size_t period = std::min(thresholds.sae_period, actual.size());
  row.sae = sae(actual, predicted, period);
  const auto actual_on = onoff_from_power(actual, thresholds.on_threshold, thresholds.min_on_s);
  const auto predicted_on =
      onoff_from_power(predicted, thresholds.on_threshold, thresholds.min_on_s);
  const Classification c = f1(predicted_on, actual_on);
  row.f1 = c.f1_percent;
  row.precision = c.precision;
  row.recall = c.recall;
  return row;
}

EvalRow evaluate(const MhNetModel& model, const data::WindowSet& windows,
                 const Thresholds& thresholds) {
  const Stitched s = stitch(model, windows);
  return evaluate_series(windows.appliance, s.actual, s.predicted, thresholds);
}

}  // namespace nilm::metrics
