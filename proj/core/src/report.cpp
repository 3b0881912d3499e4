#include <cstdio>

#include "nilm/errors.hpp"
#include "nilm/metrics.hpp"

namespace nilm::metrics {

EvalRow EvalReport::average() const {
  EvalRow avg;
  avg.appliance = "Average";
  if (rows.empty()) return avg;
  for (const auto& r : rows) {
    avg.mae += r.mae;
    avg.sae += r.sae;
    avg.f1 += r.f1;
    avg.precision += r.precision;
    avg.recall += r.recall;
  }
  const double n = static_cast<double>(rows.size());
  avg.mae /= n;
  avg.sae /= n;
  avg.f1 /= n;
  avg.precision /= n;
  avg.recall /= n;
  return avg;
}

const EvalRow& EvalReport::row(const std::string& appliance) const {
  for (const auto& r : rows)
    if (r.appliance == appliance) return r;
  throw UsageError("report has no row for '" + appliance + "'");
}

namespace {

nlohmann::json row_json(const EvalRow& r) {
  return {{"appliance", r.appliance}, {"MAE", r.mae},           {"SAE", r.sae},
          {"F1", r.f1},               {"precision", r.precision}, {"recall", r.recall}};
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json out;
  out["metadata"] = {
      {"dataset", dataset},
      {"protocol", protocol},
      {"seed", seed},
      {"sae_period", sae_period},
      {"sae_definition",
       "mean over disjoint periods of |sum(actual) - sum(predicted)| / period_len, "
       "not normalised by total energy"},
      {"units", {{"MAE", "W"}, {"SAE", "W"}, {"F1", "%"}}}};
  out["rows"] = nlohmann::json::array();
  for (const auto& r : rows) out["rows"].push_back(row_json(r));
  out["average"] = row_json(average());
  return out;
}

std::string EvalReport::to_csv() const {
  std::string out = "appliance,MAE,SAE,F1\n";
  char buf[128];
  auto line = [&](const EvalRow& r) {
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", r.mae, r.sae, r.f1);
    out += r.appliance;
    out += buf;
  };
  for (const auto& r : rows) line(r);
  line(average());
  return out;
}

}  // namespace nilm::metrics
