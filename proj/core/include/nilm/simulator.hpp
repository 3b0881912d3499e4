#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nilm::sim {

inline constexpr double kNominalVoltage = 230.0;
inline constexpr double kMinVoltage = 205.0;
inline constexpr double kMaxVoltage = 240.0;

/// Operating-behaviour codes: A always-on, B on-off, C continuous variable,
/// D multi-state.
enum class Taxonomy : char { kAlwaysOn = 'A', kOnOff = 'B', kContinuous = 'C', kMultiState = 'D' };

enum class VoltageLaw { kResistive, kConstantPower, kInduction, kMultiState };

std::string to_string(VoltageLaw law);
VoltageLaw voltage_law_from_string(const std::string& name);

struct OperatingState {
  double power_fraction = 1.0;     // of rated power, in [0, 1.5]
  double reactive_fraction = 0.0;  // of rated power; used by the multi-state law
};

struct Transient {
  double spike_fraction = 0.0;   // extra power at switch-on, fraction of p
  double spike_duration_s = 0.0; // linear decay to zero over this span
};

/// Usage statistics driving the schedule generator.
struct Usage {
  double mean_on_s = 600.0;
  double mean_off_s = 1800.0;
  double mean_state_dwell_s = 120.0;  // between state changes inside a run
  double min_on_s = 10.0;
};

struct ApplianceModel {
  std::string name;
  std::vector<Taxonomy> taxonomy;
  double rated_power = 0.0;  // watts at nominal voltage
  double nominal_voltage = kNominalVoltage;
  VoltageLaw voltage_law = VoltageLaw::kResistive;
  // On-states; state index 0 is "off", index i >= 1 selects states[i - 1].
  std::vector<OperatingState> states{OperatingState{}};
  Transient transient;
  Usage usage;

  bool has(Taxonomy code) const;
  std::size_t state_count() const { return states.size() + 1; }
  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

void to_json(nlohmann::json& j, const ApplianceModel& a);
void from_json(const nlohmann::json& j, ApplianceModel& a);

struct PowerSample {
  double p = 0.0;  // watts
  double q = 0.0;  // var
};

/// Steady-state draw plus the switch-on transient.
///
/// resistive:      p = rated*f*(V/Vn)^2, q = 0
/// constant_power: p = rated*f, q = 0.2*p*(Vn/V)
/// induction:      p = rated*f*(V/Vn)^0.5, q = 0.6*rated*f*(V/Vn)^2
/// multi_state:    p = rated*f, q = rated*reactive_fraction*(Vn/V)
///
/// f is the state's power fraction. The transient adds
/// spike_fraction * p * (1 - t_since_on / spike_duration_s) while
/// t_since_on < spike_duration_s. Throws ScenarioError outside [205, 240] V.
PowerSample appliance_power(const ApplianceModel& model, double voltage, std::size_t state,
                            double t_since_on);

/// The nine laboratory appliances: EV, RF, MW, EK, OH, IB, AC, CF, LT.
std::vector<ApplianceModel> default_catalog();
const ApplianceModel& find_appliance(const std::vector<ApplianceModel>& catalog,
                                     const std::string& name);

struct VoltageSegment {
  std::size_t start_s = 0;
  double level = kNominalVoltage;
};

struct VoltageScenario {
  std::size_t duration_s = 0;
  std::vector<VoltageSegment> segments;
  double min_voltage = kMinVoltage;
  double max_voltage = kMaxVoltage;
  double frequency_hz = 50.0;

  static VoltageScenario constant(std::size_t duration_s, double level = kNominalVoltage);
  /// Piecewise-constant steps; each segment lasts U[min_step_s, max_step_s]
  /// with a level drawn uniformly inside the bounds.
  static VoltageScenario random_steps(std::size_t duration_s, std::uint64_t seed,
                                      std::size_t min_step_s = 60,
                                      std::size_t max_step_s = 600);

  void validate() const;
  double voltage_at(std::size_t t) const;
  std::vector<double> voltage_series() const;
};

void to_json(nlohmann::json& j, const VoltageScenario& s);
void from_json(const nlohmann::json& j, VoltageScenario& s);

/// Per-second state index for every appliance (0 = off).
struct Schedule {
  std::size_t duration_s = 0;
  std::vector<std::vector<std::uint8_t>> states;  // [appliance][second]

  double on_fraction(std::size_t appliance) const;
};

/// Alternating off/on intervals per appliance. Off gaps are exponential with
/// mean mean_off_s / density, on runs are min_on_s plus an exponential tail;
/// appliances with more than one on-state re-draw their state inside a run.
/// Always-on (A) appliances ignore density and duty-cycle with their usage
/// means.
Schedule generate_schedule(const std::vector<ApplianceModel>& appliances,
                           std::size_t duration_s, std::uint64_t seed, double density);

struct MeterSeries {
  std::vector<std::string> names;
  std::vector<double> timestamps;
  std::vector<double> voltage;
  std::vector<double> aggregate_p;
  std::vector<double> aggregate_q;
  std::vector<std::vector<double>> appliance_p;  // [appliance][second]
  std::vector<std::vector<double>> appliance_q;
  std::vector<std::vector<std::uint8_t>> appliance_on;
  double noise_sigma = 0.0;

  std::size_t length() const { return timestamps.size(); }
  std::size_t index_of(const std::string& name) const;
};

/// aggregate_p[t] = sum_n p_n[t] + eps_t with eps ~ N(0, noise_sigma^2);
/// aggregate_q = sum_n q_n[t] without noise.
MeterSeries synthesize(const std::vector<ApplianceModel>& appliances, const Schedule& schedule,
                       const VoltageScenario& scenario, double noise_sigma, std::uint64_t seed);

/// Header `t,voltage,agg_p,agg_q,<name>_p,<name>_on,...`; six decimals, LF.
void write_csv(const MeterSeries& series, const std::filesystem::path& path);
std::string to_csv(const MeterSeries& series);

}  // namespace nilm::sim
