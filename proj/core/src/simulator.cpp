#include "nilm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nilm/errors.hpp"
#include "nilm/random.hpp"

namespace nilm::sim {

std::string to_string(VoltageLaw law) {
  switch (law) {
    case VoltageLaw::kResistive: return "resistive";
    case VoltageLaw::kConstantPower: return "constant_power";
    case VoltageLaw::kInduction: return "induction";
    case VoltageLaw::kMultiState: return "multi_state";
  }
  return "unknown";
}

VoltageLaw voltage_law_from_string(const std::string& name) {
  if (name == "resistive") return VoltageLaw::kResistive;
  if (name == "constant_power") return VoltageLaw::kConstantPower;
  if (name == "induction") return VoltageLaw::kInduction;
  if (name == "multi_state") return VoltageLaw::kMultiState;
  throw ConfigError("unknown voltage law '" + name + "'");
}

bool ApplianceModel::has(Taxonomy code) const {
  return std::find(taxonomy.begin(), taxonomy.end(), code) != taxonomy.end();
}

void ApplianceModel::validate() const {
  auto fail = [this](const std::string& msg) {
    throw ConfigError("appliance '" + name + "': " + msg);
  };
  if (name.empty()) throw ConfigError("appliance name must be nonempty");
  if (!(rated_power > 0.0)) fail("rated_power must be > 0");
  if (!(nominal_voltage > 0.0)) fail("nominal_voltage must be > 0");
  if (taxonomy.empty()) fail("taxonomy must be nonempty");
  if (states.empty()) fail("at least one on-state is required");
  if (states.size() > 254) fail("too many states");
  for (const auto& s : states)
    if (s.power_fraction < 0.0 || s.power_fraction > 1.5)
      fail("power_fraction must lie in [0, 1.5]");
  if (transient.spike_fraction < 0.0 || transient.spike_duration_s < 0.0)
    fail("transient parameters must be non-negative");
  if (!(usage.mean_on_s > 0.0) || !(usage.mean_off_s > 0.0) ||
      !(usage.mean_state_dwell_s > 0.0) || usage.min_on_s < 0.0)
    fail("usage means must be positive");
}

namespace {

char taxonomy_char(Taxonomy t) { return static_cast<char>(t); }

Taxonomy taxonomy_from_char(char c) {
  switch (c) {
    case 'A': return Taxonomy::kAlwaysOn;
    case 'B': return Taxonomy::kOnOff;
    case 'C': return Taxonomy::kContinuous;
    case 'D': return Taxonomy::kMultiState;
    default: throw ConfigError(std::string("unknown taxonomy code '") + c + "'");
  }
}

}  // namespace

void to_json(nlohmann::json& j, const ApplianceModel& a) {
  std::string codes;
  for (Taxonomy t : a.taxonomy) codes.push_back(taxonomy_char(t));
  nlohmann::json states = nlohmann::json::array();
  for (const auto& s : a.states)
    states.push_back({{"power_fraction", s.power_fraction},
                      {"reactive_fraction", s.reactive_fraction}});
  j = nlohmann::json{
      {"name", a.name},
      {"taxonomy", codes},
      {"rated_power", a.rated_power},
      {"nominal_voltage", a.nominal_voltage},
      {"voltage_law", to_string(a.voltage_law)},
      {"states", states},
      {"transient",
       {{"spike_fraction", a.transient.spike_fraction},
        {"spike_duration_s", a.transient.spike_duration_s}}},
      {"usage",
       {{"mean_on_s", a.usage.mean_on_s},
        {"mean_off_s", a.usage.mean_off_s},
        {"mean_state_dwell_s", a.usage.mean_state_dwell_s},
        {"min_on_s", a.usage.min_on_s}}}};
}

void from_json(const nlohmann::json& j, ApplianceModel& a) {
  a = ApplianceModel{};
  a.name = j.at("name").get<std::string>();
  a.taxonomy.clear();
  for (char c : j.at("taxonomy").get<std::string>()) {
    if (c == ',' || c == ' ') continue;
    a.taxonomy.push_back(taxonomy_from_char(c));
  }
  a.rated_power = j.at("rated_power").get<double>();
  a.nominal_voltage = j.value("nominal_voltage", kNominalVoltage);
  a.voltage_law = voltage_law_from_string(j.at("voltage_law").get<std::string>());
  if (j.contains("states")) {
    a.states.clear();
    for (const auto& s : j.at("states"))
      a.states.push_back({s.value("power_fraction", 1.0), s.value("reactive_fraction", 0.0)});
  }
  if (j.contains("transient")) {
    const auto& t = j.at("transient");
    a.transient = {t.value("spike_fraction", 0.0), t.value("spike_duration_s", 0.0)};
  }
  if (j.contains("usage")) {
    const auto& u = j.at("usage");
    Usage d;
    a.usage = {u.value("mean_on_s", d.mean_on_s), u.value("mean_off_s", d.mean_off_s),
               u.value("mean_state_dwell_s", d.mean_state_dwell_s),
               u.value("min_on_s", d.min_on_s)};
  }
  a.validate();
}

PowerSample appliance_power(const ApplianceModel& model, double voltage, std::size_t state,
                            double t_since_on) {
  if (!(voltage >= kMinVoltage && voltage <= kMaxVoltage))
    throw ScenarioError("voltage " + std::to_string(voltage) + " V outside the [" +
                        std::to_string(static_cast<int>(kMinVoltage)) + ", " +
                        std::to_string(static_cast<int>(kMaxVoltage)) + "] V bound");
  if (state >= model.state_count())
    throw UsageError("appliance '" + model.name + "' has no state " + std::to_string(state));
  if (state == 0) return {};

  const OperatingState& s = model.states[state - 1];
  const double ratio = voltage / model.nominal_voltage;
  const double rated = model.rated_power * s.power_fraction;
  PowerSample out;
  switch (model.voltage_law) {
    case VoltageLaw::kResistive:
      out.p = rated * ratio * ratio;
      out.q = 0.0;
      break;
    case VoltageLaw::kConstantPower:
      out.p = rated;
      out.q = 0.2 * out.p / ratio;
      break;
    case VoltageLaw::kInduction:
      out.p = rated * std::sqrt(ratio);
      out.q = 0.6 * rated * ratio * ratio;
      break;
    case VoltageLaw::kMultiState:
      out.p = rated;
      out.q = model.rated_power * s.reactive_fraction / ratio;
      break;
  }
  const Transient& tr = model.transient;
  if (tr.spike_fraction > 0.0 && tr.spike_duration_s > 0.0 && t_since_on >= 0.0 &&
      t_since_on < tr.spike_duration_s)
    out.p += tr.spike_fraction * out.p * (1.0 - t_since_on / tr.spike_duration_s);
  return out;
}

namespace {

ApplianceModel appliance(std::string name, std::vector<Taxonomy> taxonomy, double rated,
                         VoltageLaw law, std::vector<OperatingState> states, Transient transient,
                         Usage usage) {
  ApplianceModel a;
  a.name = std::move(name);
  a.taxonomy = std::move(taxonomy);
  a.rated_power = rated;
  a.voltage_law = law;
  a.states = std::move(states);
  a.transient = transient;
  a.usage = usage;
  return a;
}

}  // namespace

std::vector<ApplianceModel> default_catalog() {
  using T = Taxonomy;
  using L = VoltageLaw;
  // Spike magnitudes are placeholders; only the ratings come from the lab sheet.
  return {
      appliance("EV", {T::kOnOff, T::kMultiState}, 230.0 * 12.0, L::kConstantPower,
                {{1.0, 0.0}, {0.5, 0.0}}, {}, {1800, 1800, 900, 300}),
      appliance("RF", {T::kAlwaysOn, T::kOnOff}, 150.0, L::kInduction, {{1.0, 0.0}},
                {1.5, 3.0}, {600, 600, 600, 60}),
      appliance("MW", {T::kContinuous, T::kMultiState}, 1000.0, L::kMultiState,
                {{1.0, 0.3}, {0.6, 0.2}, {0.3, 0.1}}, {}, {120, 600, 40, 30}),
      appliance("EK", {T::kOnOff}, 1350.0, L::kResistive, {{1.0, 0.0}}, {},
                {180, 600, 180, 60}),
      appliance("OH", {T::kOnOff, T::kMultiState}, 1500.0, L::kResistive,
                {{1.0, 0.0}, {0.6, 0.0}}, {}, {600, 900, 300, 120}),
      appliance("IB", {T::kOnOff}, 100.0, L::kResistive, {{1.0, 0.0}}, {},
                {300, 300, 300, 30}),
      appliance("AC", {T::kContinuous, T::kMultiState}, 2530.0, L::kConstantPower,
                {{1.0, 0.0}, {0.75, 0.0}, {0.5, 0.0}}, {}, {1200, 1200, 300, 300}),
      appliance("CF", {T::kOnOff, T::kMultiState}, 70.0, L::kInduction,
                {{1.0, 0.0}, {0.75, 0.0}, {0.5, 0.0}}, {0.5, 2.0}, {600, 600, 200, 60}),
      appliance("LT", {T::kOnOff}, 34.0, L::kConstantPower, {{1.0, 0.0}}, {},
                {600, 600, 600, 60}),
  };
}

const ApplianceModel& find_appliance(const std::vector<ApplianceModel>& catalog,
                                     const std::string& name) {
  for (const auto& a : catalog)
    if (a.name == name) return a;
  throw ConfigError("appliance '" + name + "' not in catalog");
}

VoltageScenario VoltageScenario::constant(std::size_t duration_s, double level) {
  VoltageScenario s;
  s.duration_s = duration_s;
  s.segments = {{0, level}};
  s.validate();
  return s;
}

VoltageScenario VoltageScenario::random_steps(std::size_t duration_s, std::uint64_t seed,
                                              std::size_t min_step_s, std::size_t max_step_s) {
  if (min_step_s < 1 || max_step_s < min_step_s)
    throw ConfigError("random_steps: need 1 <= min_step_s <= max_step_s");
  VoltageScenario s;
  s.duration_s = duration_s;
  Rng rng(seed);
  std::size_t t = 0;
  while (t < duration_s) {
    s.segments.push_back({t, rng.uniform(s.min_voltage, s.max_voltage)});
    t += min_step_s + static_cast<std::size_t>(rng.below(max_step_s - min_step_s + 1));
  }
  s.validate();
  return s;
}

void VoltageScenario::validate() const {
  if (duration_s == 0) throw ScenarioError("scenario duration must be positive");
  if (segments.empty()) throw ScenarioError("scenario needs at least one segment");
  if (min_voltage < kMinVoltage || max_voltage > kMaxVoltage || min_voltage > max_voltage)
    throw ScenarioError("scenario bounds must lie inside [205, 240] V");
  if (segments.front().start_s != 0) throw ScenarioError("first segment must start at 0 s");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    if (i > 0 && seg.start_s <= segments[i - 1].start_s)
      throw ScenarioError("segments must be sorted by strictly increasing start_s");
    if (!(seg.level >= min_voltage && seg.level <= max_voltage)) {
      std::ostringstream msg;
      msg << "segment " << i << " level " << seg.level << " V outside the [" << min_voltage
          << ", " << max_voltage << "] V bound";
      throw ScenarioError(msg.str());
    }
  }
}

double VoltageScenario::voltage_at(std::size_t t) const {
  auto it = std::upper_bound(segments.begin(), segments.end(), t,
                             [](std::size_t v, const VoltageSegment& s) { return v < s.start_s; });
  return std::prev(it)->level;
}

std::vector<double> VoltageScenario::voltage_series() const {
  std::vector<double> out(duration_s);
  std::size_t seg = 0;
  for (std::size_t t = 0; t < duration_s; ++t) {
    while (seg + 1 < segments.size() && segments[seg + 1].start_s <= t) ++seg;
    out[t] = segments[seg].level;
  }
  return out;
}

void to_json(nlohmann::json& j, const VoltageScenario& s) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& seg : s.segments) segs.push_back({{"start_s", seg.start_s}, {"level", seg.level}});
  j = nlohmann::json{{"duration_s", s.duration_s},
                     {"segments", segs},
                     {"bounds", {s.min_voltage, s.max_voltage}},
                     {"frequency_hz", s.frequency_hz}};
}

void from_json(const nlohmann::json& j, VoltageScenario& s) {
  s = VoltageScenario{};
  s.duration_s = j.value("duration_s", std::size_t{0});
  for (const auto& seg : j.at("segments"))
    s.segments.push_back({seg.at("start_s").get<std::size_t>(), seg.at("level").get<double>()});
  if (j.contains("bounds")) {
    auto b = j.at("bounds").get<std::vector<double>>();
    if (b.size() != 2) throw ConfigError("scenario bounds must be [min, max]");
    s.min_voltage = b[0];
    s.max_voltage = b[1];
  }
  s.frequency_hz = j.value("frequency_hz", 50.0);
}

double Schedule::on_fraction(std::size_t appliance) const {
  const auto& st = states.at(appliance);
  if (st.empty()) return 0.0;
  const auto on = std::count_if(st.begin(), st.end(), [](std::uint8_t s) { return s != 0; });
  return static_cast<double>(on) / static_cast<double>(st.size());
}

namespace {

std::size_t draw_seconds(double seconds) {
  return static_cast<std::size_t>(std::max(1.0, std::round(seconds)));
}

std::vector<std::uint8_t> appliance_timeline(const ApplianceModel& a, std::size_t duration_s,
                                             Rng& rng, double density) {
  std::vector<std::uint8_t> line(duration_s, 0);
  const bool always_on = a.has(Taxonomy::kAlwaysOn);
  const double off_mean = always_on ? a.usage.mean_off_s : a.usage.mean_off_s / density;
  const double tail_mean = std::max(1.0, a.usage.mean_on_s - a.usage.min_on_s);
  const std::size_t on_states = a.states.size();

  std::size_t t = 0;
  bool on = always_on && rng.uniform() < 0.5;
  while (t < duration_s) {
    if (!on) {
      const double gap = rng.exponential(off_mean);
      // Bail out before casting astronomically long gaps as density -> 0.
      if (gap >= static_cast<double>(duration_s - t)) break;
      t += draw_seconds(gap);
      on = true;
      continue;
    }
    const std::size_t run =
        draw_seconds(a.usage.min_on_s + rng.exponential(tail_mean));
    const std::size_t end = std::min(duration_s, t + run);
    std::uint8_t state = static_cast<std::uint8_t>(1 + rng.below(on_states));
    std::size_t next_change =
        on_states > 1 ? t + draw_seconds(rng.exponential(a.usage.mean_state_dwell_s)) : end;
    for (; t < end; ++t) {
      if (t >= next_change) {
        state = static_cast<std::uint8_t>(1 + (state + rng.below(on_states - 1)) % on_states);
        next_change = t + draw_seconds(rng.exponential(a.usage.mean_state_dwell_s));
      }
      line[t] = state;
    }
    on = false;
  }
  return line;
}

}  // namespace

Schedule generate_schedule(const std::vector<ApplianceModel>& appliances,
                           std::size_t duration_s, std::uint64_t seed, double density) {
  if (duration_s < 60) throw UsageError("schedule duration must be >= 60 s");
  if (!(density > 0.0 && density <= 1.0)) throw UsageError("density must lie in (0, 1]");
  Schedule schedule;
  schedule.duration_s = duration_s;
  for (std::size_t i = 0; i < appliances.size(); ++i) {
    appliances[i].validate();
    Rng rng = Rng::derive(seed, i);
    schedule.states.push_back(appliance_timeline(appliances[i], duration_s, rng, density));
  }
  return schedule;
}

std::size_t MeterSeries::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw ConfigError("series has no appliance '" + name + "'");
}

MeterSeries synthesize(const std::vector<ApplianceModel>& appliances, const Schedule& schedule,
                       const VoltageScenario& scenario, double noise_sigma, std::uint64_t seed) {
  scenario.validate();
  if (schedule.duration_s != scenario.duration_s)
    throw ScenarioError("schedule covers " + std::to_string(schedule.duration_s) +
                        " s but scenario covers " + std::to_string(scenario.duration_s) + " s");
  if (schedule.states.size() != appliances.size())
    throw UsageError("schedule and appliance list differ in length");
  if (noise_sigma < 0.0) throw UsageError("noise_sigma must be >= 0");

  const std::size_t n = scenario.duration_s;
  MeterSeries out;
  out.noise_sigma = noise_sigma;
  out.voltage = scenario.voltage_series();
  out.timestamps.resize(n);
  for (std::size_t t = 0; t < n; ++t) out.timestamps[t] = static_cast<double>(t);
  out.aggregate_p.assign(n, 0.0);
  out.aggregate_q.assign(n, 0.0);

  for (std::size_t a = 0; a < appliances.size(); ++a) {
    const auto& model = appliances[a];
    const auto& states = schedule.states[a];
    out.names.push_back(model.name);
    std::vector<double> p(n), q(n);
    std::vector<std::uint8_t> on(n);
    std::size_t run_start = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const std::uint8_t s = states[t];
      if (s != 0 && (t == 0 || states[t - 1] == 0)) run_start = t;
      const auto sample = appliance_power(model, out.voltage[t], s,
                                          static_cast<double>(t - run_start));
      p[t] = sample.p;
      q[t] = sample.q;
      on[t] = s != 0;
    }
    out.appliance_p.push_back(std::move(p));
    out.appliance_q.push_back(std::move(q));
    out.appliance_on.push_back(std::move(on));
  }

  // Sum in a fixed appliance order so the output is bit-reproducible.
  Rng noise(seed);
  for (std::size_t t = 0; t < n; ++t) {
    double p = 0.0;
    double q = 0.0;
    for (std::size_t a = 0; a < appliances.size(); ++a) {
      p += out.appliance_p[a][t];
      q += out.appliance_q[a][t];
    }
    if (noise_sigma > 0.0) p += noise_sigma * noise.normal();
    out.aggregate_p[t] = p;
    out.aggregate_q[t] = q;
  }
  return out;
}

std::string to_csv(const MeterSeries& s) {
  std::string out = "t,voltage,agg_p,agg_q";
  for (const auto& name : s.names) out += "," + name + "_p," + name + "_on";
  out += '\n';
  char buf[64];
  auto field = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    out += buf;
  };
  for (std::size_t t = 0; t < s.length(); ++t) {
    field(s.timestamps[t]);
    out += ',';
    field(s.voltage[t]);
    out += ',';
    field(s.aggregate_p[t]);
    out += ',';
    field(s.aggregate_q[t]);
    for (std::size_t a = 0; a < s.names.size(); ++a) {
      out += ',';
      field(s.appliance_p[a][t]);
      out += s.appliance_on[a][t] ? ",1" : ",0";
    }
    out += '\n';
  }
  return out;
}

void write_csv(const MeterSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << to_csv(series);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace nilm::sim
