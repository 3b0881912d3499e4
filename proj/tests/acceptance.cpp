// Acceptance gate: one PASS/FAIL line per criterion.
//
//   acceptance            run all seven
//   acceptance 1 4 7      run a subset
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"
#include "nilm/log.hpp"
#include "nilm/metrics.hpp"
#include "nilm/mhnet.hpp"
#include "nilm/ops.hpp"
#include "nilm/simulator.hpp"
#include "nilm/training.hpp"
#include "test_util.hpp"

namespace {

using namespace nilm;
using testing::gradient_error;
using testing::random_tensor;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

using Inputs = std::vector<Tensor>;

// Scalar projection with fixed random weights so every output element gets a
// distinct upstream gradient.
Tensor project(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return ops::sum(ops::mul(y, random_tensor(y.shape(), rng, -1.0, 1.0, false)));
}

Tensor spread(Shape shape, Rng& rng, double gap) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(gap, 1.0);
  return Tensor(std::move(shape), std::move(v), true);
}

MhNetConfig gradient_model() {
  MhNetConfig c;
  c.input_len = 32;
  c.output_len = 8;
  c.layers_per_head = 2;
  c.channels_per_layer = 4;
  c.attention_hidden = 4;
  c.fc_hidden = 8;
  return c;
}

// 1. Gradient correctness ------------------------------------------------------

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  Rng rng(1001);
  double worst_op = 0.0;
  std::string worst_name;
  auto check = [&](const std::string& name, const std::function<Tensor(const Inputs&)>& f,
                   Inputs in) {
    const double e = gradient_error(f, std::move(in));
    if (e > worst_op) {
      worst_op = e;
      worst_name = name;
    }
  };
  for (std::uint64_t s = 0; s < 10; ++s) {
    const std::size_t cin = 1 + rng.below(3), cout = 1 + rng.below(3);
    const std::size_t k = 2 * rng.below(3) + 1, d = 1 + rng.below(3);
    const std::size_t T = (k - 1) * d + 1 + rng.below(10);
    const auto pad = s % 2 ? ops::Padding::kSame : ops::Padding::kValid;
    check("conv1d", [&](const Inputs& v) { return project(ops::conv1d(v[0], v[1], v[2], d, pad), s); },
          {random_tensor({cin, T}, rng), random_tensor({cout, cin, k}, rng),
           random_tensor({cout}, rng)});
    const std::size_t m = 1 + rng.below(5), n = 1 + rng.below(5);
    check("matvec", [&](const Inputs& v) { return project(ops::matvec(v[0], v[1]), s); },
          {random_tensor({m, n}, rng), random_tensor({n}, rng)});
    check("linear", [&](const Inputs& v) { return project(ops::linear(v[0], v[1], v[2]), s); },
          {random_tensor({n}, rng), random_tensor({m, n}, rng), random_tensor({m}, rng)});
    const Shape shape{1 + rng.below(3), 1 + rng.below(4)};
    check("relu", [&](const Inputs& v) { return project(ops::relu(v[0]), s); },
          {spread(shape, rng, 0.05)});
    check("sigmoid", [&](const Inputs& v) { return project(ops::sigmoid(v[0]), s); },
          {random_tensor(shape, rng, -4.0, 4.0)});
    check("softmax", [&](const Inputs& v) { return project(ops::softmax(v[0]), s); },
          {random_tensor({1 + rng.below(12)}, rng, -3.0, 3.0)});
    check("log", [&](const Inputs& v) { return project(ops::log(v[0]), s); },
          {random_tensor(shape, rng, 0.2, 3.0)});
    check("square", [&](const Inputs& v) { return project(ops::square(v[0]), s); },
          {random_tensor(shape, rng)});
    {
      std::vector<double> vals(shape_size(shape));
      for (auto& x : vals) x = rng.uniform() < 0.5 ? rng.uniform(-0.4, 0.4) : rng.uniform(0.6, 1.0);
      check("clamp", [&](const Inputs& v) { return project(ops::clamp(v[0], -0.5, 0.5), s); },
            {Tensor(shape, vals, true)});
    }
    check("add", [&](const Inputs& v) { return project(ops::add(v[0], v[1]), s); },
          {random_tensor(shape, rng), random_tensor(shape, rng)});
    check("sub", [&](const Inputs& v) { return project(ops::sub(v[0], v[1]), s); },
          {random_tensor(shape, rng), random_tensor(shape, rng)});
    check("mul", [&](const Inputs& v) { return project(ops::mul(v[0], v[1]), s); },
          {random_tensor(shape, rng), random_tensor(shape, rng)});
    check("add_scalar", [&](const Inputs& v) { return project(ops::add(v[0], 0.7), s); },
          {random_tensor(shape, rng)});
    check("mul_scalar", [&](const Inputs& v) { return project(ops::mul(v[0], -1.3), s); },
          {random_tensor(shape, rng)});
    check("sum", [&](const Inputs& v) { return ops::mul(ops::sum(v[0]), 1.5); },
          {random_tensor(shape, rng)});
    check("mean", [&](const Inputs& v) { return ops::mul(ops::mean(ops::square(v[0])), 2.0); },
          {random_tensor(shape, rng)});
    const std::size_t r = shape[0], c1 = shape[1], c2 = 1 + rng.below(3);
    check("concat", [&](const Inputs& v) { return project(ops::concat({v[0], v[1]}, 1), s); },
          {random_tensor({r, c1}, rng), random_tensor({r, c2}, rng)});
    check("reshape", [&](const Inputs& v) { return project(ops::reshape(v[0], {r * c1}), s); },
          {random_tensor({r, c1}, rng)});
    const std::size_t start = rng.below(c1);
    const std::size_t count = 1 + rng.below(c1 - start);
    check("slice_columns",
          [&](const Inputs& v) { return project(ops::slice_columns(v[0], start, count), s); },
          {random_tensor({r, c1}, rng)});
    check("repeat_columns",
          [&](const Inputs& v) { return project(ops::repeat_columns(v[0], c2), s); },
          {random_tensor({r}, rng)});
  }
  o.require(worst_op <= 1e-5, "op " + worst_name + " error " + fmt("%.3g", worst_op));

  const MhNetConfig c = gradient_model();
  const auto model = MhNetModel::build(c, 1002);
  Rng data(1003);
  const Tensor x = random_tensor({c.input_channels, c.input_len}, data, -1.0, 1.0, false);
  std::vector<double> target(c.output_len);
  std::vector<std::uint8_t> onoff(c.output_len);
  for (std::size_t u = 0; u < c.output_len; ++u) {
    target[u] = data.uniform(0.0, 2.0);
    onoff[u] = data.uniform() < 0.5;
  }
  std::vector<Tensor> params;
  for (const auto& p : model.parameters()) params.push_back(p.tensor);
  const double net = gradient_error(
      [&](const Inputs&) {
        const MhNetOutput y = model.forward(x);
        return train::loss(y.gated, y.onoff_prob, target, onoff, 1.0);
      },
      params, 1e-6);
  o.require(net <= 1e-4, "network error " + fmt("%.3g", net));
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 60.0, "runtime " + fmt("%.1f s", elapsed));
  if (o.pass)
    o.detail = "max op error " + fmt("%.2e", worst_op) + " (" + worst_name + "), network " +
               fmt("%.2e", net) + " over " + std::to_string(model.parameter_count()) +
               " parameters, " + fmt("%.1f s", elapsed);
  return o;
}

// 2. Architecture invariants ---------------------------------------------------

Outcome architecture() {
  Outcome o;
  const MhNetConfig c = gradient_model();
  auto model = MhNetModel::build(c, 2001);
  Rng rng(2002);
  const Tensor x = random_tensor({c.input_channels, c.input_len}, rng, -1.0, 1.0, false);
  NoGradGuard no_grad;

  auto& gate_bias = model.onoff_layers().back().bias.mutable_data()[0];
  gate_bias = 1e6;
  MhNetOutput y = model.forward(x);
  bool open = true, shut = true;
  for (std::size_t u = 0; u < c.output_len; ++u)
    open = open && y.onoff_prob[u] == 1.0 && y.gated[u] == y.power[u];
  gate_bias = -1e6;
  y = model.forward(x);
  for (std::size_t u = 0; u < c.output_len; ++u)
    shut = shut && y.onoff_prob[u] == 0.0 && y.gated[u] == 0.0;
  o.require(open, "gate=1 does not pass power through");
  o.require(shut, "gate=0 does not zero the output");

  double worst_sum = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor e = random_tensor({1 + rng.below(300)}, rng, -50.0, 50.0, false);
    const Tensor a = ops::softmax(e);
    double total = 0.0;
    for (double v : a.data()) total += v;
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));
  }
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor w = random_tensor({c.input_channels, c.input_len}, rng, -3.0, 3.0, false);
    const auto att = model.attention(model.forward_features(w));
    double total = 0.0;
    for (double v : att.alphas.data()) total += v;
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));
  }
  o.require(worst_sum <= 1e-12, "softmax sum off by " + fmt("%.3g", worst_sum));

  // Perturb one input sample and measure the span each head's first layer
  // responds over.
  std::string spans;
  const std::size_t T = 64;
  for (const auto& head : model.heads()) {
    const auto& layer = head.layers.front();
    const Tensor in = random_tensor({c.input_channels, T}, rng, -1.0, 1.0, false);
    Tensor bumped = in.detach();
    bumped.mutable_data()[T / 2] += 1.0;
    const Tensor a = ops::conv1d(in, layer.weight, layer.bias, layer.dilation, ops::Padding::kSame);
    const Tensor b =
        ops::conv1d(bumped, layer.weight, layer.bias, layer.dilation, ops::Padding::kSame);
    std::size_t lo = T, hi = 0;
    for (std::size_t ch = 0; ch < a.dim(0); ++ch)
      for (std::size_t t = 0; t < T; ++t)
        if (a.at(ch, t) != b.at(ch, t)) {
          lo = std::min(lo, t);
          hi = std::max(hi, t);
        }
    const std::size_t span = hi >= lo ? hi - lo + 1 : 0;
    const std::size_t expected = ops::receptive_field(c.kernel_size, layer.dilation);
    o.require(span == expected, "d=" + std::to_string(layer.dilation) + " span " +
                                    std::to_string(span) + " != " + std::to_string(expected));
    spans += (spans.empty() ? "" : ", ") + std::string("d=") + std::to_string(layer.dilation) +
             ":" + std::to_string(span);
  }
  if (o.pass)
    o.detail = "gate identity holds at 0 and 1, max |sum(softmax)-1| " + fmt("%.1e", worst_sum) +
               ", receptive fields " + spans;
  return o;
}

// 3. Metric oracles ------------------------------------------------------------

Outcome metric_oracles() {
  Outcome o;
  Rng rng(3001);
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
  double worst_mae = 0.0, worst_sae = 0.0;
  std::size_t f1_mismatch = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(2000);
    std::vector<double> a(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform(0.0, 3000.0);
      p[i] = rng.uniform(0.0, 3000.0);
    }
    double loop = 0.0;
    for (std::size_t i = 0; i < n; ++i) loop += std::fabs(a[i] - p[i]);
    worst_mae = std::max(worst_mae, rel(metrics::mae(a, p), loop / static_cast<double>(n)));

    const std::size_t m = 1 + rng.below(n);
    const std::size_t periods = n / m;
    double sae_loop = 0.0;
    for (std::size_t k = 0; k < periods; ++k) {
      double sa = 0.0, sp = 0.0;
      for (std::size_t i = k * m; i < (k + 1) * m; ++i) {
        sa += a[i];
        sp += p[i];
      }
      sae_loop += std::fabs(sa - sp) / static_cast<double>(m);
    }
    worst_sae = std::max(worst_sae,
                         rel(metrics::sae(a, p, m), sae_loop / static_cast<double>(periods)));

    std::vector<std::uint8_t> pb(n), ab(n);
    const double rate_p = rng.uniform(), rate_a = rng.uniform();
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      pb[i] = rng.uniform() < rate_p;
      ab[i] = rng.uniform() < rate_a;
      tp += pb[i] && ab[i];
      fp += pb[i] && !ab[i];
      fn += !pb[i] && ab[i];
    }
    const double pr = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double rc = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    const double f = pr + rc > 0.0 ? 200.0 * pr * rc / (pr + rc) : 0.0;
    const auto got = metrics::f1(pb, ab);
    if (got.true_positive != tp || got.false_positive != fp || got.false_negative != fn ||
        rel(got.f1_percent, f) > 1e-12 || rel(got.precision, pr) > 1e-12 ||
        rel(got.recall, rc) > 1e-12)
      ++f1_mismatch;
  }
  o.require(worst_mae <= 1e-12, "mae error " + fmt("%.3g", worst_mae));
  o.require(worst_sae <= 1e-12, "sae error " + fmt("%.3g", worst_sae));
  o.require(f1_mismatch == 0, std::to_string(f1_mismatch) + " f1 mismatches");

  std::vector<std::uint8_t> pred(10, 1), act(10, 1);
  act[8] = act[9] = 0;
  const auto ex = metrics::f1(pred, act);
  o.require(ex.true_positive == 8 && ex.false_positive == 2 && ex.false_negative == 0,
            "worked example counts");
  o.require(std::abs(ex.f1_percent - 88.89) < 0.005, "worked example F1 " + fmt("%.4f", ex.f1_percent));
  if (o.pass)
    o.detail = "100 instances each, max rel error mae " + fmt("%.1e", worst_mae) + ", sae " +
               fmt("%.1e", worst_sae) + ", f1 exact; TP=8 FP=2 FN=0 -> F1 " +
               fmt("%.2f%%", ex.f1_percent);
  return o;
}

// 4. Toy disaggregation --------------------------------------------------------

MhNetConfig small_model() {
  MhNetConfig c;
  c.input_len = 128;
  c.output_len = 32;
  c.layers_per_head = 2;
  c.channels_per_layer = 8;
  c.attention_hidden = 8;
  c.fc_hidden = 16;
  return c;
}

Outcome toy_disaggregation() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  const auto catalog = sim::default_catalog();
  const std::vector<sim::ApplianceModel> apps{sim::find_appliance(catalog, "EK"),
                                              sim::find_appliance(catalog, "CF")};
  const double sigma = 10.0;
  const auto train_series =
      sim::synthesize(apps, sim::generate_schedule(apps, 7200, 4001, 1.0),
                      sim::VoltageScenario::constant(7200), sigma, 4002);
  const auto test_series =
      sim::synthesize(apps, sim::generate_schedule(apps, 3600, 4003, 1.0),
                      sim::VoltageScenario::constant(3600), sigma, 4004);
  std::string summary;
  for (std::size_t k = 0; k < apps.size(); ++k) {
    const auto& a = apps[k];
    data::WindowSpec spec;
    spec.input_len = 128;
    spec.output_len = 32;
    spec.stride = 8;
    spec.on_threshold = 0.05 * a.rated_power;
    const auto windows = data::make_windows(train_series.aggregate_p, train_series.aggregate_q,
                                            train_series.appliance_p[k], spec, std::nullopt, {},
                                            a.name);
    MhNetConfig mc = small_model();
    mc.output_scale = a.rated_power;
    auto model = MhNetModel::build(mc, 4005 + k);
    train::TrainConfig tc;
    tc.epochs = 50;
    tc.learning_rate = 3e-3;
    tc.seed = 4007 + k;
    train::train(model, windows, tc);

    auto test_spec = spec;
    test_spec.stride = spec.output_len;
    const auto test = data::make_windows(test_series.aggregate_p, test_series.aggregate_q,
                                         test_series.appliance_p[k], test_spec, windows.norm, {},
                                         a.name);
    metrics::Thresholds th;
    th.on_threshold = spec.on_threshold;
    const auto row = metrics::evaluate(model, test, th);
    const double mae_pct = 100.0 * row.mae / a.rated_power;
    o.require(row.f1 >= 90.0, a.name + " F1 " + fmt("%.2f", row.f1));
    o.require(mae_pct <= 10.0, a.name + " MAE " + fmt("%.1f%% of rated", mae_pct));
    summary += (summary.empty() ? "" : ", ") + a.name + " F1 " + fmt("%.2f", row.f1) + " MAE " +
               fmt("%.2f W", row.mae) + " (" + fmt("%.2f%%", mae_pct) + ")";
  }
  o.detail = (o.pass ? summary : o.detail + " [" + summary + "]") + ", " +
             fmt("%.0f s", seconds_since(t0));
  return o;
}

// 5. Dynamic-voltage protocol --------------------------------------------------

Outcome dynamic_voltage() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  const auto catalog = sim::default_catalog();
  train::ProtocolConfig pc;
  for (const char* name : {"EK", "OH", "IB", "CF", "LT"})
    pc.appliances.push_back(sim::find_appliance(catalog, name));
  pc.targets = {"EK", "OH", "IB"};
  pc.train_duration_s = 21600;
  pc.test_duration_s = 3600;
  pc.noise_sigma = 5.0;
  pc.train.epochs = 50;
  pc.train.learning_rate = 3e-3;
  pc.seed = 7;
  const auto result = train::run_protocol(pc);
  std::string summary;
  for (const auto& name : pc.targets) {
    const double c = result.constant_trained.row(name).mae;
    const double d = result.dynamic_trained.row(name).mae;
    const double ratio = c / d;
    o.require(ratio >= 3.0, name + " ratio " + fmt("%.2f", ratio));
    summary += (summary.empty() ? "" : ", ") + name + " " + fmt("%.1f", c) + "/" +
               fmt("%.1f W", d) + " = " + fmt("%.2f", ratio);
  }
  o.detail = (o.pass ? "" : o.detail + " ") + "[constant/dynamic MAE: " + summary + "], " +
             fmt("%.0f s", seconds_since(t0));
  return o;
}

// 6. Simulator fidelity --------------------------------------------------------

Outcome simulator_fidelity() {
  Outcome o;
  const auto catalog = sim::default_catalog();
  const std::size_t n = 100000;
  const double sigma = 10.0;
  const auto series = sim::synthesize(catalog, sim::generate_schedule(catalog, n, 6001, 1.0),
                                      sim::VoltageScenario::random_steps(n, 6002), sigma, 6003);
  double sum = 0.0, sq = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    double p = 0.0;
    for (std::size_t a = 0; a < catalog.size(); ++a) p += series.appliance_p[a][t];
    const double r = series.aggregate_p[t] - p;
    sum += r;
    sq += r * r;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = (sq - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1);
  const double var_err = std::abs(var / (sigma * sigma) - 1.0);
  o.require(var_err <= 0.05, "residual variance off by " + fmt("%.2f%%", 100 * var_err));

  Rng rng(6004);
  double worst_law = 0.0;
  for (const auto& a : catalog) {
    if (a.voltage_law != sim::VoltageLaw::kResistive) continue;
    for (std::size_t s = 1; s < a.state_count(); ++s)
      for (int i = 0; i < 200; ++i) {
        const double v1 = rng.uniform(205.0, 240.0), v2 = rng.uniform(205.0, 240.0);
        const double ratio =
            sim::appliance_power(a, v1, s, 1e9).p / sim::appliance_power(a, v2, s, 1e9).p;
        const double want = (v1 / v2) * (v1 / v2);
        worst_law = std::max(worst_law, std::abs(ratio - want) / want);
        const double nominal = sim::appliance_power(a, 230.0, s, 1e9).p;
        const double at = sim::appliance_power(a, v1, s, 1e9).p;
        worst_law = std::max(worst_law,
                             std::abs(at / nominal - (v1 / 230.0) * (v1 / 230.0)));
      }
  }
  o.require(worst_law <= 1e-12, "resistive law error " + fmt("%.3g", worst_law));

  const auto& lt = sim::find_appliance(catalog, "LT");
  const double lo = sim::appliance_power(lt, 205.0, 1, 1e9).p;
  const double hi = sim::appliance_power(lt, 240.0, 1, 1e9).p;
  const double lt_var = std::abs(hi - lo) / std::max(lo, hi);
  o.require(lt_var < 0.02, "LT varies " + fmt("%.2f%%", 100 * lt_var));
  if (o.pass)
    o.detail = "residual variance " + fmt("%.2f", var) + " vs " + fmt("%.0f", sigma * sigma) +
               " (" + fmt("%.2f%%", 100 * var_err) + ") over 1e5 s, resistive (V/230)^2 error " +
               fmt("%.1e", worst_law) + ", LT 205-240 V spread " + fmt("%.2f%%", 100 * lt_var);
  return o;
}

// 7. Determinism ---------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

Outcome determinism() {
  Outcome o;
  testing::TempDir dir("acceptance");
  {
    std::ofstream(dir / "train.json") << R"({
      "model": {"input_len": 32, "output_len": 8, "layers_per_head": 2,
                "channels_per_layer": 4, "attention_hidden": 4, "fc_hidden": 8},
      "train": {"epochs": 5, "learning_rate": 0.003},
      "windows": {"stride": 4}})";
  }
  // Run the whole pipeline twice into separate directories.
  for (const std::string run : {"a", "b"}) {
    const auto d = dir / run;
    std::filesystem::create_directories(d);
    const bool ok =
        cli({"simulate", "--appliances", "EK,OH,IB,CF", "--duration", "1800", "--seed", "70",
             "--noise", "5", "--out", (d / "sim.csv").string()}) == 0 &&
        cli({"train", "--data", (d / "sim.csv").string(), "--appliance", "EK", "--config",
             (dir / "train.json").string(), "--seed", "71", "--out",
             (d / "models" / "EK.mhn").string()}) == 0 &&
        cli({"disaggregate", "--data", (d / "sim.csv").string(), "--models",
             (d / "models").string(), "--out", (d / "pred.csv").string()}) == 0 &&
        cli({"evaluate", "--pred", (d / "pred.csv").string(), "--truth",
             (d / "sim.csv").string(), "--sae-period", "300", "--out",
             (d / "eval.json").string()}) == 0;
    o.require(ok, "pipeline run " + run + " failed");
    if (!ok) return o;
  }
  for (const char* f : {"sim.csv", "models/EK.mhn", "models/EK.mhn.epochs.csv", "pred.csv",
                        "pred.long.csv", "eval.json", "eval.csv"})
    o.require(slurp(dir / "a" / f) == slurp(dir / "b" / f), std::string(f) + " differs");

  // Library-level: identical training runs and a save/load round trip.
  const auto ws = data::make_windows(
      std::vector<double>(200, 1.0), std::vector<double>(200, 0.0), [] {
        std::vector<double> v(200, 0.0);
        for (std::size_t t = 50; t < 120; ++t) v[t] = 100.0;
        return v;
      }(),
      [] {
        data::WindowSpec s;
        s.input_len = 32;
        s.output_len = 8;
        s.stride = 2;
        s.on_threshold = 5.0;
        return s;
      }());
  train::TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 72;
  auto m1 = MhNetModel::build(gradient_model(), 73);
  auto m2 = MhNetModel::build(gradient_model(), 73);
  const auto r1 = train::train(m1, ws, tc);
  const auto r2 = train::train(m2, ws, tc);
  o.require(r1.train_loss == r2.train_loss && r1.val_loss == r2.val_loss,
            "training losses differ");
  o.require(m1.flat_parameters() == m2.flat_parameters(), "trained parameters differ");

  ModelMetadata meta;
  meta.appliance = "EK";
  meta.norm = ws.norm;
  meta.on_threshold = 67.5;
  m1.set_metadata(meta);
  save(m1, dir / "rt.mhn");
  const auto back = load(dir / "rt.mhn");
  const auto pa = m1.flat_parameters(), pb = back.flat_parameters();
  const bool bits = pa.size() == pb.size() &&
                    std::memcmp(pa.data(), pb.data(), pa.size() * sizeof(double)) == 0;
  o.require(bits, "checkpoint parameters not bit-identical");
  o.require(back.config() == m1.config(), "checkpoint config differs");
  o.require(back.metadata().norm == meta.norm && back.metadata().appliance == "EK" &&
                back.metadata().on_threshold == 67.5,
            "checkpoint metadata differs");
  save(back, dir / "rt2.mhn");
  o.require(slurp(dir / "rt.mhn") == slurp(dir / "rt2.mhn"), "re-saved checkpoint differs");
  if (o.pass)
    o.detail = "simulate/train/disaggregate/evaluate outputs byte-identical across runs, "
               "checkpoint round trip bit-exact (" +
               std::to_string(pa.size()) + " parameters)";
  return o;
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "gradient correctness", gradients},
    {2, "architecture invariants", architecture},
    {3, "metric oracle equivalence", metric_oracles},
    {4, "toy disaggregation", toy_disaggregation},
    {5, "dynamic-voltage directional result", dynamic_voltage},
    {6, "simulator fidelity", simulator_fidelity},
    {7, "determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> selected;
  app.add_option("criteria", selected, "Criterion numbers (default: all)")
      ->check(CLI::Range(1, 7));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty())
    for (const auto& c : kCriteria) selected.push_back(c.id);

  log::set_level(log::Level::kError);
  bool all = true;
  for (int id : selected) {
    const Criterion& c = kCriteria[id - 1];
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    all = all && out.pass;
    std::printf("criterion %d (%s): %s - %s\n", c.id, c.name, out.pass ? "PASS" : "FAIL",
                out.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
