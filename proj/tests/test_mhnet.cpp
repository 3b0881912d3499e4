#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "nilm/errors.hpp"
#include "nilm/mhnet.hpp"
#include "nilm/ops.hpp"
#include "nilm/training.hpp"
#include "test_util.hpp"

namespace nilm {
namespace {

using testing::random_tensor;

MhNetConfig tiny_config() {
  MhNetConfig c;
  c.input_len = 32;
  c.output_len = 8;
  c.layers_per_head = 2;
  c.channels_per_layer = 4;
  c.attention_hidden = 4;
  c.fc_hidden = 8;
  return c;
}

Tensor random_window(const MhNetConfig& c, std::uint64_t seed) {
  Rng rng(seed);
  return random_tensor({c.input_channels, c.input_len}, rng, -1.0, 1.0, false);
}

void set_onoff_bias(MhNetModel& model, double value) {
  model.onoff_layers().back().bias.mutable_data()[0] = value;
}

TEST(MhNetConfig, Validation) {
  EXPECT_NO_THROW(MhNetConfig{}.validate());
  auto bad = [](auto mutate) {
    MhNetConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](auto& c) { c.output_len = 65; c.input_len = 64; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.output_len = 63; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.kernel_size = 4; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.head_dilations.clear(); }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.head_dilations = {1, 0}; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.input_channels = 1; }).validate(), ConfigError);
  EXPECT_THROW(MhNetModel::build(bad([](auto& c) { c.kernel_size = 2; }), 0), ConfigError);
  EXPECT_EQ(MhNetConfig{}.head_dilations, (std::vector<std::size_t>{1, 2, 3}));
}

TEST(MhNetConfig, JsonRoundTrip) {
  MhNetConfig c = tiny_config();
  c.output_scale = 1350.0;
  const nlohmann::json j = c;
  EXPECT_EQ(j.get<MhNetConfig>(), c);
  EXPECT_EQ(nlohmann::json::object().get<MhNetConfig>(), MhNetConfig{});
}

TEST(MhNetBuild, DeterministicPerSeed) {
  const auto a = MhNetModel::build(tiny_config(), 5).flat_parameters();
  const auto b = MhNetModel::build(tiny_config(), 5).flat_parameters();
  const auto c = MhNetModel::build(tiny_config(), 6).flat_parameters();
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(MhNetBuild, ParameterShapesAndInitBounds) {
  const MhNetConfig c = tiny_config();
  const auto model = MhNetModel::build(c, 3);
  std::size_t expected = 0;
  std::size_t in = c.input_channels;
  for (std::size_t l = 0; l < c.layers_per_head; ++l) {
    expected += c.channels_per_layer * (in * c.kernel_size + 1);
    in = c.channels_per_layer;
  }
  expected *= c.head_dilations.size();
  const std::size_t f = c.feature_channels();
  expected += c.attention_hidden * (f + 1) + (c.attention_hidden + 1);
  expected += 2 * (c.fc_hidden * (2 * f + 1) + (c.fc_hidden + 1));
  EXPECT_EQ(model.parameter_count(), expected);

  for (const auto& p : model.parameters()) {
    const auto& s = p.tensor.shape();
    if (p.name.ends_with(".bias")) {
      const double want = p.name == "power.layer1.bias" ? 1.0 : 0.0;
      for (double v : p.tensor.data()) EXPECT_EQ(v, want) << p.name;
      continue;
    }
    ASSERT_EQ(s.size(), 3u) << p.name;
    // Fans recomputed from the weight shape [out x in x k].
    const double fan_in = static_cast<double>(s[1] * s[2]);
    const double fan_out = static_cast<double>(s[0] * s[2]);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    EXPECT_DOUBLE_EQ(glorot_bound(s[0], s[1], s[2]), bound);
    double peak = 0.0;
    for (double v : p.tensor.data()) {
      EXPECT_LE(std::abs(v), bound) << p.name;
      peak = std::max(peak, std::abs(v));
    }
    if (p.tensor.size() >= 16) {
      EXPECT_GT(peak, 0.5 * bound) << p.name;
    }
  }
  EXPECT_EQ(model.parameters().front().name, "head0.layer0.weight");
  EXPECT_EQ(model.parameters().back().name, "onoff.layer1.bias");
}

TEST(MhNetFeatures, ShapeAndZeroWindow) {
  const MhNetConfig c = tiny_config();
  auto model = MhNetModel::build(c, 1);
  const Tensor f = model.forward_features(random_window(c, 2));
  EXPECT_EQ(f.dim(0), c.feature_channels());
  EXPECT_EQ(f.dim(1), c.input_len);
  const Tensor z = model.forward_features(Tensor({2, c.input_len}, 0.0));
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(model.forward_features(Tensor({2, c.input_len + 1})), DimensionError);
  EXPECT_THROW(model.forward(Tensor({3, c.input_len})), DimensionError);
}

TEST(MhNetFeatures, SingleHeadMatchesPlainStack) {
  MhNetConfig c = tiny_config();
  c.head_dilations = {1};
  const auto model = MhNetModel::build(c, 4);
  const Tensor x = random_window(c, 5);
  Tensor h = x;
  for (const auto& layer : model.heads().front().layers)
    h = ops::relu(ops::conv1d(h, layer.weight, layer.bias, 1, ops::Padding::kSame));
  const Tensor f = model.forward_features(x);
  ASSERT_EQ(f.shape(), h.shape());
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(f[i], h[i]);
}

TEST(MhNetFeatures, TranslationAlignment) {
  const MhNetConfig c = tiny_config();
  const auto model = MhNetModel::build(c, 6);
  Rng rng(7);
  const std::size_t shift = 3;
  const Tensor series = random_tensor({2, c.input_len + shift}, rng, -1, 1, false);
  const Tensor a = model.forward_features(ops::slice_columns(series, 0, c.input_len));
  const Tensor b = model.forward_features(ops::slice_columns(series, shift, c.input_len));
  std::size_t reach = 0;
  for (std::size_t d : c.head_dilations)
    reach = std::max(reach, c.layers_per_head * (c.kernel_size - 1) * d / 2);
  ASSERT_LT(reach + shift, c.input_len - reach);
  for (std::size_t r = 0; r < a.dim(0); ++r)
    for (std::size_t t = reach; t + shift < c.input_len - reach; ++t)
      EXPECT_NEAR(b.at(r, t), a.at(r, t + shift), 1e-10);
}

TEST(MhNetAttention, ConstantFeatures) {
  const MhNetConfig c = tiny_config();
  const auto model = MhNetModel::build(c, 8);
  std::vector<double> v(c.feature_channels() * c.input_len);
  for (std::size_t r = 0; r < c.feature_channels(); ++r)
    for (std::size_t t = 0; t < c.input_len; ++t) v[r * c.input_len + t] = 0.1 * double(r) + 0.3;
  const AttentionOutput att = model.attention(Tensor({c.feature_channels(), c.input_len}, v));
  for (double a : att.alphas.data()) EXPECT_NEAR(a, 1.0 / double(c.input_len), 1e-15);
  for (std::size_t r = 0; r < c.feature_channels(); ++r)
    EXPECT_NEAR(att.context[r], v[r * c.input_len], 1e-12);
}

TEST(MhNetAttention, ContextMatchesLoopOracle) {
  const MhNetConfig c = tiny_config();
  const auto model = MhNetModel::build(c, 9);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Tensor feats = model.forward_features(random_window(c, 100 + s));
    const AttentionOutput att = model.attention(feats);
    double total = 0.0;
    for (double a : att.alphas.data()) total += a;
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (std::size_t r = 0; r < feats.dim(0); ++r) {
      double ctx = 0.0;
      for (std::size_t t = 0; t < feats.dim(1); ++t) ctx += att.alphas[t] * feats.at(r, t);
      EXPECT_NEAR(att.context[r], ctx, 1e-12);
    }
    // Shifting every score leaves the weights unchanged.
    const Tensor shifted = ops::softmax(ops::add(att.scores, 17.5));
    for (std::size_t t = 0; t < shifted.size(); ++t)
      EXPECT_NEAR(shifted[t], att.alphas[t], 1e-12);
  }
}

TEST(MhNetForward, OutputRangesAndGating) {
  const MhNetConfig c = tiny_config();
  const auto model = MhNetModel::build(c, 10);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const MhNetOutput y = model.forward(random_window(c, 200 + s));
    ASSERT_EQ(y.gated.size(), c.output_len);
    for (std::size_t u = 0; u < c.output_len; ++u) {
      EXPECT_GE(y.power[u], 0.0);
      EXPECT_GT(y.onoff_prob[u], 0.0);
      EXPECT_LT(y.onoff_prob[u], 1.0);
      EXPECT_NEAR(y.gated[u], y.power[u] * y.onoff_prob[u], 1e-12);
    }
  }
}

TEST(MhNetForward, GateIdentityAtOneAndZero) {
  const MhNetConfig c = tiny_config();
  auto model = MhNetModel::build(c, 11);
  const Tensor x = random_window(c, 12);
  set_onoff_bias(model, 1e6);
  MhNetOutput y = model.forward(x);
  for (std::size_t u = 0; u < c.output_len; ++u) {
    EXPECT_EQ(y.onoff_prob[u], 1.0);
    EXPECT_EQ(y.gated[u], y.power[u]);
  }
  set_onoff_bias(model, -1e6);
  y = model.forward(x);
  for (std::size_t u = 0; u < c.output_len; ++u) {
    EXPECT_EQ(y.onoff_prob[u], 0.0);
    EXPECT_EQ(y.gated[u], 0.0);
  }
}

TEST(MhNetForward, GateMonotone) {
  const MhNetConfig c = tiny_config();
  auto model = MhNetModel::build(c, 13);
  const Tensor x = random_window(c, 14);
  std::vector<double> previous(c.output_len, 0.0);
  for (double bias = -6.0; bias <= 6.0; bias += 0.5) {
    set_onoff_bias(model, bias);
    const MhNetOutput y = model.forward(x);
    for (std::size_t u = 0; u < c.output_len; ++u) {
      EXPECT_GE(y.gated[u], previous[u]);
      previous[u] = y.gated[u];
    }
  }
}

TEST(MhNetForward, CopyIsDeep) {
  const auto model = MhNetModel::build(tiny_config(), 15);
  MhNetModel copy = model;
  copy.onoff_layers().back().bias.mutable_data()[0] = 42.0;
  EXPECT_NE(model.onoff_layers().back().bias[0], 42.0);
}

TEST(MhNetGradient, EndToEndMatchesFiniteDifferences) {
  const MhNetConfig c = tiny_config();
  const auto model = MhNetModel::build(c, 16);
  Rng rng(17);
  const Tensor x = random_window(c, 18);
  std::vector<double> target(c.output_len);
  std::vector<std::uint8_t> onoff(c.output_len);
  for (std::size_t u = 0; u < c.output_len; ++u) {
    target[u] = rng.uniform(0.0, 2.0);
    onoff[u] = rng.uniform() < 0.5;
  }
  std::vector<Tensor> params;
  for (const auto& p : model.parameters()) params.push_back(p.tensor);
  const double err = testing::gradient_error(
      [&](const std::vector<Tensor>&) {
        const MhNetOutput y = model.forward(x);
        return train::loss(y.gated, y.onoff_prob, target, onoff, 1.0);
      },
      params, 1e-6);
  EXPECT_LE(err, 1e-4);
}

// Checkpoints -----------------------------------------------------------------

MhNetModel saved_model() {
  auto m = MhNetModel::build(tiny_config(), 19);
  ModelMetadata meta;
  meta.appliance = "EK";
  meta.norm.mean = {812.5, 3.25};
  meta.norm.std = {403.0, 1.5};
  meta.on_threshold = 67.5;
  m.set_metadata(meta);
  return m;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  testing::TempDir dir("ckpt");
  const auto model = saved_model();
  save(model, dir / "m.mhn");
  const auto loaded = load(dir / "m.mhn");
  EXPECT_EQ(loaded.config(), model.config());
  EXPECT_EQ(loaded.metadata(), model.metadata());
  EXPECT_EQ(loaded.flat_parameters(), model.flat_parameters());
  const Tensor x = random_window(model.config(), 20);
  const auto a = model.forward(x).gated;
  const auto b = loaded.forward(x).gated;
  for (std::size_t u = 0; u < a.size(); ++u) EXPECT_EQ(a[u], b[u]);
  EXPECT_EQ(serialize(loaded), serialize(model));
}

TEST(Checkpoint, Layout) {
  const auto bytes = serialize(saved_model());
  ASSERT_GT(bytes.size(), 16u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MHN1");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
  const std::uint32_t json_len = bytes[8] | bytes[9] << 8 | bytes[10] << 16 | bytes[11] << 24;
  const auto header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + json_len);
  EXPECT_TRUE(header.contains("config"));
  EXPECT_TRUE(header.contains("metadata"));
  EXPECT_EQ(bytes.size(), 12 + json_len + 8 * saved_model().parameter_count() + 4);
}

LoadError::Cause cause_of(std::vector<std::uint8_t> bytes) {
  try {
    (void)deserialize(bytes);
  } catch (const LoadError& e) {
    return e.cause();
  }
  ADD_FAILURE() << "deserialize accepted corrupt bytes";
  return LoadError::Cause::kIo;
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto good = serialize(saved_model());
  auto payload = good;
  payload[good.size() - 20] ^= 0x01;
  EXPECT_EQ(cause_of(payload), LoadError::Cause::kChecksum);
  auto version = good;
  version[4] = 2;
  EXPECT_EQ(cause_of(version), LoadError::Cause::kVersion);
  auto magic = good;
  magic[0] = 'X';
  EXPECT_EQ(cause_of(magic), LoadError::Cause::kMagic);
  EXPECT_EQ(cause_of(std::vector<std::uint8_t>(good.begin(), good.begin() + 10)),
            LoadError::Cause::kTruncated);
  EXPECT_EQ(cause_of(std::vector<std::uint8_t>(good.begin(), good.end() - 9)),
            LoadError::Cause::kChecksum);
  try {
    (void)load("/nonexistent/dir/model.mhn");
    ADD_FAILURE();
  } catch (const LoadError& e) {
    EXPECT_EQ(e.cause(), LoadError::Cause::kIo);
  }
}

}  // namespace
}  // namespace nilm
