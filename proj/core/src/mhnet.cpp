#include "nilm/mhnet.hpp"

#include <cmath>

#include "nilm/errors.hpp"
#include "nilm/ops.hpp"
#include "nilm/random.hpp"

namespace nilm {

void MhNetConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("mhnet config: " + msg); };
  if (output_len < 1) fail("output_len must be >= 1");
  if (input_len < output_len) fail("input_len must be >= output_len");
  if ((input_len - output_len) % 2 != 0)
    fail("input_len - output_len must be even for a centred output span");
  if (input_channels != 2) fail("input_channels must be 2 (P and Q)");
  if (head_dilations.empty()) fail("head_dilations must be nonempty");
  for (std::size_t d : head_dilations)
    if (d < 1) fail("every head dilation must be >= 1");
  if (layers_per_head < 1) fail("layers_per_head must be >= 1");
  if (channels_per_layer < 1) fail("channels_per_layer must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) fail("kernel_size must be odd");
  if (attention_hidden < 1) fail("attention_hidden must be >= 1");
  if (fc_hidden < 1) fail("fc_hidden must be >= 1");
  if (!(output_scale > 0.0) || !std::isfinite(output_scale))
    fail("output_scale must be positive");
}

void to_json(nlohmann::json& j, const MhNetConfig& c) {
  j = nlohmann::json{{"input_len", c.input_len},
                     {"output_len", c.output_len},
                     {"input_channels", c.input_channels},
                     {"head_dilations", c.head_dilations},
                     {"layers_per_head", c.layers_per_head},
                     {"channels_per_layer", c.channels_per_layer},
                     {"kernel_size", c.kernel_size},
                     {"attention_hidden", c.attention_hidden},
                     {"fc_hidden", c.fc_hidden},
                     {"output_scale", c.output_scale}};
}

void from_json(const nlohmann::json& j, MhNetConfig& c) {
  MhNetConfig d;
  c.input_len = j.value("input_len", d.input_len);
  c.output_len = j.value("output_len", d.output_len);
  c.input_channels = j.value("input_channels", d.input_channels);
  c.head_dilations = j.value("head_dilations", d.head_dilations);
  c.layers_per_head = j.value("layers_per_head", d.layers_per_head);
  c.channels_per_layer = j.value("channels_per_layer", d.channels_per_layer);
  c.kernel_size = j.value("kernel_size", d.kernel_size);
  c.attention_hidden = j.value("attention_hidden", d.attention_hidden);
  c.fc_hidden = j.value("fc_hidden", d.fc_hidden);
  c.output_scale = j.value("output_scale", d.output_scale);
}

void to_json(nlohmann::json& j, const ModelMetadata& m) {
  j = nlohmann::json{{"appliance", m.appliance},
                     {"norm_mean", m.norm.mean},
                     {"norm_std", m.norm.std},
                     {"on_threshold", m.on_threshold},
                     {"min_on_s", m.min_on_s}};
}

void from_json(const nlohmann::json& j, ModelMetadata& m) {
  m.appliance = j.value("appliance", std::string{});
  m.norm.mean = j.value("norm_mean", Normalization{}.mean);
  m.norm.std = j.value("norm_std", Normalization{}.std);
  m.on_threshold = j.value("on_threshold", 0.0);
  m.min_on_s = j.value("min_on_s", std::size_t{3});
}

double glorot_bound(std::size_t out_channels, std::size_t in_channels,
                    std::size_t kernel_size) {
  const double fan_in = static_cast<double>(in_channels * kernel_size);
  const double fan_out = static_cast<double>(out_channels * kernel_size);
  return std::sqrt(6.0 / (fan_in + fan_out));
}

namespace {

ConvLayer make_layer(Rng& rng, std::size_t out, std::size_t in,
                     std::size_t k, std::size_t dilation) {
  const double bound = glorot_bound(out, in, k);
  std::vector<double> w(out * in * k);
  for (double& v : w) v = rng.uniform(-bound, bound);
  return ConvLayer{Tensor(Shape{out, in, k}, std::move(w), true),
                   Tensor(Shape{out}, 0.0, true), dilation};
}

Tensor deep_copy(const Tensor& t) {
  Tensor copy = t.detach();
  copy.set_requires_grad(t.requires_grad());
  return copy;
}

std::vector<ConvLayer> deep_copy(const std::vector<ConvLayer>& layers) {
  std::vector<ConvLayer> out;
  out.reserve(layers.size());
  for (const auto& l : layers)
    out.push_back(ConvLayer{deep_copy(l.weight), deep_copy(l.bias), l.dilation});
  return out;
}

Tensor apply(const ConvLayer& layer, const Tensor& x, ops::Padding padding) {
  return ops::conv1d(x, layer.weight, layer.bias, layer.dilation, padding);
}

// Two pointwise layers with a relu between; returns the [L] pre-activation.
Tensor pointwise_stack(const std::vector<ConvLayer>& layers, const Tensor& x) {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = apply(layers[i], h, ops::Padding::kValid);
    if (i + 1 < layers.size()) h = ops::relu(h);
  }
  return ops::reshape(h, Shape{h.dim(1)});
}

}  // namespace

MhNetModel MhNetModel::build(const MhNetConfig& config, std::uint64_t seed) {
  config.validate();
  MhNetModel model;
  model.config_ = config;
  Rng init(seed);

  const std::size_t ch = config.channels_per_layer;
  for (std::size_t d : config.head_dilations) {
    Head head{d, {}};
    std::size_t in = config.input_channels;
    for (std::size_t l = 0; l < config.layers_per_head; ++l) {
      head.layers.push_back(make_layer(init, ch, in, config.kernel_size, d));
      in = ch;
    }
    model.heads_.push_back(std::move(head));
  }

  const std::size_t features = config.feature_channels();
  model.attention_.push_back(make_layer(init, config.attention_hidden, features, 1, 1));
  model.attention_.push_back(make_layer(init, 1, config.attention_hidden, 1, 1));

  // Each output column is [h_u ; c], twice the feature width.
  for (auto* stack : {&model.power_, &model.onoff_}) {
    stack->push_back(make_layer(init, config.fc_hidden, 2 * features, 1, 1));
    stack->push_back(make_layer(init, 1, config.fc_hidden, 1, 1));
  }
  // A unit output bias keeps the relu-terminated power head active at
  // initialisation; with a zero bias it can die before the gate learns.
  model.power_.back().bias.mutable_data()[0] = 1.0;
  return model;
}

MhNetModel::MhNetModel(const MhNetModel& other)
    : config_(other.config_),
      metadata_(other.metadata_),
      attention_(deep_copy(other.attention_)),
      power_(deep_copy(other.power_)),
      onoff_(deep_copy(other.onoff_)) {
  for (const auto& h : other.heads_) heads_.push_back(Head{h.dilation, deep_copy(h.layers)});
}

MhNetModel& MhNetModel::operator=(const MhNetModel& other) {
  if (this != &other) {
    MhNetModel copy(other);
    *this = std::move(copy);
  }
  return *this;
}

std::vector<NamedParameter> MhNetModel::parameters() const {
  std::vector<NamedParameter> out;
  auto add_stack = [&out](const std::string& prefix, const std::vector<ConvLayer>& layers) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string base = prefix + ".layer" + std::to_string(i);
      out.push_back({base + ".weight", layers[i].weight});
      out.push_back({base + ".bias", layers[i].bias});
    }
  };
  for (std::size_t h = 0; h < heads_.size(); ++h)
    add_stack("head" + std::to_string(h), heads_[h].layers);
  add_stack("attention", attention_);
  add_stack("power", power_);
  add_stack("onoff", onoff_);
  return out;
}

std::size_t MhNetModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.size();
  return n;
}

std::vector<double> MhNetModel::flat_parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& p : parameters()) {
    auto d = p.tensor.data();
    flat.insert(flat.end(), d.begin(), d.end());
  }
  return flat;
}

void MhNetModel::assign_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count())
    throw DimensionError("assign_parameters: expected " +
                         std::to_string(parameter_count()) + " values, got " +
                         std::to_string(flat.size()));
  std::size_t offset = 0;
  for (auto& p : parameters()) {
    auto dst = p.tensor.mutable_data();
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), dst.size(), dst.begin());
    offset += dst.size();
  }
}

void MhNetModel::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

void MhNetModel::check_window(const Tensor& window) const {
  if (window.rank() != 2 || window.dim(0) != config_.input_channels ||
      window.dim(1) != config_.input_len)
    throw DimensionError("mhnet: window must be [" +
                         std::to_string(config_.input_channels) + " x " +
                         std::to_string(config_.input_len) + "], got " +
                         shape_to_string(window.shape()));
}

Tensor MhNetModel::forward_features(const Tensor& window) const {
  check_window(window);
  std::vector<Tensor> parts;
  parts.reserve(heads_.size());
  for (const Head& head : heads_) {
    Tensor h = window;
    for (const ConvLayer& layer : head.layers)
      h = ops::relu(apply(layer, h, ops::Padding::kSame));
    parts.push_back(std::move(h));
  }
  if (parts.size() == 1) return parts.front();
  return ops::concat(parts, 0);
}

AttentionOutput MhNetModel::attention(const Tensor& features) const {
  if (features.rank() != 2 || features.dim(0) != config_.feature_channels())
    throw DimensionError("mhnet attention: features must have " +
                         std::to_string(config_.feature_channels()) + " rows, got " +
                         shape_to_string(features.shape()));
  Tensor scores = pointwise_stack(attention_, features);
  Tensor alphas = ops::softmax(scores);
  Tensor context = ops::matvec(features, alphas);
  return AttentionOutput{std::move(scores), std::move(alphas), std::move(context)};
}

MhNetOutput MhNetModel::forward(const Tensor& window) const {
  Tensor features = forward_features(window);
  AttentionOutput att = attention(features);
  const std::size_t out_len = config_.output_len;
  Tensor centre = ops::slice_columns(features, config_.margin(), out_len);
  Tensor joined = ops::concat({centre, ops::repeat_columns(att.context, out_len)}, 0);

  Tensor power = ops::relu(ops::mul(pointwise_stack(power_, joined), config_.output_scale));
  Tensor onoff = ops::sigmoid(pointwise_stack(onoff_, joined));
  Tensor gated = ops::mul(power, onoff);
  return MhNetOutput{std::move(power), std::move(onoff), std::move(gated)};
}

}  // namespace nilm
