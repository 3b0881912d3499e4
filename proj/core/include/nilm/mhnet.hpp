#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nilm/normalization.hpp"
#include "nilm/tensor.hpp"

namespace nilm {

/// Topology of one appliance's multi-head disaggregator.
struct MhNetConfig {
  std::size_t input_len = 256;   // m, samples at 1 Hz
  std::size_t output_len = 64;   // L, centred inside the input window
  std::size_t input_channels = 2;  // active P and reactive Q
  std::vector<std::size_t> head_dilations{1, 2, 3};
  std::size_t layers_per_head = 3;
  std::size_t channels_per_layer = 16;
  std::size_t kernel_size = 5;
  std::size_t attention_hidden = 16;
  std::size_t fc_hidden = 32;
  // Watts per unit of the power head's final pre-activation.
  double output_scale = 1.0;

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  std::size_t feature_channels() const {
    return channels_per_layer * head_dilations.size();
  }
  /// Samples between the window edge and the first output position.
  std::size_t margin() const { return (input_len - output_len) / 2; }

  bool operator==(const MhNetConfig&) const = default;
};

void to_json(nlohmann::json& j, const MhNetConfig& config);
void from_json(const nlohmann::json& j, MhNetConfig& config);

/// Everything needed to run a trained model on raw meter data.
struct ModelMetadata {
  std::string appliance;
  Normalization norm;
  double on_threshold = 0.0;  // watts
  std::size_t min_on_s = 3;

  bool operator==(const ModelMetadata&) const = default;
};

void to_json(nlohmann::json& j, const ModelMetadata& meta);
void from_json(const nlohmann::json& j, ModelMetadata& meta);

/// Weights of one convolution. Pointwise (fully connected per timestep)
/// layers use kernel size 1.
struct ConvLayer {
  Tensor weight;  // [out x in x k]
  Tensor bias;    // [out]
  std::size_t dilation = 1;
};

struct Head {
  std::size_t dilation = 1;
  std::vector<ConvLayer> layers;
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

struct AttentionOutput {
  Tensor scores;   // e_t, [m]
  Tensor alphas;   // softmax(e), [m]
  Tensor context;  // sum_t alpha_t * h_t, [C_total]
};

struct MhNetOutput {
  Tensor power;       // [L], watts, >= 0
  Tensor onoff_prob;  // [L], (0, 1)
  Tensor gated;       // power * onoff_prob
};

/// Three parallel dilated-convolution heads, attention pooling over the
/// concatenated features, and two pointwise heads (power regression and
/// on/off classification) whose product is the disaggregated output.
///
/// Copying a model deep-copies its parameters.
class MhNetModel {
 public:
  /// Weights ~ U(-s, s) with s = sqrt(6 / (fan_in + fan_out)). Biases are zero
  /// except the final power-head bias, which starts at 1.
  static MhNetModel build(const MhNetConfig& config, std::uint64_t seed);

  MhNetModel(const MhNetModel& other);
  MhNetModel& operator=(const MhNetModel& other);
  MhNetModel(MhNetModel&&) noexcept = default;
  MhNetModel& operator=(MhNetModel&&) noexcept = default;

  const MhNetConfig& config() const { return config_; }
  const ModelMetadata& metadata() const { return metadata_; }
  void set_metadata(ModelMetadata meta) { metadata_ = std::move(meta); }

  /// Parameters in declaration order (the checkpoint blob order).
  std::vector<NamedParameter> parameters() const;
  std::size_t parameter_count() const;
  std::vector<double> flat_parameters() const;
  void assign_parameters(std::span<const double> flat);
  void zero_grad();

  const std::vector<Head>& heads() const { return heads_; }
  const std::vector<ConvLayer>& attention_layers() const { return attention_; }
  const std::vector<ConvLayer>& power_layers() const { return power_; }
  const std::vector<ConvLayer>& onoff_layers() const { return onoff_; }
  std::vector<ConvLayer>& onoff_layers() { return onoff_; }
  std::vector<Head>& heads() { return heads_; }

  /// window [2 x m] -> concatenated head outputs [C_total x m].
  Tensor forward_features(const Tensor& window) const;
  /// Scores each feature column, normalises, and pools a context vector.
  AttentionOutput attention(const Tensor& features) const;
  MhNetOutput forward(const Tensor& window) const;

 private:
  MhNetModel() = default;
  void check_window(const Tensor& window) const;

  MhNetConfig config_;
  ModelMetadata metadata_;
  std::vector<Head> heads_;
  std::vector<ConvLayer> attention_;
  std::vector<ConvLayer> power_;
  std::vector<ConvLayer> onoff_;
};

/// Uniform init bound for a conv weight of shape [out x in x k].
double glorot_bound(std::size_t out_channels, std::size_t in_channels,
                    std::size_t kernel_size);

// Checkpoint I/O --------------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'M', 'H', 'N', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian: magic "MHN1", u32 version, u32 JSON length + UTF-8 JSON
/// ({"config", "metadata"}), parameters as f64 in declaration order, then the
/// CRC-32 of every preceding byte.
std::vector<std::uint8_t> serialize(const MhNetModel& model);
MhNetModel deserialize(std::span<const std::uint8_t> bytes);

void save(const MhNetModel& model, const std::filesystem::path& path);
MhNetModel load(const std::filesystem::path& path);

}  // namespace nilm
