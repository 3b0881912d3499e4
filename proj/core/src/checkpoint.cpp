#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "nilm/errors.hpp"
#include "nilm/mhnet.hpp"

namespace nilm {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize(const MhNetModel& model) {
  const std::string header =
      nlohmann::json{{"config", model.config()}, {"metadata", model.metadata()}}.dump();
  const std::vector<double> params = model.flat_parameters();

  std::vector<std::uint8_t> out;
  out.reserve(16 + header.size() + params.size() * sizeof(double));
  out.insert(out.end(), std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  const std::size_t blob_at = out.size();
  out.resize(blob_at + params.size() * sizeof(double));
  std::memcpy(out.data() + blob_at, params.data(), params.size() * sizeof(double));
  put_u32(out, crc32_of(out));
  return out;
}

MhNetModel deserialize(std::span<const std::uint8_t> bytes) {
  using Cause = LoadError::Cause;
  if (bytes.size() < 16)
    throw LoadError(Cause::kTruncated, "checkpoint truncated: only " +
                                           std::to_string(bytes.size()) + " bytes");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw LoadError(Cause::kMagic, "not a checkpoint: bad magic bytes");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kCheckpointVersion)
    throw LoadError(Cause::kVersion, "unsupported checkpoint version " +
                                         std::to_string(version) + " (expected " +
                                         std::to_string(kCheckpointVersion) + ")");
  const std::uint32_t header_len = get_u32(bytes, 8);
  if (12 + static_cast<std::size_t>(header_len) + 4 > bytes.size())
    throw LoadError(Cause::kTruncated, "checkpoint truncated inside the config header");

  const std::size_t body = bytes.size() - 4;
  const std::uint32_t stored = get_u32(bytes, body);
  if (crc32_of(bytes.first(body)) != stored)
    throw LoadError(Cause::kChecksum, "checkpoint checksum mismatch");

  MhNetConfig config;
  ModelMetadata metadata;
  try {
    auto header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    config = header.at("config").get<MhNetConfig>();
    metadata = header.at("metadata").get<ModelMetadata>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(Cause::kConfig, std::string("checkpoint config unreadable: ") + e.what());
  }

  MhNetModel model = [&] {
    try {
      return MhNetModel::build(config, 0);
    } catch (const ConfigError& e) {
      throw LoadError(Cause::kConfig, std::string("checkpoint config invalid: ") + e.what());
    }
  }();
  model.set_metadata(std::move(metadata));

  const std::size_t blob_at = 12 + header_len;
  const std::size_t blob_bytes = body - blob_at;
  const std::size_t expected = model.parameter_count() * sizeof(double);
  if (blob_bytes != expected)
    throw LoadError(Cause::kTruncated, "checkpoint parameter blob holds " +
                                           std::to_string(blob_bytes) + " bytes, config needs " +
                                           std::to_string(expected));
  std::vector<double> params(model.parameter_count());
  std::memcpy(params.data(), bytes.data() + blob_at, expected);
  model.assign_parameters(params);
  return model;
}

void save(const MhNetModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

MhNetModel load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadError::Cause::kIo, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace nilm
