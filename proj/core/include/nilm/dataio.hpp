#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nilm/normalization.hpp"
#include "nilm/tensor.hpp"

namespace nilm::data {

enum class Format {
  kUkdale,  // whitespace separated `unix_ts watts`, no header
  kCsv,     // `t,value` with a header row
};

/// Fraction of malformed lines tolerated before ingestion fails.
inline constexpr double kMalformedTolerance = 0.001;

struct RawChannel {
  std::string source;
  std::vector<double> timestamps;  // unix seconds, strictly increasing
  std::vector<double> values;      // watts
  std::size_t malformed_lines = 0;
};

RawChannel load_channel(const std::filesystem::path& path, Format format);
RawChannel parse_channel(std::string_view text, Format format, std::string source);

/// A 1 Hz series on the integer grid start_s, start_s + 1, ...
struct RegularSeries {
  std::int64_t start_s = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  std::size_t length() const { return values.size(); }
};

/// Forward-fills onto the 1 Hz grid from ceil(first) to floor(last). Seconds
/// strictly inside a gap longer than gap_limit_s are marked invalid.
RegularSeries resample_1hz(const RawChannel& channel, double gap_limit_s);

/// Crops every series to the common time range.
std::vector<RegularSeries> align(std::span<const RegularSeries> series);

struct WindowSpec {
  std::size_t input_len = 256;   // m
  std::size_t output_len = 64;   // L
  std::size_t stride = 16;
  double on_threshold = 0.0;     // watts
  std::size_t min_on_s = 3;
};

struct Window {
  std::size_t start = 0;               // first input sample in the source series
  std::vector<double> input;           // [2 x m] row-major, normalised
  std::vector<double> target_power;    // [L] watts
  std::vector<std::uint8_t> target_onoff;  // [L]

  Tensor input_tensor() const;
};

struct WindowSet {
  std::vector<Window> windows;
  Normalization norm;
  std::string appliance;
  WindowSpec spec;

  std::size_t size() const { return windows.size(); }
  bool empty() const { return windows.empty(); }
  std::size_t margin() const { return (spec.input_len - spec.output_len) / 2; }
};

/// Mean and population std of each channel over the valid seconds; std below
/// the floor falls back to 1.
Normalization fit_normalization(std::span<const double> agg_p, std::span<const double> agg_q,
                                std::span<const std::uint8_t> valid = {});

/// Slides [2 x m] windows over the aggregate with the given stride.
///
/// Inputs are z-scored with `norm` (fitted on these series when absent).
/// Targets are the centre L samples of the appliance series; the on/off
/// target is the min_on_s-filtered threshold rule evaluated on the whole
/// series. Windows touching an invalid second are dropped.
WindowSet make_windows(std::span<const double> agg_p, std::span<const double> agg_q,
                       std::span<const double> appliance, const WindowSpec& spec,
                       std::optional<Normalization> norm = std::nullopt,
                       std::span<const std::uint8_t> valid = {}, std::string appliance_name = {});

/// Window starts that tile a series of `length` samples so every second in
/// [margin, length - margin) is covered by some window's centre span.
std::vector<std::size_t> covering_starts(std::size_t length, std::size_t input_len,
                                         std::size_t output_len);

/// Denormalised [2 x m] input of a window.
std::vector<double> denormalize(const Window& window, const Normalization& norm);

// Tabular CSV ----------------------------------------------------------------

/// Numeric CSV with a header row.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> values;  // [column][row]

  std::size_t rows() const { return values.empty() ? 0 : values.front().size(); }
  bool has(std::string_view name) const;
  const std::vector<double>& column(std::string_view name) const;
};

Table parse_table(std::string_view text);
Table read_table(const std::filesystem::path& path);

// UK-DALE house directories --------------------------------------------------

struct ApplianceRecording {
  std::string appliance;
  std::int64_t start_s = 0;
  std::vector<double> aggregate_p;
  std::vector<double> aggregate_q;  // zero-filled: low-rate channels have no Q
  std::vector<double> appliance_p;
  std::vector<std::uint8_t> valid;
};

/// Reads labels.dat to find the mains (`aggregate`) and the named appliance
/// channel, resamples both to 1 Hz and crops them to their overlap.
ApplianceRecording load_ukdale_house(const std::filesystem::path& house_dir,
                                     const std::string& appliance, double gap_limit_s = 60.0);

std::vector<std::string> ukdale_labels(const std::filesystem::path& house_dir);

}  // namespace nilm::data
