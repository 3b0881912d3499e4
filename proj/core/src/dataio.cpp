#include "nilm/dataio.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "nilm/errors.hpp"
#include "nilm/log.hpp"
#include "nilm/metrics.hpp"

namespace nilm::data {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view token, double& out) {
  token = trim(token);
  if (token.empty()) return false;
  std::string tmp(token);
  char* end = nullptr;
  errno = 0;
  out = std::strtod(tmp.c_str(), &end);
  return errno == 0 && end == tmp.c_str() + tmp.size() && std::isfinite(out);
}

template <typename Fn>
void for_each_line(std::string_view text, Fn fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    ++line_no;
    fn(line_no, trim(line));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
}

}  // namespace

RawChannel parse_channel(std::string_view text, Format format, std::string source) {
  RawChannel ch;
  ch.source = std::move(source);
  std::size_t data_lines = 0;
  bool header_pending = format == Format::kCsv;

  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line.empty()) return;
    if (header_pending) {
      header_pending = false;
      return;
    }
    ++data_lines;
    double ts = 0.0;
    double value = 0.0;
    bool ok = false;
    if (format == Format::kCsv) {
      const std::size_t comma = line.find(',');
      ok = comma != std::string_view::npos && parse_double(line.substr(0, comma), ts) &&
           parse_double(line.substr(comma + 1), value);
    } else {
      const std::size_t sep = line.find_first_of(" \t");
      if (sep != std::string_view::npos) {
        std::string_view rest = trim(line.substr(sep + 1));
        // Some exports carry extra columns; the first two are authoritative.
        const std::size_t extra = rest.find_first_of(" \t");
        if (extra != std::string_view::npos) rest = rest.substr(0, extra);
        ok = parse_double(line.substr(0, sep), ts) && parse_double(rest, value);
      }
    }
    if (!ok) {
      ++ch.malformed_lines;
      log::debug(ch.source + ": malformed line " + std::to_string(line_no));
      return;
    }
    if (!ch.timestamps.empty() && ts <= ch.timestamps.back()) {
      std::ostringstream msg;
      msg << ch.source << ": line " << line_no << ": timestamp " << ts
          << " does not increase (previous " << ch.timestamps.back() << ")";
      throw IngestionError(msg.str());
    }
    ch.timestamps.push_back(ts);
    ch.values.push_back(value);
  });

  if (ch.timestamps.empty()) throw IngestionError(ch.source + ": no samples");
  const double bad = static_cast<double>(ch.malformed_lines);
  if (bad > kMalformedTolerance * static_cast<double>(data_lines))
    throw IngestionError(ch.source + ": " + std::to_string(ch.malformed_lines) + " of " +
                         std::to_string(data_lines) + " lines malformed (tolerance 0.1%)");
  if (ch.malformed_lines > 0)
    log::warn(ch.source + ": skipped " + std::to_string(ch.malformed_lines) +
              " malformed lines");
  return ch;
}

RawChannel load_channel(const std::filesystem::path& path, Format format) {
  return parse_channel(read_file(path), format, path.string());
}

RegularSeries resample_1hz(const RawChannel& channel, double gap_limit_s) {
  if (gap_limit_s < 1.0) throw UsageError("gap_limit_s must be >= 1");
  if (channel.timestamps.empty()) throw UsageError("resample_1hz: empty channel");
  const auto first = static_cast<std::int64_t>(std::ceil(channel.timestamps.front()));
  const auto last = static_cast<std::int64_t>(std::floor(channel.timestamps.back()));
  RegularSeries out;
  out.start_s = first;
  if (last < first) return out;
  const auto n = static_cast<std::size_t>(last - first + 1);
  out.values.resize(n);
  out.valid.assign(n, 1);

  std::size_t k = 0;  // last sample with timestamp <= grid second
  const auto& ts = channel.timestamps;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = static_cast<double>(first) + static_cast<double>(i);
    while (k + 1 < ts.size() && ts[k + 1] <= g) ++k;
    out.values[i] = channel.values[k];
    if (ts[k] < g && k + 1 < ts.size() && ts[k + 1] - ts[k] > gap_limit_s) out.valid[i] = 0;
  }
  return out;
}

std::vector<RegularSeries> align(std::span<const RegularSeries> series) {
  if (series.empty()) return {};
  std::int64_t lo = series.front().start_s;
  std::int64_t hi = lo + static_cast<std::int64_t>(series.front().length());
  for (const auto& s : series) {
    lo = std::max(lo, s.start_s);
    hi = std::min(hi, s.start_s + static_cast<std::int64_t>(s.length()));
  }
  if (hi <= lo) throw IngestionError("channels do not overlap in time");
  std::vector<RegularSeries> out;
  for (const auto& s : series) {
    RegularSeries c;
    c.start_s = lo;
    const auto from = static_cast<std::ptrdiff_t>(lo - s.start_s);
    const auto to = static_cast<std::ptrdiff_t>(hi - s.start_s);
    c.values.assign(s.values.begin() + from, s.values.begin() + to);
    c.valid.assign(s.valid.begin() + from, s.valid.begin() + to);
    out.push_back(std::move(c));
  }
  return out;
}

Tensor Window::input_tensor() const {
  const std::size_t m = input.size() / Normalization::kChannels;
  return Tensor(Shape{Normalization::kChannels, m}, input);
}

Normalization fit_normalization(std::span<const double> agg_p, std::span<const double> agg_q,
                                std::span<const std::uint8_t> valid) {
  if (agg_p.size() != agg_q.size()) throw DimensionError("P and Q series differ in length");
  if (!valid.empty() && valid.size() != agg_p.size())
    throw DimensionError("valid mask length differs from the series");
  Normalization norm;
  const std::span<const double> channels[] = {agg_p, agg_q};
  for (std::size_t c = 0; c < Normalization::kChannels; ++c) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < channels[c].size(); ++t) {
      if (!valid.empty() && !valid[t]) continue;
      sum += channels[c][t];
      ++count;
    }
    if (count == 0) throw UsageError("fit_normalization: no valid samples");
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (std::size_t t = 0; t < channels[c].size(); ++t) {
      if (!valid.empty() && !valid[t]) continue;
      const double d = channels[c][t] - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(count));
    norm.mean[c] = mean;
    norm.std[c] = sd < Normalization::kStdFloor ? 1.0 : sd;
  }
  return norm;
}

WindowSet make_windows(std::span<const double> agg_p, std::span<const double> agg_q,
                       std::span<const double> appliance, const WindowSpec& spec,
                       std::optional<Normalization> norm, std::span<const std::uint8_t> valid,
                       std::string appliance_name) {
  const std::size_t total = agg_p.size();
  if (agg_q.size() != total || appliance.size() != total)
    throw DimensionError("make_windows: aggregate and appliance series differ in length");
  if (!valid.empty() && valid.size() != total)
    throw DimensionError("make_windows: valid mask length differs from the series");
  if (spec.stride < 1) throw UsageError("make_windows: stride must be >= 1");
  if (spec.output_len < 1 || spec.output_len > spec.input_len ||
      (spec.input_len - spec.output_len) % 2 != 0)
    throw UsageError("make_windows: need 1 <= L <= m with m - L even");
  if (total < spec.input_len)
    throw SizeError("make_windows: series of " + std::to_string(total) +
                    " samples is shorter than the window length " +
                    std::to_string(spec.input_len));

  WindowSet set;
  set.spec = spec;
  set.appliance = std::move(appliance_name);
  set.norm = norm ? *norm : fit_normalization(agg_p, agg_q, valid);

  const auto onoff = metrics::onoff_from_power(appliance, spec.on_threshold, spec.min_on_s);

  // Prefix count of invalid seconds for O(1) window checks.
  std::vector<std::size_t> invalid_before(total + 1, 0);
  for (std::size_t t = 0; t < total; ++t)
    invalid_before[t + 1] = invalid_before[t] + ((!valid.empty() && !valid[t]) ? 1 : 0);

  const std::size_t m = spec.input_len;
  const std::size_t L = spec.output_len;
  const std::size_t margin = (m - L) / 2;
  for (std::size_t s = 0; s + m <= total; s += spec.stride) {
    if (invalid_before[s + m] != invalid_before[s]) continue;
    Window w;
    w.start = s;
    w.input.resize(2 * m);
    for (std::size_t i = 0; i < m; ++i) {
      w.input[i] = set.norm.normalize(0, agg_p[s + i]);
      w.input[m + i] = set.norm.normalize(1, agg_q[s + i]);
    }
    w.target_power.assign(appliance.begin() + static_cast<std::ptrdiff_t>(s + margin),
                          appliance.begin() + static_cast<std::ptrdiff_t>(s + margin + L));
    w.target_onoff.assign(onoff.begin() + static_cast<std::ptrdiff_t>(s + margin),
                          onoff.begin() + static_cast<std::ptrdiff_t>(s + margin + L));
    set.windows.push_back(std::move(w));
  }
  return set;
}

std::vector<std::size_t> covering_starts(std::size_t length, std::size_t input_len,
                                         std::size_t output_len) {
  if (length < input_len)
    throw SizeError("series of " + std::to_string(length) + " samples is shorter than " +
                    std::to_string(input_len));
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + input_len <= length; s += output_len) starts.push_back(s);
  const std::size_t last = length - input_len;
  if (starts.back() != last) starts.push_back(last);
  return starts;
}

std::vector<double> denormalize(const Window& window, const Normalization& norm) {
  const std::size_t m = window.input.size() / 2;
  std::vector<double> out(window.input.size());
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = norm.denormalize(0, window.input[i]);
    out[m + i] = norm.denormalize(1, window.input[m + i]);
  }
  return out;
}

bool Table::has(std::string_view name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

const std::vector<double>& Table::column(std::string_view name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw UsageError("table has no column '" + std::string(name) + "'");
  return values[static_cast<std::size_t>(it - columns.begin())];
}

Table parse_table(std::string_view text) {
  Table table;
  bool header = true;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line.empty()) return;
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = line.find(',', pos);
      fields.push_back(trim(line.substr(pos, comma - pos)));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (header) {
      for (auto f : fields) table.columns.emplace_back(f);
      table.values.resize(table.columns.size());
      header = false;
      return;
    }
    if (fields.size() != table.columns.size())
      throw UsageError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(table.columns.size()) + " fields, found " +
                       std::to_string(fields.size()));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      if (!parse_double(fields[c], v))
        throw UsageError("line " + std::to_string(line_no) + ": column '" + table.columns[c] +
                         "' is not numeric");
      table.values[c].push_back(v);
    }
  });
  if (header) throw UsageError("CSV has no header row");
  return table;
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_table(buf.str());
}

namespace {

std::vector<std::pair<int, std::string>> read_labels(const std::filesystem::path& house_dir) {
  const auto path = house_dir / "labels.dat";
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot read " + path.string());
  std::vector<std::pair<int, std::string>> labels;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    int channel = 0;
    std::string name;
    if (fields >> channel >> name) labels.emplace_back(channel, name);
  }
  return labels;
}

}  // namespace

std::vector<std::string> ukdale_labels(const std::filesystem::path& house_dir) {
  std::vector<std::string> names;
  for (auto& [channel, name] : read_labels(house_dir)) names.push_back(name);
  return names;
}

ApplianceRecording load_ukdale_house(const std::filesystem::path& house_dir,
                                     const std::string& appliance, double gap_limit_s) {
  int mains = -1;
  int target = -1;
  for (auto& [channel, name] : read_labels(house_dir)) {
    if (name == "aggregate" || name == "mains") mains = channel;
    if (name == appliance) target = channel;
  }
  if (mains < 0) throw IngestionError(house_dir.string() + ": labels.dat has no aggregate channel");
  if (target < 0) throw ConfigError("appliance '" + appliance + "' not in " +
                                    (house_dir / "labels.dat").string());

  auto channel_path = [&](int ch) { return house_dir / ("channel_" + std::to_string(ch) + ".dat"); };
  const RegularSeries both[] = {
      resample_1hz(load_channel(channel_path(mains), Format::kUkdale), gap_limit_s),
      resample_1hz(load_channel(channel_path(target), Format::kUkdale), gap_limit_s)};
  auto aligned = align(both);

  ApplianceRecording rec;
  rec.appliance = appliance;
  rec.start_s = aligned[0].start_s;
  rec.aggregate_p = std::move(aligned[0].values);
  rec.aggregate_q.assign(rec.aggregate_p.size(), 0.0);
  rec.appliance_p = std::move(aligned[1].values);
  rec.valid.resize(rec.aggregate_p.size());
  for (std::size_t t = 0; t < rec.valid.size(); ++t)
    rec.valid[t] = aligned[0].valid[t] && aligned[1].valid[t];
  return rec;
}

}  // namespace nilm::data
