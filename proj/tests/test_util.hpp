#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "nilm/random.hpp"
#include "nilm/tensor.hpp"

namespace nilm::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// Values bounded away from zero so relu/clamp kinks are never straddled.
inline Tensor away_from_zero(Shape shape, Rng& rng, double gap = 0.05) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) {
    const double mag = rng.uniform(gap, 1.0);
    x = rng.uniform() < 0.5 ? -mag : mag;
  }
  return Tensor(std::move(shape), std::move(v), true);
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

/// Largest relative error between backward() and central differences over
/// every element of every input. `f` must build a scalar from `inputs`.
inline double gradient_error(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                             std::vector<Tensor> inputs, double step = 1e-4) {
  for (auto& t : inputs) t.zero_grad();
  f(inputs).backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs)
    analytic.emplace_back(t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                       : std::vector<double>(t.size(), 0.0));
  double worst = 0.0;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto data = inputs[k].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + step;
      const double up = f(inputs).item();
      data[i] = saved - step;
      const double down = f(inputs).item();
      data[i] = saved;
      worst = std::max(worst, relative_error(analytic[k][i], (up - down) / (2.0 * step)));
    }
  }
  return worst;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("nilm_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace nilm::testing
