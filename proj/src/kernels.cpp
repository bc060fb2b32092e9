#include "gsynth/kernels.hpp"

#include <omp.h>

#include <cassert>
#include <cstddef>

namespace gsynth::kernels {

double sumSquaredDiffSerial(std::span<const float> a, std::span<const float> b) {
  assert(a.size() == b.size());
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    sum += d * d;
  }
  return sum;
}

double sumSquaredDiffParallel(std::span<const float> a, std::span<const float> b) {
  assert(a.size() == b.size());
  const auto n = static_cast<std::ptrdiff_t>(a.size());
  const float* pa = a.data();
  const float* pb = b.data();
  double sum = 0;
#pragma omp parallel for reduction(+ : sum) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pa[i]) - pb[i];
    sum += d * d;
  }
  return sum;
}

namespace {

std::int32_t scoreOne(std::span<const std::int8_t> weights, const PixelList& px) {
  std::int32_t s = 0;
  for (auto p : px) s += weights[p];
  return s;
}

}  // namespace

void scoreCandidatesSerial(std::span<const std::int8_t> weights,
                           std::span<const PixelList> candidates,
                           std::span<std::int32_t> out) {
  assert(out.size() == candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    out[k] = scoreOne(weights, candidates[k]);
  }
}

void scoreCandidatesParallel(std::span<const std::int8_t> weights,
                             std::span<const PixelList> candidates,
                             std::span<std::int32_t> out) {
  assert(out.size() == candidates.size());
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    out[static_cast<std::size_t>(k)] =
        scoreOne(weights, candidates[static_cast<std::size_t>(k)]);
  }
}

int maxThreads() { return omp_get_max_threads(); }

}  // namespace gsynth::kernels
