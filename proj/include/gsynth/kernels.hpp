#pragma once

// Data-parallel inner loops. Each kernel has a serial reference and an OpenMP
// version; the two must agree exactly (integer kernels) or to rounding
// (floating-point reductions).

#include <cstdint>
#include <span>
#include <vector>

namespace gsynth::kernels {

using PixelList = std::vector<std::uint32_t>;

double sumSquaredDiffSerial(std::span<const float> a, std::span<const float> b);
double sumSquaredDiffParallel(std::span<const float> a, std::span<const float> b);

/// out[k] = sum of weights over candidate k's pixels.
void scoreCandidatesSerial(std::span<const std::int8_t> weights,
                           std::span<const PixelList> candidates,
                           std::span<std::int32_t> out);
void scoreCandidatesParallel(std::span<const std::int8_t> weights,
                             std::span<const PixelList> candidates,
                             std::span<std::int32_t> out);

/// Number of OpenMP threads available to the parallel kernels.
int maxThreads();

}  // namespace gsynth::kernels
