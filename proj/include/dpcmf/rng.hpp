#pragma once

#include <array>
#include <cstdint>

#include "dpcmf/linalg.hpp"

namespace dpcmf {

// Counter-based random stream (Philox4x32-10). A stream is identified by
// (seed, epoch, row); every draw is a pure function of the stream identity
// and the draw counter, so draws are reproducible regardless of execution
// order, thread schedule, or worker count. Streams are cheap value types;
// copy per worker, never share mutably.
//
// Normal variates come from Box–Muller applied to 53-bit uniforms, two per
// Philox block. The mapping is fixed: changing it changes every seeded run.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint32_t epoch, std::uint32_t row);

  std::uint64_t next_u64();
  double next_uniform();  // [0, 1)
  double next_normal();   // standard normal

  // Uniform integer in [0, bound) via rejection sampling; bound ≥ 1.
  std::uint64_t next_below(std::uint64_t bound);

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint32_t epoch_;
  std::uint32_t row_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Symmetric dim×dim matrix whose upper triangle (diagonal included) is
// i.i.d. normal with the given standard deviation; the lower triangle
// mirrors it. Entries are drawn row-major over the upper triangle.
DenseMatrix sample_symmetric_gaussian(std::size_t dim, double stddev,
                                      RngStream& rng);

// dim i.i.d. normal entries with the given standard deviation.
DenseVector sample_gaussian_vector(std::size_t dim, double stddev,
                                   RngStream& rng);

}  // namespace dpcmf
