#pragma once

#include <cstdint>
#include <limits>

namespace nmfuse {

// Counter-based generator keyed by (seed, stream_id). The k-th output depends
// only on the key and k, so a stream can be recreated anywhere (a worker, a
// later run) and produce the same sequence. Satisfies
// UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }
  result_type next_u64();

  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  // Gamma(shape, 1), shape > 0 (Marsaglia-Tsang).
  double gamma(double shape);
  // Beta(a, b) via two independent gammas.
  double beta(double a, double b);

  // Independent child stream; deterministic in (this stream's key, child_id).
  RngStream split(std::uint64_t child_id) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace nmfuse
