#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace grounding {

// Seeded generator shared by initialization, shuffling and dropout.
//
// Every consumer draws from it in a fixed traversal order, so a run is a pure
// function of its seed. `split()` derives an independent child stream, and
// the full engine state serializes to text for checkpoints.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double normal(double mean = 0.0, double stddev = 1.0);
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  Rng split();

  std::string state() const;
  void restore(const std::string& state);

  std::mt19937_64& engine() { return engine_; }

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace grounding
