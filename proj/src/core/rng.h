#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dgad {

// Seeded random stream.  Gaussian draws use an explicit Box-Muller on
// raw uniforms instead of std::normal_distribution so the stream has no
// hidden distribution state and serializes exactly: a checkpointed run
// resumes on the identical sample sequence.
class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(uint64_t seed) : gen_(seed) {}

  double uniform() { return uniform(0.0, 1.0); }
  double uniform(double lo, double hi);
  int64_t uniform_int(int64_t lo, int64_t hi);  // inclusive range [lo, hi]
  double normal(double mean = 0.0, double stddev = 1.0);

  // Fisher-Yates shuffle of an index vector.
  void shuffle(std::vector<int64_t>& v);

  std::string serialize() const;
  void deserialize(const std::string& state);

  uint64_t next_u64() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace dgad
