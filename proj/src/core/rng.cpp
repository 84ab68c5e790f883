#include "core/rng.h"

#include <cmath>
#include <sstream>

#include "core/tensor.h"

namespace dgad {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

double RngStream::uniform(double lo, double hi) {
  // 53-bit mantissa draw in [0, 1).
  double u = static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0);
  return lo + u * (hi - lo);
}

int64_t RngStream::uniform_int(int64_t lo, int64_t hi) {
  if (hi < lo) fail("uniform_int: empty range");
  uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  // Rejection sampling to keep the draw unbiased.
  uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  uint64_t x;
  do {
    x = gen_();
  } while (x >= limit);
  return lo + static_cast<int64_t>(x % span);
}

double RngStream::normal(double mean, double stddev) {
  // Box-Muller; u1 in (0, 1] so the log is finite.
  double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * (1.0 / 9007199254740992.0);
  double u2 = static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0);
  return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

void RngStream::shuffle(std::vector<int64_t>& v) {
  for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
    int64_t j = uniform_int(0, i);
    std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
  }
}

std::string RngStream::serialize() const {
  std::ostringstream os;
  os << gen_;
  return os.str();
}

void RngStream::deserialize(const std::string& state) {
  std::istringstream is(state);
  is >> gen_;
  if (is.fail()) fail("invalid rng state string");
}

}  // namespace dgad
