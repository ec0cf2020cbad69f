#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace ctxlm {

/// 64-bit FNV-1a; stable across platforms, used for corpus and file hashes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);
std::string file_hash(const std::string& path);

/// Independent sub-seed for a named consumer ("split", "init", ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

/// Neumaier-compensated running sum in extended precision.
class CompensatedSum {
 public:
  void add(long double x) {
    const long double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) carry_ += (sum_ - t) + x;
    else carry_ += (x - t) + sum_;
    sum_ = t;
  }
  long double value() const { return sum_ + carry_; }

 private:
  long double sum_ = 0.0L;
  long double carry_ = 0.0L;
};

}  // namespace ctxlm
