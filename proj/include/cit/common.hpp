#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cit {

enum class ErrorCode {
  ShapeMismatch,
  DivisionByZero,
  InvalidAxis,
  InvalidPermutation,
  NotScalar,
  NoTape,
  OddChannels,
  TooSmall,
  IoError,
  UnsupportedFormat,
  CropTooLarge,
  MissingGrad,
  NonFiniteLoss,
  NonFiniteActivation,
  Config,
};

const char* error_code_name(ErrorCode c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& msg);

/// Verification mode: when on, every forward op scans its output and raises
/// NonFiniteActivation on NaN/Inf. Off by default (release semantics: propagate).
void set_finite_checks(bool on);
bool finite_checks();

using Shape = std::vector<int64_t>;

int64_t numel_of(const Shape& s);
std::string shape_str(const Shape& s);
Shape row_major_strides(const Shape& s);

/// Deterministic RNG: mt19937_64 bit stream with hand-rolled transforms so the
/// produced sequence is pinned across platforms and standard library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed);
  uint64_t next_u64();
  double uniform();                       // [0,1)
  double uniform(double lo, double hi);   // [lo,hi)
  double normal();                        // Box-Muller, cached pair
  double trunc_normal(double sigma);      // resample until |z| <= 2
  int64_t uniform_int(int64_t n);         // [0,n)

 private:
  std::mt19937_64 gen_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

/// Mixes a base seed with a step counter so per-step streams are reproducible
/// regardless of how many draws earlier steps consumed.
uint64_t mix_seed(uint64_t seed, uint64_t step);

}  // namespace cit
