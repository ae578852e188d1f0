#include "cit/common.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace cit {

const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::InvalidAxis: return "InvalidAxis";
    case ErrorCode::InvalidPermutation: return "InvalidPermutation";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::NoTape: return "NoTape";
    case ErrorCode::OddChannels: return "OddChannels";
    case ErrorCode::TooSmall: return "TooSmall";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CropTooLarge: return "CropTooLarge";
    case ErrorCode::MissingGrad: return "MissingGrad";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& msg)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + msg), code_(code) {}

void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

namespace {
std::atomic<bool> g_finite_checks{false};
}

void set_finite_checks(bool on) { g_finite_checks.store(on); }
bool finite_checks() { return g_finite_checks.load(); }

int64_t numel_of(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << ")";
  return os.str();
}

Shape row_major_strides(const Shape& s) {
  Shape st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
  return st;
}

Rng::Rng(uint64_t seed) : gen_(seed) {}

uint64_t Rng::next_u64() { return gen_(); }

double Rng::uniform() {
  // 53 high bits -> [0,1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u1 = 0.0, u2 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 1e-300);
  u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double two_pi = 6.283185307179586476925286766559;
  cached_ = r * std::sin(two_pi * u2);
  has_cached_ = true;
  return r * std::cos(two_pi * u2);
}

double Rng::trunc_normal(double sigma) {
  double z = normal();
  while (z < -2.0 || z > 2.0) z = normal();
  return z * sigma;
}

int64_t Rng::uniform_int(int64_t n) {
  // modulo bias negligible for n << 2^64
  return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
}

uint64_t mix_seed(uint64_t seed, uint64_t step) {
  // splitmix64 finalizer over (seed, step)
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (step + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace cit
