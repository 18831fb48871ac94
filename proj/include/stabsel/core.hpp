#ifndef STABSEL_CORE_HPP
#define STABSEL_CORE_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace stabsel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class OutcomeKind { continuous, binary };

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Design matrix is rank deficient; carries the labels of the offending columns.
class SingularDesignError : public Error {
 public:
  SingularDesignError(const std::string& msg, std::vector<std::string> columns)
      : Error(msg), columns(std::move(columns)) {}
  std::vector<std::string> columns;
};

// Binary response contains a single class.
class DegenerateResponseError : public Error {
 public:
  explicit DegenerateResponseError(const std::string& msg) : Error(msg) {}
};

// A probability of 0 or 1 produced a non-finite inverse-probability weight.
class NonfiniteWeightError : public Error {
 public:
  NonfiniteWeightError(const std::string& msg, int unit) : Error(msg), unit(unit) {}
  int unit;
};

// Caller violated an interface contract (mismatched shapes, bad arguments).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

// Complete-case analysis sample: covariate matrix, binary treatment, outcome.
struct Dataset {
  Matrix covariates;  // n x J
  std::vector<std::string> covariate_labels;
  Vector treatment;  // entries in {0,1}
  Vector outcome;
  OutcomeKind outcome_kind = OutcomeKind::continuous;

  Eigen::Index n_units() const { return covariates.rows(); }
  Eigen::Index n_covariates() const { return covariates.cols(); }

  void validate() const {
    const Eigen::Index n = covariates.rows();
    if (treatment.size() != n || outcome.size() != n)
      throw ContractError("dataset: treatment/outcome length does not match covariate rows");
    if (covariate_labels.size() != static_cast<size_t>(covariates.cols()))
      throw ContractError("dataset: covariate label count does not match columns");
    if (!covariates.allFinite() || !treatment.allFinite() || !outcome.allFinite())
      throw ContractError("dataset: non-finite values present (complete cases required)");
    bool any0 = false, any1 = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = treatment[i];
      if (a == 0.0) any0 = true;
      else if (a == 1.0) any1 = true;
      else throw ContractError("dataset: treatment must be coded 0/1");
    }
    if (!any0 || !any1)
      throw DegenerateResponseError("dataset: treatment contains a single class");
    if (outcome_kind == OutcomeKind::binary) {
      for (Eigen::Index i = 0; i < n; ++i)
        if (outcome[i] != 0.0 && outcome[i] != 1.0)
          throw ContractError("dataset: binary outcome must be coded 0/1");
    }
  }
};

// ---------------------------------------------------------------------------
// Scalar helpers
// ---------------------------------------------------------------------------

inline double expit(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Two-sided standard-normal tail probability of |z|.
inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

inline double sample_mean(const Vector& v) { return v.size() > 0 ? v.mean() : 0.0; }

inline double sample_variance(const Vector& v) {
  const Eigen::Index n = v.size();
  if (n < 2) return 0.0;
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(n - 1);
}

// Fixed-width decimal formatting used in CSV output (17 significant digits
// round-trips a double exactly).
inline std::string fmt_g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

// Child-stream seed derivation: one SplitMix64 scramble of
// master + (stream + 1) * golden-ratio increment. Streams are documented as
// replicate index (run_study), then draw-layer indices inside a replicate, so
// parallel execution reproduces the sequential results.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Seeded generator with self-contained uniform/normal/Bernoulli draws so the
// stream does not depend on standard-library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  // Uniform on (0,1]: 53-bit mantissa, never exactly 0.
  double uniform01() {
    return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
  }

  double normal() {
    // Box-Muller, cosine branch only; two uniforms per draw keeps the stream
    // position independent of call parity.
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  bool bernoulli(double p) { return uniform01() <= p; }

  // Uniform integer in [0, m).
  std::uint64_t below(std::uint64_t m) {
    // Rejection to remove modulo bias.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % m);
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % m;
  }

 private:
  std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// Parallel loop
// ---------------------------------------------------------------------------

inline int env_thread_count() {
  if (const char* s = std::getenv("STABSEL_THREADS")) {
    const int v = std::atoi(s);
    if (v >= 1) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

// Runs fn(i) for i in [0, count). Results must not depend on execution order.
template <typename Fn>
void parallel_for_index(Eigen::Index count, int threads, Fn&& fn) {
  if (count <= 0) return;
  if (threads <= 1 || count == 1) {
    for (Eigen::Index i = 0; i < count; ++i) fn(i);
    return;
  }
  const int n_workers = static_cast<int>(std::min<Eigen::Index>(threads, count));
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  std::vector<std::exception_ptr> errors(n_workers);
  for (int w = 0; w < n_workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (Eigen::Index i = w; i < count; i += n_workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace stabsel

#endif  // STABSEL_CORE_HPP
