#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>
#include <vector>

UFFIA_NAMESPACE_BEGIN
namespace detail {
namespace {

// FFTW planning is not thread-safe; execution with new arrays is. Plans use
// FFTW_ESTIMATE so the chosen algorithm, and hence every output bit, does not
// depend on timing.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(bool forward, int n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find({forward, n});
    if (it != plans_.end()) return it->second;
    std::vector<double> real(static_cast<std::size_t>(n));
    std::vector<fftw_complex> spectrum(static_cast<std::size_t>(n / 2 + 1));
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = forward ? fftw_plan_dft_r2c_1d(n, real.data(), spectrum.data(), flags)
                             : fftw_plan_dft_c2r_1d(n, spectrum.data(), real.data(), flags | FFTW_DESTROY_INPUT);
    plans_.emplace(std::make_pair(forward, n), plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<bool, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

}  // namespace

void rfft(std::span<const double> in, std::span<std::complex<double>> out) {
  const int n = static_cast<int>(in.size());
  if (n < 1 || out.size() != in.size() / 2 + 1) throw ShapeError("rfft: bad buffer sizes");
  std::vector<double> scratch(in.begin(), in.end());
  fftw_execute_dft_r2c(cache().get(true, n), scratch.data(), reinterpret_cast<fftw_complex*>(out.data()));
}

void irfft(std::span<const std::complex<double>> in, std::span<double> out) {
  const int n = static_cast<int>(out.size());
  if (n < 1 || in.size() != out.size() / 2 + 1) throw ShapeError("irfft: bad buffer sizes");
  std::vector<std::complex<double>> scratch(in.begin(), in.end());
  fftw_execute_dft_c2r(cache().get(false, n), reinterpret_cast<fftw_complex*>(scratch.data()), out.data());
}

}  // namespace detail
UFFIA_NAMESPACE_END
