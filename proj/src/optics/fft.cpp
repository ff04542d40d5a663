#include "twz/optics/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <utility>

namespace twz::optics::fft {

namespace {

// FFTW's planner is not thread-safe; execution of a finished plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

using PlanKey = std::tuple<std::size_t, std::size_t, int>;

struct PlanCache {
  std::map<PlanKey, fftw_plan> plans;
  ~PlanCache() {
    for (auto& [key, plan] : plans) {
      fftw_destroy_plan(plan);
    }
  }
};

/// Batched 1D plan over `rows` contiguous rows of length m.
fftw_plan row_plan(std::size_t m, std::size_t rows, Direction dir) {
  static PlanCache cache;
  const int sign = dir == Direction::Forward ? FFTW_FORWARD : FFTW_BACKWARD;
  const std::lock_guard lock(planner_mutex());
  const PlanKey key{m, rows, sign};
  if (auto it = cache.plans.find(key); it != cache.plans.end()) {
    return it->second;
  }
  const int n = static_cast<int>(m);
  auto* scratch = fftw_alloc_complex(m * rows);
  // FFTW_ESTIMATE never inspects timings, so the chosen plan (and therefore
  // the rounding of every result) is the same on every run.
  fftw_plan p = fftw_plan_many_dft(1, &n, static_cast<int>(rows), scratch, nullptr, 1, n, scratch,
                                   nullptr, 1, n, sign, FFTW_ESTIMATE);
  fftw_free(scratch);
  cache.plans.emplace(key, p);
  return p;
}

void run_rows(cdouble* data, std::size_t m, std::size_t first, std::size_t count, Direction dir) {
  if (count == 0) {
    return;
  }
  fftw_plan p = row_plan(m, count, dir);
  auto* ptr = reinterpret_cast<fftw_complex*>(data + first * m);
  fftw_execute_dft(p, ptr, ptr);
}

void transpose(cdouble* a, std::size_t m) {
  constexpr std::size_t block = 32;
  for (std::size_t i = 0; i < m; i += block) {
    const std::size_t ie = std::min(i + block, m);
    for (std::size_t j = i; j < m; j += block) {
      const std::size_t je = std::min(j + block, m);
      for (std::size_t ii = i; ii < ie; ++ii) {
        for (std::size_t jj = (i == j ? ii + 1 : j); jj < je; ++jj) {
          std::swap(a[ii * m + jj], a[jj * m + ii]);
        }
      }
    }
  }
}

void run_band_rows(cdouble* data, std::size_t m, std::size_t band, Direction dir) {
  const std::size_t half = band / 2;
  run_rows(data, m, 0, half, dir);
  run_rows(data, m, m - half, half, dir);
}

} // namespace

void transform(cdouble* data, std::size_t m, Direction dir) {
  run_rows(data, m, 0, m, dir);
  transpose(data, m);
  run_rows(data, m, 0, m, dir);
  transpose(data, m);
}

void transform_band_input(cdouble* data, std::size_t m, std::size_t band, Direction dir) {
  if (band >= m) {
    transform(data, m, dir);
    return;
  }
  run_band_rows(data, m, band, dir);
  transpose(data, m);
  run_rows(data, m, 0, m, dir);
  transpose(data, m);
}

void transform_band_output(cdouble* data, std::size_t m, std::size_t band, Direction dir) {
  if (band >= m) {
    transform(data, m, dir);
    return;
  }
  run_rows(data, m, 0, m, dir);
  transpose(data, m);
  run_band_rows(data, m, band, dir);
  transpose(data, m);
}

} // namespace twz::optics::fft
