#pragma once

#include <bismut/errors.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace bismut {

struct ExecutionConfig {
  std::uint64_t n_paths = 10000;
  double h = 1e-3;
  std::uint64_t seed = 0;
  unsigned workers = 0;  // 0: hardware concurrency
  std::uint64_t chunk_size = 4096;
  double max_discard_fraction = 1e-4;

  unsigned resolved_workers() const {
    if (workers > 0) return workers;
    return std::max(1u, std::thread::hardware_concurrency());
  }
  void validate() const {
    if (n_paths == 0) throw ValidationError("n_paths must be positive", "execution.n_paths");
    if (chunk_size == 0) throw ValidationError("chunk_size must be positive", "execution.chunk_size");
    if (!(h > 0.0)) throw ValidationError("h must be positive", "execution.h");
  }
};

struct Diagnostics {
  double kurtosis = 0.0;
  double effective_sample_size = 0.0;
  std::uint64_t discarded_paths = 0;
  std::uint64_t clock_not_reached = 0;
  std::uint64_t exited_early = 0;
  bool heavy_tail_warning = false;
};

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::uint64_t n_paths = 0;
  std::uint64_t seed = 0;
  Diagnostics diagnostics;
};

/// Streaming moments in the pairwise-combinable form.
struct Moments {
  double n = 0, mean = 0, m2 = 0, m3 = 0, m4 = 0;
  double sum_abs = 0, sum_sq = 0;

  void push(double x) {
    const double n1 = n;
    n += 1;
    const double delta = x - mean;
    const double dn = delta / n;
    const double dn2 = dn * dn;
    const double term1 = delta * dn * n1;
    mean += dn;
    m4 += term1 * dn2 * (n * n - 3 * n + 3) + 6 * dn2 * m2 - 4 * dn * m3;
    m3 += term1 * dn * (n - 2) - 3 * dn * m2;
    m2 += term1;
    sum_abs += std::abs(x);
    sum_sq += x * x;
  }

  void merge(const Moments& b) {
    if (b.n == 0) return;
    if (n == 0) {
      *this = b;
      return;
    }
    const double na = n, nb = b.n, nn = na + nb;
    const double d = b.mean - mean;
    const double d2 = d * d, d3 = d2 * d, d4 = d2 * d2;
    const double m4n = m4 + b.m4 + d4 * na * nb * (na * na - na * nb + nb * nb) / (nn * nn * nn) +
                       6.0 * d2 * (na * na * b.m2 + nb * nb * m2) / (nn * nn) +
                       4.0 * d * (na * b.m3 - nb * m3) / nn;
    const double m3n = m3 + b.m3 + d3 * na * nb * (na - nb) / (nn * nn) +
                       3.0 * d * (na * b.m2 - nb * m2) / nn;
    const double m2n = m2 + b.m2 + d2 * na * nb / nn;
    mean += d * nb / nn;
    m2 = m2n;
    m3 = m3n;
    m4 = m4n;
    n = nn;
    sum_abs += b.sum_abs;
    sum_sq += b.sum_sq;
  }

  double variance() const { return n > 1 ? m2 / (n - 1) : 0.0; }
  double kurtosis() const { return m2 > 0 ? n * m4 / (m2 * m2) : 0.0; }
};

/// Result of one path: `ok` false marks a non-finite path (discarded).
struct PathOutcome {
  bool ok = true;
  bool clock_not_reached = false;
  bool exited_early = false;  // left the domain while k was still active
};

/// Monte Carlo over path indices 0..n_paths-1 with `cols` outputs per path.
///
/// `fn(path_index, std::span<double> out) -> PathOutcome` fills `out`.
/// Paths are grouped into fixed chunks; each chunk is reduced in
/// path-index order and chunks are merged in index order, so the result is
/// bit-identical for every worker count.
template <class PathFn>
std::vector<Estimate> run_monte_carlo(const ExecutionConfig& ex, std::size_t cols, PathFn&& fn) {
  ex.validate();
  const std::uint64_t n = ex.n_paths;
  const std::uint64_t chunk = ex.chunk_size;
  const std::uint64_t n_chunks = (n + chunk - 1) / chunk;

  struct ChunkResult {
    std::vector<Moments> m;
    std::uint64_t discarded = 0;
    std::uint64_t clock = 0;
    std::uint64_t early = 0;
  };
  std::vector<ChunkResult> results(n_chunks);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;

  auto worker = [&] {
    std::vector<double> out(cols);
    for (;;) {
      const std::uint64_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      ChunkResult r;
      r.m.assign(cols, Moments{});
      const std::uint64_t lo = c * chunk, hi = std::min(n, lo + chunk);
      try {
        for (std::uint64_t p = lo; p < hi; ++p) {
          std::fill(out.begin(), out.end(), 0.0);
          const PathOutcome o = fn(p, std::span<double>(out));
          bool finite = o.ok;
          for (double x : out) finite = finite && std::isfinite(x);
          if (!finite) {
            ++r.discarded;
            continue;
          }
          if (o.clock_not_reached) ++r.clock;
          if (o.exited_early) ++r.early;
          for (std::size_t j = 0; j < cols; ++j) r.m[j].push(out[j]);
        }
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next.store(n_chunks);
        return;
      }
      results[c] = std::move(r);
    }
  };

  const unsigned w = static_cast<unsigned>(std::min<std::uint64_t>(ex.resolved_workers(), n_chunks));
  if (w <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (unsigned i = 0; i < w; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<Moments> total(cols);
  std::uint64_t discarded = 0, clock = 0, early = 0;
  for (const auto& r : results) {
    for (std::size_t j = 0; j < cols; ++j) total[j].merge(r.m[j]);
    discarded += r.discarded;
    clock += r.clock;
    early += r.early;
  }
  if (static_cast<double>(discarded) > ex.max_discard_fraction * static_cast<double>(n))
    throw NumericalError(std::to_string(discarded) + " of " + std::to_string(n) +
                         " paths were non-finite");

  std::vector<Estimate> est(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    const auto& m = total[j];
    auto& e = est[j];
    e.value = m.mean;
    e.stderr_ = m.n > 0 ? std::sqrt(m.variance() / m.n) : 0.0;
    e.n_paths = static_cast<std::uint64_t>(m.n);
    e.seed = ex.seed;
    e.diagnostics.kurtosis = m.kurtosis();
    e.diagnostics.effective_sample_size = m.sum_sq > 0 ? m.sum_abs * m.sum_abs / m.sum_sq : 0.0;
    e.diagnostics.discarded_paths = discarded;
    e.diagnostics.clock_not_reached = clock;
    e.diagnostics.exited_early = early;
    e.diagnostics.heavy_tail_warning = e.diagnostics.kurtosis > 100.0;
  }
  return est;
}

template <class PathFn>
Estimate run_monte_carlo_scalar(const ExecutionConfig& ex, PathFn&& fn) {
  return run_monte_carlo(ex, 1, [&](std::uint64_t p, std::span<double> out) {
    return fn(p, out[0]);
  })[0];
}

} // namespace bismut
