#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <stdexcept>
#include <thread>
#include <vector>

namespace ergoshift {

// Distribution-free two-sided confidence radius for a mean of [0,1]-valued
// variables: P(|mean - estimate| > r) <= delta.
inline double hoeffding_radius(std::int64_t samples, double delta) {
  if (samples < 1) throw std::invalid_argument("hoeffding_radius: samples must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("hoeffding_radius: delta in (0,1)");
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(samples)));
}

namespace detail {

// Regularized lower incomplete gamma P(a, x) by series expansion.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x) by continued fraction.
inline double gamma_q_cf(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1e300;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::fabs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

// Regularized upper incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_cf(a, x);
}

// Upper-tail p-value of a chi-square statistic with df degrees of freedom.
inline double chi_square_pvalue(double stat, std::int64_t df) {
  if (df < 1) throw std::invalid_argument("chi_square_pvalue: df must be >= 1");
  if (stat <= 0.0) return 1.0;
  return gamma_q(static_cast<double>(df) / 2.0, stat / 2.0);
}

// Pearson statistic against expected counts; bins with tiny expectation are
// the caller's responsibility to pool.
inline double pearson_statistic(const std::vector<double>& observed,
                                const std::vector<double>& expected) {
  if (observed.size() != expected.size())
    throw std::invalid_argument("pearson_statistic: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] <= 0.0) continue;
    const double d = observed[i] - expected[i];
    s += d * d / expected[i];
  }
  return s;
}

// Deterministic chunked map-reduce: the work is split into fixed chunks, each
// chunk runs against its own named substream, and the partial results are
// reduced in chunk order.  The outcome is identical no matter how many
// workers execute the chunks.
template <typename Partial>
std::vector<Partial> run_chunks(std::int64_t total, std::int64_t chunk_size,
                                const std::function<Partial(std::int64_t chunk_index,
                                                            std::int64_t count)>& work) {
  std::vector<std::pair<std::int64_t, std::int64_t>> chunks;
  for (std::int64_t done = 0, idx = 0; done < total; ++idx) {
    const std::int64_t n = std::min(chunk_size, total - done);
    chunks.emplace_back(idx, n);
    done += n;
  }
  std::vector<Partial> out(chunks.size());
  const unsigned workers = std::min<unsigned>(std::thread::hardware_concurrency(),
                                              static_cast<unsigned>(chunks.size()));
  if (workers <= 1) {
    for (const auto& [idx, n] : chunks) out[static_cast<std::size_t>(idx)] = work(idx, n);
    return out;
  }
  std::vector<std::future<void>> futs;
  std::size_t next = 0;
  std::mutex mu;
  for (unsigned w = 0; w < workers; ++w) {
    futs.push_back(std::async(std::launch::async, [&]() {
      while (true) {
        std::size_t mine;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= chunks.size()) return;
          mine = next++;
        }
        out[mine] = work(chunks[mine].first, chunks[mine].second);
      }
    }));
  }
  for (auto& f : futs) f.get();
  return out;
}

}  // namespace ergoshift
