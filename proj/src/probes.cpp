#include "tllarch/probes.hpp"

#include <algorithm>
#include <exception>
#include <random>
#include <thread>

namespace tllarch {
namespace {

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

double radical_inverse(std::uint64_t index, int base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

}  // namespace

std::vector<Vec> probe_points(const Box& box, std::size_t count, std::uint64_t seed) {
  const std::size_t n = box.dim();
  std::vector<Vec> points;
  points.reserve(count);
  const std::size_t halton = count / 2;
  for (std::size_t k = 0; k < halton; ++k) {
    Vec p(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = radical_inverse(k + 1, kPrimes[i % std::size(kPrimes)]);
      p[i] = box.lower[i] + u * (box.upper[i] - box.lower[i]);
    }
    points.push_back(std::move(p));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t k = halton; k < count; ++k) {
    Vec p(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = box.lower[i] + unit(rng) * (box.upper[i] - box.lower[i]);
    }
    points.push_back(std::move(p));
  }
  return points;
}

std::vector<Vec> probe_lattice(const Box& box, std::size_t per_axis) {
  const std::size_t n = box.dim();
  per_axis = std::max<std::size_t>(per_axis, 2);
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= per_axis;
  std::vector<Vec> points;
  points.reserve(total);
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t k = 0; k < total; ++k) {
    Vec p(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(idx[i]) / static_cast<double>(per_axis - 1);
      p[i] = (idx[i] + 1 == per_axis) ? box.upper[i] : box.lower[i] + t * (box.upper[i] - box.lower[i]);
    }
    points.push_back(std::move(p));
    for (std::size_t i = 0; i < n; ++i) {
      if (++idx[i] < per_axis) break;
      idx[i] = 0;
    }
  }
  return points;
}

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> failures(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, &failures, w, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        failures[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

}  // namespace tllarch
