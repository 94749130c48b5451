#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "tllarch/geometry.hpp"

namespace tllarch {

/// Deterministic probe set: the first half is a Halton low-discrepancy
/// sequence over the box, the remainder uniform samples from a seeded
/// mt19937_64. Identical (box, count, seed) always yields identical points.
std::vector<Vec> probe_points(const Box& box, std::size_t count, std::uint64_t seed);

/// Regular lattice with `per_axis` points per coordinate, endpoints included.
std::vector<Vec> probe_lattice(const Box& box, std::size_t per_axis);

/// Splits [0, count) into contiguous chunks over `workers` threads. The body
/// must only write to per-index storage.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace tllarch
