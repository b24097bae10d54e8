#pragma once

// Independent reference implementations used as test oracles. They favour
// the most direct reading of each definition over speed and share no code
// with the library beyond plain data types.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "atscc/core.hpp"

namespace oracle {

/// Recursive Ramer-Douglas-Peucker; the farthest interior point wins, ties
/// to the lowest index.
std::vector<std::uint8_t> rdp_recursive(std::span<const atscc::Vec3> pts, double eps);

/// Segment-level soft nearest-neighbour loss by explicit double loops over
/// anchors, positives and negatives. `modified` excludes same-ID rows from
/// the negatives.
double snn_naive(const std::vector<std::vector<double>>& z, std::span<const std::uint32_t> ids, double tau,
                 bool modified);

/// Mutual information (natural log) by scanning for every pair of label
/// values.
double mi_brute(std::span<const int> a, std::span<const int> b);
double entropy_brute(std::span<const int> a);
/// Adjusted Rand index from explicit pair counting over all i < j.
double ari_pairs(std::span<const int> a, std::span<const int> b);

}  // namespace oracle

namespace gen {

/// Random walk or uniform cloud in [-1, 1]^3.
std::vector<atscc::Vec3> random_points(std::mt19937_64& rng, std::size_t n);
std::vector<atscc::Vec3> random_walk(std::mt19937_64& rng, std::size_t n, double step);
std::vector<double> gaussian(std::mt19937_64& rng, std::size_t n, double std = 1.0);
std::vector<int> uniform_labels(std::mt19937_64& rng, std::size_t n, int classes);
atscc::Trajectory trajectory(std::mt19937_64& rng, std::size_t n, const std::string& id = "t");

}  // namespace gen
