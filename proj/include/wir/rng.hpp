#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace wir {

// splitmix64 finalizer; full-period bijection with good avalanche
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Hash a (seed, path...) tuple into an engine seed.  Every consumer of
// randomness derives its own stream this way, so draws do not depend on
// thread scheduling or on the order in which work items run.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(seed ^ 0x5851f42d4c957f2dULL);
  for (std::uint64_t t : path) s = mix64(s ^ mix64(t));
  return s;
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  return std::mt19937_64(derive_seed(seed, path));
}

// stream role tags
namespace stream {
inline constexpr std::uint64_t gamma = 1;
inline constexpr std::uint64_t delta = 2;
inline constexpr std::uint64_t response = 3;
inline constexpr std::uint64_t noise = 4;
inline constexpr std::uint64_t train = 5;
inline constexpr std::uint64_t test = 6;
inline constexpr std::uint64_t permutation = 7;
inline constexpr std::uint64_t folds = 8;
inline constexpr std::uint64_t model = 9;
inline constexpr std::uint64_t replication = 10;
}  // namespace stream

// row-major fill so the draw sequence is independent of Eigen's storage order
inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                       std::mt19937_64& eng) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = z(eng);
  return m;
}

inline Eigen::VectorXd gaussian_vector(Eigen::Index n, std::mt19937_64& eng) {
  std::normal_distribution<double> z;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = z(eng);
  return v;
}

}  // namespace wir
