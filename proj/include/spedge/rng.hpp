#pragma once

#include <cstdint>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/chi_squared_distribution.hpp>

namespace spedge {

// Boost's engines and distributions are fully specified in headers, so a seed
// gives the same sequence on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double normal() { return normal_(eng_); }
  double uniform() { return unif_(eng_); }
  double chi_squared(double dof) {
    boost::random::chi_squared_distribution<double> d(dof);
    return d(eng_);
  }
  std::uint64_t bits() { return eng_(); }

 private:
  boost::random::mt19937_64 eng_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
  boost::random::uniform_01<double> unif_;
};

// Derives independent stream seeds from a master seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace spedge
