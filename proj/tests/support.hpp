#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mvnr/gaussian.hpp"

namespace mvnr::testing {

inline GaussianEmbedding random_embedding(std::mt19937_64& rng, std::size_t k,
                                          std::string id = "x", double mean_lo = -3.0,
                                          double mean_hi = 3.0, double var_lo = 0.1,
                                          double var_hi = 10.0) {
  std::uniform_real_distribution<double> mean(mean_lo, mean_hi);
  std::uniform_real_distribution<double> var(var_lo, var_hi);
  std::vector<double> m(k), v(k);
  for (std::size_t i = 0; i < k; ++i) {
    m[i] = mean(rng);
    v[i] = var(rng);
  }
  return GaussianEmbedding(std::move(id), std::move(m), std::move(v));
}

inline std::vector<GaussianEmbedding> random_corpus(std::mt19937_64& rng, std::size_t n,
                                                    std::size_t k, double var_lo = 0.5,
                                                    double var_hi = 2.0) {
  std::vector<GaussianEmbedding> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(random_embedding(rng, k, "d" + std::to_string(i), -3.0, 3.0, var_lo, var_hi));
  }
  return out;
}

inline GaussianEmbedding g1(double mean, double var, std::string id = "x") {
  return GaussianEmbedding(std::move(id), {mean}, {var});
}

}  // namespace mvnr::testing
