#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sddflow/error.hpp"

namespace sddflow {

// Seedable 64-bit generator. Derived values are computed from raw 64-bit
// outputs here rather than through <random> distributions, whose algorithms
// are implementation-defined, so a (seed, input) pair reproduces bit for bit
// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in {0, ..., bound - 1}; multiply-shift, bias below 2^-64 * bound.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) return 0;
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

  // Exponential variate with the given rate.
  double exponential(double rate) {
    const double u = uniform();
    return -std::log1p(-u) / rate;
  }

 private:
  std::mt19937_64 engine_;
};

// Walker/Vose alias table: O(k) build, O(1) draw.
class AliasTable {
 public:
  AliasTable() = default;

  explicit AliasTable(std::span<const double> weights) {
    const std::size_t k = weights.size();
    if (k == 0) return;
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw Error(ErrorCode::kBadOption, "negative sampling weight");
      total += w;
    }
    if (!(total > 0.0)) throw Error(ErrorCode::kBadOption, "sampling weights sum to zero");

    columns_.assign(k, {1.0, 0});
    std::vector<double> scaled(k);
    std::vector<std::size_t> small;
    std::vector<std::size_t> large;
    for (std::size_t i = 0; i < k; ++i) {
      columns_[i].alias = static_cast<std::uint32_t>(i);
      scaled[i] = weights[i] * static_cast<double>(k) / total;
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back();
      small.pop_back();
      const std::size_t l = large.back();
      columns_[s] = {scaled[s], static_cast<std::uint32_t>(l)};
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    // Leftovers are 1 up to rounding.
    for (std::size_t i : small) columns_[i].threshold = 1.0;
    for (std::size_t i : large) columns_[i].threshold = 1.0;
  }

  std::size_t size() const { return columns_.size(); }
  bool empty() const { return columns_.empty(); }

  std::size_t sample(Rng& rng) const {
    const auto column = static_cast<std::size_t>(rng.below(columns_.size()));
    const Column& c = columns_[column];
    return rng.uniform() < c.threshold ? column : c.alias;
  }

  // Probability mass the table assigns to index i (for tests/diagnostics).
  double probability(std::size_t i) const {
    const double k = static_cast<double>(columns_.size());
    double p = columns_[i].threshold / k;
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      if (j != i && columns_[j].alias == i) p += (1.0 - columns_[j].threshold) / k;
    }
    return p;
  }

 private:
  struct Column {
    double threshold;
    std::uint32_t alias;
  };
  std::vector<Column> columns_;
};

}  // namespace sddflow
