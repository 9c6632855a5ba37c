#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace faascost::trace {

// KLL quantile sketch. Mergeable, bounded memory, randomized compaction driven
// by a seeded generator so identical input order gives identical state.
class KllSketch {
 public:
  explicit KllSketch(int k = 400, std::uint64_t seed = 0);

  void update(double x);
  void merge(const KllSketch& other);

  std::uint64_t count() const { return n_; }
  bool empty() const { return n_ == 0; }
  double min() const { return min_; }
  double max() const { return max_; }
  int k() const { return k_; }

  /// q in [0, 1]. Throws std::logic_error on an empty sketch.
  double quantile(double q) const;
  /// Estimated fraction of inputs <= x.
  double rank(double x) const;
  std::size_t retained() const { return retained_; }

  /// (value, cumulative weight fraction), sorted by value.
  std::vector<std::pair<double, double>> sorted_view() const;

 private:
  std::size_t capacity(std::size_t level) const;
  void refresh_capacity();
  void compress();

  int k_;
  std::uint64_t n_ = 0;
  double min_ = 0.0;
  double max_ = 0.0;
  std::vector<std::vector<double>> levels_;
  std::vector<std::size_t> caps_;
  std::size_t total_cap_ = 0;
  std::size_t retained_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace faascost::trace
