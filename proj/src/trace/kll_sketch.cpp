#include "faascost/trace/kll_sketch.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace faascost::trace {

namespace {
constexpr double kDecay = 2.0 / 3.0;
constexpr std::size_t kMinCapacity = 8;
}  // namespace

KllSketch::KllSketch(int k, std::uint64_t seed) : k_(k), levels_(1), rng_(seed) {
  if (k < static_cast<int>(kMinCapacity)) throw std::invalid_argument("KLL k must be at least 8");
  refresh_capacity();
}

void KllSketch::refresh_capacity() {
  caps_.resize(levels_.size());
  total_cap_ = 0;
  for (std::size_t h = 0; h < levels_.size(); ++h) {
    caps_[h] = capacity(h);
    total_cap_ += caps_[h];
  }
}

std::size_t KllSketch::capacity(std::size_t level) const {
  const auto depth = static_cast<double>(levels_.size() - level - 1);
  const auto cap = static_cast<std::size_t>(std::ceil(k_ * std::pow(kDecay, depth)));
  return std::max(kMinCapacity, cap);
}

void KllSketch::update(double x) {
  if (std::isnan(x)) return;
  if (n_ == 0) {
    min_ = max_ = x;
  } else {
    min_ = std::min(min_, x);
    max_ = std::max(max_, x);
  }
  ++n_;
  levels_[0].push_back(x);
  if (++retained_ >= total_cap_) compress();
}

void KllSketch::compress() {
  while (retained_ >= total_cap_) {
    std::size_t h = 0;
    while (h < levels_.size() && levels_[h].size() < caps_[h]) ++h;
    if (h == levels_.size()) return;
    if (h + 1 == levels_.size()) {
      levels_.emplace_back();
      refresh_capacity();
    }

    auto& cur = levels_[h];
    std::sort(cur.begin(), cur.end());
    std::vector<double> keep;
    if (cur.size() % 2 == 1) {
      keep.push_back(cur.back());
      cur.pop_back();
    }
    const std::size_t offset = rng_() & 1u;
    auto& up = levels_[h + 1];
    for (std::size_t i = offset; i < cur.size(); i += 2) up.push_back(cur[i]);
    retained_ -= cur.size() / 2;
    cur = std::move(keep);
  }
}

void KllSketch::merge(const KllSketch& other) {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    min_ = other.min_;
    max_ = other.max_;
  } else {
    min_ = std::min(min_, other.min_);
    max_ = std::max(max_, other.max_);
  }
  n_ += other.n_;
  if (levels_.size() < other.levels_.size()) {
    levels_.resize(other.levels_.size());
    refresh_capacity();
  }
  for (std::size_t h = 0; h < other.levels_.size(); ++h)
    levels_[h].insert(levels_[h].end(), other.levels_[h].begin(), other.levels_[h].end());
  retained_ += other.retained_;
  compress();
}

std::vector<std::pair<double, double>> KllSketch::sorted_view() const {
  std::vector<std::pair<double, std::uint64_t>> items;
  items.reserve(retained_);
  for (std::size_t h = 0; h < levels_.size(); ++h)
    for (double v : levels_[h]) items.emplace_back(v, std::uint64_t{1} << h);
  std::sort(items.begin(), items.end());
  std::uint64_t total = 0;
  for (const auto& it : items) total += it.second;
  std::vector<std::pair<double, double>> out;
  out.reserve(items.size());
  std::uint64_t cum = 0;
  for (const auto& [v, w] : items) {
    cum += w;
    out.emplace_back(v, static_cast<double>(cum) / static_cast<double>(total));
  }
  return out;
}

double KllSketch::quantile(double q) const {
  if (n_ == 0) throw std::logic_error("quantile of empty sketch");
  if (q <= 0.0) return min_;
  if (q >= 1.0) return max_;
  const auto view = sorted_view();
  auto it = std::lower_bound(view.begin(), view.end(), q,
                             [](const std::pair<double, double>& e, double target) { return e.second < target; });
  if (it == view.end()) return max_;
  return it->first;
}

double KllSketch::rank(double x) const {
  if (n_ == 0) return 0.0;
  std::uint64_t below = 0;
  std::uint64_t total = 0;
  for (std::size_t h = 0; h < levels_.size(); ++h) {
    for (double v : levels_[h]) {
      total += std::uint64_t{1} << h;
      if (v <= x) below += std::uint64_t{1} << h;
    }
  }
  return static_cast<double>(below) / static_cast<double>(total);
}

}  // namespace faascost::trace
