#include "softgfn/replay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace softgfn {

SumTree::SumTree(std::size_t capacity) : capacity_(capacity), leaves_(1) {
  if (capacity == 0) throw std::invalid_argument("SumTree: capacity must be positive");
  while (leaves_ < capacity) leaves_ <<= 1;
  sum_.assign(2 * leaves_, 0.0);
  max_.assign(2 * leaves_, 0.0);
}

void SumTree::set(std::size_t leaf, double value, double key) {
  if (leaf >= capacity_) throw std::out_of_range("SumTree::set");
  std::size_t i = leaves_ + leaf;
  sum_[i] = value;
  max_[i] = key;
  // Recompute parents from their children rather than applying deltas, so
  // the root never drifts from the leaf values.
  for (i >>= 1; i >= 1; i >>= 1) {
    sum_[i] = sum_[2 * i] + sum_[2 * i + 1];
    max_[i] = std::max(max_[2 * i], max_[2 * i + 1]);
  }
}

std::size_t SumTree::find(double mass) const {
  std::size_t i = 1;
  while (i < leaves_) {
    const double left = sum_[2 * i];
    if (mass < left || sum_[2 * i + 1] <= 0.0) {
      i = 2 * i;
    } else {
      mass -= left;
      i = 2 * i + 1;
    }
  }
  std::size_t leaf = i - leaves_;
  // Rounding can land on an empty leaf at the far right; walk back.
  while (leaf > 0 && sum_[leaves_ + leaf] <= 0.0) --leaf;
  return leaf;
}

PerBuffer::PerBuffer(PerConfig cfg)
    : cfg_(cfg), tree_(cfg.capacity), raw_(cfg.capacity, 0.0), serial_(cfg.capacity, 0) {
  if (cfg_.alpha < 0.0 || cfg_.beta < 0.0) throw std::invalid_argument("PerBuffer: exponents must be >= 0");
  if (!(cfg_.min_priority > 0.0)) throw std::invalid_argument("PerBuffer: min_priority must be positive");
  items_.reserve(std::min<std::size_t>(cfg_.capacity, 1 << 16));
}

void PerBuffer::push(Transition t) {
  store(std::move(t), size_ == 0 ? 1.0 : tree_.max());
}

void PerBuffer::push(Transition t, double priority) { store(std::move(t), priority); }

void PerBuffer::store(Transition t, double priority) {
  const double p = std::max(priority, cfg_.min_priority);
  const std::size_t slot = next_;
  if (slot < items_.size()) {
    items_[slot] = std::move(t);
  } else {
    items_.push_back(std::move(t));
  }
  raw_[slot] = p;
  serial_[slot] = ++inserted_;
  tree_.set(slot, std::pow(p, cfg_.alpha), p);
  next_ = (next_ + 1) % cfg_.capacity;
  size_ = std::min(size_ + 1, cfg_.capacity);
}

double PerBuffer::probability(std::size_t slot) const { return tree_.get(slot) / tree_.total(); }

double PerBuffer::linear_mass() const {
  double s = 0.0;
  for (std::size_t i = 0; i < size_; ++i) s += tree_.get(i);
  return s;
}

ReplaySample PerBuffer::sample(std::size_t batch, CounterRng& rng) const {
  if (size_ == 0) throw std::logic_error("PerBuffer::sample: buffer is empty");
  if (batch == 0) throw std::invalid_argument("PerBuffer::sample: batch must be positive");
  ReplaySample out;
  out.indices.reserve(batch);
  out.items.reserve(batch);
  out.weights.reserve(batch);
  out.probabilities.reserve(batch);
  const double total = tree_.total();
  const double segment = total / static_cast<double>(batch);
  double max_w = 0.0;
  for (std::size_t j = 0; j < batch; ++j) {
    const double u = std::min((static_cast<double>(j) + rng.uniform()) * segment, std::nextafter(total, 0.0));
    const std::size_t slot = tree_.find(u);
    const double p = tree_.get(slot) / total;
    const double w = cfg_.beta == 0.0 ? 1.0 : std::pow(static_cast<double>(size_) * p, -cfg_.beta);
    max_w = std::max(max_w, w);
    out.indices.push_back({slot, serial_[slot]});
    out.items.push_back(&items_[slot]);
    out.probabilities.push_back(p);
    out.weights.push_back(w);
  }
  for (auto& w : out.weights) w /= max_w;
  return out;
}

void PerBuffer::update_priorities(std::span<const SampleIndex> indices, std::span<const double> values) {
  if (indices.size() != values.size()) throw std::invalid_argument("update_priorities: size mismatch");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto [slot, serial] = indices[k];
    if (slot >= size_ || serial_[slot] != serial) {
      ++stale_;
      continue;
    }
    const double p = std::max(values[k], cfg_.min_priority);
    raw_[slot] = p;
    tree_.set(slot, std::pow(p, cfg_.alpha), p);
  }
}

}  // namespace softgfn
