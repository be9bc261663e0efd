#pragma once

#include <cstddef>
#include <algorithm>
#include <limits>
#include <vector>

#include "gbsg/grading.hpp"

namespace gbsg::grading::detail {

// Sum of squared differences between a contiguous (2r+1)^3 query patch and
// the patch whose first voxel is `base` in a volume with the given strides.
// Summation order is fixed: each row is summed along x, rows are added in
// (y, z) order. Once a completed plane pushes the running total to
// `abort_at` or beyond, returns that partial total early.
template <int R>
inline double ssd_fixed(const float* q, const float* base, std::size_t row_stride, std::size_t plane_stride,
                        double abort_at) {
  constexpr int S = 2 * R + 1;
  double total = 0.0;
  for (int dz = 0; dz < S; ++dz) {
    const float* plane = base + dz * plane_stride;
    for (int dy = 0; dy < S; ++dy) {
      const float* row = plane + dy * row_stride;
      double acc = 0.0;
      for (int dx = 0; dx < S; ++dx) {
        const double d = static_cast<double>(q[dx]) - static_cast<double>(row[dx]);
        acc += d * d;
      }
      total += acc;
      q += S;
    }
    if (total >= abort_at) return total;
  }
  return total;
}

inline double ssd_generic(int r, const float* q, const float* base, std::size_t row_stride, std::size_t plane_stride,
                          double abort_at) {
  const int s = 2 * r + 1;
  double total = 0.0;
  for (int dz = 0; dz < s; ++dz) {
    const float* plane = base + dz * plane_stride;
    for (int dy = 0; dy < s; ++dy) {
      const float* row = plane + dy * row_stride;
      double acc = 0.0;
      for (int dx = 0; dx < s; ++dx) {
        const double d = static_cast<double>(q[dx]) - static_cast<double>(row[dx]);
        acc += d * d;
      }
      total += acc;
      q += s;
    }
    if (total >= abort_at) return total;
  }
  return total;
}

inline double ssd(int r, const float* q, const float* base, std::size_t row_stride, std::size_t plane_stride,
                  double abort_at = std::numeric_limits<double>::infinity()) {
  switch (r) {
    case 1: return ssd_fixed<1>(q, base, row_stride, plane_stride, abort_at);
    case 2: return ssd_fixed<2>(q, base, row_stride, plane_stride, abort_at);
    case 3: return ssd_fixed<3>(q, base, row_stride, plane_stride, abort_at);
    default: return ssd_generic(r, q, base, row_stride, plane_stride, abort_at);
  }
}

/// Distance from a query buffer to the template patch centered at `center`.
inline double ssd_at(int r, const float* q, const Volume3D& vol, Index3 center,
                     double abort_at = std::numeric_limits<double>::infinity()) {
  const std::size_t row = vol.dims[0];
  const std::size_t plane = row * vol.dims[1];
  const float* base = vol.data.data() + vol.index(center.x - r, center.y - r, center.z - r);
  return ssd(r, q, base, row, plane, abort_at);
}

/// Copies the patch around `center` into `out` (x-fastest).
inline void gather(const Volume3D& vol, Index3 center, int r, float* out) {
  const int s = 2 * r + 1;
  for (int dz = 0; dz < s; ++dz)
    for (int dy = 0; dy < s; ++dy) {
      const float* row = vol.data.data() + vol.index(center.x - r, center.y + dy - r, center.z + dz - r);
      for (int dx = 0; dx < s; ++dx) *out++ = row[dx];
    }
}

/// Fixed-capacity max-heap over neighbor_less; top() is the current worst.
class BoundedHeap {
 public:
  explicit BoundedHeap(std::size_t capacity) : capacity_(capacity) { items_.reserve(capacity); }

  bool full() const { return items_.size() >= capacity_; }
  double threshold() const {
    return full() ? items_.front().distance : std::numeric_limits<double>::infinity();
  }
  // Candidate is accepted only if it beats the current worst in full tuple order.
  bool push(const Neighbor& n);
  std::vector<Neighbor> sorted() &&;
  const std::vector<Neighbor>& items() const { return items_; }
  void clear() { items_.clear(); }

 private:
  std::size_t capacity_;
  std::vector<Neighbor> items_;
};

inline bool BoundedHeap::push(const Neighbor& n) {
  if (capacity_ == 0) return false;
  if (!full()) {
    items_.push_back(n);
    std::push_heap(items_.begin(), items_.end(), neighbor_less);
    return true;
  }
  if (!neighbor_less(n, items_.front())) return false;
  std::pop_heap(items_.begin(), items_.end(), neighbor_less);
  items_.back() = n;
  std::push_heap(items_.begin(), items_.end(), neighbor_less);
  return true;
}

inline std::vector<Neighbor> BoundedHeap::sorted() && {
  std::sort_heap(items_.begin(), items_.end(), neighbor_less);
  return std::move(items_);
}

}  // namespace gbsg::grading::detail
