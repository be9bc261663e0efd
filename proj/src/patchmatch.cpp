#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gbsg/error.hpp"
#include "gbsg/grading.hpp"
#include "gbsg/rng.hpp"
#include "patch_kernel.hpp"
#include "search_internal.hpp"

namespace gbsg::grading::detail {
namespace {

struct Candidate {
  double distance;
  std::uint64_t voxel;
};

inline bool candidate_less(const Candidate& a, const Candidate& b) {
  return a.distance != b.distance ? a.distance < b.distance : a.voxel < b.voxel;
}

// Per-voxel sorted list of the best `capacity` candidates of one template.
class CandidateList {
 public:
  CandidateList(Candidate* storage, int capacity) : items_(storage), capacity_(capacity) {}

  int size() const { return size_; }
  const Candidate& operator[](int i) const { return items_[i]; }
  bool contains(std::uint64_t voxel) const {
    for (int i = 0; i < size_; ++i)
      if (items_[i].voxel == voxel) return true;
    return false;
  }
  // Distances strictly above this cannot enter.
  double threshold() const {
    return size_ < capacity_ ? std::numeric_limits<double>::infinity() : items_[size_ - 1].distance;
  }
  void insert(const Candidate& c) {
    if (size_ == capacity_) {
      if (!candidate_less(c, items_[size_ - 1])) return;
      --size_;
    }
    int i = size_++;
    while (i > 0 && candidate_less(c, items_[i - 1])) {
      items_[i] = items_[i - 1];
      --i;
    }
    items_[i] = c;
  }

 private:
  Candidate* items_;
  int capacity_;
  int size_ = 0;
};

struct Box {
  int lo[3];
  int hi[3];
  bool contains(Index3 c) const {
    return c.x >= lo[0] && c.x <= hi[0] && c.y >= lo[1] && c.y <= hi[1] && c.z >= lo[2] && c.z <= hi[2];
  }
};

// Valid candidate centers for voxel `v`: its search window clipped to the
// interior of the template volume.
Box window_of(Index3 v, int s, int r, const Dims& d) {
  return {{std::max(v.x - s, r), std::max(v.y - s, r), std::max(v.z - s, r)},
          {std::min(v.x + s, static_cast<int>(d[0]) - 1 - r), std::min(v.y + s, static_cast<int>(d[1]) - 1 - r),
           std::min(v.z + s, static_cast<int>(d[2]) - 1 - r)}};
}

Index3 sample_in(Rng& rng, const Box& b) {
  return {static_cast<int>(rng.between(b.lo[0], b.hi[0])), static_cast<int>(rng.between(b.lo[1], b.hi[1])),
          static_cast<int>(rng.between(b.lo[2], b.hi[2]))};
}

Box intersect(const Box& a, const Box& b) {
  Box out;
  for (int i = 0; i < 3; ++i) {
    out.lo[i] = std::max(a.lo[i], b.lo[i]);
    out.hi[i] = std::min(a.hi[i], b.hi[i]);
  }
  return out;
}

// State of one z-slab while it is being searched.
struct Slab {
  std::vector<std::size_t> members;  // positions into the voxel list, ascending linear index
  std::vector<Index3> coords;
  std::vector<Box> windows;
  std::vector<float> patches;  // query patches, contiguous per member
};

}  // namespace

std::uint64_t patchmatch_search(const Volume3D& query, const std::vector<std::uint64_t>& voxels,
                                const TrainingLibrary& lib, const GradingParams& params, const ExecOptions& exec,
                                const NeighborSink& sink) {
  const int r = params.patch_radius;
  const int s = params.search_window;
  const Dims& d = query.dims;
  const std::size_t card = params.patch_cardinality();
  const int templates = static_cast<int>(lib.size());
  // Each template keeps ceil(K / T) candidates; the union over templates
  // feeds the final K-selection.
  const int per_template = std::max(1, (params.k + templates - 1) / templates);

  std::vector<std::size_t> order(voxels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return voxels[a] < voxels[b]; });

  // Partition into fixed z-slabs; the partition does not depend on threads.
  const int slab_count = (static_cast<int>(d[2]) + kPatchMatchSlab - 1) / kPatchMatchSlab;
  std::vector<std::vector<std::size_t>> slab_members(slab_count);
  for (std::size_t pos : order) {
    const Index3 c = unravel(d, voxels[pos]);
    if (!is_interior(d, c, r)) throw Error(ErrorCode::EmptyCandidateSet, "graded voxel is not interior");
    slab_members[c.z / kPatchMatchSlab].push_back(pos);
  }

  std::uint64_t evaluations = 0;

#pragma omp parallel for num_threads(thread_count(exec)) schedule(dynamic, 1) reduction(+ : evaluations)
  for (int slab_index = 0; slab_index < slab_count; ++slab_index) {
    Slab slab;
    slab.members = std::move(slab_members[slab_index]);
    const std::size_t n = slab.members.size();
    if (n == 0) continue;
    const int z_lo = slab_index * kPatchMatchSlab;
    const int z_hi = std::min(z_lo + kPatchMatchSlab, static_cast<int>(d[2])) - 1;

    slab.coords.resize(n);
    slab.windows.resize(n);
    slab.patches.resize(n * card);
    for (std::size_t i = 0; i < n; ++i) {
      slab.coords[i] = unravel(d, voxels[slab.members[i]]);
      slab.windows[i] = window_of(slab.coords[i], s, r, d);
      gather(query, slab.coords[i], r, slab.patches.data() + i * card);
    }

    // Slab-local lookup from voxel coordinate to member position.
    const std::size_t plane = static_cast<std::size_t>(d[0]) * d[1];
    std::vector<std::int32_t> lookup(plane * static_cast<std::size_t>(z_hi - z_lo + 1), -1);
    auto local_index = [&](Index3 c) -> std::int32_t {
      if (c.x < 0 || c.y < 0 || c.z < z_lo || c.z > z_hi || c.x >= static_cast<int>(d[0]) ||
          c.y >= static_cast<int>(d[1]))
        return -1;
      return lookup[static_cast<std::size_t>(c.x) + d[0] * (static_cast<std::size_t>(c.y) +
                                                             d[1] * static_cast<std::size_t>(c.z - z_lo))];
    };
    for (std::size_t i = 0; i < n; ++i) {
      const Index3 c = slab.coords[i];
      lookup[static_cast<std::size_t>(c.x) + d[0] * (static_cast<std::size_t>(c.y) +
                                                      d[1] * static_cast<std::size_t>(c.z - z_lo))] =
          static_cast<std::int32_t>(i);
    }

    std::vector<BoundedHeap> merged;
    merged.reserve(n);
    for (std::size_t i = 0; i < n; ++i) merged.emplace_back(static_cast<std::size_t>(params.k));

    std::vector<Candidate> storage(n * static_cast<std::size_t>(per_template));
    std::uint64_t slab_evals = 0;

    for (int t = 0; t < templates; ++t) {
      const Volume3D& vol = lib[t].volume;
      Rng rng(derive_seed(params.seed, {seed_tag("patchmatch"), static_cast<std::uint64_t>(slab_index),
                                        static_cast<std::uint64_t>(t)}));
      std::vector<CandidateList> lists;
      lists.reserve(n);
      for (std::size_t i = 0; i < n; ++i) lists.emplace_back(storage.data() + i * per_template, per_template);

      auto try_candidate = [&](std::size_t i, Index3 c) {
        const std::uint64_t lin = vol.index(c.x, c.y, c.z);
        CandidateList& list = lists[i];
        if (list.contains(lin)) return;
        const double bound = list.threshold();
        const double abort_at = std::nextafter(bound, std::numeric_limits<double>::infinity());
        const double dist = ssd_at(r, slab.patches.data() + i * card, vol, c, abort_at);
        ++slab_evals;
        if (dist > bound) return;
        list.insert({dist, lin});
      };

      // Initialization: the corresponding voxel plus random window samples.
      for (std::size_t i = 0; i < n; ++i) {
        try_candidate(i, slab.coords[i]);
        for (int j = 1; j < per_template; ++j) try_candidate(i, sample_in(rng, slab.windows[i]));
      }

      for (int it = 0; it < params.pm_iterations; ++it) {
        const bool forward = it % 2 == 0;
        const int step = forward ? -1 : +1;  // direction towards already-visited neighbors
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t i = forward ? k : n - 1 - k;
          const Index3 v = slab.coords[i];

          const Index3 shifts[3] = {{step, 0, 0}, {0, step, 0}, {0, 0, step}};
          for (const Index3& sh : shifts) {
            const std::int32_t nb = local_index({v.x + sh.x, v.y + sh.y, v.z + sh.z});
            if (nb < 0) continue;
            // nb != i, so the neighbor's list is stable while ours changes.
            const CandidateList& src = lists[static_cast<std::size_t>(nb)];
            for (int e = 0; e < src.size(); ++e) {
              Index3 c = unravel(d, src[e].voxel);
              c = {c.x - sh.x, c.y - sh.y, c.z - sh.z};
              if (slab.windows[i].contains(c)) try_candidate(i, c);
            }
          }

          const Index3 best = unravel(d, lists[i][0].voxel);
          for (int radius = s; radius >= 1; radius /= 2) {
            const Box around{{best.x - radius, best.y - radius, best.z - radius},
                             {best.x + radius, best.y + radius, best.z + radius}};
            try_candidate(i, sample_in(rng, intersect(around, slab.windows[i])));
          }
        }
      }

      for (std::size_t i = 0; i < n; ++i)
        for (int e = 0; e < lists[i].size(); ++e)
          merged[i].push({lists[i][e].distance, static_cast<int>(lib[t].status), static_cast<std::uint32_t>(t),
                          lists[i][e].voxel});
    }

    for (std::size_t i = 0; i < n; ++i) sink(slab.members[i], std::move(merged[i]).sorted());
    evaluations += slab_evals;
  }
  return evaluations;
}

}  // namespace gbsg::grading::detail
