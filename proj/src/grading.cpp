#include "gbsg/grading.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gbsg/error.hpp"
#include "gbsg/volio.hpp"
#include "patch_kernel.hpp"
#include "search_internal.hpp"

#include <omp.h>

namespace gbsg::grading {

TrainingLibrary::TrainingLibrary(std::vector<TemplateEntry> entries) {
  entries_.reserve(entries.size());
  for (auto& e : entries) entries_.push_back(std::make_shared<const TemplateEntry>(std::move(e)));
  validate();
}

void TrainingLibrary::validate() const {
  if (entries_.empty()) throw Error(ErrorCode::InvalidParams, "training library is empty");
  for (const auto& e : entries_) {
    if (e->status != Status::AD && e->status != Status::CN)
      throw Error(ErrorCode::InvalidParams, "template status must be -1 or +1");
    validate_pair(e->volume, e->labels);
    validate_geometry(e->volume.dims, e->volume.spacing, entries_.front()->volume.dims,
                      entries_.front()->volume.spacing);
  }
}

const Dims& TrainingLibrary::dims() const {
  if (entries_.empty()) throw Error(ErrorCode::InvalidParams, "training library is empty");
  return entries_.front()->volume.dims;
}

TrainingLibrary TrainingLibrary::without(std::size_t i) const {
  TrainingLibrary out;
  for (std::size_t j = 0; j < entries_.size(); ++j)
    if (j != i) out.entries_.push_back(entries_[j]);
  if (out.entries_.empty()) throw Error(ErrorCode::InvalidParams, "leave-one-out leaves an empty library");
  return out;
}

TrainingLibrary TrainingLibrary::flipped() const {
  TrainingLibrary out;
  for (const auto& e : entries_) {
    TemplateEntry copy = *e;
    copy.status = copy.status == Status::AD ? Status::CN : Status::AD;
    out.entries_.push_back(std::make_shared<const TemplateEntry>(std::move(copy)));
  }
  return out;
}

void GradingParams::validate() const {
  if (patch_radius < 1) throw Error(ErrorCode::InvalidParams, "patch radius must be >= 1");
  if (k < 1) throw Error(ErrorCode::InvalidParams, "K must be >= 1");
  if (search_window < 0) throw Error(ErrorCode::InvalidParams, "search window must be >= 0");
  if (!(effective_epsilon() > 0.0)) throw Error(ErrorCode::InvalidParams, "epsilon must be > 0");
  if (method == SearchMethod::PatchMatch && pm_iterations < 1)
    throw Error(ErrorCode::InvalidParams, "PatchMatch needs at least one iteration");
}

bool is_interior(const Dims& d, Index3 c, int r) {
  return c.x >= r && c.y >= r && c.z >= r && c.x + r < static_cast<int>(d[0]) && c.y + r < static_cast<int>(d[1]) &&
         c.z + r < static_cast<int>(d[2]);
}

Patch extract_patch(const Volume3D& v, Index3 center, int radius) {
  if (radius < 1) throw Error(ErrorCode::InvalidParams, "patch radius must be >= 1");
  if (!is_interior(v.dims, center, radius))
    throw Error(ErrorCode::OutOfBounds, "patch at (" + std::to_string(center.x) + "," + std::to_string(center.y) + "," +
                                            std::to_string(center.z) + ") leaves the volume");
  Patch p;
  p.radius = radius;
  p.center = center;
  const auto side = static_cast<std::size_t>(2 * radius + 1);
  p.values.resize(side * side * side);
  detail::gather(v, center, radius, p.values.data());
  return p;
}

double patch_distance(const Patch& p, const Patch& q) {
  if (p.radius != q.radius) throw Error(ErrorCode::RadiusMismatch, "patch radii differ");
  const auto side = static_cast<std::size_t>(2 * p.radius + 1);
  return detail::ssd(p.radius, p.values.data(), q.values.data(), side, side * side);
}

namespace {

// Scans the search window of `center` in every template. Candidates are
// visited in ascending (template, linear index) order, so a candidate whose
// distance only ties the current worst can be rejected without finishing it.
std::uint64_t scan_window(const float* query, Index3 center, const TrainingLibrary& lib, const GradingParams& params,
                          detail::BoundedHeap& heap) {
  const int r = params.patch_radius;
  const int s = params.search_window;
  const Dims& d = lib.dims();
  const int x0 = std::max(center.x - s, r), x1 = std::min(center.x + s, static_cast<int>(d[0]) - 1 - r);
  const int y0 = std::max(center.y - s, r), y1 = std::min(center.y + s, static_cast<int>(d[1]) - 1 - r);
  const int z0 = std::max(center.z - s, r), z1 = std::min(center.z + s, static_cast<int>(d[2]) - 1 - r);
  if (x0 > x1 || y0 > y1 || z0 > z1) throw Error(ErrorCode::EmptyCandidateSet, "search window has no interior centers");

  std::uint64_t evaluations = 0;
  for (std::size_t t = 0; t < lib.size(); ++t) {
    const Volume3D& vol = lib[t].volume;
    const int status = static_cast<int>(lib[t].status);
    for (int z = z0; z <= z1; ++z)
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const double bound = heap.threshold();
          const double dist = detail::ssd_at(r, query, vol, {x, y, z}, bound);
          ++evaluations;
          if (dist >= bound) continue;
          heap.push({dist, status, static_cast<std::uint32_t>(t), vol.index(x, y, z)});
        }
  }
  return evaluations;
}

void check_query_space(const Volume3D& query, const TrainingLibrary& lib) {
  const auto& first = lib[0].volume;
  validate_geometry(query.dims, query.spacing, first.dims, first.spacing);
}

}  // namespace

std::vector<Neighbor> knn_exact(const Patch& query, const TrainingLibrary& lib, const GradingParams& params) {
  params.validate();
  if (query.radius != params.patch_radius) throw Error(ErrorCode::RadiusMismatch, "query radius differs from params");
  if (lib.empty()) throw Error(ErrorCode::InvalidParams, "training library is empty");
  detail::BoundedHeap heap(static_cast<std::size_t>(params.k));
  scan_window(query.values.data(), query.center, lib, params, heap);
  return std::move(heap).sorted();
}

std::vector<std::uint64_t> graded_voxels(const LabelMap& labels, int radius) {
  std::vector<std::uint64_t> out;
  for (int z = radius; z + radius < static_cast<int>(labels.dims[2]); ++z)
    for (int y = radius; y + radius < static_cast<int>(labels.dims[1]); ++y)
      for (int x = radius; x + radius < static_cast<int>(labels.dims[0]); ++x) {
        const auto i = labels.index(x, y, z);
        if (labels.labels[i] != 0) out.push_back(i);
      }
  return out;
}

namespace detail {

int thread_count(const ExecOptions& exec) { return exec.threads > 0 ? exec.threads : omp_get_max_threads(); }

std::uint64_t exact_search(const Volume3D& query, const std::vector<std::uint64_t>& voxels,
                           const TrainingLibrary& lib, const GradingParams& params, const ExecOptions& exec,
                           const NeighborSink& sink) {
  const auto n = static_cast<std::int64_t>(voxels.size());
  const std::size_t card = params.patch_cardinality();
  std::uint64_t evaluations = 0;
  bool failed = false;

#pragma omp parallel num_threads(thread_count(exec)) reduction(+ : evaluations)
  {
    std::vector<float> buffer(card);
#pragma omp for schedule(dynamic, 64)
    for (std::int64_t i = 0; i < n; ++i) {
      const Index3 c = unravel(query.dims, voxels[i]);
      if (!is_interior(query.dims, c, params.patch_radius)) {
#pragma omp atomic write
        failed = true;
        continue;
      }
      gather(query, c, params.patch_radius, buffer.data());
      BoundedHeap heap(static_cast<std::size_t>(params.k));
      try {
        evaluations += scan_window(buffer.data(), c, lib, params, heap);
      } catch (const Error&) {
#pragma omp atomic write
        failed = true;
        continue;
      }
      sink(static_cast<std::size_t>(i), std::move(heap).sorted());
    }
  }
  if (failed) throw Error(ErrorCode::EmptyCandidateSet, "a graded voxel has no valid candidates");
  return evaluations;
}

}  // namespace detail

namespace {

NeighborField collect(const std::vector<std::uint64_t>& voxels,
                      const std::function<std::uint64_t(const detail::NeighborSink&)>& run) {
  NeighborField field;
  field.voxels = voxels;
  field.neighbors.resize(voxels.size());
  field.distance_evaluations =
      run([&](std::size_t i, std::vector<Neighbor>&& nb) { field.neighbors[i] = std::move(nb); });
  return field;
}

}  // namespace

NeighborField knn_exact_field(const Volume3D& query, const std::vector<std::uint64_t>& voxels,
                              const TrainingLibrary& lib, const GradingParams& params, const ExecOptions& exec) {
  params.validate();
  check_query_space(query, lib);
  return collect(voxels, [&](const detail::NeighborSink& sink) {
    return detail::exact_search(query, voxels, lib, params, exec, sink);
  });
}

NeighborField knn_patchmatch(const Volume3D& query, const std::vector<std::uint64_t>& voxels,
                             const TrainingLibrary& lib, const GradingParams& params, const ExecOptions& exec) {
  params.validate();
  check_query_space(query, lib);
  return collect(voxels, [&](const detail::NeighborSink& sink) {
    return detail::patchmatch_search(query, voxels, lib, params, exec, sink);
  });
}

double grade_voxel(const std::vector<Neighbor>& neighbors, double epsilon) {
  if (neighbors.empty()) throw Error(ErrorCode::EmptyNeighborhood, "no neighbors to vote");
  double d_min = neighbors.front().distance;
  for (const auto& n : neighbors) {
    if (!(n.distance >= 0.0)) throw Error(ErrorCode::EmptyNeighborhood, "negative or NaN distance");
    d_min = std::min(d_min, n.distance);
  }
  const double scale = d_min + epsilon;
  double num = 0.0, den = 0.0;
  for (const auto& n : neighbors) {
    const double w = std::exp(-n.distance / scale);
    num += w * n.status;
    den += w;
  }
  return std::clamp(num / den, -1.0, 1.0);
}

GradingMap grade_volume(const Volume3D& test, const LabelMap& labels, const TrainingLibrary& lib,
                        const GradingParams& params, const ExecOptions& exec) {
  params.validate();
  validate_pair(test, labels);
  if (lib.empty()) throw Error(ErrorCode::InvalidParams, "training library is empty");
  check_query_space(test, lib);

  const auto voxels = graded_voxels(labels, params.patch_radius);
  GradingMap out;
  out.grades = Volume3D(test.dims, test.spacing, kUngraded);
  out.mask = LabelMap(test.dims, test.spacing, 0);
  const double eps = params.effective_epsilon();
  const detail::NeighborSink sink = [&](std::size_t i, std::vector<Neighbor>&& nb) {
    out.grades.data[voxels[i]] = static_cast<float>(grade_voxel(nb, eps));
    out.mask.labels[voxels[i]] = 1;
  };
  out.distance_evaluations = params.method == SearchMethod::Exact
                                 ? detail::exact_search(test, voxels, lib, params, exec, sink)
                                 : detail::patchmatch_search(test, voxels, lib, params, exec, sink);
  return out;
}

}  // namespace gbsg::grading
