#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "gbsg/volume.hpp"

namespace gbsg::grading {

/// Cube of side 2r+1 around `center`, values in x-fastest order.
struct Patch {
  int radius = 1;
  Index3 center;
  std::vector<float> values;
};

/// Pathological status of a template: AD patches vote -1, CN patches +1.
enum class Status : int { AD = -1, CN = +1 };

struct TemplateEntry {
  Volume3D volume;
  LabelMap labels;
  Status status = Status::CN;
};

/// Templates sharing one registered space. Entries are shared so that
/// leave-one-out views cost nothing.
class TrainingLibrary {
 public:
  TrainingLibrary() = default;
  explicit TrainingLibrary(std::vector<TemplateEntry> entries);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const TemplateEntry& operator[](std::size_t i) const { return *entries_[i]; }
  const Dims& dims() const;

  /// Library with entry `i` removed.
  TrainingLibrary without(std::size_t i) const;
  /// Same templates with every status negated.
  TrainingLibrary flipped() const;

 private:
  std::vector<std::shared_ptr<const TemplateEntry>> entries_;
  void validate() const;
};

enum class SearchMethod { Exact, PatchMatch };

struct GradingParams {
  int patch_radius = 2;
  int k = 50;
  int search_window = 3;
  double epsilon = 0.0;  // <= 0 selects 1e-12 * patch cardinality
  SearchMethod method = SearchMethod::Exact;
  int pm_iterations = 4;
  std::uint64_t seed = 0;

  std::size_t patch_cardinality() const {
    const auto side = static_cast<std::size_t>(2 * patch_radius + 1);
    return side * side * side;
  }
  double effective_epsilon() const { return epsilon > 0.0 ? epsilon : 1e-12 * static_cast<double>(patch_cardinality()); }
  void validate() const;
};

/// One candidate patch: squared distance, the template's vote, and where it
/// came from (template index, linear index of the candidate center).
struct Neighbor {
  double distance = 0.0;
  int status = 0;
  std::uint32_t template_index = 0;
  std::uint64_t voxel = 0;
};

/// Strict ordering used for K-selection: distance, then template, then voxel.
inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  if (a.template_index != b.template_index) return a.template_index < b.template_index;
  return a.voxel < b.voxel;
}

inline constexpr float kUngraded = -2.0f;

struct GradingMap {
  Volume3D grades;  // kUngraded outside the mask
  LabelMap mask;    // 1 where graded
  std::uint64_t distance_evaluations = 0;
};

struct ExecOptions {
  int threads = 0;  // 0: OpenMP default
};

Patch extract_patch(const Volume3D& v, Index3 center, int radius);
double patch_distance(const Patch& p, const Patch& q);

bool is_interior(const Dims& d, Index3 c, int radius);

/// K nearest template patches, candidates centered within the search window
/// of the query center in every template. Sorted by neighbor_less.
std::vector<Neighbor> knn_exact(const Patch& query, const TrainingLibrary& lib, const GradingParams& params);

/// Voxels graded for a label map: nonzero label and at least r from every face.
std::vector<std::uint64_t> graded_voxels(const LabelMap& labels, int radius);

struct NeighborField {
  std::vector<std::uint64_t> voxels;
  std::vector<std::vector<Neighbor>> neighbors;  // parallel to voxels
  std::uint64_t distance_evaluations = 0;
};

NeighborField knn_exact_field(const Volume3D& query, const std::vector<std::uint64_t>& voxels,
                              const TrainingLibrary& lib, const GradingParams& params, const ExecOptions& exec = {});

/// Randomized search: per template, random initialization (always including
/// the zero offset), scanline/reverse-scanline propagation and shrinking
/// random search, all confined to the search window. Deterministic given
/// params.seed, independent of thread count.
NeighborField knn_patchmatch(const Volume3D& query, const std::vector<std::uint64_t>& voxels,
                             const TrainingLibrary& lib, const GradingParams& params, const ExecOptions& exec = {});

/// Weighted vote of the neighbors; weight exp(-d / (d_min + eps)).
double grade_voxel(const std::vector<Neighbor>& neighbors, double epsilon);

GradingMap grade_volume(const Volume3D& test, const LabelMap& labels, const TrainingLibrary& lib,
                        const GradingParams& params, const ExecOptions& exec = {});

/// z-slab thickness used to partition PatchMatch work.
inline constexpr int kPatchMatchSlab = 8;

}  // namespace gbsg::grading
