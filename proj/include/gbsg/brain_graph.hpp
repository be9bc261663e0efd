#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gbsg/grading.hpp"
#include "gbsg/volume.hpp"

namespace gbsg::graph {

using StructureId = std::uint32_t;

/// Normalized histogram of one structure's grades on a uniform grid over
/// [-1, +1]. The top bin is closed so a grade of exactly +1 lands in it.
struct StructureHistogram {
  StructureId structure_id = 0;
  std::vector<double> masses;
  std::size_t n = 0;

  int bins() const { return static_cast<int>(masses.size()); }
  double bin_width() const { return 2.0 / static_cast<double>(masses.size()); }
  double lower_edge(int k) const { return -1.0 + bin_width() * k; }
};

/// Complete undirected graph over the structures that survived filtering.
/// Edge arrays use the canonical pair order (0,1), (0,2), ..., (N-2,N-1).
struct BrainGraph {
  std::vector<StructureId> structure_ids;  // sorted
  std::vector<double> vertex_values;       // mean grade per structure
  std::vector<double> distances;           // Wasserstein-1 per pair
  std::vector<double> edge_weights;        // exp(-d^2 / sigma^2)
  double sigma = 1.0;
  std::vector<StructureId> dropped;        // structures below min_voxels
};

struct SigmaMode {
  enum class Kind { Fixed, MedianHeuristic };
  Kind kind = Kind::MedianHeuristic;
  double value = 1.0;  // used when Fixed

  static SigmaMode fixed(double sigma) { return {Kind::Fixed, sigma}; }
  static SigmaMode median() { return {Kind::MedianHeuristic, 1.0}; }
};

struct GraphParams {
  SigmaMode sigma;
  std::size_t min_voxels = 1;
  void validate() const;
};

/// ceil(1 + log2(n)) computed in integer arithmetic.
int sturges_bins(std::uint64_t n);

/// Raw grades of the graded voxels carrying `id`, in voxel order.
std::vector<double> structure_grades(const grading::GradingMap& g, const LabelMap& lm, StructureId id);

StructureHistogram histogram_from_grades(StructureId id, std::span<const double> grades);

/// Throws StructureTooSmall when fewer than `min_voxels` graded voxels carry `id`.
StructureHistogram structure_histogram(const grading::GradingMap& g, const LabelMap& lm, StructureId id,
                                       std::size_t min_voxels = 1);

/// Arithmetic mean of the raw grades (not the binned approximation).
double vertex_value(std::span<const double> grades);

/// Mass of `h` spread onto `bins` uniform bins over [-1, +1], split in
/// proportion to overlap length.
std::vector<double> rebin(const StructureHistogram& h, int bins);

/// Wasserstein-1 distance after re-binning both histograms onto the finer grid.
double wasserstein1(const StructureHistogram& a, const StructureHistogram& b);

double edge_weight(double distance, double sigma);

/// Position of edge (i, j), i < j, among N vertices.
std::size_t edge_index(std::size_t i, std::size_t j, std::size_t n);
inline std::size_t edge_count(std::size_t n) { return n * (n - 1) / 2; }

BrainGraph build_graph(const grading::GradingMap& g, const LabelMap& lm, const GraphParams& params);

/// Canonical feature vector: [gamma_1..gamma_N, w_(1,2), w_(1,3), ..., w_(N-1,N)]
/// over the sorted canonical id list. Structures missing from the graph get
/// gamma = 0; their edges get `edge_fill` when given, NaN otherwise. `imputed`
/// marks every filled entry.
struct FeatureVector {
  std::vector<double> values;
  std::vector<bool> imputed;
};

FeatureVector graph_to_features(const BrainGraph& bg, std::span<const StructureId> canonical_ids,
                                std::span<const double> edge_fill = {});

/// Column names `V:<id>` then `E:<id_i>-<id_j>` in canonical order.
std::vector<std::string> feature_names(std::span<const StructureId> canonical_ids);

void write_graph_csv(const BrainGraph& bg, const std::filesystem::path& path);
BrainGraph read_graph_csv(const std::filesystem::path& path);

}  // namespace gbsg::graph
