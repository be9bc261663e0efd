#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gbsg/grading.hpp"

namespace gbsg::grading::detail {

// Receives the sorted neighbor list of voxels[index]. Invoked concurrently
// from worker threads, each index exactly once.
using NeighborSink = std::function<void(std::size_t index, std::vector<Neighbor>&& neighbors)>;

int thread_count(const ExecOptions& exec);

std::uint64_t exact_search(const Volume3D& query, const std::vector<std::uint64_t>& voxels,
                           const TrainingLibrary& lib, const GradingParams& params, const ExecOptions& exec,
                           const NeighborSink& sink);

std::uint64_t patchmatch_search(const Volume3D& query, const std::vector<std::uint64_t>& voxels,
                                const TrainingLibrary& lib, const GradingParams& params, const ExecOptions& exec,
                                const NeighborSink& sink);

}  // namespace gbsg::grading::detail
