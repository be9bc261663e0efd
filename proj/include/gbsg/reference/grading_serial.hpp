#pragma once

#include "gbsg/grading.hpp"

namespace gbsg::reference {

/// Single-threaded exhaustive grading: every candidate in every window is
/// scored in full, sorted, and the first K vote. No early termination, no
/// heaps, no shared kernels with the optimized path. Slow; used to check it.
grading::GradingMap grade_volume_serial(const Volume3D& test, const LabelMap& labels,
                                        const grading::TrainingLibrary& lib, const grading::GradingParams& params);

}  // namespace gbsg::reference
