#include "gbsg/reference/grading_serial.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

namespace gbsg::reference {

using grading::GradingMap;
using grading::GradingParams;
using grading::TrainingLibrary;

GradingMap grade_volume_serial(const Volume3D& test, const LabelMap& labels, const TrainingLibrary& lib,
                               const GradingParams& params) {
  const int r = params.patch_radius;
  const int s = params.search_window;
  const int nx = static_cast<int>(test.dims[0]), ny = static_cast<int>(test.dims[1]), nz = static_cast<int>(test.dims[2]);
  const double eps = params.effective_epsilon();

  GradingMap out;
  out.grades = Volume3D(test.dims, test.spacing, grading::kUngraded);
  out.mask = LabelMap(test.dims, test.spacing, 0);

  struct Cand {
    double dist;
    std::size_t tmpl;
    std::size_t lin;
    int status;
  };
  std::vector<Cand> cands;

  for (int z = r; z < nz - r; ++z)
    for (int y = r; y < ny - r; ++y)
      for (int x = r; x < nx - r; ++x) {
        if (labels.at(x, y, z) == 0) continue;
        cands.clear();
        for (std::size_t t = 0; t < lib.size(); ++t) {
          const Volume3D& tv = lib[t].volume;
          for (int cz = z - s; cz <= z + s; ++cz)
            for (int cy = y - s; cy <= y + s; ++cy)
              for (int cx = x - s; cx <= x + s; ++cx) {
                if (cx < r || cy < r || cz < r || cx >= nx - r || cy >= ny - r || cz >= nz - r) continue;
                double dist = 0.0;
                for (int dz = -r; dz <= r; ++dz)
                  for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                      const double diff = static_cast<double>(test.at(x + dx, y + dy, z + dz)) -
                                          static_cast<double>(tv.at(cx + dx, cy + dy, cz + dz));
                      dist += diff * diff;
                    }
                cands.push_back({dist, t, tv.index(cx, cy, cz), static_cast<int>(lib[t].status)});
              }
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
          return std::tie(a.dist, a.tmpl, a.lin) < std::tie(b.dist, b.tmpl, b.lin);
        });
        const std::size_t keep = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(params.k));
        const double h2 = cands.front().dist;
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < keep; ++j) {
          const double w = std::exp(-cands[j].dist / (h2 + eps));
          num += w * cands[j].status;
          den += w;
        }
        out.grades.at(x, y, z) = static_cast<float>(num / den);
        out.mask.at(x, y, z) = 1;
      }
  return out;
}

}  // namespace gbsg::reference
