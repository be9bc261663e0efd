#include "gbsg/brain_graph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "gbsg/error.hpp"
#include "gbsg/volio.hpp"

namespace gbsg::graph {

void GraphParams::validate() const {
  if (sigma.kind == SigmaMode::Kind::Fixed && !(sigma.value > 0.0))
    throw Error(ErrorCode::InvalidParams, "fixed sigma must be > 0");
  if (min_voxels < 1) throw Error(ErrorCode::InvalidParams, "min_voxels must be >= 1");
}

int sturges_bins(std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidParams, "Sturges' rule needs n >= 1");
  // ceil(log2(n)) == bit_width(n - 1) for n >= 1.
  return 1 + static_cast<int>(std::bit_width(n - 1));
}

std::vector<double> structure_grades(const grading::GradingMap& g, const LabelMap& lm, StructureId id) {
  validate_pair(g.grades, lm);
  std::vector<double> out;
  for (std::size_t i = 0; i < lm.labels.size(); ++i)
    if (lm.labels[i] == id && g.mask.labels[i] != 0) out.push_back(g.grades.data[i]);
  return out;
}

StructureHistogram histogram_from_grades(StructureId id, std::span<const double> grades) {
  if (grades.empty()) throw Error(ErrorCode::StructureTooSmall, "structure " + std::to_string(id) + " has no grades");
  StructureHistogram h;
  h.structure_id = id;
  h.n = grades.size();
  const int bins = sturges_bins(h.n);
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(bins), 0);
  for (double g : grades) {
    const double pos = (g + 1.0) * 0.5 * bins;
    const int k = std::clamp(static_cast<int>(std::floor(pos)), 0, bins - 1);
    ++counts[static_cast<std::size_t>(k)];
  }
  h.masses.resize(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k)
    h.masses[k] = static_cast<double>(counts[k]) / static_cast<double>(h.n);
  return h;
}

StructureHistogram structure_histogram(const grading::GradingMap& g, const LabelMap& lm, StructureId id,
                                       std::size_t min_voxels) {
  const auto grades = structure_grades(g, lm, id);
  if (grades.size() < std::max<std::size_t>(min_voxels, 1))
    throw Error(ErrorCode::StructureTooSmall, "structure " + std::to_string(id) + " has " +
                                                  std::to_string(grades.size()) + " graded voxels");
  return histogram_from_grades(id, grades);
}

double vertex_value(std::span<const double> grades) {
  if (grades.empty()) throw Error(ErrorCode::StructureTooSmall, "no grades to average");
  double sum = 0.0;
  for (double g : grades) sum += g;
  return sum / static_cast<double>(grades.size());
}

std::vector<double> rebin(const StructureHistogram& h, int bins) {
  const int src = h.bins();
  if (src == bins) return h.masses;
  std::vector<double> out(static_cast<std::size_t>(bins), 0.0);
  // Work on the unit interval: source bin k covers [k/src, (k+1)/src).
  for (int k = 0; k < src; ++k) {
    const double mass = h.masses[static_cast<std::size_t>(k)];
    if (mass == 0.0) continue;
    const double lo = static_cast<double>(k) / src, hi = static_cast<double>(k + 1) / src;
    const int j0 = std::max(0, static_cast<int>(std::floor(lo * bins)));
    const int j1 = std::min(bins - 1, static_cast<int>(std::ceil(hi * bins)) - 1);
    for (int j = j0; j <= j1; ++j) {
      const double overlap =
          std::min(hi, static_cast<double>(j + 1) / bins) - std::max(lo, static_cast<double>(j) / bins);
      if (overlap > 0.0) out[static_cast<std::size_t>(j)] += mass * overlap * src;
    }
  }
  return out;
}

namespace {

void check_normalized(const StructureHistogram& h) {
  double sum = 0.0;
  for (double m : h.masses) {
    if (!(m >= 0.0)) throw Error(ErrorCode::NotNormalized, "negative histogram mass");
    sum += m;
  }
  if (h.masses.empty() || std::abs(sum - 1.0) > 1e-9)
    throw Error(ErrorCode::NotNormalized, "histogram masses sum to " + format_double(sum));
}

}  // namespace

double wasserstein1(const StructureHistogram& a, const StructureHistogram& b) {
  check_normalized(a);
  check_normalized(b);
  const int bins = std::max(a.bins(), b.bins());
  const auto ma = rebin(a, bins);
  const auto mb = rebin(b, bins);
  const double width = 2.0 / bins;
  double ca = 0.0, cb = 0.0, d = 0.0;
  for (int k = 0; k + 1 < bins; ++k) {
    ca += ma[static_cast<std::size_t>(k)];
    cb += mb[static_cast<std::size_t>(k)];
    d += std::abs(ca - cb);
  }
  return d * width;
}

double edge_weight(double distance, double sigma) {
  return std::exp(-(distance * distance) / (sigma * sigma));
}

std::size_t edge_index(std::size_t i, std::size_t j, std::size_t n) {
  // Edges before row i: sum_{r<i} (n - 1 - r).
  return i * (2 * n - i - 1) / 2 + (j - i - 1);
}

BrainGraph build_graph(const grading::GradingMap& g, const LabelMap& lm, const GraphParams& params) {
  params.validate();
  validate_pair(g.grades, lm);

  std::map<StructureId, std::vector<double>> grades;
  for (std::size_t i = 0; i < lm.labels.size(); ++i) {
    const auto id = lm.labels[i];
    if (id == 0) continue;
    auto& bucket = grades[id];
    if (g.mask.labels[i] != 0) bucket.push_back(g.grades.data[i]);
  }

  BrainGraph bg;
  std::vector<const std::vector<double>*> kept;
  for (const auto& [id, values] : grades) {
    if (values.size() < params.min_voxels) {
      bg.dropped.push_back(id);
      continue;
    }
    bg.structure_ids.push_back(id);
    kept.push_back(&values);
  }
  const std::size_t n = bg.structure_ids.size();
  if (n < 2)
    throw Error(ErrorCode::TooFewStructures, std::to_string(n) + " structure(s) survive the voxel-count filter");

  std::vector<StructureHistogram> hists(n);
  bg.vertex_values.resize(n);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
    hists[i] = histogram_from_grades(bg.structure_ids[i], *kept[i]);
    bg.vertex_values[i] = vertex_value(*kept[i]);
  }

  bg.distances.resize(edge_count(n));
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
    for (std::size_t j = i + 1; j < n; ++j) bg.distances[edge_index(i, j, n)] = wasserstein1(hists[i], hists[j]);

  if (params.sigma.kind == SigmaMode::Kind::Fixed) {
    bg.sigma = params.sigma.value;
  } else {
    auto sorted = bg.distances;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    bg.sigma = median > 0.0 ? median : 1.0;
  }
  bg.edge_weights.resize(bg.distances.size());
  for (std::size_t e = 0; e < bg.distances.size(); ++e) bg.edge_weights[e] = edge_weight(bg.distances[e], bg.sigma);
  return bg;
}

FeatureVector graph_to_features(const BrainGraph& bg, std::span<const StructureId> canonical_ids,
                                std::span<const double> edge_fill) {
  std::vector<StructureId> canon(canonical_ids.begin(), canonical_ids.end());
  std::sort(canon.begin(), canon.end());
  if (std::adjacent_find(canon.begin(), canon.end()) != canon.end())
    throw Error(ErrorCode::CanonicalOrderMismatch, "duplicate structure id in canonical list");
  const std::size_t n = canon.size();
  if (!edge_fill.empty() && edge_fill.size() != edge_count(n))
    throw Error(ErrorCode::DimensionMismatch, "edge fill has wrong length");

  // Position of each canonical id in the graph, or -1.
  std::vector<std::ptrdiff_t> where(n, -1);
  for (std::size_t k = 0; k < bg.structure_ids.size(); ++k) {
    const auto it = std::lower_bound(canon.begin(), canon.end(), bg.structure_ids[k]);
    if (it == canon.end() || *it != bg.structure_ids[k])
      throw Error(ErrorCode::CanonicalOrderMismatch,
                  "structure " + std::to_string(bg.structure_ids[k]) + " is not in the canonical list");
    where[static_cast<std::size_t>(it - canon.begin())] = static_cast<std::ptrdiff_t>(k);
  }

  FeatureVector fv;
  fv.values.assign(n + edge_count(n), 0.0);
  fv.imputed.assign(fv.values.size(), false);
  for (std::size_t i = 0; i < n; ++i) {
    if (where[i] >= 0) fv.values[i] = bg.vertex_values[static_cast<std::size_t>(where[i])];
    else fv.imputed[i] = true;
  }
  const std::size_t gn = bg.structure_ids.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::size_t e = edge_index(i, j, n);
      if (where[i] >= 0 && where[j] >= 0) {
        fv.values[n + e] =
            bg.edge_weights[edge_index(static_cast<std::size_t>(where[i]), static_cast<std::size_t>(where[j]), gn)];
      } else {
        fv.values[n + e] = edge_fill.empty() ? std::numeric_limits<double>::quiet_NaN() : edge_fill[e];
        fv.imputed[n + e] = true;
      }
    }
  return fv;
}

std::vector<std::string> feature_names(std::span<const StructureId> canonical_ids) {
  std::vector<StructureId> canon(canonical_ids.begin(), canonical_ids.end());
  std::sort(canon.begin(), canon.end());
  std::vector<std::string> names;
  names.reserve(canon.size() + edge_count(canon.size()));
  for (auto id : canon) names.push_back("V:" + std::to_string(id));
  for (std::size_t i = 0; i < canon.size(); ++i)
    for (std::size_t j = i + 1; j < canon.size(); ++j)
      names.push_back("E:" + std::to_string(canon[i]) + "-" + std::to_string(canon[j]));
  return names;
}

void write_graph_csv(const BrainGraph& bg, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  f << "# sigma," << format_double(bg.sigma) << '\n';
  f << "# dropped";
  for (auto id : bg.dropped) f << ',' << id;
  f << '\n';
  f << "# vertices\n";
  f << "structure_id,gamma\n";
  for (std::size_t i = 0; i < bg.structure_ids.size(); ++i)
    f << bg.structure_ids[i] << ',' << format_double(bg.vertex_values[i]) << '\n';
  f << "# edges\n";
  f << "id_i,id_j,distance,weight\n";
  const std::size_t n = bg.structure_ids.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto e = edge_index(i, j, n);
      f << bg.structure_ids[i] << ',' << bg.structure_ids[j] << ',' << format_double(bg.distances[e]) << ','
        << format_double(bg.edge_weights[e]) << '\n';
    }
  if (!f) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

BrainGraph read_graph_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::MissingFile, path.string());
  BrainGraph bg;
  enum class Block { None, Vertices, Edges } block = Block::None;
  std::string line;
  auto fields = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    return out;
  };
  std::vector<double> distances, weights;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# sigma,", 0) == 0) {
      bg.sigma = parse_double(line.substr(8));
    } else if (line.rfind("# dropped", 0) == 0) {
      auto parts = fields(line);
      for (std::size_t i = 1; i < parts.size(); ++i) bg.dropped.push_back(static_cast<StructureId>(std::stoul(parts[i])));
    } else if (line == "# vertices") {
      block = Block::Vertices;
    } else if (line == "# edges") {
      block = Block::Edges;
    } else if (line == "structure_id,gamma" || line == "id_i,id_j,distance,weight") {
      continue;
    } else {
      auto parts = fields(line);
      if (block == Block::Vertices && parts.size() == 2) {
        bg.structure_ids.push_back(static_cast<StructureId>(std::stoul(parts[0])));
        bg.vertex_values.push_back(parse_double(parts[1]));
      } else if (block == Block::Edges && parts.size() == 4) {
        distances.push_back(parse_double(parts[2]));
        weights.push_back(parse_double(parts[3]));
      } else {
        throw Error(ErrorCode::HeaderMismatch, "malformed graph line in " + path.string() + ": " + line);
      }
    }
  }
  if (distances.size() != edge_count(bg.structure_ids.size()))
    throw Error(ErrorCode::HeaderMismatch, "edge count does not match vertex count in " + path.string());
  bg.distances = std::move(distances);
  bg.edge_weights = std::move(weights);
  return bg;
}

}  // namespace gbsg::graph
