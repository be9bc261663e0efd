#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gbsg/classify.hpp"
#include "gbsg/error.hpp"
#include "gbsg/rng.hpp"
#include "gbsg/volio.hpp"

namespace gbsg::classify {

void ForestParams::validate() const {
  if (trees < 1) throw Error(ErrorCode::InvalidParams, "forest needs at least one tree");
  if (mtry < 0 || min_leaf < 1 || max_depth < 0) throw Error(ErrorCode::InvalidParams, "invalid forest parameters");
}

int Tree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int k = 0;
  while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
    const TreeNode& node = nodes[static_cast<std::size_t>(k)];
    k = row(node.feature) <= node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(k)].label;
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double score = -1.0;  // sum over children of (pos^2 + neg^2) / size; larger is purer
  std::size_t left_size = 0;
};

int majority(std::span<const std::uint32_t> rows, const Eigen::VectorXd& y) {
  int pos = 0;
  for (auto r : rows) pos += y(r) > 0;
  const int neg = static_cast<int>(rows.size()) - pos;
  return pos >= neg ? 1 : -1;
}

Tree grow_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestParams& params, int mtry,
               std::uint64_t seed) {
  const auto n = static_cast<std::uint32_t>(x.rows());
  const int p = static_cast<int>(x.cols());
  Rng rng(seed);

  std::vector<std::uint32_t> sample(n);
  std::vector<bool> in_bag(n, false);
  for (auto& s : sample) {
    s = static_cast<std::uint32_t>(rng.below(n));
    in_bag[s] = true;
  }
  Tree tree;
  for (std::uint32_t i = 0; i < n; ++i)
    if (!in_bag[i]) tree.out_of_bag.push_back(i);

  struct Pending {
    int node;
    std::size_t begin, end;
    int depth;
  };
  std::vector<Pending> stack;
  tree.nodes.emplace_back();
  stack.push_back({0, 0, sample.size(), 0});

  std::vector<int> features(static_cast<std::size_t>(p));
  std::vector<std::uint32_t> sorted;

  while (!stack.empty()) {
    const Pending job = stack.back();
    stack.pop_back();
    const std::span<std::uint32_t> rows(sample.data() + job.begin, job.end - job.begin);
    int pos = 0;
    for (auto r : rows) pos += y(r) > 0;
    const int size = static_cast<int>(rows.size());
    const bool pure = pos == 0 || pos == size;
    const bool depth_reached = params.max_depth > 0 && job.depth >= params.max_depth;
    tree.nodes[static_cast<std::size_t>(job.node)].label = majority(rows, y);
    if (pure || size < 2 * params.min_leaf || depth_reached) continue;

    // mtry features without replacement (partial Fisher-Yates).
    std::iota(features.begin(), features.end(), 0);
    for (int k = 0; k < mtry; ++k) std::swap(features[static_cast<std::size_t>(k)], features[static_cast<std::size_t>(k + static_cast<int>(rng.below(static_cast<std::uint64_t>(p - k))))]);

    Split best;
    for (int k = 0; k < mtry; ++k) {
      const int f = features[static_cast<std::size_t>(k)];
      sorted.assign(rows.begin(), rows.end());
      std::sort(sorted.begin(), sorted.end(), [&](std::uint32_t a, std::uint32_t b) {
        return x(a, f) != x(b, f) ? x(a, f) < x(b, f) : a < b;
      });
      double lp = 0.0, ln = 0.0;
      const double tp = pos, tn = size - pos;
      for (int i = 0; i + 1 < size; ++i) {
        (y(sorted[static_cast<std::size_t>(i)]) > 0 ? lp : ln) += 1.0;
        const double v = x(sorted[static_cast<std::size_t>(i)], f), next = x(sorted[static_cast<std::size_t>(i + 1)], f);
        if (!(v < next)) continue;
        const int nl = i + 1, nr = size - nl;
        if (nl < params.min_leaf || nr < params.min_leaf) continue;
        const double rp = tp - lp, rn = tn - ln;
        const double score = (lp * lp + ln * ln) / nl + (rp * rp + rn * rn) / nr;
        if (score > best.score) {
          best = {f, 0.5 * (v + next), score, static_cast<std::size_t>(nl)};
        }
      }
    }
    if (best.feature < 0) continue;

    auto mid = std::stable_partition(rows.begin(), rows.end(),
                                     [&](std::uint32_t r) { return x(r, best.feature) <= best.threshold; });
    const std::size_t split = job.begin + static_cast<std::size_t>(mid - rows.begin());
    const int left = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[static_cast<std::size_t>(job.node)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = left + 1;
    stack.push_back({left + 1, split, job.end, job.depth + 1});
    stack.push_back({left, job.begin, split, job.depth + 1});
  }
  return tree;
}

}  // namespace

ForestModel rf_train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestParams& params,
                     std::uint64_t seed) {
  params.validate();
  if (x.rows() != y.size()) throw Error(ErrorCode::LengthMismatch, "rows vs labels");
  if (!((y.array() > 0).any() && (y.array() < 0).any())) throw Error(ErrorCode::SingleClass, "both classes are required");
  if (x.cols() < 1) throw Error(ErrorCode::DimensionMismatch, "no features");
  const int p = static_cast<int>(x.cols());
  const int mtry = params.mtry > 0 ? std::min(params.mtry, p) : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));

  ForestModel m;
  m.params = params;
  m.seed = seed;
  m.features = p;
  m.trees.resize(static_cast<std::size_t>(params.trees));
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < params.trees; ++t)
    m.trees[static_cast<std::size_t>(t)] =
        grow_tree(x, y, params, mtry, derive_seed(seed, {seed_tag("rf-tree"), static_cast<std::uint64_t>(t)}));
  return m;
}

std::vector<int> rf_predict(const ForestModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.features) throw Error(ErrorCode::DimensionMismatch, "feature count differs from the forest");
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int votes = 0;
    for (const auto& t : m.trees) votes += t.predict(x.row(i));
    out[static_cast<std::size_t>(i)] = votes >= 0 ? 1 : -1;
  }
  return out;
}

double rf_oob_accuracy(const ForestModel& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  std::vector<int> votes(static_cast<std::size_t>(x.rows()), 0), seen(static_cast<std::size_t>(x.rows()), 0);
  for (const auto& t : m.trees)
    for (auto r : t.out_of_bag) {
      votes[r] += t.predict(x.row(r));
      ++seen[r];
    }
  int scored = 0, correct = 0;
  for (std::size_t i = 0; i < votes.size(); ++i) {
    if (seen[i] == 0) continue;
    ++scored;
    correct += (votes[i] >= 0 ? 1 : -1) == static_cast<int>(y(static_cast<Eigen::Index>(i)));
  }
  return scored ? static_cast<double>(correct) / scored : 0.0;
}

std::uint64_t rf_run_seed(std::uint64_t master_seed, int run) {
  return derive_seed(master_seed, {seed_tag("rf-run"), static_cast<std::uint64_t>(run)});
}

EvalReport repeated_rf_eval(const Eigen::MatrixXd& x_train, const Eigen::VectorXd& y_train,
                            const Eigen::MatrixXd& x_test, std::span<const int> y_test, int positive,
                            const ForestParams& params, int runs, std::uint64_t master_seed,
                            std::vector<ForestModel>* forests) {
  if (runs < 1) throw Error(ErrorCode::InvalidParams, "runs must be >= 1");
  std::vector<Metrics> metrics;
  for (int r = 0; r < runs; ++r) {
    auto model = rf_train(x_train, y_train, params, rf_run_seed(master_seed, r));
    metrics.push_back(evaluate(rf_predict(model, x_test), y_test, positive));
    if (forests) forests->push_back(std::move(model));
  }
  return summarize(std::move(metrics));
}

void write_forests(std::span<const ForestModel> forests, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  f << "gbsg-forest v1 forests=" << forests.size() << '\n';
  for (const auto& m : forests) {
    f << "forest trees=" << m.trees.size() << " features=" << m.features << " mtry=" << m.params.mtry
      << " min_leaf=" << m.params.min_leaf << " max_depth=" << m.params.max_depth << " seed=" << m.seed << '\n';
    for (const auto& t : m.trees) {
      f << "tree " << t.nodes.size() << '\n';
      for (const auto& n : t.nodes)
        f << n.feature << ' ' << format_double(n.threshold) << ' ' << n.left << ' ' << n.right << ' ' << n.label << '\n';
    }
  }
  if (!f) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

std::vector<ForestModel> read_forests(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::MissingFile, path.string());
  std::string word;
  std::size_t count = 0;
  auto expect_kv = [&](const std::string& key) {
    if (!(f >> word) || word.rfind(key + "=", 0) != 0) throw Error(ErrorCode::ModelFormat, "expected " + key);
    return word.substr(key.size() + 1);
  };
  if (!(f >> word) || word != "gbsg-forest" || !(f >> word) || word != "v1")
    throw Error(ErrorCode::ModelFormat, "not a forest model file");
  count = std::stoul(expect_kv("forests"));
  std::vector<ForestModel> out(count);
  for (auto& m : out) {
    if (!(f >> word) || word != "forest") throw Error(ErrorCode::ModelFormat, "expected forest");
    const auto trees = std::stoul(expect_kv("trees"));
    m.features = std::stoi(expect_kv("features"));
    m.params.mtry = std::stoi(expect_kv("mtry"));
    m.params.min_leaf = std::stoi(expect_kv("min_leaf"));
    m.params.max_depth = std::stoi(expect_kv("max_depth"));
    m.seed = std::stoull(expect_kv("seed"));
    m.params.trees = static_cast<int>(trees);
    m.trees.resize(trees);
    for (auto& t : m.trees) {
      std::size_t nodes = 0;
      if (!(f >> word >> nodes) || word != "tree") throw Error(ErrorCode::ModelFormat, "expected tree");
      t.nodes.resize(nodes);
      for (auto& n : t.nodes) {
        std::string thr;
        if (!(f >> n.feature >> thr >> n.left >> n.right >> n.label)) throw Error(ErrorCode::ModelFormat, "bad node");
        n.threshold = parse_double(thr);
        if (n.feature >= m.features || (n.feature >= 0 && (n.left < 0 || n.right < 0 ||
                                                           n.left >= static_cast<int>(nodes) ||
                                                           n.right >= static_cast<int>(nodes))))
          throw Error(ErrorCode::ModelFormat, "node references are out of range");
      }
    }
  }
  return out;
}

}  // namespace gbsg::classify
