#include <cmath>
#include <limits>

#include "gbsg/classify.hpp"
#include "gbsg/error.hpp"

namespace gbsg::classify {

Metrics evaluate(std::span<const int> predictions, std::span<const int> truth, int positive) {
  if (predictions.size() != truth.size()) throw Error(ErrorCode::LengthMismatch, "predictions vs truth");
  Metrics m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool actual = truth[i] == positive;
    const bool called = predictions[i] == positive;
    if (actual && called) ++m.counts.tp;
    else if (actual) ++m.counts.fn;
    else if (called) ++m.counts.fp;
    else ++m.counts.tn;
  }
  const auto ratio = [](int a, int b) {
    return b > 0 ? static_cast<double>(a) / b : std::numeric_limits<double>::quiet_NaN();
  };
  const Confusion& c = m.counts;
  m.acc = ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn);
  m.sen = ratio(c.tp, c.tp + c.fn);
  m.spe = ratio(c.tn, c.tn + c.fp);
  return m;
}

EvalReport summarize(std::vector<Metrics> runs) {
  if (runs.empty()) throw Error(ErrorCode::LengthMismatch, "no runs to summarize");
  EvalReport r;
  r.runs = std::move(runs);
  const double n = static_cast<double>(r.runs.size());
  for (const auto& m : r.runs) {
    r.mean.acc += m.acc;
    r.mean.sen += m.sen;
    r.mean.spe += m.spe;
  }
  r.mean.acc /= n;
  r.mean.sen /= n;
  r.mean.spe /= n;
  // Mean counts are only meaningful for a single run; keep the first run's.
  r.mean.counts = r.runs.front().counts;
  if (r.runs.size() > 1) {
    double sa = 0, ss = 0, sp = 0;
    for (const auto& m : r.runs) {
      sa += (m.acc - r.mean.acc) * (m.acc - r.mean.acc);
      ss += (m.sen - r.mean.sen) * (m.sen - r.mean.sen);
      sp += (m.spe - r.mean.spe) * (m.spe - r.mean.spe);
    }
    r.acc_sd = std::sqrt(sa / (n - 1));
    r.sen_sd = std::sqrt(ss / (n - 1));
    r.spe_sd = std::sqrt(sp / (n - 1));
  }
  return r;
}

}  // namespace gbsg::classify
