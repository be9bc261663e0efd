#include "gbsg/config.hpp"

#include <charconv>
#include <functional>
#include <fstream>
#include <set>
#include <sstream>

#include "gbsg/error.hpp"
#include "gbsg/volio.hpp"

namespace gbsg::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr std::array<const char*, 4> kGroupKeys{"CN", "sMCI", "pMCI", "AD"};

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why) {
  throw Error(ErrorCode::ConfigError, key + "=" + value + ": " + why);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "expected an integer");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const Error&) {
    bad(key, v, "expected a number");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

std::string join3(const auto& a, char sep) {
  std::ostringstream o;
  o << a[0] << sep << a[1] << sep << a[2];
  return o.str();
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const std::string&)>;

std::map<std::string, Setter> setters(const fs::path& base) {
  std::map<std::string, Setter> table;
  auto path_setter = [base](fs::path PipelineConfig::*field) {
    return [base, field](PipelineConfig& c, const std::string&, const std::string& v) {
      const fs::path p(v);
      c.*field = (p.is_relative() && !base.empty()) ? (base / p).lexically_normal() : p;
    };
  };
  table["paths.manifest"] = path_setter(&PipelineConfig::manifest);
  table["paths.templates"] = path_setter(&PipelineConfig::templates);
  table["paths.work_dir"] = path_setter(&PipelineConfig::work_dir);
  table["paths.report"] = path_setter(&PipelineConfig::report);

  table["seed"] = [](auto& c, auto& k, auto& v) { c.seed = parse_int<std::uint64_t>(k, v); };
  table["grading.patch_radius"] = [](auto& c, auto& k, auto& v) { c.grading.patch_radius = parse_int<int>(k, v); };
  table["grading.k"] = [](auto& c, auto& k, auto& v) { c.grading.k = parse_int<int>(k, v); };
  table["grading.search_window"] = [](auto& c, auto& k, auto& v) { c.grading.search_window = parse_int<int>(k, v); };
  table["grading.epsilon"] = [](auto& c, auto& k, auto& v) { c.grading.epsilon = parse_real(k, v); };
  table["grading.method"] = [](auto& c, auto& k, auto& v) {
    try {
      c.grading.method = parse_search_method(v);
    } catch (const Error&) {
      bad(k, v, "expected exact or patchmatch");
    }
  };
  table["grading.pm_iterations"] = [](auto& c, auto& k, auto& v) { c.grading.pm_iterations = parse_int<int>(k, v); };

  table["graph.sigma"] = [](auto& c, auto& k, auto& v) {
    c.graph.sigma = v == "median" ? graph::SigmaMode::median() : graph::SigmaMode::fixed(parse_real(k, v));
  };
  table["graph.min_voxels"] = [](auto& c, auto& k, auto& v) { c.graph.min_voxels = parse_int<std::size_t>(k, v); };

  table["en.lambda1"] = [](auto& c, auto& k, auto& v) { c.en.lambda1 = parse_real(k, v); };
  table["en.lambda2"] = [](auto& c, auto& k, auto& v) { c.en.lambda2 = parse_real(k, v); };
  table["en.target_nonzeros"] = [](auto& c, auto& k, auto& v) {
    if (v == "none") c.en.target_nonzeros.reset();
    else c.en.target_nonzeros = parse_int<int>(k, v);
  };
  table["en.max_iterations"] = [](auto& c, auto& k, auto& v) { c.en.max_iterations = parse_int<int>(k, v); };
  table["en.tolerance"] = [](auto& c, auto& k, auto& v) { c.en.tolerance = parse_real(k, v); };

  table["classifier.kind"] = [](auto& c, auto& k, auto& v) {
    if (v == "svm") c.classifier = ClassifierKind::Svm;
    else if (v == "rf") c.classifier = ClassifierKind::Rf;
    else if (v == "both") c.classifier = ClassifierKind::Both;
    else bad(k, v, "expected svm, rf or both");
  };
  table["svm.folds"] = [](auto& c, auto& k, auto& v) { c.cv_folds = parse_int<int>(k, v); };
  table["rf.trees"] = [](auto& c, auto& k, auto& v) { c.forest.trees = parse_int<int>(k, v); };
  table["rf.mtry"] = [](auto& c, auto& k, auto& v) { c.forest.mtry = parse_int<int>(k, v); };
  table["rf.min_leaf"] = [](auto& c, auto& k, auto& v) { c.forest.min_leaf = parse_int<int>(k, v); };
  table["rf.max_depth"] = [](auto& c, auto& k, auto& v) { c.forest.max_depth = parse_int<int>(k, v); };
  table["rf.runs"] = [](auto& c, auto& k, auto& v) { c.rf_runs = parse_int<int>(k, v); };

  table["synth.dims"] = [](auto& c, auto& k, auto& v) {
    const auto parts = split(v, 'x');
    if (parts.size() != 3) bad(k, v, "expected XxYxZ");
    for (int i = 0; i < 3; ++i) c.synth.dims[static_cast<std::size_t>(i)] = parse_int<std::uint32_t>(k, parts[static_cast<std::size_t>(i)]);
  };
  table["synth.spacing"] = [](auto& c, auto& k, auto& v) {
    const auto parts = split(v, ',');
    if (parts.size() != 3) bad(k, v, "expected sx,sy,sz");
    for (int i = 0; i < 3; ++i)
      c.synth.spacing[static_cast<std::size_t>(i)] = static_cast<float>(parse_real(k, parts[static_cast<std::size_t>(i)]));
  };
  table["synth.structures"] = [](auto& c, auto& k, auto& v) { c.synth.structures = parse_int<int>(k, v); };
  table["synth.box_size"] = [](auto& c, auto& k, auto& v) { c.synth.box_size = parse_int<int>(k, v); };
  table["synth.noise_sd"] = [](auto& c, auto& k, auto& v) { c.synth.noise_sd = parse_real(k, v); };
  table["synth.age_mean"] = [](auto& c, auto& k, auto& v) { c.synth.age_mean = parse_real(k, v); };
  table["synth.age_sd"] = [](auto& c, auto& k, auto& v) { c.synth.age_sd = parse_real(k, v); };
  table["synth.age_effect"] = [](auto& c, auto& k, auto& v) { c.synth.age_effect = parse_real(k, v); };
  for (std::size_t g = 0; g < kGroupKeys.size(); ++g)
    table[std::string("synth.count.") + kGroupKeys[g]] = [g](auto& c, auto& k, auto& v) {
      c.synth.counts[g] = parse_int<int>(k, v);
    };
  return table;
}

void set_perturbation(PipelineConfig& c, const std::string& key, const std::string& value) {
  const auto id = parse_int<std::uint32_t>(key, key.substr(std::string("synth.perturb.").size()));
  const auto parts = split(value, ',');
  if (parts.size() != 4) bad(key, value, "expected four offsets (CN,sMCI,pMCI,AD)");
  std::array<double, 4> sev{};
  for (std::size_t g = 0; g < 4; ++g) sev[g] = parse_real(key, parts[g]);
  c.synth.perturbation[id] = sev;
}

}  // namespace

void SynthSpec::validate() const {
  if (structures < 2) throw Error(ErrorCode::InvalidParams, "synth needs at least two structures");
  for (auto d : dims)
    if (d < 8) throw Error(ErrorCode::InvalidParams, "synth dims must be >= 8");
  if (box_size < 0) throw Error(ErrorCode::InvalidParams, "synth.box_size must be >= 0");
  if (!(noise_sd >= 0.0)) throw Error(ErrorCode::InvalidParams, "synth.noise_sd must be >= 0");
  if (!(age_sd >= 0.0) || !(age_mean > 0.0)) throw Error(ErrorCode::InvalidParams, "invalid synth age distribution");
  for (auto n : counts)
    if (n < 0) throw Error(ErrorCode::InvalidParams, "synth counts must be >= 0");
  if (counts[0] < 1 || counts[3] < 1) throw Error(ErrorCode::InvalidParams, "synth needs CN and AD subjects");
  for (const auto& [id, sev] : perturbation) {
    if (id < 1 || id > static_cast<std::uint32_t>(structures))
      throw Error(ErrorCode::InvalidParams, "perturbed structure " + std::to_string(id) + " does not exist");
    if (!(sev[0] <= sev[1] && sev[1] <= sev[2] && sev[2] <= sev[3]))
      throw Error(ErrorCode::InvalidParams, "severities must satisfy CN <= sMCI <= pMCI <= AD for structure " +
                                                std::to_string(id));
  }
}

void PipelineConfig::validate(bool check_paths) const {
  grading.validate();
  graph.validate();
  en.validate();
  forest.validate();
  synth.validate();
  if (rf_runs < 1) throw Error(ErrorCode::InvalidParams, "rf.runs must be >= 1");
  if (cv_folds < 2) throw Error(ErrorCode::InvalidParams, "svm.folds must be >= 2");
  if (!check_paths) return;
  if (manifest.empty()) throw Error(ErrorCode::ConfigError, "paths.manifest is required");
  if (!fs::exists(manifest)) throw Error(ErrorCode::MissingFile, "manifest not found: " + manifest.string());
  if (!templates.empty() && !fs::exists(templates))
    throw Error(ErrorCode::MissingFile, "template manifest not found: " + templates.string());
}

PipelineConfig parse_config_text(const std::string& text, const fs::path& base_dir) {
  PipelineConfig cfg;
  const auto table = setters(base_dir);
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw Error(ErrorCode::ConfigError, "duplicate key " + key);
    if (key.rfind("synth.perturb.", 0) == 0) {
      set_perturbation(cfg, key, value);
      continue;
    }
    const auto it = table.find(key);
    if (it == table.end()) throw Error(ErrorCode::ConfigError, "unknown key " + key);
    it->second(cfg, key, value);
  }
  return cfg;
}

PipelineConfig read_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::MissingFile, "config not found: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), fs::absolute(path).parent_path());
}

std::string config_to_text(const PipelineConfig& c) {
  std::ostringstream o;
  const auto& g = c.grading;
  o << "paths.manifest=" << c.manifest.string() << '\n'
    << "paths.templates=" << c.templates.string() << '\n'
    << "paths.work_dir=" << c.work_dir.string() << '\n'
    << "paths.report=" << c.report_path().string() << '\n'
    << "seed=" << c.seed << '\n'
    << "grading.patch_radius=" << g.patch_radius << '\n'
    << "grading.k=" << g.k << '\n'
    << "grading.search_window=" << g.search_window << '\n'
    << "grading.epsilon=" << format_double(g.epsilon) << '\n'
    << "grading.method=" << to_string(g.method) << '\n'
    << "grading.pm_iterations=" << g.pm_iterations << '\n'
    << "graph.sigma="
    << (c.graph.sigma.kind == graph::SigmaMode::Kind::MedianHeuristic ? std::string("median")
                                                                      : format_double(c.graph.sigma.value))
    << '\n'
    << "graph.min_voxels=" << c.graph.min_voxels << '\n'
    << "en.lambda1=" << format_double(c.en.lambda1) << '\n'
    << "en.lambda2=" << format_double(c.en.lambda2) << '\n'
    << "en.target_nonzeros=" << (c.en.target_nonzeros ? std::to_string(*c.en.target_nonzeros) : "none") << '\n'
    << "en.max_iterations=" << c.en.max_iterations << '\n'
    << "en.tolerance=" << format_double(c.en.tolerance) << '\n'
    << "classifier.kind=" << to_string(c.classifier) << '\n'
    << "svm.folds=" << c.cv_folds << '\n'
    << "rf.trees=" << c.forest.trees << '\n'
    << "rf.mtry=" << c.forest.mtry << '\n'
    << "rf.min_leaf=" << c.forest.min_leaf << '\n'
    << "rf.max_depth=" << c.forest.max_depth << '\n'
    << "rf.runs=" << c.rf_runs << '\n';
  const auto& s = c.synth;
  o << "synth.dims=" << join3(s.dims, 'x') << '\n'
    << "synth.spacing=" << format_double(s.spacing[0]) << ',' << format_double(s.spacing[1]) << ','
    << format_double(s.spacing[2]) << '\n'
    << "synth.structures=" << s.structures << '\n'
    << "synth.box_size=" << s.box_size << '\n'
    << "synth.noise_sd=" << format_double(s.noise_sd) << '\n'
    << "synth.age_mean=" << format_double(s.age_mean) << '\n'
    << "synth.age_sd=" << format_double(s.age_sd) << '\n'
    << "synth.age_effect=" << format_double(s.age_effect) << '\n';
  for (std::size_t i = 0; i < 4; ++i) o << "synth.count." << kGroupKeys[i] << '=' << s.counts[i] << '\n';
  for (const auto& [id, sev] : s.perturbation)
    o << "synth.perturb." << id << '=' << format_double(sev[0]) << ',' << format_double(sev[1]) << ','
      << format_double(sev[2]) << ',' << format_double(sev[3]) << '\n';
  return o.str();
}

std::string to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::Svm: return "svm";
    case ClassifierKind::Rf: return "rf";
    case ClassifierKind::Both: return "both";
  }
  return "?";
}

std::string to_string(grading::SearchMethod m) {
  return m == grading::SearchMethod::Exact ? "exact" : "patchmatch";
}

grading::SearchMethod parse_search_method(const std::string& s) {
  if (s == "exact") return grading::SearchMethod::Exact;
  if (s == "patchmatch") return grading::SearchMethod::PatchMatch;
  throw Error(ErrorCode::ConfigError, "unknown grading method " + s);
}

}  // namespace gbsg::pipeline
