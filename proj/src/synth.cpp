#include "gbsg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "gbsg/error.hpp"
#include "gbsg/rng.hpp"

namespace gbsg::pipeline {

namespace fs = std::filesystem;

std::vector<Box> structure_layout(const SynthSpec& spec) {
  std::array<std::uint32_t, 3> grid{1, 1, 1};
  for (int axis = 0; static_cast<int>(grid[0] * grid[1] * grid[2]) < spec.structures; axis = (axis + 1) % 3)
    ++grid[static_cast<std::size_t>(axis)];

  std::vector<Box> boxes;
  for (std::uint32_t cz = 0; cz < grid[2]; ++cz)
    for (std::uint32_t cy = 0; cy < grid[1]; ++cy)
      for (std::uint32_t cx = 0; cx < grid[0]; ++cx) {
        if (static_cast<int>(boxes.size()) == spec.structures) break;
        const std::array<std::uint32_t, 3> cell{cx, cy, cz};
        Box b;
        b.id = static_cast<std::uint32_t>(boxes.size() + 1);
        for (std::size_t a = 0; a < 3; ++a) {
          const std::uint32_t lo = cell[a] * spec.dims[a] / grid[a];
          const std::uint32_t hi = (cell[a] + 1) * spec.dims[a] / grid[a];
          const std::uint32_t room = hi - lo > 4 ? hi - lo - 4 : 1;
          const std::uint32_t size = spec.box_size > 0 ? std::min<std::uint32_t>(room, static_cast<std::uint32_t>(spec.box_size)) : room;
          b.lo[a] = lo + (hi - lo - size) / 2;
          b.hi[a] = b.lo[a] + size;
        }
        boxes.push_back(b);
      }
  check_disjoint(boxes);
  return boxes;
}

void check_disjoint(const std::vector<Box>& boxes) {
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      bool overlap = true;
      for (std::size_t a = 0; a < 3; ++a)
        overlap = overlap && boxes[i].lo[a] < boxes[j].hi[a] && boxes[j].lo[a] < boxes[i].hi[a];
      if (overlap)
        throw Error(ErrorCode::OverlappingStructures, "structures " + std::to_string(boxes[i].id) + " and " +
                                                          std::to_string(boxes[j].id) + " overlap");
    }
}

namespace {

struct Texture {
  std::array<double, 3> freq{}, phase{};
};

Texture texture_for(std::uint64_t seed) {
  Rng rng(derive_seed(seed, {seed_tag("synth-texture")}));
  Texture t;
  for (std::size_t a = 0; a < 3; ++a) {
    t.freq[a] = 2.0 * std::numbers::pi / (10.0 + 8.0 * rng.uniform());
    t.phase[a] = 2.0 * std::numbers::pi * rng.uniform();
  }
  return t;
}

double smooth(const Texture& t, std::uint32_t x, std::uint32_t y, std::uint32_t z) {
  return 2.0 * std::sin(t.freq[0] * x + t.phase[0]) * std::cos(t.freq[1] * y + t.phase[1]) +
         1.5 * std::sin(t.freq[2] * z + t.phase[2]);
}

std::string subject_id(Group g, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03d", to_string(g).c_str(), index);
  return buf;
}

}  // namespace

SynthSubject synth_subject(const SynthSpec& spec, Group g, int index) {
  const auto boxes = structure_layout(spec);
  const Texture tex = texture_for(spec.seed);
  Rng rng(derive_seed(spec.seed, {seed_tag("synth-subject"), static_cast<std::uint64_t>(g),
                                  static_cast<std::uint64_t>(index)}));

  SynthSubject s;
  s.record.subject_id = subject_id(g, index);
  s.record.group = g;
  s.record.age = std::clamp(spec.age_mean + spec.age_sd * rng.normal(), 50.0, 95.0);
  s.record.age = std::round(s.record.age * 10.0) / 10.0;
  s.record.sex = rng.below(2) ? Sex::F : Sex::M;
  s.volume = Volume3D(spec.dims, spec.spacing);
  s.labels = LabelMap(spec.dims, spec.spacing);

  for (const auto& b : boxes)
    for (auto z = b.lo[2]; z < b.hi[2]; ++z)
      for (auto y = b.lo[1]; y < b.hi[1]; ++y)
        for (auto x = b.lo[0]; x < b.hi[0]; ++x) s.labels.labels[s.labels.index(x, y, z)] = b.id;

  const double age_shift = spec.age_effect * spec.noise_sd * (s.record.age - spec.age_mean);
  std::vector<double> offset(boxes.size() + 1, 0.0);
  for (const auto& b : boxes) {
    offset[b.id] = 1.0 + 0.75 * static_cast<double>(b.id % 4) + age_shift;
    if (const auto it = spec.perturbation.find(b.id); it != spec.perturbation.end())
      offset[b.id] += it->second[static_cast<std::size_t>(g)] * spec.noise_sd;
  }

  for (std::uint32_t z = 0; z < spec.dims[2]; ++z)
    for (std::uint32_t y = 0; y < spec.dims[1]; ++y)
      for (std::uint32_t x = 0; x < spec.dims[0]; ++x) {
        const auto i = s.volume.index(x, y, z);
        const double v = 10.0 + smooth(tex, x, y, z) + offset[s.labels.labels[i]] + spec.noise_sd * rng.normal();
        s.volume.data[i] = static_cast<float>(v);
      }
  return s;
}

SynthSpec synth_spec(const PipelineConfig& cfg) {
  SynthSpec s = cfg.synth;
  s.seed = derive_seed(cfg.seed, {seed_tag("synth")});
  return s;
}

fs::path synth_cohort(const SynthSpec& spec, const fs::path& out_dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());

  Cohort cohort;
  for (std::size_t gi = 0; gi < 4; ++gi) {
    const auto g = static_cast<Group>(gi);
    for (int i = 0; i < spec.counts[gi]; ++i) {
      auto s = synth_subject(spec, g, i);
      s.record.volume_path = out_dir / (s.record.subject_id + ".vol");
      s.record.label_path = out_dir / (s.record.subject_id + ".lab");
      write_volume(s.volume, s.record.volume_path);
      write_labelmap(s.labels, s.record.label_path);
      cohort.records.push_back(std::move(s.record));
    }
  }
  const auto manifest = out_dir / "manifest.csv";
  write_manifest(cohort, manifest);
  return manifest;
}

}  // namespace gbsg::pipeline
