#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "gbsg/config.hpp"
#include "gbsg/volio.hpp"

namespace gbsg::pipeline {

struct Box {
  std::uint32_t id = 0;
  std::array<std::uint32_t, 3> lo{}, hi{};  // half-open
};

/// Fixed template-space layout shared by every subject.
std::vector<Box> structure_layout(const SynthSpec& spec);
void check_disjoint(const std::vector<Box>& boxes);

struct SynthSubject {
  SubjectRecord record;
  Volume3D volume;
  LabelMap labels;
};

/// Subject `index` of group `g`; does not touch the disk.
SynthSubject synth_subject(const SynthSpec& spec, Group g, int index);

/// cfg.synth with its seed derived from the master seed.
SynthSpec synth_spec(const PipelineConfig& cfg);

/// Writes volumes, label maps and `manifest.csv` under out_dir; returns the manifest path.
std::filesystem::path synth_cohort(const SynthSpec& spec, const std::filesystem::path& out_dir);

}  // namespace gbsg::pipeline
