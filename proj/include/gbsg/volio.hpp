#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gbsg/volume.hpp"

namespace gbsg {

// On-disk volume layout (little-endian):
//   0..7   magic "GBSGVOL1"
//   8..19  dims, 3 x u32
//   20..31 spacing, 3 x f32
//   32     dtype (0 = f32 scalar, 1 = u16 label)
//   33..   payload, x fastest, then y, then z
inline constexpr char kVolumeMagic[8] = {'G', 'B', 'S', 'G', 'V', 'O', 'L', '1'};
inline constexpr std::size_t kVolumeHeaderBytes = 33;

Volume3D read_volume(const std::filesystem::path& path);
void write_volume(const Volume3D& v, const std::filesystem::path& path);

LabelMap read_labelmap(const std::filesystem::path& path);
void write_labelmap(const LabelMap& lm, const std::filesystem::path& path);

/// Throws DimsMismatch / SpacingMismatch (relative tolerance 1e-6).
void validate_pair(const Volume3D& v, const LabelMap& lm);
void validate_geometry(const Dims& a_dims, const Spacing& a_spacing, const Dims& b_dims, const Spacing& b_spacing);

enum class Group { CN, sMCI, pMCI, AD };
enum class Sex { M, F };

std::string to_string(Group g);
Group parse_group(const std::string& s);
bool is_training_group(Group g);

struct SubjectRecord {
  std::string subject_id;
  Group group = Group::CN;
  double age = 0.0;
  Sex sex = Sex::M;
  std::filesystem::path volume_path;
  std::filesystem::path label_path;
};

struct Cohort {
  std::vector<SubjectRecord> records;

  const SubjectRecord* find(const std::string& id) const;
};

inline constexpr const char* kManifestHeader = "subject_id,group,age,sex,volume_path,label_path";

/// Relative paths are resolved against the manifest's directory. With
/// check_files, every referenced file must exist (MissingFile otherwise).
Cohort read_manifest(const std::filesystem::path& path, bool check_files = true);
/// Paths are written relative to the manifest's directory where possible.
void write_manifest(const Cohort& cohort, const std::filesystem::path& path);

/// Subject-by-feature table as persisted on disk: header
/// `subject_id,<col_names...>`, one row per subject.
struct FeatureTable {
  std::vector<std::string> subject_ids;
  std::vector<std::string> col_names;
  std::vector<double> values;  // row-major, subject_ids.size() x col_names.size()
};

void write_feature_table(const FeatureTable& t, const std::filesystem::path& path);
FeatureTable read_feature_table(const std::filesystem::path& path);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace gbsg
