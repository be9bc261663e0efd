#include "gbsg/volio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "gbsg/error.hpp"

namespace fs = std::filesystem;

namespace gbsg {
namespace {

enum class DType : std::uint8_t { F32 = 0, U16 = 1 };

template <typename T>
void put_le(std::vector<char>& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  auto bits = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.insert(out.end(), bits.begin(), bits.end());
}

template <typename T>
T get_le(const char* p) {
  std::array<char, sizeof(T)> bits;
  std::memcpy(bits.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  return std::bit_cast<T>(bits);
}

void check_dims(const Dims& d) {
  if (d[0] == 0 || d[1] == 0 || d[2] == 0)
    throw Error(ErrorCode::InvalidDims, "dims must be positive");
}

std::vector<char> header(const Dims& d, const Spacing& s, DType t) {
  std::vector<char> out(kVolumeMagic, kVolumeMagic + 8);
  for (auto v : d) put_le(out, v);
  for (auto v : s) put_le(out, v);
  out.push_back(static_cast<char>(t));
  return out;
}

void write_bytes(const std::vector<char>& bytes, const fs::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct Header {
  Dims dims;
  Spacing spacing;
  DType dtype;
};

Header parse_header(const std::vector<char>& bytes, const fs::path& path) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kVolumeMagic, 8) != 0)
    throw Error(ErrorCode::MagicMismatch, path.string());
  if (bytes.size() < kVolumeHeaderBytes)
    throw Error(ErrorCode::TruncatedFile, "header incomplete: " + path.string());
  Header h;
  for (int i = 0; i < 3; ++i) h.dims[i] = get_le<std::uint32_t>(bytes.data() + 8 + 4 * i);
  for (int i = 0; i < 3; ++i) h.spacing[i] = get_le<float>(bytes.data() + 20 + 4 * i);
  h.dtype = static_cast<DType>(static_cast<std::uint8_t>(bytes[32]));
  check_dims(h.dims);
  return h;
}

std::size_t voxel_count(const Dims& d) {
  return static_cast<std::size_t>(d[0]) * d[1] * d[2];
}

}  // namespace

Volume3D read_volume(const fs::path& path) {
  const auto bytes = read_bytes(path);
  const Header h = parse_header(bytes, path);
  if (h.dtype != DType::F32) throw Error(ErrorCode::HeaderMismatch, "not a scalar volume: " + path.string());
  const std::size_t n = voxel_count(h.dims);
  if (bytes.size() - kVolumeHeaderBytes < n * sizeof(float))
    throw Error(ErrorCode::TruncatedFile, path.string());
  Volume3D v;
  v.dims = h.dims;
  v.spacing = h.spacing;
  v.data.resize(n);
  const char* p = bytes.data() + kVolumeHeaderBytes;
  for (std::size_t i = 0; i < n; ++i) {
    v.data[i] = get_le<float>(p + i * sizeof(float));
    if (!std::isfinite(v.data[i])) throw Error(ErrorCode::NonFiniteData, path.string());
  }
  return v;
}

void write_volume(const Volume3D& v, const fs::path& path) {
  check_dims(v.dims);
  if (v.data.size() != voxel_count(v.dims)) throw Error(ErrorCode::InvalidDims, "data length does not match dims");
  for (float x : v.data)
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteData, "refusing to write non-finite voxel");
  auto bytes = header(v.dims, v.spacing, DType::F32);
  bytes.reserve(bytes.size() + v.data.size() * sizeof(float));
  for (float x : v.data) put_le(bytes, x);
  write_bytes(bytes, path);
}

LabelMap read_labelmap(const fs::path& path) {
  const auto bytes = read_bytes(path);
  const Header h = parse_header(bytes, path);
  if (h.dtype != DType::U16) throw Error(ErrorCode::HeaderMismatch, "not a label map: " + path.string());
  const std::size_t n = voxel_count(h.dims);
  if (bytes.size() - kVolumeHeaderBytes < n * sizeof(std::uint16_t))
    throw Error(ErrorCode::TruncatedFile, path.string());
  LabelMap lm;
  lm.dims = h.dims;
  lm.spacing = h.spacing;
  lm.labels.resize(n);
  const char* p = bytes.data() + kVolumeHeaderBytes;
  for (std::size_t i = 0; i < n; ++i) lm.labels[i] = get_le<std::uint16_t>(p + i * sizeof(std::uint16_t));
  return lm;
}

void write_labelmap(const LabelMap& lm, const fs::path& path) {
  check_dims(lm.dims);
  if (lm.labels.size() != voxel_count(lm.dims)) throw Error(ErrorCode::InvalidDims, "label length does not match dims");
  auto bytes = header(lm.dims, lm.spacing, DType::U16);
  bytes.reserve(bytes.size() + lm.labels.size() * sizeof(std::uint16_t));
  for (auto l : lm.labels) {
    if (l > 0xFFFF) throw Error(ErrorCode::LabelOverflow, "label " + std::to_string(l) + " exceeds 65535");
    put_le(bytes, static_cast<std::uint16_t>(l));
  }
  write_bytes(bytes, path);
}

void validate_geometry(const Dims& ad, const Spacing& as, const Dims& bd, const Spacing& bs) {
  if (ad != bd) throw Error(ErrorCode::DimsMismatch, "volume and label dims differ");
  for (int i = 0; i < 3; ++i) {
    const double a = as[i], b = bs[i];
    if (std::abs(a - b) > 1e-6 * std::max(std::abs(a), std::abs(b)))
      throw Error(ErrorCode::SpacingMismatch, "spacing differs on axis " + std::to_string(i));
  }
}

void validate_pair(const Volume3D& v, const LabelMap& lm) {
  validate_geometry(v.dims, v.spacing, lm.dims, lm.spacing);
}

std::string to_string(Group g) {
  switch (g) {
    case Group::CN: return "CN";
    case Group::sMCI: return "sMCI";
    case Group::pMCI: return "pMCI";
    case Group::AD: return "AD";
  }
  return "?";
}

Group parse_group(const std::string& s) {
  if (s == "CN") return Group::CN;
  if (s == "sMCI") return Group::sMCI;
  if (s == "pMCI") return Group::pMCI;
  if (s == "AD") return Group::AD;
  throw Error(ErrorCode::UnknownGroup, "'" + s + "'");
}

bool is_training_group(Group g) { return g == Group::CN || g == Group::AD; }

const SubjectRecord* Cohort::find(const std::string& id) const {
  for (const auto& r : records)
    if (r.subject_id == id) return &r;
  return nullptr;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

Cohort read_manifest(const fs::path& path, bool check_files) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::MissingFile, "manifest not found: " + path.string());
  std::string line;
  if (!std::getline(f, line) || strip_cr(line) != kManifestHeader)
    throw Error(ErrorCode::HeaderMismatch, "expected header '" + std::string(kManifestHeader) + "'");

  const fs::path base = path.parent_path();
  Cohort cohort;
  std::set<std::string> seen;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 6)
      throw Error(ErrorCode::HeaderMismatch, "line " + std::to_string(line_no) + ": expected 6 fields");
    SubjectRecord r;
    r.subject_id = cells[0];
    if (!seen.insert(r.subject_id).second) throw Error(ErrorCode::DuplicateId, r.subject_id);
    r.group = parse_group(cells[1]);
    double age = 0.0;
    const auto [ptr, ec] = std::from_chars(cells[2].data(), cells[2].data() + cells[2].size(), age);
    if (ec != std::errc{} || ptr != cells[2].data() + cells[2].size() || !std::isfinite(age) || age <= 0.0)
      throw Error(ErrorCode::UnparsableAge, "'" + cells[2] + "' for " + r.subject_id);
    r.age = age;
    if (cells[3] == "M") r.sex = Sex::M;
    else if (cells[3] == "F") r.sex = Sex::F;
    else throw Error(ErrorCode::HeaderMismatch, "sex must be M or F, got '" + cells[3] + "'");
    r.volume_path = fs::path(cells[4]).is_absolute() ? fs::path(cells[4]) : base / cells[4];
    r.label_path = fs::path(cells[5]).is_absolute() ? fs::path(cells[5]) : base / cells[5];
    if (check_files) {
      if (!fs::exists(r.volume_path)) throw Error(ErrorCode::MissingFile, r.volume_path.string());
      if (!fs::exists(r.label_path)) throw Error(ErrorCode::MissingFile, r.label_path.string());
    }
    cohort.records.push_back(std::move(r));
  }
  return cohort;
}

void write_manifest(const Cohort& cohort, const fs::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  auto rel = [&](const fs::path& p) {
    if (p.is_relative()) return p.generic_string();
    std::error_code ec;
    auto r = fs::relative(p, fs::absolute(base), ec);
    return ec || r.empty() ? p.generic_string() : r.generic_string();
  };
  f << kManifestHeader << '\n';
  for (const auto& r : cohort.records) {
    f << r.subject_id << ',' << to_string(r.group) << ',' << format_double(r.age) << ','
      << (r.sex == Sex::M ? "M" : "F") << ',' << rel(r.volume_path) << ',' << rel(r.label_path) << '\n';
  }
  if (!f) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

std::string format_double(double v) {
  std::array<char, 64> buf;
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw Error(ErrorCode::HeaderMismatch, "not a number: '" + s + "'");
  return v;
}

void write_feature_table(const FeatureTable& t, const fs::path& path) {
  const std::size_t cols = t.col_names.size();
  if (t.values.size() != t.subject_ids.size() * cols)
    throw Error(ErrorCode::DimensionMismatch, "feature table is not rectangular");
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  f << "subject_id";
  for (const auto& c : t.col_names) f << ',' << c;
  f << '\n';
  for (std::size_t i = 0; i < t.subject_ids.size(); ++i) {
    f << t.subject_ids[i];
    for (std::size_t j = 0; j < cols; ++j) f << ',' << format_double(t.values[i * cols + j]);
    f << '\n';
  }
  if (!f) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

FeatureTable read_feature_table(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::MissingFile, path.string());
  std::string line;
  if (!std::getline(f, line)) throw Error(ErrorCode::HeaderMismatch, "empty feature table " + path.string());
  auto header = split_csv(strip_cr(line));
  if (header.empty() || header[0] != "subject_id")
    throw Error(ErrorCode::HeaderMismatch, "feature table must start with subject_id");
  FeatureTable t;
  t.col_names.assign(header.begin() + 1, header.end());
  while (std::getline(f, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw Error(ErrorCode::DimensionMismatch, "ragged feature row for " + cells[0]);
    t.subject_ids.push_back(cells[0]);
    for (std::size_t j = 1; j < cells.size(); ++j) t.values.push_back(parse_double(cells[j]));
  }
  return t;
}

}  // namespace gbsg
