#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "fixtures.hpp"
#include "gbsg/volio.hpp"

using namespace gbsg;
using fixture::TempDir;

namespace {

std::vector<unsigned char> file_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void put_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& b) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

void touch(const std::filesystem::path& p) { std::ofstream(p) << "x"; }

}  // namespace

TEST_CASE("volume round trip of a two-voxel file") {
  TempDir dir("volio");
  Volume3D v({2, 1, 1}, {1.0f, 1.0f, 1.0f});
  v.data = {0.0f, 1.0f};
  write_volume(v, dir / "a.vol");
  const auto r = read_volume(dir / "a.vol");
  CHECK(r.dims == Dims{2, 1, 1});
  CHECK(r.data == std::vector<float>{0.0f, 1.0f});
}

TEST_CASE("header layout is little-endian with the dtype byte at 32") {
  TempDir dir("volio");
  Volume3D v({3, 2, 1}, {0.5f, 1.0f, 2.0f}, 1.5f);
  write_volume(v, dir / "a.vol");
  const auto b = file_bytes(dir / "a.vol");
  REQUIRE(b.size() == kVolumeHeaderBytes + 6 * 4);
  CHECK(std::memcmp(b.data(), "GBSGVOL1", 8) == 0);
  CHECK(b[8] == 3);
  CHECK(b[9] == 0);
  CHECK(b[12] == 2);
  CHECK(b[32] == 0);
  // 0.5f = 0x3F000000, least significant byte first
  CHECK(b[20] == 0x00);
  CHECK(b[23] == 0x3F);
}

TEST_CASE("bad magic, truncation, dims and non-finite values are rejected") {
  TempDir dir("volio");
  Volume3D v({4, 4, 4}, {1.0f, 1.0f, 1.0f}, 2.0f);
  write_volume(v, dir / "a.vol");
  auto bytes = file_bytes(dir / "a.vol");

  auto bad = bytes;
  std::memcpy(bad.data(), "XXXXXXXX", 8);
  put_bytes(dir / "magic.vol", bad);
  CHECK_THROWS_CODE(read_volume(dir / "magic.vol"), ErrorCode::MagicMismatch);

  auto shorter = bytes;
  shorter.resize(kVolumeHeaderBytes + 32 * 4);
  put_bytes(dir / "short.vol", shorter);
  CHECK_THROWS_CODE(read_volume(dir / "short.vol"), ErrorCode::TruncatedFile);

  Volume3D nan = v;
  nan.data[5] = std::nanf("");
  CHECK_THROWS_CODE(write_volume(nan, dir / "nan.vol"), ErrorCode::NonFiniteData);

  // A NaN that reaches the disk anyway is caught on read.
  auto poisoned = bytes;
  const float q = std::nanf("");
  std::memcpy(poisoned.data() + kVolumeHeaderBytes, &q, 4);
  put_bytes(dir / "poison.vol", poisoned);
  CHECK_THROWS_CODE(read_volume(dir / "poison.vol"), ErrorCode::NonFiniteData);

  Volume3D zero;
  zero.dims = {0, 1, 1};
  CHECK_THROWS_CODE(write_volume(zero, dir / "zero.vol"), ErrorCode::InvalidDims);
}

TEST_CASE("random volumes round-trip bit-exactly") {
  TempDir dir("volio");
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const Dims d{static_cast<std::uint32_t>(1 + rng.below(9)), static_cast<std::uint32_t>(1 + rng.below(9)),
                 static_cast<std::uint32_t>(1 + rng.below(9))};
    Volume3D v(d, {static_cast<float>(0.5 + rng.uniform()), 1.0f, 2.5f});
    for (auto& x : v.data) x = static_cast<float>((rng.uniform() - 0.5) * 1e6);
    write_volume(v, dir / "r.vol");
    const auto r = read_volume(dir / "r.vol");
    CHECK(r.dims == v.dims);
    CHECK(r.spacing == v.spacing);
    CHECK(std::memcmp(r.data.data(), v.data.data(), v.data.size() * 4) == 0);
  }
}

TEST_CASE("label maps round-trip and reject overflow") {
  TempDir dir("volio");
  LabelMap lm({4, 1, 1}, {1.0f, 1.0f, 1.0f});
  lm.labels = {0, 1, 1, 2};
  write_labelmap(lm, dir / "a.lab");
  CHECK(read_labelmap(dir / "a.lab").labels == lm.labels);
  CHECK(file_bytes(dir / "a.lab")[32] == 1);

  lm.labels[3] = 70000;
  CHECK_THROWS_CODE(write_labelmap(lm, dir / "b.lab"), ErrorCode::LabelOverflow);
  // Label files are not volumes and vice versa.
  CHECK_THROWS_CODE(read_volume(dir / "a.lab"), ErrorCode::HeaderMismatch);
}

TEST_CASE("validate_pair checks dims and relative spacing") {
  const Volume3D v({4, 4, 4}, {1.0f, 1.0f, 1.0f});
  CHECK_NOTHROW(validate_pair(v, LabelMap({4, 4, 4}, {1.0f, 1.0f, 1.0f})));
  CHECK_THROWS_CODE(validate_pair(v, LabelMap({4, 4, 5}, {1.0f, 1.0f, 1.0f})), ErrorCode::DimsMismatch);
  CHECK_THROWS_CODE(validate_pair(v, LabelMap({4, 4, 4}, {1.0f, 1.0f, 1.1f})), ErrorCode::SpacingMismatch);
  CHECK_NOTHROW(validate_pair(v, LabelMap({4, 4, 4}, {1.0f, 1.0f, 1.0000001f})));
  // Symmetric in its dims check.
  CHECK_THROWS_CODE(validate_geometry({4, 4, 5}, {1, 1, 1}, {4, 4, 4}, {1, 1, 1}), ErrorCode::DimsMismatch);
  CHECK_THROWS_CODE(validate_geometry({4, 4, 4}, {1, 1, 1}, {4, 4, 5}, {1, 1, 1}), ErrorCode::DimsMismatch);
}

TEST_CASE("manifest parsing") {
  TempDir dir("volio");
  touch(dir / "a.vol");
  touch(dir / "a.lab");
  touch(dir / "b.vol");
  touch(dir / "b.lab");
  auto write = [&](const std::string& body) {
    std::ofstream(dir / "m.csv") << body;
    return dir / "m.csv";
  };
  const std::string header = std::string(kManifestHeader) + "\n";

  const auto ok = read_manifest(write(header + "s1,CN,70.5,M,a.vol,a.lab\ns2,AD,81,F,b.vol,b.lab\n"));
  REQUIRE(ok.records.size() == 2);
  CHECK(ok.records[0].group == Group::CN);
  CHECK(ok.records[1].group == Group::AD);
  CHECK(ok.records[0].age == doctest::Approx(70.5));
  CHECK(ok.records[1].sex == Sex::F);
  CHECK(ok.records[0].volume_path == dir / "a.vol");
  CHECK(ok.find("s2") != nullptr);
  CHECK(ok.find("nobody") == nullptr);

  CHECK_THROWS_CODE(read_manifest(write(header + "s1,CN,70,M,a.vol,a.lab\ns1,AD,81,F,b.vol,b.lab\n")),
                    ErrorCode::DuplicateId);
  CHECK_THROWS_CODE(read_manifest(write(header + "s1,ad,70,M,a.vol,a.lab\n")), ErrorCode::UnknownGroup);
  CHECK_THROWS_CODE(read_manifest(write(header + "s1,CN,old,M,a.vol,a.lab\n")), ErrorCode::UnparsableAge);
  CHECK_THROWS_CODE(read_manifest(write(header + "s1,CN,-3,M,a.vol,a.lab\n")), ErrorCode::UnparsableAge);
  CHECK_THROWS_CODE(read_manifest(write("id,group,age,sex,volume_path,label_path\n")), ErrorCode::HeaderMismatch);
  CHECK_THROWS_CODE(read_manifest(write(header + "s1,CN,70,M,missing.vol,a.lab\n")), ErrorCode::MissingFile);
  CHECK_NOTHROW(read_manifest(write(header + "s1,CN,70,M,missing.vol,a.lab\n"), false));
  CHECK_THROWS_CODE(read_manifest(dir / "absent.csv"), ErrorCode::MissingFile);
}

TEST_CASE("manifest round trip keeps order and relative paths") {
  TempDir dir("volio");
  Cohort c;
  for (int i = 0; i < 4; ++i) {
    SubjectRecord r;
    r.subject_id = "s" + std::to_string(i);
    r.group = static_cast<Group>(i);
    r.age = 60.25 + i;
    r.sex = i % 2 ? Sex::F : Sex::M;
    r.volume_path = dir / (r.subject_id + ".vol");
    r.label_path = dir / (r.subject_id + ".lab");
    c.records.push_back(r);
  }
  write_manifest(c, dir / "m.csv");
  const auto back = read_manifest(dir / "m.csv", false);
  REQUIRE(back.records.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(back.records[i].subject_id == c.records[i].subject_id);
    CHECK(back.records[i].group == c.records[i].group);
    CHECK(back.records[i].age == c.records[i].age);
    CHECK(back.records[i].volume_path == c.records[i].volume_path);
  }
}

TEST_CASE("feature tables round trip including NaN") {
  TempDir dir("volio");
  FeatureTable t{{"a", "b"}, {"V:1", "E:1-2"}, {0.1, -2.5e-300, std::nan(""), 1.0 / 3.0}};
  write_feature_table(t, dir / "f.csv");
  const auto r = read_feature_table(dir / "f.csv");
  CHECK(r.subject_ids == t.subject_ids);
  CHECK(r.col_names == t.col_names);
  CHECK(r.values[0] == t.values[0]);
  CHECK(r.values[1] == t.values[1]);
  CHECK(std::isnan(r.values[2]));
  CHECK(r.values[3] == t.values[3]);
}
