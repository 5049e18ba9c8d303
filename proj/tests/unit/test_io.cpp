#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sps/manifest.hpp"
#include "sps/random.hpp"
#include "sps/tensor.hpp"
#include "temp_dir.hpp"

using sps::Tensor;
using testing_support::TempDir;

namespace {

std::string bytes_of(const Tensor& t) {
  std::ostringstream os(std::ios::binary);
  sps::write_tensor(t, os);
  return os.str();
}

Tensor from_bytes(const std::string& b) {
  std::istringstream is(b, std::ios::binary);
  return sps::read_tensor(is);
}

std::uint8_t byte_at(const std::string& s, std::size_t i) { return static_cast<std::uint8_t>(s[i]); }

}  // namespace

TEST(TensorFormat, VectorHeaderLayout) {
  const auto b = bytes_of(Tensor::vector({1.0f, 2.0f}));
  ASSERT_EQ(b.size(), 16u + 8u + 8u);
  const std::uint8_t head[] = {0x53, 0x50, 0x53, 0x31, 0x00, 0x01};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(byte_at(b, i), head[i]) << "byte " << i;
  for (std::size_t i = 6; i < 16; ++i) EXPECT_EQ(byte_at(b, i), 0) << "pad byte " << i;
  EXPECT_EQ(byte_at(b, 16), 2);
  for (std::size_t i = 17; i < 24; ++i) EXPECT_EQ(byte_at(b, i), 0);
  float first;
  std::memcpy(&first, b.data() + 24, 4);
  EXPECT_EQ(first, 1.0f);
  // 2.0f = 0x40000000 little-endian
  EXPECT_EQ(byte_at(b, 31), 0x40);
}

TEST(TensorFormat, MatrixHeaderDims) {
  const auto b = bytes_of(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  ASSERT_EQ(b.size(), sps::tensor_header_bytes(2) + 6 * 4);
  EXPECT_EQ(byte_at(b, 5), 2);
  EXPECT_EQ(byte_at(b, 16), 2);
  EXPECT_EQ(byte_at(b, 24), 3);
}

TEST(TensorFormat, RoundTripProperty) {
  sps::CounterRng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const bool matrix = rng.bernoulli(0.5);
    const auto rows = 1 + rng.below(9);
    const auto cols = 1 + rng.below(17);
    std::vector<float> data(matrix ? rows * cols : cols);
    for (auto& x : data) {
      // Mix ordinary values with awkward finite bit patterns.
      switch (rng.below(5)) {
        case 0: x = -0.0f; break;
        case 1: x = std::numeric_limits<float>::denorm_min(); break;
        case 2: x = std::numeric_limits<float>::max(); break;
        default: x = static_cast<float>(rng.normal(0.0, 100.0));
      }
    }
    const Tensor t = matrix ? Tensor::matrix(rows, cols, data) : Tensor::vector(data);
    const auto back = from_bytes(bytes_of(t));
    ASSERT_EQ(back, t) << "trial " << trial;
  }
}

TEST(TensorFormat, RoundTripThroughFile) {
  TempDir dir;
  const auto t = Tensor::matrix(3, 2, {0.5f, -1.5f, 2.25f, 0.0f, 7.0f, -3.0f});
  sps::write_tensor_file(t, dir / "t.spsf");
  EXPECT_EQ(sps::read_tensor_file(dir / "t.spsf"), t);
  EXPECT_EQ(std::filesystem::file_size(dir / "t.spsf"), sps::tensor_header_bytes(2) + 24);
}

TEST(TensorFormat, BadMagicIsFormatError) {
  EXPECT_THROW(from_bytes(std::string(32, '\0')), sps::FormatError);
}

TEST(TensorFormat, TruncatedPayloadIsFormatError) {
  auto b = bytes_of(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  b.resize(b.size() - 3);
  EXPECT_THROW(from_bytes(b), sps::FormatError);
  EXPECT_THROW(from_bytes(b.substr(0, 10)), sps::FormatError);
  EXPECT_THROW(from_bytes(b.substr(0, 20)), sps::FormatError);
}

TEST(TensorFormat, HeaderFieldsValidated) {
  const auto good = bytes_of(Tensor::vector({1.0f}));
  auto dtype = good;
  dtype[4] = 1;
  EXPECT_THROW(from_bytes(dtype), sps::FormatError);
  auto ndim = good;
  ndim[5] = 3;
  EXPECT_THROW(from_bytes(ndim), sps::FormatError);
  auto pad = good;
  pad[9] = 1;
  EXPECT_THROW(from_bytes(pad), sps::FormatError);
  auto zero_dim = good;
  zero_dim[16] = 0;
  EXPECT_THROW(from_bytes(zero_dim), sps::FormatError);
}

TEST(TensorFormat, NanPayloadNamesFirstIndex) {
  auto b = bytes_of(Tensor::vector({1.0f, 2.0f, 3.0f, 4.0f}));
  const auto nan_bits = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
  const auto inf_bits = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::infinity());
  std::memcpy(b.data() + 24 + 2 * 4, &nan_bits, 4);
  std::memcpy(b.data() + 24 + 3 * 4, &inf_bits, 4);
  try {
    from_bytes(b);
    FAIL() << "expected DataError";
  } catch (const sps::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos) << e.what();
  }
}

TEST(TensorFormat, WritingNonFiniteIsRejected) {
  std::ostringstream os;
  EXPECT_THROW(sps::write_tensor(Tensor::vector({1.0f, INFINITY}), os), sps::DataError);
}

TEST(TensorFormat, MissingFileIsIoError) {
  EXPECT_THROW(sps::read_tensor_file("/nonexistent/x.spsf"), sps::IoError);
  EXPECT_THROW(sps::write_tensor_file(Tensor::vector({1.0f}), "/nonexistent/dir/x.spsf"), sps::IoError);
}

TEST(TensorShape, ConstructorValidates) {
  EXPECT_THROW(Tensor({}, {}), sps::ShapeError);
  EXPECT_THROW(Tensor({1, 1, 1}, {1.0f}), sps::ShapeError);
  EXPECT_THROW(Tensor({2, 0}, {}), sps::ShapeError);
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), sps::ShapeError);
  EXPECT_THROW(Tensor::from_rows({{1, 2}, {3}}), sps::ShapeError);
}

TEST(Fingerprint, MatchesKnownDigestAndFileHash) {
  TempDir dir;
  // sha256 of the empty string, as a sanity anchor for the EVP wrapper.
  sps::Sha256 h;
  EXPECT_EQ(h.hex_digest(), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const auto t = Tensor::matrix(2, 2, {1, 2, 3, 4});
  sps::write_tensor_file(t, dir / "w.spsf");
  EXPECT_EQ(sps::fingerprint(t), sps::file_fingerprint(dir / "w.spsf"));
  EXPECT_NE(sps::fingerprint(t), sps::fingerprint(Tensor::matrix(2, 2, {1, 2, 3, 5})));
}

// ---- manifests --------------------------------------------------------------

namespace {

struct ManifestFixture {
  TempDir dir;

  void states(const std::string& name, std::uint64_t rows, std::uint64_t cols) {
    std::vector<float> data(rows * cols, 0.5f);
    sps::write_tensor_file(Tensor::matrix(rows, cols, data), dir / name);
  }

  std::filesystem::path write(const nlohmann::json& j, const std::string& name = "q.json") {
    const auto p = dir / name;
    std::ofstream(p) << j.dump();
    return p;
  }
};

nlohmann::json candidate(const std::string& id, const std::string& path) {
  return {{"candidate_id", id}, {"states_path", path}};
}

}  // namespace

TEST(Manifest, FiveCandidatesKeepOrder) {
  ManifestFixture f;
  nlohmann::json cands = nlohmann::json::array();
  const std::vector<std::string> ids{"e", "b", "d", "a", "c"};
  for (const auto& id : ids) {
    f.states(id + ".spsf", 3, 4);
    cands.push_back(candidate(id, id + ".spsf"));
  }
  const auto m = sps::read_manifest(f.write({{"query_id", "q1"}, {"layer_tag", "L-1"}, {"candidates", cands}}));
  ASSERT_EQ(m.candidates.size(), 5u);
  for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(m.candidates[i].candidate_id, ids[i]);
  const auto set = sps::load_candidate_set(m);
  for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(set.candidates[i].candidate_id, ids[i]);
  EXPECT_EQ(set.dim(), 4u);
}

TEST(Manifest, SingleCandidateWithoutLogprobs) {
  ManifestFixture f;
  f.states("a.spsf", 1, 2);
  const auto m = sps::read_manifest(
      f.write({{"query_id", "q"}, {"layer_tag", "t"}, {"candidates", {candidate("a", "a.spsf")}}}));
  ASSERT_EQ(m.candidates.size(), 1u);
  EXPECT_FALSE(m.candidates[0].token_logprobs.has_value());
  EXPECT_FALSE(m.gold_answers.has_value());
}

TEST(Manifest, DuplicateIdIsSchemaError) {
  ManifestFixture f;
  f.states("a.spsf", 1, 2);
  const auto p = f.write(
      {{"query_id", "q"}, {"layer_tag", "t"}, {"candidates", {candidate("a", "a.spsf"), candidate("a", "a.spsf")}}});
  EXPECT_THROW(sps::read_manifest(p), sps::SchemaError);
}

TEST(Manifest, MissingStatesFileIsSchemaError) {
  ManifestFixture f;
  const auto p = f.write({{"query_id", "q"}, {"layer_tag", "t"}, {"candidates", {candidate("a", "gone.spsf")}}});
  EXPECT_THROW(sps::read_manifest(p), sps::SchemaError);
}

TEST(Manifest, StructuralErrors) {
  ManifestFixture f;
  f.states("a.spsf", 2, 3);
  f.states("b.spsf", 2, 4);
  f.states("v.spsf", 1, 3);
  sps::write_tensor_file(Tensor::vector({1, 2, 3}), f.dir / "vec.spsf");

  const auto mixed_dim = sps::read_manifest(f.write(
      {{"query_id", "q"}, {"layer_tag", "t"}, {"candidates", {candidate("a", "a.spsf"), candidate("b", "b.spsf")}}}));
  EXPECT_THROW(sps::load_candidate_set(mixed_dim), sps::SchemaError);

  const auto rank1 = sps::read_manifest(
      f.write({{"query_id", "q"}, {"layer_tag", "t"}, {"candidates", {candidate("a", "vec.spsf")}}}));
  EXPECT_THROW(sps::load_candidate_set(rank1), sps::SchemaError);

  auto c = candidate("a", "a.spsf");
  c["token_logprobs"] = {-0.1, -0.2, -0.3};
  const auto bad_lp = sps::read_manifest(f.write({{"query_id", "q"}, {"layer_tag", "t"}, {"candidates", {c}}}));
  EXPECT_THROW(sps::load_candidate_set(bad_lp), sps::SchemaError);

  EXPECT_THROW(sps::read_manifest(f.write({{"layer_tag", "t"}, {"candidates", {candidate("a", "a.spsf")}}})),
               sps::SchemaError);
  EXPECT_THROW(sps::read_manifest(f.write({{"query_id", "q"}, {"layer_tag", "t"}, {"candidates", 3}})),
               sps::SchemaError);
  std::ofstream(f.dir / "broken.json") << "{not json";
  EXPECT_THROW(sps::read_manifest(f.dir / "broken.json"), sps::SchemaError);
}

TEST(Manifest, WriteReadRoundTrip) {
  ManifestFixture f;
  f.states("a.spsf", 2, 3);
  sps::CandidateManifest m;
  m.query_id = "q7";
  m.layer_tag = "penultimate";
  m.gold_answers = std::vector<std::string>{"x", "y"};
  m.candidates.push_back({"a", "a.spsf", "some text", std::vector<double>{-0.5, -1.0}, std::nullopt, std::nullopt});
  sps::write_manifest(m, f.dir / "q7.json");
  const auto back = sps::read_manifest(f.dir / "q7.json");
  EXPECT_EQ(back.query_id, "q7");
  EXPECT_EQ(back.layer_tag, "penultimate");
  EXPECT_EQ(*back.gold_answers, (std::vector<std::string>{"x", "y"}));
  EXPECT_EQ(*back.candidates[0].text, "some text");
  EXPECT_EQ(*back.candidates[0].token_logprobs, (std::vector<double>{-0.5, -1.0}));
}

TEST(Manifest, ProbeManifestRules) {
  ManifestFixture f;
  f.states("o.spsf", 2, 3);
  f.states("p.spsf", 2, 3);
  sps::write_tensor_file(Tensor::vector({0.1f, 0.2f, 0.3f}), f.dir / "e.spsf");
  auto probed = candidate("p0", "p.spsf");
  probed["probe_vector_path"] = "e.spsf";
  const auto ok = f.write({{"query_id", "q"}, {"layer_tag", "t"}, {"candidates", {candidate("orig", "o.spsf"), probed}}});
  EXPECT_EQ(sps::read_probe_manifest(ok).candidates.size(), 2u);

  const auto unprobed_variant = f.write(
      {{"query_id", "q"}, {"layer_tag", "t"}, {"candidates", {candidate("orig", "o.spsf"), candidate("p0", "p.spsf")}}});
  EXPECT_THROW(sps::read_probe_manifest(unprobed_variant), sps::SchemaError);

  const auto probed_original =
      f.write({{"query_id", "q"}, {"layer_tag", "t"}, {"candidates", {probed, candidate("x", "o.spsf")}}});
  EXPECT_THROW(sps::read_probe_manifest(probed_original), sps::SchemaError);
}

TEST(Manifest, ListingIsSortedAndJsonOnly) {
  TempDir dir;
  for (const auto* n : {"q2.json", "q10.json", "q1.json", "notes.txt"}) std::ofstream(dir / n) << "{}";
  const auto files = sps::list_manifests(dir.path());
  ASSERT_EQ(files.size(), 3u);
  EXPECT_EQ(files[0].filename(), "q1.json");
  EXPECT_EQ(files[1].filename(), "q10.json");
  EXPECT_EQ(files[2].filename(), "q2.json");
  EXPECT_THROW(sps::list_manifests(dir / "missing"), sps::IoError);
}

// ---- random -----------------------------------------------------------------

TEST(CounterRng, SameSeedSameStream) {
  sps::CounterRng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(CounterRng, NormalMoments) {
  sps::CounterRng rng(9);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  EXPECT_LT(std::abs(mean), 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n - mean * mean, 1.0, 0.02);
}

TEST(CounterRng, UniformAndBelowRanges) {
  sps::CounterRng rng(5);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const double u = rng.uniform_open0();
    ASSERT_GT(u, 0.0);
    ASSERT_LE(u, 1.0);
    ++counts[rng.below(7)];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}

TEST(CounterRng, TrialSeedsDifferAcrossRunSeeds) {
  // Run seeds 1 and 2 must not share trial seeds for small trial indices.
  for (std::uint64_t t = 0; t < 256; ++t) {
    for (std::uint64_t u = 0; u < 256; ++u) ASSERT_NE(sps::trial_seed(1, t), sps::trial_seed(2, u));
  }
}
