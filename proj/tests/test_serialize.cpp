#include <gtest/gtest.h>

#include <cmath>

#include "septq/error.hpp"
#include "septq/matrix_io.hpp"
#include "septq/oracle_suites.hpp"
#include "septq/serialize.hpp"
#include "test_util.hpp"

using namespace septq;

namespace {

Matrix float_rounded(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.values()) v = static_cast<float>(v);
  return out;
}

QuantResult sample_result(std::uint64_t seed, Granularity granularity = Granularity::per_matrix) {
  const auto c = oracles::make_layer_case(seed, 12, 20, 48);
  EngineConfig cfg;
  cfg.bits = 3;
  cfg.strategy.p = 5.0;
  cfg.granularity = granularity;
  return run_septq(c.weights, c.inputs, cfg);
}

}  // namespace

TEST(Codes, PackingIsMsbFirst) {
  CodeMatrix codes(1, 3, 2);
  codes(0, 0) = 3;
  codes(0, 1) = 0;
  codes(0, 2) = 2;
  const std::string bytes = encode_codes(codes);
  ASSERT_EQ(bytes.size(), 8u + 4u + 4u + 1u + 1u);
  EXPECT_EQ(bytes.substr(0, 8), "SEPTQQNT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 2u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[17]), 0b11001000u);
  EXPECT_EQ(decode_codes(bytes), codes);
}

TEST(Codes, RoundTripAllWidths) {
  for (int bits = 2; bits <= 8; ++bits) {
    CodeMatrix codes(5, 7, bits);
    for (std::size_t i = 0; i < 35; ++i)
      codes.codes()[i] = static_cast<std::uint8_t>((i * 37 + 11) % (1u << bits));
    EXPECT_EQ(decode_codes(encode_codes(codes)), codes);
  }
}

TEST(Codes, CorruptedHeaders) {
  CodeMatrix codes(4, 4, 2);
  const std::string good = encode_codes(codes);
  std::string bad_magic = good;
  bad_magic[3] = 'x';
  EXPECT_THROW(decode_codes(bad_magic), BadMagic);
  EXPECT_THROW(decode_codes(good.substr(0, 10)), TruncatedPayload);
  EXPECT_THROW(decode_codes(good.substr(0, good.size() - 1)), TruncatedPayload);
  std::string bad_bits = good;
  bad_bits[16] = 9;
  EXPECT_THROW(decode_codes(bad_bits), FormatError);
  EXPECT_THROW(decode_codes(good + "z"), FormatError);
}

TEST(Grid, JsonRoundTrip) {
  const QuantGrid pm = QuantGrid::per_matrix(3, 0.123456789, 4);
  EXPECT_EQ(grid_from_json(grid_to_json(pm)), pm);
  const QuantGrid pr = QuantGrid::per_row(2, {0.1, 0.2, 0.3}, {0, 1, 3});
  EXPECT_EQ(grid_from_json(grid_to_json(pr)), pr);
  EXPECT_THROW(grid_from_json(nlohmann::json{{"bits", 2}}), FormatError);
}

TEST(Reserved, CsvRoundTripAtFloatPrecision) {
  const std::vector<ReservedWeight> in{{0, 1, 0.1}, {3, 2, -12.75}};
  const std::vector<ReservedWeight> out = reserved_from_csv(reserved_to_csv(in));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].value, static_cast<double>(0.1f));
  EXPECT_EQ(out[1], in[1]);
  EXPECT_EQ(reserved_to_csv({}), "row,col,value\n");
  EXPECT_THROW(reserved_from_csv("row,col,value\n1,2\n"), FormatError);
  EXPECT_THROW(reserved_from_csv("1,2,3\n"), FormatError);
}

TEST(StoredResult, RoundTripAt32Bit) {
  for (auto granularity : {Granularity::per_matrix, Granularity::per_row}) {
    const QuantResult r = sample_result(81, granularity);
    const auto dir = test::scratch_dir("stored_roundtrip");
    save_result(r, dir);
    const StoredResult stored = load_result(dir);
    EXPECT_EQ(stored.codes, r.codes);
    EXPECT_EQ(stored.grid, r.grid);
    EXPECT_EQ(float_rounded(stored.reconstruct()), float_rounded(r.weights));
  }
}

TEST(StoredResult, MissingFile) {
  const auto dir = test::scratch_dir("stored_missing");
  EXPECT_THROW(load_result(dir), IoError);
}

TEST(StoredResult, BitWidthDisagreement) {
  const QuantResult r = sample_result(82);
  const auto dir = test::scratch_dir("stored_bits");
  save_result(r, dir);
  nlohmann::json grid = read_json(dir / kGridFile);
  grid["bits"] = 2;
  grid["zero_point"] = 0;
  write_json(dir / kGridFile, grid);
  EXPECT_THROW(load_result(dir), FormatError);
}

TEST(StoredResult, ReservedOutsideCodes) {
  const QuantResult r = sample_result(83);
  const auto dir = test::scratch_dir("stored_outside");
  save_result(r, dir);
  write_file(dir / kReservedFile, "row,col,value\n99,0,1.5\n");
  EXPECT_THROW(load_result(dir).reconstruct(), FormatError);
}
