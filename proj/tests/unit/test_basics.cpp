#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "dufia/digest.hpp"
#include "dufia/errors.hpp"
#include "dufia/io.hpp"
#include "dufia/kv.hpp"
#include "dufia/rng.hpp"
#include "dufia/tensor.hpp"
#include "oracles.hpp"

namespace dufia {
namespace {

using testing::random_image;

TEST(TensorTest, ShapeMismatchedDataThrows) {
  EXPECT_THROW(Tensor3(Shape3{1, 2, 2}, std::vector<float>(3)), ShapeError);
  Tensor3 t(Shape3{2, 3, 4}, 0.5f);
  EXPECT_EQ(t.size(), 24u);
  t.at(1, 2, 3) = 2.0f;
  EXPECT_EQ(t[23], 2.0f);
  EXPECT_FALSE(in_unit_range(t));
  EXPECT_FLOAT_EQ(max_abs(t.values()), 2.0f);
}

TEST(TensorTest, DigestTracksContent) {
  const Image a = random_image({3, 4, 4}, 1);
  Image b = a;
  EXPECT_EQ(tensor_digest(a), tensor_digest(b));
  b[5] = std::nextafter(b[5], 2.0f);
  EXPECT_NE(tensor_digest(a), tensor_digest(b));
  EXPECT_GT(max_abs_diff(a, b), 0.0);
}

TEST(DigestTest, KnownSha256) {
  EXPECT_EQ(sha256_hex(std::string_view("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(std::string_view("")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(RngTest, CounterStreamIsPure) {
  CounterRng a(42), b(42);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  EXPECT_EQ(a.counter(), 100u);
  EXPECT_NE(derive_seed(1, "x", 0), derive_seed(1, "x", 1));
  EXPECT_NE(derive_seed(1, "x", 0), derive_seed(1, "y", 0));
  EXPECT_NE(derive_seed(1, "x", 0), derive_seed(2, "x", 0));
  EXPECT_EQ(derive_seed(9, "stage", 3), derive_seed(9, "stage", 3));
}

TEST(RngTest, UniformAndNormalMoments) {
  CounterRng rng(7);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  double lo = 1, hi = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    su += u;
  }
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_GE(lo, 0.0);
  EXPECT_LT(hi, 1.0);
  // 5 standard errors.
  EXPECT_NEAR(su / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sn / n, 0.0, 5 / std::sqrt(double(n)));
  EXPECT_NEAR(sn2 / n, 1.0, 5 * std::sqrt(2.0 / n));
}

TEST(RngTest, BelowCoversRange) {
  CounterRng rng(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(KeyValuesTest, ParseCommentsAndWhitespace) {
  const auto kv = KeyValues::parse("# header\n  a = 1  \nb=two # trailing\n\n c =  x y \n");
  EXPECT_EQ(kv.entries().size(), 3u);
  EXPECT_EQ(kv.get("a"), "1");
  EXPECT_EQ(kv.get("b"), "two");
  EXPECT_EQ(kv.get("c"), "x y");
  EXPECT_EQ(kv.get_int("a", 0), 1);
  EXPECT_EQ(kv.get_or("missing", "dflt"), "dflt");
  EXPECT_THROW(kv.get("missing"), InvalidArgument);
}

TEST(KeyValuesTest, RejectsMalformedInput) {
  EXPECT_THROW(KeyValues::parse("a = 1\na = 2\n"), InvalidArgument);
  EXPECT_THROW(KeyValues::parse("novalue\n"), InvalidArgument);
  EXPECT_THROW(KeyValues::parse(" = 3\n"), InvalidArgument);
  const auto kv = KeyValues::parse("n = abc\nb = maybe\n");
  EXPECT_THROW(kv.get_int("n", 0), InvalidArgument);
  EXPECT_THROW(kv.get_double("n", 0), InvalidArgument);
  EXPECT_THROW(kv.get_bool("b", false), InvalidArgument);
}

TEST(KeyValuesTest, DoublesRoundTripExactly) {
  KeyValues kv;
  const double values[] = {8.0 / 255.0, 0.1, 1e-300, -123.456, 1.0 / 3.0,
                           std::numeric_limits<double>::max()};
  for (std::size_t i = 0; i < std::size(values); ++i) kv.set("v" + std::to_string(i), values[i]);
  kv.set("u", std::uint64_t{18446744073709551615ULL});
  kv.set("flag", true);
  const auto back = KeyValues::parse(kv.to_text());
  for (std::size_t i = 0; i < std::size(values); ++i) {
    EXPECT_EQ(back.get_double("v" + std::to_string(i), 0), values[i]);
  }
  EXPECT_EQ(back.get_u64("u", 0), 18446744073709551615ULL);
  EXPECT_TRUE(back.get_bool("flag", false));
  EXPECT_EQ(back.to_text(), kv.to_text());
}

TEST(KeyValuesTest, FractionsAndLists) {
  EXPECT_DOUBLE_EQ(parse_double("8/255"), 8.0 / 255.0);
  EXPECT_THROW(parse_double("1/0"), InvalidArgument);
  const auto xs = split_list(" a, b ,c ");
  ASSERT_EQ(xs.size(), 3u);
  EXPECT_EQ(xs[1], "b");
  EXPECT_TRUE(split_list("").empty());
}

TEST(KeyValuesTest, SetReplacesInPlace) {
  KeyValues kv;
  kv.set("a", "1");
  kv.set("b", "2");
  kv.set("a", "3");
  ASSERT_EQ(kv.entries().size(), 2u);
  EXPECT_EQ(kv.entries()[0].second, "3");
  KeyValues other;
  other.set("x", "y");
  kv.merge(other, "p.");
  EXPECT_EQ(kv.get("p.x"), "y");
}

TEST(TensorBlobTest, RoundTripAndStack) {
  std::vector<Tensor3> ts{random_image({3, 5, 4}, 1), random_image({3, 5, 4}, 2)};
  const TensorBlob blob = stack_tensors(ts);
  ASSERT_EQ(blob.dims, (std::vector<std::uint64_t>{2, 3, 5, 4}));
  const auto bytes = encode_tensor_blob(blob);
  ASSERT_EQ(bytes.size(), 4 + 1 + 4 * 8 + 2 * 60 * 4u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "DFI1");
  EXPECT_EQ(bytes[4], 4);
  const auto back = unstack_tensors(decode_tensor_blob(bytes));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], ts[0]);
  EXPECT_EQ(back[1], ts[1]);
}

TEST(TensorBlobTest, CorruptInputThrows) {
  auto bytes = encode_tensor_blob(stack_tensors(std::vector<Tensor3>{random_image({1, 2, 2}, 1)}));
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_tensor_blob(truncated), IoError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_tensor_blob(bad_magic), IoError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_tensor_blob(trailing), IoError);
}

TEST(IoTest, AtomicWriteLeavesNoTemporaries) {
  const auto dir = testing::scratch_dir("atomic");
  write_text_atomic(dir / "a.txt", "hello");
  write_text_atomic(dir / "a.txt", "world");
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    (void)e;
    ++n;
  }
  EXPECT_EQ(n, 1u);
  const auto bytes = read_file(dir / "a.txt");
  EXPECT_EQ(std::string(bytes.begin(), bytes.end()), "world");
  EXPECT_THROW(read_file(dir / "missing"), IoError);
  EXPECT_THROW(write_text_atomic(dir / "no" / "such" / "x.txt", "x"), IoError);
}

TEST(IoTest, Png16Header) {
  const auto dir = testing::scratch_dir("png16");
  const Image img = random_image({3, 6, 5}, 4);
  write_png16_rgb(img, dir / "x.png");
  const auto h = testing::read_png_header(dir / "x.png");
  EXPECT_EQ(h.width, 5u);
  EXPECT_EQ(h.height, 6u);
  EXPECT_EQ(h.bit_depth, 16);
  EXPECT_EQ(h.color_type, 2);
  write_png16_rgb(img, dir / "y.png");
  EXPECT_EQ(read_file(dir / "x.png"), read_file(dir / "y.png"));
}

}  // namespace
}  // namespace dufia
