#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "checks.hpp"
#include "support.hpp"
#include "tofner/rng.hpp"
#include "tofner/util.hpp"

using namespace tof;
using testsup::contains;
using testsup::expect_error;

TEST_CASE("error kinds have stable names") {
  CHECK(std::string(error_kind_name(ErrorKind::kUsage)) == "usage");
  CHECK(std::string(error_kind_name(ErrorKind::kValidation)) == "validation");
  CHECK(std::string(error_kind_name(ErrorKind::kParse)) == "parse");
  CHECK(std::string(error_kind_name(ErrorKind::kContract)) == "contract");
  CHECK(std::string(error_kind_name(ErrorKind::kTraining)) == "training");
  CHECK(std::string(error_kind_name(ErrorKind::kIo)) == "io");
}

TEST_CASE("fnv1a64 matches the published test vectors") {
  CHECK(fnv1a64(std::string()) == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64(std::string("a")) == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64(std::string("foobar")) == 0x85944171f73967e8ULL);
  std::string with_nul("a\0b", 3);
  CHECK(fnv1a64(with_nul) == fnv1a64(with_nul.data(), 3));
  CHECK(fnv1a64(with_nul) != fnv1a64(std::string("ab")));
}

TEST_CASE("to_hex zero-pads to sixteen digits") {
  CHECK(to_hex(0) == "0000000000000000");
  CHECK(to_hex(255) == "00000000000000ff");
  CHECK(to_hex(0xcbf29ce484222325ULL) == "cbf29ce484222325");
}

TEST_CASE("derive_seed builds independent stable streams") {
  CHECK(derive_seed(2019, "masking") == derive_seed(2019, "masking"));
  CHECK(derive_seed(2019, "masking") != derive_seed(2019, "mlm_mix"));
  CHECK(derive_seed(2019, "masking") != derive_seed(2020, "masking"));
  CHECK(derive_seed(7, std::string("x")) == derive_seed(7, fnv1a64("x")));
  CHECK(mix64(0) == 0);  // splitmix64 finalizer fixed point
  CHECK(mix64(1) != 1);
}

TEST_CASE("rng draws stay in range and reproduce by seed") {
  Rng a(99), b(99), c(100);
  bool all_same = true;
  bool any_diff = false;
  for (int i = 0; i < 200; ++i) {
    double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    if (u != b.uniform()) all_same = false;
    if (u != c.uniform()) any_diff = true;
  }
  CHECK(all_same);
  CHECK(any_diff);

  Rng d(5);
  for (int i = 0; i < 200; ++i) CHECK(d.uniform_index(7) < 7);
  CHECK(d.uniform_index(1) == 0);
  expect_error([&] { d.uniform_index(0); }, ErrorKind::kContract);
}

TEST_CASE("shuffle and sample_indices are deterministic permutation tools") {
  std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> v2 = v1;
  Rng r1(17), r2(17);
  r1.shuffle(v1);
  r2.shuffle(v2);
  CHECK(v1 == v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});

  std::vector<int> single{42};
  r1.shuffle(single);
  CHECK(single == std::vector<int>{42});

  Rng s(23);
  std::vector<std::size_t> picks = s.sample_indices(100, 10);
  CHECK(picks.size() == 10);
  std::set<std::size_t> distinct(picks.begin(), picks.end());
  CHECK(distinct.size() == 10);
  for (std::size_t p : picks) CHECK(p < 100);

  std::vector<std::size_t> all = s.sample_indices(6, 6);
  std::set<std::size_t> cover(all.begin(), all.end());
  CHECK(cover.size() == 6);

  expect_error([&] { s.sample_indices(3, 4); }, ErrorKind::kContract);
}

TEST_CASE("normal draws have plausible first moments") {
  Rng rng(2718);
  const int n = 20000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal(2.0, 0.5);
    sum += x;
    sum_sq += x * x;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean - 2.0) < 0.02);
  CHECK(std::abs(var - 0.25) < 0.02);
}

TEST_CASE("file helpers round-trip binary content") {
  testsup::TempDir tmp("util");
  std::string payload("line one\n\0binary\xff tail", 22);
  std::string path = tmp.file("nested/dir/data.bin");
  write_file_atomic(path, payload);
  CHECK(read_file(path) == payload);
  CHECK(file_hash(path) == fnv1a64(payload));
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));

  write_file_atomic(path, "replaced");
  CHECK(read_file(path) == "replaced");

  std::string msg =
      expect_error([&] { read_file(tmp.file("missing.txt")); }, ErrorKind::kIo);
  CHECK(contains(msg, "cannot open file"));
  expect_error([&] { file_hash(tmp.file("missing.txt")); }, ErrorKind::kIo);
}
