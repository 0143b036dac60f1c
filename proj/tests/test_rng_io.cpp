// Seeded RNG behavior, binary tensor file round-trips, key=value config
// parsing, and PGM quantization.

#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <vector>

#include "listenlab/config.hpp"
#include "listenlab/pgm.hpp"
#include "listenlab/rng.hpp"
#include "listenlab/tensor_io.hpp"
#include "test_util.hpp"

using namespace listenlab;
using testutil::TempDir;

TEST_CASE("rng determinism and split independence") {
  CounterRng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  // A split stream does not depend on how far the parent has advanced.
  CounterRng parent(42);
  CounterRng child_early = parent.split("clip_0001");
  for (int i = 0; i < 17; ++i) parent.next_u64();
  CounterRng child_late = parent.split("clip_0001");
  for (int i = 0; i < 20; ++i) CHECK(child_early.next_u64() == child_late.next_u64());

  // Distinct stream names give distinct streams.
  CounterRng s1 = CounterRng(7).split("scene");
  CounterRng s2 = CounterRng(7).split("audio");
  CHECK(s1.next_u64() != s2.next_u64());

  // Distinct seeds give distinct streams.
  CHECK(CounterRng(1).next_u64() != CounterRng(2).next_u64());
}

TEST_CASE("rng distributions stay in range") {
  CounterRng rng(3);
  double mn = 1.0, mx = 0.0, sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double u = rng.next_double();
    mn = std::min(mn, u);
    mx = std::max(mx, u);
    sum += u;
  }
  CHECK(mn >= 0.0);
  CHECK(mx < 1.0);
  CHECK(std::abs(sum / n - 0.5) < 0.02);

  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform(-2.0, 3.0);
    CHECK(u >= -2.0);
    CHECK(u < 3.0);
    CHECK(rng.next_below(7) < 7);
    CHECK(rng.poisson(2.0) >= 0);
  }
}

TEST_CASE("tensor file round-trip preserves bytes and shape") {
  TempDir dir("mtns");
  CounterRng rng(5);
  Tensor<float> t({2, 3, 4});
  for (auto& v : t.data()) v = static_cast<float>(rng.normal());
  const std::string path = dir.file("t.mtns");
  save_tensor_f32(path, t);
  Tensor<float> back = load_tensor_f32(path);
  REQUIRE(back.shape() == t.shape());
  for (int64_t i = 0; i < t.numel(); ++i) CHECK(back[i] == t[i]);

  // Header layout: magic MTNS, version 1, dtype 0, ndim 3.
  std::ifstream in(path, std::ios::binary);
  char hdr[8];
  in.read(hdr, 8);
  CHECK(hdr[0] == 'M');
  CHECK(hdr[1] == 'T');
  CHECK(hdr[2] == 'N');
  CHECK(hdr[3] == 'S');
  CHECK(hdr[4] == 1);  // version
  CHECK(hdr[5] == 0);  // dtype f32
  CHECK(hdr[6] == 3);  // ndim

  // Saving twice yields byte-identical files.
  const std::string path2 = dir.file("t2.mtns");
  save_tensor_f32(path2, t);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::vector<char> b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::vector<char> b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
}

TEST_CASE("tensor file error handling") {
  TempDir dir("mtns_err");
  CHECK_THROWS_AS(load_tensor_f32(dir.file("missing.mtns")), IoError);

  // Corrupt magic.
  const std::string bad = dir.file("bad.mtns");
  {
    std::ofstream out(bad, std::ios::binary);
    out << "NOPE0000";
  }
  CHECK_THROWS_AS(load_tensor_f32(bad), IoError);
}

TEST_CASE("kv config parsing, defaults, and unknown-key rejection") {
  KvConfig kv = KvConfig::from_string(
      "# comment\n"
      "\n"
      "alpha = 3\n"
      "beta = 2.5\n"
      "name = hello\n"
      "flag = true\n"
      "big = 18446744073709551615\n");
  CHECK(kv.get_i64("alpha", 0) == 3);
  CHECK(kv.get_f64("beta", 0.0) == doctest::Approx(2.5));
  CHECK(kv.get_str("name", "") == "hello");
  CHECK(kv.get_bool("flag", false));
  CHECK(kv.get_u64("big", 0) == 18446744073709551615ull);
  CHECK(kv.get_i64("absent", 7) == 7);  // fallback
  kv.finish();                          // all keys consumed

  KvConfig unknown = KvConfig::from_string("mystery = 1\n");
  CHECK_THROWS_AS(unknown.finish(), ValidationError);

  CHECK_THROWS_AS(KvConfig::from_string("not a kv line\n"), ValidationError);
  CHECK_THROWS_AS(KvConfig::from_string("a = 1\na = 2\n"), ValidationError);

  KvConfig badnum = KvConfig::from_string("x = 3.5zz\n");
  CHECK_THROWS_AS(badnum.get_f64("x", 0.0), ValidationError);
}

TEST_CASE("pgm quantization rounds half up") {
  TempDir dir("pgm");
  Tensor<float> img({2, 2}, {0.0f, 1.0f, 0.5f, 0.25f});
  const std::string path = dir.file("m.pgm");
  write_pgm(path, img);

  std::ifstream in(path, std::ios::binary);
  std::string magic, w, h, maxv;
  in >> magic >> w >> h >> maxv;
  CHECK(magic == "P5");
  CHECK(w == "2");
  CHECK(h == "2");
  CHECK(maxv == "255");
  in.get();  // single whitespace after header
  unsigned char px[4];
  in.read(reinterpret_cast<char*>(px), 4);
  CHECK(px[0] == 0);
  CHECK(px[1] == 255);
  CHECK(px[2] == 128);  // 0.5*255 = 127.5 -> 128 round-half-up
  CHECK(px[3] == 64);   // 0.25*255 = 63.75 -> 64
}
