#include <cstring>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "oracle.hpp"
#include "spedge/spectra.hpp"
#include "spedge/trajstore.hpp"
#include "tmpdir.hpp"

using namespace spedge;

namespace {

std::string file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void put_bytes(std::string& s, std::initializer_list<int> bytes) {
  for (int b : bytes) s.push_back(static_cast<char>(b));
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::ok;
}

}  // namespace

TEST_SUITE("trajstore") {
  TEST_CASE("header layout is bit-exact") {
    StreamHeader h;
    h.p = 4;
    h.scalar_width = 4;
    h.has_losses = true;
    h.step_stride = 2;
    std::string want = "SPEDGE01";
    put_bytes(want, {1, 0, 0, 0});                // u32 version
    put_bytes(want, {4, 0, 0, 0, 0, 0, 0, 0});    // u64 p
    put_bytes(want, {4});                         // u8 width
    put_bytes(want, {1});                         // u8 has_losses
    put_bytes(want, {2, 0, 0, 0});                // u32 stride
    CHECK(want.size() == kHeaderBytes);
    CHECK(encode_header(h) == want);
    const StreamHeader back = decode_header(want.data(), want.size());
    CHECK(back.p == 4);
    CHECK(back.scalar_width == 4);
    CHECK(back.has_losses);
    CHECK(back.step_stride == 2);
  }

  TEST_CASE("records are bit-exact at both widths") {
    const std::string path = scratch("bits.bin");
    StreamHeader h;
    h.p = 2;
    h.scalar_width = 8;
    h.has_losses = false;
    {
      StreamWriter w(path, h);
      w.append({258, {1.0, -2.0}, {}, {}});
      w.close();
    }
    std::string want = encode_header(h);
    put_bytes(want, {0x02, 0x01, 0, 0, 0, 0, 0, 0});               // step 258
    put_bytes(want, {0, 0, 0, 0, 0, 0, 0xF0, 0x3F});               // 1.0
    put_bytes(want, {0, 0, 0, 0, 0, 0, 0x00, 0xC0});               // -2.0
    CHECK(file_bytes(path) == want);

    h.scalar_width = 4;
    h.has_losses = true;
    {
      StreamWriter w(path, h);
      w.append({1, {-2.5, 1.0}, 0.5, std::nullopt});
      w.close();
    }
    want = encode_header(h);
    put_bytes(want, {1, 0, 0, 0, 0, 0, 0, 0});
    put_bytes(want, {0, 0, 0, 0x3F});          // train 0.5f
    put_bytes(want, {0, 0, 0xC0, 0x7F});       // val missing: quiet NaN
    put_bytes(want, {0, 0, 0x20, 0xC0});       // -2.5f
    put_bytes(want, {0, 0, 0x80, 0x3F});       // 1.0f
    CHECK(file_bytes(path) == want);
    const UpdateStream s = read_stream(path);
    REQUIRE(s.size() == 1);
    CHECK(s.records[0].train_loss == 0.5);
    CHECK_FALSE(s.records[0].val_loss.has_value());
    CHECK(s.records[0].delta == Vec{-2.5, 1.0});
  }

  TEST_CASE("two records of four floats round-trip") {
    const std::string path = scratch("two.bin");
    UpdateStream s;
    s.header.p = 4;
    s.records.push_back({0, {1, 2, 3, 4}, {}, {}});
    s.records.push_back({1, {5, 6, 7, 8}, {}, {}});
    write_stream(path, s);
    const UpdateStream r = read_stream(path);
    REQUIRE(r.size() == 2);
    CHECK(r.records[1].delta == Vec{5, 6, 7, 8});
    // rewriting what was read reproduces the file byte for byte
    const std::string path2 = scratch("two_again.bin");
    write_stream(path2, r);
    CHECK(file_bytes(path) == file_bytes(path2));
  }

  TEST_CASE("zeroed magic is a format error") {
    const std::string path = scratch("magic.bin");
    UpdateStream s;
    s.header.p = 1;
    s.records.push_back({0, {1.0}, {}, {}});
    write_stream(path, s);
    std::string b = file_bytes(path);
    std::memset(b.data(), 0, 8);
    std::ofstream(path, std::ios::binary).write(b.data(), static_cast<std::streamsize>(b.size()));
    CHECK(code_of([&] { read_stream(path); }) == ErrorCode::format);
  }

  TEST_CASE("a record cut in half is a corruption error naming its step and offset") {
    const std::string path = scratch("trunc.bin");
    UpdateStream s;
    s.header.p = 4;
    s.records.push_back({10, {1, 2, 3, 4}, {}, {}});
    s.records.push_back({11, {5, 6, 7, 8}, {}, {}});
    write_stream(path, s);
    std::string b = file_bytes(path);
    b.resize(kHeaderBytes + s.header.record_bytes() * 3 / 2);
    std::ofstream(path, std::ios::binary | std::ios::trunc)
        .write(b.data(), static_cast<std::streamsize>(b.size()));
    try {
      read_stream(path);
      FAIL("expected corruption");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::corruption);
      const std::string msg = e.what();
      CHECK(msg.find("step 11") != std::string::npos);
      CHECK(msg.find(std::to_string(kHeaderBytes + s.header.record_bytes())) != std::string::npos);
    }
  }

  TEST_CASE("non-monotone steps are an ordering error") {
    const std::string path = scratch("order.bin");
    StreamHeader h;
    h.p = 1;
    std::string b = encode_header(h);
    b += encode_record(h, {5, {1.0}, {}, {}});
    b += encode_record(h, {5, {1.0}, {}, {}});
    std::ofstream(path, std::ios::binary).write(b.data(), static_cast<std::streamsize>(b.size()));
    CHECK(code_of([&] { read_stream(path); }) == ErrorCode::ordering);
    StreamWriter w(scratch("order2.bin"), h);
    w.append({3, {1.0}, {}, {}});
    CHECK(code_of([&] { w.append({2, {1.0}, {}, {}}); }) == ErrorCode::ordering);
  }

  TEST_CASE("non-finite deltas are rejected on write and on read") {
    StreamHeader h;
    h.p = 1;
    CHECK(code_of([&] {
            encode_record(h, {0, {std::numeric_limits<double>::infinity()}, {}, {}});
          }) == ErrorCode::argument);
    const std::string path = scratch("nan.bin");
    std::string b = encode_header(h);
    b += encode_record(h, {0, {1.0}, {}, {}});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::memcpy(b.data() + b.size() - 8, &nan, 8);
    std::ofstream(path, std::ios::binary).write(b.data(), static_cast<std::streamsize>(b.size()));
    CHECK(code_of([&] { read_stream(path); }) == ErrorCode::corruption);
  }

  TEST_CASE("random access reads any record") {
    const std::string path = scratch("seek.bin");
    UpdateStream s;
    s.header.p = 3;
    for (std::uint64_t i = 0; i < 20; ++i)
      s.records.push_back({i * 3, {double(i), double(i) + 0.5, -double(i)}, {}, {}});
    write_stream(path, s);
    StreamReader r(path);
    CHECK(r.count() == 20);
    CHECK(r.record(17).delta == s.records[17].delta);
    CHECK(r.record(2).step == 6);
    CHECK(code_of([&] { r.record(20); }) == ErrorCode::gap);
  }

  TEST_CASE("window_at examples") {
    std::vector<Vec> rows;
    for (int i = 0; i < 10; ++i) rows.push_back({double(i), 1.0});
    const UpdateStream s = oracle::stream_from_rows(rows);
    const TrajectoryWindow w = window_at(s, 0, 10);
    CHECK(w.rows == rows);
    CHECK(code_of([&] { window_at(s, 5, 10); }) == ErrorCode::gap);
    CHECK(code_of([&] { window_at(s, 0, 1); }) == ErrorCode::argument);
  }

  TEST_CASE("stride-2 stream: logical rows 0,1,2 carry physical steps 0,2,4") {
    const std::string path = scratch("stride.bin");
    UpdateStream s;
    s.header.p = 2;
    s.header.step_stride = 2;
    for (std::uint64_t i = 0; i < 5; ++i) s.records.push_back({2 * i, {double(i), 0.0}, {}, {}});
    write_stream(path, s);
    const UpdateStream r = read_stream(path);
    const TrajectoryWindow w = window_at(r, 0, 3);
    CHECK(w.steps == std::vector<std::uint64_t>{0, 2, 4});
    CHECK(w.rows[2] == Vec{2.0, 0.0});
    CHECK(w.stride == 2);
    // sliding honours the stride
    const SlideResult sr = slide(w, r.records[3]);
    CHECK(sr.window.steps.back() == 6);
    CHECK(code_of([&] { slide(w, {7, {0.0, 0.0}, {}, {}}); }) == ErrorCode::ordering);
  }

  TEST_CASE("slide of a W=2 window") {
    const TrajectoryWindow w = make_window({{1, 0}, {0, 1}});
    const SlideResult r = slide(w, {2, {2, 2}, {}, {}});
    CHECK(r.window.rows == std::vector<Vec>{{0, 1}, {2, 2}});
    CHECK(r.exiting == Vec{1, 0});
    CHECK(r.entering == Vec{2, 2});
  }

  TEST_CASE("property: Gram after k slides equals the fresh Gram") {
    for (unsigned seed = 0; seed < 20; ++seed) {
      const std::size_t W = 2 + seed % 7, p = 30 + seed;
      const auto rows = oracle::random_rows(W + 12, p, seed);
      const UpdateStream s = oracle::stream_from_rows(rows);
      TrajectoryWindow w = window_at(s, 1, W);
      for (std::size_t k = 1; k <= 10; ++k) {
        w = slide(w, s.records[1 + W + k - 1]).window;
        const Mat a = gram(w), b = gram(window_at(s, static_cast<std::int64_t>(1 + k), W));
        for (std::size_t i = 0; i < a.a.size(); ++i)
          CHECK(std::fabs(a.a[i] - b.a[i]) <= 1e-12 * std::max(1.0, std::fabs(b.a[i])));
      }
    }
  }

  TEST_CASE("JSON manifest of raw files") {
    const std::string dir = scratch("manifest");
    std::filesystem::create_directories(dir);
    for (int i = 0; i < 3; ++i) {
      const float v[2] = {float(i), -float(i)};
      std::ofstream(dir + "/d" + std::to_string(i) + ".raw", std::ios::binary)
          .write(reinterpret_cast<const char*>(v), sizeof v);
    }
    std::ofstream(dir + "/m.json") << R"({"p": 2, "scalar_width": 4, "files": ["d0.raw", "d1.raw", "d2.raw"]})";
    const UpdateStream s = load_any(dir + "/m.json");
    REQUIRE(s.size() == 3);
    CHECK(s.records[2].delta == Vec{2.0, -2.0});
    std::ofstream(dir + "/bad.json") << R"({"p": 3, "scalar_width": 4, "files": ["d0.raw"]})";
    CHECK(code_of([&] { load_any(dir + "/bad.json"); }) == ErrorCode::corruption);
  }
}
