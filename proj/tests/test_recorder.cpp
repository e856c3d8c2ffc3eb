#include <doctest.h>

#include <cstring>
#include <random>

#include "demoforge/error.hpp"
#include "demoforge/pipeline.hpp"
#include "test_util.hpp"

using namespace demoforge;
namespace fs = std::filesystem;

namespace {

CameraConfig small_camera() {
  CameraConfig cam;
  cam.width = 32;
  cam.height = 24;
  return cam;
}

StepRecord random_record(std::mt19937_64& rng, std::uint32_t ep, std::uint32_t step) {
  std::uniform_int_distribution<int> dim(1, 9), byte(0, 255);
  std::uniform_real_distribution<float> real(-3.0f, 3.0f);
  StepRecord r;
  r.episode_id = ep;
  r.step_id = step;
  const auto h = static_cast<std::uint32_t>(dim(rng)), w = static_cast<std::uint32_t>(dim(rng));
  r.rgb = RgbImage{h, w, std::vector<std::uint8_t>(std::size_t{h} * w * 3)};
  for (auto& p : r.rgb.pixels) p = static_cast<std::uint8_t>(byte(rng));
  r.depth = DepthImage{h, w, std::vector<float>(std::size_t{h} * w)};
  for (auto& d : r.depth.values) d = real(rng);
  switch (rng() % 3) {
    case 0: r.action = std::monostate{}; break;
    case 1: r.action = ActionPrimitive{{real(rng), real(rng), real(rng)}, {real(rng), real(rng), real(rng)}}; break;
    default:
      r.action = GripperCommand{real(rng), real(rng), real(rng), real(rng), real(rng), real(rng),
                                static_cast<Grip>(rng() % 3)};
  }
  r.reward = real(rng);
  r.info = {{"seed", rng()}, {"note", "step \"" + std::to_string(step) + "\"\n"}, {"x", real(rng) * 1e-7}};
  return r;
}

}  // namespace

TEST_CASE("array file: f32 reward 1/6 is the IEEE-754 single 0x3E2AAAAB") {
  // 1/6 = 1.0101...b x 2^-3: biased exponent 124, fraction round(2^23 / 3).
  const std::uint32_t fraction = ((1u << 23) + 1) / 3;
  const std::uint32_t bits = (124u << 23) | fraction;
  CHECK(bits == 0x3E2AAAABu);
  const auto bytes = encode_array(make_scalar_f32(static_cast<float>(1.0 / 6.0)));
  REQUIRE(bytes.size() == 10);
  CHECK(std::memcmp(bytes.data(), "DFS1", 4) == 0);
  CHECK(bytes[4] == 1);  // f32
  CHECK(bytes[5] == 0);  // scalar
  for (int i = 0; i < 4; ++i) CHECK(bytes[6 + i] == static_cast<std::uint8_t>(bits >> (8 * i)));
}

TEST_CASE("array file: header layout and shape are little-endian") {
  const Array a{DType::u8, {2, 3}, {1, 2, 3, 4, 5, 6}};
  const auto bytes = encode_array(a);
  const std::vector<std::uint8_t> expected{'D', 'F', 'S', '1', 0, 2, 2, 0, 0, 0, 3, 0, 0, 0, 1, 2, 3, 4, 5, 6};
  CHECK(bytes == expected);
  CHECK(decode_array(bytes) == a);
}

TEST_CASE("array file: corrupt inputs are rejected") {
  const auto good = encode_array(make_utf8("hello"));
  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_WITH_AS(decode_array(bad_magic), doctest::Contains("CORRUPT_FILE"), Error);
  auto bad_dtype = good;
  bad_dtype[4] = 9;
  CHECK_THROWS_WITH_AS(decode_array(bad_dtype), doctest::Contains("CORRUPT_FILE"), Error);
  for (std::size_t n = 0; n < good.size(); ++n) {
    std::vector<std::uint8_t> cut(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(n));
    CHECK_THROWS_AS(decode_array(cut), Error);
  }
  auto longer = good;
  longer.push_back(0);
  CHECK_THROWS_AS(decode_array(longer), Error);
  // Shapes whose product overflows must not pass the length check.
  std::vector<std::uint8_t> hdr{'D', 'F', 'S', '1', 2, 3};
  for (int i = 0; i < 12; ++i) hdr.push_back(0xFF);
  CHECK_THROWS_AS(decode_array(hdr), Error);
  // Zero-sized dimensions are legal.
  Array empty{DType::f32, {4, 0}, {}};
  CHECK(decode_array(encode_array(empty)) == empty);
}

TEST_CASE("array file: random round trip") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    Array a;
    a.dtype = static_cast<DType>(rng() % 5);
    const std::size_t ndim = rng() % 4;
    for (std::size_t d = 0; d < ndim; ++d) a.shape.push_back(static_cast<std::uint32_t>(rng() % 5));
    a.data.resize(a.element_count() * element_size(a.dtype));
    for (auto& b : a.data) b = static_cast<std::uint8_t>(rng());
    CHECK(decode_array(encode_array(a)) == a);
  }
}

TEST_CASE("step filenames: zero padding and totality") {
  CHECK(step_filename(0, 0) == "000000-0000.dfs");
  CHECK(step_filename(12, 345) == "000012-0345.dfs");
  CHECK(step_filename(1234567, 12345) == "1234567-12345.dfs");
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    const auto e = static_cast<std::uint32_t>(rng() >> (rng() % 64 / 2 + 32));
    const auto s = static_cast<std::uint32_t>(rng() >> (rng() % 64 / 2 + 32));
    const auto parsed = parse_step_filename(step_filename(e, s));
    REQUIRE(parsed);
    CHECK(parsed->first == e);
    CHECK(parsed->second == s);
  }
  CHECK_FALSE(parse_step_filename("00000-0000.dfs"));
  CHECK_FALSE(parse_step_filename("000000-000.dfs"));
  CHECK_FALSE(parse_step_filename("000000-0000.dfs.tmp"));
  CHECK_FALSE(parse_step_filename("0000001-0000.dfs"));
}

TEST_CASE("save_step: names, duplicates and missing roots") {
  dftest::TempDir dir;
  std::mt19937_64 rng(1);
  const StepRecord r = random_record(rng, 0, 0);
  save_step(dir.path(), r);
  for (Modality m : kAllModalities) CHECK(fs::exists(dir.path() / to_string(m) / "000000-0000.dfs"));
  CHECK_THROWS_WITH_AS(save_step(dir.path(), r), doctest::Contains("DUPLICATE_STEP"), Error);
  // A duplicate in one modality blocks the whole step.
  StepRecord next = random_record(rng, 0, 1);
  write_array_file(dir.path() / "info" / "000000-0001.dfs", make_utf8("{}"));
  CHECK_THROWS_WITH_AS(save_step(dir.path(), next), doctest::Contains("DUPLICATE_STEP"), Error);
  CHECK_FALSE(fs::exists(dir.path() / "color" / "000000-0001.dfs"));
  CHECK_THROWS_WITH_AS(save_step(dir.path() / "nope", r), doctest::Contains("IO_FAILURE"), Error);
}

TEST_CASE("load_episode: byte-exact inverse of save_step") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    dftest::TempDir dir;
    std::vector<StepRecord> written;
    const std::uint32_t ep = static_cast<std::uint32_t>(rng() % 1000);
    const std::size_t T = 1 + rng() % 9;
    for (std::uint32_t t = 0; t < T; ++t) written.push_back(random_record(rng, ep, t));
    // Write out of order; loading sorts by step id.
    for (std::size_t i = T; i-- > 0;) save_step(dir.path(), written[i]);
    save_step(dir.path(), random_record(rng, ep + 1, 0));
    const auto loaded = load_episode(dir.path(), ep);
    CHECK(loaded == written);
    CHECK(verify_sync(dir.path(), ep).ok);
    CHECK(list_episodes(dir.path()) == std::vector<std::uint32_t>{ep, ep + 1});
  }
}

TEST_CASE("load_episode: empty, missing and corrupt") {
  dftest::TempDir dir;
  CHECK(load_episode(dir.path(), 0).empty());
  std::mt19937_64 rng(2);
  for (std::uint32_t t = 0; t < 4; ++t) save_step(dir.path(), random_record(rng, 3, t));
  fs::remove(dir.path() / "depth" / "000003-0002.dfs");
  try {
    load_episode(dir.path(), 3);
    FAIL("expected MISSING_MODALITY");
  } catch (const Error& e) {
    CHECK(e.code() == "MISSING_MODALITY");
    CHECK(std::string(e.what()).find("depth") != std::string::npos);
    CHECK(std::string(e.what()).find("step 2") != std::string::npos);
  }
  write_array_file(dir.path() / "depth" / "000003-0002.dfs", make_utf8("not depth"));
  CHECK_THROWS_WITH_AS(load_episode(dir.path(), 3), doctest::Contains("CORRUPT_FILE"), Error);
  write_array_file(dir.path() / "depth" / "000003-0002.dfs", make_f32(std::vector<float>{1, 2}, {1, 2}), false);
  auto bytes = read_file_bytes(dir.path() / "reward" / "000003-0001.dfs");
  bytes[1] = 'X';
  write_file_atomic(dir.path() / "reward" / "000003-0001.dfs", bytes);
  CHECK_THROWS_WITH_AS(load_episode(dir.path(), 3), doctest::Contains("CORRUPT_FILE"), Error);
}

TEST_CASE("verify_sync: orphan files are reported, not thrown") {
  dftest::TempDir dir;
  std::mt19937_64 rng(4);
  for (std::uint32_t t = 0; t < 5; ++t) save_step(dir.path(), random_record(rng, 0, t));
  SyncReport ok = verify_sync(dir.path(), 0);
  CHECK(ok.ok);
  for (Modality m : kAllModalities) CHECK(ok.count(m) == 5);
  write_array_file(dir.path() / "action" / "000000-0005.dfs", make_utf8("null"));
  const SyncReport bad = verify_sync(dir.path(), 0);
  CHECK_FALSE(bad.ok);
  CHECK(bad.count(Modality::action) == bad.count(Modality::color) + 1);
}

TEST_CASE("oracle episode: pyramid yields seven synchronized records with 1/6 rewards") {
  dftest::TempDir dir;
  const auto summary = record_oracle_episode(dir.path(), TaskKind::stack_block_pyramid,
                                             builtin_task_spec(TaskKind::stack_block_pyramid), 0, 42, small_camera());
  CHECK(summary.success);
  CHECK(summary.primitives == 6);
  CHECK(summary.records == 7);
  const SyncReport sync = verify_sync(dir.path(), 0);
  CHECK(sync.ok);
  for (Modality m : kAllModalities) CHECK(sync.count(m) == 7);
  const auto records = load_episode(dir.path(), 0);
  REQUIRE(records.size() == 7);
  CHECK(records[0].reward == 0.0f);
  for (std::size_t t = 1; t < 7; ++t) CHECK(records[t].reward == static_cast<float>(1.0 / 6.0));
  CHECK(std::holds_alternative<std::monostate>(records.back().action));
  for (std::size_t t = 0; t + 1 < 7; ++t) CHECK(std::holds_alternative<ActionPrimitive>(records[t].action));
  CHECK(records[3].info["step"] == 3);
  CHECK(records[3].info["objects"].size() == 6);
}

TEST_CASE("properties: recorded oracle episodes") {
  for (const TaskKind k : kAllTasks) {
    dftest::TempDir dir;
    const CameraConfig cam = small_camera();
    for (std::uint32_t ep = 0; ep < 5; ++ep) {
      const auto s = record_oracle_episode(dir.path(), k, builtin_task_spec(k), ep, derive_episode_seed(9, 0, ep), cam);
      REQUIRE(s.success);
      const auto records = load_episode(dir.path(), ep);
      CHECK(records.size() == s.records);
      CHECK(records.front().reward == 0.0f);
      double sum = 0;
      for (const auto& r : records) {
        sum += r.reward;
        for (float d : r.depth.values) {
          CHECK(d >= 0.0f);
          CHECK(d <= static_cast<float>(cam.camera_height));
        }
      }
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("action json round trip") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    const StepRecord r = random_record(rng, 0, 0);
    CHECK(action_from_json(nlohmann::json::parse(action_to_json(r.action).dump())) == r.action);
  }
  CHECK_THROWS_WITH_AS(action_from_json(nlohmann::json{{"type", "teleport"}}), doctest::Contains("BAD_ACTION"), Error);
  CHECK_THROWS_AS(action_from_json(nlohmann::json{{"type", "primitive"}, {"pick", {1, 2}}}), Error);
}
