#include <doctest.h>

#include <random>
#include <set>

#include "demoforge/error.hpp"
#include "demoforge/pipeline.hpp"
#include "test_util.hpp"

using namespace demoforge;
namespace fs = std::filesystem;

namespace {

CameraConfig small_camera() {
  CameraConfig cam;
  cam.width = 24;
  cam.height = 16;
  return cam;
}

GatherConfig fixed_config() {
  GatherConfig c;
  c.created_at = "2024-01-01T00:00:00Z";
  return c;
}

fs::path gen_pyramid(const fs::path& out, std::size_t episodes, std::uint64_t seed = 42) {
  GenConfig g;
  g.tasks = {TaskKind::stack_block_pyramid};
  g.episodes = episodes;
  g.seed = seed;
  g.camera = small_camera();
  g.out = out;
  return generate(g).front().root;
}

ContainerContents random_contents(std::mt19937_64& rng) {
  ContainerContents c;
  const std::size_t n = rng() % 8;
  for (std::size_t i = 0; i < n; ++i) {
    Array a;
    a.dtype = static_cast<DType>(rng() % 5);
    const std::size_t ndim = rng() % 4;
    for (std::size_t d = 0; d < ndim; ++d) a.shape.push_back(static_cast<std::uint32_t>(rng() % 6));
    a.data.resize(a.element_count() * element_size(a.dtype));
    for (auto& b : a.data) b = static_cast<std::uint8_t>(rng());
    c.emplace_back("group_" + std::to_string(rng() % 3) + "/entry_" + std::to_string(i), std::move(a));
  }
  return c;
}

}  // namespace

TEST_CASE("validate_episode: rules and reasons") {
  dftest::TempDir dir;
  const fs::path root = gen_pyramid(dir.path(), 1);
  const auto good = load_episode(root, 0);
  CHECK(validate_episode(good).accepted());
  CHECK(validate_episode(root, 0).accepted());

  auto truncated = good;
  truncated.resize(5);
  CHECK(validate_episode(truncated).reason == RejectReason::incomplete);

  auto single = good;
  single.resize(1);
  CHECK(validate_episode(single).reason == RejectReason::too_short);
  CHECK(validate_episode(std::vector<StepRecord>{}).reason == RejectReason::too_short);

  auto no_info = good;
  no_info[3].info = nlohmann::json::object();
  CHECK(validate_episode(no_info).reason == RejectReason::missing_info);

  auto reshaped = good;
  reshaped[2].depth.width -= 1;
  CHECK(validate_episode(reshaped).reason == RejectReason::modality_mismatch);

  fs::remove(root / "depth" / "000000-0004.dfs");
  const Verdict v = validate_episode(root, 0);
  CHECK(v.reason == RejectReason::modality_mismatch);
  CHECK(v.detail.find("depth=6") != std::string::npos);
}

TEST_CASE("gather: three seven-step episodes") {
  dftest::TempDir dir;
  const fs::path root = gen_pyramid(dir / "eps", 3);
  const TaskSpec spec = builtin_task_spec(TaskKind::stack_block_pyramid);
  const fs::path out = dir / "data.dfar";
  const GatherResult r = gather({root}, spec, fixed_config(), out);
  CHECK(r.demos == 3);
  CHECK(r.total_steps == 21);
  CHECK(r.report.scanned == 3);
  CHECK(r.report.accepted == 3);
  CHECK(r.report.rejected == 0);

  const auto reader = ContainerReader::open(out);
  CHECK(reader.demo_groups() == std::vector<std::string>{"demo_0", "demo_1", "demo_2"});
  std::size_t stored = 0;
  for (const auto& g : reader.demo_groups()) stored += reader.entry("data/" + g + "/rewards").shape[0];
  CHECK(stored == 21);
  const auto attrs = reader.attrs();
  CHECK(to_text(attrs.at("task_spec_text")) == render_task_spec(spec));
  CHECK(to_text(attrs.at("created_at")) == "2024-01-01T00:00:00Z");
  CHECK(to_f64(attrs.at("control_freq")) == std::vector<double>{20.0});
  CHECK(to_text(attrs.at("tool_version")) == kToolVersion);
  const auto env = nlohmann::json::parse(to_text(attrs.at("env_config")));
  CHECK(env["camera"]["width"] == 24);

  // demo_1 is the second input episode, step for step.
  const auto episode1 = load_episode(root, 1);
  const DemoView demo1 = read_demo(reader, "demo_1");
  REQUIRE(demo1.steps.size() == episode1.size());
  for (std::size_t t = 0; t < episode1.size(); ++t) {
    StepRecord expected = episode1[t];
    expected.episode_id = 1;
    CHECK(demo1.steps[t] == expected);
  }
  std::vector<float> rewards;
  for (const auto& s : episode1) rewards.push_back(s.reward);
  CHECK(to_f32(reader.read("data/demo_1/rewards")) == rewards);
}

TEST_CASE("gather: rejected episodes are skipped and counted") {
  dftest::TempDir dir;
  const fs::path root = gen_pyramid(dir / "eps", 4);
  fs::remove(root / "color" / "000001-0003.dfs");
  for (Modality m : kAllModalities) fs::remove(root / to_string(m) / "000002-0006.dfs");
  const GatherResult r = gather({root}, builtin_task_spec(TaskKind::stack_block_pyramid), fixed_config(), dir / "o");
  CHECK(r.report.scanned == 4);
  CHECK(r.report.accepted + r.report.rejected == r.report.scanned);
  CHECK(r.report.accepted == 2);
  CHECK(r.report.reasons.at("MODALITY_MISMATCH") == 1);
  CHECK(r.report.reasons.at("INCOMPLETE") == 1);
  CHECK(r.demos == 2);
  CHECK(r.total_steps == 14);
  // Order preserved: demo_1 is input episode 3.
  const auto reader = ContainerReader::open(dir / "o");
  CHECK(read_demo(reader, "demo_1").steps.front().rgb == load_episode(root, 3).front().rgb);
}

TEST_CASE("gather: empty inputs") {
  dftest::TempDir dir;
  fs::create_directories(dir / "nothing");
  CHECK_THROWS_WITH_AS(gather({dir / "nothing"}, builtin_task_spec(TaskKind::block_insertion), fixed_config(),
                              dir / "out.dfar"),
                       doctest::Contains("EMPTY_DATASET"), Error);
  CHECK_FALSE(fs::exists(dir / "out.dfar"));
  CHECK_THROWS_WITH_AS(gather({}, builtin_task_spec(TaskKind::block_insertion), fixed_config(), dir / "out.dfar"),
                       doctest::Contains("EMPTY_DATASET"), Error);
}

TEST_CASE("gather: deterministic and independent of reader count") {
  dftest::TempDir dir;
  const fs::path root = gen_pyramid(dir / "eps", 5);
  const TaskSpec spec = builtin_task_spec(TaskKind::stack_block_pyramid);
  GatherConfig one = fixed_config(), many = fixed_config();
  one.workers = 1;
  many.workers = 4;
  gather({root}, spec, one, dir / "a");
  gather({root}, spec, many, dir / "b");
  CHECK(read_file_bytes(dir / "a") == read_file_bytes(dir / "b"));
  // A directory of recorder roots expands to the same episodes.
  gather({dir / "eps"}, spec, one, dir / "c");
  CHECK(read_file_bytes(dir / "a") == read_file_bytes(dir / "c"));
}

TEST_CASE("pipeline equals gen followed by gather, byte for byte") {
  dftest::TempDir dir;
  const CameraConfig cam = small_camera();
  const PipelineResult p =
      run_pipeline(TaskKind::place_red_in_green, std::nullopt, 5, 7, cam, fixed_config(), dir / "pipe.dfar");
  CHECK(p.gathered.demos == 5);
  CHECK_FALSE(fs::exists(dir / "pipe.dfar.work"));

  GenConfig g;
  g.tasks = {TaskKind::place_red_in_green};
  g.episodes = 5;
  g.seed = 7;
  g.camera = cam;
  g.out = dir / "gen";
  const auto gen = generate(g);
  gather({gen.front().root}, builtin_task_spec(TaskKind::place_red_in_green), fixed_config(), dir / "agg.dfar");
  CHECK(read_file_bytes(dir / "pipe.dfar") == read_file_bytes(dir / "agg.dfar"));
  CHECK_THROWS_AS(run_pipeline(TaskKind::place_red_in_green, std::nullopt, 0, 7, cam, fixed_config(), dir / "x"),
                  Error);
}

TEST_CASE("generate: trees are reproducible for a fixed seed") {
  dftest::TempDir dir;
  GenConfig g;
  g.tasks = {TaskKind::block_insertion, TaskKind::towers_of_hanoi};
  g.episodes = 2;
  g.seed = 42;
  g.camera = small_camera();
  g.out = dir / "a";
  generate(g);
  g.out = dir / "b";
  g.workers = 2;
  generate(g);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path twin = dir / "b" / fs::relative(e.path(), dir / "a");
    CHECK(read_file_bytes(e.path()) == read_file_bytes(twin));
    ++files;
  }
  CHECK(files == 5 * (2 * 2 + 2 * 8));
}

TEST_CASE("container: random round trip") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    const ContainerContents c = random_contents(rng);
    std::set<std::string> names;
    for (const auto& [p, a] : c) names.insert(p);
    if (names.size() != c.size()) {
      CHECK_THROWS_WITH_AS(encode_container(c), doctest::Contains("DUPLICATE_PATH"), Error);
      continue;
    }
    const auto reader = ContainerReader::from_bytes(encode_container(c));
    CHECK(reader.read_all() == c);
  }
}

TEST_CASE("container: truncation never reads silently") {
  dftest::TempDir dir;
  const fs::path root = gen_pyramid(dir / "eps", 2);
  gather({root}, builtin_task_spec(TaskKind::stack_block_pyramid), fixed_config(), dir / "c");
  const auto bytes = read_file_bytes(dir / "c");
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = rng() % bytes.size();
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
    try {
      ContainerReader::from_bytes(cut);
      FAIL("truncated container was accepted");
    } catch (const Error& e) {
      CHECK((e.code() == "CORRUPT_INDEX" || e.code() == "BAD_MAGIC"));
    }
  }
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_WITH_AS(ContainerReader::from_bytes(bad), doctest::Contains("BAD_MAGIC"), Error);
}

TEST_CASE("container: index inconsistencies") {
  ContainerContents c{{"a", make_utf8("abc")}, {"b", make_utf8("de")}};
  const auto bytes = encode_container(c);
  // Index layout: 5 magic + 8 count, then per entry 2 + path + 2 + 4*ndim + 16.
  const std::size_t first_offset_at = 5 + 8 + 2 + 1 + 2 + 4;
  auto overlap = bytes;
  overlap[first_offset_at + 16 + 2 + 1 + 2 + 4] -= 1;  // second entry's offset moves into the first payload
  CHECK_THROWS_WITH_AS(ContainerReader::from_bytes(overlap), doctest::Contains("CORRUPT_INDEX"), Error);
  auto longer = bytes;
  longer.push_back(0);
  CHECK_THROWS_WITH_AS(ContainerReader::from_bytes(longer), doctest::Contains("CORRUPT_INDEX"), Error);
  auto huge_count = bytes;
  huge_count[12] = 0x7F;
  CHECK_THROWS_WITH_AS(ContainerReader::from_bytes(huge_count), doctest::Contains("CORRUPT_INDEX"), Error);
  const auto reader = ContainerReader::from_bytes(bytes);
  CHECK(to_text(reader.read("b")) == "de");
  CHECK_THROWS_WITH_AS(reader.read("c"), doctest::Contains("MISSING_ENTRY"), Error);
}
