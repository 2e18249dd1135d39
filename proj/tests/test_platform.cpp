#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "skelrt/error.hpp"
#include "skelrt/platform.hpp"
#include "support.hpp"

using namespace skelrt;
using skelrt::test::kernel;

namespace {

GpuDeviceModel gpu(std::size_t min_wgs = 32, std::size_t max_wgs = 1024) {
  GpuDeviceModel g;
  g.name = "g";
  g.min_work_group_size = min_wgs;
  g.max_work_group_size = max_wgs;
  return g;
}

}  // namespace

TEST_CASE("occupancy examples") {
  auto g = gpu();
  auto free = kernel("k", {KernelArg::vector_in("v")});
  CHECK(occupancy(g, free, 256) == 1.0);

  auto lmem = free;
  lmem.resources.local_mem_per_group = 8192;
  CHECK(occupancy(g, lmem, 256) == 0.5);
}

TEST_CASE("occupancy agrees with the three-limit oracle") {
  test::Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    GpuDeviceModel g = gpu();
    g.max_wg_per_cu = rng.uniform(1, 32);
    g.local_mem_per_cu = rng.uniform(1024, 65536);
    g.registers_per_cu = rng.uniform(4096, 131072);
    auto k = kernel("k", {KernelArg::vector_in("v")});
    k.resources.local_mem_per_group = rng.coin() ? 0 : rng.uniform(1, 16384);
    k.resources.registers_per_thread = rng.coin() ? 0 : rng.uniform(1, 64);
    std::size_t wgs = std::size_t{1} << rng.uniform(0, 10);
    double o = occupancy(g, k, wgs);
    CHECK(o == test::occupancy_oracle(g.max_wg_per_cu, g.local_mem_per_cu, g.registers_per_cu,
                                      k.resources.local_mem_per_group, k.resources.registers_per_thread, wgs));
    CHECK(o >= 0.0);
    CHECK(o <= 1.0);
  }
}

TEST_CASE("cpu configurations") {
  CpuDeviceModel all;
  all.cache_topology = {{FissionLevel::L1, 8}, {FissionLevel::L2, 4}, {FissionLevel::L3, 2}, {FissionLevel::Numa, 1}};
  CHECK(cpu_get_configurations(all) == std::vector<FissionLevel>{FissionLevel::L1, FissionLevel::L2, FissionLevel::L3,
                                                                  FissionLevel::Numa, FissionLevel::NoFission});
  CpuDeviceModel three;
  three.cache_topology = {{FissionLevel::L1, 8}, {FissionLevel::L2, 4}, {FissionLevel::L3, 2}};
  CHECK(cpu_get_configurations(three) ==
        std::vector<FissionLevel>{FissionLevel::L1, FissionLevel::L2, FissionLevel::L3, FissionLevel::NoFission});
  CHECK(cpu_get_configurations(CpuDeviceModel{}) == std::vector<FissionLevel>{FissionLevel::NoFission});
}

TEST_CASE("fission level names round-trip") {
  for (auto f : {FissionLevel::L1, FissionLevel::L2, FissionLevel::L3, FissionLevel::Numa, FissionLevel::NoFission})
    CHECK(parse_fission(to_string(f)) == f);
  CHECK_THROWS_AS(parse_fission("L4"), InvalidSpec);
}

TEST_CASE("gpu configurations are sorted by occupancy then size") {
  auto g = gpu(32, 1024);
  g.registers_per_cu = 65536;
  auto k = kernel("k", {KernelArg::vector_in("v")});
  k.resources.registers_per_thread = 32;
  Sct t = leaf(k);
  std::vector<GpuDeviceModel> gs{g};
  auto cfg = gpu_get_configurations(gs, t, 0.0001, 4);
  CHECK(cfg.overlaps == std::vector<std::size_t>{1, 2, 3, 4});
  REQUIRE(cfg.wgs_candidates.size() == 6);  // 32 .. 1024

  // Sort oracle over the same sizes.
  std::vector<std::pair<double, std::size_t>> expect;
  for (std::size_t s = 32; s <= 1024; s *= 2) expect.emplace_back(occupancy(g, k, s), s);
  std::sort(expect.begin(), expect.end(), [](auto a, auto b) { return a.first != b.first ? a.first > b.first : a.second > b.second; });
  for (std::size_t i = 0; i < expect.size(); ++i) {
    CHECK(cfg.wgs_candidates[i].size == expect[i].second);
    CHECK(cfg.wgs_candidates[i].occupancy == expect[i].first);
    CHECK(cfg.wgs_candidates[i].assignment.at("k") == expect[i].second);
  }
}

TEST_CASE("threshold above one falls back to the best candidate") {
  auto g = gpu(32, 256);
  auto k = kernel("k", {KernelArg::vector_in("v")});
  k.resources.registers_per_thread = 64;
  std::vector<GpuDeviceModel> gs{g};
  auto cfg = gpu_get_configurations(gs, leaf(k), 1.01);
  REQUIRE(cfg.wgs_candidates.size() == 1);
  CHECK(cfg.wgs_candidates[0].size == 128);  // 65536 / (64 * 128) = 8 groups, the cap
  CHECK(cfg.wgs_candidates[0].occupancy == 1.0);
  CHECK(best_occupancy_wgs(gs, leaf(k)).at("k") == 128);
}

TEST_CASE("fixed work-group sizes are kept") {
  auto g = gpu();
  auto k = kernel("k", {KernelArg::vector_in("v")});
  k.fixed_wgs = std::vector<std::size_t>{64};
  std::vector<GpuDeviceModel> gs{g};
  auto cfg = gpu_get_configurations(gs, leaf(k), 0.5);
  REQUIRE(cfg.wgs_candidates.size() == 1);
  CHECK(cfg.wgs_candidates[0].assignment.at("k") == 64);

  PlatformConfig pc;
  pc.wgs_per_kernel["k"] = 256;
  CHECK(slot_wgs({DeviceType::Gpu, 0, 0}, pc, k) == 64);
  CHECK(slot_wgs({DeviceType::Cpu, 0, 0}, pc, k) == 64);
  auto free = kernel("f", {KernelArg::vector_in("v")});
  pc.wgs_per_kernel["f"] = 256;
  CHECK(slot_wgs({DeviceType::Gpu, 0, 0}, pc, free) == 256);
  CHECK(slot_wgs({DeviceType::Cpu, 0, 0}, pc, free) == 1);
}

TEST_CASE("no gpus: a single overlap and size") {
  auto k = kernel("k", {KernelArg::vector_in("v")});
  auto cfg = gpu_get_configurations({}, leaf(k), 0.5);
  CHECK(cfg.overlaps == std::vector<std::size_t>{1});
  CHECK(cfg.wgs_candidates.size() == 1);
  CHECK_THROWS_AS(gpu_get_configurations({}, leaf(k), 0.0), InvalidSpec);
}

TEST_CASE("slot layout: cpu subdevices then gpu lanes") {
  Fleet f = test::linear_fleet(1, 1, {"k"});
  f.cpu->cache_topology[FissionLevel::L2] = 4;
  f.gpus.push_back(f.gpus[0]);
  f.gpus[1].name = "gpu1";
  PlatformConfig pc{FissionLevel::L2, 3, {}};
  auto slots = slot_layout(f, pc);
  REQUIRE(slots.size() == 4 + 2 * 3);
  for (std::size_t i = 0; i < 4; ++i) CHECK((slots[i].type == DeviceType::Cpu && slots[i].lane == i));
  CHECK((slots[4].type == DeviceType::Gpu && slots[4].device == 0 && slots[4].lane == 0));
  CHECK((slots[9].type == DeviceType::Gpu && slots[9].device == 1 && slots[9].lane == 2));
  pc.fission = FissionLevel::L1;
  CHECK_THROWS_AS(slot_layout(f, pc), InvalidSpec);
}

TEST_CASE("cost model examples") {
  Fleet f = test::linear_fleet(10, 10, {"k"}, 100);
  auto k = kernel("k", {KernelArg::vector_in("v")});
  SimulatedPlatform p(f);
  PlatformConfig pc;
  Slot cpu{DeviceType::Cpu, 0, 0}, g{DeviceType::Gpu, 0, 0};
  CHECK(p.kernel_time(cpu, pc, k, 1000, 0) == doctest::Approx(100.0));
  CHECK(p.kernel_time(cpu, pc, k, 0, 0) == 0.0);
  CHECK(p.kernel_time(g, pc, k, 1000, 0) == doctest::Approx(100.0));
  CHECK(p.transfer_time(cpu, pc, 1000) == 0.0);
  CHECK(p.transfer_time(g, pc, 1000) == doctest::Approx(10.0));

  std::vector<SlotWork> work{{cpu, 1000, 0}, {g, 0, 0}, {g, 500, 1000}};
  auto times = simulate_execution(p, work, pc, k, 0);
  CHECK(times[0] == doctest::Approx(100.0));
  CHECK(times[1] == 0.0);
  CHECK(times[2] == doctest::Approx(60.0));
}

TEST_CASE("overlap efficiency hides transfer") {
  Fleet f = test::linear_fleet(10, 10, {"k"}, 100);
  f.gpus[0].overlap_efficiency = 0.5;
  SimulatedPlatform p(f);
  Slot g{DeviceType::Gpu, 0, 0};
  PlatformConfig one{FissionLevel::NoFission, 1, {}}, two{FissionLevel::NoFission, 2, {}};
  // Half the bytes per lane at two lanes: 2 * 500/100 * 0.5 = 5 ms against 10 ms for the whole vector.
  CHECK(p.transfer_time(g, one, 1000) == doctest::Approx(10.0));
  CHECK(p.transfer_time(g, two, 500) == doctest::Approx(5.0));
}

TEST_CASE("cpu fission and load") {
  Fleet f = test::linear_fleet(100, 100, {"k"});
  f.cpu->cache_topology[FissionLevel::L2] = 4;
  f.cpu->fission_efficiency[FissionLevel::L2] = 1.2;
  f.cpu->load_profile = {{10.0, 4.0}, {20.0, 2.0}};
  auto k = kernel("k", {KernelArg::vector_in("v")});
  SimulatedPlatform p(f);
  Slot cpu{DeviceType::Cpu, 0, 0};
  PlatformConfig l2{FissionLevel::L2, 1, {}};
  // 100 elements on one of 4 subdevices sharing 100 * 1.2 elements/ms.
  CHECK(p.kernel_time(cpu, l2, k, 100, 0) == doctest::Approx(100.0 / 30.0));
  CHECK(p.kernel_time(cpu, l2, k, 100, 15) == doctest::Approx(4 * 100.0 / 30.0));
  CHECK(p.kernel_time(cpu, l2, k, 100, 25) == doctest::Approx(2 * 100.0 / 30.0));
}

TEST_CASE("unknown throughput is reported") {
  Fleet f = test::linear_fleet(1, 1, {"k"});
  SimulatedPlatform p(f);
  auto other = kernel("x", {KernelArg::vector_in("v")});
  CHECK_THROWS_AS(p.kernel_time({DeviceType::Cpu, 0, 0}, {}, other, 10, 0), UnknownKernelThroughput);
  CHECK_THROWS_AS(p.kernel_time({DeviceType::Gpu, 0, 0}, {}, other, 10, 0), UnknownKernelThroughput);
}

TEST_CASE("noise is deterministic and bounded") {
  Fleet f = test::linear_fleet(10, 10, {"k"});
  auto k = kernel("k", {KernelArg::vector_in("v")});
  SimulatedPlatform a(f, NoiseModel{7, 0.1}), b(f, NoiseModel{7, 0.1}), c(f, NoiseModel{8, 0.1});
  bool differs = false;
  for (int clock = 0; clock < 50; ++clock) {
    double ta = a.kernel_time({DeviceType::Cpu, 0, 0}, {}, k, 1000, clock);
    CHECK(ta == b.kernel_time({DeviceType::Cpu, 0, 0}, {}, k, 1000, clock));
    CHECK(ta >= 90.0 - 1e-9);
    CHECK(ta <= 110.0 + 1e-9);
    differs |= ta != c.kernel_time({DeviceType::Cpu, 0, 0}, {}, k, 1000, clock);
  }
  CHECK(differs);
}

TEST_CASE("device validation") {
  Fleet empty;
  CHECK_THROWS_AS(empty.validate(), InvalidSpec);
  Fleet f = test::linear_fleet(1, 1, {"k"});
  f.gpus[0].overlap_efficiency = 1.5;
  CHECK_THROWS_AS(f.validate(), InvalidSpec);
  f = test::linear_fleet(1, 1, {"k"});
  f.cpu->cache_topology = {{FissionLevel::L1, 2}, {FissionLevel::L2, 4}};
  CHECK_THROWS_AS(f.validate(), InvalidSpec);
  f = test::linear_fleet(1, 1, {"k"});
  f.gpus.push_back(f.gpus[0]);
  f.gpus[1].relative_perf = 3.0;
  auto w = f.gpu_weights();
  CHECK(w[0] == doctest::Approx(0.25));
  CHECK(w[1] == doctest::Approx(0.75));
}
