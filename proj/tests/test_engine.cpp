#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <mutex>
#include <numeric>

#include "skelrt/engine.hpp"
#include "skelrt/error.hpp"
#include "support.hpp"

using namespace skelrt;
using skelrt::test::kernel;

namespace {

Fleet cpu_only(const std::vector<std::string>& kernels, std::size_t l2 = 0) {
  Fleet f = test::linear_fleet(100, 100, kernels);
  f.gpus.clear();
  if (l2) f.cpu->cache_topology[FissionLevel::L2] = l2;
  return f;
}

KernelSpec doubler() {
  auto k = kernel("dbl", {KernelArg::vector_in("x"), KernelArg::vector_out("y")});
  k.body = [](KernelInvocation& inv) {
    auto in = inv.inputs.at("x");
    auto out = inv.outputs.at("y");
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = 2.0 * in[i];
  };
  return k;
}

KernelSpec incrementer() {
  auto k = kernel("inc", {KernelArg::vector_in("y"), KernelArg::scalar("step"), KernelArg::vector_out("z")});
  k.body = [](KernelInvocation& inv) {
    auto in = inv.inputs.at("y");
    auto out = inv.outputs.at("z");
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] + inv.scalars.at("step");
  };
  return k;
}

RunArguments args_for(std::size_t n, std::map<std::string, std::vector<double>> inputs = {},
                      std::map<std::string, double> scalars = {}) {
  RunArguments a;
  a.workload = {{n}, FpPrecision::Double};
  a.inputs = std::move(inputs);
  a.scalars = std::move(scalars);
  return a;
}

std::vector<double> iota(std::size_t n) {
  std::vector<double> v(n);
  std::iota(v.begin(), v.end(), 1.0);
  return v;
}

ExecutionStats execute(Executor& ex, const Sct& t, const FrameworkConfig& c, const RunArguments& a,
                       RunResult* r = nullptr) {
  return ex.execute_once(t, ex.plan(t, c, a.lengths_for(t)), c, a, 0.0, r);
}

}  // namespace

TEST_CASE("materialize completes a configuration for the fleet") {
  auto k = kernel("k", {KernelArg::vector_out("v")});
  Sct t = leaf(k);
  Fleet f = test::linear_fleet(1, 1, {"k"});
  auto c = materialize(f, t, {FissionLevel::L3, 0, {}}, {0.3, 0.7});
  CHECK(c.platform.fission == FissionLevel::NoFission);
  CHECK(c.platform.overlap == 1);
  CHECK(c.platform.wgs_per_kernel.at("k") == 1);
  CHECK(c.split.cpu == 0.3);
  CHECK(c.parallelism == 2);

  auto cpu = materialize(cpu_only({"k"}), t, {FissionLevel::NoFission, 4, {{"k", 64}}}, {0.3, 0.7});
  CHECK(cpu.split == Split{1.0, 0.0});
  CHECK(cpu.platform.overlap == 1);
  CHECK(cpu.platform.wgs_per_kernel.empty());

  Fleet gpu_only = test::linear_fleet(1, 1, {"k"});
  gpu_only.cpu.reset();
  auto g = materialize(gpu_only, t, {FissionLevel::L1, 3, {}}, {0.3, 0.7});
  CHECK(g.split == Split{0.0, 1.0});
  CHECK(g.parallelism == 3);
}

TEST_CASE("slot count is cpu subdevices plus gpu lanes") {
  test::Rng rng(4);
  auto k = kernel("k", {KernelArg::vector_out("v")});
  for (int trial = 0; trial < 50; ++trial) {
    Fleet f = test::linear_fleet(1, 1, {"k"});
    std::size_t sub = rng.uniform(1, 8), gpus = rng.uniform(0, 3), overlap = rng.uniform(1, 4);
    f.cpu->cache_topology[FissionLevel::L2] = sub;
    f.gpus.resize(gpus, f.gpus.front());
    auto c = materialize(f, leaf(k), {FissionLevel::L2, overlap, {}}, {0.5, 0.5});
    CHECK(c.parallelism == sub + gpus * (gpus ? overlap : 0));
    auto fr = slot_fractions(f, c);
    CHECK(fr.size() == c.parallelism);
    CHECK(std::accumulate(fr.begin(), fr.end(), 0.0) == doctest::Approx(1.0));
  }
}

TEST_CASE("a single slot computes the sequential result") {
  Sct t = pipeline(leaf(doubler()), leaf(incrementer()));
  Executor ex(cpu_only({"dbl", "inc"}));
  auto a = args_for(100, {{"x", iota(100)}}, {{"step", 0.5}});
  auto c = materialize(ex.fleet(), t, {}, {1.0, 0.0});
  REQUIRE(c.parallelism == 1);
  RunResult r;
  execute(ex, t, c, a, &r);
  for (std::size_t i = 0; i < 100; ++i) CHECK(r.outputs.at("z")[i] == 2.0 * (i + 1) + 0.5);
  CHECK(r.outputs.at("y")[7] == 16.0);
}

TEST_CASE("partitioned execution matches the single-slot result") {
  test::Rng rng(9);
  Sct t = pipeline(leaf(doubler()), leaf(incrementer()));
  for (int trial = 0; trial < 30; ++trial) {
    Fleet f = test::linear_fleet(100, 100, {"dbl", "inc"});
    f.cpu->cache_topology[FissionLevel::L2] = rng.uniform(1, 4);
    Executor ex(f);
    std::size_t n = rng.uniform(16, 400);
    auto a = args_for(n, {{"x", iota(n)}}, {{"step", 1.0}});
    auto c = materialize(f, t, {FissionLevel::L2, rng.uniform(1, 3), {}}, Split::from_cpu(rng.unit()));
    RunResult r;
    execute(ex, t, c, a, &r);
    for (std::size_t i = 0; i < n; ++i) CHECK(r.outputs.at("z")[i] == 2.0 * (i + 1) + 1.0);
  }
}

TEST_CASE("map-reduce with ADD over four slots") {
  auto m = kernel("sq", {KernelArg::vector_in("x"), KernelArg::vector_out("partial")});
  m.body = [](KernelInvocation& inv) {
    auto in = inv.inputs.at("x");
    auto out = inv.outputs.at("partial");
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * in[i];
  };
  Sct t = map_reduce(leaf(m), HostReducer::add());
  Executor ex(cpu_only({"sq"}, 4), std::nullopt, HostCosts{0, 0, 0.25});
  auto a = args_for(1000, {{"x", iota(1000)}});
  auto c = materialize(ex.fleet(), t, {FissionLevel::L2, 1, {}}, {1.0, 0.0});
  REQUIRE(c.parallelism == 4);
  auto plan = ex.plan(t, c, a.lengths_for(t));
  RunResult r;
  auto st = ex.execute_once(t, plan, c, a, 0.0, &r);

  // Host-side oracle: one partial sum per slot, then their sum.
  double total = 0.0;
  for (std::size_t s = 0; s < 4; ++s) {
    const Partition& p = plan.at("partial", s);
    double partial = 0.0;
    for (std::size_t e = p.offset; e < p.offset + p.length; ++e) partial += (e + 1.0) * (e + 1.0);
    total += partial;
  }
  REQUIRE(r.reduction);
  CHECK(*r.reduction == total);
  CHECK(*r.reduction == 1000.0 * 1001.0 * 2001.0 / 6.0);
  CHECK(st.host_time == doctest::Approx(1.0));
  auto reduces = std::count_if(st.events.begin(), st.events.end(),
                               [](const auto& e) { return e.kind == ExecutionEvent::Kind::HostReduce; });
  CHECK(reduces == 1);
}

TEST_CASE("non-associative reducers fold left to right") {
  auto m = kernel("id", {KernelArg::vector_in("x"), KernelArg::vector_out("partial")});
  m.body = [](KernelInvocation& inv) {
    std::copy(inv.inputs.at("x").begin(), inv.inputs.at("x").end(), inv.outputs.at("partial").begin());
  };
  Sct t = map_reduce(leaf(m), HostReducer::sub());
  Executor ex(cpu_only({"id"}, 3));
  auto a = args_for(10, {{"x", iota(10)}});
  auto c = materialize(ex.fleet(), t, {FissionLevel::L2, 1, {}}, {1.0, 0.0});
  RunResult r;
  execute(ex, t, c, a, &r);
  REQUIRE(r.reduction);
  CHECK(*r.reduction == 1.0 - (2 + 3 + 4 + 5 + 6 + 7 + 8 + 9 + 10));
}

TEST_CASE("size and offset traits see the partition") {
  auto k = kernel("k", {KernelArg::vector_out("v"), KernelArg::scalar("n", Trait::Size),
                        KernelArg::scalar("off", Trait::Offset)});
  Sct t = leaf(k);
  Executor ex(test::linear_fleet(100, 100, {"k"}));
  auto a = args_for(1024);
  auto c = materialize(ex.fleet(), t, {}, {0.75, 0.25});
  auto st = execute(ex, t, c, a);
  std::map<std::size_t, std::map<std::string, double>> seen;
  for (const auto& e : st.events)
    if (e.kind == ExecutionEvent::Kind::Kernel) seen[*e.slot] = e.scalars;
  CHECK(seen[0].at("n") == 768);
  CHECK(seen[0].at("off") == 0);
  CHECK(seen[1].at("n") == 256);
  CHECK(seen[1].at("off") == 768);
}

TEST_CASE("a globally synchronized loop records one barrier per iteration") {
  auto k = kernel("k", {KernelArg::vector_in("v"), KernelArg::vector_out("w")});
  Sct t = loop(leaf(k), LoopState::fixed("l", 3, true, {"w"}));
  Executor ex(cpu_only({"k"}, 4), std::nullopt, HostCosts{0.5, 0.25, 0});
  auto c = materialize(ex.fleet(), t, {FissionLevel::L2, 1, {}}, {1.0, 0.0});
  REQUIRE(c.parallelism == 4);
  auto st = execute(ex, t, c, args_for(400));
  auto count = [&](ExecutionEvent::Kind kind) {
    return std::count_if(st.events.begin(), st.events.end(), [&](const auto& e) { return e.kind == kind; });
  };
  CHECK(count(ExecutionEvent::Kind::Barrier) == 3);
  CHECK(count(ExecutionEvent::Kind::Kernel) == 12);
  CHECK(count(ExecutionEvent::Kind::HostCondition) == 4);
  CHECK(count(ExecutionEvent::Kind::HostUpdate) == 3);
  CHECK(st.host_time == doctest::Approx(4 * 0.5 + 3 * 0.25));
  // Each kernel processes 100 elements at 100/4 elements per ms.
  CHECK(st.wall_time == doctest::Approx(3 * 4.0 + 4 * 0.5 + 3 * 0.25));
  for (std::size_t i = 1; i < st.events.size(); ++i) CHECK(st.events[i - 1].start <= st.events[i].start);
}

TEST_CASE("an unsynchronized loop is checked on every slot") {
  auto k = kernel("k", {KernelArg::vector_out("w")});
  Sct t = loop(leaf(k), LoopState::fixed("l", 2));
  Executor ex(cpu_only({"k"}, 2));
  auto c = materialize(ex.fleet(), t, {FissionLevel::L2, 1, {}}, {1.0, 0.0});
  auto st = execute(ex, t, c, args_for(100));
  std::map<std::size_t, int> conditions;
  for (const auto& e : st.events) {
    CHECK(e.kind != ExecutionEvent::Kind::Barrier);
    if (e.kind == ExecutionEvent::Kind::HostCondition) ++conditions[*e.slot];
  }
  CHECK(conditions[0] == 3);
  CHECK(conditions[1] == 3);
}

TEST_CASE("missing scalars and wrong input sizes are rejected") {
  Sct t = pipeline(leaf(doubler()), leaf(incrementer()));
  Executor ex(cpu_only({"dbl", "inc"}));
  auto c = materialize(ex.fleet(), t, {}, {1.0, 0.0});
  CHECK_THROWS_AS(execute(ex, t, c, args_for(10, {{"x", iota(10)}})), ShapeMismatch);
  CHECK_THROWS_AS(execute(ex, t, c, args_for(10, {{"x", iota(9)}}, {{"step", 1}})), ShapeMismatch);
}

TEST_CASE("dev compares the per-type times") {
  auto k = kernel("k", {KernelArg::vector_out("v")});
  Executor ex(test::linear_fleet(100, 300, {"k"}));
  auto c = materialize(ex.fleet(), leaf(k), {}, {0.5, 0.5});
  auto st = execute(ex, leaf(k), c, args_for(600));
  CHECK(st.per_type.cpu == doctest::Approx(3.0));
  CHECK(st.per_type.gpu == doctest::Approx(1.0));
  REQUIRE(st.dev);
  CHECK(*st.dev == doctest::Approx(1.0 / 3.0));
  Executor solo(cpu_only({"k"}));
  CHECK_FALSE(execute(solo, leaf(k), materialize(solo.fleet(), leaf(k), {}, {}), args_for(10)).dev);
}

TEST_CASE("requests are served first come first served") {
  std::mutex m;
  std::vector<double> order;
  auto k = kernel("k", {KernelArg::vector_out("v"), KernelArg::scalar("id")});
  k.body = [&](KernelInvocation& inv) {
    std::lock_guard lock(m);
    order.push_back(inv.scalars.at("id"));
  };
  KnowledgeBase kb;
  Engine engine(cpu_only({"k"}, 4), kb);
  std::vector<std::future<RunOutcome>> fs;
  for (int i = 0; i < 6; ++i) fs.push_back(engine.run(leaf(k), args_for(64, {}, {{"id", double(i)}})));
  for (std::size_t i = 0; i < fs.size(); ++i) CHECK(fs[i].get().record.run == i);
  CHECK(std::is_sorted(order.begin(), order.end()));
  CHECK(order.size() == 6);
}

TEST_CASE("decision workflow") {
  auto k = kernel("k", {KernelArg::vector_out("v")});
  Sct t = leaf(k);
  auto a = args_for(1 << 16);

  SUBCASE("balanced history reuses the configuration") {
    KnowledgeBase kb;
    Engine engine(test::linear_fleet(100, 100, {"k"}), kb);
    auto first = engine.run(t, a).get().record;
    CHECK(first.actions == std::vector<std::string>{"derive:cold-start"});
    REQUIRE(kb.lookup(t.id(), a.workload));
    CHECK(kb.lookup(t.id(), a.workload)->provenance == Provenance::Derived);
    for (int i = 0; i < 5; ++i) {
      auto r = engine.run(t, a).get().record;
      CHECK(r.actions == std::vector<std::string>{"reuse"});
      CHECK(r.config.split == first.config.split);
      CHECK(r.lbt == 0.0);
    }
  }

  SUBCASE("an unbalanced recurrent run builds a profile") {
    KnowledgeBase kb;
    Engine engine(test::linear_fleet(100, 300, {"k"}), kb);
    std::vector<std::vector<std::string>> actions;
    std::vector<double> lbts;
    for (int i = 0; i < 5; ++i) {
      auto r = engine.run(t, a).get().record;
      actions.push_back(r.actions);
      lbts.push_back(r.lbt);
    }
    CHECK(lbts[0] == doctest::Approx(2.0 / 3.0));
    CHECK(lbts[2] == doctest::Approx(0.963).epsilon(1e-3));
    CHECK(actions[3] == std::vector<std::string>{"profile:built"});
    CHECK(kb.has_built(t.id(), a.workload));
    CHECK(actions[4] == std::vector<std::string>{"reuse"});
  }

  SUBCASE("without profiling the balancer takes over") {
    KnowledgeBase kb;
    EngineOptions o;
    o.profiling = false;
    Engine engine(test::linear_fleet(100, 300, {"k"}), kb, o);
    std::vector<RunRecord> rs;
    for (int i = 0; i < 30; ++i) rs.push_back(engine.run(t, a).get().record);
    CHECK(rs[3].actions.front() == "balance:trigger");
    CHECK(rs[3].config.split.cpu < rs[2].config.split.cpu);
    CHECK(kb.lookup(t.id(), a.workload)->provenance == Provenance::Balanced);
    CHECK(std::abs(rs.back().config.split.cpu - 0.25) < 0.02);
    CHECK(*rs.back().dev >= 0.85);
  }

  SUBCASE("a new workload on a known tree is derived and persisted") {
    KnowledgeBase kb;
    Engine engine(test::linear_fleet(100, 300, {"k"}), kb);
    engine.profile(t, a).get();
    auto b = args_for(1 << 18);
    auto r = engine.run(t, b).get().record;
    CHECK(r.actions == std::vector<std::string>{"derive:same-sct"});
    REQUIRE(kb.lookup(t.id(), b.workload));
    CHECK(kb.lookup(t.id(), b.workload)->provenance == Provenance::Derived);
    auto again = engine.run(t, a).get().record;
    CHECK(again.actions == std::vector<std::string>{"derive:exact"});
  }
}

TEST_CASE("runs are deterministic") {
  auto k = kernel("k", {KernelArg::vector_out("v")});
  auto once = [&] {
    KnowledgeBase kb;
    EngineOptions o;
    o.noise = NoiseModel{5, 0.05};
    Engine engine(test::linear_fleet(100, 250, {"k"}), kb, o);
    std::vector<std::pair<double, double>> out;
    for (int i = 0; i < 20; ++i) {
      auto r = engine.run(leaf(k), args_for(1 << 14)).get().record;
      out.emplace_back(r.wall_time, r.config.split.cpu);
    }
    return out;
  };
  CHECK(once() == once());
}
