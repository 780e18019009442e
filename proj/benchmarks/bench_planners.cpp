// Stage timings on the bundled experiment, sampled mid-run where the fields
// and the roll constraints are active.

#include "mmt/io.hpp"
#include "mmt/sim.hpp"

#include <benchmark/benchmark.h>

#include <string>

namespace {

using namespace mmt;

struct Fixture {
    sim::Scenario s;
    sim::WorldState world;  // tick 420, inside the static-obstacle gap
    std::vector<geom::OrientedRect> roll_boxes;

    Fixture() : s(io::load_scenario(std::string(MMT_SCENARIO_DIR) + "/paper_sec6.json")) {
        world = sim::initial_world(s);
        sim::TickRecord rec;
        for (int i = 0; i < 420; ++i) world = sim::step(world, s, rec);
        const auto res = dvb::plan(world.box, world.target, world.obstacles, world.dvb_memory, s.dvb, s.fields);
        roll_boxes.push_back(world.box.rect());
        for (std::size_t n = 1; n <= s.roll.H_p; ++n) roll_boxes.push_back(res.plan.states[n].rect());
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

void BM_DvbPlan(benchmark::State& st) {
    const auto& f = fixture();
    for (auto _ : st) {
        auto res = dvb::plan(f.world.box, f.world.target, f.world.obstacles, f.world.dvb_memory, f.s.dvb, f.s.fields);
        benchmark::DoNotOptimize(res);
    }
}

void BM_RollPlan(benchmark::State& st) {
    const auto& f = fixture();
    const payload::RollPlan* warm = f.world.has_roll_plan ? &f.world.roll_plan : nullptr;
    for (auto _ : st) {
        auto plan = payload::plan_roll(f.s.payload, f.world.payload, f.roll_boxes, f.s.roll, warm);
        benchmark::DoNotOptimize(plan);
    }
}

void BM_Formation(benchmark::State& st) {
    const auto& f = fixture();
    auto cfg = f.s.formation;
    cfg.parallel = st.range(0) != 0;
    const double infl = formation::elbow_influence(cfg, f.s.arm);
    for (auto _ : st) {
        auto plans = formation::plan_formation(f.world.bases, f.world.elbows, f.world.regions, cfg, infl,
                                               &f.world.robot_plans);
        benchmark::DoNotOptimize(plans);
    }
}

void BM_Tick(benchmark::State& st) {
    const auto& f = fixture();
    sim::TickRecord rec;
    for (auto _ : st) {
        auto next = sim::step(f.world, f.s, rec);
        benchmark::DoNotOptimize(next);
    }
}

}  // namespace

BENCHMARK(BM_DvbPlan)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RollPlan)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Formation)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Tick)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
