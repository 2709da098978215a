import threading

import pytest

from jitune import (
    CacheMiss,
    CandidateSpace,
    ClosureFactory,
    DoubleFinalize,
    FactoryFailure,
    InstantiationCache,
    SimulatedFactory,
    SyntheticFactory,
    TickSource,
    TunedFunction,
    TunerConfig,
    TuningKey,
    TuningRegistry,
    VariantFactory,
    VirtualClock,
    autotuned_invoke,
    build_variant,
    cache_get,
    cache_put,
    read_ticks,
)
from jitune.errors import InvalidCandidate

from .conftest import CountingFactory


def invoke_n(factory, space, n, *, clock, registry=None, cache=None, label="impl", config=None):
    registry = registry or TuningRegistry()
    cache = cache or InstantiationCache()
    outs, reports = [], []
    for _ in range(n):
        out, rep = autotuned_invoke(
            registry, cache, factory, "site", label, space, None, config=config, source=TickSource(clock), clock=clock
        )
        outs.append(out)
        reports.append(rep)
    return outs, reports, registry, cache


class TestBuildVariant:
    def test_simulated_latency(self):
        latency = 10_000
        v = build_variant(SimulatedFactory(ClosureFactory(lambda c, p: c), latency), CandidateSpace.implementations(2), 1)
        # lower bound is exact; the upper bound only has to absorb interpreter jitter
        assert latency <= v.compile_cost < latency + 5_000_000
        assert v.candidate_index == 1

    def test_simulated_latency_virtual(self, clock):
        v = build_variant(SimulatedFactory(ClosureFactory(lambda c, p: c), 10_000, clock), CandidateSpace.implementations(2), 0, clock)
        assert v.compile_cost == 10_000

    def test_closure_is_transparent(self):
        def scale(b, xs):
            return [x * b for x in xs]

        space = CandidateSpace.parameter_values([2, 4, 8])
        v = build_variant(ClosureFactory(scale), space, 2)
        assert v.compile_cost >= 0
        assert v.exec([1, 2, 3]) == scale(8, [1, 2, 3])

    def test_index_out_of_range(self):
        with pytest.raises(InvalidCandidate):
            build_variant(ClosureFactory(lambda c, p: c), CandidateSpace.implementations(3), 3)

    def test_factory_failure(self):
        class Broken:
            def build(self, space, index):
                raise OSError("compiler crashed")

        with pytest.raises(FactoryFailure) as info:
            build_variant(Broken(), CandidateSpace.implementations(1), 0)
        assert isinstance(info.value.__cause__, OSError)

    def test_protocol(self):
        assert isinstance(ClosureFactory(lambda c, p: c), VariantFactory)
        assert isinstance(SyntheticFactory([1]), VariantFactory)

    def test_from_implementations(self):
        f = ClosureFactory.from_implementations([lambda p: p + 1, lambda p: p * 10])
        space = CandidateSpace.implementations(2)
        assert [build_variant(f, space, i).exec(3) for i in range(2)] == [4, 30]


class TestCache:
    def test_empty(self):
        assert cache_get(InstantiationCache(), TuningKey("s", "p")) is None

    def test_put_get(self):
        cache, key = InstantiationCache(), TuningKey("s", "p")
        v = build_variant(ClosureFactory(lambda c, p: c), CandidateSpace.implementations(1), 0)
        cache_put(cache, key, v)
        assert cache_get(cache, key) is v

    def test_double_finalize(self):
        cache, key = InstantiationCache(), TuningKey("s", "p")
        v = build_variant(ClosureFactory(lambda c, p: c), CandidateSpace.implementations(1), 0)
        cache.put(key, v)
        with pytest.raises(DoubleFinalize):
            cache.put(key, v)
        cache.evict(key)
        cache.put(key, v)


class TestAutotunedInvoke:
    def test_five_calls_k3(self, clock):
        factory = CountingFactory(SyntheticFactory([300, 100, 200], latency_ticks=50, clock=clock))
        outs, reps, *_ = invoke_n(factory, CandidateSpace.implementations(3), 5, clock=clock)
        assert [r.compiled for r in reps] == [True, True, True, True, False]
        assert [r.candidate for r in reps] == [0, 1, 2, 1, 1]
        assert outs == [0, 1, 2, 1, 1]
        assert [r.phase for r in reps] == ["exploring"] * 3 + ["finalizing", "tuned"]
        assert [r.call_index for r in reps] == [1, 2, 3, 4, 5]
        assert [r.compile_ticks for r in reps] == [50, 50, 50, 50, 0]
        assert [r.exec_ticks for r in reps] == [300, 100, 200, 100, 100]
        assert factory.builds == [0, 1, 2, 1]

    def test_single_candidate(self, clock):
        _, reps, *_ = invoke_n(SyntheticFactory([10], clock=clock), CandidateSpace.implementations(1), 3, clock=clock)
        assert [r.compiled for r in reps] == [True, True, False]

    def test_winner_runs_forever(self, clock):
        outs, reps, *_ = invoke_n(SyntheticFactory([300, 100, 200], clock=clock), CandidateSpace.implementations(3), 30, clock=clock)
        assert set(outs[3:]) == {1}
        assert all(r.exec_ticks == 100 for r in reps[3:])

    def test_winner_runs_forever_real_clock(self):
        unit = 100_000
        outs, *_ = invoke_n(SyntheticFactory([3 * unit, unit, 2 * unit]), CandidateSpace.implementations(3), 8, clock=read_ticks)
        assert set(outs[3:]) == {1}

    def test_exploration_never_from_cache(self, clock):
        registry, cache = TuningRegistry(), InstantiationCache()
        space = CandidateSpace.implementations(3)
        factory = SyntheticFactory([3, 1, 2], clock=clock)
        key = TuningKey("site", "impl")
        cfg = TunerConfig(replicates_per_candidate=2)
        for call in range(1, 10):
            autotuned_invoke(registry, cache, factory, "site", "impl", space, None, config=cfg, clock=clock)
            if call <= 6:
                assert cache_get(cache, key) is None
            else:
                assert cache_get(cache, key) is not None

    def test_total_compile_cost(self, clock):
        C = 1_000
        _, reps, *_ = invoke_n(SyntheticFactory([5, 6, 7, 8], latency_ticks=C, clock=clock), CandidateSpace.implementations(4), 50, clock=clock)
        assert sum(r.compile_ticks for r in reps) == (4 + 1) * C

    def test_kernel_error_rolls_back(self, clock):
        calls = {"n": 0}

        def flaky(c, payload):
            calls["n"] += 1
            if calls["n"] == 2:
                raise RuntimeError("boom")
            return c

        registry, cache = TuningRegistry(), InstantiationCache()
        space = CandidateSpace.implementations(2)
        autotuned_invoke(registry, cache, ClosureFactory(flaky), "s", "p", space, None, clock=clock)
        h = registry.get(TuningKey("s", "p"))
        before = (h.phase, h.state.call_count, [len(r) for r in h.state.records])
        with pytest.raises(RuntimeError):
            autotuned_invoke(registry, cache, ClosureFactory(flaky), "s", "p", space, None, clock=clock)
        assert (h.phase, h.state.call_count, [len(r) for r in h.state.records]) == before
        out, rep = autotuned_invoke(registry, cache, ClosureFactory(flaky), "s", "p", space, None, clock=clock)
        assert rep.candidate == 1 and rep.compiled

    def test_factory_error_rolls_back(self, clock):
        class FailOnce:
            def __init__(self):
                self.failed = False

            def build(self, space, index):
                if not self.failed:
                    self.failed = True
                    raise ValueError("nope")
                return lambda p: index

        registry, cache = TuningRegistry(), InstantiationCache()
        f = FailOnce()
        with pytest.raises(FactoryFailure):
            autotuned_invoke(registry, cache, f, "s", "p", CandidateSpace.implementations(2), None, clock=clock)
        out, rep = autotuned_invoke(registry, cache, f, "s", "p", CandidateSpace.implementations(2), None, clock=clock)
        assert rep.call_index == 1 and rep.candidate == 0

    def test_reset_recompiles(self, clock):
        factory = CountingFactory(SyntheticFactory([3, 1, 2], clock=clock))
        space = CandidateSpace.implementations(3)
        _, _, registry, cache = invoke_n(factory, space, 6, clock=clock)
        assert len(factory.builds) == 4
        registry.get(TuningKey("site", "impl")).reset()
        invoke_n(factory, space, 6, clock=clock, registry=registry, cache=cache)
        assert len(factory.builds) == 8

    def test_label_change_restarts(self, clock):
        factory = CountingFactory(SyntheticFactory([3, 1, 2], clock=clock))
        space = CandidateSpace.implementations(3)
        _, _, registry, cache = invoke_n(factory, space, 6, clock=clock, label="a")
        _, reps, *_ = invoke_n(factory, space, 6, clock=clock, registry=registry, cache=cache, label="b")
        assert len(factory.builds) == 8
        assert [r.candidate for r in reps[:3]] == [0, 1, 2]

    def test_tuned_cache_miss(self, clock):
        registry, cache = TuningRegistry(), InstantiationCache()
        space = CandidateSpace.implementations(1)
        for _ in range(2):
            autotuned_invoke(registry, cache, SyntheticFactory([1], clock=clock), "s", "p", space, None, clock=clock)
        cache.evict(TuningKey("s", "p"))
        with pytest.raises(CacheMiss):
            autotuned_invoke(registry, cache, SyntheticFactory([1], clock=clock), "s", "p", space, None, clock=clock)

    def test_concurrent_callers_build_once_per_step(self):
        registry, cache = TuningRegistry(), InstantiationCache()
        factory = CountingFactory(ClosureFactory(lambda c, p: c))
        space = CandidateSpace.implementations(3)
        active = {"n": 0, "max": 0}
        lock = threading.Lock()

        class Guarded:
            def build(self, space_, index):
                with lock:
                    active["n"] += 1
                    active["max"] = max(active["max"], active["n"])
                try:
                    return factory.build(space_, index)
                finally:
                    with lock:
                        active["n"] -= 1

        def worker():
            for _ in range(25):
                autotuned_invoke(registry, cache, Guarded(), "s", "p", space, None)

        threads = [threading.Thread(target=worker) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(factory.builds) == 4
        assert active["max"] == 1


class TestTunedFunction:
    def test_listing_style_usage(self):
        f = TunedFunction(ClosureFactory(lambda b, x: x * b), CandidateSpace.parameter_values([2, 4, 8]), label="block_size")
        assert [f(1) for _ in range(3)] == [2, 4, 8]
        f(1)
        value, final = f.best_candidate()
        assert final and value in (2, 4, 8)
        assert sum(r.compiled for r in f.reports) == 4

    def test_reset(self, clock):
        f = TunedFunction(SyntheticFactory([2, 1], clock=clock), CandidateSpace.implementations(2), clock=clock)
        for _ in range(4):
            f(None)
        f.reset()
        for _ in range(4):
            f(None)
        assert sum(r.compiled for r in f.reports) == 6
