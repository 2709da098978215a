import statistics

import pytest

from jitune.measurement import (
    MetricSample,
    TickSource,
    TransformedSource,
    VirtualClock,
    calibrate_overhead,
    measure,
    read_ticks,
    spend,
    timed_call,
)


def test_monotonic_pair():
    t1 = read_ticks()
    t2 = read_ticks()
    assert t2 >= t1


def test_busy_wait_advances():
    t1 = read_ticks()
    spend(1_000_000)
    assert read_ticks() - t1 > 0


def test_back_to_back_reads_non_decreasing():
    ticks = [read_ticks() for _ in range(1000)]
    assert all(b >= a for a, b in zip(ticks, ticks[1:]))


def test_sample_validation():
    with pytest.raises(ValueError):
        MetricSample(-1)
    with pytest.raises(ValueError):
        MetricSample(float("nan"))


def test_virtual_clock_spend_is_exact():
    clock = VirtualClock()
    src = TickSource(clock)
    sample = measure(lambda _: spend(250, clock), None, src)
    assert sample == MetricSample(250)
    with pytest.raises(ValueError):
        clock.advance(-1)


def test_noop_within_calibrated_baseline():
    baseline = calibrate_overhead(trials=2000)
    samples = [measure(lambda _: None, None).value for _ in range(200)]
    assert statistics.median(samples) <= baseline


def test_ordering_of_busy_waits():
    x = 200_000
    a = measure(lambda _: spend(x), None)
    b = measure(lambda _: spend(3 * x), None)
    assert b.value > a.value


def test_failure_propagates_without_sample():
    recorded = []

    def boom(_):
        raise RuntimeError("kernel failed")

    with pytest.raises(RuntimeError):
        recorded.append(measure(boom, None))
    assert recorded == []


def test_timed_call_returns_output():
    out, sample = timed_call(lambda p: p * 2, 21)
    assert out == 42 and sample.value >= 0 and sample.metric_id == "ticks"


def test_transformed_source():
    clock = VirtualClock()
    src = TransformedSource(TickSource(clock), lambda x: x * x + 7)
    assert measure(lambda _: spend(3, clock), None, src).value == 16
    assert src.metric_id != "ticks"


def test_compile_time_not_in_exec_sample():
    from jitune import CandidateSpace, ClosureFactory, SimulatedFactory, build_variant

    space = CandidateSpace.implementations(1)
    baseline = calibrate_overhead(trials=500)
    for latency in (0, 2_000_000, 10_000_000):
        v = build_variant(SimulatedFactory(ClosureFactory(lambda c, p: None), latency), space, 0)
        assert v.compile_cost >= latency
        samples = [measure(v.exec, None).value for _ in range(25)]
        assert statistics.median(samples) <= max(baseline * 3, 20_000)


def test_ordering_fidelity_3x():
    x = 50_000
    agree = 0
    for _ in range(100):
        a = measure(lambda _: spend(x), None).value
        b = measure(lambda _: spend(3 * x), None).value
        agree += a < b
    assert agree >= 99
