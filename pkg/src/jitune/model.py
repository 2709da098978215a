"""Compile-overhead amortization model.

Schedule for ``N`` calls over ``k`` candidates with equal compile cost ``C``:

* calls 1..k       explore candidate i:           C + E_i
* call k+1         rebuild the fastest, run it:   C + E_0
* calls k+2..N     run the fastest:               E_0

so ``E_auto = (k+1)C + sum(E) + (N-k)E_0`` with ``E_0 = min(E)``. Tuning pays
off against a fixed pick costing ``E_p`` per call when ``N*E_p >= E_auto``,
equivalently ``(N-k)(E_p-E_0) >= (k+1)C + sum(E) - k*E_p``.

Integer inputs give exact integer results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import InsufficientCalls

Number = float | int


@dataclass(frozen=True)
class AmortizationInputs:
    C: Number
    E: tuple[Number, ...]
    E_p: Number
    N: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "E", tuple(self.E))
        if not self.E:
            raise ValueError("need at least one variant cost")
        if self.C < 0 or self.E_p < 0 or any(e < 0 for e in self.E):
            raise ValueError("costs must be non-negative")
        if self.N < 0:
            raise ValueError("N must be non-negative")

    @property
    def k(self) -> int:
        return len(self.E)

    @property
    def E_0(self) -> Number:
        return min(self.E)


def _require_tuned(inputs: AmortizationInputs) -> None:
    if inputs.N < inputs.k + 1:
        raise InsufficientCalls(
            f"N={inputs.N} < k+1={inputs.k + 1}: tuning has not finished; sum the raw per-call costs instead"
        )


def e_auto(inputs: AmortizationInputs) -> Number:
    """Total cost of ``N`` autotuned calls."""
    _require_tuned(inputs)
    k, C, E = inputs.k, inputs.C, inputs.E
    return (k + 1) * C + sum(E) + (inputs.N - k) * inputs.E_0


def e_auto_alternatives(inputs: AmortizationInputs) -> dict[str, Number]:
    """The schedule total next to the two other bookkeepings one can write down.

    ``sum_form`` counts ``N-k`` steady-state runs *and* a separate
    finalization run (N+1 executions); ``closed_form`` counts ``N-k-1``
    steady-state runs and charges the finalization call its compile cost
    only (N-1 executions). They differ from the schedule total by ``+E_0``
    and ``-E_0`` respectively.
    """
    _require_tuned(inputs)
    k, C, E, E0, N = inputs.k, inputs.C, inputs.E, inputs.E_0, inputs.N
    return {
        "schedule": e_auto(inputs),
        "sum_form": k * C + sum(E) + C + E0 + (N - k) * E0,
        "closed_form": k * C + sum(E) + C + (N - k - 1) * E0,
    }


def _gain_terms(C: Number, E: Sequence[Number], E_p: Number) -> tuple[int, Number, Number]:
    k = len(E)
    lhs_per_call = E_p - min(E)
    rhs = (k + 1) * C + sum(E) - k * E_p
    return k, lhs_per_call, rhs


def net_gain(inputs: AmortizationInputs) -> Number:
    """``(N-k)(E_p-E_0) - [(k+1)C + sum(E) - k*E_p]``; >= 0 iff tuning pays off."""
    _require_tuned(inputs)
    k, per_call, rhs = _gain_terms(inputs.C, inputs.E, inputs.E_p)
    return (inputs.N - k) * per_call - rhs


def break_even_n(C: Number, E: Sequence[Number], E_p: Number) -> int | None:
    """Smallest ``N >= k+1`` with non-negative net gain, or None if there is none."""
    if not E:
        raise ValueError("need at least one variant cost")
    k, per_call, rhs = _gain_terms(Fraction(C), [Fraction(e) for e in E], Fraction(E_p))
    if per_call <= 0:
        # the gain can only shrink (or stay flat) as N grows
        return k + 1 if per_call >= rhs else None
    n = k + max(1, math.ceil(rhs / per_call))
    return n


@dataclass(frozen=True)
class RegimeThresholds:
    """Cut-offs for the three favourable conditions.

    * quick: ``k/N <= max_k_over_n``
    * few slow variants: ``sum(E) <= max_slow_ratio * k * E_p``
    * significant gain: ``(E_p - E_0)/E_p >= min_gain_fraction``
    """

    max_k_over_n: float = 0.1
    max_slow_ratio: float = 2.0
    min_gain_fraction: float = 0.05


@dataclass(frozen=True)
class Indicator:
    label: str
    value: float | None
    favorable: bool | None
    detail: str


@dataclass(frozen=True)
class RegimeReport:
    quick: Indicator
    few_slow_variants: Indicator
    significant_gain: Indicator
    thresholds: RegimeThresholds = field(default_factory=RegimeThresholds)

    @property
    def indicators(self) -> tuple[Indicator, Indicator, Indicator]:
        return (self.quick, self.few_slow_variants, self.significant_gain)

    @property
    def all_favorable(self) -> bool:
        return all(i.favorable for i in self.indicators)

    def lines(self) -> list[str]:
        out = []
        for ind in self.indicators:
            verdict = "n/a" if ind.favorable is None else ("favorable" if ind.favorable else "unfavorable")
            out.append(f"{ind.label}: {verdict} ({ind.detail})")
        return out


def regime_report(
    C: Number,
    E: Sequence[Number],
    E_p: Number,
    N: int | None = None,
    thresholds: RegimeThresholds | None = None,
) -> RegimeReport:
    """Diagnose whether the three conditions for profitable tuning hold.

    ``C`` does not enter any indicator; it is accepted so callers can pass
    the same tuple everywhere.
    """
    th = thresholds or RegimeThresholds()
    k = len(E)
    E0 = min(E)

    if N is None or N <= 0:
        quick = Indicator("(a) k << N", None, None, "N not given")
    else:
        ratio = k / N
        quick = Indicator("(a) k << N", ratio, ratio <= th.max_k_over_n, f"k/N = {ratio:.4g}, limit {th.max_k_over_n:g}")

    denom = k * E_p
    slow_ratio = math.inf if denom == 0 else sum(E) / denom
    if denom == 0 and sum(E) == 0:
        slow_ratio = 1.0
    few_slow = Indicator(
        "(b) few slow variants",
        slow_ratio,
        slow_ratio <= th.max_slow_ratio,
        f"sum(E)/(k*E_p) = {slow_ratio:.4g}, limit {th.max_slow_ratio:g}",
    )

    gain = E_p - E0
    frac = gain / E_p if E_p > 0 else (0.0 if gain == 0 else -math.inf)
    significant = Indicator(
        "(c) significant gain",
        float(gain),
        frac >= th.min_gain_fraction,
        f"E_p - E_0 = {gain:.6g} ({frac:.2%} of E_p), need >= {th.min_gain_fraction:.0%}",
    )
    return RegimeReport(quick, few_slow, significant, th)
