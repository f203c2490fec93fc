"""Closed-form performance guarantees for the elimination scheme.

All logarithms are natural.  Throughout, ``n_inactive`` is the number N of
inactive nodes, ``k`` the number of active ones, and the per-slot choice
probability is held at its optimum ``1/(k+1)`` inside the slot-budget
formulas.

The chain behind the budgets: one slot removes an expected fraction
``p(1-p)**k`` of the surviving inactive nodes, so after ``i`` slots the
expected surplus is ``N(1 - p(1-p)**k)**i``.  At ``p = 1/(k+1)`` the decay
constant ``-1/ln(1 - p(1-p)**k)`` is below ``e(k+1)``, and a Markov argument
turns the expected surplus into a tail bound, giving budgets proportional to
``e(k+1)`` times a logarithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "GAUSSIAN_TAIL_CONSTANT",
    "ChannelUsePlan",
    "expected_remaining",
    "slots_for_surplus_bound",
    "slots_for_exact_recovery",
    "theoretical_error_curve",
    "repetition_length",
    "channel_uses_closed_form",
    "plan_channel_uses",
    "total_channel_uses",
]

# Tail constant c for which the averaged-noise excursion probability of the
# repetition code is at most exp(1 - c*m*P/K**2).  The value 1/8 is safe for
# gaussian noise declared with K = sigma: the exact excursion probability is
# 2Q(sqrt(P*m)/(2*sigma)) <= 2*exp(-P*m/(8*sigma**2)) < e*exp(-P*m/(8*sigma**2)).
GAUSSIAN_TAIL_CONSTANT = 0.125


def _require_positive(**values: float) -> None:
    for name, value in values.items():
        if not value > 0:
            raise ValueError(f"{name} must be > 0, got {value!r}")


def expected_remaining(n_inactive: float, k: int, p: float, i: int) -> float:
    """Expected surplus after ``i`` slots: ``N * (1 - p*(1-p)**k)**i``."""
    if n_inactive < 0:
        raise ValueError("n_inactive must be >= 0")
    if k < 0 or i < 0:
        raise ValueError("k and i must be >= 0")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    return n_inactive * (1.0 - p * (1.0 - p) ** k) ** i


def slots_for_surplus_bound(n_inactive: float, k: int, eps: float,
                            surplus_factor: float) -> int:
    """Slot budget after which P(surplus >= surplus_factor * k) <= eps.

    Evaluates ``ceil(e*(k+1) * ln(N / (k * eps * C)))`` with C the surplus
    factor.  When the logarithm's argument is at most 1 (including N = 0,
    nothing to eliminate) the guarantee already holds with zero slots, and 0
    is returned.
    """
    _require_positive(k=k, surplus_factor=surplus_factor)
    if n_inactive < 0:
        raise ValueError("n_inactive must be >= 0")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps!r}")
    argument = n_inactive / (k * eps * surplus_factor)
    if argument <= 1.0:
        return 0
    return math.ceil(math.e * (k + 1) * math.log(argument))


def slots_for_exact_recovery(n_inactive: float, k: int, eps: float) -> int:
    """Slot budget after which the potential set equals the active set w.p. >= 1 - eps.

    This is the surplus bound pushed below one node (surplus factor 1/k):
    ``ceil(e*(k+1) * ln(N/eps))``.  Returns 0 when N = 0.
    """
    _require_positive(k=k)
    if n_inactive < 0:
        raise ValueError("n_inactive must be >= 0")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps!r}")
    argument = n_inactive / eps
    if argument <= 1.0:
        return 0
    return math.ceil(math.e * (k + 1) * math.log(argument))


def theoretical_error_curve(n_inactive: float, k: int, slots: int) -> float:
    """Upper bound on P(surplus > 0 after ``slots`` slots): ``min(1, N*exp(-slots/(e(k+1))))``.

    This is the expected surplus relaxed through ``1 - x <= exp(-x)`` and the
    decay-constant bound, then capped at 1; it is the reference curve the
    Monte Carlo error frequencies are compared against.
    """
    if n_inactive < 0:
        raise ValueError("n_inactive must be >= 0")
    if k < 0:
        raise ValueError("k must be >= 0")
    if slots < 0:
        raise ValueError("slots must be >= 0")
    return min(1.0, n_inactive * math.exp(-slots / (math.e * (k + 1))))


def repetition_length(norm_bound: float, power: float, slot_error: float,
                      tail_constant: float) -> int:
    """Repetitions per slot so a sub-gaussian-noise slot errs w.p. <= ``slot_error``.

    Evaluates ``ceil((K**2 / P) * (ln(1/delta) + 1) / c)`` where K bounds the
    sub-gaussian norm of each noise step, P is the input power budget and c is
    the family's tail constant (see :data:`GAUSSIAN_TAIL_CONSTANT`).  A target
    ``slot_error >= 1`` makes the bound degenerate and is rejected.
    """
    _require_positive(norm_bound=norm_bound, power=power,
                      tail_constant=tail_constant, slot_error=slot_error)
    if slot_error >= 1.0:
        raise ValueError(f"slot_error must lie in (0, 1), got {slot_error!r}")
    count = (norm_bound**2 / power) * (math.log(1.0 / slot_error) + 1.0) / tail_constant
    return math.ceil(count)


@dataclass(frozen=True)
class ChannelUsePlan:
    """Joint budget: slots, per-slot error target, repetitions, total steps.

    ``total`` is the exact integer product ``slots * repetitions`` actually
    spent.  ``closed_form`` is the analytic reference obtained by substituting
    the real-valued slot budget into the product before any rounding; the
    integer ceilings can push ``total`` slightly above it.
    """

    slots: int
    slot_error_target: float
    repetitions: int
    total: int
    closed_form: float


def channel_uses_closed_form(n_inactive: float, k: int, eps: float,
                             norm_bound: float, power: float,
                             tail_constant: float) -> float:
    """Real-valued channel-use budget in fully expanded form.

    ``(K**2/P) * (1/c) * e*(k+1)*ln(N/eps) * (2 + ln(k+1) + ln ln(N/eps) + ln(1/eps))``
    -- algebraically identical to (real-valued slots) * (real-valued
    repetitions at per-slot error eps/slots).  Returns 0.0 when no slots are
    needed at all (``N <= eps``).
    """
    _require_positive(k=k, norm_bound=norm_bound, power=power,
                      tail_constant=tail_constant)
    if n_inactive < 0:
        raise ValueError("n_inactive must be >= 0")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps!r}")
    if n_inactive == 0:
        return 0.0
    log_ratio = math.log(n_inactive / eps)
    if log_ratio <= 0.0:
        return 0.0
    slots_real = math.e * (k + 1) * log_ratio
    bracket = 2.0 + math.log(k + 1) + math.log(log_ratio) + math.log(1.0 / eps)
    return (norm_bound**2 / power) / tail_constant * slots_real * bracket


def plan_channel_uses(n_inactive: float, k: int, eps: float, norm_bound: float,
                      power: float, tail_constant: float) -> ChannelUsePlan:
    """Derive the end-to-end budget for overall error at most ``2*eps``.

    The slot budget covers the elimination failure w.p. <= eps; splitting a
    further eps uniformly over the slots (per-slot target ``eps/slots``) and
    a union bound cover the decoding failures, for ``2*eps`` overall.
    """
    slots = slots_for_exact_recovery(n_inactive, k, eps)
    if slots == 0:
        return ChannelUsePlan(slots=0, slot_error_target=0.0, repetitions=0,
                              total=0, closed_form=0.0)
    slot_error = eps / slots
    repetitions = repetition_length(norm_bound, power, slot_error, tail_constant)
    return ChannelUsePlan(
        slots=slots,
        slot_error_target=slot_error,
        repetitions=repetitions,
        total=slots * repetitions,
        closed_form=channel_uses_closed_form(n_inactive, k, eps, norm_bound,
                                             power, tail_constant),
    )


def total_channel_uses(n_inactive: float, k: int, eps: float, norm_bound: float,
                       power: float, tail_constant: float) -> int:
    """Exact integer channel-use count of the plan (slots * repetitions)."""
    return plan_channel_uses(n_inactive, k, eps, norm_bound, power,
                             tail_constant).total
