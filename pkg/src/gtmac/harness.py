"""Monte Carlo harness: run-until-exact experiments, traces, end-to-end trials, CSV.

Reproducibility contract
------------------------
A batch is fully determined by its :class:`ExperimentConfig` (which includes
``seed_base``).  Trial ``t`` uses the 64-bit seed
``trial_seed(seed_base, t)``, obtained by hashing the pair
``(seed_base, t)`` through ``numpy.random.SeedSequence`` -- so trials are
independent streams, any trial can be replayed in isolation, and results do
not depend on execution order or on how many workers ran the batch.

End-to-end trials split their per-trial seed into three child streams
(``SeedSequence(seed).spawn(3)``): experiment setup (which nodes are active),
the scheme's common randomness, and the channel noise.

CSV files are written with a header row, comma separators, ``\\n`` line
endings and UTF-8 encoding; floats are rendered with ``repr`` so parsing
them back recovers the exact values.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bounds
from .channel import (ChannelSpec, NoiseModel, RepetitionCodeParams,
                      RepetitionDisjunctionOracle)
from .scheme import Population, SchemeConfig, run_scheme, run_scheme_fast

__all__ = [
    "DEFAULT_TRIALS",
    "ExperimentConfig",
    "RunRecord",
    "ErrorCurve",
    "ExpectationTrace",
    "EndToEndSummary",
    "trial_seed",
    "default_slot_cap",
    "default_slot_grid",
    "simulate_until_exact",
    "run_until_exact_batch",
    "build_error_curve",
    "expectation_trace",
    "end_to_end_trial",
    "run_end_to_end_batch",
    "export_csv",
    "read_error_curve",
    "read_expectation_trace",
    "read_end_to_end_summary",
]

DEFAULT_TRIALS = 20_000  # default Monte Carlo sample size per experiment


def trial_seed(seed_base: int, index: int) -> int:
    """64-bit seed of trial ``index``: SeedSequence((seed_base, index)) hashed down."""
    if index < 0:
        raise ValueError("index must be >= 0")
    ss = np.random.SeedSequence((seed_base, index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def default_slot_cap(n_inactive: int, k: int) -> int:
    """Hard stop for run-until-exact: 100x the typical e(k+1)ln N scale."""
    grown = max(1.0, math.log(max(n_inactive, 1)))
    return math.ceil(100.0 * math.e * (k + 1) * grown)


def default_slot_grid(max_slot: int = 2500, step: int = 1) -> tuple[int, ...]:
    """Slot grid the error curve is evaluated on: 0..max_slot in ``step`` strides."""
    if max_slot < 0 or step < 1:
        raise ValueError("need max_slot >= 0 and step >= 1")
    return tuple(range(0, max_slot + 1, step))


@dataclass(frozen=True)
class ExperimentConfig:
    """Aggregate description of one batch experiment.

    ``mode`` selects what the batch runners do: ``"until_exact"`` (run to an
    exact potential set, error curves), ``"trace"`` (fixed horizon, surplus
    expectation trace), or ``"end_to_end"`` (noisy channel, repetition code).
    ``choice_probability`` of ``None`` means the optimum ``1/(k+1)``.  The
    channel fields are only consulted in end-to-end mode.
    """

    n_inactive: int
    k: int
    mode: str = "until_exact"
    choice_probability: float | None = None
    trials: int = DEFAULT_TRIALS
    seed_base: int = 0
    slot_cap: int | None = None
    horizon: int | None = None
    collect_traces: bool = False
    eps: float | None = None
    noise: NoiseModel | None = None
    norm_bound: float | None = None
    power: float | None = None
    tail_constant: float = bounds.GAUSSIAN_TAIL_CONSTANT

    def __post_init__(self) -> None:
        if self.mode not in ("until_exact", "trace", "end_to_end"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.n_inactive < 0 or self.k < 0:
            raise ValueError("n_inactive and k must be >= 0")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mode == "trace" and (self.horizon is None or self.horizon < 1):
            raise ValueError("trace mode needs a horizon >= 1")
        if self.mode == "end_to_end":
            missing = [name for name in ("eps", "noise", "norm_bound", "power")
                       if getattr(self, name) is None]
            if missing:
                raise ValueError(f"end_to_end mode needs {', '.join(missing)}")

    def effective_choice_probability(self) -> float:
        if self.choice_probability is not None:
            return self.choice_probability
        return 1.0 / (self.k + 1)


@dataclass(frozen=True)
class RunRecord:
    """Result of one trial.

    ``slots_until_exact`` is the slot at which the potential set became the
    active set; ``None`` means the trial was censored at the slot cap (it
    counts as a failure at every grid point).  ``success`` is only set by
    end-to-end trials (exact recovery within the fixed budget).
    """

    trial_seed: int
    slots_until_exact: int | None
    surplus_trace: tuple[int, ...] | None = None
    success: bool | None = None


@dataclass(frozen=True)
class ErrorCurve:
    """Observed error frequency per grid slot, paired with the analytic bound."""

    slot_grid: tuple[int, ...]
    observed_frequency: tuple[float, ...]
    theoretical_bound: tuple[float, ...]
    trials: int


@dataclass(frozen=True)
class ExpectationTrace:
    """Per-slot surplus mean with standard errors and the analytic prediction."""

    slots: tuple[int, ...]
    empirical_mean: tuple[float, ...]
    std_error: tuple[float, ...]
    predicted_mean: tuple[float, ...]


@dataclass(frozen=True)
class EndToEndSummary:
    """Failure statistics of an end-to-end batch plus its channel budget."""

    trials: int
    failures: int
    failure_rate: float
    two_epsilon: float
    slots: int
    repetitions: int
    total_channel_uses: int


def simulate_until_exact(n_inactive: int, k: int, p: float, seed: int,
                         slot_cap: int | None = None,
                         collect_trace: bool = False) -> RunRecord:
    """Run the fast-path scheme slot by slot until the surplus reaches zero.

    Uses the surplus-process sampler (identical in law to the node-level
    scheme with the error-free oracle).  Stops at ``slot_cap`` (default
    :func:`default_slot_cap`) and reports a censored record if the surplus is
    still positive there.
    """
    if n_inactive < 0 or k < 0:
        raise ValueError("n_inactive and k must be >= 0")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    cap = default_slot_cap(n_inactive, k) if slot_cap is None else slot_cap
    if cap < 0:
        raise ValueError("slot_cap must be >= 0")

    rng = np.random.default_rng(seed)
    discard_prob = 1.0 - (1.0 - p) ** k
    surplus = n_inactive
    trace = [surplus] if collect_trace else None
    hit: int | None = 0 if surplus == 0 else None
    slot = 0
    while hit is None and slot < cap:
        slot += 1
        if not (rng.random() < discard_prob):
            surplus -= int(rng.binomial(surplus, p))
        if trace is not None:
            trace.append(surplus)
        if surplus == 0:
            hit = slot
    return RunRecord(trial_seed=seed, slots_until_exact=hit,
                     surplus_trace=None if trace is None else tuple(trace))


def _until_exact_chunk(args: tuple) -> list[RunRecord]:
    cfg, lo, hi = args
    p = cfg.effective_choice_probability()
    return [
        simulate_until_exact(cfg.n_inactive, cfg.k, p,
                             trial_seed(cfg.seed_base, t),
                             slot_cap=cfg.slot_cap,
                             collect_trace=cfg.collect_traces)
        for t in range(lo, hi)
    ]


def _chunk_ranges(trials: int, workers: int) -> list[tuple[int, int]]:
    chunk = max(1, math.ceil(trials / (workers * 8)))
    return [(lo, min(lo + chunk, trials)) for lo in range(0, trials, chunk)]


def _run_chunked(worker, cfg: ExperimentConfig, workers: int) -> list:
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1:
        return worker((cfg, 0, cfg.trials))
    tasks = [(cfg, lo, hi) for lo, hi in _chunk_ranges(cfg.trials, workers)]
    out: list = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(worker, tasks):
            out.extend(part)
    return out


def run_until_exact_batch(cfg: ExperimentConfig, workers: int = 1) -> list[RunRecord]:
    """All trials of an until-exact experiment, in trial order."""
    if cfg.mode != "until_exact":
        raise ValueError("config mode must be 'until_exact'")
    return _run_chunked(_until_exact_chunk, cfg, workers)


def build_error_curve(records: list[RunRecord], slot_grid: tuple[int, ...],
                      n_inactive: int, k: int) -> ErrorCurve:
    """Observed frequency of non-recovery per grid slot.

    A trial counts as failed at grid slot L when it needed more than L slots
    (``slots_until_exact > L``); censored trials count as failed everywhere.
    """
    if not records:
        raise ValueError("need at least one record")
    finished = np.array([r.slots_until_exact if r.slots_until_exact is not None else -1
                         for r in records])
    grid = np.asarray(slot_grid)
    if grid.ndim != 1 or len(grid) == 0 or np.any(grid < 0):
        raise ValueError("slot_grid must be a nonempty sequence of slots >= 0")
    censored = finished < 0
    observed = [
        float((censored | (finished > int(level))).mean()) for level in grid
    ]
    bound = [bounds.theoretical_error_curve(n_inactive, k, int(level)) for level in grid]
    return ErrorCurve(slot_grid=tuple(int(v) for v in grid),
                      observed_frequency=tuple(observed),
                      theoretical_bound=tuple(bound),
                      trials=len(records))


def expectation_trace(n_inactive: int, k: int, p: float, trials: int,
                      horizon: int, seed_base: int = 0) -> ExpectationTrace:
    """Empirical mean surplus per slot over ``trials`` fast-path runs.

    Slot 0 is the deterministic starting surplus.  ``std_error`` is the
    sample standard deviation over trials divided by sqrt(trials); the
    prediction column is :func:`gtmac.bounds.expected_remaining`.
    """
    if trials < 2:
        raise ValueError("trials must be >= 2 for a standard error")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    population = Population(n_inactive + k, frozenset(range(k)))
    sums = np.zeros(horizon + 1)
    sums_sq = np.zeros(horizon + 1)
    for t in range(trials):
        config = SchemeConfig(p, horizon, trial_seed(seed_base, t))
        run = run_scheme_fast(population, config)
        arr = np.asarray(run.surplus_trace, dtype=float)
        sums += arr
        sums_sq += arr * arr
    mean = sums / trials
    variance = np.maximum(sums_sq - trials * mean * mean, 0.0) / (trials - 1)
    std_error = np.sqrt(variance / trials)
    predicted = [bounds.expected_remaining(n_inactive, k, p, i) for i in range(horizon + 1)]
    return ExpectationTrace(
        slots=tuple(range(horizon + 1)),
        empirical_mean=tuple(float(v) for v in mean),
        std_error=tuple(float(v) for v in std_error),
        predicted_mean=tuple(float(v) for v in predicted),
    )


def end_to_end_trial(n_inactive: int, k: int, eps: float, noise: NoiseModel,
                     norm_bound: float, power: float, tail_constant: float,
                     seed: int) -> RunRecord:
    """One full noisy-channel trial: plan budgets, run the scheme, check recovery.

    The slot budget targets elimination error ``eps`` and the repetition
    length targets per-slot decoding error ``eps/slots``, so the failure
    probability is at most ``2*eps``.  ``noise`` is the channel's actual
    noise; ``norm_bound`` is the *declared* K the code is sized for, which
    must dominate the noise's true norm but need not equal it.

    Success means the final potential set is exactly the active set.
    """
    plan = bounds.plan_channel_uses(n_inactive, k, eps, norm_bound, power,
                                    tail_constant)
    total_nodes = n_inactive + k
    setup_ss, scheme_ss, noise_ss = np.random.SeedSequence(seed).spawn(3)
    setup_rng = np.random.Generator(np.random.PCG64(setup_ss))
    population = Population.with_random_active_set(total_nodes, k, setup_rng)

    master_seed = int(scheme_ss.generate_state(1, dtype=np.uint64)[0])
    config = SchemeConfig(1.0 / (k + 1), plan.slots, master_seed)
    channel = ChannelSpec(power=power, noise=noise, num_transmitters=total_nodes)
    params = RepetitionCodeParams.for_power(plan.repetitions, plan.slots,
                                            plan.slot_error_target, power)
    oracle = RepetitionDisjunctionOracle(
        channel, params, np.random.Generator(np.random.PCG64(noise_ss)))

    final_state, _ = run_scheme(population, config, oracle)
    return RunRecord(trial_seed=seed, slots_until_exact=None,
                     success=final_state.potential_set == population.active_set)


def _end_to_end_chunk(args: tuple) -> list[RunRecord]:
    cfg, lo, hi = args
    return [
        end_to_end_trial(cfg.n_inactive, cfg.k, cfg.eps, cfg.noise,
                         cfg.norm_bound, cfg.power, cfg.tail_constant,
                         trial_seed(cfg.seed_base, t))
        for t in range(lo, hi)
    ]


def run_end_to_end_batch(cfg: ExperimentConfig,
                         workers: int = 1) -> tuple[EndToEndSummary, list[RunRecord]]:
    """All end-to-end trials plus the aggregate failure summary."""
    if cfg.mode != "end_to_end":
        raise ValueError("config mode must be 'end_to_end'")
    records = _run_chunked(_end_to_end_chunk, cfg, workers)
    failures = sum(1 for r in records if not r.success)
    plan = bounds.plan_channel_uses(cfg.n_inactive, cfg.k, cfg.eps,
                                    cfg.norm_bound, cfg.power, cfg.tail_constant)
    summary = EndToEndSummary(
        trials=len(records),
        failures=failures,
        failure_rate=failures / len(records),
        two_epsilon=2.0 * cfg.eps,
        slots=plan.slots,
        repetitions=plan.repetitions,
        total_channel_uses=plan.total,
    )
    return summary, records


# --- CSV layer ---------------------------------------------------------------

_ERROR_CURVE_HEADER = ["l", "observed_frequency", "theoretical_bound", "trials"]
_TRACE_HEADER = ["slot", "empirical_mean", "std_error", "predicted_mean"]
_END_TO_END_HEADER = ["trials", "failures", "failure_rate", "two_epsilon",
                      "l", "m", "total_channel_uses"]


def _write_rows(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def export_csv(result, path: str) -> None:
    """Write a result object to ``path``; identical inputs give identical bytes."""
    if isinstance(result, ErrorCurve):
        rows = [[l, f, b, result.trials]
                for l, f, b in zip(result.slot_grid, result.observed_frequency,
                                   result.theoretical_bound)]
        _write_rows(path, _ERROR_CURVE_HEADER, rows)
    elif isinstance(result, ExpectationTrace):
        rows = [list(r) for r in zip(result.slots, result.empirical_mean,
                                     result.std_error, result.predicted_mean)]
        _write_rows(path, _TRACE_HEADER, rows)
    elif isinstance(result, EndToEndSummary):
        rows = [[result.trials, result.failures, result.failure_rate,
                 result.two_epsilon, result.slots, result.repetitions,
                 result.total_channel_uses]]
        _write_rows(path, _END_TO_END_HEADER, rows)
    else:
        raise TypeError(f"no CSV layout for {type(result).__name__}")


def _read_rows(path: str, expected_header: list[str]) -> list[list[str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != expected_header:
            raise ValueError(f"unexpected header {header!r} in {path}")
        return list(reader)


def read_error_curve(path: str) -> ErrorCurve:
    rows = _read_rows(path, _ERROR_CURVE_HEADER)
    if not rows:
        raise ValueError(f"{path} has no data rows")
    return ErrorCurve(
        slot_grid=tuple(int(r[0]) for r in rows),
        observed_frequency=tuple(float(r[1]) for r in rows),
        theoretical_bound=tuple(float(r[2]) for r in rows),
        trials=int(rows[0][3]),
    )


def read_expectation_trace(path: str) -> ExpectationTrace:
    rows = _read_rows(path, _TRACE_HEADER)
    return ExpectationTrace(
        slots=tuple(int(r[0]) for r in rows),
        empirical_mean=tuple(float(r[1]) for r in rows),
        std_error=tuple(float(r[2]) for r in rows),
        predicted_mean=tuple(float(r[3]) for r in rows),
    )


def read_end_to_end_summary(path: str) -> EndToEndSummary:
    rows = _read_rows(path, _END_TO_END_HEADER)
    if len(rows) != 1:
        raise ValueError(f"expected exactly one summary row in {path}")
    r = rows[0]
    return EndToEndSummary(
        trials=int(r[0]), failures=int(r[1]), failure_rate=float(r[2]),
        two_epsilon=float(r[3]), slots=int(r[4]), repetitions=int(r[5]),
        total_channel_uses=int(r[6]),
    )
