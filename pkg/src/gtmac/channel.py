"""Adder channel with sub-gaussian noise, and a repetition code for disjunctions.

The physical channel adds all transmitted reals plus a noise term:
``Y_t = sum_r x_{r,t} + Z_t``.  Inputs obey a peak power constraint
``|x| <= sqrt(P)``.  The noise steps are independent, zero mean, and
sub-gaussian with norm at most K, where the norm of Z is
``sup_n (E|Z|**n)**(1/n) / sqrt(n)``.  The noise distribution may change from
step to step (an arbitrarily varying schedule) as long as every step respects
the same K.

To convey one disjunction per slot, each transmitter repeats ``sqrt(P)`` for
``m`` steps when its bit is true and ``0`` when it is false; the receiver
averages the slot and compares against ``sqrt(P)/2``.  Since senders only add
nonnegative amounts, the slot average is the averaged noise when all bits are
false and at least ``sqrt(P)`` plus the averaged noise otherwise -- so the
decoder errs only if the averaged noise strays ``sqrt(P)/2`` from zero,
which happens with probability at most ``exp(1 - c*m*P/K**2)`` (tail constant
c per family; 1/8 is valid for gaussian noise).  :func:`repetition_length`
in :mod:`gtmac.bounds` inverts that bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scheme import DisjunctionOracle

__all__ = [
    "NoiseModel",
    "gaussian",
    "uniform",
    "rademacher",
    "schedule",
    "ChannelSpec",
    "RepetitionCodeParams",
    "SlotTransmission",
    "sample_noise",
    "sample_noise_block",
    "repetition_encode",
    "channel_step",
    "threshold_decode",
    "transmit_block",
    "transmit_block_detailed",
    "slot_noise_averages",
    "gaussian_slot_error_exact",
    "RepetitionDisjunctionOracle",
]

_FAMILIES = ("gaussian", "uniform", "rademacher", "schedule")


@dataclass(frozen=True)
class NoiseModel:
    """One noise family (or a per-step schedule of families) with its norm bound.

    ``scale`` means: standard deviation for ``gaussian``, half-width for
    ``uniform`` on [-a, a], magnitude for ``rademacher`` (fair +/-a).  A
    ``schedule`` cycles through its member models, step t using member
    ``t mod len(members)``; members must be base families.  ``norm_bound``
    is a valid upper bound on the sub-gaussian norm of every step:

    * gaussian(sigma): the norm is ``sigma*sqrt(2/pi)`` (the n = 1 moment
      dominates), so K = sigma is an upper bound;
    * uniform(a): the norm is a/2;  K = a is an upper bound;
    * rademacher(a): the norm is exactly a;
    * schedule: the maximum over members.

    A zero scale is allowed and degenerates to noiseless steps.
    """

    family: str
    scale: float = 0.0
    members: tuple["NoiseModel", ...] = ()

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        if self.family == "schedule":
            if not self.members:
                raise ValueError("schedule needs at least one member model")
            if any(m.family == "schedule" for m in self.members):
                raise ValueError("schedules cannot nest")
        else:
            if self.members:
                raise ValueError("only schedules take member models")
            if not (isinstance(self.scale, (int, float)) and self.scale >= 0.0
                    and math.isfinite(self.scale)):
                raise ValueError(f"scale must be a finite nonnegative real, got {self.scale!r}")
            object.__setattr__(self, "scale", float(self.scale))

    @property
    def norm_bound(self) -> float:
        if self.family == "schedule":
            return max(m.norm_bound for m in self.members)
        return self.scale

    def model_at(self, step: int) -> "NoiseModel":
        """Base family governing absolute step index ``step``."""
        if self.family == "schedule":
            return self.members[step % len(self.members)]
        return self


def gaussian(sigma: float) -> NoiseModel:
    return NoiseModel("gaussian", scale=sigma)


def uniform(half_width: float) -> NoiseModel:
    return NoiseModel("uniform", scale=half_width)


def rademacher(magnitude: float) -> NoiseModel:
    return NoiseModel("rademacher", scale=magnitude)


def schedule(*members: NoiseModel) -> NoiseModel:
    return NoiseModel("schedule", members=tuple(members))


def sample_noise(model: NoiseModel, step: int, rng: np.random.Generator) -> float:
    """Draw the noise of one channel step (``step`` resolves schedules)."""
    base = model.model_at(step)
    if base.family == "gaussian":
        return float(rng.normal(0.0, base.scale))
    if base.family == "uniform":
        if base.scale == 0.0:
            return 0.0
        return float(rng.uniform(-base.scale, base.scale))
    # rademacher
    return float(base.scale * (2 * rng.integers(0, 2) - 1))


def sample_noise_block(model: NoiseModel, start_step: int, count: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Vectorised draw for steps ``start_step .. start_step + count - 1``.

    For a schedule the draws for each member family are generated in member
    order and scattered to their step positions, so the layout is
    deterministic for a given stream; base families consume one vectorised
    call.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if model.family == "gaussian":
        return rng.normal(0.0, model.scale, size=count)
    if model.family == "uniform":
        if model.scale == 0.0:
            return np.zeros(count)
        return rng.uniform(-model.scale, model.scale, size=count)
    if model.family == "rademacher":
        return model.scale * (2.0 * rng.integers(0, 2, size=count) - 1.0)
    out = np.empty(count)
    period = len(model.members)
    offsets = (np.arange(count) + start_step) % period
    for j, member in enumerate(model.members):
        idx = np.flatnonzero(offsets == j)
        if idx.size:
            out[idx] = sample_noise_block(member, 0, idx.size, rng)
    return out


@dataclass(frozen=True)
class ChannelSpec:
    """Power budget, noise model, and transmitter count of one channel."""

    power: float
    noise: NoiseModel
    num_transmitters: int

    def __post_init__(self) -> None:
        if not self.power > 0:
            raise ValueError("power must be > 0")
        if self.num_transmitters < 1:
            raise ValueError("num_transmitters must be >= 1")


@dataclass(frozen=True)
class RepetitionCodeParams:
    """Block shape of the repetition disjunction code.

    ``threshold`` must equal ``sqrt(P)/2`` of the channel the code runs on;
    use :meth:`for_power` to derive it.
    """

    repetitions: int
    slot_count: int
    target_slot_error: float
    threshold: float

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.slot_count < 0:
            raise ValueError("slot_count must be >= 0")
        if not 0.0 <= self.target_slot_error < 1.0:
            raise ValueError("target_slot_error must lie in [0, 1)")
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")

    @staticmethod
    def for_power(repetitions: int, slot_count: int, target_slot_error: float,
                  power: float) -> "RepetitionCodeParams":
        return RepetitionCodeParams(repetitions, slot_count, target_slot_error,
                                    threshold=math.sqrt(power) / 2.0)


@dataclass(frozen=True)
class SlotTransmission:
    """Channel outputs of one slot plus diagnostics only a simulator can know."""

    step_outputs: tuple[float, ...]
    slot_average: float
    averaged_noise: float


def repetition_encode(bit: bool, repetitions: int, power: float) -> np.ndarray:
    """Codeword of one sender for one slot: m copies of sqrt(P) (true) or 0 (false)."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if not power > 0:
        raise ValueError("power must be > 0")
    level = math.sqrt(power) if bit else 0.0
    return np.full(repetitions, level)


def channel_step(inputs: np.ndarray, noise_draw: float, power: float) -> float:
    """One use of the adder channel: sum of inputs plus noise.

    Every input must satisfy the peak constraint ``|x| <= sqrt(P)``; a
    violation is an error, not something to clip.
    """
    arr = np.asarray(inputs, dtype=float)
    if not power > 0:
        raise ValueError("power must be > 0")
    limit = math.sqrt(power) * (1.0 + 1e-12)  # tolerate representation error of sqrt
    if arr.size and float(np.max(np.abs(arr))) > limit:
        raise ValueError("channel input violates the power constraint")
    return float(arr.sum() + noise_draw)


def threshold_decode(slot: SlotTransmission, power: float) -> bool:
    """Slot average above sqrt(P)/2 decodes true; ties decode false."""
    return slot.slot_average > math.sqrt(power) / 2.0


def slot_noise_averages(model: NoiseModel, repetitions: int, slot_count: int,
                        rng: np.random.Generator, start_step: int = 0) -> np.ndarray:
    """Averaged noise of ``slot_count`` consecutive slots of ``repetitions`` steps.

    Diagnostic helper (the receiver cannot observe it); also the hot path for
    large Monte Carlo runs of the decoder, since for the repetition code the
    slot average is (number of true senders)*sqrt(P) plus this quantity.
    """
    draws = sample_noise_block(model, start_step, repetitions * slot_count, rng)
    return draws.reshape(slot_count, repetitions).mean(axis=1)


def _superposed_slot_levels(messages: np.ndarray, power: float) -> np.ndarray:
    """Noiseless channel sum per slot: each true sender adds sqrt(P) every step.

    Both emitted symbol levels (0 and sqrt(P)) satisfy the peak constraint by
    construction, which is asserted once here instead of per step.
    """
    messages = np.asarray(messages, dtype=bool)
    if messages.ndim != 2:
        raise ValueError("messages must be a (num_transmitters, num_slots) matrix")
    root_power = math.sqrt(power)
    assert abs(root_power) <= root_power and 0.0 <= root_power  # symbol levels obey |x| <= sqrt(P)
    return messages.sum(axis=0) * root_power


def transmit_block(messages: np.ndarray, params: RepetitionCodeParams,
                   channel: ChannelSpec, rng: np.random.Generator,
                   start_step: int = 0) -> np.ndarray:
    """Encode, superpose, add noise, and threshold-decode a block of slots.

    ``messages`` has shape ``(num_transmitters, slot_count)``.  Returns the
    decoded boolean per slot.  The step index for schedule noise starts at
    ``start_step`` and advances by ``repetitions`` per slot.
    """
    messages = np.asarray(messages, dtype=bool)
    if messages.shape != (channel.num_transmitters, params.slot_count):
        raise ValueError(
            f"messages shape {messages.shape} does not match "
            f"({channel.num_transmitters}, {params.slot_count})")
    expected = math.sqrt(channel.power) / 2.0
    if not math.isclose(params.threshold, expected, rel_tol=1e-12):
        raise ValueError("threshold must equal sqrt(power)/2 for this channel")
    levels = _superposed_slot_levels(messages, channel.power)
    averaged = slot_noise_averages(channel.noise, params.repetitions,
                                   params.slot_count, rng, start_step)
    return (levels + averaged) > params.threshold


def transmit_block_detailed(
        messages: np.ndarray, params: RepetitionCodeParams, channel: ChannelSpec,
        rng: np.random.Generator, start_step: int = 0,
) -> tuple[np.ndarray, list[SlotTransmission]]:
    """Like :func:`transmit_block` but also returns per-slot diagnostics."""
    messages = np.asarray(messages, dtype=bool)
    if messages.shape != (channel.num_transmitters, params.slot_count):
        raise ValueError(
            f"messages shape {messages.shape} does not match "
            f"({channel.num_transmitters}, {params.slot_count})")
    levels = _superposed_slot_levels(messages, channel.power)
    noise = sample_noise_block(channel.noise, start_step,
                               params.repetitions * params.slot_count, rng)
    noise = noise.reshape(params.slot_count, params.repetitions)
    slots = []
    decoded = np.empty(params.slot_count, dtype=bool)
    for i in range(params.slot_count):
        steps = levels[i] + noise[i]
        slot = SlotTransmission(
            step_outputs=tuple(float(y) for y in steps),
            slot_average=float(steps.mean()),
            averaged_noise=float(noise[i].mean()),
        )
        slots.append(slot)
        decoded[i] = threshold_decode(slot, channel.power)
    return decoded, slots


def gaussian_slot_error_exact(sigma: float, power: float, repetitions: int) -> float:
    """Exact P(|averaged gaussian noise| >= sqrt(P)/2) = 2*Q(sqrt(P*m)/(2*sigma)).

    The averaged noise of m i.i.d. N(0, sigma^2) steps is N(0, sigma^2/m);
    this is the probability that it leaves the decoding-safe band.  It upper
    bounds the decoder's actual error on any message pattern (for all-false
    slots the error is one-sided, half this value).
    """
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    if not power > 0:
        raise ValueError("power must be > 0")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    x = math.sqrt(power * repetitions) / (2.0 * sigma)
    return math.erfc(x / math.sqrt(2.0))


class RepetitionDisjunctionOracle(DisjunctionOracle):
    """Disjunction oracle realised by the repetition code over a noisy channel.

    Holds its own noise stream (kept separate from the scheme's common
    randomness) and a running step counter so consecutive decode calls keep
    advancing any noise schedule.
    """

    def __init__(self, channel: ChannelSpec, params: RepetitionCodeParams,
                 rng: np.random.Generator):
        expected = math.sqrt(channel.power) / 2.0
        if not math.isclose(params.threshold, expected, rel_tol=1e-12):
            raise ValueError("threshold must equal sqrt(power)/2 for this channel")
        self.channel = channel
        self.params = params
        self.rng = rng
        self._next_step = 0

    @property
    def slot_error_probability(self) -> float:
        return self.params.target_slot_error

    def decode_block(self, messages: np.ndarray) -> np.ndarray:
        messages = np.asarray(messages, dtype=bool)
        slot_count = messages.shape[1]
        params = self.params
        if slot_count != params.slot_count:
            params = RepetitionCodeParams(params.repetitions, slot_count,
                                          params.target_slot_error, params.threshold)
        decoded = transmit_block(messages, params, self.channel, self.rng,
                                 start_step=self._next_step)
        self._next_step += params.repetitions * slot_count
        return decoded
