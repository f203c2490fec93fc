"""Randomized elimination scheme for detecting active users on a shared channel.

A population of ``total_nodes`` nodes contains exactly ``k`` active ones.  The
receiver maintains a potential set P (initially everyone) and repeats, for a
budget of slots:

1. a chosen set is drawn -- every node joins independently with probability p,
   using common randomness shared by all parties;
2. each node transmits the bit "I am active AND I was chosen";
3. the receiver learns (possibly through a noisy channel code) the disjunction
   of all transmitted bits;
4. on a decoded ``True`` the receiver discards the slot, on a decoded
   ``False`` it removes every chosen node from P.

With the error-free disjunction the active nodes are never removed, and the
number of lingering inactive nodes shrinks geometrically in expectation (see
:mod:`gtmac.bounds`).  The per-slot choice probability that maximises the
shrink rate is ``1/(k+1)``.

Two executions are provided: :func:`run_scheme` simulates every node
individually (and accepts an arbitrary disjunction oracle, e.g. a noisy
channel code), while :func:`run_scheme_fast` samples only the surplus-size
process, which is distributed identically when the oracle is error-free.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Population",
    "SchemeConfig",
    "PotentialSetState",
    "SlotOutcome",
    "FastRunResult",
    "DisjunctionOracle",
    "IdealDisjunctionOracle",
    "optimal_choice_probability",
    "draw_chosen_set",
    "node_transmit_bit",
    "receiver_update",
    "initial_state",
    "run_scheme",
    "run_scheme_fast",
    "slot_rng",
]

_MAX_SEED = 2**64


def optimal_choice_probability(k: int) -> float:
    """Choice probability maximising the single-slot removal rate p*(1-p)**k.

    For ``k`` active nodes the probability that a slot is *useful* (no active
    node chosen) times the marginal removal chance of an inactive node is
    ``p * (1-p)**k``; differentiation gives the maximiser ``1/(k+1)``.
    ``k = 0`` yields 1.0: with nothing to collide with, choose everyone.
    """
    if not isinstance(k, int) or isinstance(k, bool):
        raise TypeError("k must be an int")
    if k < 0:
        raise ValueError("k must be >= 0")
    return 1.0 / (k + 1)


@dataclass(frozen=True)
class Population:
    """A set of nodes labelled ``0..total_nodes-1`` with a known active subset."""

    total_nodes: int
    active_set: frozenset[int]

    def __post_init__(self) -> None:
        if self.total_nodes < 0:
            raise ValueError("total_nodes must be >= 0")
        if not isinstance(self.active_set, frozenset):
            object.__setattr__(self, "active_set", frozenset(self.active_set))
        for node in self.active_set:
            if not (0 <= node < self.total_nodes):
                raise ValueError(f"active node {node} outside 0..{self.total_nodes - 1}")

    @property
    def num_active(self) -> int:
        return len(self.active_set)

    @property
    def num_inactive(self) -> int:
        return self.total_nodes - len(self.active_set)

    def active_mask(self) -> np.ndarray:
        """Boolean vector, entry ``i`` true iff node ``i`` is active."""
        mask = np.zeros(self.total_nodes, dtype=bool)
        if self.active_set:
            mask[sorted(self.active_set)] = True
        return mask

    @staticmethod
    def with_random_active_set(total_nodes: int, num_active: int,
                               rng: np.random.Generator) -> "Population":
        """Draw the active subset uniformly at random (experiment setup)."""
        if not (0 <= num_active <= total_nodes):
            raise ValueError("need 0 <= num_active <= total_nodes")
        chosen = rng.choice(total_nodes, size=num_active, replace=False)
        return Population(total_nodes, frozenset(int(i) for i in chosen))


@dataclass(frozen=True)
class SchemeConfig:
    """Run parameters: per-slot choice probability, slot budget, master seed.

    ``choice_probability`` may take the degenerate boundary values 0 (nothing
    is ever removed) and 1 (needed for the k = 0 case, where
    :func:`optimal_choice_probability` returns 1).  Out-of-range or NaN values
    are construction errors -- nothing is clamped.
    """

    choice_probability: float
    slot_budget: int
    master_seed: int

    def __post_init__(self) -> None:
        p = self.choice_probability
        if not (isinstance(p, (int, float)) and 0.0 <= float(p) <= 1.0):
            raise ValueError(f"choice_probability must lie in [0, 1], got {p!r}")
        object.__setattr__(self, "choice_probability", float(p))
        if self.slot_budget < 0:
            raise ValueError("slot_budget must be >= 0")
        if not (0 <= self.master_seed < _MAX_SEED):
            raise ValueError("master_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class PotentialSetState:
    """Receiver knowledge after ``slot_index`` slots.

    ``surplus`` counts the potentially-but-not-necessarily active overhang
    ``|P| - k``.  While no active node has been evicted (always true under an
    error-free oracle) this equals the number of inactive nodes still in P;
    a noisy oracle can push it negative, which flags an eviction error.
    """

    slot_index: int
    potential_set: frozenset[int]
    num_active: int

    @property
    def surplus(self) -> int:
        return len(self.potential_set) - self.num_active


@dataclass(frozen=True)
class SlotOutcome:
    """Per-slot trace entry of the node-level simulation."""

    chosen_set: frozenset[int]
    any_active_chosen: bool
    decoded_disjunction: bool
    removed_count: int


class DisjunctionOracle(ABC):
    """Decodes the per-slot OR of all transmitted bits.

    ``slot_error_probability`` is the *declared* per-slot error bound delta of
    the decoder; the ideal oracle declares 0.  ``decode_block`` receives one
    boolean message matrix of shape ``(num_transmitters, num_slots)`` -- the
    transmit bits do not depend on the receiver's state, so whole runs can be
    decoded in one call.
    """

    @property
    @abstractmethod
    def slot_error_probability(self) -> float: ...

    @abstractmethod
    def decode_block(self, messages: np.ndarray) -> np.ndarray:
        """Return the decoded disjunction of each column of ``messages``."""


class IdealDisjunctionOracle(DisjunctionOracle):
    """Error-free disjunction: returns the exact column-wise OR."""

    @property
    def slot_error_probability(self) -> float:
        return 0.0

    def decode_block(self, messages: np.ndarray) -> np.ndarray:
        messages = np.asarray(messages, dtype=bool)
        if messages.ndim != 2:
            raise ValueError("messages must be a (num_transmitters, num_slots) matrix")
        return messages.any(axis=0)


def slot_rng(master_seed: int, slot_index: int) -> np.random.Generator:
    """Common-randomness stream for one slot.

    Derived counter-style as ``SeedSequence((master_seed, slot_index))`` so
    that slot ``i``'s draws depend only on the master seed and ``i`` -- every
    party can reproduce the chosen set without seeing the trace history.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((master_seed, slot_index))))


def draw_chosen_set(population: Population, choice_probability: float,
                    rng: np.random.Generator) -> frozenset[int]:
    """Draw the slot's chosen set: each node joins independently w.p. ``choice_probability``."""
    if not 0.0 <= choice_probability <= 1.0:
        raise ValueError("choice_probability must lie in [0, 1]")
    mask = rng.random(population.total_nodes) < choice_probability
    return frozenset(int(i) for i in np.flatnonzero(mask))


def node_transmit_bit(node: int, population: Population, chosen_set: frozenset[int]) -> bool:
    """Transmit rule of a single node: true iff it is active and currently chosen.

    Nodes removed from the receiver's potential set follow the same rule; an
    inactive node never transmits true regardless of its elimination status.
    """
    if not (0 <= node < population.total_nodes):
        raise ValueError(f"node {node} outside population")
    return node in population.active_set and node in chosen_set


def initial_state(population: Population) -> PotentialSetState:
    return PotentialSetState(
        slot_index=0,
        potential_set=frozenset(range(population.total_nodes)),
        num_active=population.num_active,
    )


def receiver_update(state: PotentialSetState, chosen_set: frozenset[int],
                    decoded_disjunction: bool) -> PotentialSetState:
    """One elimination step.

    Decoded true: somebody (apparently) active was chosen -- keep P as is.
    Decoded false: nobody active was chosen -- every chosen node is cleared,
    including chosen nodes that were already cleared earlier (a no-op for
    them).  With a noisy oracle a false decode of a slot that did contain an
    active transmitter evicts that node; the caller detects this through
    ``surplus`` going negative or a failed final comparison.
    """
    if decoded_disjunction:
        new_set = state.potential_set
    else:
        new_set = state.potential_set - chosen_set
    return PotentialSetState(
        slot_index=state.slot_index + 1,
        potential_set=new_set,
        num_active=state.num_active,
    )


def run_scheme(population: Population, config: SchemeConfig,
               oracle: DisjunctionOracle) -> tuple[PotentialSetState, list[SlotOutcome]]:
    """Node-level simulation of the full scheme.

    Per slot: derive the slot RNG from the master seed, draw the chosen set,
    form every node's transmit bit, decode the disjunction through ``oracle``,
    and apply :func:`receiver_update`.  Because transmit bits never depend on
    the receiver's state, all slots are sent to the oracle as one block --
    which is exactly what lets a block channel code stand in for the ideal
    disjunction.

    Returns the final state plus one :class:`SlotOutcome` per slot.  The run
    is a pure function of ``(population, config, oracle)``.
    """
    total = population.total_nodes
    budget = config.slot_budget
    chosen_masks = np.zeros((budget, total), dtype=bool)
    for i in range(budget):
        rng = slot_rng(config.master_seed, i)
        chosen_masks[i] = rng.random(total) < config.choice_probability

    active_mask = population.active_mask()
    messages = (chosen_masks & active_mask).T  # shape (num_transmitters, num_slots)
    decoded = np.asarray(oracle.decode_block(messages), dtype=bool)
    if decoded.shape != (budget,):
        raise ValueError("oracle returned wrong number of decoded slots")

    state = initial_state(population)
    outcomes: list[SlotOutcome] = []
    for i in range(budget):
        chosen = frozenset(int(j) for j in np.flatnonzero(chosen_masks[i]))
        new_state = receiver_update(state, chosen, bool(decoded[i]))
        outcomes.append(SlotOutcome(
            chosen_set=chosen,
            any_active_chosen=bool(messages[:, i].any()),
            decoded_disjunction=bool(decoded[i]),
            removed_count=len(state.potential_set) - len(new_state.potential_set),
        ))
        state = new_state
    return state, outcomes


@dataclass(frozen=True)
class FastRunResult:
    """Surplus-process trace of a fast-path run.

    ``surplus_trace[i]`` is the surplus after ``i`` slots (index 0 is the
    starting value).  ``slots_until_exact`` is the first slot index at which
    the surplus hit zero, or ``None`` if it never did within the budget.
    """

    final_surplus: int
    surplus_trace: tuple[int, ...]
    slots_until_exact: int | None


def run_scheme_fast(population: Population, config: SchemeConfig) -> FastRunResult:
    """Sample only the surplus process, skipping per-node bookkeeping.

    Under the error-free oracle the surplus M evolves as a Markov chain: with
    probability ``1 - (1-p)**k`` some active node is chosen (slot discarded,
    M unchanged); otherwise every surviving inactive node is independently
    chosen with probability p, so the number removed is Binomial(M, p).  Per
    slot this draws the discard indicator and, only on non-discarded slots,
    one binomial variate.  The resulting trace has exactly the distribution
    of ``|P_i| - k`` under :func:`run_scheme` with the ideal oracle, at a
    per-slot cost independent of the population size.

    The draws come from a single sequential stream seeded with
    ``config.master_seed`` (documented layout: one uniform per slot, then the
    binomial when the slot is not discarded).
    """
    p = config.choice_probability
    k = population.num_active
    rng = np.random.default_rng(config.master_seed)
    discard_prob = 1.0 - (1.0 - p) ** k  # P(some active node chosen)

    surplus = population.num_inactive
    trace = [surplus]
    hit: int | None = 0 if surplus == 0 else None
    for i in range(1, config.slot_budget + 1):
        if not (rng.random() < discard_prob):
            surplus -= int(rng.binomial(surplus, p))
        trace.append(surplus)
        if hit is None and surplus == 0:
            hit = i
    return FastRunResult(final_surplus=surplus, surplus_trace=tuple(trace),
                         slots_until_exact=hit)
