"""
Core domain types and exact envy predicates.

An Instance holds n agents with positive integer weights and an n x m matrix of
non-negative integer utilities. An Allocation maps every agent to a bundle of
resource indices; bundles are pairwise disjoint. Agents and resources are
0-based internally and rendered 1-based (a1, r1, ...) in every user-facing
string.

All predicates compare integers by cross-multiplication, never by division:

    Sum-envy  i -> j :  u_i(B_i) < u_i(B_j)
    Avg-envy  i -> j :  u_i(B_i) * w_j < u_i(B_j) * w_i
    SumAvg-envy      :  both of the above

Products are bounded by max(u) * m * max(w); Python ints make the scalar
predicates exact for any size, and the vectorized oracle in exact.py checks the
bound before choosing an int64 array dtype. Individual weights and utilities
are capped at MAX_VALUE (2**62) so they always fit the int64 storage arrays.

Called by: every other fairalloc module.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class FairnessConcept(str, Enum):
    """Which envy predicate an allocation is judged by."""

    SEF = "sef"
    AEF = "aef"
    SAEF = "saef"

    @property
    def label(self) -> str:
        return {"sef": "Sum", "aef": "Avg", "saef": "SumAvg"}[self.value]


class ProblemKind(str, Enum):
    """Complete allocation of all resources, or one house per agent."""

    ALLOCATION = "allocation"
    HOUSE = "house"


ALL_CONCEPTS: tuple[FairnessConcept, ...] = (
    FairnessConcept.SEF,
    FairnessConcept.AEF,
    FairnessConcept.SAEF,
)

# Largest weight or utility an Instance accepts.
MAX_VALUE = 2**62


def _integer_array(values, what: str) -> np.ndarray:
    """values as an int64 array; non-integral or out-of-range input raises ValueError."""
    array = np.asarray(values)
    if array.size == 0:
        return array.astype(np.int64)
    if array.dtype.kind == "O":
        if not all(isinstance(v, (int, np.integer)) and not isinstance(v, bool) for v in array.ravel()):
            raise ValueError(f"{what} must be integers")
        raise ValueError(f"{what} must not exceed {MAX_VALUE}")
    if array.dtype.kind not in "iu":
        raise ValueError(f"{what} must be integers, got {array.dtype} values")
    if array.dtype.kind == "u" and int(array.max()) > MAX_VALUE:
        raise ValueError(f"{what} must not exceed {MAX_VALUE}")
    array = array.astype(np.int64)
    if int(array.max()) > MAX_VALUE:
        raise ValueError(f"{what} must not exceed {MAX_VALUE}")
    return array


# ---------------------------------------------------------------------------
# Instance
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Instance:
    """
    Weighted fair-allocation instance.

    Args:
        weights:   n positive integers, one per agent.
        utilities: n x m non-negative integers; utilities[i, r] = u_i(r).

    Both arrays are copied to read-only int64 arrays on construction, so an
    Instance can be shared between threads without locking.

    Raises:
        ValueError: on non-integral values, non-positive weights, negative
            utilities, values above MAX_VALUE or a shape mismatch.
    """

    weights: np.ndarray
    utilities: np.ndarray

    def __post_init__(self) -> None:
        weights = _integer_array(self.weights, "weights").reshape(-1)
        utilities = _integer_array(self.utilities, "utilities")
        if utilities.ndim == 1 and utilities.size == 0:
            utilities = utilities.reshape(len(weights), 0)
        if utilities.ndim != 2:
            raise ValueError(f"utilities must be a matrix, got {utilities.ndim} dimension(s)")
        if utilities.shape[0] != weights.shape[0]:
            raise ValueError(
                f"utilities has {utilities.shape[0]} row(s) but there are {weights.shape[0]} agent weight(s)"
            )
        if weights.shape[0] < 1:
            raise ValueError("an instance needs at least one agent")
        if (weights <= 0).any():
            raise ValueError(f"weights must be strictly positive, got {weights.tolist()}")
        if (utilities < 0).any():
            raise ValueError("utilities must be non-negative")
        weights.setflags(write=False)
        utilities.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "utilities", utilities)

    @classmethod
    def from_lists(cls, weights: Sequence[int], utilities: Sequence[Sequence[int]], m: int | None = None) -> Instance:
        """Build from plain lists; pass m when every row is empty so the shape is unambiguous."""
        if m is not None and all(len(row) == 0 for row in utilities):
            return cls(weights, np.zeros((len(weights), m), dtype=np.int64))
        return cls(weights, np.asarray(utilities).reshape(len(weights), -1))

    @property
    def n(self) -> int:
        return int(self.weights.shape[0])

    @property
    def m(self) -> int:
        return int(self.utilities.shape[1])

    @property
    def agents(self) -> range:
        return range(self.n)

    @property
    def resources(self) -> range:
        return range(self.m)

    @cached_property
    def weight_list(self) -> tuple[int, ...]:
        return tuple(int(w) for w in self.weights)

    @cached_property
    def utility_rows(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(int(v) for v in row) for row in self.utilities)

    def product_bound(self) -> int:
        """Largest magnitude any cross-multiplied envy term can reach: max(u) * m * max(w)."""
        if self.m == 0:
            return 0
        return int(self.utilities.max()) * self.m * int(self.weights.max())

    def with_unit_weights(self) -> Instance:
        """Same utilities, every weight 1; Avg-envy then coincides with Sum-envy."""
        return Instance(np.ones(self.n, dtype=np.int64), self.utilities)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return np.array_equal(self.weights, other.weights) and np.array_equal(self.utilities, other.utilities)

    def __hash__(self) -> int:
        return hash((self.utilities.shape, self.weights.tobytes(), self.utilities.tobytes()))

    def __repr__(self) -> str:
        return f"Instance(weights={self.weights.tolist()}, utilities={self.utilities.tolist()})"


# ---------------------------------------------------------------------------
# Allocation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Allocation:
    """
    One bundle of resource indices per agent, bundles pairwise disjoint.

    Empty bundles are legal; completeness is a property of the union and is
    checked by is_complete().
    """

    bundles: tuple[frozenset[int], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        bundles = tuple(frozenset(int(r) for r in b) for b in self.bundles)
        seen: set[int] = set()
        for agent, bundle in enumerate(bundles):
            for r in bundle:
                if r < 0:
                    raise ValueError(f"negative resource index {r} in bundle of a{agent + 1}")
                if r in seen:
                    raise ValueError(f"resource r{r + 1} appears in more than one bundle")
                seen.add(r)
        object.__setattr__(self, "bundles", bundles)

    @classmethod
    def from_assignment(cls, assignment: Iterable[int], n: int) -> Allocation:
        """assignment[r] is the agent holding resource r, or -1 for unallocated."""
        bundles: list[set[int]] = [set() for _ in range(n)]
        for r, agent in enumerate(assignment):
            agent = int(agent)
            if agent >= 0:
                bundles[agent].add(r)
        return cls(tuple(frozenset(b) for b in bundles))

    @classmethod
    def from_houses(cls, houses: Iterable[int]) -> Allocation:
        """houses[i] is the single resource given to agent i."""
        return cls(tuple(frozenset((int(h),)) for h in houses))

    @classmethod
    def from_one_based(cls, bundles: Iterable[Iterable[int]]) -> Allocation:
        return cls(tuple(frozenset(int(r) - 1 for r in b) for b in bundles))

    @property
    def n(self) -> int:
        return len(self.bundles)

    def holder(self, resource: int) -> int | None:
        for agent, bundle in enumerate(self.bundles):
            if resource in bundle:
                return agent
        return None

    def house_of(self, agent: int) -> int:
        """The single resource of agent; only meaningful for house allocations."""
        (house,) = self.bundles[agent]
        return house

    def swapped(self, i: int, j: int) -> Allocation:
        bundles = list(self.bundles)
        bundles[i], bundles[j] = bundles[j], bundles[i]
        return Allocation(tuple(bundles))

    def to_one_based(self) -> list[list[int]]:
        return [sorted(r + 1 for r in bundle) for bundle in self.bundles]

    def describe(self) -> str:
        parts = []
        for agent, bundle in enumerate(self.bundles):
            items = ", ".join(f"r{r + 1}" for r in sorted(bundle))
            parts.append(f"a{agent + 1}: {{{items}}}")
        return "; ".join(parts)


def check_allocation(instance: Instance, allocation: Allocation) -> None:
    """Raise ValueError unless allocation has one bundle per agent and only valid resource ids."""
    if allocation.n != instance.n:
        raise ValueError(f"allocation has {allocation.n} bundle(s) for {instance.n} agent(s)")
    for agent, bundle in enumerate(allocation.bundles):
        for r in bundle:
            if r >= instance.m:
                raise ValueError(f"a{agent + 1} holds r{r + 1} but the instance has only {instance.m} resource(s)")


# ---------------------------------------------------------------------------
# Envy predicates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnvyPair:
    """Ordered pair (envious, envied) with which of the two conditions held."""

    envious: int
    envied: int
    sum_ok: bool
    avg_ok: bool

    def render(self) -> str:
        return (
            f"(a{self.envious + 1}, a{self.envied + 1}) "
            f"sum-condition {'held' if self.sum_ok else 'failed'}, "
            f"avg-condition {'held' if self.avg_ok else 'failed'}"
        )


@dataclass(frozen=True)
class EnvyReport:
    """All envious ordered pairs of an allocation under one concept; empty iff fair."""

    concept: FairnessConcept
    pairs: tuple[EnvyPair, ...]

    @property
    def is_fair(self) -> bool:
        return not self.pairs

    def as_pairs(self) -> list[tuple[int, int]]:
        """1-based (envious, envied) tuples, matching the notation of printed reports."""
        return [(p.envious + 1, p.envied + 1) for p in self.pairs]

    def render(self) -> str:
        if not self.pairs:
            return f"no envious pairs under {self.concept.name}"
        lines = [f"{len(self.pairs)} envious pair(s) under {self.concept.name}:"]
        lines.extend(f"  {p.render()}" for p in self.pairs)
        return "\n".join(lines)


def bundle_utility(instance: Instance, agent: int, bundle: Iterable[int]) -> int:
    """Additive utility of agent for bundle."""
    row = instance.utility_rows[agent]
    total = 0
    for r in bundle:
        if not 0 <= r < instance.m:
            raise IndexError(f"resource index {r} out of range for m={instance.m}")
        total += row[r]
    return total


def _conditions(instance: Instance, allocation: Allocation, i: int, j: int) -> tuple[bool, bool]:
    own = bundle_utility(instance, i, allocation.bundles[i])
    other = bundle_utility(instance, i, allocation.bundles[j])
    w = instance.weight_list
    return own >= other, own * w[j] >= other * w[i]


def _envious(concept: FairnessConcept, sum_ok: bool, avg_ok: bool) -> bool:
    if concept is FairnessConcept.SEF:
        return not sum_ok
    if concept is FairnessConcept.AEF:
        return not avg_ok
    return not sum_ok and not avg_ok


def envies(instance: Instance, allocation: Allocation, i: int, j: int, concept: FairnessConcept) -> bool:
    """True iff agent i envies agent j under concept."""
    if i == j:
        raise ValueError("an agent is never compared with itself")
    sum_ok, avg_ok = _conditions(instance, allocation, i, j)
    return _envious(concept, sum_ok, avg_ok)


def envy_report(instance: Instance, allocation: Allocation, concept: FairnessConcept) -> EnvyReport:
    check_allocation(instance, allocation)
    pairs = []
    for i in instance.agents:
        for j in instance.agents:
            if i == j:
                continue
            sum_ok, avg_ok = _conditions(instance, allocation, i, j)
            if _envious(concept, sum_ok, avg_ok):
                pairs.append(EnvyPair(i, j, sum_ok, avg_ok))
    return EnvyReport(concept, tuple(pairs))


def is_fair(instance: Instance, allocation: Allocation, concept: FairnessConcept) -> bool:
    check_allocation(instance, allocation)
    return not any(
        envies(instance, allocation, i, j, concept)
        for i in instance.agents
        for j in instance.agents
        if i != j
    )


def is_complete(instance: Instance, allocation: Allocation) -> bool:
    check_allocation(instance, allocation)
    allocated = set().union(*allocation.bundles) if allocation.bundles else set()
    return allocated == set(instance.resources)


def is_house(instance: Instance, allocation: Allocation) -> bool:
    check_allocation(instance, allocation)
    return all(len(bundle) == 1 for bundle in allocation.bundles)
