"""
Brute-force existence oracles for complete allocations and house allocations.

Complete allocations are enumerated as rows of a mixed-radix counter
(resource r0 most significant, agents tried in index order), in chunks, and
evaluated with numpy: for each row the n x n matrix values[i, k] = u_i(bundle k)
is accumulated resource by resource, after which the three envy predicates are
plain array comparisons. One pass answers SEF, AEF and SAEF together.

House allocations are searched depth-first over agents, houses tried in index
order. With pruning enabled a branch is cut as soon as two placed agents envy
each other, since that envy can no longer change.

Pruning for complete allocations: an agent whose utility row is not all zero
must receive a non-empty bundle, otherwise it envies whoever holds a resource it
values under every concept. Rows violating this are skipped; with every agent
in that situation the oracle enumerates only surjective rows (cached per n, m).

Both enumerations are deterministic, so witnesses are reproducible, and both
refuse with BudgetExceededError rather than truncate.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Mapping

import numpy as np

from fairalloc.errors import BudgetExceededError, ShapeError
from fairalloc.model import (
    ALL_CONCEPTS,
    Allocation,
    FairnessConcept,
    Instance,
    ProblemKind,
)

DEFAULT_LEAF_BUDGET = 200_000_000
CHUNK_ROWS = 65_536

# Largest cross-multiplied term that is still safe in int64 arithmetic.
_INT64_SAFE = 2**62


# ---------------------------------------------------------------------------
# Leaf counting
# ---------------------------------------------------------------------------

def surjection_count(n: int, m: int) -> int:
    """Number of maps from m resources onto all n agents (inclusion-exclusion)."""
    return sum((-1) ** k * math.comb(n, k) * (n - k) ** m for k in range(n + 1))


def house_leaf_count(n: int, m: int) -> int:
    """Number of injective maps from n agents into m resources."""
    return math.perm(m, n) if n <= m else 0


def _check_budget(leaves: int, budget: int, what: str) -> None:
    if leaves > budget:
        raise BudgetExceededError(
            f"{what} needs {leaves:,} leaves, over the budget of {budget:,}. "
            "Raise --leaf-budget or shrink the instance."
        )


# ---------------------------------------------------------------------------
# Row enumeration
# ---------------------------------------------------------------------------

def _radix_chunks(n: int, m: int, chunk: int = CHUNK_ROWS) -> Iterator[np.ndarray]:
    """All n**m assignment rows in lexicographic order, chunk rows at a time."""
    total = n**m
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        rows = np.empty((codes.size, m), dtype=np.intp)
        for r in range(m - 1, -1, -1):
            codes, rows[:, r] = np.divmod(codes, n)
        yield rows


def _present(rows: np.ndarray, n: int) -> np.ndarray:
    present = np.zeros((rows.shape[0], n), dtype=bool)
    present[np.arange(rows.shape[0])[:, None], rows] = True
    return present


@lru_cache(maxsize=64)
def _surjections(n: int, m: int) -> np.ndarray:
    if m < n:
        rows = np.empty((0, m), dtype=np.intp)
    else:
        kept = [chunk[_present(chunk, n).all(axis=1)] for chunk in _radix_chunks(n, m)]
        rows = np.concatenate(kept) if kept else np.empty((0, m), dtype=np.intp)
    rows.setflags(write=False)
    logging.debug("Cached %d surjective rows for n=%d, m=%d.", rows.shape[0], n, m)
    return rows


@lru_cache(maxsize=64)
def _injections(n: int, m: int) -> np.ndarray:
    rows = np.array(list(itertools.permutations(range(m), n)), dtype=np.intp).reshape(-1, n)
    rows.setflags(write=False)
    return rows


def _allocation_rows(instance: Instance, leaf_budget: int, prune: bool) -> Iterator[np.ndarray]:
    n, m = instance.n, instance.m
    required = instance.utilities.sum(axis=1) > 0 if prune else np.zeros(n, dtype=bool)
    if prune and required.all():
        _check_budget(surjection_count(n, m), leaf_budget, f"Complete-allocation search (n={n}, m={m})")
        rows = _surjections(n, m)
        for start in range(0, rows.shape[0], CHUNK_ROWS):
            yield rows[start:start + CHUNK_ROWS]
        return
    _check_budget(n**m, leaf_budget, f"Complete-allocation search (n={n}, m={m})")
    for chunk in _radix_chunks(n, m):
        if required.any():
            chunk = chunk[_present(chunk, n)[:, required].all(axis=1)]
        if chunk.shape[0]:
            yield chunk


# ---------------------------------------------------------------------------
# Vectorized evaluation
# ---------------------------------------------------------------------------

def _value_dtype(instance: Instance) -> type | np.dtype:
    return np.int64 if instance.product_bound() < _INT64_SAFE else object


def _allocation_values(utilities: np.ndarray, rows: np.ndarray, n: int) -> np.ndarray:
    """values[c, i, k] = utility agent i assigns to the bundle of agent k in row c."""
    count, m = rows.shape
    values = np.zeros((count, n, n), dtype=utilities.dtype)
    index = np.arange(count)
    for r in range(m):
        values[index, :, rows[:, r]] += utilities[:, r]
    return values


def _house_values(utilities: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """values[c, i, k] = utility agent i assigns to the house of agent k in row c."""
    return utilities[:, rows].transpose(1, 0, 2)


def _fair_masks(values: np.ndarray, weights: np.ndarray) -> dict[FairnessConcept, np.ndarray]:
    own = np.diagonal(values, axis1=1, axis2=2)
    sum_envy = own[:, :, None] < values
    avg_envy = own[:, :, None] * weights[None, None, :] < values * weights[None, :, None]
    return {
        FairnessConcept.SEF: ~sum_envy.any(axis=(1, 2)),
        FairnessConcept.AEF: ~avg_envy.any(axis=(1, 2)),
        FairnessConcept.SAEF: ~(sum_envy & avg_envy).any(axis=(1, 2)),
    }


def _first_fair_rows(
    instance: Instance,
    chunks: Iterator[np.ndarray],
    concepts: tuple[FairnessConcept, ...],
    kind: ProblemKind,
) -> dict[FairnessConcept, np.ndarray | None]:
    dtype = _value_dtype(instance)
    utilities = instance.utilities.astype(dtype)
    weights = instance.weights.astype(dtype)
    found: dict[FairnessConcept, np.ndarray | None] = {c: None for c in concepts}
    scanned = 0
    for rows in chunks:
        scanned += rows.shape[0]
        if kind is ProblemKind.ALLOCATION:
            values = _allocation_values(utilities, rows, instance.n)
        else:
            values = _house_values(utilities, rows)
        masks = _fair_masks(values, weights)
        for concept in concepts:
            if found[concept] is None:
                hits = np.flatnonzero(masks[concept])
                if hits.size:
                    found[concept] = rows[hits[0]].copy()
        if all(row is not None for row in found.values()):
            break
    logging.debug("Scanned %d %s row(s) for n=%d, m=%d.", scanned, kind.value, instance.n, instance.m)
    return found


# ---------------------------------------------------------------------------
# Finders
# ---------------------------------------------------------------------------

def find_allocation_exact(
    instance: Instance,
    concept: FairnessConcept,
    *,
    leaf_budget: int = DEFAULT_LEAF_BUDGET,
    prune: bool = True,
) -> Allocation | None:
    """
    A complete allocation fair under concept, or None if none exists.

    Exhaustive over all n**m assignments (minus soundly pruned rows); the first
    fair row in lexicographic order is returned.

    Raises:
        BudgetExceededError: if the enumeration would exceed leaf_budget rows.
    """
    rows = _allocation_rows(instance, leaf_budget, prune)
    row = _first_fair_rows(instance, rows, (concept,), ProblemKind.ALLOCATION)[concept]
    return None if row is None else Allocation.from_assignment(row, instance.n)


def find_house_exact(
    instance: Instance,
    concept: FairnessConcept,
    *,
    leaf_budget: int = DEFAULT_LEAF_BUDGET,
    prune: bool = True,
) -> Allocation | None:
    """
    A house allocation fair under concept, or None if none exists.

    Depth-first over agents a1..an, houses tried in index order, so the witness
    is the first fair injective assignment in lexicographic order.

    Raises:
        ShapeError: if n > m.
        BudgetExceededError: if m!/(m-n)! exceeds leaf_budget.
    """
    n, m = instance.n, instance.m
    if n > m:
        raise ShapeError(f"house allocation needs n <= m, got n={n}, m={m}")
    _check_budget(house_leaf_count(n, m), leaf_budget, f"House-allocation search (n={n}, m={m})")

    u = instance.utility_rows
    w = instance.weight_list
    holding = [-1] * n
    taken = [False] * m
    nodes = 0

    def envious(i: int, j: int) -> bool:
        own, other = u[i][holding[i]], u[i][holding[j]]
        sum_envy = own < other
        avg_envy = own * w[j] < other * w[i]
        if concept is FairnessConcept.SEF:
            return sum_envy
        if concept is FairnessConcept.AEF:
            return avg_envy
        return sum_envy and avg_envy

    def compatible(k: int) -> bool:
        return not any(envious(i, k) or envious(k, i) for i in range(k))

    def extend(k: int) -> bool:
        nonlocal nodes
        if k == n:
            return prune or all(compatible(a) for a in range(n))
        for h in range(m):
            if taken[h]:
                continue
            nodes += 1
            holding[k] = h
            taken[h] = True
            if (not prune or compatible(k)) and extend(k + 1):
                return True
            taken[h] = False
        holding[k] = -1
        return False

    found = extend(0)
    logging.debug("House search visited %d node(s) for n=%d, m=%d (%s).", nodes, n, m, concept.name)
    return Allocation.from_houses(holding) if found else None


# ---------------------------------------------------------------------------
# Existence profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExistenceProfile:
    """
    Existence of SEF/AEF/SAEF complete allocations and house allocations.

    Each mapping sends a concept to a witness, or None when no fair allocation
    of that kind exists. Kinds that were not evaluated are absent.
    """

    allocation: Mapping[FairnessConcept, Allocation | None] = field(default_factory=dict)
    house: Mapping[FairnessConcept, Allocation | None] = field(default_factory=dict)

    def witnesses(self, kind: ProblemKind) -> Mapping[FairnessConcept, Allocation | None]:
        return self.allocation if kind is ProblemKind.ALLOCATION else self.house

    def exists(self, concept: FairnessConcept, kind: ProblemKind = ProblemKind.ALLOCATION) -> bool:
        return self.witnesses(kind)[concept] is not None

    def inheritability_holds(self) -> bool:
        for table in (self.allocation, self.house):
            if not table:
                continue
            saef = table[FairnessConcept.SAEF] is not None
            if not saef and (table[FairnessConcept.SEF] is not None or table[FairnessConcept.AEF] is not None):
                return False
        return True


def existence_profile(
    instance: Instance,
    *,
    kinds: tuple[ProblemKind, ...] = (ProblemKind.ALLOCATION, ProblemKind.HOUSE),
    leaf_budget: int = DEFAULT_LEAF_BUDGET,
    prune: bool = True,
) -> ExistenceProfile:
    """
    Evaluate all three concepts in a single enumeration per kind.

    House flags are all False when n > m.

    Raises:
        BudgetExceededError: if an enumeration would exceed leaf_budget rows.
    """
    tables: dict[ProblemKind, dict[FairnessConcept, Allocation | None]] = {}
    if ProblemKind.ALLOCATION in kinds:
        rows = _first_fair_rows(
            instance, _allocation_rows(instance, leaf_budget, prune), ALL_CONCEPTS, ProblemKind.ALLOCATION
        )
        tables[ProblemKind.ALLOCATION] = {
            c: None if row is None else Allocation.from_assignment(row, instance.n) for c, row in rows.items()
        }
    if ProblemKind.HOUSE in kinds:
        n, m = instance.n, instance.m
        if n > m:
            tables[ProblemKind.HOUSE] = {c: None for c in ALL_CONCEPTS}
        else:
            _check_budget(house_leaf_count(n, m), leaf_budget, f"House-allocation search (n={n}, m={m})")
            injections = _injections(n, m)
            chunks = (injections[s:s + CHUNK_ROWS] for s in range(0, injections.shape[0], CHUNK_ROWS))
            rows = _first_fair_rows(instance, chunks, ALL_CONCEPTS, ProblemKind.HOUSE)
            tables[ProblemKind.HOUSE] = {
                c: None if row is None else Allocation.from_houses(row) for c, row in rows.items()
            }
    return ExistenceProfile(
        allocation=tables.get(ProblemKind.ALLOCATION, {}),
        house=tables.get(ProblemKind.HOUSE, {}),
    )
