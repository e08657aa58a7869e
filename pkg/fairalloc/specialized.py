"""
Polynomial-time solvers for the tractable preference classes.

    identical 0/1, complete allocation:  aef_identical01, sef_identical01,
                                         saef_identical01_dp
    0/1, house allocation:               saef_house_01 (matching fixpoint)
    identical, house allocation:         saef_house_identical_dp

Under identical preferences a fair allocation orders agents by weight: sorted
ascending (stable on ties), bundle values must be non-decreasing and value per
unit weight non-increasing. Both dynamic programs search only such profiles and
check the two conditions between consecutive agents, which is enough for every
pair.

Every witness is re-verified with the model checkers before it is returned.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import networkx as nx

from fairalloc.errors import PreconditionError, ShapeError
from fairalloc.exact import find_house_exact
from fairalloc.model import (
    Allocation,
    FairnessConcept,
    Instance,
    is_complete,
    is_fair,
    is_house,
)


@dataclass(frozen=True)
class PreferenceClass:
    """Flags describing the utility matrix; always computed, never asserted."""

    is_identical: bool
    is_01: bool

    def describe(self) -> str:
        flags = [name for name, on in (("identical", self.is_identical), ("0/1", self.is_01)) if on]
        return ", ".join(flags) if flags else "general"


def classify_preferences(instance: Instance) -> PreferenceClass:
    u = instance.utilities
    identical = bool((u == u[0]).all())
    zero_one = bool(((u == 0) | (u == 1)).all())
    return PreferenceClass(is_identical=identical, is_01=zero_one)


def _require(instance: Instance, *, identical: bool = False, zero_one: bool = False, house: bool = False) -> None:
    pc = classify_preferences(instance)
    if identical and not pc.is_identical:
        raise PreconditionError("requires identical preferences (all utility rows equal)")
    if zero_one and not pc.is_01:
        raise PreconditionError("requires 0/1 preferences (every utility is 0 or 1)")
    if house and instance.n > instance.m:
        raise ShapeError(f"house allocation needs n <= m, got n={instance.n}, m={instance.m}")


def _verified(instance: Instance, allocation: Allocation, concept: FairnessConcept, *, house: bool) -> Allocation:
    shape_ok = is_house(instance, allocation) if house else is_complete(instance, allocation)
    if not shape_ok or not is_fair(instance, allocation, concept):
        raise RuntimeError(f"internal error: {concept.name} witness failed verification: {allocation.describe()}")
    return allocation


def _weight_order(instance: Instance) -> list[int]:
    return sorted(instance.agents, key=lambda a: instance.weight_list[a])


# ---------------------------------------------------------------------------
# Identical 0/1 preferences, complete allocations
# ---------------------------------------------------------------------------

def _split_01(instance: Instance) -> tuple[list[int], list[int]]:
    row = instance.utility_rows[0]
    ones = [r for r in instance.resources if row[r] == 1]
    zeros = [r for r in instance.resources if row[r] == 0]
    return ones, zeros


def _from_shares(instance: Instance, shares: dict[int, int]) -> Allocation:
    """Hand out 1-valued resources by shares (agents in index order); 0-valued ones go to a1."""
    ones, zeros = _split_01(instance)
    bundles: list[set[int]] = [set() for _ in instance.agents]
    cursor = 0
    for agent in instance.agents:
        take = shares.get(agent, 0)
        bundles[agent].update(ones[cursor:cursor + take])
        cursor += take
    bundles[0].update(zeros)
    return Allocation(tuple(frozenset(b) for b in bundles))


def aef_identical01(instance: Instance) -> Allocation | None:
    """
    AEF complete allocation under identical 0/1 preferences.

    Every agent's value per unit weight must be the same, so agent a receives
    exactly w_a * m1 / sum(w) of the m1 resources everyone values at 1; the
    allocation exists iff all those shares are integers.

    Raises:
        PreconditionError: if preferences are not identical and 0/1.
    """
    _require(instance, identical=True, zero_one=True)
    ones, _ = _split_01(instance)
    m1 = len(ones)
    total_weight = sum(instance.weight_list)
    shares: dict[int, int] = {}
    for agent, weight in enumerate(instance.weight_list):
        share, rest = divmod(weight * m1, total_weight)
        if rest:
            logging.debug("AEF shares not integral: a%d would get %d/%d.", agent + 1, weight * m1, total_weight)
            return None
        shares[agent] = share
    return _verified(instance, _from_shares(instance, shares), FairnessConcept.AEF, house=False)


def sef_identical01(instance: Instance) -> Allocation | None:
    """SEF under identical 0/1 preferences: the AEF solution of the unit-weight copy (n must divide m1)."""
    _require(instance, identical=True, zero_one=True)
    unit = aef_identical01(instance.with_unit_weights())
    if unit is None:
        return None
    return _verified(instance, unit, FairnessConcept.SEF, house=False)


def saef_identical01_dp(instance: Instance) -> Allocation | None:
    """
    SAEF complete allocation under identical 0/1 preferences, by dynamic programming.

    Agents are taken in weight order. cell[i][j][k] holds a back-pointer k'
    when the first i+1 agents can split j of the 1-valued resources with k
    going to agent i, consistent with every earlier agent. A step from k' to k
    needs k' <= k and k' * w_i >= k * w_(i-1).

    Raises:
        PreconditionError: if preferences are not identical and 0/1.
    """
    _require(instance, identical=True, zero_one=True)
    ones, _ = _split_01(instance)
    m1 = len(ones)
    if m1 == 0 or instance.n == 1:
        return _verified(instance, _from_shares(instance, {0: m1}), FairnessConcept.SAEF, house=False)

    order = _weight_order(instance)
    w = [instance.weight_list[a] for a in order]
    n = len(order)
    empty = -1
    # cell[i][j][k]: back-pointer, or empty.
    cell = [[[empty] * (m1 + 1) for _ in range(m1 + 1)] for _ in range(n)]
    for j in range(m1 + 1):
        cell[0][j][j] = j
    for i in range(1, n):
        for j in range(m1 + 1):
            for k in range(j + 1):
                prev = cell[i - 1][j - k]
                for k_prev in range(min(k, j - k) + 1):
                    if prev[k_prev] != empty and k_prev * w[i] >= k * w[i - 1]:
                        cell[i][j][k] = k_prev
                        break

    last = next((k for k in range(1, m1 + 1) if cell[n - 1][m1][k] != empty), None)
    logging.debug("SAEF identical-0/1 table: n=%d, m1=%d, feasible=%s.", n, m1, last is not None)
    if last is None:
        return None

    shares: dict[int, int] = {}
    j, k = m1, last
    for i in range(n - 1, -1, -1):
        shares[order[i]] = k
        k_prev = cell[i][j][k]
        j, k = j - k, k_prev
    return _verified(instance, _from_shares(instance, shares), FairnessConcept.SAEF, house=False)


# ---------------------------------------------------------------------------
# House allocation
# ---------------------------------------------------------------------------

def _alternating_reach(graph: nx.Graph, exposed: list[int], matching: dict[int, int]) -> set[int]:
    """Agents reachable from exposed agents along alternating paths."""
    seen = set(exposed)
    frontier = list(exposed)
    while frontier:
        agent = frontier.pop()
        for house in graph[agent]:
            mate = matching.get(house)
            if mate is not None and mate not in seen:
                seen.add(mate)
                frontier.append(mate)
    return seen


def saef_house_01(instance: Instance) -> Allocation | None:
    """
    SAEF house allocation under 0/1 preferences.

    On singleton bundles with 0/1 values an agent envies exactly when it holds
    a 0-valued house while some allocated house is worth 1 to it, whatever the
    weights, so the task is SEF house allocation.

    Fixpoint: match agents to houses they like within a candidate pool. Agents
    reachable by alternating paths from unmatched agents outnumber every set
    of pool houses they like, so those houses can never be handed out in a fair
    allocation; they leave the pool and the matching is recomputed. Once
    nothing is removed, unmatched agents like no pool house and take any unused
    pool houses. With fewer than n houses left, no fair allocation exists.

    Raises:
        PreconditionError: if preferences are not 0/1.
        ShapeError: if n > m.
    """
    _require(instance, zero_one=True, house=True)
    n, m = instance.n, instance.m
    u = instance.utility_rows
    pool = set(range(m))
    rounds = 0

    while True:
        rounds += 1
        graph = nx.Graph()
        graph.add_nodes_from(range(n), bipartite=0)
        graph.add_nodes_from((n + h for h in sorted(pool)), bipartite=1)
        graph.add_edges_from((a, n + h) for a in range(n) for h in sorted(pool) if u[a][h] == 1)
        matching = nx.bipartite.hopcroft_karp_matching(graph, top_nodes=range(n))
        exposed = [a for a in range(n) if a not in matching]
        reach = _alternating_reach(graph, exposed, matching)
        doomed = {house - n for agent in reach for house in graph[agent]}
        if not doomed:
            break
        pool -= doomed
        logging.debug("House 0/1 fixpoint round %d removed %d house(s).", rounds, len(doomed))

    if len(pool) < n:
        logging.debug("House 0/1 fixpoint left %d house(s) for %d agent(s).", len(pool), n)
        return None

    houses = [-1] * n
    for agent in range(n):
        if agent in matching:
            houses[agent] = matching[agent] - n
    spare = iter(sorted(pool - set(houses)))
    for agent in exposed:
        houses[agent] = next(spare)
    allocation = Allocation.from_houses(houses)

    if not (is_house(instance, allocation)
            and is_fair(instance, allocation, FairnessConcept.SAEF)
            and is_fair(instance, allocation, FairnessConcept.SEF)):
        logging.warning("House 0/1 fixpoint produced an unfair witness; falling back to exhaustive search.")
        return find_house_exact(instance, FairnessConcept.SAEF)
    return allocation


def saef_house_identical_dp(instance: Instance) -> Allocation | None:
    """
    SAEF house allocation under identical preferences, by dynamic programming.

    Agents sorted by weight, houses by value (both stable). cell[i][j] holds the
    smallest position j' < j from which agent i-1's house can precede house j
    for agent i, i.e. u[j'] * w_i >= u[j] * w_(i-1).

    Raises:
        PreconditionError: if preferences are not identical.
        ShapeError: if n > m.
    """
    _require(instance, identical=True, house=True)
    n, m = instance.n, instance.m
    row = instance.utility_rows[0]
    agents = _weight_order(instance)
    houses = sorted(range(m), key=lambda r: row[r])
    w = [instance.weight_list[a] for a in agents]
    v = [row[r] for r in houses]

    empty = -1
    start = -2
    cell = [[empty] * m for _ in range(n)]
    cell[0] = [start] * m
    for i in range(1, n):
        for j in range(i, m):
            for j_prev in range(j):
                if cell[i - 1][j_prev] != empty and v[j_prev] * w[i] >= v[j] * w[i - 1]:
                    cell[i][j] = j_prev
                    break

    last = next((j for j in range(m) if cell[n - 1][j] != empty), None)
    logging.debug("SAEF identical house table: n=%d, m=%d, feasible=%s.", n, m, last is not None)
    if last is None:
        return None

    chosen = [-1] * n
    j = last
    for i in range(n - 1, -1, -1):
        chosen[agents[i]] = houses[j]
        j = cell[i][j]
    return _verified(instance, Allocation.from_houses(chosen), FairnessConcept.SAEF, house=True)


# ---------------------------------------------------------------------------
# Witness shape
# ---------------------------------------------------------------------------

def weight_sorted_profile_holds(instance: Instance, allocation: Allocation) -> bool:
    """
    Check the sorted-weight profile of a witness under identical preferences.

    With agents ordered by weight (stable), each agent's bundle value is at most
    the next agent's, and value * next weight is at least next value * weight.

    Raises:
        PreconditionError: if preferences are not identical.
    """
    _require(instance, identical=True)
    row = instance.utility_rows[0]
    order = _weight_order(instance)
    value = [sum(row[r] for r in allocation.bundles[a]) for a in order]
    weight = [instance.weight_list[a] for a in order]
    return all(
        value[i] <= value[i + 1] and value[i] * weight[i + 1] >= value[i + 1] * weight[i]
        for i in range(len(order) - 1)
    )
