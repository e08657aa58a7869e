"""
Resource types and the integer-program encodings of fair complete allocation.

Resources whose utility columns coincide are interchangeable, so an allocation
is described by x_i^t, the number of type-t resources given to agent i. The
encodings are pure feasibility models (objective "min 1"):

    every type t          sum_i x_i^t = #t
    SAEF, every i != j    M*y1_ij - own_i + other_ij        <= M
                          M*y2_ij - w_j*own_i + w_i*other_ij <= M
                          y1_ij + y2_ij >= 1
    AEF,  every i != j    w_j*own_i - w_i*other_ij >= 0

where own_i = sum_t t[i]*x_i^t and other_ij = sum_t t[i]*x_j^t. With y = 1 the
rows reduce to the non-strict envy-free conditions; with y = 0 they hold for
any x because M = sum(u) * sum(w) exceeds every difference term.

Models are solved through a FeasibilityBackend. The built-in DepthFirstBackend
is exhaustive over the bounded box; another backend (an external MILP solver
fed with to_lp()) only has to implement solve(model).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Protocol

from fairalloc.errors import BudgetExceededError
from fairalloc.model import Allocation, FairnessConcept, Instance

DEFAULT_NODE_BUDGET = 10_000_000


# ---------------------------------------------------------------------------
# Resource types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TypeTable:
    """Distinct utility columns in order of first appearance, with their member resources."""

    types: tuple[tuple[int, ...], ...]
    members: tuple[tuple[int, ...], ...]

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(len(group) for group in self.members)

    def __len__(self) -> int:
        return len(self.types)

    def type_of(self, resource: int) -> int:
        for t, group in enumerate(self.members):
            if resource in group:
                return t
        raise IndexError(f"resource index {resource} belongs to no type")

    def render(self) -> str:
        lines = [f"{len(self.types)} resource type(s):"]
        for t, (column, group) in enumerate(zip(self.types, self.members)):
            ids = ", ".join(f"r{r + 1}" for r in group)
            lines.append(f"  t{t + 1}  utilities={list(column)}  count={len(group)}  resources=[{ids}]")
        return "\n".join(lines)


def compute_types(instance: Instance) -> TypeTable:
    index: dict[tuple[int, ...], int] = {}
    types: list[tuple[int, ...]] = []
    members: list[list[int]] = []
    rows = instance.utility_rows
    for r in instance.resources:
        column = tuple(row[r] for row in rows)
        if column not in index:
            index[column] = len(types)
            types.append(column)
            members.append([])
        members[index[column]].append(r)
    return TypeTable(tuple(types), tuple(tuple(g) for g in members))


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

class Sense(str, Enum):
    EQ = "="
    LE = "<="
    GE = ">="


@dataclass(frozen=True)
class Variable:
    name: str
    lower: int
    upper: int
    binary: bool = False


@dataclass(frozen=True)
class Constraint:
    name: str
    coefficients: tuple[tuple[int, int], ...]  # (variable index, coefficient), zero terms omitted
    sense: Sense
    rhs: int

    def holds(self, values: list[int]) -> bool:
        lhs = sum(coef * values[v] for v, coef in self.coefficients)
        if self.sense is Sense.EQ:
            return lhs == self.rhs
        if self.sense is Sense.LE:
            return lhs <= self.rhs
        return lhs >= self.rhs


@dataclass(frozen=True)
class IpAssignment:
    """Value of every model variable, keyed by variable name."""

    values: Mapping[str, int]

    def x(self, agent: int, type_index: int) -> int:
        return self.values[_x_name(agent, type_index)]


@dataclass
class IpModel:
    """Bounded integer variables and linear rows of one encoding."""

    concept: FairnessConcept
    n: int
    num_types: int
    big_m: int = 0
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    _lookup: dict[str, int] = field(default_factory=dict, repr=False)

    def add_variable(self, name: str, lower: int, upper: int, *, binary: bool = False) -> int:
        self._lookup[name] = len(self.variables)
        self.variables.append(Variable(name, lower, upper, binary))
        return self._lookup[name]

    def index(self, name: str) -> int:
        return self._lookup[name]

    def add_constraint(self, name: str, terms: Mapping[int, int], sense: Sense, rhs: int) -> None:
        coefficients = tuple((v, c) for v, c in sorted(terms.items()) if c != 0)
        self.constraints.append(Constraint(name, coefficients, sense, rhs))

    def is_satisfied(self, assignment: IpAssignment) -> bool:
        try:
            values = [int(assignment.values[v.name]) for v in self.variables]
        except KeyError:
            return False
        if any(not v.lower <= value <= v.upper for v, value in zip(self.variables, values)):
            return False
        return all(c.holds(values) for c in self.constraints)

    def to_lp(self) -> str:
        """CPLEX LP text of the model, for inspection or an external solver."""
        names = [v.name for v in self.variables]
        lines = [f"\\ {self.concept.name}-IP, {self.n} agent(s), {self.num_types} type(s), M = {self.big_m}"]
        lines += ["Minimize", " obj: 1", "Subject To"]
        for c in self.constraints:
            lines.append(f" {c.name}: {_lp_terms(c.coefficients, names)} {c.sense.value} {c.rhs}")
        lines.append("Bounds")
        lines += [f" {v.lower} <= {v.name} <= {v.upper}" for v in self.variables if not v.binary]
        generals = [v.name for v in self.variables if not v.binary]
        binaries = [v.name for v in self.variables if v.binary]
        if generals:
            lines += ["Generals", " " + " ".join(generals)]
        if binaries:
            lines += ["Binaries", " " + " ".join(binaries)]
        lines.append("End")
        return "\n".join(lines) + "\n"


def _lp_terms(coefficients: tuple[tuple[int, int], ...], names: list[str]) -> str:
    if not coefficients:
        return "0 " + names[0] if names else "0"
    parts = []
    for k, (v, coef) in enumerate(coefficients):
        sign = "-" if coef < 0 else "+"
        if k == 0:
            parts.append(f"{'- ' if coef < 0 else ''}{abs(coef)} {names[v]}")
        else:
            parts.append(f"{sign} {abs(coef)} {names[v]}")
    return " ".join(parts)


def _x_name(agent: int, type_index: int) -> str:
    return f"x_{agent + 1}_{type_index + 1}"


# ---------------------------------------------------------------------------
# Encodings
# ---------------------------------------------------------------------------

def _base_model(instance: Instance, table: TypeTable, concept: FairnessConcept) -> IpModel:
    model = IpModel(concept=concept, n=instance.n, num_types=len(table))
    for i in instance.agents:
        for t, count in enumerate(table.multiplicities):
            model.add_variable(_x_name(i, t), 0, count)
    for t, count in enumerate(table.multiplicities):
        terms = {model.index(_x_name(i, t)): 1 for i in instance.agents}
        model.add_constraint(f"count_t{t + 1}", terms, Sense.EQ, count)
    return model


def _pair_terms(model: IpModel, table: TypeTable, i: int, j: int, own_scale: int, other_scale: int) -> dict[int, int]:
    """-own_scale * own_i + other_scale * other_ij as a term map."""
    terms: dict[int, int] = {}
    for t, column in enumerate(table.types):
        terms[model.index(_x_name(i, t))] = -own_scale * column[i]
        terms[model.index(_x_name(j, t))] = other_scale * column[i]
    return terms


def encode_saef_ip(instance: Instance, table: TypeTable) -> IpModel:
    model = _base_model(instance, table, FairnessConcept.SAEF)
    big_m = sum(map(sum, instance.utility_rows)) * sum(instance.weight_list)
    model.big_m = big_m
    w = instance.weight_list
    for i in instance.agents:
        for j in instance.agents:
            if i == j:
                continue
            y1 = model.add_variable(f"y1_{i + 1}_{j + 1}", 0, 1, binary=True)
            y2 = model.add_variable(f"y2_{i + 1}_{j + 1}", 0, 1, binary=True)
            sum_row = _pair_terms(model, table, i, j, 1, 1)
            sum_row[y1] = big_m
            model.add_constraint(f"sum_{i + 1}_{j + 1}", sum_row, Sense.LE, big_m)
            avg_row = _pair_terms(model, table, i, j, w[j], w[i])
            avg_row[y2] = big_m
            model.add_constraint(f"avg_{i + 1}_{j + 1}", avg_row, Sense.LE, big_m)
            model.add_constraint(f"either_{i + 1}_{j + 1}", {y1: 1, y2: 1}, Sense.GE, 1)
    logging.debug("SAEF-IP: %d variable(s), %d constraint(s), M=%d.", len(model.variables), len(model.constraints), big_m)
    return model


def encode_aef_ip(instance: Instance, table: TypeTable) -> IpModel:
    return _hard_envy_model(instance, table, FairnessConcept.AEF)


def encode_sef_ip(instance: Instance, table: TypeTable) -> IpModel:
    """AEF-IP of the unit-weight copy: plain pairwise envy-freeness."""
    return _hard_envy_model(instance.with_unit_weights(), table, FairnessConcept.SEF)


def _hard_envy_model(instance: Instance, table: TypeTable, concept: FairnessConcept) -> IpModel:
    model = _base_model(instance, table, concept)
    w = instance.weight_list
    for i in instance.agents:
        for j in instance.agents:
            if i == j:
                continue
            # w_j * own_i - w_i * other_ij >= 0
            row = {v: -c for v, c in _pair_terms(model, table, i, j, w[j], w[i]).items()}
            model.add_constraint(f"envy_{i + 1}_{j + 1}", row, Sense.GE, 0)
    logging.debug("%s-IP: %d variable(s), %d constraint(s).", concept.name, len(model.variables), len(model.constraints))
    return model


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------

class FeasibilityBackend(Protocol):
    """Anything that can decide a bounded integer feasibility model."""

    name: str

    def solve(self, model: IpModel) -> IpAssignment | None: ...


class DepthFirstBackend:
    """
    Exhaustive depth-first search over the bounded box.

    Variables are branched in order of decreasing constraint participation
    (ties by index), values ascending. After each assignment only the rows that
    mention the variable are checked: a row is abandoned when the partial sum
    plus the best remaining contribution of the unassigned variables can no
    longer meet it.

    Args:
        node_budget: maximum number of value assignments before refusing.
    """

    name = "dfs"

    def __init__(self, node_budget: int = DEFAULT_NODE_BUDGET):
        self.node_budget = node_budget
        self.nodes = 0

    def solve(self, model: IpModel) -> IpAssignment | None:
        variables = model.variables
        rows = model.constraints
        touching: list[list[tuple[int, int]]] = [[] for _ in variables]  # var -> [(row, coef)]
        for r, c in enumerate(rows):
            for v, coef in c.coefficients:
                touching[v].append((r, coef))
        order = sorted(range(len(variables)), key=lambda v: (-len(touching[v]), v))
        position = {v: d for d, v in enumerate(order)}

        # low[r][d] / high[r][d]: extreme contribution of the variables at depth >= d.
        depth = len(order)
        low = [[0] * (depth + 1) for _ in rows]
        high = [[0] * (depth + 1) for _ in rows]
        for r, c in enumerate(rows):
            lo_step = [0] * (depth + 1)
            hi_step = [0] * (depth + 1)
            for v, coef in c.coefficients:
                a, b = coef * variables[v].lower, coef * variables[v].upper
                lo_step[position[v]] += min(a, b)
                hi_step[position[v]] += max(a, b)
            for d in range(depth - 1, -1, -1):
                low[r][d] = low[r][d + 1] + lo_step[d]
                high[r][d] = high[r][d + 1] + hi_step[d]

        partial = [0] * len(rows)
        values = [0] * len(variables)
        self.nodes = 0

        def viable(r: int, d: int) -> bool:
            c = rows[r]
            least, most = partial[r] + low[r][d], partial[r] + high[r][d]
            if c.sense is Sense.EQ:
                return least <= c.rhs <= most
            if c.sense is Sense.LE:
                return least <= c.rhs
            return most >= c.rhs

        def search(d: int) -> bool:
            if d == depth:
                return True
            v = order[d]
            var = variables[v]
            for value in range(var.lower, var.upper + 1):
                self.nodes += 1
                if self.nodes > self.node_budget:
                    raise BudgetExceededError(
                        f"integer search exceeded the node budget of {self.node_budget:,}. "
                        "Raise the budget or use the exact strategy."
                    )
                values[v] = value
                for r, coef in touching[v]:
                    partial[r] += coef * value
                if all(viable(r, d + 1) for r, _ in touching[v]) and search(d + 1):
                    return True
                for r, coef in touching[v]:
                    partial[r] -= coef * value
            return False

        if not all(viable(r, 0) for r in range(len(rows))):
            return None
        found = search(0)
        logging.debug("Depth-first IP search visited %d node(s); feasible=%s.", self.nodes, found)
        if not found:
            return None
        return IpAssignment({var.name: values[v] for v, var in enumerate(variables)})


def solve_ip(model: IpModel, backend: FeasibilityBackend | None = None) -> IpAssignment | None:
    """
    Decide model with backend (DepthFirstBackend by default).

    Raises:
        BudgetExceededError: if the backend gives up.
        RuntimeError: if the backend returns an assignment that violates the model.
    """
    backend = backend or DepthFirstBackend()
    assignment = backend.solve(model)
    if assignment is not None and not model.is_satisfied(assignment):
        raise RuntimeError(f"backend {backend.name!r} returned an assignment that violates the model")
    return assignment


def decode_allocation(instance: Instance, table: TypeTable, assignment: IpAssignment) -> Allocation:
    """
    Concrete allocation giving agent i exactly x_i^t members of type t.

    Members of each type are handed out in index order, agents in index order.

    Raises:
        ValueError: if some type's counts do not sum to its multiplicity.
    """
    bundles: list[set[int]] = [set() for _ in instance.agents]
    for t, group in enumerate(table.members):
        counts = [assignment.x(i, t) for i in instance.agents]
        if sum(counts) != len(group) or min(counts) < 0:
            raise ValueError(f"type t{t + 1} has {len(group)} member(s) but the assignment hands out {counts}")
        cursor = 0
        for i, count in enumerate(counts):
            bundles[i].update(group[cursor:cursor + count])
            cursor += count
    return Allocation(tuple(frozenset(b) for b in bundles))
