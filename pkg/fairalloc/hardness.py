"""
3-SAT to SAEF house allocation, and the checks that the translation is faithful.

Layout of the reduced instance, for a formula with n variables and c clauses
(all indices 0-based, agents and resources share the same numbering):

    variable i   agents 2i (weight 1), 2i+1 (weight M)
                 resources 2i (positive), 2i+1 (negative)
    clause j     base = 2n + 4j
                 agents base+0..2 (weight 1, one per literal), base+3 (weight M)
                 resources base+0..2 (one per literal), base+3 (the star)

The weight-1 variable agent values both of its resources at 1, its weight-M
partner values them at M. Literal agent k of clause j values its own
resource and the resource of the opposite literal at M and the star at 1.
The weight-M clause agent values the three literal resources at M. Everything
else is 0, so utilities come from {0, 1, M} and weights from {1, M}.

A fair house allocation gives the weight-1 variable agent its positive
resource exactly when the variable is true.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from fairalloc.errors import BudgetExceededError, InstanceFormatError
from fairalloc.exact import DEFAULT_LEAF_BUDGET, find_house_exact
from fairalloc.model import Allocation, FairnessConcept, Instance, is_fair, is_house

SAT_MAX_VARS = 20
EXHAUSTIVE_MAX_AGENTS = 10


class Literal(NamedTuple):
    var: int
    positive: bool

    def holds(self, assignment: Sequence[bool]) -> bool:
        return assignment[self.var] == self.positive

    def to_int(self) -> int:
        return self.var + 1 if self.positive else -(self.var + 1)

    @classmethod
    def from_int(cls, literal: int) -> Literal:
        if literal == 0:
            raise ValueError("0 is not a literal")
        return cls(abs(literal) - 1, literal > 0)


Clause = tuple[Literal, Literal, Literal]


@dataclass(frozen=True)
class CnfFormula:
    """Conjunction of 3-literal clauses over variables 0..num_vars-1; repeated literals allowed."""

    num_vars: int
    clauses: tuple[Clause, ...] = ()

    def __post_init__(self) -> None:
        if self.num_vars < 1:
            raise ValueError("a formula needs at least one variable")
        clauses = tuple(tuple(Literal(int(v), bool(p)) for v, p in clause) for clause in self.clauses)
        for j, clause in enumerate(clauses):
            if len(clause) != 3:
                raise ValueError(f"clause {j + 1} has {len(clause)} literal(s); exactly 3 are required")
            for lit in clause:
                if not 0 <= lit.var < self.num_vars:
                    raise ValueError(f"clause {j + 1} mentions x{lit.var + 1} but there are {self.num_vars} variable(s)")
        object.__setattr__(self, "clauses", clauses)

    @classmethod
    def from_ints(cls, num_vars: int, clauses: Sequence[Sequence[int]]) -> CnfFormula:
        """Clauses as signed 1-based integers, DIMACS style: [[1, -2, 3]]."""
        return cls(num_vars, tuple(tuple(Literal.from_int(x) for x in clause) for clause in clauses))

    def satisfied_by(self, assignment: Sequence[bool]) -> bool:
        if len(assignment) != self.num_vars:
            raise ValueError(f"assignment has {len(assignment)} value(s) for {self.num_vars} variable(s)")
        return all(any(lit.holds(assignment) for lit in clause) for clause in self.clauses)


@dataclass(frozen=True)
class GadgetMap:
    """Agent and resource ids of every gadget; agents and resources share indices."""

    num_vars: int
    num_clauses: int
    big_m: int

    @property
    def size(self) -> int:
        return 2 * self.num_vars + 4 * self.num_clauses

    def variable_agents(self, i: int) -> tuple[int, int]:
        """(weight-1 agent, weight-M agent) of variable i."""
        return 2 * i, 2 * i + 1

    def variable_resources(self, i: int) -> tuple[int, int]:
        """(positive resource, negative resource) of variable i."""
        return 2 * i, 2 * i + 1

    def clause_agents(self, j: int) -> tuple[int, int, int, int]:
        """Three literal agents, then the weight-M agent, of clause j."""
        base = 2 * self.num_vars + 4 * j
        return base, base + 1, base + 2, base + 3

    def clause_resources(self, j: int) -> tuple[int, int, int, int]:
        """Three literal resources, then the star, of clause j."""
        return self.clause_agents(j)

    def literal_resource(self, lit: Literal) -> int:
        positive, negative = self.variable_resources(lit.var)
        return positive if lit.positive else negative

    def opposite_resource(self, lit: Literal) -> int:
        positive, negative = self.variable_resources(lit.var)
        return negative if lit.positive else positive


def default_big_m(formula: CnfFormula) -> int:
    return 2 * formula.num_vars + 4 * len(formula.clauses) + 2


# ---------------------------------------------------------------------------
# Reduction
# ---------------------------------------------------------------------------

def reduce_3sat(formula: CnfFormula, big_m: int | None = None) -> tuple[Instance, GadgetMap]:
    """
    Build the house-allocation instance of formula.

    Raises:
        ValueError: if big_m < 2.
    """
    big_m = default_big_m(formula) if big_m is None else big_m
    if big_m < 2:
        raise ValueError(f"the large constant must be at least 2, got {big_m}")
    gadget = GadgetMap(formula.num_vars, len(formula.clauses), big_m)
    size = gadget.size
    weights = np.ones(size, dtype=np.int64)
    utilities = np.zeros((size, size), dtype=np.int64)

    for i in range(formula.num_vars):
        light, heavy = gadget.variable_agents(i)
        for r in gadget.variable_resources(i):
            utilities[light, r] = 1
            utilities[heavy, r] = big_m
        weights[heavy] = big_m

    for j, clause in enumerate(formula.clauses):
        *literal_agents, star_agent = gadget.clause_agents(j)
        *literal_resources, star = gadget.clause_resources(j)
        for k, lit in enumerate(clause):
            agent = literal_agents[k]
            utilities[agent, literal_resources[k]] = big_m
            utilities[agent, gadget.opposite_resource(lit)] = big_m
            utilities[agent, star] = 1
            utilities[star_agent, literal_resources[k]] = big_m
        weights[star_agent] = big_m

    logging.debug(
        "Reduced formula with %d variable(s), %d clause(s) to %d agents (M=%d).",
        formula.num_vars, len(formula.clauses), size, big_m,
    )
    return Instance(weights, utilities), gadget


# ---------------------------------------------------------------------------
# SAT side
# ---------------------------------------------------------------------------

def sat_brute_force(formula: CnfFormula, max_vars: int = SAT_MAX_VARS) -> tuple[bool, ...] | None:
    """
    First satisfying assignment in lexicographic order (False before True), or None.

    Raises:
        BudgetExceededError: if the formula has more than max_vars variables.
    """
    if formula.num_vars > max_vars:
        raise BudgetExceededError(f"{formula.num_vars} variables exceed the brute-force limit of {max_vars}")
    for assignment in itertools.product((False, True), repeat=formula.num_vars):
        if formula.satisfied_by(assignment):
            return assignment
    return None


def assignment_to_house_allocation(
    formula: CnfFormula, gadget: GadgetMap, assignment: Sequence[bool]
) -> Allocation:
    """
    The fair house allocation induced by a satisfying assignment.

    In each clause the first true literal's agent takes the star and the
    weight-M agent takes that literal's resource; other literal agents keep
    their own resource.

    Raises:
        ValueError: if assignment has the wrong length or leaves a clause unsatisfied.
    """
    if len(assignment) != formula.num_vars:
        raise ValueError(f"assignment has {len(assignment)} value(s) for {formula.num_vars} variable(s)")
    houses = [-1] * gadget.size
    for i, value in enumerate(assignment):
        light, heavy = gadget.variable_agents(i)
        positive, negative = gadget.variable_resources(i)
        houses[light], houses[heavy] = (positive, negative) if value else (negative, positive)

    for j, clause in enumerate(formula.clauses):
        *literal_agents, star_agent = gadget.clause_agents(j)
        *literal_resources, star = gadget.clause_resources(j)
        first = next((k for k, lit in enumerate(clause) if lit.holds(assignment)), None)
        if first is None:
            raise ValueError(f"clause {j + 1} is not satisfied by the assignment")
        for k in range(3):
            houses[literal_agents[k]] = literal_resources[k]
        houses[literal_agents[first]] = star
        houses[star_agent] = literal_resources[first]
    return Allocation.from_houses(houses)


def extract_assignment(formula: CnfFormula, gadget: GadgetMap, allocation: Allocation) -> tuple[bool, ...]:
    """
    Read the truth assignment off a fair house allocation of the reduced instance.

    Raises:
        ValueError: if allocation is not a SAEF-fair house allocation of the reduced instance.
        RuntimeError: if the extracted assignment does not satisfy formula.
    """
    instance, _ = reduce_3sat(formula, gadget.big_m)
    if not is_house(instance, allocation) or not is_fair(instance, allocation, FairnessConcept.SAEF):
        raise ValueError("allocation is not a SAEF-fair house allocation of the reduced instance")
    assignment = tuple(
        allocation.house_of(gadget.variable_agents(i)[0]) == gadget.variable_resources(i)[0]
        for i in range(formula.num_vars)
    )
    if not formula.satisfied_by(assignment):
        raise RuntimeError(f"internal error: extracted assignment {assignment} does not satisfy the formula")
    return assignment


def verify_reduction(
    formula: CnfFormula,
    *,
    max_agents: int = EXHAUSTIVE_MAX_AGENTS,
    big_m: int | None = None,
    leaf_budget: int = DEFAULT_LEAF_BUDGET,
) -> bool:
    """
    Check that formula is satisfiable iff its reduced instance has a SAEF house allocation.

    Exhaustive when the instance has at most max_agents agents. Larger
    satisfiable formulas are checked one way: the constructed allocation must
    be fair and must read back as a satisfying assignment.

    Raises:
        BudgetExceededError: for a large unsatisfiable formula, or if a search exceeds its budget.
    """
    satisfying = sat_brute_force(formula)
    instance, gadget = reduce_3sat(formula, big_m)

    if gadget.size <= max_agents:
        witness = find_house_exact(instance, FairnessConcept.SAEF, leaf_budget=leaf_budget)
        if witness is not None:
            extract_assignment(formula, gadget, witness)
        agree = (satisfying is None) == (witness is None)
        logging.info("Exhaustive check on %d agents: sat=%s, fair=%s.", gadget.size, satisfying is not None, witness is not None)
        return agree

    if satisfying is None:
        raise BudgetExceededError(
            f"reduced instance has {gadget.size} agents (exhaustive limit {max_agents}) "
            "and the formula is unsatisfiable; only satisfiable formulas can be checked at this size"
        )
    allocation = assignment_to_house_allocation(formula, gadget, satisfying)
    if not is_house(instance, allocation) or not is_fair(instance, allocation, FairnessConcept.SAEF):
        return False
    return formula.satisfied_by(extract_assignment(formula, gadget, allocation))


# ---------------------------------------------------------------------------
# DIMACS
# ---------------------------------------------------------------------------

def parse_dimacs(text: str) -> CnfFormula:
    """
    Parse DIMACS CNF ("p cnf <vars> <clauses>", clauses terminated by 0).

    Raises:
        InstanceFormatError: on a missing header, a malformed token, a clause
            without exactly 3 literals, or a clause count that disagrees with the header.
    """
    header: tuple[int, int] | None = None
    clauses: list[list[int]] = []
    pending: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("c", "%")):
            continue
        if line.startswith("p"):
            parts = line.split()
            if header is not None or len(parts) != 4 or parts[1] != "cnf":
                raise InstanceFormatError(f"line {lineno}: expected a single 'p cnf <vars> <clauses>' header")
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise InstanceFormatError(f"line {lineno}: header counts must be integers") from None
            continue
        if header is None:
            raise InstanceFormatError(f"line {lineno}: clause before the 'p cnf' header")
        for token in line.split():
            try:
                literal = int(token)
            except ValueError:
                raise InstanceFormatError(f"line {lineno}: {token!r} is not an integer literal") from None
            if literal != 0:
                if abs(literal) > header[0]:
                    raise InstanceFormatError(f"line {lineno}: literal {literal} exceeds {header[0]} variable(s)")
                pending.append(literal)
                continue
            if len(pending) != 3:
                raise InstanceFormatError(f"line {lineno}: clause has {len(pending)} literal(s); exactly 3 are required")
            clauses.append(pending)
            pending = []
    if header is None:
        raise InstanceFormatError("missing 'p cnf <vars> <clauses>' header")
    if pending:
        raise InstanceFormatError("last clause is not terminated by 0")
    if len(clauses) != header[1]:
        raise InstanceFormatError(f"header declares {header[1]} clause(s) but {len(clauses)} were found")
    try:
        return CnfFormula.from_ints(header[0], clauses)
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from exc


def to_dimacs(formula: CnfFormula) -> str:
    lines = [f"p cnf {formula.num_vars} {len(formula.clauses)}"]
    lines += [" ".join(str(lit.to_int()) for lit in clause) + " 0" for clause in formula.clauses]
    return "\n".join(lines) + "\n"
