"""
JSON documents for instances, allocations and gadget maps.

Instance document (canonical on-disk form):

    {"n": 2, "m": 2, "weights": [1, 2], "utilities": [[2, 1], [1, 2]],
     "meta": {"culture": "ic", "seed": 7}}

Allocation document, resource ids 1-based:

    {"bundles": [[1], [2]]}

Documents are validated by strict pydantic models; a validation failure is
re-raised as InstanceFormatError naming the offending field path (or the JSON
line and column for syntax errors).
"""
from __future__ import annotations

import json
from typing import Annotated, Any

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveInt,
    ValidationError,
    model_validator,
)

from fairalloc.errors import InstanceFormatError
from fairalloc.hardness import GadgetMap
from fairalloc.model import MAX_VALUE, Allocation, Instance

Weight = Annotated[int, Field(ge=1, le=MAX_VALUE)]
Utility = Annotated[int, Field(ge=0, le=MAX_VALUE)]


def _describe(exc: ValidationError) -> str:
    problems = []
    for err in exc.errors():
        where = ".".join(str(part) for part in err["loc"]) or "document"
        problems.append(f"{where}: {err['msg']}")
    return "; ".join(problems)


class InstanceDocument(BaseModel):
    model_config = ConfigDict(strict=True, extra="forbid")

    n: PositiveInt
    m: int = Field(ge=0)
    weights: list[Weight]
    utilities: list[list[Utility]]
    meta: dict[str, Any] | None = None

    @model_validator(mode="after")
    def _check_shape(self) -> InstanceDocument:
        if len(self.weights) != self.n:
            raise ValueError(f"weights has {len(self.weights)} entries but n = {self.n}")
        if len(self.utilities) != self.n:
            raise ValueError(f"utilities has {len(self.utilities)} rows but n = {self.n}")
        for i, row in enumerate(self.utilities):
            if len(row) != self.m:
                raise ValueError(f"utilities row {i} has {len(row)} entries but m = {self.m}")
        return self


class AllocationDocument(BaseModel):
    model_config = ConfigDict(strict=True, extra="forbid")

    bundles: list[list[PositiveInt]]


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------

def serialize_instance(instance: Instance, meta: dict[str, Any] | None = None) -> str:
    doc = InstanceDocument(
        n=instance.n,
        m=instance.m,
        weights=list(instance.weight_list),
        utilities=[list(row) for row in instance.utility_rows],
        meta=meta,
    )
    return doc.model_dump_json(indent=2, exclude_none=True) + "\n"


def parse_instance_document(text: str) -> InstanceDocument:
    try:
        return InstanceDocument.model_validate_json(text)
    except ValidationError as exc:
        raise InstanceFormatError(f"invalid instance document: {_describe(exc)}") from None


def parse_instance(text: str) -> Instance:
    """
    Raises:
        InstanceFormatError: on malformed JSON, missing or extra fields, wrong
            types, negative utilities, non-positive weights, values above
            MAX_VALUE or inconsistent shapes.
    """
    doc = parse_instance_document(text)
    try:
        return Instance.from_lists(doc.weights, doc.utilities, m=doc.m)
    except ValueError as exc:
        raise InstanceFormatError(f"invalid instance document: {exc}") from None


# ---------------------------------------------------------------------------
# Allocations
# ---------------------------------------------------------------------------

def serialize_allocation(allocation: Allocation) -> str:
    return AllocationDocument(bundles=allocation.to_one_based()).model_dump_json() + "\n"


def parse_allocation(text: str) -> Allocation:
    """
    Raises:
        InstanceFormatError: on a malformed document or a resource listed twice.
    """
    try:
        doc = AllocationDocument.model_validate_json(text)
    except ValidationError as exc:
        raise InstanceFormatError(f"invalid allocation document: {_describe(exc)}") from None
    try:
        return Allocation.from_one_based(doc.bundles)
    except ValueError as exc:
        raise InstanceFormatError(f"invalid allocation document: {exc}") from None


# ---------------------------------------------------------------------------
# Gadget maps
# ---------------------------------------------------------------------------

def serialize_gadget_map(gadget: GadgetMap) -> str:
    """1-based agent and resource ids of every gadget of a reduced formula."""
    variables = [
        {
            "variable": i + 1,
            "agents": [a + 1 for a in gadget.variable_agents(i)],
            "resources": [r + 1 for r in gadget.variable_resources(i)],
        }
        for i in range(gadget.num_vars)
    ]
    clauses = [
        {
            "clause": j + 1,
            "agents": [a + 1 for a in gadget.clause_agents(j)],
            "resources": [r + 1 for r in gadget.clause_resources(j)],
        }
        for j in range(gadget.num_clauses)
    ]
    return json.dumps({"big_m": gadget.big_m, "variables": variables, "clauses": clauses}, indent=2) + "\n"
