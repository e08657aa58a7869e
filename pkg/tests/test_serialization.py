"""
Unit tests for fairalloc/serialization.py: JSON documents.
"""
import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))
from fairalloc.errors import InstanceFormatError
from fairalloc.hardness import CnfFormula, reduce_3sat
from fairalloc.model import Allocation, Instance
from fairalloc.serialization import (
    parse_allocation,
    parse_instance,
    parse_instance_document,
    serialize_allocation,
    serialize_gadget_map,
    serialize_instance,
)


def test_instance_document_shape():
    inst = Instance.from_lists([1, 10], [[5, 10], [5, 10]])
    doc = json.loads(serialize_instance(inst, meta={"culture": "ic", "seed": 7}))
    assert doc == {"n": 2, "m": 2, "weights": [1, 10], "utilities": [[5, 10], [5, 10]], "meta": {"culture": "ic", "seed": 7}}
    assert parse_instance(serialize_instance(inst)) == inst


def test_meta_is_kept_on_the_document():
    text = '{"n": 1, "m": 1, "weights": [2], "utilities": [[3]], "meta": {"seed": 4}}'
    assert parse_instance_document(text).meta == {"seed": 4}


def test_no_resources():
    inst = parse_instance('{"n": 2, "m": 0, "weights": [1, 1], "utilities": [[], []]}')
    assert (inst.n, inst.m) == (2, 0)


@pytest.mark.parametrize("text, where", [
    ('{"n": 1, "m": 1, "utilities": [[3]]}', "weights"),
    ('{"n": 1, "m": 1, "weights": [1], "utilities": [[-3]]}', "utilities.0.0"),
    ('{"n": 1, "m": 1, "weights": [0], "utilities": [[3]]}', "weights.0"),
    ('{"n": 1, "m": 1, "weights": ["1"], "utilities": [[3]]}', "weights.0"),
    ('{"n": 1, "m": 1, "weights": [1], "utilities": [[3]], "extra": 1}', "extra"),
    ('{"n": 2, "m": 1, "weights": [1], "utilities": [[3], [4]]}', "weights has 1"),
    ('{"n": 1, "m": 2, "weights": [1], "utilities": [[3]]}', "row 0"),
    ('{"n": 1, "m": 1, "weights": [1], ', "document"),
    ('{"n": 1, "m": 1, "weights": [1], "utilities": [[9223372036854775807]]}', "utilities.0.0"),
    ('{"n": 1, "m": 1, "weights": [4611686018427387905], "utilities": [[3]]}', "weights.0"),
])
def test_malformed_instances(text, where):
    with pytest.raises(InstanceFormatError, match="invalid instance document") as info:
        parse_instance(text)
    assert where in str(info.value)


def test_largest_accepted_value():
    top = 2**62
    inst = parse_instance(f'{{"n": 1, "m": 1, "weights": [{top}], "utilities": [[{top}]]}}')
    assert inst.weight_list == (top,) and inst.utility_rows == ((top,),)


def test_allocation_round_trip():
    alloc = Allocation.from_one_based([[1, 3], [], [2]])
    text = serialize_allocation(alloc)
    assert json.loads(text) == {"bundles": [[1, 3], [], [2]]}
    assert parse_allocation(text) == alloc


@pytest.mark.parametrize("text", [
    '{"bundles": [[0]]}',
    '{"bundles": [[1], [1]]}',
    '{"bundle": [[1]]}',
    "not json",
])
def test_malformed_allocations(text):
    with pytest.raises(InstanceFormatError, match="invalid allocation document"):
        parse_allocation(text)


def test_gadget_map_document():
    _, gadget = reduce_3sat(CnfFormula.from_ints(2, [[1, -2, 2]]))
    doc = json.loads(serialize_gadget_map(gadget))
    assert doc["big_m"] == 2 * 2 + 4 + 2
    assert doc["variables"][1] == {"variable": 2, "agents": [3, 4], "resources": [3, 4]}
    assert doc["clauses"] == [{"clause": 1, "agents": [5, 6, 7, 8], "resources": [5, 6, 7, 8]}]
