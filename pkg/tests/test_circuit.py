import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisyloc.circuit import (
    Circuit,
    CircuitParseError,
    Gate,
    LocalityError,
    brickwork_pairs,
    circuit_from_layers,
    circuit_hash,
    haar_unitary,
    load_circuit,
    named_gate_matrix,
    parse_circuit,
    random_local_circuit,
    serialize_circuit,
    validate_geometric_locality,
)
from noisyloc.lattice import build_lattice

DOCS = os.path.join(os.path.dirname(__file__), os.pardir, "docs", "circuits")

GOLDEN = {
    "bell_noisy.json": "b496f9e3d1b57eaa",
    "chain6_named.json": "3ce5076dc468abd6",
    "grid2x3.json": "8f3ce8e29299a0e5",
}


def doc(dims, layers, p=0.0, **extra):
    return json.dumps({"version": 1, "dims": dims, "p": p, "layers": layers, **extra})


def test_parse_schema_instance():
    c = parse_circuit(doc([4], [[{"name": "CNOT", "targets": [0, 1]}]], p=0.1))
    assert c.n == 4 and c.depth == 1 and c.p == 0.1
    assert c.layers[0][0].layer == 0


def test_parse_non_neighbour_is_locality_error():
    with pytest.raises(LocalityError):
        parse_circuit(doc([4], [[{"name": "CZ", "targets": [0, 2]}]]))


def test_parse_zero_layers():
    c = parse_circuit(doc([3], []))
    assert c.depth == 0 and c.n == 3


def test_parse_syntax_error_has_position():
    with pytest.raises(CircuitParseError) as exc:
        parse_circuit('{"version": 1,\n "dims": [2],,}')
    assert exc.value.line == 2 and exc.value.column is not None


@pytest.mark.parametrize("layers,fragment", [
    ([[{"name": "H", "targets": [0]}, {"name": "X", "targets": [0]}]], "twice"),
    ([[{"name": "BOGUS", "targets": [0]}]], "unknown gate"),
    ([[{"name": "H", "targets": [0], "colour": "red"}]], "unknown fields"),
    ([[{"targets": [0]}]], "name or a matrix"),
    ([[{"name": "U", "targets": [0], "matrix": [[[1, 0], [1, 0]], [[0, 0], [1, 0]]]}]], "not unitary"),
    ([[{"name": "U", "targets": [0, 1], "matrix": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}]], "4x4"),
    ([[{"name": "RZ", "targets": [0]}]], "one angle"),
    ([[{"name": "H", "targets": [5]}]], "outside"),
])
def test_parse_errors(layers, fragment):
    with pytest.raises(CircuitParseError, match=fragment):
        parse_circuit(doc([3], layers))


@pytest.mark.parametrize("text", [
    json.dumps({"version": 2, "dims": [2], "layers": []}),
    json.dumps({"version": 1, "dims": [], "layers": []}),
    json.dumps({"version": 1, "dims": [2], "p": 1.0, "layers": []}),
    json.dumps([1, 2]),
])
def test_parse_bad_header(text):
    with pytest.raises(CircuitParseError):
        parse_circuit(text)


def test_explicit_matrix_overrides_name():
    x = [[[0, 0], [1, 0]], [[1, 0], [0, 0]]]
    c = parse_circuit(doc([1], [[{"name": "H", "targets": [0], "matrix": x}]]))
    assert np.allclose(c.layers[0][0].matrix, named_gate_matrix("X"))


def test_rotation_gates():
    t = 0.3
    assert np.allclose(named_gate_matrix("RZ", [t]), np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)]))
    ry = named_gate_matrix("RY", [np.pi])
    assert np.allclose(ry @ np.array([1, 0]), [0, 1])
    rx = named_gate_matrix("RX", [np.pi])
    assert np.allclose(rx, -1j * named_gate_matrix("X"))


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_golden_hashes(name):
    c = load_circuit(os.path.join(DOCS, name))
    assert circuit_hash(c) == GOLDEN[name]


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_round_trip(name):
    c = load_circuit(os.path.join(DOCS, name))
    again = parse_circuit(serialize_circuit(c))
    assert again == c
    assert circuit_hash(again) == circuit_hash(c)
    assert serialize_circuit(again, indent=1) == serialize_circuit(c, indent=1)


@given(st.integers(1, 6), st.integers(0, 4), st.integers(0, 2 ** 63 - 1), st.sampled_from(["haar", "named"]))
@settings(max_examples=25, deadline=None)
def test_round_trip_random(n, d, seed, gateset):
    c = random_local_circuit(build_lattice([n]), d, seed=seed, gateset=gateset, p=0.25)
    again = parse_circuit(serialize_circuit(c))
    assert again == c and circuit_hash(again) == circuit_hash(c)


def test_random_determinism():
    lat = build_lattice([4])
    a = random_local_circuit(lat, 2, seed=7)
    b = random_local_circuit(lat, 2, seed=7)
    assert a == b and circuit_hash(a) == circuit_hash(b)
    assert circuit_hash(random_local_circuit(lat, 2, seed=8)) != circuit_hash(a)


def test_random_depth_zero():
    c = random_local_circuit(build_lattice([5]), 0, seed=1)
    assert c.depth == 0 and c.layers == ()


@pytest.mark.parametrize("dims", [[6], [3, 4]])
def test_haar_gates_are_unitary(dims):
    c = random_local_circuit(build_lattice(dims), 4, seed=11)
    for layer in c.layers:
        for g in layer:
            assert g.matrix.shape == (4, 4)
            assert np.max(np.abs(g.matrix.conj().T @ g.matrix - np.eye(4))) < 1e-9


def test_haar_unitary_phase_distribution():
    # the phase correction makes diagonal phases uniform; the mean of U_00 vanishes
    rng = np.random.default_rng(0)
    vals = np.array([haar_unitary(2, rng)[0, 0] for _ in range(4000)])
    assert abs(vals.mean()) < 0.05
    assert np.mean(np.abs(vals) ** 2) == pytest.approx(0.5, abs=0.03)


def test_brickwork_1d_alternates():
    lat = build_lattice([5])
    assert brickwork_pairs(lat, 0) == [(0, 1), (2, 3)]
    assert brickwork_pairs(lat, 1) == [(1, 2), (3, 4)]


def test_brickwork_2d_cycles_axes():
    lat = build_lattice([2, 2])
    assert brickwork_pairs(lat, 0) == [(0, 2), (1, 3)]
    assert brickwork_pairs(lat, 2) == [(0, 1), (2, 3)]


def test_brickwork_covers_every_bond():
    lat = build_lattice([3, 4])
    bonds = set()
    for t in range(4):
        bonds |= set(brickwork_pairs(lat, t))
    every = {(a, b) for a in range(lat.n) for b in lat.neighbors(a) if a < b}
    assert bonds == every


def test_validate_locality_ok_and_violation():
    c = random_local_circuit(build_lattice([6]), 3, seed=2, gateset="named")
    assert validate_geometric_locality(c, c.lattice) == []
    # a 6-chain circuit checked against a 2x3 grid: (2, 3) are not neighbours there
    bad = validate_geometric_locality(c, build_lattice([2, 3]))
    assert bad and all(not build_lattice([2, 3]).are_neighbors(*v.targets) for v in bad)
    assert any(v.targets == (2, 3) for v in bad)


def test_validate_single_qubit_only():
    c = circuit_from_layers([2, 2], [[("H", (0,)), ("T", (3,))]])
    assert validate_geometric_locality(c, build_lattice([4])) == []


def test_circuit_rejects_overlap():
    with pytest.raises(ValueError, match="twice"):
        circuit_from_layers([3], [[("CZ", (0, 1)), ("CZ", (1, 2))]])


def test_circuit_rejects_bad_p():
    with pytest.raises(ValueError):
        circuit_from_layers([2], [], p=1.0)


def test_gate_needs_distinct_targets():
    with pytest.raises(ValueError):
        Gate((1, 1), "CZ")


def test_with_noise_keeps_gates():
    c = random_local_circuit(build_lattice([4]), 2, seed=3)
    assert c.with_noise(0.2).layers == c.layers
    assert isinstance(c.with_noise(0.2), Circuit)
