"""Circuit representation, the JSON circuit-file format, and random brickwork circuits."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .lattice import Lattice

FORMAT_VERSION = 1
UNITARY_TOL = 1e-9
RNG_NAME = "numpy.random.PCG64"

_SQ2 = 1.0 / np.sqrt(2.0)
_FIXED_GATES: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}
_PARAM_GATES = {"RZ", "RY", "RX"}


def named_gate_matrix(name: str, params: Sequence[float] = ()) -> np.ndarray:
    name = name.upper()
    if name in _FIXED_GATES:
        if params:
            raise ValueError(f"gate {name} takes no parameters")
        return _FIXED_GATES[name].copy()
    if name in _PARAM_GATES:
        if len(params) != 1:
            raise ValueError(f"gate {name} takes exactly one angle")
        t = float(params[0]) / 2
        c, s = np.cos(t), np.sin(t)
        if name == "RZ":
            return np.diag([np.exp(-1j * t), np.exp(1j * t)])
        if name == "RY":
            return np.array([[c, -s], [s, c]], dtype=complex)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    raise ValueError(f"unknown gate name {name!r}")


class CircuitParseError(ValueError):
    """Malformed circuit document; carries the source position when known."""

    def __init__(self, msg: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(msg + where)


class LocalityError(CircuitParseError):
    pass


@dataclass(frozen=True, eq=False)
class Gate:
    """One- or two-qubit unitary. ``matrix`` uses big-endian order over ``targets``."""

    targets: tuple[int, ...]
    name: str
    params: tuple[float, ...] = ()
    matrix: np.ndarray = field(default=None, repr=False)
    explicit: bool = False
    layer: int = -1

    def __post_init__(self):
        targets = tuple(int(t) for t in self.targets)
        if len(targets) not in (1, 2) or len(set(targets)) != len(targets):
            raise ValueError(f"gate needs one or two distinct targets, got {targets}")
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "params", tuple(float(x) for x in self.params))
        if self.matrix is None:
            mat = named_gate_matrix(self.name, self.params)
            object.__setattr__(self, "explicit", False)
        else:
            mat = np.array(self.matrix, dtype=complex)
            object.__setattr__(self, "explicit", True)
        dim = 2 ** len(targets)
        if mat.shape != (dim, dim):
            raise ValueError(f"gate {self.name} on {targets} needs a {dim}x{dim} matrix, got {mat.shape}")
        if np.max(np.abs(mat.conj().T @ mat - np.eye(dim))) > UNITARY_TOL:
            raise ValueError(f"gate {self.name} on {targets} is not unitary")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def __eq__(self, other):
        if not isinstance(other, Gate):
            return NotImplemented
        return (self.targets == other.targets and self.name == other.name
                and self.params == other.params and self.explicit == other.explicit
                and np.array_equal(self.matrix, other.matrix))

    def __hash__(self):
        return hash((self.targets, self.name, self.params))


@dataclass(frozen=True)
class Circuit:
    """Layers of disjoint gates on a lattice, each followed by depolarizing noise of strength p."""

    lattice: Lattice
    layers: tuple[tuple[Gate, ...], ...]
    p: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValueError(f"noise strength must lie in [0, 1), got {self.p}")
        layers = []
        for i, layer in enumerate(self.layers):
            used: set[int] = set()
            fixed = []
            for g in layer:
                for t in g.targets:
                    if not 0 <= t < self.lattice.n:
                        raise ValueError(f"layer {i}: qubit {t} outside lattice of {self.lattice.n}")
                    if t in used:
                        raise ValueError(f"layer {i}: qubit {t} targeted twice")
                    used.add(t)
                if g.layer != i:
                    g = Gate(g.targets, g.name, g.params, g.matrix if g.explicit else None, layer=i)
                fixed.append(g)
            layers.append(tuple(fixed))
        object.__setattr__(self, "layers", tuple(layers))
        bad = validate_geometric_locality(self, self.lattice)
        if bad:
            raise LocalityError("non-local two-qubit gates: " + "; ".join(v.describe() for v in bad))

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def depth(self) -> int:
        return len(self.layers)

    def with_noise(self, p: float) -> "Circuit":
        return Circuit(self.lattice, self.layers, p)

    def digest(self) -> str:
        return circuit_hash(self)


@dataclass(frozen=True)
class Violation:
    layer: int
    targets: tuple[int, ...]
    name: str

    def describe(self) -> str:
        return f"layer {self.layer} gate {self.name} on {self.targets}"


def validate_geometric_locality(circuit: Circuit, lattice: Lattice) -> list[Violation]:
    """Every two-qubit gate that does not act on lattice neighbours; empty means local."""
    out = []
    for i, layer in enumerate(circuit.layers):
        for g in layer:
            if len(g.targets) == 2 and not lattice.are_neighbors(*g.targets):
                out.append(Violation(i, g.targets, g.name))
    return out


# -- file format -------------------------------------------------------------

def _fail(msg: str) -> None:
    raise CircuitParseError(msg)


def _gate_from_obj(obj: Any, li: int, gi: int) -> Gate:
    where = f"layers[{li}][{gi}]"
    if not isinstance(obj, dict):
        _fail(f"{where}: gate must be an object")
    unknown = set(obj) - {"targets", "name", "params", "matrix"}
    if unknown:
        _fail(f"{where}: unknown fields {sorted(unknown)}")
    targets = obj.get("targets")
    if (not isinstance(targets, list) or len(targets) not in (1, 2)
            or not all(isinstance(t, int) and not isinstance(t, bool) for t in targets)):
        _fail(f"{where}: targets must be a list of one or two integers")
    name = obj.get("name", "")
    if not isinstance(name, str):
        _fail(f"{where}: name must be a string")
    params = obj.get("params", [])
    if not isinstance(params, list) or not all(isinstance(x, (int, float)) for x in params):
        _fail(f"{where}: params must be a list of numbers")
    matrix = None
    if obj.get("matrix") is not None:
        raw = obj["matrix"]
        try:
            arr = np.array(raw, dtype=float)
        except (TypeError, ValueError):
            _fail(f"{where}: matrix must be a nested array of [re, im] pairs")
        if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
            _fail(f"{where}: matrix must be a square array of [re, im] pairs")
        matrix = arr[..., 0] + 1j * arr[..., 1]
    elif not name:
        _fail(f"{where}: gate needs a name or a matrix")
    try:
        return Gate(tuple(targets), name, tuple(params), matrix, layer=li)
    except ValueError as exc:
        raise CircuitParseError(f"{where}: {exc}") from None


def parse_circuit(text: str) -> Circuit:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CircuitParseError(f"syntax error: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        _fail("top level must be an object")
    version = doc.get("version")
    if version != FORMAT_VERSION:
        _fail(f"unsupported version {version!r}; expected {FORMAT_VERSION}")
    dims = doc.get("dims")
    if (not isinstance(dims, list) or not dims
            or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 1 for s in dims)):
        _fail("dims must be a non-empty list of positive integers")
    p = doc.get("p", 0.0)
    if not isinstance(p, (int, float)) or isinstance(p, bool) or not 0 <= p < 1:
        _fail("p must be a number in [0, 1)")
    layers = doc.get("layers", [])
    if not isinstance(layers, list) or not all(isinstance(layer, list) for layer in layers):
        _fail("layers must be a list of gate lists")
    parsed = tuple(
        tuple(_gate_from_obj(g, li, gi) for gi, g in enumerate(layer))
        for li, layer in enumerate(layers)
    )
    try:
        return Circuit(Lattice(tuple(dims)), parsed, float(p))
    except LocalityError:
        raise
    except ValueError as exc:
        raise CircuitParseError(str(exc)) from None


def load_circuit(path) -> Circuit:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_circuit(fh.read())


def circuit_to_obj(circuit: Circuit) -> dict:
    layers = []
    for layer in circuit.layers:
        out = []
        for g in layer:
            obj: dict[str, Any] = {"targets": list(g.targets), "name": g.name}
            if g.params:
                obj["params"] = list(g.params)
            if g.explicit:
                obj["matrix"] = [[[float(z.real), float(z.imag)] for z in row] for row in g.matrix]
            out.append(obj)
        layers.append(out)
    return {"version": FORMAT_VERSION, "dims": list(circuit.lattice.dims),
            "p": float(circuit.p), "layers": layers}


def serialize_circuit(circuit: Circuit, indent: int | None = None) -> str:
    return json.dumps(circuit_to_obj(circuit), indent=indent, sort_keys=True)


def circuit_hash(circuit: Circuit) -> str:
    return hashlib.sha256(serialize_circuit(circuit).encode()).hexdigest()[:16]


# -- random circuits ---------------------------------------------------------

def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix with phase correction."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def brickwork_pairs(lattice: Lattice, t: int) -> list[tuple[int, int]]:
    """Nearest-neighbour pairs of brickwork layer t: axes cycle, parity alternates."""
    axis = (t // 2) % lattice.D
    parity = t % 2
    pairs = []
    for q in range(lattice.n):
        c = list(lattice.coord(q))
        if c[axis] % 2 == parity and c[axis] + 1 < lattice.dims[axis]:
            c[axis] += 1
            pairs.append((q, lattice.index(c)))
    return pairs


_NAMED_LOCALS = ("H", "SH", "TH")


def _named_local(label: str) -> np.ndarray:
    out = np.eye(2, dtype=complex)
    for ch in reversed(label):
        out = _FIXED_GATES[ch] @ out
    return out


def random_local_circuit(lattice: Lattice, d: int, seed: int = 0, gateset: str = "haar",
                         p: float = 0.0) -> Circuit:
    """Seeded brickwork circuit of depth ``d``.

    ``gateset="haar"`` draws each two-qubit gate Haar-randomly. ``"named"`` uses
    CZ preceded by a random choice of H, S·H or T·H on each qubit.
    """
    if d < 0:
        raise ValueError("depth must be >= 0")
    if gateset not in ("haar", "named"):
        raise ValueError(f"unknown gateset {gateset!r}")
    rng = np.random.default_rng(seed)
    layers = []
    for t in range(d):
        gates = []
        for a, b in brickwork_pairs(lattice, t):
            if gateset == "haar":
                gates.append(Gate((a, b), "haar", matrix=haar_unitary(4, rng), layer=t))
            else:
                la, lb = (_NAMED_LOCALS[i] for i in rng.integers(0, len(_NAMED_LOCALS), size=2))
                mat = _FIXED_GATES["CZ"] @ np.kron(_named_local(la), _named_local(lb))
                gates.append(Gate((a, b), f"CZ.{la}.{lb}", matrix=mat, layer=t))
        layers.append(tuple(gates))
    return Circuit(lattice, tuple(layers), p)


def circuit_from_layers(dims: Iterable[int], layers, p: float = 0.0) -> Circuit:
    """Build a circuit from ``[[(name, targets[, params]), ...], ...]`` tuples."""
    built = []
    for i, layer in enumerate(layers):
        gates = []
        for spec in layer:
            name, targets, *rest = spec
            gates.append(Gate(tuple(targets), name, tuple(rest[0]) if rest else (), layer=i))
        built.append(tuple(gates))
    return Circuit(Lattice(tuple(dims)), tuple(built), p)
