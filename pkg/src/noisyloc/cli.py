"""Command-line driver.

Every subcommand writes line-delimited JSON records, one object per result,
each carrying schema version, package version and provenance. ``sample``
writes bitstrings instead, with a ``.meta.json`` sidecar.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import __version__
from .circuit import RNG_NAME, Circuit, CircuitParseError, circuit_hash, load_circuit, random_local_circuit
from .dense import (
    DENSE_ENV,
    STATEVECTOR_ENV,
    GuardError,
    entropy_of_spectrum,
    partial_trace,
    simulate,
    von_neumann_entropy,
)
from .lattice import Lattice, coarse_grain, critical_depth, default_width, depth_factor
from .samplers import METHODS, sample_exact, sample_patching, sample_sparse, sample_trajectory, sample_uniform

SCHEMA = 1
EXIT_OK, EXIT_FAILED_CHECK, EXIT_USAGE, EXIT_GUARD = 0, 1, 2, 3


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    circuit_file: str | None = None
    random_spec: dict | None = None
    params: dict = field(default_factory=dict)
    out: str | None = None
    figures: str | None = None
    guards: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.circuit_file is not None and self.random_spec is not None:
            raise ValueError("give either a circuit file or a random circuit spec, not both")


# -- parsing helpers ----------------------------------------------------------------

def int_range(text: str) -> list[int]:
    """'1..4' or '1,2,5' or '3'."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def dims_arg(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace("x", ",").split(",") if x.strip())


def _add_circuit_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("circuit source (exactly one)")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--circuit", metavar="FILE", help="circuit description file (JSON)")
    src.add_argument("--random", action="store_true", help="generate a seeded random brickwork circuit")
    g.add_argument("--dims", type=dims_arg, default=(8,), help="lattice side lengths, e.g. 8 or 2,4")
    g.add_argument("--depth", type=int, default=2)
    g.add_argument("--p", type=float, default=0.3, help="depolarizing strength (random circuits)")
    g.add_argument("--gateset", choices=("haar", "named"), default="haar")
    g.add_argument("--circuit-seed", type=int, default=None, help="defaults to --seed")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--figures", metavar="DIR", help="also render figures into DIR")
    p.add_argument("--max-dense-qubits", type=int, help=f"override {DENSE_ENV}")
    p.add_argument("--max-statevector-qubits", type=int, help=f"override {STATEVECTOR_ENV}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisyloc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="dense state summary: entropies, top bitstrings")
    _add_circuit_args(p)
    _add_common(p)
    p.add_argument("--top", type=int, default=8)

    p = sub.add_parser("sample", help="draw bitstrings")
    _add_circuit_args(p)
    _add_common(p)
    p.add_argument("--method", choices=METHODS, default="exact")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--k", type=int, default=1, help="sparse sampler truncation")
    p.add_argument("--ell", type=int, default=1, help="patching sampler radius")
    p.add_argument("--width", type=int, help="block side (default 2*depth)")

    p = sub.add_parser("verify", help="run the inequality suite over a seeded circuit family")
    _add_common(p)
    p.add_argument("--family", default="1d-haar", help="<D>d-<gateset>, e.g. 1d-haar, 2d-named")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--dims", type=dims_arg, help="lattice side lengths (overrides --n)")
    p.add_argument("--depths", type=int_range, default=[1, 2, 3, 4])
    p.add_argument("--ps", type=float_list, default=[0.1, 0.3, 0.5])
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--states", type=int, default=100, help="random states for the entropy checks")
    p.add_argument("--no-probe", action="store_true", help="skip the deep applicability probe")

    p = sub.add_parser("decompose", help="Pauli coefficient mass by block support")
    _add_circuit_args(p)
    _add_common(p)
    p.add_argument("--width", type=int)
    p.add_argument("--dump", metavar="FILE", help="write every Pauli coefficient as text")

    p = sub.add_parser("markov-gap", help="Markov gap per block over a sweep of ell")
    _add_circuit_args(p)
    _add_common(p)
    p.add_argument("--width", type=int)
    p.add_argument("--ells", type=int_range, help="default 0..m")

    p = sub.add_parser("critical-depth", help="critical depth table")
    _add_common(p)
    p.add_argument("--p", type=float_list, required=True)
    p.add_argument("--D", type=int_range, default=[1])
    p.add_argument("--c", type=float_list, default=[1.0])
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    random_spec = None
    if getattr(args, "random", False):
        random_spec = {
            "dims": list(args.dims), "depth": args.depth, "p": args.p, "gateset": args.gateset,
            "seed": args.seed if args.circuit_seed is None else args.circuit_seed,
        }
    skip = {"command", "seed", "circuit", "random", "out", "figures", "max_dense_qubits",
            "max_statevector_qubits", "circuit_seed", "dims", "depth", "p", "gateset"}
    params = {k: v for k, v in vars(args).items() if k not in skip}
    if args.command in ("verify", "critical-depth"):
        for k in ("dims", "p"):
            if k in vars(args):
                params[k] = getattr(args, k)
    guards = {}
    if args.max_dense_qubits is not None:
        guards[DENSE_ENV] = args.max_dense_qubits
    if args.max_statevector_qubits is not None:
        guards[STATEVECTOR_ENV] = args.max_statevector_qubits
    return RunConfig(args.command, args.seed, getattr(args, "circuit", None), random_spec, params,
                     args.out, args.figures, guards)


# -- output ---------------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        items = sorted(x) if isinstance(x, (set, frozenset)) else x
        return [_jsonable(v) for v in items]
    if isinstance(x, np.generic):
        return x.item()
    return x


class RecordWriter:
    def __init__(self, path: str | None):
        self.path = path
        self.fh = open(path, "w") if path else sys.stdout
        self.records: list[dict] = []

    def write(self, rec: dict) -> None:
        rec = _jsonable(rec)
        self.records.append(rec)
        self.fh.write(json.dumps(rec, sort_keys=True) + "\n")

    def close(self) -> None:
        if self.path:
            self.fh.close()
        else:
            self.fh.flush()


def _base(kind: str, cfg: RunConfig, circuit: Circuit | None = None, origin: dict | None = None) -> dict:
    rec = {"schema": SCHEMA, "kind": kind, "version": __version__, "seed": cfg.seed, "generator": RNG_NAME}
    if circuit is not None:
        rec["circuit_hash"] = circuit_hash(circuit)
        rec["circuit"] = {"dims": list(circuit.lattice.dims), "depth": circuit.depth, "p": circuit.p}
        if origin is not None:
            rec["circuit"]["suite"] = origin
        elif cfg.random_spec:
            rec["circuit"]["random"] = cfg.random_spec
        elif cfg.circuit_file:
            rec["circuit"]["file"] = os.path.basename(cfg.circuit_file)
    return rec


def load_source(cfg: RunConfig) -> Circuit:
    if cfg.circuit_file:
        return load_circuit(cfg.circuit_file)
    spec = cfg.random_spec
    if spec is None:
        raise ValueError("no circuit source")
    return random_local_circuit(Lattice(tuple(spec["dims"])), spec["depth"], seed=spec["seed"],
                                gateset=spec["gateset"], p=spec["p"])


def _grid(circuit: Circuit, width: int | None):
    return coarse_grain(circuit.lattice, width or default_width(circuit.depth))


# -- subcommands ------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, out: RecordWriter) -> int:
    circuit = load_source(cfg)
    rho = simulate(circuit)
    probs = np.real(np.diag(rho.matrix))
    order = sorted(range(len(probs)), key=lambda i: (-round(probs[i], 15), i))[: cfg.params["top"]]
    n = circuit.n
    rec = _base("state_summary", cfg, circuit)
    rec.update({
        "n": n,
        "entropy": von_neumann_entropy(rho),
        "diagonal_entropy": entropy_of_spectrum(np.clip(probs, 0, None)),
        "purity": float(np.real(np.trace(rho.matrix @ rho.matrix))),
        "qubit_entropies": [von_neumann_entropy(partial_trace(rho, [q])) for q in range(n)],
        "top": [{"bits": format(i, f"0{n}b"), "prob": float(probs[i])} for i in order],
    })
    out.write(rec)
    if cfg.figures:
        from .plotting import plot_top_probabilities

        plot_top_probabilities(rec, cfg.figures)
    return EXIT_OK


def cmd_sample(cfg: RunConfig) -> int:
    circuit = load_source(cfg)
    prm = cfg.params
    method, count, seed = prm["method"], prm["count"], cfg.seed
    if count < 0:
        raise ValueError("--count must be >= 0")
    if method == "uniform":
        batch = sample_uniform(circuit.n, seed, count)
    elif method == "exact":
        batch = sample_exact(circuit, seed, count)
    elif method == "trajectory":
        batch = sample_trajectory(circuit, seed, count)
    elif method == "sparse":
        batch = sample_sparse(circuit, _grid(circuit, prm["width"]), prm["k"], seed, count)
    else:
        batch = sample_patching(circuit, _grid(circuit, prm["width"]), prm["ell"], seed, count)
    meta = _base("sample_batch", cfg, circuit) | batch.metadata(circuit)
    if cfg.out:
        batch.write(cfg.out, circuit, meta)
    else:
        sys.stdout.write(batch.text())
        sys.stderr.write(json.dumps(_jsonable(meta), sort_keys=True) + "\n")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: RecordWriter) -> int:
    from .suite import SuiteConfig, run_verify

    prm = cfg.params
    fam = prm["family"]
    try:
        dpart, gateset = fam.split("-", 1)
        D = int(dpart.rstrip("d"))
    except ValueError:
        raise ValueError(f"bad family {fam!r}; expected e.g. 1d-haar") from None
    if gateset not in ("haar", "named"):
        raise ValueError(f"unknown gateset in family {fam!r}")
    dims = tuple(prm["dims"]) if prm.get("dims") else _default_dims(prm["n"], D)
    if len(dims) != D:
        raise ValueError(f"family {fam} needs {D} side lengths, got {dims}")
    scfg = SuiteConfig(dims=dims, gateset=gateset, depths=prm["depths"], ps=prm["ps"], seeds=prm["seeds"],
                       states=prm["states"], probe=not prm["no_probe"], probe_dims=dims)
    if not prm["ps"] or any(not 0 <= p < 1 for p in prm["ps"]):
        raise ValueError("--ps must be values in [0, 1)")
    header = _base("verify_config", cfg)
    header["suite"] = scfg.describe()
    out.write(header)
    failed = total = asserted = 0
    for item in run_verify(scfg):
        for rep in item.reports:
            origin = {"family": fam, "seed": item.seed} if item.circuit is not None else None
            rec = _base("check", cfg, item.circuit, origin)
            rec["instance"] = {"kind": item.kind, "seed": item.seed} | item.extra
            rec.update(rep.to_record())
            out.write(rec)
            total += 1
            asserted += rep.asserted
            failed += rep.failed_assertion
    summary = _base("verify_summary", cfg)
    summary.update({"checks": total, "asserted": asserted, "failed": failed, "pass": failed == 0})
    out.write(summary)
    if cfg.figures:
        from .plotting import plot_verify_slack

        plot_verify_slack(out.records, cfg.figures)
    return EXIT_OK if failed == 0 else EXIT_FAILED_CHECK


def _default_dims(n: int, D: int) -> tuple[int, ...]:
    if D == 1:
        return (n,)
    side = round(n ** (1 / D))
    if side ** D == n:
        return (side,) * D
    if D == 2 and n % 2 == 0:
        return (2, n // 2)
    raise ValueError(f"cannot shape {n} qubits into {D} dimensions; pass --dims")


def cmd_decompose(cfg: RunConfig, out: RecordWriter) -> int:
    from .pauli import pauli_decompose, support_statistics

    circuit = load_source(cfg)
    grid = _grid(circuit, cfg.params["width"])
    dec = pauli_decompose(simulate(circuit))
    rows = support_statistics(dec, grid)
    for row in rows:
        rec = _base("pauli_mass", cfg, circuit)
        rec.update({"width": grid.width, "m": grid.m} | row)
        out.write(rec)
    if cfg.params.get("dump"):
        with open(cfg.params["dump"], "w") as fh:
            fh.write(dec.dump())
    if cfg.figures:
        from .plotting import plot_support_statistics

        plot_support_statistics(rows, cfg.figures)
    return EXIT_OK


def cmd_markov_gap(cfg: RunConfig, out: RecordWriter) -> int:
    from .analysis import markov_gap
    from .dense import MarginalOracle

    circuit = load_source(cfg)
    grid = _grid(circuit, cfg.params["width"])
    ells = cfg.params["ells"] if cfg.params["ells"] is not None else list(range(grid.m + 1))
    oracle = MarginalOracle(circuit)
    rows = []
    for A in range(grid.m):
        for ell in ells:
            rec = _base("markov_gap", cfg, circuit)
            row = {"width": grid.width, "m": grid.m, "block": A, "ell": ell,
                   "boundary": sorted(grid.boundary([A], ell)), "gap": markov_gap(oracle, grid, A, ell)}
            rec.update(row)
            rows.append(row)
            out.write(rec)
    if cfg.figures:
        from .plotting import plot_markov_gaps

        plot_markov_gaps(rows, cfg.figures)
    return EXIT_OK


def cmd_critical_depth(cfg: RunConfig, out: RecordWriter) -> int:
    rows = []
    for p in cfg.params["p"]:
        for D in cfg.params["D"]:
            for c in cfg.params["c"]:
                dstar = critical_depth(p, D, c)
                row = {"p": p, "D": D, "c": c, "critical_depth": dstar,
                       "factor_at": depth_factor(p, dstar, D),
                       "factor_before": depth_factor(p, dstar - 1, D) if dstar > 1 else None}
                rec = _base("critical_depth", cfg)
                rec.update(row)
                rows.append(row)
                out.write(rec)
    if cfg.figures:
        from .plotting import plot_critical_depth

        plot_critical_depth(rows, cfg.figures)
    return EXIT_OK


@contextmanager
def _guard_overrides(guards: dict):
    saved = {k: os.environ.get(k) for k in guards}
    os.environ.update({k: str(v) for k, v in guards.items()})
    try:
        yield
    finally:
        for k, v in saved.items():
            if v is None:
                os.environ.pop(k, None)
            else:
                os.environ[k] = v


def run(cfg: RunConfig) -> int:
    with _guard_overrides(cfg.guards):
        if cfg.command == "sample":
            return cmd_sample(cfg)
        out = RecordWriter(cfg.out)
        try:
            handler = {
                "simulate": cmd_simulate,
                "verify": cmd_verify,
                "decompose": cmd_decompose,
                "markov-gap": cmd_markov_gap,
                "critical-depth": cmd_critical_depth,
            }[cfg.command]
            return handler(cfg, out)
        finally:
            out.close()


def main(argv: Iterable[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(None if argv is None else list(argv))
    try:
        return run(config_from_args(args))
    except CircuitParseError as e:
        print(f"noisyloc: circuit error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except GuardError as e:
        print(f"noisyloc: guard: {e}", file=sys.stderr)
        return EXIT_GUARD
    except (ValueError, OSError) as e:
        print(f"noisyloc: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
