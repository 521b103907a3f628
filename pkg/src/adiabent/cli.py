"""Command-line experiment runner.

Every subcommand reads a JSON config, writes CSV series and/or a JSON report
into ``--out`` and finishes with ``manifest.json`` holding the resolved
parameters and SHA-256 hashes of the artifacts. Floats are written as
``%.12e`` and nothing time-dependent is recorded, so identical inputs give
byte-identical outputs.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from . import __version__
from .aqc import (
    AqcInstance,
    entanglement_peak,
    ground_trace,
    linear_cost,
    paired_landscape,
    ruggedness,
    suppression_onsets,
)
from .dynamics import write_csv
from .entanglement import TransferExperiment, run_transfer_experiment
from .errors import AmbiguousRegionError, NumericalError, ValidationError
from .scheduler import (
    EdgeCaseConfig,
    edge_case_activation,
    gap_slope,
    min_gap_bound,
    scan_min_gap,
    swap_at_critical,
)
from .spectral import RankOneActivation, eigensystem_at_mu

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def _num(x: float) -> str:
    return "{:.12e}".format(x)


def _jsonable(obj: Any) -> Any:
    """Nested structure with every float rendered as a fixed-format string-free number."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(_num(x))
    return obj


def _dump(path: Path, payload: Any) -> None:
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _require(cfg: Dict[str, Any], key: str) -> Any:
    if key not in cfg:
        raise ValidationError(f"config is missing {key!r}")
    return cfg[key]


def _activation_from(cfg: Dict[str, Any], rng: np.random.Generator) -> RankOneActivation:
    if "random" in cfg:
        n = int(cfg["random"].get("n", 4))
        if n < 1:
            raise ValidationError("random.n must be positive")
        d = np.sort(rng.uniform(0.0, float(cfg["random"].get("spread", 10.0)), n))
        v = rng.normal(size=n) + 1j * rng.normal(size=n)
        return RankOneActivation(d, v / np.linalg.norm(v))
    d = np.asarray(_require(cfg, "d"), dtype=np.float64)
    if "edge" in cfg:
        e = cfg["edge"]
        return edge_case_activation(d, EdgeCaseConfig(int(e["i"]), float(e["epsilon"]), d.size))
    v = np.asarray(_require(cfg, "v"), dtype=np.complex128)
    if cfg.get("normalize", False):
        return RankOneActivation.normalized(d, v)
    return RankOneActivation(d, v)


def cmd_spectral_flow(cfg, args, out: Path, rng) -> Dict[str, Any]:
    act = _activation_from(cfg, rng)
    grid = int(args.grid or cfg.get("grid", 201))
    if grid < 2:
        raise ValidationError("grid must be at least 2")
    mus = np.linspace(float(cfg.get("mu_min", 0.0)), float(cfg.get("mu_max", 2.0 * act.spread or 1.0)), grid)
    n = act.dim
    refs = np.concatenate([np.eye(n), act.v[:, None]], axis=1)
    header = ["mu"] + [f"s_{k}" for k in range(n)] + [f"label_{k}" for k in range(n)]
    rows = []
    for mu in mus:
        es = eigensystem_at_mu(act, float(mu))
        ov = np.abs(refs.conj().T @ es.eigenvectors)
        rows.append([float(mu), *map(float, es.eigenvalues), *(int(j) for j in np.argmax(ov, axis=0))])
    write_csv(out / "spectral_flow.csv", header, rows)
    return {"d": act.d, "v_re": act.v.real, "v_im": act.v.imag, "mu_min": mus[0], "mu_max": mus[-1], "grid": grid}


def cmd_swap_demo(cfg, args, out: Path, rng) -> Dict[str, Any]:
    d = np.asarray(_require(cfg, "d"), dtype=np.float64)
    ec = EdgeCaseConfig(int(cfg.get("i", 0)), float(_require(cfg, "epsilon")), d.size)
    ks = cfg.get("k", list(range(ec.i, d.size - 1)))
    ks = [int(k) for k in (ks if isinstance(ks, list) else [ks])]
    header = ["k", "mu_critical", "delta_mu", "before_v_k", "before_d_next_next", "after_d_next_k", "after_v_next", "swapped"]
    rows = []
    for k in ks:
        rec = swap_at_critical(d, ec, k, float(_require(cfg, "delta_mu")))
        rows.append([k, rec.mu_critical, rec.delta_mu, *rec.overlaps(), int(rec.swapped)])
    write_csv(out / "swap.csv", header, rows)
    return {"d": d, "i": ec.i, "epsilon": ec.epsilon, "k": ks, "delta_mu": float(cfg["delta_mu"])}


def _experiment(cfg, epsilon=None, mu=None) -> TransferExperiment:
    return TransferExperiment(
        a=tuple(_require(cfg, "a")),
        b=tuple(_require(cfg, "b")),
        i=int(cfg.get("i", 0)),
        j=int(cfg.get("j", 1)),
        ell=int(cfg.get("ell", 0)),
        epsilon=float(_require(cfg, "epsilon") if epsilon is None else epsilon),
        mu_final=float(_require(cfg, "mu_final") if mu is None else mu),
    )


def cmd_transfer(cfg, args, out: Path, rng) -> Dict[str, Any]:
    exp = _experiment(cfg)
    modes = [args.mode] if args.mode else list(cfg.get("modes", ["predict", "integrate"]))
    kw = {k: cfg[k] for k in ("margin", "time_factor", "steps") if k in cfg}
    report: Dict[str, Any] = {"intervals": {"normalized": exp.intervals(), "raw_weight": exp.intervals("raw")}}
    for mode in modes:
        extra = kw if mode == "integrate" else {}
        report[mode] = run_transfer_experiment(exp, mode, **extra).to_dict()
    if "epsilon_ladder" in cfg:
        ladder = []
        for eps in cfg["epsilon_ladder"]:
            r = run_transfer_experiment(_experiment(cfg, epsilon=float(eps)))
            ladder.append({"epsilon": float(eps), "PI_direct": r.pi_direct[1], "PI_complement": r.pi_complement[1], "classification": r.classification})
        report["epsilon_ladder"] = ladder
    _dump(out / "transfer.json", report)
    if "mu_scan" in cfg:
        sc = cfg["mu_scan"]
        grid = int(args.grid or sc.get("grid", 101))
        rows = []
        for mu in np.linspace(float(sc["min"]), float(sc["max"]), grid):
            try:
                r = run_transfer_experiment(_experiment(cfg, mu=float(mu)))
            except AmbiguousRegionError:
                continue
            rows.append([float(mu), r.pi_direct[1], r.pi_complement[1], r.classification])
        write_csv(out / "transfer_scan.csv", ["mu", "PI_direct", "PI_complement", "classification"], rows)
    resolved = {k: cfg[k] for k in sorted(cfg)}
    resolved["modes"] = modes
    return resolved


def _aqc_instance(cfg) -> AqcInstance:
    n = int(_require(cfg, "n_qubits"))
    cost = _require(cfg, "cost")
    kw = {k: cfg[k] for k in ("mu_cap", "horizon", "degenerate") if cfg.get(k) is not None}
    if cost == "linear":
        return AqcInstance(n, linear_cost(n), **kw)
    if isinstance(cost, dict) and "paired" in cost:
        p = cost["paired"]
        f = paired_landscape(n, int(p["partner"]), float(p.get("second", 0.1)), float(p.get("plateau", 3.0)))
        return AqcInstance(n, f, **kw)
    if isinstance(cost, dict):
        return AqcInstance.from_mapping(cost, **kw)
    return AqcInstance(n, cost, **kw)


def cmd_aqc(cfg, args, out: Path, rng) -> Dict[str, Any]:
    inst = _aqc_instance(cfg)
    mode = {"predict": "instantaneous", "integrate": "integrated", None: None}[args.mode]
    mode = mode or cfg.get("mode", "instantaneous")
    grid = int(args.grid or cfg.get("grid", 200))
    tr = ground_trace(inst, grid, mode, steps=int(cfg.get("steps", 20000)))
    write_csv(out / "trace.csv", tr.header(inst.n_qubits), tr.rows().tolist())
    thr = float(cfg.get("threshold", 0.1))
    onsets = suppression_onsets(tr, thr)
    peak, mu_peak = entanglement_peak(tr)
    summary = {
        "onsets": {inst.bitstring(x): onsets[x] for x in range(inst.dim)},
        "entanglement_peak": peak,
        "mu_at_peak": mu_peak,
        "e_initial": tr.entanglement[0],
        "e_final": tr.entanglement[-1],
        "final_minimizer_weight": float(np.sum(np.abs(tr.amplitudes[-1, inst.minimizers]) ** 2)),
        "flagged_points": int(np.sum(tr.flagged)),
    }
    if "energy_threshold" in cfg:
        summary["ruggedness"] = ruggedness(inst, float(cfg["energy_threshold"]))
    _dump(out / "summary.json", summary)
    return {"instance": json.loads(inst.to_json()), "mode": mode, "grid": grid, "threshold": thr}


def cmd_gap_scan(cfg, args, out: Path, rng) -> Dict[str, Any]:
    d = np.asarray(_require(cfg, "d"), dtype=np.float64)
    i = int(cfg.get("i", 0))
    eps_list = [float(e) for e in _require(cfg, "epsilons")]
    rows, pos = [], []
    for eps in eps_list:
        sc = scan_min_gap(d, EdgeCaseConfig(i, eps, d.size), cfg.get("mu_max"))
        rows.append([eps, sc.min_gap, sc.mu_at_min, sc.pair, min_gap_bound(d, eps), int(sc.min_gap < 1e-12)])
        if eps > 0:
            pos.append((eps, sc.min_gap))
    write_csv(out / "gap_scan.csv", ["epsilon", "min_gap", "mu_at_min", "pair", "bound", "crossing"], rows)
    fit = {"slope": gap_slope(*zip(*pos)) if len(pos) >= 2 and all(g > 0 for _, g in pos) else None}
    _dump(out / "gap_fit.json", fit)
    return {"d": d, "i": i, "epsilons": eps_list, "mu_max": cfg.get("mu_max")}


COMMANDS: Dict[str, Callable] = {
    "spectral-flow": cmd_spectral_flow,
    "swap-demo": cmd_swap_demo,
    "transfer": cmd_transfer,
    "aqc-run": cmd_aqc,
    "gap-scan": cmd_gap_scan,
}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adiabent", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, type=Path)
        s.add_argument("--out", required=True, type=Path)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--grid", type=int, default=None)
        s.add_argument("--mode", choices=("predict", "integrate"), default=None)
    return p


def run(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        try:
            cfg = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ValidationError("config must be a JSON object")
        args.out.mkdir(parents=True, exist_ok=True)
        rng = np.random.default_rng(args.seed)
        resolved = COMMANDS[args.command](cfg, args, args.out, rng)
        artifacts = sorted(p for p in args.out.iterdir() if p.is_file() and p.name != "manifest.json")
        _dump(
            args.out / "manifest.json",
            {
                "command": args.command,
                "version": __version__,
                "seed": args.seed,
                "grid": args.grid,
                "mode": args.mode,
                "config": resolved,
                "artifacts": {p.name: _sha256(p) for p in artifacts},
            },
        )
    except (ValidationError, KeyError, TypeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
