"""Command-line driver: channel inspection, capacity runs, scans, QEC checks.

Every output file is paired with a run-manifest JSON sidecar recording the
command, its parameters and the artifact version; ``choicap replay`` re-runs a
manifest and reproduces the output byte for byte. CSV output is RFC-4180
(CRLF line endings, header row always present) and numbers are printed with
12 significant digits. Worker threads come from the CHOICAP_THREADS
environment variable and never affect results.
"""

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import channels as ch_mod
from . import information as info_mod
from . import optimize as opt_mod
from . import qec as qec_mod
from . import qmath
from .errors import CapExceeded, InvariantViolation, SpecError

EXIT_OK = 0
EXIT_SPEC_ERROR = 2
EXIT_CAP_EXCEEDED = 3
EXIT_INVARIANT = 4

CAPACITY_FACTOR = {
    "coherent": 1.0,
    "choi-coherent": 1.0,
    "holevo": 1.0,
    "mutual": 0.5,
    "choi-mutual": 0.5,
}


def fmt(x) -> str:
    """Numbers with 12 significant digits; booleans lowercase."""
    if isinstance(x, bool) or isinstance(x, np.bool_):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _load_json_arg(arg: str) -> dict:
    text = arg.strip()
    if not text.startswith("{"):
        try:
            text = Path(arg).read_text()
        except OSError as exc:
            raise SpecError(f"cannot read spec file {arg!r}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"malformed JSON spec: {exc}") from exc


def _matrix_json(mat: np.ndarray) -> list:
    stacked = np.stack([np.asarray(mat).real, np.asarray(mat).imag], axis=-1)
    return stacked.tolist()


def _config_from_args(args) -> opt_mod.OptimizerConfig:
    return opt_mod.OptimizerConfig(
        restarts=args.restarts,
        max_iters=args.max_iters,
        seed=args.seed,
        dim_cap=args.dim_cap,
        ensemble_size=getattr(args, "ensemble_size", 4),
    )


def _config_params(cfg: opt_mod.OptimizerConfig) -> dict:
    return {
        "restarts": cfg.restarts,
        "max_iters": cfg.max_iters,
        "step_tol": cfg.step_tol,
        "obj_tol": cfg.obj_tol,
        "seed": cfg.seed,
        "dim_cap": cfg.dim_cap,
        "ensemble_size": cfg.ensemble_size,
    }


def write_manifest(out_path: Path, command: str, params: dict, duration_s: float):
    manifest = {
        "artifact": "choicap",
        "version": __version__,
        "command": command,
        "params": params,
        "output": out_path.name,
        "duration_s": duration_s,
    }
    side = out_path.with_suffix(out_path.suffix + ".manifest.json")
    side.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return side


# ---------------------------------------------------------------------------
# info
# ---------------------------------------------------------------------------


def cmd_info(args) -> int:
    ch = ch_mod.channel_from_spec(_load_json_arg(args.channel))
    k = ch.kraus
    tp_defect = float(
        np.max(np.abs(np.tensordot(k.conj(), k, axes=([0, 1], [0, 1])) - np.eye(ch.dim_in)))
    )
    choi = ch_mod.choi_of(ch)
    eigs = np.linalg.eigvalsh(np.asarray(choi.matrix))[::-1]
    rank = int(np.sum(eigs > ch_mod.CHOI_RANK_CUTOFF))
    print(f"dim_in: {ch.dim_in}")
    print(f"dim_out: {ch.dim_out}")
    print(f"kraus_count: {ch.rank}")
    print(f"choi_rank: {rank}")
    print(f"trace_preservation_residual: {fmt(tp_defect)}")
    print("choi_eigenvalues: " + ", ".join(fmt(x) for x in eigs))
    if args.degradability:
        cfg = _config_from_args(args)
        residual = opt_mod.degradability_residual(ch, cfg)
        verdict = "numerically degradable" if residual < 1e-3 else "not numerically degradable"
        print(f"degradability_residual: {fmt(residual)} ({verdict})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# capacity
# ---------------------------------------------------------------------------


def _argmax_json(argmax) -> dict:
    if isinstance(argmax, info_mod.Ensemble):
        return {
            "kind": "ensemble",
            "members": [
                {"probability": p, "matrix": _matrix_json(s.matrix)} for p, s in argmax.members
            ],
        }
    if isinstance(argmax, ch_mod.ChoiState):
        return {
            "kind": "choi",
            "layout": list(argmax.state.layout.dims),
            "matrix": _matrix_json(argmax.matrix),
        }
    return {
        "kind": "density",
        "layout": list(argmax.layout.dims),
        "matrix": _matrix_json(argmax.matrix),
    }


def run_capacity(channel_spec: dict, measure: str, copies: int, cfg: opt_mod.OptimizerConfig) -> dict:
    ch = ch_mod.channel_from_spec(channel_spec)
    result = opt_mod.maximize(measure, ch, copies, cfg)
    best = result.best_value
    estimate = max(0.0, best.per_use() * CAPACITY_FACTOR[measure])
    return {
        "measure": measure,
        "copies_requested": copies,
        "channel_uses": best.copies,
        "best_value": best.value,
        "per_use": best.per_use(),
        "capacity_estimate": estimate,
        "converged": result.converged,
        "argmax": _argmax_json(result.argmax),
        "restart_log": [
            {"label": rec.label, "iterations": rec.iterations, "value": rec.value}
            for rec in result.restart_log
        ],
    }


def cmd_capacity(args) -> int:
    spec = _load_json_arg(args.channel)
    cfg = _config_from_args(args)
    started = time.monotonic()
    payload = run_capacity(spec, args.measure, args.copies, cfg)
    duration = time.monotonic() - started
    summary = (
        f"{args.measure} best={fmt(payload['best_value'])} "
        f"per_use={fmt(payload['per_use'])} estimate={fmt(payload['capacity_estimate'])}"
    )
    print(summary)
    if args.out:
        out_path = Path(args.out)
        out_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        params = {
            "channel": spec,
            "measure": args.measure,
            "copies": args.copies,
            "config": _config_params(cfg),
        }
        write_manifest(out_path, "capacity", params, duration)
    return EXIT_OK


# ---------------------------------------------------------------------------
# scan
# ---------------------------------------------------------------------------


def parse_range(text: str) -> list[float]:
    """A single value or an inclusive start:stop:step range."""
    parts = text.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise SpecError(f"range must be 'start:stop:step' or a single number, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0:
        raise SpecError("range step must be positive")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(max(count, 0))]


def build_scan(family: str, family_params: dict):
    """Returns (channel factory, grid tuples, parameter column names)."""
    if family == "dephrasure":
        ps = family_params["p_values"]
        ratio = family_params["q_ratio"]
        grid = [(p, ratio * p) for p in ps]
        return (lambda p, q: ch_mod.dephrasure(p, q)), grid, ["p", "q"]
    if family == "pauli":
        p1s = family_params["p1_values"]
        p2s = family_params["p2_values"]
        p3s = family_params["p3_values"]
        grid = []
        for p1 in p1s:
            for p2 in p2s:
                for p3 in p3s:
                    p0 = 1.0 - p1 - p2 - p3
                    if p0 < -1e-12:
                        raise SpecError(f"probabilities p1+p2+p3 exceed 1 at ({p1}, {p2}, {p3})")
                    grid.append((p0, p1, p2, p3))
        return (lambda p0, p1, p2, p3: ch_mod.pauli(p0, p1, p2, p3)), grid, [
            "p0",
            "p1",
            "p2",
            "p3",
        ]
    raise SpecError(f"unknown scan family {family!r}; known: ['dephrasure', 'pauli']")


SCAN_VALUE_COLUMNS = [
    "one_shot",
    "two_shot",
    "gap",
    "undoubled_diff",
    "choi_one_shot",
    "one_shot_converged",
    "two_shot_converged",
    "choi_one_shot_converged",
]


def run_scan(family: str, family_params: dict, cfg: opt_mod.OptimizerConfig) -> str:
    """Execute a scan and render the RFC-4180 CSV text."""
    factory, grid, names = build_scan(family, family_params)
    rows = opt_mod.scan(factory, grid, cfg, names)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(names + SCAN_VALUE_COLUMNS)
    for row in rows:
        writer.writerow([fmt(row[c]) for c in names + SCAN_VALUE_COLUMNS])
    return buf.getvalue()


def cmd_scan(args) -> int:
    cfg = _config_from_args(args)
    if args.family == "dephrasure":
        family_params = {"p_values": parse_range(args.p), "q_ratio": args.q_ratio}
    else:
        for flag in ("p1", "p2", "p3"):
            if getattr(args, flag) is None:
                raise SpecError(f"pauli scans need --{flag}")
        family_params = {
            "p1_values": parse_range(args.p1),
            "p2_values": parse_range(args.p2),
            "p3_values": parse_range(args.p3),
        }
    started = time.monotonic()
    text = run_scan(args.family, family_params, cfg)
    duration = time.monotonic() - started
    out_path = Path(args.out)
    out_path.write_bytes(text.encode())
    params = {"family": args.family, "family_params": family_params, "config": _config_params(cfg)}
    write_manifest(out_path, "scan", params, duration)
    n_rows = max(text.count("\r\n") - 1, 0)
    print(f"wrote {n_rows} rows to {out_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# qec-check
# ---------------------------------------------------------------------------


def cmd_qec_check(args) -> int:
    code = qec_mod.code_from_spec(_load_json_arg(args.code))
    ch = ch_mod.channel_from_spec(_load_json_arg(args.channel))
    report = qec_mod.kl_check(code, ch, tol=args.tol)
    print(f"satisfied: {fmt(report.satisfied)}")
    print(f"residual: {fmt(report.residual)}")
    print(f"degeneracy_rank: {report.degeneracy_rank}")
    print(
        "effective_error_probs: "
        + ", ".join(fmt(x) for x in report.effective_error_probs)
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# sample-choi
# ---------------------------------------------------------------------------


def run_sample_choi(dim: int, count: int, seed: int) -> dict:
    layout = qmath.DimLayout((dim, dim))
    rng_children = np.random.SeedSequence(seed).spawn(count)
    samples = []
    for child in rng_children:
        rng = np.random.default_rng(child)
        raw = rng.uniform(-1.0, 1.0, opt_mod.raw_length(dim * dim))
        omega = opt_mod.decode(opt_mod.StateParam(raw, "choi", layout))
        marg = qmath._partial_trace_matrix(np.asarray(omega.matrix), (dim, dim), (1,))
        residual = float(np.max(np.abs(marg - np.eye(dim) / dim)))
        samples.append({"matrix": _matrix_json(omega.matrix), "marginal_residual": residual})
    return {"dim": dim, "count": count, "seed": seed, "samples": samples}


def cmd_sample_choi(args) -> int:
    started = time.monotonic()
    payload = run_sample_choi(args.dim, args.count, args.seed)
    duration = time.monotonic() - started
    worst = max((s["marginal_residual"] for s in payload["samples"]), default=0.0)
    print(f"sampled {args.count} Choi states, worst marginal residual {fmt(worst)}")
    if args.out:
        out_path = Path(args.out)
        out_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        params = {"dim": args.dim, "count": args.count, "seed": args.seed}
        write_manifest(out_path, "sample-choi", params, duration)
    return EXIT_OK


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------


def cmd_replay(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read manifest: {exc}") from exc
    command = manifest.get("command")
    params = manifest.get("params", {})
    out_path = Path(args.out)
    started = time.monotonic()
    if command == "scan":
        cfg = opt_mod.OptimizerConfig(**_filter_config(params["config"]))
        text = run_scan(params["family"], params["family_params"], cfg)
        out_path.write_bytes(text.encode())
    elif command == "capacity":
        cfg = opt_mod.OptimizerConfig(**_filter_config(params["config"]))
        payload = run_capacity(params["channel"], params["measure"], params["copies"], cfg)
        out_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    elif command == "sample-choi":
        payload = run_sample_choi(params["dim"], params["count"], params["seed"])
        out_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        raise SpecError(f"manifest command {command!r} cannot be replayed")
    duration = time.monotonic() - started
    write_manifest(out_path, command, params, duration)
    print(f"replayed {command} into {out_path}")
    return EXIT_OK


def _filter_config(params: dict) -> dict:
    allowed = {"restarts", "max_iters", "step_tol", "obj_tol", "seed", "dim_cap", "ensemble_size"}
    return {k: v for k, v in params.items() if k in allowed}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_config_flags(sub, restarts_default=32):
    sub.add_argument("--restarts", type=int, default=restarts_default)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--max-iters", dest="max_iters", type=int, default=2000)
    sub.add_argument("--dim-cap", dest="dim_cap", type=int, default=256)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="choicap",
        description="Channel information measures and Choi-state capacities.",
    )
    parser.add_argument("--version", action="version", version=f"choicap {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p_info = subs.add_parser("info", help="inspect a channel spec")
    p_info.add_argument("channel", help="JSON spec text or path")
    p_info.add_argument("--degradability", action="store_true")
    _add_config_flags(p_info, restarts_default=16)
    p_info.set_defaults(func=cmd_info)

    p_cap = subs.add_parser("capacity", help="maximize an information measure")
    p_cap.add_argument("channel", help="JSON spec text or path")
    p_cap.add_argument(
        "--measure",
        choices=sorted(CAPACITY_FACTOR),
        default="coherent",
    )
    p_cap.add_argument("--copies", type=int, default=1)
    p_cap.add_argument("--ensemble-size", dest="ensemble_size", type=int, default=4)
    p_cap.add_argument("--out", default=None)
    _add_config_flags(p_cap)
    p_cap.set_defaults(func=cmd_capacity)

    p_scan = subs.add_parser("scan", help="superadditivity scan over a channel family")
    p_scan.add_argument("family", choices=["dephrasure", "pauli"])
    p_scan.add_argument("--p", help="dephrasure p grid, 'start:stop:step' or value")
    p_scan.add_argument("--q-ratio", dest="q_ratio", type=float, default=3.0)
    p_scan.add_argument("--p1", help="pauli p1 grid")
    p_scan.add_argument("--p2", help="pauli p2 grid")
    p_scan.add_argument("--p3", help="pauli p3 grid")
    p_scan.add_argument("--out", required=True)
    _add_config_flags(p_scan)
    p_scan.set_defaults(func=cmd_scan)

    p_qec = subs.add_parser("qec-check", help="exact correctability check")
    p_qec.add_argument("code", help="code spec JSON text or path")
    p_qec.add_argument("channel", help="channel spec JSON text or path")
    p_qec.add_argument("--tol", type=float, default=qec_mod.DEFAULT_KL_TOL)
    p_qec.set_defaults(func=cmd_qec_check)

    p_sample = subs.add_parser("sample-choi", help="sample random Choi states")
    p_sample.add_argument("--dim", type=int, default=2)
    p_sample.add_argument("--count", type=int, default=100)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--out", default=None)
    p_sample.set_defaults(func=cmd_sample_choi)

    p_replay = subs.add_parser("replay", help="re-run a manifest")
    p_replay.add_argument("--manifest", required=True)
    p_replay.add_argument("--out", required=True)
    p_replay.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "scan" and args.family == "dephrasure" and not args.p:
        parser.error("dephrasure scans need --p")
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC_ERROR
    except CapExceeded as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP_EXCEEDED
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC_ERROR


if __name__ == "__main__":
    sys.exit(main())
