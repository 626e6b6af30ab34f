"""Command-line entry point: ``hyperlv {simulate,equilibria,sweep,verify}``.

Exit codes: 0 success, 1 configuration or I/O error, 2 a run did not
converge, 3 a verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .dynamics import IntegrationError, Outcome, classify_outcome, integrate, sweep
from .equilibria import enumerate_equilibria, existence_certificates, winner_count_commentary
from .io import (ConfigError, RunConfig, RunReport, atomic_write_text, load_config,
                 record_to_dict, trajectory_csv)
from .verify import check_jacobian, check_lyapunov, check_ratio, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_CHECK_FAILED = 0, 1, 2, 3


def _log(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def _provenance(cfg: RunConfig, started: float) -> dict:
    return {
        "config_hash": cfg.canonical_hash(),
        "tool_version": __version__,
        "wall_time": round(time.perf_counter() - started, 6),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def _out_path(args, name: str) -> Path:
    path = Path(name)
    return path if path.is_absolute() else Path(args.out) / path


def _catalog_section(cfg: RunConfig):
    model = cfg.model
    catalog = enumerate_equilibria(model, cfg.solver)
    continua = [{"winner_set": [i + 1 for i in c.winner_set], "total": c.total,
                 "representative": record_to_dict(c.representative)} for c in catalog.continua]
    certs = [existence_certificates(model, d) for d in range(1, model.n + 1)]
    return catalog, continua, certs


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config, require_state=True)
    model = cfg.model
    traj = integrate(model, cfg.initial_state, cfg.integrator)
    catalog, continua, certs = _catalog_section(cfg)
    outcome = classify_outcome(model, traj, catalog.records)
    checks = {"jacobian_fd": check_jacobian(model, np.random.default_rng(args.seed), points=10)}
    checks["ratio_law"] = check_ratio(model, cfg.initial_state)
    checks["lyapunov"] = check_lyapunov(model, catalog, cfg.initial_state,
                                        np.random.default_rng(args.seed), starts=0)
    report = RunReport(
        command="simulate", outcome=outcome, equilibria=list(catalog.records), continua=continua,
        certificates=certs, commentary=winner_count_commentary(model), truncated=catalog.truncated,
        trajectory={"converged": traj.converged, "t_final": float(traj.times[-1]),
                    "steps": traj.steps, "rejected_steps": traj.rejected_steps,
                    "max_step_error": traj.max_step_error, "mode": traj.mode},
        checks=checks,
    )
    report.provenance = _provenance(cfg, started)
    atomic_write_text(_out_path(args, cfg.outputs.trajectory_path),
                      trajectory_csv(traj.times, traj.states, cfg.outputs.sample_stride))
    atomic_write_text(_out_path(args, cfg.outputs.report_path), report.dumps())
    winners = " ".join(str(i + 1) for i in outcome.winners)
    _log(args, f"{outcome.label.value} winners=[{winners}] t_final={traj.times[-1]:.4g}")
    return EXIT_OK if traj.converged else EXIT_NONCONVERGED


def cmd_equilibria(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    catalog, continua, certs = _catalog_section(cfg)
    report = RunReport(command="equilibria", equilibria=list(catalog.records), continua=continua,
                       certificates=certs, commentary=winner_count_commentary(cfg.model),
                       truncated=catalog.truncated)
    report.provenance = _provenance(cfg, started)
    atomic_write_text(_out_path(args, "equilibria.json"), report.dumps())
    for rec in catalog:
        _log(args, f"{[i + 1 for i in rec.winner_set]} {rec.stability.value} "
                   f"max_re={rec.max_real_part:.4g}")
    return EXIT_OK


def _parse_list(text: Optional[str], kind, flag: str):
    if text is None:
        return []
    try:
        return [kind(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise ConfigError(f"{flag}: {exc}") from exc


def sweep_table(cells) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "t", "label", "winners", "max_final"])
    for c in cells:
        winners = " ".join(str(i + 1) for i in c.outcome.winners) if c.outcome else ""
        writer.writerow([repr(c.k), c.t, c.label.value, winners, repr(c.max_final)])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, require_state=True)
    k_list = _parse_list(args.k_list, float, "--k-list")
    t_list = _parse_list(args.t_list, int, "--t-list") or [cfg.model.t]
    if not k_list:
        raise ConfigError("--k-list: at least one value of k is required")
    if any(k <= 0 for k in k_list) or any(t < 2 for t in t_list):
        raise ConfigError("--k-list values must be positive and --t-list values >= 2")
    cells = sweep(cfg.model, k_list, t_list, cfg.initial_state, cfg.integrator)
    atomic_write_text(_out_path(args, "sweep.csv"), sweep_table(cells))
    for c in cells:
        _log(args, f"k={c.k:g} t={c.t} {c.label.value}"
                   + (f" ({c.error})" if c.error else ""))
    return EXIT_OK if all(c.label is not Outcome.NONCONVERGED for c in cells) else EXIT_NONCONVERGED


def cmd_verify(args) -> int:
    started = time.perf_counter()
    cfg = load_config(args.config)
    catalog = enumerate_equilibria(cfg.model, cfg.solver)
    checks = run_suite(cfg.model, catalog, cfg.initial_state, seed=args.seed)
    report = RunReport(command="verify", checks=checks)
    report.provenance = _provenance(cfg, started)
    atomic_write_text(_out_path(args, "verify.json"), report.dumps())
    failed = [name for name, res in checks.items() if res.get("passed") is False]
    for name, res in checks.items():
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[res.get("passed")]
        _log(args, f"{status} {name}" + (f": {res['skipped']}" if "skipped" in res else ""))
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperlv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
        p.add_argument("--quiet", action="store_true", help="suppress the console summary")
        return p

    common(sub.add_parser("simulate", help="integrate one trajectory and classify it")).set_defaults(
        func=cmd_simulate)
    common(sub.add_parser("equilibria", help="enumerate and classify equilibria")).set_defaults(
        func=cmd_equilibria)
    sp = common(sub.add_parser("sweep", help="outcome table over k and t"))
    sp.add_argument("--k-list", help="comma-separated k values")
    sp.add_argument("--t-list", help="comma-separated interaction orders")
    sp.set_defaults(func=cmd_sweep)
    common(sub.add_parser("verify", help="run the invariant suite")).set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"integration aborted: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
