"""Run configuration and report (de)serialization.

Files use 1-based neuron indices; the library is 0-based.  Everything is
plain JSON with 64-bit floats, written atomically.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .dynamics import IntegratorOptions, Outcome, OutcomeReport
from .equilibria import EquilibriumRecord, ExistenceCertificate, SolverConfig, Stability
from .model import CompetitionModel


class ConfigError(ValueError):
    pass


# -- primitive helpers ------------------------------------------------------

def _num(x: Optional[float]) -> Any:
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def _unnum(x: Any) -> Optional[float]:
    if x is None:
        return None
    return float(x)


def _one_based(idx) -> list[int]:
    return [int(i) + 1 for i in idx]


def _zero_based(idx) -> tuple[int, ...]:
    return tuple(int(i) - 1 for i in idx)


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


# -- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class OutputOptions:
    trajectory_path: str = "trajectory.csv"
    report_path: str = "report.json"
    sample_stride: int = 10


@dataclass(frozen=True)
class RunConfig:
    model: CompetitionModel
    initial_state: Optional[np.ndarray] = None
    integrator: IntegratorOptions = IntegratorOptions()
    solver: SolverConfig = SolverConfig()
    outputs: OutputOptions = OutputOptions()
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        m = self.model
        integ = self.integrator
        out: dict[str, Any] = {
            "model": {"n": m.n, "t": m.t, "k": m.k, "w": m.w.tolist()},
            "initial_state": None if self.initial_state is None else np.asarray(self.initial_state).tolist(),
            "integrator": {"mode": integ.mode, "h": integ.h, "T_max": integ.t_max,
                           "tol_conv": integ.tol_conv},
            "solver": {"bisection_tol": self.solver.bisection_tol, "max_d": self.solver.max_d,
                       "stability_margin": self.solver.stability_margin},
            "outputs": asdict(self.outputs),
        }
        out.update(self.extra)
        return out

    def canonical_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _get(d: dict, key: str, where: str, kind, required: bool = True, default=None):
    if key not in d:
        if required:
            raise ConfigError(f"{where}.{key}: missing required field")
        return default
    val = d[key]
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{where}.{key}: expected a number, got {val!r}")
        return float(val)
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            if isinstance(val, float) and val.is_integer():
                return int(val)
            raise ConfigError(f"{where}.{key}: expected an integer, got {val!r}")
        return val
    if kind is list:
        if not isinstance(val, list):
            raise ConfigError(f"{where}.{key}: expected a list, got {type(val).__name__}")
        for i, v in enumerate(val):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{where}.{key}[{i}]: expected a number, got {v!r}")
        return [float(v) for v in val]
    if kind is dict:
        if not isinstance(val, dict):
            raise ConfigError(f"{where}.{key}: expected an object")
        return val
    if kind is str:
        if not isinstance(val, str):
            raise ConfigError(f"{where}.{key}: expected a string")
        return val
    return val


_KNOWN = {"model", "initial_state", "integrator", "solver", "outputs"}


def config_from_dict(d: dict, require_state: bool = False) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("config: top level must be a JSON object")
    md = _get(d, "model", "config", dict)
    w = _get(md, "w", "model", list)
    t = _get(md, "t", "model", int)
    k = _get(md, "k", "model", float)
    n = _get(md, "n", "model", int, required=False, default=len(w))
    if n != len(w):
        raise ConfigError(f"model.n: {n} does not match len(model.w) = {len(w)}")
    try:
        model = CompetitionModel(t=t, k=k, w=w)
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc

    z0 = None
    if d.get("initial_state") is not None:
        z0 = _get(d, "initial_state", "config", list)
        if len(z0) != n:
            raise ConfigError(f"initial_state: length {len(z0)} does not match n = {n}")
        if any(v <= 0 for v in z0):
            raise ConfigError("initial_state: every entry must be strictly positive")
        z0 = np.array(z0)
    elif require_state:
        raise ConfigError("config.initial_state: missing required field")

    idict = _get(d, "integrator", "config", dict, required=False, default={})
    base = IntegratorOptions()
    try:
        integ = IntegratorOptions(
            mode=_get(idict, "mode", "integrator", str, required=False, default=base.mode),
            h=_get(idict, "h", "integrator", float, required=False, default=base.h),
            t_max=_get(idict, "T_max", "integrator", float, required=False, default=base.t_max),
            tol_conv=_get(idict, "tol_conv", "integrator", float, required=False, default=base.tol_conv),
        )
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from exc

    sdict = _get(d, "solver", "config", dict, required=False, default={})
    sbase = SolverConfig()
    max_d = sdict.get("max_d")
    if max_d is not None:
        max_d = _get(sdict, "max_d", "solver", int)
        if max_d > n:
            raise ConfigError(f"solver.max_d: {max_d} exceeds n = {n}")
    try:
        solver = SolverConfig(
            bisection_tol=_get(sdict, "bisection_tol", "solver", float, required=False,
                               default=sbase.bisection_tol),
            max_d=max_d,
            stability_margin=_get(sdict, "stability_margin", "solver", float, required=False,
                                  default=sbase.stability_margin),
        )
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc

    odict = _get(d, "outputs", "config", dict, required=False, default={})
    obase = OutputOptions()
    outputs = OutputOptions(
        trajectory_path=_get(odict, "trajectory_path", "outputs", str, required=False,
                             default=obase.trajectory_path),
        report_path=_get(odict, "report_path", "outputs", str, required=False,
                         default=obase.report_path),
        sample_stride=_get(odict, "sample_stride", "outputs", int, required=False,
                           default=obase.sample_stride),
    )
    if outputs.sample_stride < 1:
        raise ConfigError("outputs.sample_stride: must be >= 1")
    extra = {key: v for key, v in d.items() if key not in _KNOWN}
    return RunConfig(model=model, initial_state=z0, integrator=integ, solver=solver,
                     outputs=outputs, extra=extra)


def load_config(path, require_state: bool = False) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc
    return config_from_dict(data, require_state=require_state)


# -- records -----------------------------------------------------------------------

def record_to_dict(rec: EquilibriumRecord) -> dict:
    eigs = None
    if rec.eigenvalues is not None:
        eigs = [[float(e.real), float(e.imag)] for e in rec.eigenvalues]
    return {
        "winner_set": _one_based(rec.winner_set),
        "z_star": [float(v) for v in rec.z_star],
        "tau": _num(rec.tau),
        "tau_bounds": None if rec.tau_bounds is None else [_num(v) for v in rec.tau_bounds],
        "residual": float(rec.residual),
        "stability": rec.stability.value,
        "theory_verdict": None if rec.theory_verdict is None else rec.theory_verdict.value,
        "max_real_part": _num(rec.max_real_part),
        "eigenvalues": eigs,
        "notes": list(rec.notes),
    }


def record_from_dict(d: dict) -> EquilibriumRecord:
    eigs = None
    if d.get("eigenvalues") is not None:
        eigs = np.array([complex(re, im) for re, im in d["eigenvalues"]], dtype=np.complex128)
    tb = d.get("tau_bounds")
    return EquilibriumRecord(
        winner_set=_zero_based(d["winner_set"]),
        z_star=np.array(d["z_star"], dtype=np.float64),
        residual=float(d["residual"]),
        tau=_unnum(d.get("tau")),
        stability=Stability(d["stability"]),
        max_real_part=_unnum(d.get("max_real_part")),
        eigenvalues=eigs,
        theory_verdict=None if d.get("theory_verdict") is None else Stability(d["theory_verdict"]),
        tau_bounds=None if tb is None else (float(tb[0]), float(tb[1])),
        notes=tuple(d.get("notes", ())),
    )


def certificate_to_dict(c: ExistenceCertificate) -> dict:
    return {
        "d": c.d,
        "dominance_ok": c.dominance_ok,
        "spread_ok": c.spread_ok,
        "spread_bound": _num(c.spread_bound),
        "homogeneous_inputs": c.homogeneous_inputs,
        "tau_bounds": None if c.tau_bounds is None else [_num(v) for v in c.tau_bounds],
    }


def certificate_from_dict(d: dict) -> ExistenceCertificate:
    tb = d.get("tau_bounds")
    return ExistenceCertificate(
        d=int(d["d"]), dominance_ok=bool(d["dominance_ok"]), spread_ok=d.get("spread_ok"),
        spread_bound=_unnum(d.get("spread_bound")),
        homogeneous_inputs=bool(d["homogeneous_inputs"]),
        tau_bounds=None if tb is None else (float(tb[0]), float(tb[1])),
    )


def outcome_to_dict(o: OutcomeReport) -> dict:
    return {
        "label": o.label.value,
        "winners": _one_based(o.winners),
        "final_values": [float(v) for v in o.final_values],
        "matched_equilibrium": None if o.matched_equilibrium is None
        else _one_based(o.matched_equilibrium.winner_set),
        "low_confidence": o.low_confidence,
        "alternatives": [_one_based(a) for a in o.alternatives],
        "notes": list(o.notes),
    }


def outcome_from_dict(d: dict, records=()) -> OutcomeReport:
    matched = None
    if d.get("matched_equilibrium") is not None:
        key = _zero_based(d["matched_equilibrium"])
        matched = next((r for r in records if r.winner_set == key), None)
        if matched is None:
            raise ValueError(f"matched equilibrium {d['matched_equilibrium']} not among records")
    return OutcomeReport(
        label=Outcome(d["label"]),
        winners=_zero_based(d["winners"]),
        final_values=np.array(d["final_values"], dtype=np.float64),
        matched_equilibrium=matched,
        low_confidence=bool(d["low_confidence"]),
        alternatives=tuple(_zero_based(a) for a in d.get("alternatives", ())),
        notes=tuple(d.get("notes", ())),
    )


@dataclass
class RunReport:
    command: str
    outcome: Optional[OutcomeReport] = None
    equilibria: list[EquilibriumRecord] = field(default_factory=list)
    continua: list[dict] = field(default_factory=list)
    certificates: list[ExistenceCertificate] = field(default_factory=list)
    commentary: Optional[str] = None
    truncated: bool = False
    trajectory: Optional[dict] = None
    checks: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "outcome": None if self.outcome is None else outcome_to_dict(self.outcome),
            "equilibria": [record_to_dict(r) for r in self.equilibria],
            "continua": self.continua,
            "certificates": [certificate_to_dict(c) for c in self.certificates],
            "commentary": self.commentary,
            "truncated": self.truncated,
            "trajectory": self.trajectory,
            "checks": self.checks,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        records = [record_from_dict(r) for r in d.get("equilibria", [])]
        outcome = None if d.get("outcome") is None else outcome_from_dict(d["outcome"], records)
        return cls(
            command=d["command"], outcome=outcome, equilibria=records,
            continua=list(d.get("continua", [])),
            certificates=[certificate_from_dict(c) for c in d.get("certificates", [])],
            commentary=d.get("commentary"), truncated=bool(d.get("truncated", False)),
            trajectory=d.get("trajectory"), checks=dict(d.get("checks", {})),
            provenance=dict(d.get("provenance", {})),
        )

    def dumps(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))


# -- CSV ------------------------------------------------------------------------------

def trajectory_csv(times, states, stride: int = 10) -> str:
    times = np.asarray(times)
    states = np.asarray(states)
    n = states.shape[1]
    rows = list(range(0, len(times), stride))
    if rows[-1] != len(times) - 1:
        rows.append(len(times) - 1)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["time"] + [f"z_{i + 1}" for i in range(n)])
    for r in rows:
        writer.writerow([repr(float(times[r]))] + [repr(float(v)) for v in states[r]])
    return buf.getvalue()


def read_csv_table(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
