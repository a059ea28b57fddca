"""Structured verdicts and report emission (json / csv / text)."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

EXACT = "EXACT"
SAMPLED = "SAMPLED"


def _plain(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (bool, int, float, str)) or x is None:
        return x
    return str(x)


@dataclass
class CheckResult:
    """One check's verdict: overall pass, per-condition booleans, residuals
    and worst-offender witnesses."""

    name: str
    mode: str
    passed: bool
    conditions: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def add_witness(self, point, residual, label=""):
        self.witnesses.append({
            "point": _plain(np.asarray(point)),
            "residual": float(residual),
            "label": label,
        })

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "mode": self.mode,
            "pass": bool(self.passed),
            "conditions": _plain(self.conditions),
            "residuals": _plain(self.residuals),
            "witnesses": _plain(self.witnesses),
            "details": _plain(self.details),
            "wall_time": float(self.wall_time),
        }


@dataclass
class Report:
    scene: str
    seed: int
    tolerances: dict
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "scene": self.scene,
            "seed": self.seed,
            "tolerances": _plain(self.tolerances),
            "summary": {
                "total": len(self.checks),
                "passed": sum(1 for c in self.checks if c.passed),
                "all_passed": self.all_passed,
            },
            "checks": [c.to_record() for c in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("check,mode,pass,max_residual,conditions\n")
        for c in self.checks:
            res = max([v for v in c.residuals.values()
                       if isinstance(v, (int, float))], default=0.0)
            conds = ";".join(f"{k}={v}" for k, v in sorted(c.conditions.items()))
            out.write(f"{c.name},{c.mode},{c.passed},{res:.3e},{conds}\n")
        return out.getvalue()

    def to_text(self) -> str:
        lines = [f"scene: {self.scene}  seed: {self.seed}"]
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            res = max([v for v in c.residuals.values()
                       if isinstance(v, (int, float))], default=0.0)
            lines.append(f"  [{status}] {c.name} ({c.mode}, residual {res:.3e})")
            for k, v in sorted(c.conditions.items()):
                if not v:
                    lines.append(f"         failed condition: {k}")
        n_pass = sum(1 for c in self.checks if c.passed)
        lines.append(f"{n_pass}/{len(self.checks)} checks passed")
        return "\n".join(lines) + "\n"


def flow_result_csv(fr) -> str:
    """point, image, Jacobian (row-major) and symplectic residual rows."""
    out = io.StringIO()
    n = fr.points.shape[1]
    cols = ([f"x{i}" for i in range(n)] + [f"phi{i}" for i in range(n)]
            + [f"J{i}{j}" for i in range(n) for j in range(n)]
            + ["symplectic_residual"])
    out.write(",".join(cols) + "\n")
    for k in range(fr.points.shape[0]):
        row = list(fr.points[k]) + list(fr.images[k]) + \
            list(fr.jacobians[k].reshape(-1)) + [fr.symplectic_residuals[k]]
        out.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return out.getvalue()
