"""Structured pass/fail records for certified identities, JSON-serializable."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Any

SCHEMA_TAG = "ssa-report/1"

# keys excluded when comparing or hashing report content (non-deterministic)
VOLATILE_KEYS = {"wall_time_s", "timestamp"}


@dataclass
class VerificationReport:
    """One certified identity: computed quantities, discrepancy, verdict."""

    name: str
    claim: str
    computed: dict[str, Any] = field(default_factory=dict)
    discrepancy: float = 0.0
    tolerance: float = 0.0
    passed: bool = False
    seed: int | None = None
    wall_time_s: float = 0.0
    config: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_discrepancy(
        cls,
        name: str,
        claim: str,
        discrepancy: float,
        tolerance: float,
        computed: dict[str, Any] | None = None,
        seed: int | None = None,
        config: dict[str, Any] | None = None,
    ) -> "VerificationReport":
        return cls(
            name=name,
            claim=claim,
            computed=computed or {},
            discrepancy=float(discrepancy),
            tolerance=float(tolerance),
            passed=bool(discrepancy <= tolerance),
            seed=seed,
            config=config or {},
        )

    def to_dict(self) -> dict[str, Any]:
        return _jsonable(asdict(self))

    def summary_line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        rel = "<=" if self.passed else ">"
        seed = f" seed={self.seed}" if self.seed is not None else ""
        return (
            f"[{verdict}] {self.name}{seed}: discrepancy {self.discrepancy:.3e} "
            f"{rel} tol {self.tolerance:.3e}"
        )


def _jsonable(obj):
    """Recursively convert numpy scalars/arrays so json.dump round-trips."""
    import numpy as np

    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def strip_volatile(obj):
    """Drop timing/timestamp keys so deterministic content can be compared."""
    if isinstance(obj, dict):
        return {k: strip_volatile(v) for k, v in obj.items() if k not in VOLATILE_KEYS}
    if isinstance(obj, list):
        return [strip_volatile(v) for v in obj]
    return obj


def report_body(reports: list[VerificationReport], config: dict | None = None) -> dict:
    return {
        "schema": SCHEMA_TAG,
        "config": _jsonable(config or {}),
        "records": [r.to_dict() for r in reports],
        "all_passed": all(r.passed for r in reports),
    }


def write_report(path: str, body: dict) -> None:
    """Atomic write; key order and float formatting are deterministic."""
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        json.dump(_jsonable(body), fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
