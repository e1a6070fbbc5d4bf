"""Versioned JSON reports written by the command line tools."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from datetime import datetime, timezone

from limdep import __version__

SCHEMA_VERSION = 1


def _plain(obj):
    if is_dataclass(obj):
        return {k: _plain(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalar
        return obj.item()
    return obj


def _check_schema(data: dict, kind: str) -> None:
    if data.get("kind") != kind:
        raise ValueError(f"not a {kind} report")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(
            f"report schema {data.get('schema_version')} != supported {SCHEMA_VERSION}"
        )


@dataclass
class AnalysisReport:
    dataset: str
    zero_share: float
    n_train: int
    n_test: int
    table: dict
    sweep: dict
    weights: dict
    mu_center: float
    learner: dict
    seeds: dict
    created: str = ""
    tool_version: str = __version__
    schema_version: int = SCHEMA_VERSION
    kind: str = "analysis"

    def __post_init__(self):
        cors = list(self.table.values()) + list(self.sweep.get("correlations", []))
        for v in cors:
            if v is not None and not -1.0 <= v <= 1.0:
                raise ValueError(f"correlation {v} outside [-1, 1]")

    @classmethod
    def build(cls, *, dataset, zero_share, n_train, n_test, table, sweep, weights,
              mu_center, learner, seeds):
        return cls(
            dataset=dataset,
            zero_share=float(zero_share),
            n_train=int(n_train),
            n_test=int(n_test),
            table=_plain(table),
            sweep=_plain(sweep),
            weights=_plain(weights),
            mu_center=float(mu_center),
            learner=_plain(learner),
            seeds=_plain(seeds),
            created=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "AnalysisReport":
        _check_schema(data, "analysis")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "AnalysisReport":
        return cls.from_dict(json.loads(text))


@dataclass
class VerificationReport:
    spec: dict
    n: int
    seed: int
    checks: list
    warnings: list = field(default_factory=list)
    tool_version: str = __version__
    schema_version: int = SCHEMA_VERSION
    kind: str = "verification"

    @property
    def passed(self) -> bool:
        return all(_get(c, "passed") for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not _get(c, "passed")]

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["checks"] = [_finite(_plain(c)) for c in self.checks]
        out["passed"] = self.passed
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "VerificationReport":
        _check_schema(data, "verification")
        data = dict(data)
        data.pop("passed", None)
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "VerificationReport":
        return cls.from_dict(json.loads(text))


def _get(check, key):
    return check[key] if isinstance(check, dict) else getattr(check, key)


def _finite(d):
    if isinstance(d, dict):
        return {k: _finite(v) for k, v in d.items()}
    if isinstance(d, float) and not math.isfinite(d):
        return None
    return d
