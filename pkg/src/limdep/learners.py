"""Supervised learners behind one fit/predict contract.

``forest`` is a bagged ensemble of regression trees (bootstrap resamples,
``mtry`` random candidate features per node, variance-reduction splits,
leaf means). Binary targets are fitted as regression on {0, 1}, so the
forest output estimates ``P[c = 1 | x]``.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np

from limdep._tree import build_tree, predict_forest
from limdep.errors import ConstantTarget, NotSynthetic, SchemaMismatch, TooFewRows

KINDS = ("forest", "constant_mean", "linear_least_squares", "oracle")
KIND_TAGS = ("zeta_hat", "p_hat", "mu_hat", "generic")
P_HAT_CLIP = 1e-6
FORMAT_VERSION = 1


@dataclass(frozen=True)
class LearnerSpec:
    kind: str = "forest"
    n_trees: int = 500
    mtry: int | None = None
    min_leaf: int = 5
    max_depth: int | None = None
    seed: int = 0
    bootstrap: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")

    def resolved_mtry(self, n_features: int, binary: bool) -> int:
        if self.mtry is not None:
            if self.mtry > n_features:
                raise ValueError(f"mtry={self.mtry} exceeds {n_features} features")
            return self.mtry
        if binary:
            return max(1, int(math.floor(math.sqrt(n_features))))
        return max(1, n_features // 3)

    def with_(self, **changes) -> "LearnerSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class FittedModel:
    spec: LearnerSpec
    kind_tag: str
    training_rows: int
    n_features: int
    state: dict[str, Any] = field(repr=False)


def _thread_count() -> int:
    raw = os.environ.get("LIMDEP_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return 1


def _tree_seeds(seed: int, n_trees: int) -> list[np.random.SeedSequence]:
    # one independent stream per tree index; construction order is irrelevant
    return [np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, t]) for t in range(n_trees)]


def _grow(x, y, spec: LearnerSpec, mtry: int, seq: np.random.SeedSequence):
    rng = np.random.default_rng(seq)
    n = y.shape[0]
    if spec.bootstrap:
        sample = rng.integers(0, n, size=n).astype(np.int64)
    else:
        sample = np.arange(n, dtype=np.int64)
    tree_seed = int(rng.integers(0, 2**63 - 1))
    max_depth = -1 if spec.max_depth is None else spec.max_depth
    return build_tree(x, y, sample, mtry, spec.min_leaf, max_depth, tree_seed)


def _fit_forest(x, y, spec: LearnerSpec, binary: bool) -> dict:
    mtry = spec.resolved_mtry(x.shape[1], binary)
    seeds = _tree_seeds(spec.seed, spec.n_trees)
    threads = _thread_count()
    if threads > 1 and spec.n_trees > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(lambda s: _grow(x, y, spec, mtry, s), seeds))
    else:
        trees = [_grow(x, y, spec, mtry, s) for s in seeds]
    sizes = np.array([t[0].shape[0] for t in trees], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    return {
        "mtry": mtry,
        "offsets": offsets,
        "feature": np.concatenate([t[0] for t in trees]),
        "threshold": np.concatenate([t[1] for t in trees]),
        "left": np.concatenate([t[2] for t in trees]),
        "right": np.concatenate([t[3] for t in trees]),
        "value": np.concatenate([t[4] for t in trees]),
    }


def _is_binary(y: np.ndarray) -> bool:
    return bool(np.all((y == 0) | (y == 1)))


def fit(spec: LearnerSpec, features, target, kind_tag: str = "generic") -> FittedModel:
    if kind_tag not in KIND_TAGS:
        raise ValueError(f"kind_tag must be one of {KIND_TAGS}")
    if spec.kind == "oracle":
        raise NotSynthetic("oracle learners are built with fit_oracle(population, which)")
    x = np.ascontiguousarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    y = np.ascontiguousarray(target, dtype=np.float64).ravel()
    if x.shape[0] != y.shape[0]:
        raise SchemaMismatch("features and target have different row counts")
    n = y.shape[0]
    if n < 2 * spec.min_leaf:
        raise TooFewRows(f"{n} rows < 2 * min_leaf = {2 * spec.min_leaf}")

    if spec.kind == "constant_mean":
        state = {"mean": float(y.mean())}
    elif spec.kind == "linear_least_squares":
        design = np.hstack([np.ones((n, 1)), x])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        state = {"coef": coef}
    else:
        if np.all(y == y[0]):
            raise ConstantTarget("forest needs a non-constant target")
        binary = kind_tag == "p_hat" or _is_binary(y)
        state = _fit_forest(x, y, spec, binary)
    return FittedModel(spec, kind_tag, n, x.shape[1], state)


def predict(model: FittedModel, features) -> np.ndarray:
    x = np.ascontiguousarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.shape[1] != model.n_features:
        raise SchemaMismatch(
            f"model expects {model.n_features} feature columns, got {x.shape[1]}"
        )
    kind = model.spec.kind
    st = model.state
    if kind == "constant_mean":
        out = np.full(x.shape[0], st["mean"])
    elif kind == "linear_least_squares":
        out = st["coef"][0] + x @ st["coef"][1:]
    elif kind == "oracle":
        from limdep.synth import SyntheticSpec, latent_means

        p_x, mu_x = latent_means(SyntheticSpec.from_dict(st["synthetic_spec"]), x)
        out = {"p": p_x, "mu": mu_x, "zeta": p_x * mu_x}[st["which"]]
        return out.copy()
    else:
        out = predict_forest(
            x, st["offsets"], st["feature"], st["threshold"], st["left"], st["right"], st["value"]
        )
    if model.kind_tag == "p_hat":
        out = np.clip(out, P_HAT_CLIP, 1.0 - P_HAT_CLIP)
    return out


_ORACLE_TAGS = {"p": "p_hat", "mu": "mu_hat", "zeta": "zeta_hat"}


def fit_oracle(population, which: str) -> FittedModel:
    """Model whose predictions are the population's true ``p_x``, ``mu_x`` or ``p_x mu_x``.

    Predictions are recomputed from the feature rows, so ``mu`` is defined on
    rows with ``c = 0`` as well.
    """
    if which not in _ORACLE_TAGS:
        raise ValueError("which must be 'p', 'mu' or 'zeta'")
    spec = getattr(population, "spec", None)
    if spec is None or not hasattr(population, "p_x"):
        raise NotSynthetic("oracle learners need a synthetic population")
    return FittedModel(
        LearnerSpec(kind="oracle", n_trees=1),
        kind_tag=_ORACLE_TAGS[which],
        training_rows=population.n,
        n_features=spec.d,
        state={"which": which, "synthetic_spec": spec.to_dict()},
    )


def save_model(model: FittedModel, path) -> None:
    """Write a model to an ``.npz`` archive; loading gives identical predictions."""
    meta = {
        "format_version": FORMAT_VERSION,
        "spec": asdict(model.spec),
        "kind_tag": model.kind_tag,
        "training_rows": model.training_rows,
        "n_features": model.n_features,
    }
    arrays = {}
    scalars = {}
    for key, val in model.state.items():
        if isinstance(val, np.ndarray):
            arrays[f"state__{key}"] = val
        else:
            scalars[key] = val
    meta["state"] = scalars
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8), **arrays)


def load_model(path) -> FittedModel:
    with np.load(path, allow_pickle=False) as archive:
        meta = json.loads(archive["meta"].tobytes().decode("utf-8"))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {meta.get('format_version')}")
        state = dict(meta["state"])
        for key in archive.files:
            if key.startswith("state__"):
                state[key[len("state__"):]] = archive[key]
    return FittedModel(
        LearnerSpec(**meta["spec"]),
        meta["kind_tag"],
        meta["training_rows"],
        meta["n_features"],
        state,
    )
