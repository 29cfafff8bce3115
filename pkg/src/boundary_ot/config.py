"""YAML run configurations: schema checks, bundled problems, and run summaries."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .driver import ConfigError, RunConfig
from .ground_cost import CostError, GroundCost
from .measure import DensityPiece, MeasureError, normalize, uniform

SCHEMA_VERSION = 1
BUNDLED = ("nwse", "grid4x4", "five_point", "zero_quadrant", "mu_xy", "lp_gallery", "cube5")
_TOP_KEYS = {"version", "name", "provenance", "reference", "domain", "grid", "cost", "density",
             "targets", "options", "variants"}


@dataclass
class NamedRun:
    name: str
    config: RunConfig
    reference: str | None = None
    document: dict = field(default_factory=dict)


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("boundary_ot") / "configs" / f"{name}.yaml"))


def read_document(source) -> dict:
    """Parse a config from a path, a bundled problem name, or an already-loaded mapping."""
    if isinstance(source, dict):
        return source
    path = Path(source)
    if not path.exists() and str(source) in BUNDLED:
        path = bundled_path(str(source))
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read config {source}: {exc}"]) from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"malformed YAML: {exc}"]) from exc
    if not isinstance(doc, dict):
        raise ConfigError(["config must be a mapping"])
    return doc


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _targets(spec: dict, dim: int, side: float, problems: list) -> tuple[np.ndarray, np.ndarray]:
    if "random" in spec:
        rnd = spec["random"]
        count, seed = int(rnd.get("count", 0)), int(rnd.get("seed", 0))
        pts = np.random.default_rng(seed).random((count, dim)) * side
    else:
        pts = np.asarray(spec.get("points", []), dtype=float).reshape(-1, dim)
    w = spec.get("weights", "uniform")
    if w == "uniform":
        weights = np.full(len(pts), 1.0 / max(len(pts), 1))
    else:
        weights = np.asarray(w, dtype=float)
    return pts, weights


def build_run(doc: dict, name: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Turn one (variant-free) document into a validated :class:`RunConfig`.

    Every schema and invariant violation is collected before raising.
    """
    if overrides:
        doc = _merge(doc, overrides)
    problems: list[str] = []
    version = doc.get("version")
    if version != SCHEMA_VERSION:
        problems.append(f"unsupported config version {version!r} (expected {SCHEMA_VERSION})")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        problems.append(f"unknown keys: {sorted(unknown)}")
    domain = doc.get("domain", {})
    side = float(domain.get("side", 1.0))
    dim = int(domain.get("dim", 2))
    grid = doc.get("grid", {})
    opts = doc.get("options", {})

    cost = None
    try:
        cost = GroundCost.from_records(doc.get("cost", [{"p": 2}]))
    except (CostError, TypeError, KeyError) as exc:
        problems.append(f"cost: {exc}")
    density = None
    try:
        pieces = doc.get("density")
        if pieces is None:
            density = uniform(side, dim)
        else:
            w1 = 2.0 ** -int(grid.get("w1_exp", 4))
            density = normalize([DensityPiece.from_dict(p) for p in pieces], side, dim, grid_width=w1)
    except (MeasureError, TypeError, KeyError, ValueError) as exc:
        problems.append(f"density: {exc}")
    try:
        pts, weights = _targets(doc.get("targets", {}), dim, side, problems)
    except (TypeError, ValueError) as exc:
        problems.append(f"targets: {exc}")
        pts, weights = np.zeros((0, dim)), np.zeros(0)

    if cost is None or density is None:
        raise ConfigError(problems)
    cfg = RunConfig(cost=cost, density=density, targets=pts, weights=weights, side=side,
                    w1_exp=int(grid.get("w1_exp", 4)), target_exp=int(grid.get("target_exp", 9)),
                    accumulate_wasserstein=bool(opts.get("accumulate_wasserstein", True)),
                    emit_partition=bool(opts.get("emit_partition", True)),
                    emit_shifts=bool(opts.get("emit_shifts", True)),
                    seed=int(opts.get("seed", 0)), name=name or str(doc.get("name", "")),
                    pair_mode=str(opts.get("pair_mode", "best")), threads=int(opts.get("threads", 1)))
    problems += cfg.problems()
    if problems:
        raise ConfigError(problems)
    return cfg


def load_runs(source, overrides: dict | None = None) -> list[NamedRun]:
    """All runs described by a config; ``variants`` expand into one run each."""
    doc = read_document(source)
    variants = doc.get("variants")
    base = {k: v for k, v in doc.items() if k != "variants"}
    name = str(doc.get("name", "run"))
    if not variants:
        return [NamedRun(name, build_run(base, name, overrides), doc.get("reference"), base)]
    runs, problems = [], []
    for vname, over in variants.items():
        merged = _merge(base, over or {})
        try:
            runs.append(NamedRun(f"{name}-{vname}", build_run(merged, f"{name}-{vname}", overrides),
                                 merged.get("reference"), merged))
        except ConfigError as exc:
            problems += [f"{vname}: {p}" for p in exc.problems]
    if problems:
        raise ConfigError(problems)
    return runs


@dataclass
class RunSummary:
    config: dict
    iterations: list[dict]
    shifts: list[dict] | None
    wasserstein: dict | None
    status: str = "ok"
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"config": self.config, "iterations": self.iterations, "shifts": self.shifts,
                "wasserstein": self.wasserstein, "status": self.status, "notes": self.notes}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunSummary":
        d = json.loads(text)
        return cls(d["config"], d["iterations"], d["shifts"], d["wasserstein"], d["status"], d["notes"])

    def write(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def read(cls, path) -> "RunSummary":
        return cls.loads(Path(path).read_text())


def summarize(run, document: dict, reference: float | None = None, timings: bool = False) -> RunSummary:
    """Plain-data summary of a :class:`~boundary_ot.driver.RunResult`.

    Wall times are left out unless ``timings`` is set, so repeated runs are byte-identical.
    """
    cfg = run.config
    iters = []
    for s in run.stats:
        rec = {"r": s.level, "w_r": s.width, "active": s.active, "boundary": s.boundary,
               "partial": s.partial, "worst_case_error": s.worst_case_error}
        if timings:
            rec["wall_time"] = s.seconds
        iters.append(rec)
    shifts = None
    if run.shifts is not None:
        shifts = [{"i": i, "y": [float(v) for v in cfg.targets[i]], "nu": float(cfg.weights[i]),
                   "shift": float(run.shifts.values[i]), "error": float(run.shifts.error[i])}
                  for i in range(cfg.n)]
    wass = None
    if run.report is not None:
        wass = run.report.to_dict()
        if reference is not None:
            wass["reference"] = reference
            wass["error"] = abs(run.report.approx - reference)
    return RunSummary(document, iters, shifts, wass, "ok", list(run.notes))
