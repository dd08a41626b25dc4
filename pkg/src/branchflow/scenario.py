"""Scenario files: strict JSON ingestion for batch runs.

Unknown keys are rejected (fail-closed) so that a typo in a scenario
never silently falls back to a default.  The schema is documented in
docs/scenario.schema.json.
"""

from dataclasses import dataclass
import json

import numpy as np

from .errors import ValidationError
from .fields import GridSpec, SourceSpec
from .recovery import PolyhedralMeasure, Segment
from .solver import OptimizerConfig


@dataclass
class Scenario:
    grid: GridSpec
    sources: SourceSpec
    eps: float
    a: float
    p: float
    k: int
    optimizer: OptimizerConfig
    measure: PolyhedralMeasure = None
    seed: int = 0


def _require_keys(obj, allowed, required, where):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ValidationError(f"unknown key(s) {sorted(unknown)} in {where}")
    missing = set(required) - set(obj)
    if missing:
        raise ValidationError(f"missing key(s) {sorted(missing)} in {where}")


def load_scenario(path):
    with open(path) as fh:
        raw = json.load(fh)
    return parse_scenario(raw)


def parse_scenario(raw):
    _require_keys(raw, ["grid", "sources", "functional", "optimizer",
                        "measure", "seed"],
                  ["grid", "sources", "functional"], "scenario")
    g = raw["grid"]
    _require_keys(g, ["extent", "cells"], ["extent", "cells"], "grid")
    grid = GridSpec(tuple(g["extent"]), tuple(g["cells"]))

    fn = raw["functional"]
    _require_keys(fn, ["eps", "a", "p", "k"], ["eps", "a"], "functional")
    eps = float(fn["eps"])
    a = float(fn["a"])
    p = float(fn.get("p", 2.0))
    k = int(fn.get("k", 1))
    if eps < 2.0 * max(grid.h):
        raise ValidationError(
            f"functional.eps = {eps} under-resolved: needs >= 2h = {2 * max(grid.h)}")

    s = raw["sources"]
    _require_keys(s, ["points", "weights"], ["points", "weights"], "sources")
    sources = SourceSpec(np.asarray(s["points"], dtype=float),
                         np.asarray(s["weights"], dtype=float), eps)
    if sources.n_sources:
        sources.check_interior(grid)

    opt = raw.get("optimizer", {})
    _require_keys(opt, ["max_outer", "cg_tol", "u_tol", "continuation"], [],
                  "optimizer")
    config = OptimizerConfig(
        eps=eps, a=a, p=p, k=k,
        max_outer=int(opt.get("max_outer", 60)),
        cg_tol=float(opt.get("cg_tol", 1e-10)),
        u_tol=float(opt.get("u_tol", 1e-8)),
        continuation=tuple(opt.get("continuation", ())))

    measure = None
    if raw.get("measure") is not None:
        mv = raw["measure"]
        _require_keys(mv, ["segments"], ["segments"], "measure")
        segs = []
        for i, sv in enumerate(mv["segments"]):
            _require_keys(sv, ["start", "end", "multiplicity"],
                          ["start", "end", "multiplicity"],
                          f"measure.segments[{i}]")
            segs.append(Segment(np.asarray(sv["start"], dtype=float),
                                np.asarray(sv["end"], dtype=float),
                                float(sv["multiplicity"])))
        measure = PolyhedralMeasure(tuple(segs))

    return Scenario(grid=grid, sources=sources, eps=eps, a=a, p=p, k=k,
                    optimizer=config, measure=measure,
                    seed=int(raw.get("seed", 0)))
