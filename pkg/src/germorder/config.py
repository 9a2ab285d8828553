"""Experiment configuration: YAML documents validated with line diagnostics.

A config is a key-value tree.  Laws are given as small maps:

    natural laws     {poisson: 2} | {mixed_poisson: [[w, rate], ...]} |
                     {finite: [p0, p1, ...]} | {geometric: p}
    offspring laws   {kind: indep | all_to_one | balanced, total: <natural>,
                      row: [...], k: 2}
    radius laws      {pareto: lam0} | {geometric: ratio} | {finite: [tails]}
    site rules       {prefix: [...], period: [...]} or a single item
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .bpve import BpveModel, ClosedFormTail, ConstantTail, ParamSeq, PeriodicTail
from .brw import BrwModel
from .distributions import (
    AllToOne,
    Balanced,
    FiniteSupport,
    Geometric,
    IndepDiffusion,
    MixedPoisson,
    Poisson,
)
from .errors import GermOrderError, SchemaError
from .rumor import FiniteRadius, GeometricRadius, ParetoRadius, RumorModel, SiteRule

EXPERIMENTS = ("order-check", "brw", "bpve", "rumor", "named-example")
REQUIRED_MODELS = {"order-check": ("mu", "nu"), "brw": ("model",), "bpve": ("model",), "rumor": ("model",)}


class OutputSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    dir: str = "out"
    csv: bool = True


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiment: Literal["order-check", "brw", "bpve", "rumor", "named-example"]
    name: str | None = None
    example: str | None = None
    seed: int = Field(0, ge=0, lt=2**64)
    reps: int | None = Field(None, ge=1)
    horizon: int | None = Field(None, ge=1)
    tolerance: float = Field(1e-9, gt=0)
    points_per_axis: int = Field(64, ge=2)
    output: OutputSpec = OutputSpec()
    models: dict[str, Any] = {}
    options: dict[str, Any] = {}

    @model_validator(mode="after")
    def _check_kind(self):
        if self.experiment == "named-example" and not self.example:
            raise ValueError("named-example experiments need 'example'")
        for key in REQUIRED_MODELS.get(self.experiment, ()):
            if key not in self.models:
                raise ValueError(f"{self.experiment} experiments need models.{key}")
        return self


# ---------------------------------------------------------------------------
# source positions
# ---------------------------------------------------------------------------


@dataclass
class Source:
    path: str
    root: Any  # yaml node tree or None

    def line(self, loc) -> int | None:
        """1-based line of the deepest node along ``loc`` that exists."""
        node, best = self.root, None
        if node is None:
            return None
        best = node.start_mark.line + 1
        for key in loc:
            nxt = None
            if isinstance(node, yaml.MappingNode):
                for k, v in node.value:
                    if k.value == str(key):
                        nxt = v
                        best = k.start_mark.line + 1
                        break
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                nxt = node.value[key]
                best = nxt.start_mark.line + 1
            if nxt is None:
                break
            node = nxt
        return best

    def error(self, loc, msg: str) -> SchemaError:
        field = ".".join(str(k) for k in loc) or "<root>"
        line = self.line(loc)
        where = f"{self.path}:{line}" if line else self.path
        return SchemaError(f"{where}: {field}: {msg}")


def load_config(path: str | Path) -> tuple[ExperimentConfig, Source]:
    text = Path(path).read_text()
    return parse_config(text, str(path))


def parse_config(text: str, path: str = "<config>") -> tuple[ExperimentConfig, Source]:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        line = f":{mark.line + 1}" if mark else ""
        raise SchemaError(f"{path}{line}: not valid YAML: {getattr(err, 'problem', err)}") from None
    src = Source(path, root)
    if data is None:
        raise SchemaError(f"{path}: empty config")
    if not isinstance(data, dict):
        raise src.error((), "top level must be a mapping")
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as err:
        msgs = [str(src.error(e["loc"], e["msg"])) for e in err.errors()]
        raise SchemaError("\n".join(msgs)) from None
    return cfg, src


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def _one_key(d, loc, src, allowed):
    if not isinstance(d, dict) or len(d) != 1:
        raise src.error(loc, f"expected a map with one of {sorted(allowed)}")
    (k, v), = d.items()
    if k not in allowed:
        raise src.error(loc, f"unknown law {k!r}; expected one of {sorted(allowed)}")
    return k, v


def _guard(src, loc, fn, *args):
    try:
        return fn(*args)
    except (GermOrderError, ValueError, TypeError) as err:
        raise src.error(loc, str(err)) from None


def build_natlaw(d, loc, src):
    k, v = _one_key(d, loc, src, {"poisson", "mixed_poisson", "finite", "geometric"})
    if k == "poisson":
        return _guard(src, loc, Poisson, float(v))
    if k == "mixed_poisson":
        return _guard(src, loc, MixedPoisson, tuple((float(w), float(r)) for w, r in v))
    if k == "finite":
        return _guard(src, loc, FiniteSupport, tuple(float(p) for p in v))
    return _guard(src, loc, Geometric, float(v))


def build_offspring(d, loc, src):
    if not isinstance(d, dict) or "kind" not in d or "total" not in d:
        raise src.error(loc, "offspring laws need 'kind' and 'total'")
    extra = set(d) - {"kind", "total", "row", "k"}
    if extra:
        raise src.error(loc + (sorted(extra)[0],), "unknown field")
    total = build_natlaw(d["total"], loc + ("total",), src)
    row = tuple(float(p) for p in d.get("row", [1.0]))
    kind = d["kind"]
    if kind == "indep":
        return _guard(src, loc, IndepDiffusion, total, row)
    if kind == "all_to_one":
        return _guard(src, loc, AllToOne, total, row)
    if kind == "balanced":
        if "k" not in d:
            raise src.error(loc, "balanced laws need 'k'")
        return _guard(src, loc, Balanced, total, row, int(d["k"]))
    raise src.error(loc + ("kind",), f"unknown offspring kind {kind!r}")


def build_radius(d, loc, src):
    k, v = _one_key(d, loc, src, {"pareto", "geometric", "finite"})
    if k == "pareto":
        return _guard(src, loc, ParetoRadius, float(v))
    if k == "geometric":
        return _guard(src, loc, GeometricRadius, float(v))
    return _guard(src, loc, FiniteRadius, tuple(float(t) for t in v))


def _site_rule(d, loc, src, item):
    if isinstance(d, dict) and "period" in d:
        prefix = tuple(item(x, loc + ("prefix", i), src) for i, x in enumerate(d.get("prefix", [])))
        period = tuple(item(x, loc + ("period", i), src) for i, x in enumerate(d["period"]))
        return SiteRule(prefix, period)
    return SiteRule.constant(item(d, loc, src))


def _radius_tuple(d, loc, src):
    if isinstance(d, list):
        return tuple(build_radius(x, loc + (i,), src) for i, x in enumerate(d))
    return (build_radius(d, loc, src),)


def build_rumor(d, loc, src) -> RumorModel:
    for key in ("kind", "stations", "radii"):
        if key not in d:
            raise src.error(loc, f"rumor models need '{key}'")
    kind = {"firework": "Firework", "reverse": "ReverseFirework"}.get(d["kind"])
    if kind is None:
        raise src.error(loc + ("kind",), "kind must be 'firework' or 'reverse'")
    stations = _site_rule(d["stations"], loc + ("stations",), src, build_offspring)
    radii = _site_rule(d["radii"], loc + ("radii",), src, _radius_tuple)
    return _guard(src, loc, RumorModel, kind, stations, radii)


def build_brw(d, loc, src) -> BrwModel:
    if "laws" not in d:
        raise src.error(loc, "BRW models need 'laws'")
    laws = tuple(build_offspring(x, loc + ("laws", i), src) for i, x in enumerate(d["laws"]))
    return _guard(src, loc, BrwModel, laws)


def build_paramseq(d, loc, src) -> ParamSeq:
    if isinstance(d, (int, float)):
        return ParamSeq("const", limit=float(d))
    if not isinstance(d, dict):
        raise src.error(loc, "parameter sequences are numbers or maps")
    d = dict(d)
    if "values" in d:
        d["values"] = tuple(d["values"])
    return _guard(src, loc, lambda: ParamSeq(**d))


def build_bpve(d, loc, src) -> BpveModel:
    prefix = tuple(build_natlaw(x, loc + ("prefix", i), src) for i, x in enumerate(d.get("prefix", [])))
    if "bernoulli" in d:
        tail = ClosedFormTail("bernoulli", (build_paramseq(d["bernoulli"], loc + ("bernoulli",), src),))
    elif "constant" in d:
        tail = ConstantTail(build_natlaw(d["constant"], loc + ("constant",), src))
    elif "periodic" in d:
        tail = PeriodicTail(tuple(build_natlaw(x, loc + ("periodic", i), src) for i, x in enumerate(d["periodic"])))
    elif "family" in d:
        params = tuple(build_paramseq(x, loc + ("params", i), src) for i, x in enumerate(d.get("params", [])))
        tail = _guard(src, loc, ClosedFormTail, d["family"], params, tuple(d.get("weights", ())))
    else:
        raise src.error(loc, "BPVE models need one of bernoulli, constant, periodic, family")
    return _guard(src, loc, BpveModel, prefix, tail)


def build_family(d, loc, src) -> tuple:
    items = d if isinstance(d, list) else [d]
    return tuple(build_offspring(x, loc + ((i,) if isinstance(d, list) else ()), src) for i, x in enumerate(items))
