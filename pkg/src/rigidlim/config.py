"""Strict JSON system configuration."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .ifs.conjugate import build_conjugated
from .ifs.maps import Similarity
from .ifs.system import Box, IFSystem

TOP_FIELDS = {"d", "alphabet_size", "maps", "seed_box", "omega_margin", "s_low", "s_up", "rho0"}
REQUIRED_TOP = TOP_FIELDS - {"rho0"}
SIMILARITY_FIELDS = {"kind", "scale", "orthogonal", "translation"}
CONJUGATED_FIELDS = {"kind", "base", "c2", "grid_resolution"}


@dataclass(frozen=True)
class SystemConfig:
    raw: dict
    name: str = ""

    @property
    def digest(self):
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    @property
    def conjugation(self):
        """(c2, grid_resolution) when the maps are conjugated, else None."""
        first = self.raw["maps"][0]
        if first["kind"] == "conjugated":
            return float(first["c2"]), int(first.get("grid_resolution", 21))
        return None

    def base_system(self) -> IFSystem:
        raw = self.raw
        d = raw["d"]
        maps = []
        for spec in raw["maps"]:
            sim = spec["base"] if spec["kind"] == "conjugated" else spec
            orth = np.asarray(sim.get("orthogonal", np.eye(d).ravel().tolist()), dtype=float).reshape(d, d)
            maps.append(Similarity(sim["scale"], orth, sim.get("translation", [0.0] * d)))
        return IFSystem(
            maps=maps,
            box=Box(raw["seed_box"]["min"], raw["seed_box"]["max"]),
            omega_margin=float(raw["omega_margin"]),
            s_low=float(raw["s_low"]),
            s_up=float(raw["s_up"]),
            rho0=raw.get("rho0"),
            name=self.name,
        )

    def build(self) -> IFSystem:
        """The configured system; may raise ConstructionRejectedError."""
        base = self.base_system()
        conj = self.conjugation
        if conj is None:
            return base
        c2, res = conj
        return build_conjugated(base, c2, base.s_low, base.s_up, res)


def _num(value, field, lo=None, hi=None, lo_open=True, hi_open=True, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("expected a number", field)
    if integer and not isinstance(value, int):
        raise ConfigError("expected an integer", field)
    if lo is not None and (value <= lo if lo_open else value < lo):
        raise ConfigError(f"value {value} must be {'>' if lo_open else '>='} {lo}", field)
    if hi is not None and (value >= hi if hi_open else value > hi):
        raise ConfigError(f"value {value} must be {'<' if hi_open else '<='} {hi}", field)
    return value


def _vector(value, d, field):
    if not isinstance(value, list) or len(value) != d:
        raise ConfigError(f"expected a list of {d} numbers", field)
    for k, v in enumerate(value):
        _num(v, f"{field}[{k}]")
    return value


def _unknown(obj, allowed, field):
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"unknown field '{extra[0]}'", f"{field}.{extra[0]}" if field else extra[0])


def _similarity(spec, d, field):
    if not isinstance(spec, dict):
        raise ConfigError("map spec must be an object", field)
    _unknown(spec, SIMILARITY_FIELDS, field)
    if spec.get("kind") != "similarity":
        raise ConfigError("expected kind 'similarity'", f"{field}.kind")
    if "scale" not in spec:
        raise ConfigError("missing field", f"{field}.scale")
    _num(spec["scale"], f"{field}.scale", 0.0, 1.0)
    if "orthogonal" in spec:
        orth = spec["orthogonal"]
        flat = orth if orth and not isinstance(orth[0], list) else [v for row in orth for v in row]
        _vector(flat, d * d, f"{field}.orthogonal")
        q = np.asarray(flat, dtype=float).reshape(d, d)
        if np.max(np.abs(q.T @ q - np.eye(d))) > 1e-12:
            raise ConfigError("matrix is not orthogonal to 1e-12", f"{field}.orthogonal")
        spec = dict(spec, orthogonal=flat)
    if "translation" in spec:
        _vector(spec["translation"], d, f"{field}.translation")
    return spec


def parse_config(data, name="") -> SystemConfig:
    """Validate a decoded config object; every violation names its field."""
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object")
    _unknown(data, TOP_FIELDS, "")
    for key in sorted(REQUIRED_TOP):
        if key not in data:
            raise ConfigError("missing field", key)
    d = _num(data["d"], "d", 1, None, lo_open=False, integer=True)
    size = _num(data["alphabet_size"], "alphabet_size", 2, None, lo_open=False, integer=True)
    maps = data["maps"]
    if not isinstance(maps, list) or len(maps) != size:
        raise ConfigError(f"expected {size} map specs (alphabet_size)", "maps")
    kinds = set()
    parsed = []
    conj = None
    for k, spec in enumerate(maps):
        field = f"maps[{k}]"
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ConfigError("map spec needs a 'kind'", field)
        kinds.add(spec["kind"])
        if spec["kind"] == "similarity":
            parsed.append(_similarity(spec, d, field))
        elif spec["kind"] == "conjugated":
            _unknown(spec, CONJUGATED_FIELDS, field)
            for key in ("base", "c2"):
                if key not in spec:
                    raise ConfigError("missing field", f"{field}.{key}")
            c2 = _num(spec["c2"], f"{field}.c2", 1.0, None, lo_open=False)
            res = _num(spec.get("grid_resolution", 21), f"{field}.grid_resolution", 2, None,
                       lo_open=False, integer=True)
            if conj is not None and conj != (c2, res):
                raise ConfigError("all conjugated maps must share c2 and grid_resolution", field)
            conj = (c2, res)
            if d < 1:
                raise ConfigError("conjugation needs d >= 1", "d")
            parsed.append(dict(spec, base=_similarity(spec["base"], d, f"{field}.base")))
        else:
            raise ConfigError(f"unknown map kind '{spec['kind']}'", f"{field}.kind")
    if len(kinds) > 1:
        raise ConfigError("cannot mix similarity and conjugated maps", "maps")

    box = data["seed_box"]
    if not isinstance(box, dict):
        raise ConfigError("seed_box must be an object", "seed_box")
    _unknown(box, {"min", "max"}, "seed_box")
    lo = _vector(box.get("min"), d, "seed_box.min")
    hi = _vector(box.get("max"), d, "seed_box.max")
    if any(b <= a for a, b in zip(lo, hi)):
        raise ConfigError("box is degenerate (max must exceed min)", "seed_box")

    _num(data["omega_margin"], "omega_margin", 0.0)
    s_low = _num(data["s_low"], "s_low", 0.0, 1.0)
    s_up = _num(data["s_up"], "s_up", 0.0, 1.0)
    if s_up**2 > s_low:
        raise ConfigError("need s_up^2 <= s_low", "s_up")
    if data.get("rho0") is not None:
        _num(data["rho0"], "rho0", 0.0)
    return SystemConfig(dict(data, maps=parsed), name=name)


def load_config(path) -> SystemConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", field=str(path)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    return parse_config(data, name=path.stem)


def bundled_path(name):
    """Path of a bundled fixture such as ``cantor.json``."""
    from importlib.resources import files

    if not name.endswith(".json"):
        name += ".json"
    return Path(str(files("rigidlim") / "data" / name))


def load_system(path_or_name) -> IFSystem:
    p = Path(path_or_name)
    if not p.exists():
        p = bundled_path(str(path_or_name))
    return load_config(p).build()
