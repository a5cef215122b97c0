"""Simulation configuration files.

Flat ``key = value`` lines; top-level keys are defaults for every ``[cell]``
block that follows. A cell expands to one grid cell per ``beta1`` value::

    seed = 20240601
    n = 500
    reps = 500

    [cell]
    distribution = gamma
    parameter = 0.5
    beta1 = 0, 0.3, 0.5

Recognised keys: distribution, parameter, beta1, n, reps, seed, beta0,
methods. ``#`` starts a comment. Names without a path are looked up among the
configs shipped with the package (``paper_grid``, ``smoke``).
"""
from __future__ import annotations

import json
import os
from importlib import resources

from .dist import NuDistribution, parse_variant
from .errors import ConfigError, OverdispError
from .infer import METHODS
from .sim import CellConfig

KEYS = {"distribution", "parameter", "beta1", "n", "reps", "seed", "beta0", "methods"}


def _split_list(v):
    return [x for x in v.replace(",", " ").split() if x]


def resolve_path(name):
    if os.path.exists(name):
        return name
    base = name[:-4] if name.endswith(".cfg") else name
    ref = resources.files("overdisp") / "configs" / f"{base}.cfg"
    if ref.is_file():
        return str(ref)
    raise ConfigError(f"config {name!r} not found (not a file, not a shipped config)")


def parse_config(text, source="<config>", seed_override=None, reps_override=None):
    defaults = {}
    blocks = []
    current = defaults
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line.lower() != "[cell]":
                raise ConfigError(f"{source}:{lineno}: unknown section {line}")
            current = {"_line": lineno}
            blocks.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        current[key] = val
    if not blocks:
        raise ConfigError(f"{source}: no [cell] blocks")
    cells = []
    for b in blocks:
        spec = {**defaults, **b}
        where = f"{source}:{b['_line']}"
        for req in ("distribution", "parameter", "beta1"):
            if req not in spec:
                raise ConfigError(f"{where}: missing {req!r}")
        if seed_override is None and "seed" not in spec:
            raise ConfigError(f"{where}: missing 'seed'")
        try:
            variant = parse_variant(spec["distribution"])
        except OverdispError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        try:
            param = float(spec["parameter"])
            beta1s = [float(x) for x in _split_list(spec["beta1"])]
            n = int(spec.get("n", 500))
            reps = int(spec.get("reps", 500)) if reps_override is None else int(reps_override)
            seed = int(spec["seed"]) if seed_override is None else int(seed_override)
            beta0 = float(spec.get("beta0", 0.693))
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        if not param > 0:
            raise ConfigError(f"{where}: parameter must be positive, got {param}")
        methods = tuple(m.upper() for m in _split_list(spec.get("methods", " ".join(METHODS))))
        if not beta1s:
            raise ConfigError(f"{where}: empty beta1 list")
        for b1 in beta1s:
            cells.append(CellConfig(NuDistribution(variant, param), b1, n, reps, beta0, seed,
                                    methods))
    keys = [c.key for c in cells]
    if len(set(keys)) != len(keys):
        raise ConfigError(f"{source}: duplicate cells")
    return cells


def cells_from_manifest(data, seed_override=None, reps_override=None):
    cells = []
    for d in data["grid"]:
        cells.append(CellConfig(
            NuDistribution(parse_variant(d["distribution"]), d["parameter"]), d["beta1"],
            d["n"], d["reps"] if reps_override is None else int(reps_override), d["beta0"],
            d["seed"] if seed_override is None else int(seed_override),
            tuple(d["methods"])))
    return cells


def load_cells(name, seed_override=None, reps_override=None):
    path = resolve_path(name)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid manifest JSON: {exc}") from None
        try:
            return path, cells_from_manifest(data, seed_override, reps_override)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: malformed manifest: {exc}") from None
    return path, parse_config(text, path, seed_override, reps_override)
