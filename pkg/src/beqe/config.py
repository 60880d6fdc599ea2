"""Run manifests: parsing of configuration documents and the figure presets."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import yaml

from .cycle import CycleConfig, parse_variant
from .tim import CriticalExponents, CutoffPolicy


class ConfigError(ValueError):
    """Invalid configuration document; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


KNOWN_KEYS = {
    "preset", "name", "model", "L", "h1", "h2", "T_hot", "T_cold", "tau_grid", "tau_hot", "tau_cold",
    "variants", "cutoff.kind", "cutoff.C1", "cutoff.C2", "cutoff.C3", "cutoff.value", "gamma",
    "sta.truncation", "cycles", "integrator.steps", "integrator.tol", "boundary", "J", "Bz",
    "bath.mode", "bath.G0", "exponents.nu", "exponents.z", "products",
}
REQUIRED_KEYS = ("L", "h1", "h2", "T_hot", "T_cold", "tau_grid")
PRODUCTS = ("sweep", "modes")


def default_tau_grid(lo=5.0, hi=5000.0, num=40):
    return tuple(float(t) for t in np.geomspace(lo, hi, num))


@dataclass(frozen=True)
class Series:
    """One family of curves: a base config, the variants to run, and an optional label tag."""

    config: CycleConfig
    variants: tuple
    tag: str = ""

    def label(self, variant: str) -> str:
        lab = replace(self.config, variant=variant).label
        return f"{lab}[{self.tag}]" if self.tag else lab


@dataclass(frozen=True)
class RunManifest:
    name: str
    tau_grid: tuple
    series: tuple
    products: tuple = ("sweep",)
    preset: Optional[str] = None

    def __post_init__(self):
        if not self.tau_grid:
            raise ConfigError("tau_grid", "must not be empty")
        if any(not t > 0 for t in self.tau_grid):
            raise ConfigError("tau_grid", "every duration must be positive")
        if any(b <= a for a, b in zip(self.tau_grid, self.tau_grid[1:])):
            raise ConfigError("tau_grid", "must be strictly increasing")
        if not self.series or not all(s.variants for s in self.series):
            raise ConfigError("variants", "at least one variant is required")
        for p in self.products:
            if p not in PRODUCTS:
                raise ConfigError("products", f"unknown product {p!r}; expected {PRODUCTS}")

    @property
    def config(self) -> CycleConfig:
        return self.series[0].config

    @property
    def variants(self) -> list:
        return [s.label(v) for s in self.series for v in s.variants]


# -- presets ------------------------------------------------------------------

FIG3_BASE = dict(model="tim", L=1000, h1=10.0, h2=1.0, T_hot=20.0, T_cold=1.0,
                 tau_hot=2.0, tau_cold=2.0)


def _tim(**kw):
    return CycleConfig(**{**FIG3_BASE, **kw})


def _const(value, gamma):
    return CutoffPolicy("constant", value=value, gamma=gamma)


def _noncrit(C3):
    # hot-side gamma is unused at these cutoffs; gaps at h1 = 10 are >= 18
    return CutoffPolicy("non-critical", C2=2.0, C3=C3, gamma=1.0)


def _preset_series(name):
    kz = CutoffPolicy("kz-critical", C1=1.0, gamma=6.5)
    if name == "fig3":
        return (Series(_tim(cutoff=kz), ("bare", "sta-exact", "adiabatic", "beqe")),), ("sweep",)
    if name == "fig4":
        return (Series(_tim(cutoff=kz), ("adiabatic",)),), ("modes",)
    if name in ("fig5", "fig8"):
        first = ("bare", "sta-exact", "adiabatic", "beqe") if name == "fig5" else ("bare", "sta-exact", "beqe")
        return (Series(_tim(cutoff=_const(2.1, 9.0)), first, "dstar=2.1"),
                Series(_tim(cutoff=_const(0.3, 62.0)), ("beqe",), "dstar=0.3")), ("sweep",)
    if name == "fig6":
        return (Series(_tim(cutoff=_const(0.3, 62.0)),
                       ("bare", "adiabatic", "beqe", "beqe-single-stroke")),), ("sweep",)
    if name in ("fig7", "fig9"):
        variants = ("bare", "sta-exact", "adiabatic", "beqe") if name == "fig7" else ("bare", "sta-exact", "beqe")
        return (Series(_tim(h2=0.5, cutoff=_noncrit(0.02)), variants, "h2=0.5"),
                Series(_tim(h2=0.8, cutoff=_noncrit(0.08)), variants, "h2=0.8")), ("sweep",)
    if name == "fig10":
        cfg = CycleConfig(model="ltim", L=6, h1=10.0, h2=0.75, T_hot=500.0, T_cold=0.1,
                          tau_hot=2.0, tau_cold=2.0, J=1.0, Bz=1.0, boundary="open",
                          cutoff=CutoffPolicy("kz-critical", C1=1.0, gamma=1.0))
        return (Series(cfg, ("bare", "beqe")),), ("sweep",)
    raise ConfigError("preset", f"unknown preset {name!r}; expected one of {PRESETS}")


PRESETS = ("fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10")
# dense evolution on one core is ~1 ms per step, so the LTIM grid stops at 500
PRESET_TAU_GRIDS = {"fig10": default_tau_grid(5.0, 500.0, 40)}


def preset(name: str) -> RunManifest:
    series, products = _preset_series(name)
    grid = PRESET_TAU_GRIDS.get(name, default_tau_grid())
    return RunManifest(name, grid, series, products, preset=name)


# -- documents ----------------------------------------------------------------

def _flatten(doc, prefix=""):
    out = {}
    for key, val in doc.items():
        key = f"{prefix}{key}"
        if isinstance(val, dict) and key != "tau_grid":
            out.update(_flatten(val, key + "."))
        else:
            out[key] = val
    return out


def _num(flat, key, kind=float, default=None):
    if key not in flat:
        return default
    val = flat[key]
    try:
        if isinstance(val, bool):
            raise TypeError
        out = kind(val)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected {kind.__name__}, got {val!r}") from None
    if kind is int and out != val:
        raise ConfigError(key, f"expected an integer, got {val!r}")
    return out


def _tau_grid(val):
    if isinstance(val, dict):
        try:
            return default_tau_grid(float(val["min"]), float(val["max"]), int(val.get("num", 40)))
        except (KeyError, TypeError, ValueError):
            raise ConfigError("tau_grid", "a geometric grid needs numeric 'min', 'max' and optional 'num'") from None
    if not isinstance(val, (list, tuple)):
        raise ConfigError("tau_grid", f"expected a list of durations, got {val!r}")
    try:
        return tuple(float(t) for t in val)
    except (TypeError, ValueError):
        raise ConfigError("tau_grid", f"non-numeric entry in {val!r}") from None


def _cutoff(flat, base: Optional[CutoffPolicy], needed: bool):
    keys = [k for k in flat if k.startswith("cutoff.")] + (["gamma"] if "gamma" in flat else [])
    if not keys and base is not None:
        return base
    if not needed and not keys:
        return None
    if needed and base is None and "gamma" not in flat:
        raise ConfigError("gamma", "required for beqe variants")
    b = base or CutoffPolicy()
    try:
        return CutoffPolicy(kind=flat.get("cutoff.kind", b.kind),
                            C1=_num(flat, "cutoff.C1", default=b.C1),
                            C2=_num(flat, "cutoff.C2", default=b.C2),
                            C3=_num(flat, "cutoff.C3", default=b.C3),
                            value=_num(flat, "cutoff.value", default=b.value),
                            gamma=_num(flat, "gamma", default=b.gamma))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("cutoff", str(exc)) from None


_FIELD_KEYS = {
    "model": ("model", str), "L": ("L", int), "h1": ("h1", float), "h2": ("h2", float),
    "T_hot": ("T_hot", float), "T_cold": ("T_cold", float), "tau_hot": ("tau_hot", float),
    "tau_cold": ("tau_cold", float), "cycles": ("cycles", int), "integrator.steps": ("steps", int),
    "integrator.tol": ("tol", float), "boundary": ("boundary", str), "J": ("J", float),
    "Bz": ("Bz", float), "bath.mode": ("bath_mode", str), "bath.G0": ("G0", float),
}


def _config_from(flat, base: CycleConfig, variants) -> CycleConfig:
    updates = {}
    for key, (attr, kind) in _FIELD_KEYS.items():
        if key in flat:
            updates[attr] = flat[key] if kind is str else _num(flat, key, kind)
    if "sta.truncation" in flat:
        t = flat["sta.truncation"]
        if t != "exact" and (isinstance(t, bool) or not isinstance(t, int) or t < 1):
            raise ConfigError("sta.truncation", f"expected 'exact' or a positive integer, got {t!r}")
        updates["sta_truncation"] = t
    if "exponents.nu" in flat or "exponents.z" in flat:
        try:
            updates["exponents"] = CriticalExponents(_num(flat, "exponents.nu", default=base.exponents.nu),
                                                     _num(flat, "exponents.z", default=base.exponents.z))
        except ValueError as exc:
            raise ConfigError("exponents", str(exc)) from None
    needs_cut = any(parse_variant(v)[0].startswith("beqe") for v in variants)
    updates["cutoff"] = _cutoff(flat, base.cutoff, needs_cut)
    try:
        cfg = replace(base, **updates)
    except ValueError as exc:
        raise ConfigError(_guess_key(str(exc)), str(exc)) from None
    return cfg


def _guess_key(message):
    for key in ("model", "temperature", "tau", "cutoff", "bath_mode", "cycles", "boundary"):
        if key in message:
            return {"temperature": "T_hot", "bath_mode": "bath.mode"}.get(key, key)
    return "config"


def _check_physics(cfg: CycleConfig):
    if cfg.h1 <= cfg.h2:
        raise ConfigError("h1", f"must exceed h2 (got h1={cfg.h1}, h2={cfg.h2})")
    if cfg.T_hot <= cfg.T_cold:
        raise ConfigError("T_hot", f"must exceed T_cold (got {cfg.T_hot} <= {cfg.T_cold})")
    if cfg.model == "tim" and (cfg.L < 2 or cfg.L % 2):
        raise ConfigError("L", f"must be an even integer >= 2 for the tim model, got {cfg.L}")
    if cfg.model == "ltim" and not 2 <= cfg.L <= 12:
        raise ConfigError("L", f"must be in 2..12 for the ltim model, got {cfg.L}")


def manifest_from_mapping(doc: dict) -> RunManifest:
    if not isinstance(doc, dict):
        raise ConfigError("document", "expected a key/value mapping at the top level")
    flat = _flatten(doc)
    for key in flat:
        if key not in KNOWN_KEYS:
            raise ConfigError(key, "unknown key")

    if "preset" in flat:
        base = preset(str(flat["preset"]))
        overrides = {k: v for k, v in flat.items() if k not in ("preset", "name", "tau_grid", "products")}
        series = []
        for s in base.series:
            variants = tuple(flat.get("variants", s.variants))
            series.append(Series(_config_from(overrides, s.config, variants), variants, s.tag))
        grid = _tau_grid(flat["tau_grid"]) if "tau_grid" in flat else base.tau_grid
        products = tuple(flat.get("products", base.products))
        name = str(flat.get("name", base.name))
        man = RunManifest(name, grid, tuple(series), products, preset=base.preset)
    else:
        for key in REQUIRED_KEYS:
            if key not in flat:
                raise ConfigError(key, "missing required key")
        variants = flat.get("variants", ["bare"])
        if isinstance(variants, str):
            variants = [variants]
        if not isinstance(variants, (list, tuple)) or not variants:
            raise ConfigError("variants", "expected a non-empty list")
        for v in variants:
            try:
                parse_variant(str(v))
            except ValueError as exc:
                raise ConfigError("variants", str(exc)) from None
        variants = tuple(str(v) for v in variants)
        cfg = _config_from(flat, CycleConfig(), variants)
        products = tuple(flat.get("products", ("sweep",)))
        man = RunManifest(str(flat.get("name", "run")), _tau_grid(flat["tau_grid"]),
                          (Series(cfg, variants),), products)
    for s in man.series:
        _check_physics(s.config)
        if s.config.model == "ltim":
            for v in s.variants:
                if parse_variant(v)[0] not in ("bare", "beqe", "beqe-single-stroke", "beqe-both"):
                    raise ConfigError("variants", f"{v!r} is not available for the ltim model")
    return man


def parse_config(text: str) -> RunManifest:
    """Parse a YAML or JSON configuration document into a validated manifest."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("document", f"not valid YAML/JSON: {exc}") from None
    return manifest_from_mapping(doc if doc is not None else {})
