"""Scenario files: INI documents with unit suffixes and range-relative
expressions.

Example::

    [link]
    tx_elevation = 7pi/36
    aperture = 1.92 cm2

    [obstacle]
    shape = RP
    side = 3r
    depth = r/10
    center_x = -depth/2 - 10 m

Values are arithmetic expressions over ``r`` (the link range), ``pi``, a few
math functions and, in ``[obstacle]``, the prism dimensions.  A trailing
unit converts to metres, radians, 1/m, m^2 or joules.  Raw text is kept so
that ``to_text`` round-trips exactly.
"""
from __future__ import annotations

import ast
import configparser
import math
import operator
import os
import re
from dataclasses import dataclass
from importlib import resources

from .atmosphere import AtmosphereParams
from .geometry import PrismObstacle, PrismShape, Reflectance, ShapeKind, rotation_radius
from .mcpt import McptSettings
from .pathloss import Model, PathLossSettings, linspace_ranges
from .scatter import QuadratureSpec
from .scene import Scene, TransceiverGeometry
from .source import SourceKind, SourceModel


class ConfigError(ValueError):
    pass


_UNITS = {
    "angle": {"": 1.0, "rad": 1.0, "deg": math.pi / 180},
    "length": {"": 1.0, "m": 1.0, "km": 1e3, "cm": 1e-2},
    "coefficient": {"": 1.0, "/m": 1.0, "/km": 1e-3},
    "area": {"": 1.0, "m2": 1.0, "cm2": 1e-4},
    "energy": {"": 1.0, "J": 1.0, "mJ": 1e-3},
    "number": {"": 1.0},
}
_UNIT_RE = re.compile(r"^(?P<expr>.*?)(?:(?<=[\d\s)])(?P<unit>deg|rad|km|cm2|m2|cm|m|/km|/m|mJ|J))?$")
_IMPLICIT_MUL = re.compile(r"(\d|\))\s*(?=(?![eE][+-]?\d)[A-Za-z_(])")

# section -> key -> (kind, required, default text)
SCHEMA = {
    "link": {
        "range": ("length", False, "100 m"),
        "tx_elevation": ("angle", True, None),
        "rx_elevation": ("angle", True, None),
        "tx_azimuth": ("angle", True, None),
        "rx_azimuth": ("angle", True, None),
        "rx_half_fov": ("angle", True, None),
        "aperture": ("area", True, None),
        "pulse_energy": ("energy", False, "1 J"),
    },
    "source": {
        "kind": ("text", False, "lambertian"),
        "half_width": ("angle", True, None),
        "cone": ("angle", False, None),
    },
    "atmosphere": {
        "rayleigh": ("coefficient", True, None),
        "mie": ("coefficient", True, None),
        "absorption": ("coefficient", True, None),
        "mie_g": ("number", False, "0.72"),
        "mie_f": ("number", False, "0.5"),
        "rayleigh_gamma": ("number", False, "0.017"),
    },
    "obstacle": {
        "shape": ("text", True, None),
        "side": ("length", False, None),
        "depth": ("length", False, None),
        "radius": ("length", False, None),
        "height": ("length", True, None),
        "orientation": ("angle", False, "0"),
        "center_x": ("length", True, None),
        "center_y": ("length", True, None),
        "reflectance": ("number", False, "0.1"),
        "diffuse_fraction": ("number", False, "0.5"),
        "specular_exponent": ("number", False, "5"),
        "check_active_area": ("bool", False, "yes"),
    },
    "quadrature": {
        "n_theta": ("int", False, "128"),
        "n_psi": ("int", False, "128"),
        "n_nu": ("int", False, "256"),
        "nu_mapping": ("bool", False, "yes"),
        "reflection_ny": ("int", False, "256"),
        "reflection_nz": ("int", False, "256"),
    },
    "mcpt": {
        "photons": ("int", False, "100000"),
        "seed": ("int", False, "1"),
        "workers": ("int", False, "1"),
        "survival_threshold": ("number", False, "1e-10"),
        "max_order": ("int", False, None),
    },
    "sweep": {
        "rmin": ("length", False, "60 m"),
        "rmax": ("length", False, "200 m"),
        "steps": ("int", False, "8"),
        "models": ("text", False, "analytic_approx"),
    },
    "validate": {
        "threshold_db": ("number", False, "1.35"),
        "mc_sigma": ("number", False, "3"),
        "mc_floor_db": ("number", False, "2.0"),
        "scatter_only": ("bool", False, "no"),
    },
}

_FUNCS = {"sqrt": math.sqrt, "sin": math.sin, "cos": math.cos, "tan": math.tan,
          "asin": math.asin, "acos": math.acos, "atan": math.atan, "atan2": math.atan2,
          "hypot": math.hypot, "abs": abs, "min": min, "max": max}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def evaluate(expr: str, names: dict[str, float]) -> float:
    """Evaluate an arithmetic expression without ``eval``."""
    text = _IMPLICIT_MUL.sub(r"\1*", expr.strip())
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {expr!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id == "pi":
                return math.pi
            if node.id in names:
                return float(names[node.id])
            raise ConfigError(f"unknown name {node.id!r} in {expr!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and not node.keywords):
            return float(_FUNCS[node.func.id](*[ev(a) for a in node.args]))
        raise ConfigError(f"unsupported syntax in {expr!r}")

    try:
        return ev(tree)
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot evaluate {expr!r}: {exc}") from exc


def parse_quantity(text: str, kind: str, names: dict[str, float] | None = None) -> float:
    m = _UNIT_RE.match(text.strip())
    expr, unit = m.group("expr"), m.group("unit") or ""
    scale = _UNITS[kind].get(unit)
    if scale is None:
        raise ConfigError(f"unit {unit!r} is not valid for a {kind} value")
    return evaluate(expr, names or {}) * scale


_TRUE = {"yes", "true", "on", "1"}
_FALSE = {"no", "false", "off", "0"}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ConfigError(f"expected yes/no, got {text!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario document.  ``entries`` holds the raw value text."""

    entries: tuple[tuple[str, tuple[tuple[str, str], ...]], ...]

    def raw(self, section: str) -> dict[str, str]:
        return dict(dict(self.entries).get(section, ()))

    def has(self, section: str) -> bool:
        return section in dict(self.entries)

    def _value(self, section: str, key: str, names=None):
        kind, _, default = SCHEMA[section][key]
        text = self.raw(section).get(key, default)
        if text is None:
            return None
        where = f"[{section}] {key}"
        try:
            if kind == "text":
                return text.strip()
            if kind == "bool":
                return _parse_bool(text)
            if kind == "int":
                v = parse_quantity(text, "number", names)
                if v != int(v):
                    raise ConfigError(f"expected an integer, got {text!r}")
                return int(v)
            return parse_quantity(text, kind, names)
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from None

    # scene assembly
    @property
    def default_range(self) -> float:
        return self._value("link", "range")

    def geometry(self, r: float) -> TransceiverGeometry:
        n = {"r": r}
        v = {k: self._value("link", k, n) for k in SCHEMA["link"] if k != "range"}
        return TransceiverGeometry(r=r, **v)

    def source(self) -> SourceModel:
        kind = self._value("source", "kind").lower()
        try:
            SourceKind(kind)
        except ValueError:
            raise ConfigError(f"[source] kind: expected lambertian or uniform, got {kind!r}") from None
        return SourceModel(kind, self._value("source", "half_width"), self._value("source", "cone"))

    def atmosphere(self) -> AtmosphereParams:
        return AtmosphereParams(**{k: self._value("atmosphere", k) for k in SCHEMA["atmosphere"]})

    def obstacle(self, r: float) -> PrismObstacle | None:
        if not self.has("obstacle"):
            return None
        raw = self.raw("obstacle")
        try:
            kind = ShapeKind(self._value("obstacle", "shape").upper())
        except ValueError:
            raise ConfigError("[obstacle] shape: expected RTP, RP or RPP") from None
        names = {"r": r}
        height = self._value("obstacle", "height", names)
        names["height"] = height
        if kind is ShapeKind.RP:
            if "side" not in raw or "depth" not in raw:
                raise ConfigError("[obstacle] an RP needs both side and depth")
            side = self._value("obstacle", "side", names)
            names["side"] = side
            depth = self._value("obstacle", "depth", names)
            shape = PrismShape(kind, side, height, depth)
            names["depth"] = depth
        elif "radius" in raw:
            if "side" in raw:
                raise ConfigError("[obstacle] give either side or radius, not both")
            shape = PrismShape.from_radius(kind, self._value("obstacle", "radius", names), height)
        elif "side" in raw:
            shape = PrismShape(kind, self._value("obstacle", "side", names), height)
        else:
            raise ConfigError(f"[obstacle] a {kind.value} needs side or radius")
        names["side"] = shape.side
        names["radius"] = rotation_radius(shape)
        names["orientation"] = self._value("obstacle", "orientation", names)
        refl = Reflectance(self._value("obstacle", "reflectance"), self._value("obstacle", "diffuse_fraction"),
                           self._value("obstacle", "specular_exponent"))
        return PrismObstacle(shape, self._value("obstacle", "center_x", names),
                             self._value("obstacle", "center_y", names), names["orientation"], refl)

    def scene(self, r: float | None = None, obstacle: bool = True) -> Scene:
        r = self.default_range if r is None else r
        obs = self.obstacle(r) if obstacle else None
        check = self._value("obstacle", "check_active_area") if self.has("obstacle") else True
        return Scene(self.geometry(r), self.source(), self.atmosphere(), obs, check_area=check)

    # run settings
    def ranges(self) -> list[float]:
        return linspace_ranges(self._value("sweep", "rmin"), self._value("sweep", "rmax"),
                               self._value("sweep", "steps"))

    def models(self) -> list[Model]:
        return parse_models(self._value("sweep", "models"))

    def mcpt_settings(self) -> McptSettings:
        return McptSettings(n_photons=self._value("mcpt", "photons"), seed=self._value("mcpt", "seed"),
                            workers=self._value("mcpt", "workers"),
                            survival_threshold=self._value("mcpt", "survival_threshold"),
                            max_order=self._value("mcpt", "max_order"))

    def settings(self) -> PathLossSettings:
        q = QuadratureSpec(self._value("quadrature", "n_theta"), self._value("quadrature", "n_psi"),
                           self._value("quadrature", "n_nu"), self._value("quadrature", "nu_mapping"))
        return PathLossSettings(q, (self._value("quadrature", "reflection_ny"),
                                    self._value("quadrature", "reflection_nz")),
                                self.mcpt_settings(), scatter_only=self._value("validate", "scatter_only"))

    def validate_thresholds(self) -> dict[str, float]:
        return {k: self._value("validate", k) for k in ("threshold_db", "mc_sigma", "mc_floor_db")}

    def to_text(self) -> str:
        out = []
        for section, items in self.entries:
            out.append(f"[{section}]")
            out.extend(f"{k} = {v}" for k, v in items)
            out.append("")
        return "\n".join(out)

    def with_entry(self, section: str, key: str, value: str) -> "ScenarioConfig":
        sections = {s: dict(items) for s, items in self.entries}
        sections.setdefault(section, {})[key] = value
        return _validated(sections)


def parse_models(text: str) -> list[Model]:
    out = []
    for name in text.split(","):
        try:
            out.append(Model(name.strip()))
        except ValueError:
            raise ConfigError(f"unknown model {name.strip()!r}; choose from "
                              + ", ".join(m.value for m in Model)) from None
    return out


def _validated(sections: dict[str, dict[str, str]]) -> ScenarioConfig:
    for section, items in sections.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in items:
            if key not in SCHEMA[section]:
                raise ConfigError(f"[{section}] unknown key {key!r}")
    for section in ("link", "source", "atmosphere"):
        if section not in sections:
            raise ConfigError(f"missing section [{section}]")
    for section, keys in SCHEMA.items():
        if section not in sections:
            continue
        for key, (_, required, _) in keys.items():
            if required and key not in sections[section]:
                raise ConfigError(f"[{section}] missing required key {key!r}")
    order = [s for s in SCHEMA if s in sections]
    cfg = ScenarioConfig(tuple((s, tuple((k, sections[s][k]) for k in SCHEMA[s] if k in sections[s]))
                               for s in order))
    # evaluate everything once so invariant violations surface at load time
    try:
        cfg.scene()
        cfg.ranges()
        cfg.models()
        cfg.settings()
        cfg.validate_thresholds()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def parse_config(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from None
    return _validated({s: dict(parser[s]) for s in parser.sections()})


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def preset_names() -> list[str]:
    files = resources.files("uvnlos.presets")
    return sorted(p.name[:-4] for p in files.iterdir() if p.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    name = name[:-4] if name.endswith(".cfg") else name
    if name not in preset_names():
        raise ConfigError(f"no preset named {name!r}")
    return resources.files("uvnlos.presets").joinpath(name + ".cfg").read_text(encoding="utf-8")


def resolve_config(spec: str) -> ScenarioConfig:
    """Load a config from a path, or from a shipped preset name."""
    if os.path.exists(spec):
        return load_config(spec)
    return parse_config(preset_text(os.path.basename(spec)))


__all__ = ["ConfigError", "ScenarioConfig", "parse_config", "load_config", "resolve_config",
           "preset_names", "preset_text", "parse_quantity", "evaluate"]
