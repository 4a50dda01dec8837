"""Run configuration for the composer, validated field by field."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .composer import ComposeConfig
from .runge import Hypersurface
from .serialize import read_json


class ConfigError(ValueError):
    """Malformed configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


def _number(x, name: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(name, f"expected a number, got {x!r}")
    x = float(x)
    if not math.isfinite(x):
        raise ConfigError(name, "must be finite")
    return x


def _complex(x, name: str) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ConfigError(name, "complex numbers are [re, im] pairs")
        return complex(_number(x[0], name + "[0]"), _number(x[1], name + "[1]"))
    return complex(_number(x, name))


def _int(x, name: str, lo: int = 0) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ConfigError(name, f"expected an integer, got {x!r}")
    if x < lo:
        raise ConfigError(name, f"must be >= {lo}")
    return x


def parse_surface(d) -> Hypersurface:
    if not isinstance(d, dict):
        raise ConfigError("Z", "expected an object {kind, params}")
    kind = d.get("kind")
    params = d.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("Z.params", "expected an object")
    dim = _int(params.get("dim", 2), "Z.params.dim", lo=2)
    if kind == "line":
        a = _complex(params.get("a", 0.0), "Z.params.a")
        if "b" not in params:
            raise ConfigError("Z.params.b", "missing")
        b = _complex(params["b"], "Z.params.b")
        return Hypersurface.line(a, b, dim)
    if kind == "graph":
        coeffs = params.get("coeffs")
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigError("Z.params.coeffs", "expected a nonempty list of ascending coefficients")
        c = [_complex(v, f"Z.params.coeffs[{i}]") for i, v in enumerate(coeffs)]
        if dim != 2 and len(c) > 2:
            raise ConfigError("Z.params.dim", "nonlinear graphs are supported in C^2 only")
        return Hypersurface.graph(c, dim)
    raise ConfigError("Z.kind", f"unsupported kind {kind!r} (line | graph)")


@dataclass
class RunConfig:
    Z: Hypersurface
    forest_file: Path
    lambda0: float
    lambda1: float
    eps: float
    J: int
    seeds: dict = field(default_factory=lambda: {"sampling": 0})
    densities: dict = field(default_factory=lambda: {"z_grid": 200, "check_samples": 1000})
    options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d, base: Path | None = None) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "expected a JSON object")
        known = {"Z", "forest_file", "lambda0", "lambda1", "eps", "J", "seeds", "densities", "options"}
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError(extra[0], "unknown field")
        for k in ("Z", "forest_file", "lambda0", "lambda1", "eps", "J"):
            if k not in d:
                raise ConfigError(k, "missing")
        Z = parse_surface(d["Z"])
        if not isinstance(d["forest_file"], str) or not d["forest_file"]:
            raise ConfigError("forest_file", "expected a path string")
        ff = Path(d["forest_file"])
        if base is not None and not ff.is_absolute():
            ff = base / ff
        l0 = _number(d["lambda0"], "lambda0")
        l1 = _number(d["lambda1"], "lambda1")
        if not 0 < l0 < 1:
            raise ConfigError("lambda0", "must lie in (0, 1)")
        if not l0 < l1 < 1:
            raise ConfigError("lambda1", "must lie in (lambda0, 1)")
        eps = _number(d["eps"], "eps")
        if not eps > 0:
            raise ConfigError("eps", "must be positive")
        J = _int(d["J"], "J")
        seeds = dict(d.get("seeds", {}))
        seeds.setdefault("sampling", 0)
        for k, v in seeds.items():
            _int(v, f"seeds.{k}")
        dens = dict(d.get("densities", {}))
        dens.setdefault("z_grid", 200)
        dens.setdefault("check_samples", 1000)
        _int(dens["z_grid"], "densities.z_grid", lo=10)
        _int(dens["check_samples"], "densities.check_samples", lo=100)
        opts = dict(d.get("options", {}))
        if "mu_fraction" in opts and not 0 < _number(opts["mu_fraction"], "options.mu_fraction") <= 1:
            raise ConfigError("options.mu_fraction", "must lie in (0, 1]")
        if "degree_cap" in opts:
            _int(opts["degree_cap"], "options.degree_cap", lo=1)
        if opts.get("threshold", "needed") not in ("needed", "strict"):
            raise ConfigError("options.threshold", "must be 'needed' or 'strict'")
        return cls(Z, ff, l0, l1, eps, J, seeds, dens, opts)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            d = read_json(path)
        except ValueError as err:
            raise ConfigError("<file>", f"invalid JSON: {err}") from err
        return cls.from_dict(d, base=path.parent)

    def compose_config(self, seed: int | None = None) -> ComposeConfig:
        s = self.seeds["sampling"] if seed is None else seed
        o = self.options
        return ComposeConfig(lambda0=self.lambda0, lambda1=self.lambda1, eps=self.eps, J=self.J, seed=s,
                             z_grid=self.densities["z_grid"], check_samples=self.densities["check_samples"],
                             degree_cap=o.get("degree_cap", 512), mu_fraction=float(o.get("mu_fraction", 0.1)),
                             threshold=o.get("threshold", "needed"))

    def to_dict(self) -> dict:
        z = self.Z
        if z.kind == "line":
            params = {"a": [z.coeffs[1].real, z.coeffs[1].imag] if len(z.coeffs) > 1 else 0.0,
                      "b": [z.coeffs[0].real, z.coeffs[0].imag], "dim": z.dim}
        else:
            params = {"coeffs": [[c.real, c.imag] for c in z.coeffs], "dim": z.dim}
        return {"Z": {"kind": z.kind, "params": params}, "forest_file": str(self.forest_file),
                "lambda0": self.lambda0, "lambda1": self.lambda1, "eps": self.eps, "J": self.J,
                "seeds": self.seeds, "densities": self.densities, "options": self.options}


def fixture_config(forest_file: str = "fixture5_forest.json") -> dict:
    """The five-ball composer run as a config dict."""
    return {"Z": {"kind": "line", "params": {"a": 0.0, "b": 0.05}}, "forest_file": forest_file,
            "lambda0": 0.3, "lambda1": 0.35, "eps": 0.05, "J": 3, "seeds": {"sampling": 0},
            "densities": {"z_grid": 200, "check_samples": 1000}, "options": {"mu_fraction": 0.1}}
