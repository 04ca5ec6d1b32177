"""Run configuration: bracketed-section key=value files with validation.

Every key has a typed default; unknown sections or keys, type mismatches,
and cross-field consistency failures abort with the offending key path
before any computation starts.
"""

import configparser
from dataclasses import dataclass, field

import numpy as np

from .interface import ShrinkingSphere
from .potential import PotentialCoefficients


class ConfigError(ValueError):
    pass


def _parse_bool(s):
    v = str(s).strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_floats(s):
    return tuple(float(x) for x in str(s).replace(",", " ").split())


# (section, key) -> (parser, default)
SCHEMA = {
    ("domain", "L"): (float, 1.0),
    ("domain", "dim"): (int, 2),
    ("domain", "cells"): (int, 0),  # 0: derive from eps so that h = eps/4
    ("interface", "R0"): (float, 0.4),
    ("interface", "center"): (_parse_floats, (0.0, 0.0)),
    ("interface", "delta_I"): (float, 0.2),
    ("model", "a"): (float, 3.0),
    ("model", "b"): (float, 9.0),
    ("model", "c"): (float, 1.0),
    ("model", "critical"): (_parse_bool, True),
    ("model", "eps"): (float, 0.03),
    ("model", "K"): (int, 4),
    ("init", "preset"): (str, "in-plane-angle"),
    ("init", "kappa"): (float, 0.5),
    ("init", "delta0"): (float, 0.2),
    ("init", "u0"): (_parse_floats, (0.0, 0.0, 1.0)),
    ("solver", "scheme"): (str, "explicit-euler"),
    ("solver", "safety"): (float, 0.25),
    ("solver", "t_end"): (float, 0.06),
    ("solver", "snapshot_every"): (float, 0.002),
    ("solver", "bc"): (str, "dirichlet"),
    ("diagnostics", "dtable_path"): (str, ""),
    ("diagnostics", "dtable_ns"): (int, 400),
    ("diagnostics", "dtable_nr"): (int, 200),
    ("diagnostics", "levelset_fraction"): (float, 0.5),
    ("output", "out_dir"): (str, "out"),
    ("output", "seed"): (int, 0),
    ("output", "snapshots"): (_parse_bool, True),
    ("output", "vtk"): (_parse_bool, False),
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, section, key):
        return self.values[(section, key)]

    @property
    def pot(self) -> PotentialCoefficients:
        return PotentialCoefficients(
            a=self.get("model", "a"), b=self.get("model", "b"),
            c=self.get("model", "c"), critical=self.get("model", "critical"),
        )

    @property
    def eps(self) -> float:
        return self.get("model", "eps")

    def cells(self) -> int:
        n = self.get("domain", "cells")
        if n == 0:
            h_target = self.eps / 4
            n = int(np.ceil(2 * self.get("domain", "L") / h_target))
        n += n % 2
        return n

    def interface(self) -> ShrinkingSphere:
        dim = self.get("domain", "dim")
        center = np.asarray(self.get("interface", "center"), dtype=float)
        if center.size < dim:
            center = np.zeros(dim)
        return ShrinkingSphere(center[:dim], self.get("interface", "R0"), dim,
                               self.get("interface", "delta_I"))

    def echo_lines(self):
        for (sec, key), val in sorted(self.values.items()):
            yield f"{sec}.{key} = {val}"


def _validate(cfg: RunConfig):
    v = cfg.values
    try:
        cfg.pot
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc
    if v[("model", "eps")] <= 0:
        raise ConfigError("model.eps must be positive")
    if v[("model", "K")] != 4:
        raise ConfigError("model.K is fixed at 4")
    if v[("domain", "dim")] not in (1, 2, 3):
        raise ConfigError("domain.dim must be 1, 2 or 3")
    if v[("domain", "L")] <= 0:
        raise ConfigError("domain.L must be positive")
    if not (0 < v[("interface", "delta_I")] < 1):
        raise ConfigError("interface.delta_I must lie in (0, 1)")
    if v[("interface", "R0")] <= 0:
        raise ConfigError("interface.R0 must be positive")
    if v[("solver", "scheme")] not in ("explicit-euler", "rk2"):
        raise ConfigError(f"solver.scheme unknown: {v[('solver', 'scheme')]!r}")
    if not (0 < v[("solver", "safety")] <= 1):
        raise ConfigError("solver.safety must lie in (0, 1]")
    if v[("solver", "snapshot_every")] <= 0:
        raise ConfigError("solver.snapshot_every must be positive")
    if v[("solver", "t_end")] < 0:
        raise ConfigError("solver.t_end must be nonnegative")
    if v[("solver", "bc")] not in ("dirichlet", "periodic"):
        raise ConfigError(f"solver.bc unknown: {v[('solver', 'bc')]!r}")
    if v[("init", "preset")] not in ("constant", "in-plane-angle"):
        raise ConfigError(f"init.preset unknown: {v[('init', 'preset')]!r}")
    if v[("init", "delta0")] <= 0:
        raise ConfigError("init.delta0 must be positive")
    if not (0 < v[("diagnostics", "levelset_fraction")] < 1):
        raise ConfigError("diagnostics.levelset_fraction must lie in (0, 1)")
    if v[("diagnostics", "dtable_ns")] < 32 or v[("diagnostics", "dtable_nr")] < 32:
        raise ConfigError("diagnostics.dtable resolution must be at least 32")
    try:
        cfg.interface().validate_inside(v[("domain", "L")])
    except ValueError as exc:
        raise ConfigError(f"interface: {exc}") from exc


def parse_config(path=None, overrides=()):
    """Load, override (`section.key=value`), and validate a configuration."""
    values = {k: default for k, (_, default) in SCHEMA.items()}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        for sec in parser.sections():
            for key, raw in parser.items(sec):
                if (sec, key) not in SCHEMA:
                    raise ConfigError(f"unknown configuration key {sec}.{key}")
                typ, _ = SCHEMA[(sec, key)]
                try:
                    values[(sec, key)] = typ(raw)
                except ValueError as exc:
                    raise ConfigError(f"{sec}.{key}: {exc}") from exc
    for ov in overrides:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value: {ov!r}")
        path_part, raw = ov.split("=", 1)
        sec, key = path_part.strip().split(".", 1)
        if (sec, key) not in SCHEMA:
            raise ConfigError(f"unknown configuration key {sec}.{key}")
        typ, _ = SCHEMA[(sec, key)]
        try:
            values[(sec, key)] = typ(raw.strip())
        except ValueError as exc:
            raise ConfigError(f"{sec}.{key}: {exc}") from exc
    cfg = RunConfig(values)
    _validate(cfg)
    return cfg
