"""Run configuration: flat key=value files, validation, initial data."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .. import noise as noise_mod
from .. import spectral

KINDS = ("temporal", "spatial", "stopping", "invariants")
U0_KINDS = ("taylor-green", "single-mode", "random", "random-rough")


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Settings for one study run; file keys mirror the field names below."""

    kind: str = "invariants"
    T: float = 1.0
    mu: float = 1.0
    noise_kind: str = "additive"     # file key: noise.kind
    noise_J: int = 16                # file key: noise.J
    noise_r: float = 2.0             # file key: noise.r
    noise_gamma: float = 0.5         # file key: noise.gamma
    seed: int = 0
    paths: int = 64
    N_ref: int = 16
    tau_ladder: tuple = (1 / 16, 1 / 32, 1 / 64, 1 / 128, 1 / 256)
    n_ladder: tuple = (2, 3, 4, 6)
    R: float = 10.0
    ell: int = 4
    xi: float | None = None          # None: calibrate at the coarsest level
    alpha: float = 0.4
    beta: float = 0.9
    u0_kind: str = "taylor-green"
    u0_norm: float = 5.0
    out: str = "runs"
    plot: bool = False
    tol: float | None = None         # invariant-suite tolerance override

    def validate(self) -> "RunConfig":
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.T <= 0 or self.mu <= 0:
            raise ConfigError("T and mu must be positive")
        if self.paths < 8:
            raise ConfigError("path count must be >= 8 for statistics")
        if self.xi is not None and self.xi <= 0:
            raise ConfigError("exceedance threshold xi must be positive")
        if self.R <= 0:
            raise ConfigError("truncation radius R must be positive")
        if self.u0_kind not in U0_KINDS:
            raise ConfigError(f"unknown initial datum kind {self.u0_kind!r}")
        if self.u0_norm <= 0:
            raise ConfigError("u0_norm must be positive")
        if not self.tau_ladder:
            raise ConfigError("tau ladder must not be empty")
        ms = self.step_counts()
        for a, b in zip(ms, ms[1:]):
            if b % a != 0:
                raise ConfigError(
                    f"tau ladder not nested: {a} steps do not divide {b}")
        try:
            noise_mod.DiffusionConfig(self.noise_kind, self.noise_r,
                                      self.noise_gamma, self.noise_J)
        except ValueError as err:
            raise ConfigError(str(err)) from None
        return self

    def step_counts(self) -> list[int]:
        """Ladder step counts M = T / tau, coarsest first."""
        out = []
        for tau in sorted(self.tau_ladder, reverse=True):
            m = round(self.T / tau)
            if abs(m * tau - self.T) > 1e-9 * self.T:
                raise ConfigError(f"tau = {tau} does not divide T = {self.T}")
            out.append(m)
        return out

    def diffusion(self) -> noise_mod.DiffusionConfig:
        return noise_mod.DiffusionConfig(self.noise_kind, self.noise_r,
                                         self.noise_gamma, self.noise_J)

    def basis(self):
        return noise_mod.build_basis(self.noise_J, self.noise_r)

    def initial_field(self, N: int) -> spectral.SpectralField:
        if self.u0_kind == "taylor-green":
            base = spectral.taylor_green_field(N)
        elif self.u0_kind == "single-mode":
            base = spectral.single_mode_field(N)
        elif self.u0_kind == "random":
            base = spectral.random_divfree_field(N, seed=self.seed ^ 0x5EED)
        else:  # random-rough: W^{2,2}-critical spectrum
            base = spectral.random_divfree_field(N, seed=self.seed ^ 0x5EED,
                                                 decay=1.75)
        return spectral.rescale_to_norm(base, 2, self.u0_norm)


_INT_KEYS = {"seed", "paths", "N_ref", "ell", "noise.J"}
_FLOAT_KEYS = {"T", "mu", "alpha", "beta", "u0_norm", "noise.r", "noise.gamma"}
_KEY_TO_FIELD = {
    "noise.kind": "noise_kind", "noise.J": "noise_J",
    "noise.r": "noise_r", "noise.gamma": "noise_gamma",
}
_STR_KEYS = {"kind", "u0_kind", "out", "noise.kind"}


def _parse_number(text: str) -> float:
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def _parse_value(key: str, text: str):
    text = text.strip()
    if key in _STR_KEYS:
        return text
    if key in _INT_KEYS:
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"key {key} expects an integer, got {text!r}")
    if key in _FLOAT_KEYS:
        try:
            return _parse_number(text)
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"key {key} expects a number, got {text!r}")
    if key == "R":
        if text.lower() in ("inf", "infinity"):
            return float("inf")
        return _parse_number(text)
    if key in ("xi", "tol"):
        if text.lower() in ("auto", "none"):
            return None
        return _parse_number(text)
    if key == "plot":
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"key plot expects true/false, got {text!r}")
    if key == "tau_ladder":
        try:
            return tuple(_parse_number(p) for p in text.split(",") if p.strip())
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"bad tau ladder {text!r}")
    if key == "n_ladder":
        try:
            return tuple(int(p) for p in text.split(",") if p.strip())
        except ValueError:
            raise ConfigError(f"bad mesh ladder {text!r}")
    raise ConfigError(f"unknown configuration key {key!r}")


def parse_config(text: str, kind: str | None = None, **overrides) -> RunConfig:
    """Parse a flat key=value configuration; unknown keys are errors."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        fieldname = _KEY_TO_FIELD.get(key, key)
        if fieldname not in RunConfig.__dataclass_fields__ or key.startswith("_"):
            raise ConfigError(f"line {lineno}: unknown configuration key {key!r}")
        if key in _KEY_TO_FIELD or key in _parseable_plain():
            values[fieldname] = _parse_value(key, val)
        else:
            raise ConfigError(f"line {lineno}: unknown configuration key {key!r}")
    cfg = RunConfig(**values)
    if kind is not None:
        if "kind" in values and values["kind"] != kind:
            raise ConfigError(
                f"config kind {values['kind']!r} conflicts with command {kind!r}")
        cfg = replace(cfg, kind=kind)
    if overrides:
        cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    return cfg.validate()


def _parseable_plain() -> set:
    return {"kind", "T", "mu", "seed", "paths", "N_ref", "tau_ladder",
            "n_ladder", "R", "ell", "xi", "alpha", "beta", "u0_kind",
            "u0_norm", "out", "plot", "tol"}


def load_config(path, kind: str | None = None, **overrides) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    return parse_config(text, kind=kind, **overrides)
