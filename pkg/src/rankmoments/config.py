"""Flat ``key = value`` config files with one section per subcommand.

Parsed with :mod:`configparser`. Lists are comma separated. Errors carry the
file name and line number of the offending entry.
"""

from __future__ import annotations

import configparser
import io
import re
from dataclasses import fields
from pathlib import Path

import numpy as np

from .errors import DomainError
from .experiments import ConvergenceConfig, ReinforcementConfig, SimulationConfig
from .model import Ranking, UniformCorrelationModel
from .recursive import QuadratureSpec


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<config>", line: int | None = None):
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {message}")
        self.source = source
        self.line = line


class Config:
    """Parsed config file; remembers where every key came from."""

    def __init__(self, text: str = "", source: str = "<config>"):
        self.source = source
        self._parser = configparser.ConfigParser(interpolation=None)
        try:
            self._parser.read_string(text, source=source)
        except configparser.ParsingError as exc:
            line = exc.errors[0][0] if exc.errors else None
            raise ConfigError("cannot parse line", source, line) from exc
        except configparser.DuplicateOptionError as exc:
            raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", source, exc.lineno) from exc
        except configparser.DuplicateSectionError as exc:
            raise ConfigError(f"duplicate section [{exc.section}]", source, exc.lineno) from exc
        except configparser.MissingSectionHeaderError as exc:
            raise ConfigError("entries must follow a [section] header", source, exc.lineno) from exc
        self._lines = self._index_lines(text)

    @classmethod
    def load(cls, path) -> Config:
        path = Path(path)
        return cls(path.read_text(encoding="utf-8"), str(path))

    @staticmethod
    def _index_lines(text: str) -> dict[tuple[str, str], int]:
        lines, section = {}, None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            stripped = raw.strip()
            head = re.fullmatch(r"\[([^\]]+)\]", stripped)
            if head:
                section = head.group(1).strip()
            elif section and stripped and stripped[0] not in "#;":
                key = re.split(r"[=:]", stripped, maxsplit=1)[0].strip().lower()
                lines[(section, key)] = lineno
        return lines

    def has(self, section: str, key: str) -> bool:
        return self._parser.has_option(section, key)

    def sections(self) -> list[str]:
        return self._parser.sections()

    def error(self, section: str, key: str, message: str) -> ConfigError:
        return ConfigError(f"[{section}] {key}: {message}", self.source, self._lines.get((section, key)))

    def get(self, section: str, key: str, kind, default=None):
        """Value converted by ``kind`` (a callable on the raw string), or ``default``."""
        if not self.has(section, key):
            return default
        raw = self._parser.get(section, key)
        try:
            return kind(raw)
        except (ValueError, DomainError) as exc:
            raise self.error(section, key, f"invalid value {raw!r} ({exc})") from exc

    def check_keys(self, section: str, allowed) -> None:
        if not self._parser.has_section(section):
            return
        for key in self._parser.options(section):
            if key not in allowed:
                raise self.error(section, key, f"unknown key; expected one of {sorted(allowed)}")


def int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(v) for v in raw.replace(",", " ").split())


def float_list(raw: str) -> tuple[float, ...]:
    return tuple(float(v) for v in raw.replace(",", " ").split())


_QUAD_KEYS = {f.name for f in fields(QuadratureSpec)}


def quadrature_from(cfg: Config, overrides: dict | None = None) -> QuadratureSpec:
    cfg.check_keys("quadrature", _QUAD_KEYS)
    base = QuadratureSpec()
    values = {
        "m_nodes": cfg.get("quadrature", "m_nodes", int, base.m_nodes),
        "x_nodes": cfg.get("quadrature", "x_nodes", int, base.x_nodes),
        "m_halfwidth": cfg.get("quadrature", "m_halfwidth", float, base.m_halfwidth),
        "x_padding": cfg.get("quadrature", "x_padding", float, base.x_padding),
    }
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return QuadratureSpec(**values)
    except DomainError as exc:
        raise ConfigError(str(exc), cfg.source) from exc


def _vector(n: int):
    def parse(raw: str) -> np.ndarray:
        vals = float_list(raw)
        if len(vals) == 1:
            return np.full(n, vals[0])
        if len(vals) != n:
            raise ValueError(f"expected 1 or {n} values, got {len(vals)}")
        return np.array(vals)

    return parse


def model_from(cfg: Config) -> UniformCorrelationModel:
    cfg.check_keys("model", {"n", "rho", "mu", "sigma"})
    for key in ("n", "rho"):
        if not cfg.has("model", key):
            raise ConfigError(f"[model] missing required key {key!r}", cfg.source)
    n = cfg.get("model", "n", int)
    rho = cfg.get("model", "rho", float)
    mu = cfg.get("model", "mu", _vector(n), np.zeros(n))
    sigma = cfg.get("model", "sigma", _vector(n), np.ones(n))
    try:
        return UniformCorrelationModel(mu, sigma, rho)
    except DomainError as exc:
        key = "rho" if "rho" in str(exc) else "sigma" if "sigma" in str(exc) else "n"
        raise cfg.error("model", key, str(exc)) from exc


def parse_ranking(raw: str, n: int) -> Ranking:
    """``identity`` or a 1-based permutation listing components from lowest to highest."""
    raw = raw.strip()
    if raw.lower() == "identity":
        return Ranking.identity(n)
    order = [v - 1 for v in int_list(raw)]
    if len(order) != n:
        raise DomainError(f"ranking lists {len(order)} components but the model has {n}")
    return Ranking(tuple(order))


def ranking_from(cfg: Config, n: int, override: str | None = None) -> Ranking:
    cfg.check_keys("ranking", {"order"})
    if override is not None:
        try:
            return parse_ranking(override, n)
        except (ValueError, DomainError) as exc:
            raise ConfigError(f"invalid ranking {override!r}: {exc}", "--ranking") from exc
    return cfg.get("ranking", "order", lambda raw: parse_ranking(raw, n), Ranking.identity(n))


def convergence_from(cfg: Config, quadrature: QuadratureSpec) -> ConvergenceConfig:
    cfg.check_keys("convergence", {"n_values", "rho_values", "quantiles"})
    base = ConvergenceConfig()
    try:
        return ConvergenceConfig(
            n_values=cfg.get("convergence", "n_values", int_list, base.n_values),
            rho_values=cfg.get("convergence", "rho_values", float_list, base.rho_values),
            quantiles=cfg.get("convergence", "quantiles", float_list, base.quantiles),
            quadrature=quadrature,
        )
    except DomainError as exc:
        raise ConfigError(str(exc), cfg.source) from exc


def reinforcement_from(cfg: Config, quadrature: QuadratureSpec) -> ReinforcementConfig:
    cfg.check_keys("reinforce", {"n_values", "rho_values", "r_values", "quantile"})
    base = ReinforcementConfig()
    try:
        return ReinforcementConfig(
            n_values=cfg.get("reinforce", "n_values", int_list, base.n_values),
            rho_values=cfg.get("reinforce", "rho_values", float_list, base.rho_values),
            r_values=cfg.get("reinforce", "r_values", float_list, base.r_values),
            quantile=cfg.get("reinforce", "quantile", float, base.quantile),
            quadrature=quadrature,
        )
    except DomainError as exc:
        raise ConfigError(str(exc), cfg.source) from exc


_SIM_KEYS = {"n_values", "rho_values", "instances", "sigma_mu", "sigma2_big_sigma", "tau", "gamma", "seed"}


def simulation_from(cfg: Config, quadrature: QuadratureSpec, seed: int) -> SimulationConfig:
    cfg.check_keys("portfolio", _SIM_KEYS)
    base = SimulationConfig()
    try:
        return SimulationConfig(
            n_values=cfg.get("portfolio", "n_values", int_list, base.n_values),
            rho_values=cfg.get("portfolio", "rho_values", float_list, base.rho_values),
            instances=cfg.get("portfolio", "instances", int, base.instances),
            sigma_mu=cfg.get("portfolio", "sigma_mu", float, base.sigma_mu),
            sigma2_big_sigma=cfg.get("portfolio", "sigma2_big_sigma", float, base.sigma2_big_sigma),
            tau=cfg.get("portfolio", "tau", float, base.tau),
            gamma=cfg.get("portfolio", "gamma", float, base.gamma),
            master_seed=seed,
            quadrature=quadrature,
        )
    except DomainError as exc:
        raise ConfigError(str(exc), cfg.source) from exc


def _fmt(value) -> str:
    if isinstance(value, (tuple, list, np.ndarray)):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render(sections: dict[str, dict]) -> str:
    """Serialise a resolved config back to the same ``key = value`` format."""
    out = io.StringIO()
    for name, values in sections.items():
        out.write(f"[{name}]\n")
        for key, value in values.items():
            out.write(f"{key} = {_fmt(value)}\n")
        out.write("\n")
    return out.getvalue()


def quadrature_section(spec: QuadratureSpec) -> dict:
    return {f.name: getattr(spec, f.name) for f in fields(QuadratureSpec)}
