"""Plain-text experiment configuration (INI sections, key = value).

One config file describes one run.  Sections group the physical record
they configure; every experiment needs ``[experiment] kind`` and
``[output] csv``, stochastic experiments also need ``[grid]`` and
``[ensemble]``.  Complex matrices are written row-major as
``re,im`` pairs separated by whitespace, rows separated by ``;``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

EXPERIMENT_KINDS = ("master", "trajectories", "scheme_a", "scheme_b", "protection")


def _fail(section: str, key: str, msg: str):
    raise ConfigError(f"[{section}] {key}: {msg}")


class SectionView:
    """Typed access to one config section with precise error messages."""

    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        self._data = dict(parser[name]) if parser.has_section(name) else {}
        self._seen = set()

    @property
    def present(self) -> bool:
        return bool(self._data)

    def _get(self, key, default, required):
        self._seen.add(key)
        if key not in self._data:
            if required:
                _fail(self.name, key, "required key is missing")
            return default
        return self._data[key]

    def get_str(self, key, default=None, required=False, choices=None):
        raw = self._get(key, default, required)
        if raw is not None and choices is not None and raw not in choices:
            _fail(self.name, key, f"must be one of {choices}, got {raw!r}")
        return raw

    def get_float(self, key, default=None, required=False, minimum=None):
        raw = self._get(key, default, required)
        if raw is None or isinstance(raw, float):
            return raw
        try:
            val = float(raw)
        except ValueError:
            _fail(self.name, key, f"not a number: {raw!r}")
        if minimum is not None and val < minimum:
            _fail(self.name, key, f"must be >= {minimum}, got {val}")
        return val

    def get_int(self, key, default=None, required=False, minimum=None):
        raw = self._get(key, default, required)
        if raw is None or isinstance(raw, int):
            return raw
        try:
            val = int(raw)
        except ValueError:
            _fail(self.name, key, f"not an integer: {raw!r}")
        if minimum is not None and val < minimum:
            _fail(self.name, key, f"must be >= {minimum}, got {val}")
        return val

    def get_matrix(self, key, default=None, required=False):
        raw = self._get(key, default, required)
        if raw is None or isinstance(raw, np.ndarray):
            return raw
        try:
            rows = []
            for chunk in raw.split(";"):
                row = []
                for token in chunk.split():
                    re_s, im_s = token.split(",")
                    row.append(complex(float(re_s), float(im_s)))
                if row:
                    rows.append(row)
            mat = np.array(rows, dtype=np.complex128)
        except Exception:
            _fail(self.name, key, "expected rows of re,im pairs separated by ';'")
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            _fail(self.name, key, f"matrix must be square, got shape {mat.shape}")
        return mat

    def reject_unknown(self):
        unknown = set(self._data) - self._seen
        if unknown:
            _fail(self.name, sorted(unknown)[0], "unknown key")


@dataclass
class GridSpec:
    t_final: float
    dt: float
    sample_every: int

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def validate(self, section="grid"):
        if self.dt <= 0:
            _fail(section, "dt", "must be positive")
        n = self.n_steps
        if n < 1 or abs(n * self.dt - self.t_final) > 1e-9 * max(1.0, self.t_final):
            _fail(section, "t_final", f"must be a positive multiple of dt={self.dt}")
        if self.sample_every < 1 or n % self.sample_every != 0:
            _fail(section, "sample_every", f"must divide the {n} steps")

    def sample_times(self) -> np.ndarray:
        n = self.n_steps // self.sample_every
        return np.arange(n + 1) * (self.dt * self.sample_every)


@dataclass
class ExperimentConfig:
    """Parsed and fully validated description of one run."""

    experiment: str
    sections: dict                      # raw config echo for the manifest
    grid: GridSpec | None
    n_traj: int | None
    master_seed: int | None
    mixing: np.ndarray | None
    csv_path: str
    params: dict = field(default_factory=dict)


def load_config(path: str) -> ExperimentConfig:
    """Parse and validate a config file; raises ConfigError naming the field."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"[file] {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"[file] {path}: malformed config ({exc})") from exc

    exp = SectionView(parser, "experiment")
    kind = exp.get_str("kind", required=True, choices=EXPERIMENT_KINDS)
    exp.reject_unknown()

    out = SectionView(parser, "output")
    csv_path = out.get_str("csv", required=True)
    out.reject_unknown()

    grid = None
    if parser.has_section("grid") or kind in ("master", "trajectories", "scheme_b", "protection"):
        g = SectionView(parser, "grid")
        grid = GridSpec(
            t_final=g.get_float("t_final", required=True),
            dt=g.get_float("dt", required=True),
            sample_every=g.get_int("sample_every", default=1, minimum=1),
        )
        g.reject_unknown()
        grid.validate()

    n_traj = None
    master_seed = None
    needs_ensemble = kind in ("trajectories", "protection")
    if parser.has_section("ensemble") or needs_ensemble:
        e = SectionView(parser, "ensemble")
        n_traj = e.get_int("n_traj", required=needs_ensemble, minimum=1)
        master_seed = e.get_int("master_seed", required=needs_ensemble or kind == "scheme_a")
        e.reject_unknown()

    mixing = None
    if parser.has_section("unravelling"):
        u = SectionView(parser, "unravelling")
        mixing = u.get_matrix("matrix", required=True)
        u.reject_unknown()
        uu = mixing.conj().T @ mixing
        if float(np.max(np.abs(uu - np.eye(mixing.shape[0])))) > 1e-12:
            _fail("unravelling", "matrix", "not unitary to 1e-12")

    params = _load_experiment_params(parser, kind)

    sections = {name: dict(parser[name]) for name in parser.sections()}
    cfg = ExperimentConfig(
        experiment=kind,
        sections=sections,
        grid=grid,
        n_traj=n_traj,
        master_seed=master_seed,
        mixing=mixing,
        csv_path=csv_path,
        params=params,
    )
    _cross_validate(cfg)
    return cfg


def _load_experiment_params(parser, kind) -> dict:
    if kind == "master":
        s = SectionView(parser, "master")
        params = {
            "system": s.get_str("system", default="field", choices=("field", "qubit")),
            "gamma_minus": s.get_float("gamma_minus", required=True, minimum=0.0),
            "gamma_plus": s.get_float("gamma_plus", required=True, minimum=0.0),
            "n_trunc": s.get_int("n_trunc", default=8, minimum=2),
            "initial_fock": s.get_int("initial_fock", default=0, minimum=0),
            "initial_level": s.get_str("initial_level", default="e", choices=("g", "e")),
        }
        s.reject_unknown()
        if params["system"] == "field" and params["initial_fock"] >= params["n_trunc"]:
            _fail("master", "initial_fock", "must be below n_trunc")
        return params

    if kind == "trajectories":
        s = SectionView(parser, "rates")
        params = {
            "gamma_minus": s.get_float("gamma_minus", required=True, minimum=0.0),
            "gamma_plus": s.get_float("gamma_plus", required=True, minimum=0.0),
            "initial_level": s.get_str("initial_level", default="e", choices=("g", "e")),
        }
        s.reject_unknown()
        return params

    if kind == "scheme_a":
        s = SectionView(parser, "scheme_a")
        params = {
            "lambda1": s.get_float("lambda1", required=True, minimum=0.0),
            "dt1": s.get_float("dt1", required=True, minimum=0.0),
            "lambda2": s.get_float("lambda2", required=True, minimum=0.0),
            "dt2": s.get_float("dt2", required=True, minimum=0.0),
            "r": s.get_float("r", required=True),
            "n_trunc": s.get_int("n_trunc", required=True, minimum=2),
            "mode": s.get_str("mode", default="traced", choices=("traced", "monitored")),
            "n_atoms": s.get_int("n_atoms", required=True, minimum=0),
            "sample_every": s.get_int("sample_every", default=1, minimum=1),
            "initial_fock": s.get_int("initial_fock", default=0, minimum=0),
            "rotation": s.get_str("rotation", default="identity",
                                  choices=("identity", "quadrature", "custom")),
            "rotation_matrix": s.get_matrix("rotation_matrix"),
        }
        s.reject_unknown()
        if params["initial_fock"] >= params["n_trunc"]:
            _fail("scheme_a", "initial_fock", "must be below n_trunc")
        if params["rotation"] == "custom" and params["rotation_matrix"] is None:
            _fail("scheme_a", "rotation_matrix", "required when rotation = custom")
        if params["n_atoms"] % params["sample_every"] != 0:
            _fail("scheme_a", "sample_every", "must divide n_atoms")
        return params

    if kind == "scheme_b":
        s = SectionView(parser, "scheme_b")
        params = {
            "kappa": s.get_float("kappa", required=True),
            "lambda_ge": s.get_float("lambda_ge", required=True, minimum=0.0),
            "lambda_ie": s.get_float("lambda_ie", required=True),
            "omega_drive": s.get_float("omega_drive", required=True, minimum=0.0),
            "gamma_nat": s.get_float("gamma_nat", default=0.0, minimum=0.0),
            "Gamma_nat": s.get_float("Gamma_nat", default=0.0, minimum=0.0),
            "delta_ge": s.get_float("delta_ge", default=0.0),
            "n_trunc_R": s.get_int("n_trunc_R", default=3, minimum=2),
            "n_trunc_L": s.get_int("n_trunc_L", default=3, minimum=2),
        }
        s.reject_unknown()
        if params["kappa"] <= 0:
            _fail("scheme_b", "kappa", "must be positive")
        if params["lambda_ie"] <= 0:
            _fail("scheme_b", "lambda_ie", "must be positive")
        return params

    if kind == "protection":
        s = SectionView(parser, "protection")
        params = {"gamma": s.get_float("gamma", required=True)}
        s.reject_unknown()
        if params["gamma"] <= 0:
            _fail("protection", "gamma", "must be positive")
        return params

    raise ConfigError(f"[experiment] kind: unhandled kind {kind!r}")


def _cross_validate(cfg: ExperimentConfig):
    """Checks that need several sections at once."""
    if cfg.experiment == "trajectories":
        if cfg.mixing is not None and cfg.mixing.shape != (3, 3):
            _fail("unravelling", "matrix",
                  f"need a 3x3 matrix over (no-jump, J-, J+), got {cfg.mixing.shape}")
        gmax = max(cfg.params["gamma_minus"], cfg.params["gamma_plus"])
        if gmax * cfg.grid.dt > 0.05:
            _fail("grid", "dt", f"dt*max(gamma) = {gmax * cfg.grid.dt:.3g} exceeds 0.05")
    if cfg.experiment == "protection":
        if cfg.params["gamma"] * cfg.grid.dt > 0.05:
            _fail("grid", "dt", "dt*gamma exceeds 0.05")
    if cfg.experiment == "master":
        stiff = max(cfg.params["gamma_minus"], cfg.params["gamma_plus"])
        if stiff > 0 and cfg.grid.dt > 0.1 / stiff:
            _fail("grid", "dt", f"integration step too large for rates (need <= {0.1 / stiff:.3g})")
    if cfg.experiment == "scheme_b":
        stiff = max(cfg.params["kappa"], cfg.params["lambda_ie"], cfg.params["lambda_ge"],
                    abs(cfg.params["delta_ge"]))
        if cfg.grid.dt > 0.1 / stiff:
            _fail("grid", "dt", f"integration step must be <= 0.1/kappa-scale = {0.1 / stiff:.3g}")
