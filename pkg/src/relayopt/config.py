"""System configuration: one flat object covering geometry, radio,
power model, path loss and solver knobs, with defaults matching the
reference simulation parameters.

Config files are flat ``key = value`` documents; INI/TOML-style
sections are allowed and are flattened into dotted keys, e.g.::

    n_users = 8
    [pathloss.rn_ue_nlos]
    intercept_db = 145.4
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields
from typing import Optional

from .channel import LINK_CLASSES, PathLossModel
from .model import PowerModel, RadioConfig, dbm_to_watts
from .solver import SolverParams


class ConfigError(ValueError):
    """Bad config file or invalid parameter combination."""


@dataclass
class SystemConfig:
    # population / geometry
    n_users: int = 8
    n_subcarriers: int = 32
    n_relays: int = 3
    cell_radius_km: float = 1.5
    d_r: float = 0.5                 # relay ring radius over cell radius

    # radio
    p_max_dbm: float = 0.0
    subcarrier_bw_hz: float = 12e3   # Hz
    noise_psd_dbm_hz: float = -174.0
    snr_gap_db: float = 0.0

    # power model
    p_c_bs_w: float = 60.0
    p_c_rn_w: float = 20.0
    xi_bs: float = 2.6
    xi_rn: float = 5.0

    # solver
    i_outer_max: int = 10
    i_inner_max: int = 100
    eps_outer: float = 1e-8
    eps_inner: float = 1e-8
    lambda_mode: str = "bisection"
    lambda_step: float = 0.0         # 0 -> auto 0.05/p_max (subgradient mode)
    lambda_init: float = 1.0
    tie_break: str = "lowest-index"
    master_seed: int = 1

    # propagation
    pathloss: PathLossModel = field(default_factory=PathLossModel)

    # --- derived views -------------------------------------------------
    @property
    def p_max_w(self) -> float:
        return dbm_to_watts(self.p_max_dbm)

    @property
    def cell_radius_m(self) -> float:
        return self.cell_radius_km * 1000.0

    @property
    def noise_gap_watts(self) -> float:
        return self.radio().noise_gap_watts

    def radio(self) -> RadioConfig:
        return RadioConfig(
            n_subcarriers=self.n_subcarriers,
            n_users=self.n_users,
            n_relays=self.n_relays,
            subcarrier_bw_hz=self.subcarrier_bw_hz,
            noise_psd_dbm_hz=self.noise_psd_dbm_hz,
            snr_gap_db=self.snr_gap_db,
        )

    def power_model(self) -> PowerModel:
        return PowerModel(
            p_c_bs=self.p_c_bs_w,
            p_c_rn=self.p_c_rn_w,
            xi_bs=self.xi_bs,
            xi_rn=self.xi_rn,
            p_max=self.p_max_w,
        )

    def solver_params(self) -> SolverParams:
        return SolverParams(
            i_outer_max=self.i_outer_max,
            i_inner_max=self.i_inner_max,
            eps_outer=self.eps_outer,
            eps_inner=self.eps_inner,
            lambda_mode=self.lambda_mode,
            lambda_step=self.lambda_step,
            lambda_init=self.lambda_init,
            tie_break=self.tie_break,
        )

    def validate(self) -> None:
        def bad(key, why):
            raise ConfigError(f"invalid config: {key}: {why}")

        if self.n_users < 1:
            bad("n_users", "must be >= 1")
        if self.n_subcarriers < 1:
            bad("n_subcarriers", "must be >= 1")
        if self.n_relays < 0:
            bad("n_relays", "must be >= 0")
        if self.cell_radius_km <= 0.0:
            bad("cell_radius_km", "must be positive")
        if self.n_relays > 0 and not (0.0 < self.d_r < 1.0):
            bad("d_r", "must lie in (0, 1) when n_relays > 0")
        if self.subcarrier_bw_hz <= 0.0:
            bad("subcarrier_bw_hz", "must be positive")
        if not self.xi_bs > 1.0:
            bad("xi_bs", "drain-efficiency reciprocal must exceed 1")
        if not self.xi_rn > 1.0:
            bad("xi_rn", "drain-efficiency reciprocal must exceed 1")
        if self.p_c_bs_w < 0.0:
            bad("p_c_bs_w", "must be >= 0")
        if self.p_c_rn_w < 0.0:
            bad("p_c_rn_w", "must be >= 0")
        try:
            self.solver_params().validate()
        except ValueError as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        try:
            self.pathloss.validate()
        except ValueError as exc:
            raise ConfigError(f"invalid config: {exc}") from exc


_INT_FIELDS = {"n_users", "n_subcarriers", "n_relays", "i_outer_max",
               "i_inner_max", "master_seed"}
_STR_FIELDS = {"lambda_mode", "tie_break"}
_SCALAR_FIELDS = {f.name for f in fields(SystemConfig)} - {"pathloss"}
_PATHLOSS_KEYS = {f"pathloss.{cls}.{attr}"
                  for cls in LINK_CLASSES
                  for attr in ("intercept_db", "slope_db")}
_PATHLOSS_KEYS.add("pathloss.min_coupling_loss_db")


def _coerce(key: str, raw) -> object:
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if key in _STR_FIELDS:
        return text
    try:
        if key in _INT_FIELDS:
            return int(text)
        return float(text)
    except ValueError:
        raise ConfigError(f"invalid config: {key}: cannot parse {text!r}") from None


def _parse_file(path: str) -> dict:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep keys as written
    try:
        with open(path) as fh:
            # allow bare top-level keys by injecting a default section
            parser.read_string("[__top__]\n" + fh.read(), source=path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    out = {}
    for section in parser.sections():
        prefix = "" if section == "__top__" else section + "."
        for key, value in parser.items(section):
            out[prefix + key] = value
    return out


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None,
                base: Optional[SystemConfig] = None) -> SystemConfig:
    """defaults <- file <- overrides, validated before use.

    `base` replaces the stock defaults as the bottom layer (used for
    scenario presets).  Unknown keys are rejected rather than ignored: a
    typo silently reverting a parameter to its default is the worst
    failure mode a simulation config can have.
    """
    merged: dict = {}
    if path:
        merged.update(_parse_file(path))
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})

    cfg = SystemConfig() if base is None else dataclasses.replace(base)
    pl_updates: dict = {}
    for key, raw in merged.items():
        if key in _SCALAR_FIELDS:
            setattr(cfg, key, _coerce(key, raw))
        elif key in _PATHLOSS_KEYS:
            pl_updates[key] = _coerce(key, raw)
        else:
            raise ConfigError(f"unknown config key: {key}")

    if pl_updates:
        cfg.pathloss = dataclasses.replace(cfg.pathloss)  # do not share the default
        for key, value in pl_updates.items():
            parts = key.split(".")
            if len(parts) == 2:  # pathloss.min_coupling_loss_db
                cfg.pathloss.min_coupling_loss_db = value
            else:
                cls = dataclasses.replace(getattr(cfg.pathloss, parts[1]))
                setattr(cls, parts[2], value)
                setattr(cfg.pathloss, parts[1], cls)

    cfg.validate()
    return cfg
