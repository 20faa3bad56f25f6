"""Geometric mmWave channels through an IRS: steering vectors, path sets, cascades.

The BS and every user carry ULAs; the IRS is a UPA with F_y x F_z elements.
Each link is a finite sum of paths. The first path of every set is the
line-of-sight ray, whose angles follow from the configured 3-D geometry and
whose amplitude follows a 28 GHz free-space loss of ``61.4 + 20*log10(d)`` dB;
the remaining paths are random scatterers ``nlos_backoff_db`` weaker on
average. Gain statistics are a standard substitution (the originating model
leaves them unspecified) and both knobs are configurable.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConfigError",
    "SystemConfig",
    "PathSet",
    "ChannelSet",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "ula_response",
    "upa_response",
    "gen_bs_irs",
    "gen_irs_user",
    "generate_channels",
    "effective_channel",
    "effective_channels",
    "random_phase_vector",
    "ones_phase_vector",
    "phase_matrix",
    "assert_unit_modulus",
]

# Half-wavelength element spacing everywhere.
D_OVER_LAMBDA = 0.5


class ConfigError(ValueError):
    """Raised when a scenario configuration violates a structural constraint."""


@dataclass(frozen=True)
class SystemConfig:
    """All scenario scalars for one simulation setup.

    Counts follow the usual hybrid-MIMO naming: ``n_*`` antennas, ``m_*`` RF
    chains, ``n_irs`` reflecting elements, ``zeta`` streams per user.
    Positions are metres; powers dBm; antenna gains dBi.
    """

    n_bs: int
    n_ue: int
    m_bs: int
    m_ue: int
    n_irs: int
    f_y: int
    f_z: int
    k_users: int
    h_groups: int
    group_sizes: tuple[int, ...]
    zeta: int
    power_dbm: float
    noise_dbm: float
    bw_hz: float
    g_tx_dbi: float
    g_rx_dbi: float
    paths_y: int
    paths_l: int
    bs_pos: tuple[float, float, float]
    irs_pos: tuple[float, float, float]
    user_center: tuple[float, float, float]
    user_radius: float
    seed: int = 0
    los_pathloss_db: float = 61.4
    nlos_backoff_db: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "group_sizes", tuple(int(g) for g in self.group_sizes))
        for name in ("bs_pos", "irs_pos", "user_center"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        counts = {
            "n_bs": self.n_bs, "n_ue": self.n_ue, "m_bs": self.m_bs,
            "m_ue": self.m_ue, "n_irs": self.n_irs, "f_y": self.f_y,
            "f_z": self.f_z, "k_users": self.k_users, "h_groups": self.h_groups,
            "zeta": self.zeta, "paths_y": self.paths_y, "paths_l": self.paths_l,
        }
        for name, value in counts.items():
            if int(value) < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.n_irs != self.f_y * self.f_z:
            raise ConfigError(
                f"n_irs={self.n_irs} must equal f_y*f_z={self.f_y * self.f_z}")
        if not (self.h_groups * self.zeta <= self.m_bs <= self.n_bs):
            raise ConfigError(
                f"RF chain bounds violated: need H*zeta={self.h_groups * self.zeta}"
                f" <= m_bs={self.m_bs} <= n_bs={self.n_bs}")
        if not (self.zeta <= self.m_ue <= self.n_ue):
            raise ConfigError(
                f"RF chain bounds violated: need zeta={self.zeta}"
                f" <= m_ue={self.m_ue} <= n_ue={self.n_ue}")
        if len(self.group_sizes) != self.h_groups:
            raise ConfigError(
                f"group_sizes has {len(self.group_sizes)} entries, expected {self.h_groups}")
        if any(g < 1 for g in self.group_sizes):
            raise ConfigError("every group needs at least one user")
        if sum(self.group_sizes) != self.k_users:
            raise ConfigError(
                f"sum(group_sizes)={sum(self.group_sizes)} must equal k_users={self.k_users}")
        if self.user_radius < 0:
            raise ConfigError("user_radius must be non-negative")

    @property
    def power_w(self) -> float:
        return 10.0 ** ((self.power_dbm - 30.0) / 10.0)

    @property
    def noise_w(self) -> float:
        return 10.0 ** ((self.noise_dbm - 30.0) / 10.0)

    @property
    def g_tx_lin(self) -> float:
        # dBi applied as an amplitude factor inside the effective channel.
        return 10.0 ** (self.g_tx_dbi / 20.0)

    @property
    def g_rx_lin(self) -> float:
        return 10.0 ** (self.g_rx_dbi / 20.0)

    def groups(self) -> tuple[tuple[int, ...], ...]:
        """Disjoint consecutive user-index blocks, one per group."""
        out, start = [], 0
        for size in self.group_sizes:
            out.append(tuple(range(start, start + size)))
            start += size
        return tuple(out)


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(SystemConfig)}


def config_from_dict(data: dict) -> SystemConfig:
    unknown = set(data) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return SystemConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def config_to_dict(cfg: SystemConfig) -> dict:
    out = dataclasses.asdict(cfg)
    for key in ("group_sizes", "bs_pos", "irs_pos", "user_center"):
        out[key] = list(out[key])
    return out


def load_config(path) -> SystemConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    return config_from_dict(data)


# ---------------------------------------------------------------------------
# Array responses
# ---------------------------------------------------------------------------

def ula_response(angle_rad: float, n: int, d_over_lambda: float = D_OVER_LAMBDA) -> np.ndarray:
    """Normalized ULA steering vector; element n' carries phase 2*pi*d/lambda*(n'-1)*sin(r)."""
    if n < 1:
        raise ValueError("ULA needs at least one antenna")
    idx = np.arange(n)
    return np.exp(2j * np.pi * d_over_lambda * idx * np.sin(angle_rad)) / math.sqrt(n)


def upa_response(theta: float, eta: float, f_y: int, f_z: int,
                 d_over_lambda: float = D_OVER_LAMBDA) -> np.ndarray:
    """Normalized UPA steering vector.

    Element (f1, f2) carries phase
    ``2*pi*d/lambda*((f1-1)*cos(eta)*sin(theta) + (f2-1)*sin(eta))``; the
    flat index runs with the vertical index f2 fastest, a convention shared
    with the phase-coupling construction.
    """
    if f_y < 1 or f_z < 1:
        raise ValueError("UPA needs at least one element per dimension")
    f1 = np.arange(f_y)[:, None]
    f2 = np.arange(f_z)[None, :]
    phase = f1 * (np.cos(eta) * np.sin(theta)) + f2 * np.sin(eta)
    grid = np.exp(2j * np.pi * d_over_lambda * phase)
    return grid.reshape(f_y * f_z) / math.sqrt(f_y * f_z)


# ---------------------------------------------------------------------------
# Path sets and channel assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathSet:
    """Per-path gains and angles for one link; index 0 is the LOS ray.

    ``az_irs``/``el_irs`` are the IRS-side azimuth/elevation (arrival for the
    BS link, departure for a user link); ``endpoint`` is the single ULA angle
    at the far end (BS departure or user arrival).
    """

    gains: np.ndarray
    az_irs: np.ndarray
    el_irs: np.ndarray
    endpoint: np.ndarray

    def __post_init__(self):
        n = self.gains.shape[0]
        if not (self.az_irs.shape == self.el_irs.shape == self.endpoint.shape == (n,)):
            raise ValueError("path arrays must share one length")
        if not np.all(np.isfinite(self.gains)):
            raise ValueError("path gains must be finite")


@dataclass(frozen=True)
class ChannelSet:
    """One realization: BS->IRS matrix, per-user IRS->user matrices, and paths."""

    h_bs_irs: np.ndarray
    h_irs_ue: tuple[np.ndarray, ...]
    bs_paths: PathSet
    ue_paths: tuple[PathSet, ...]
    user_positions: tuple[tuple[float, float, float], ...]


def _unit_direction(src, dst) -> np.ndarray:
    d = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    norm = np.linalg.norm(d)
    if norm == 0.0:
        raise ValueError("coincident endpoints have no direction")
    return d / norm


def _upa_angles(direction: np.ndarray) -> tuple[float, float]:
    # IRS-local convention: boresight along +y, horizontal azimuth, elevation
    # from the horizontal plane.
    az = math.atan2(direction[0], direction[1])
    el = math.asin(np.clip(direction[2], -1.0, 1.0))
    return az, el


def _ula_angle(direction: np.ndarray) -> float:
    # ULA axis along x; steering angle measured from broadside.
    return math.asin(np.clip(direction[0], -1.0, 1.0))


def fspl_amplitude(dist_m: float, offset_db: float) -> float:
    """Amplitude factor of the ``offset_db + 20*log10(d)`` free-space loss."""
    loss_db = offset_db + 20.0 * math.log10(max(dist_m, 1.0))
    return 10.0 ** (-loss_db / 20.0)


def _draw_paths(rng: np.random.Generator, n_paths: int, los_gain_amp: float,
                los_az: float, los_el: float, los_endpoint: float,
                backoff_db: float) -> PathSet:
    gains = np.empty(n_paths, dtype=np.complex128)
    gains[0] = los_gain_amp * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
    n_nlos = n_paths - 1
    az = np.empty(n_paths)
    el = np.empty(n_paths)
    endpoint = np.empty(n_paths)
    az[0], el[0], endpoint[0] = los_az, los_el, los_endpoint
    if n_nlos:
        sigma = los_gain_amp * 10.0 ** (-backoff_db / 20.0)
        reim = rng.standard_normal((n_nlos, 2))
        gains[1:] = sigma / math.sqrt(2.0) * (reim[:, 0] + 1j * reim[:, 1])
        az[1:] = rng.uniform(-np.pi / 2, np.pi / 2, n_nlos)
        el[1:] = rng.uniform(-np.pi / 4, np.pi / 4, n_nlos)
        endpoint[1:] = rng.uniform(-np.pi / 2, np.pi / 2, n_nlos)
    return PathSet(gains=gains, az_irs=az, el_irs=el, endpoint=endpoint)


def bs_irs_from_paths(paths: PathSet, cfg: SystemConfig) -> np.ndarray:
    """Assemble the M x N_B BS->IRS matrix from an explicit path set."""
    scale = math.sqrt(cfg.n_bs * cfg.n_irs / cfg.paths_y)
    h = np.zeros((cfg.n_irs, cfg.n_bs), dtype=np.complex128)
    for gain, az, el, r_dep in zip(paths.gains, paths.az_irs, paths.el_irs, paths.endpoint):
        a_irs = upa_response(az, el, cfg.f_y, cfg.f_z)
        a_bs = ula_response(r_dep, cfg.n_bs)
        h += gain * np.outer(a_irs, a_bs.conj())
    return scale * h


def irs_user_from_paths(paths: PathSet, cfg: SystemConfig) -> np.ndarray:
    """Assemble the N_U x M IRS->user matrix from an explicit path set."""
    scale = math.sqrt(cfg.n_irs * cfg.n_ue / cfg.paths_l)
    h = np.zeros((cfg.n_ue, cfg.n_irs), dtype=np.complex128)
    for gain, az, el, r_arr in zip(paths.gains, paths.az_irs, paths.el_irs, paths.endpoint):
        a_ue = ula_response(r_arr, cfg.n_ue)
        a_irs = upa_response(az, el, cfg.f_y, cfg.f_z)
        h += gain * np.outer(a_ue, a_irs.conj())
    return scale * h


def gen_bs_irs(cfg: SystemConfig, rng: np.random.Generator) -> tuple[np.ndarray, PathSet]:
    """Draw the BS->IRS channel; LOS geometry from the configured positions."""
    toward_bs = _unit_direction(cfg.irs_pos, cfg.bs_pos)
    los_az, los_el = _upa_angles(toward_bs)
    los_dep = _ula_angle(_unit_direction(cfg.bs_pos, cfg.irs_pos))
    dist = float(np.linalg.norm(np.asarray(cfg.bs_pos) - np.asarray(cfg.irs_pos)))
    paths = _draw_paths(rng, cfg.paths_y, fspl_amplitude(dist, cfg.los_pathloss_db),
                        los_az, los_el, los_dep, cfg.nlos_backoff_db)
    return bs_irs_from_paths(paths, cfg), paths


def _draw_user_position(cfg: SystemConfig, rng: np.random.Generator) -> tuple[float, float, float]:
    radius = cfg.user_radius * math.sqrt(rng.uniform())
    angle = rng.uniform(0.0, 2.0 * np.pi)
    cx, cy, cz = cfg.user_center
    return (cx + radius * math.cos(angle), cy + radius * math.sin(angle), cz)


def gen_irs_user(cfg: SystemConfig, user_k: int, rng: np.random.Generator,
                 position: tuple[float, float, float] | None = None,
                 ) -> tuple[np.ndarray, PathSet, tuple[float, float, float]]:
    """Draw the IRS->user channel for user ``user_k``.

    The user position is drawn uniformly in the configured disc unless given
    explicitly.
    """
    if not 0 <= user_k < cfg.k_users:
        raise IndexError(f"user index {user_k} out of range for K={cfg.k_users}")
    if position is None:
        position = _draw_user_position(cfg, rng)
    toward_user = _unit_direction(cfg.irs_pos, position)
    los_az, los_el = _upa_angles(toward_user)
    los_arr = _ula_angle(_unit_direction(position, cfg.irs_pos))
    dist = float(np.linalg.norm(np.asarray(cfg.irs_pos) - np.asarray(position)))
    paths = _draw_paths(rng, cfg.paths_l, fspl_amplitude(dist, cfg.los_pathloss_db),
                        los_az, los_el, los_arr, cfg.nlos_backoff_db)
    return irs_user_from_paths(paths, cfg), paths, position


def generate_channels(cfg: SystemConfig, rng: np.random.Generator) -> ChannelSet:
    """Draw one full channel realization (fixed draw order for reproducibility)."""
    h_bs, bs_paths = gen_bs_irs(cfg, rng)
    per_user, ue_paths, positions = [], [], []
    for k in range(cfg.k_users):
        h_k, paths_k, pos_k = gen_irs_user(cfg, k, rng)
        per_user.append(h_k)
        ue_paths.append(paths_k)
        positions.append(pos_k)
    return ChannelSet(h_bs_irs=h_bs, h_irs_ue=tuple(per_user),
                      bs_paths=bs_paths, ue_paths=tuple(ue_paths),
                      user_positions=tuple(positions))


# ---------------------------------------------------------------------------
# Phase vectors and effective channels
# ---------------------------------------------------------------------------

def random_phase_vector(m: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-modulus vector nu with nu_m = exp(-j*phi_m), phi uniform on [0, 2pi)."""
    return np.exp(-1j * rng.uniform(0.0, 2.0 * np.pi, m))


def ones_phase_vector(m: int) -> np.ndarray:
    return np.ones(m, dtype=np.complex128)


def assert_unit_modulus(nu: np.ndarray, tol: float = 1e-12) -> None:
    dev = float(np.max(np.abs(np.abs(nu) - 1.0)))
    if dev > tol:
        raise ValueError(f"phase vector off the unit circle by {dev:.3e}")


def phase_matrix(nu: np.ndarray) -> np.ndarray:
    """Diagonal reflection matrix Phi with Phi[m,m] = exp(j*phi_m) = conj(nu_m)."""
    return np.diag(np.conj(nu))


def effective_channel(h_bs: np.ndarray, h_ue_k: np.ndarray, nu: np.ndarray,
                      g_tx_dbi: float, g_rx_dbi: float) -> np.ndarray:
    """Cascaded BS->IRS->user channel ``G_t G_r H_k^R Phi H^B``."""
    m = h_bs.shape[0]
    if h_ue_k.shape[1] != m or nu.shape != (m,):
        raise ValueError(
            f"shape mismatch: H_ue {h_ue_k.shape}, H_bs {h_bs.shape}, nu {nu.shape}")
    gain = 10.0 ** (g_tx_dbi / 20.0) * 10.0 ** (g_rx_dbi / 20.0)
    return gain * ((h_ue_k * np.conj(nu)[None, :]) @ h_bs)


def effective_channels(chset: ChannelSet, nu: np.ndarray, cfg: SystemConfig) -> list[np.ndarray]:
    return [effective_channel(chset.h_bs_irs, h_k, nu, cfg.g_tx_dbi, cfg.g_rx_dbi)
            for h_k in chset.h_irs_ue]
