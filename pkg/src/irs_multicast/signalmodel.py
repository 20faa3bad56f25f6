"""Ground-truth rate oracle: SINR, per-user and per-group rates from raw beamformers.

Everything here evaluates beamformers by direct summation over streams; it
knows nothing about how the beamformers were constructed, which is what makes
it usable as the independent check on the block-diagonalization closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, SystemConfig, effective_channels

__all__ = [
    "BeamformerSet",
    "RateReport",
    "ConstraintReport",
    "groups_from_sizes",
    "validate_groups",
    "stream_sinr",
    "user_rate",
    "sum_rate",
    "check_constraints",
]


def groups_from_sizes(sizes) -> tuple[tuple[int, ...], ...]:
    """Consecutive disjoint user-index blocks, one per group."""
    out, start = [], 0
    for size in sizes:
        out.append(tuple(range(start, start + size)))
        start += size
    return tuple(out)


def validate_groups(groups, k_users: int) -> None:
    seen: set[int] = set()
    for members in groups:
        if len(members) == 0:
            raise ValueError("empty group")
        for k in members:
            if not 0 <= k < k_users:
                raise ValueError(f"user index {k} out of range")
            if k in seen:
                raise ValueError(f"user {k} appears in more than one group")
            seen.add(k)
    if len(seen) != k_users:
        raise ValueError("groups must cover every user exactly once")


@dataclass
class BeamformerSet:
    """Transmit/receive beamformers, either fully digital or hybrid.

    Hybrid mode composes ``f_rf @ f_bb`` at the BS (N_B x H*zeta) and
    ``w_rf[k] @ w_bb[k]`` per user (N_U x zeta); digital mode uses
    ``digital_b`` and ``digital_j[k]`` of the same composed shapes.
    """

    mode: str
    f_rf: np.ndarray | None = None
    f_bb: np.ndarray | None = None
    w_rf: list[np.ndarray] | None = None
    w_bb: list[np.ndarray] | None = None
    digital_b: np.ndarray | None = None
    digital_j: list[np.ndarray] | None = None

    def __post_init__(self):
        if self.mode not in ("digital", "hybrid"):
            raise ValueError(f"unknown beamformer mode {self.mode!r}")
        if self.mode == "digital" and (self.digital_b is None or self.digital_j is None):
            raise ValueError("digital mode needs digital_b and digital_j")
        if self.mode == "hybrid" and any(
                x is None for x in (self.f_rf, self.f_bb, self.w_rf, self.w_bb)):
            raise ValueError("hybrid mode needs f_rf, f_bb, w_rf, w_bb")

    def tx_matrix(self) -> np.ndarray:
        if self.mode == "hybrid":
            return self.f_rf @ self.f_bb
        return self.digital_b

    def combiner(self, k: int) -> np.ndarray:
        if self.mode == "hybrid":
            return self.w_rf[k] @ self.w_bb[k]
        return self.digital_j[k]


@dataclass
class RateReport:
    """Per-stream SINR decomposition plus the multicast rate roll-up."""

    sinr: np.ndarray            # (K, zeta)
    signal: np.ndarray          # (K, zeta) desired-signal power
    intra: np.ndarray           # (K, zeta) own-stream interference power
    inter: np.ndarray           # (K, zeta) other-group interference power
    sinr_colored: np.ndarray    # diagnostic: noise scaled by combiner column norm
    user_rates: np.ndarray      # (K,) bit/s
    group_rates: np.ndarray     # (H,) min over members
    sum_rate: float
    noise_w: float

    def interference_ratio(self) -> np.ndarray:
        """max(I, J) relative to desired signal power, per stream."""
        sig = np.where(self.signal > 0.0, self.signal, np.inf)
        return np.maximum(self.intra, self.inter) / sig


def _group_of(groups, user_k: int) -> int:
    for h, members in enumerate(groups):
        if user_k in members:
            return h
    raise ValueError(f"user {user_k} not in any group")


def _stream_terms(gains_k: np.ndarray, group_h: int, zeta: int, n_groups: int):
    """Split the per-user gain matrix (zeta x H*zeta) into signal/I/J powers.

    Interference sums run over the explicit off-diagonal entries (not
    total-minus-diagonal, which cancels interference 1e16x below the signal).
    """
    power = np.abs(gains_k) ** 2
    own = power[:, group_h * zeta:(group_h + 1) * zeta]
    signal = np.diagonal(own).copy()
    off = own.copy()
    np.fill_diagonal(off, 0.0)
    intra = off.sum(axis=1)
    other = np.ones(power.shape[1], dtype=bool)
    other[group_h * zeta:(group_h + 1) * zeta] = False
    inter = power[:, other].sum(axis=1)
    return signal, intra, inter


def stream_sinr(bf: BeamformerSet, chset: ChannelSet, nu: np.ndarray,
                cfg: SystemConfig, user_k: int, group_h: int, stream_i: int,
                groups=None) -> tuple[float, float, float]:
    """SINR of one stream of one user, with its I (own) and J (other-group) terms."""
    groups = cfg.groups() if groups is None else groups
    if not 0 <= group_h < len(groups) or user_k not in groups[group_h]:
        raise ValueError(f"user {user_k} is not in group {group_h}")
    if not 0 <= stream_i < cfg.zeta:
        raise ValueError(f"stream index {stream_i} out of range")
    h_eff = effective_channels(chset, nu, cfg)
    gains = bf.combiner(user_k).conj().T @ h_eff[user_k] @ bf.tx_matrix()
    signal, intra, inter = _stream_terms(gains, group_h, cfg.zeta, len(groups))
    s, i_term, j_term = signal[stream_i], intra[stream_i], inter[stream_i]
    return s / (i_term + j_term + cfg.noise_w), i_term, j_term


def user_rate(sinrs: np.ndarray, bw_hz: float) -> float:
    """Shannon rate summed over streams: W * sum_i log2(1 + xi_i)."""
    return float(bw_hz * np.sum(np.log2(1.0 + np.asarray(sinrs))))


def sum_rate(bf: BeamformerSet, chset: ChannelSet, nu: np.ndarray,
             cfg: SystemConfig, groups=None) -> RateReport:
    """Evaluate the full multicast objective: sum over groups of min member rate."""
    groups = cfg.groups() if groups is None else groups
    validate_groups(groups, cfg.k_users)
    h_eff = effective_channels(chset, nu, cfg)
    tx = bf.tx_matrix()
    k_users, zeta = cfg.k_users, cfg.zeta
    sig = np.zeros((k_users, zeta))
    intra = np.zeros((k_users, zeta))
    inter = np.zeros((k_users, zeta))
    colored = np.zeros((k_users, zeta))
    for h, members in enumerate(groups):
        for k in members:
            w = bf.combiner(k)
            gains = w.conj().T @ h_eff[k] @ tx
            s, i_t, j_t = _stream_terms(gains, h, zeta, len(groups))
            sig[k], intra[k], inter[k] = s, i_t, j_t
            w_norms = np.sum(np.abs(w) ** 2, axis=0)
            colored[k] = s / (i_t + j_t + cfg.noise_w * w_norms)
    sinr = sig / (intra + inter + cfg.noise_w)
    rates = np.array([user_rate(sinr[k], cfg.bw_hz) for k in range(k_users)])
    group_rates = np.array([min(rates[k] for k in members) for members in groups])
    return RateReport(sinr=sinr, signal=sig, intra=intra, inter=inter,
                      sinr_colored=colored, user_rates=rates,
                      group_rates=group_rates, sum_rate=float(group_rates.sum()),
                      noise_w=cfg.noise_w)


@dataclass
class ConstraintReport:
    """Deviations from the problem constraints; purely diagnostic."""

    rf_modulus_dev: float       # max | |entry| - 1 | over RF matrices (hybrid only)
    power_ratio: float          # ||tx||_F^2 / P
    phase_modulus_dev: float    # max | |nu_m| - 1 |, 0 if no nu given

    def ok(self, rf_tol: float = 1e-9, power_tol: float = 1e-6,
           phase_tol: float = 1e-12) -> bool:
        return (self.rf_modulus_dev <= rf_tol
                and self.power_ratio <= 1.0 + power_tol
                and self.phase_modulus_dev <= phase_tol)


def check_constraints(bf: BeamformerSet, cfg: SystemConfig,
                      nu: np.ndarray | None = None) -> ConstraintReport:
    rf_dev = 0.0
    if bf.mode == "hybrid":
        devs = [np.max(np.abs(np.abs(bf.f_rf) - 1.0))]
        devs += [np.max(np.abs(np.abs(w) - 1.0)) for w in bf.w_rf]
        rf_dev = float(max(devs))
    power_ratio = float(np.linalg.norm(bf.tx_matrix(), "fro") ** 2 / cfg.power_w)
    phase_dev = 0.0
    if nu is not None:
        phase_dev = float(np.max(np.abs(np.abs(nu) - 1.0)))
    return ConstraintReport(rf_modulus_dev=rf_dev, power_ratio=power_ratio,
                            phase_modulus_dev=phase_dev)
