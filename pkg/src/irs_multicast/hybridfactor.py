"""Factor fully digital beamformers into constant-modulus RF and baseband parts.

Alternates Riemannian descent on the vectorized RF matrix (the complex circle
manifold, reusing the phase-optimizer's tangent projection and retraction)
with the least-squares baseband update ``F_B = pinv(F_R) B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import matrixkit as mk
from .phaseopt import retract, tangent_project

__all__ = [
    "FactorSettings",
    "FactorResult",
    "vectorize",
    "devectorize",
    "solve_baseband",
    "rf_objective_grad",
    "factor",
    "factor_receive",
    "normalize_power",
]


def vectorize(m: np.ndarray) -> np.ndarray:
    """Column-major flattening; exact inverse of :func:`devectorize`."""
    return np.asarray(m, dtype=np.complex128).ravel(order="F").copy()


def devectorize(x: np.ndarray, rows: int, cols: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    if x.size != rows * cols:
        raise ValueError(f"length {x.size} does not match {rows}x{cols}")
    return x.reshape((rows, cols), order="F").copy()


def solve_baseband(f_rf: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Frobenius-optimal baseband for fixed RF: ``pinv(F_R) @ B``."""
    return mk.pseudo_inverse(f_rf) @ b


def rf_objective_grad(x_mat: np.ndarray, f_bb: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Wirtinger gradient (2 d/dX*) of ``||B - X F_B||_F^2`` in matrix form."""
    return -2.0 * (b - x_mat @ f_bb) @ f_bb.conj().T


@dataclass(frozen=True)
class FactorSettings:
    max_alternations: int = 100
    tol: float = 1e-6           # stop on relative residual change below this
    floor: float = 1e-9         # stop outright once the relative residual is this small
    inner_steps: int = 60
    inner_rel_drop: float = 1e-11
    initial_step: float = 1.0
    shrink: float = 0.5
    armijo_c: float = 1e-4
    max_backtracks: int = 60
    init_mode: str = "auto"     # "auto": two-phase split when chains allow; "phase_copy"


@dataclass
class FactorResult:
    f_rf: np.ndarray
    f_bb: np.ndarray
    residuals: list[float] = field(default_factory=list)
    alternations: int = 0

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else math.inf


def _phase_copy_init(b: np.ndarray, n_rf: int, rng: np.random.Generator) -> np.ndarray:
    """Phase-copy warm start from B's leading columns; random phases fill gaps."""
    n, cols = b.shape
    x = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, (n, n_rf)))
    take = min(cols, n_rf)
    lead = b[:, :take]
    nz = np.abs(lead) > 0.0
    x[:, :take][nz] = lead[nz] / np.abs(lead[nz])
    return x


def _two_phase_split_init(b: np.ndarray, n_rf: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Exact warm start when ``n_rf >= 2 * cols``.

    Every complex entry v with |v| <= 2c splits as c(e^{j(a+t)} + e^{j(a-t)})
    with a = arg v and t = arccos(|v| / 2c), so a pair of constant-modulus
    columns reproduces each target column exactly; the least-squares baseband
    recovers the pairing, leaving only rounding in the starting residual.
    """
    n, cols = b.shape
    x = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, (n, n_rf)))
    for i in range(cols):
        col = b[:, i]
        peak = float(np.max(np.abs(col)))
        if peak == 0.0:
            continue
        c = peak / 2.0
        ang = np.angle(col)
        t = np.arccos(np.clip(np.abs(col) / (2.0 * c), 0.0, 1.0))
        x[:, i] = np.exp(1j * (ang + t))
        x[:, cols + i] = np.exp(1j * (ang - t))
    return x


def _init_rf(b: np.ndarray, n_rf: int, rng: np.random.Generator,
             init_mode: str) -> np.ndarray:
    if init_mode not in ("auto", "phase_copy"):
        raise ValueError(f"unknown init mode {init_mode!r}")
    if init_mode == "auto" and n_rf >= 2 * b.shape[1]:
        return _two_phase_split_init(b, n_rf, rng)
    return _phase_copy_init(b, n_rf, rng)


def _rf_descent(x: np.ndarray, f_bb: np.ndarray, b: np.ndarray,
                st: FactorSettings) -> np.ndarray:
    """Armijo-safeguarded manifold descent on the RF entries, F_B fixed.

    Trial steps use the Barzilai-Borwein spectral length from the previous
    accepted pair; plain steepest descent stalls well above the factorable
    floor on these strongly coupled blocks.
    """
    scale = max(float(np.linalg.norm(b, "fro") ** 2), 1e-300)

    def q(xm):
        return float(np.linalg.norm(b - xm @ f_bb, "fro") ** 2) / scale

    q_cur = q(x)
    x_prev = grad_prev = None
    step_trial = st.initial_step
    for _ in range(st.inner_steps):
        grad = rf_objective_grad(x, f_bb, b) / scale
        rgrad = tangent_project(grad, x)
        gnorm_sq = float(np.sum(np.abs(rgrad) ** 2))
        if gnorm_sq < 1e-30:
            break
        if x_prev is not None:
            s = x - x_prev
            y = rgrad - grad_prev
            denom = abs(float(np.sum(np.real(s * np.conj(y)))))
            if denom > 1e-300:
                step_trial = float(np.sum(np.abs(s) ** 2)) / denom
        step = step_trial
        accepted = False
        for _ in range(st.max_backtracks + 1):
            cand = retract(x - step * rgrad)
            q_cand = q(cand)
            if q_cand <= q_cur - st.armijo_c * step * gnorm_sq:
                accepted = True
                break
            step *= st.shrink
        if not accepted:
            break
        x_prev, grad_prev = x, rgrad
        drop = q_cur - q_cand
        x, q_cur = cand, q_cand
        if drop < st.inner_rel_drop * max(q_cur, 1e-300):
            break
    return x


def factor(b: np.ndarray, n_rf: int, settings: FactorSettings | None = None,
           rng: np.random.Generator | None = None) -> FactorResult:
    """Alternating constant-modulus factorization ``B ~ F_R F_B``.

    The relative-residual trace is non-increasing: the manifold steps are
    Armijo-guarded and the baseband update is the exact least squares.
    """
    st = settings or FactorSettings()
    rng = rng or np.random.default_rng(0)
    b = np.asarray(b, dtype=np.complex128)
    if b.ndim != 2 or b.size == 0:
        raise ValueError("empty target matrix")
    if n_rf < 1:
        raise ValueError("need at least one RF chain")
    b_norm = float(np.linalg.norm(b, "fro"))
    if b_norm == 0.0:
        raise ValueError("zero target matrix")
    x = _init_rf(b, n_rf, rng, st.init_mode)
    f_bb = solve_baseband(x, b)
    residuals = [float(np.linalg.norm(b - x @ f_bb, "fro")) / b_norm]
    alternations = 0
    if residuals[0] > st.floor:
        for alternations in range(1, st.max_alternations + 1):
            x_new = _rf_descent(x, f_bb, b, st)
            f_new = solve_baseband(x_new, b)
            res = float(np.linalg.norm(b - x_new @ f_new, "fro")) / b_norm
            prev = residuals[-1]
            if res > prev:
                # Rounding plateau: keep the incumbent rather than log an uptick.
                alternations -= 1
                break
            x, f_bb = x_new, f_new
            residuals.append(res)
            if res <= st.floor or prev - res <= st.tol * max(prev, 1e-300):
                break
    return FactorResult(f_rf=x, f_bb=f_bb, residuals=residuals,
                        alternations=alternations)


def factor_receive(j_k: np.ndarray, m_ue: int,
                   settings: FactorSettings | None = None,
                   rng: np.random.Generator | None = None) -> FactorResult:
    """Same scheme for the receive side; no power constraint applies there."""
    return factor(j_k, m_ue, settings=settings, rng=rng)


def normalize_power(f_rf: np.ndarray, f_bb: np.ndarray, p_watts: float) -> np.ndarray:
    """Scale the baseband so ``||F_R F_B||_F^2`` meets the power budget exactly."""
    norm = float(np.linalg.norm(f_rf @ f_bb, "fro"))
    if norm == 0.0:
        raise ValueError("zero composed beamformer cannot be power-normalized")
    return (math.sqrt(p_watts) / norm) * f_bb
