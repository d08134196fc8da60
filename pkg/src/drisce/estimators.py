"""Channel estimators: closed-form C-KRAFT, coupled ALS and an uncoupled ALS baseline.

All estimators return a :class:`~drisce.protocol.ChannelSet` of estimates. Factor
estimates carry the usual per-column scaling ambiguities of CP models; only the
cascaded products ``H1 G1``, ``H2 G2`` and ``H2 T G1`` are meaningful.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import IdentifiabilityWarning, RankDeficientWarning
from .factorization import krf, ls_solve_right, pinv
from .protocol import ChannelSet, MeasurementBundle, SystemDims, TrainingDesign, crandn
from .tensor import cp3, khatri_rao, unfold, vstack

__all__ = [
    "EstimateSet",
    "AlsConfig",
    "AlsTrace",
    "build_sigma1",
    "build_sigma2",
    "estimate_t",
    "ckraft",
    "cals",
    "baseline_uncoupled",
    "coupled_residuals",
]

EstimateSet = ChannelSet


@dataclass
class AlsConfig:
    t_max: int = 10
    init: Literal["ckraft", "random"] = "random"
    rel_change_tol: float = 1e-12
    seed: int | np.random.Generator | None = None

    def __post_init__(self):
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.rel_change_tol < 0:
            raise ValueError("rel_change_tol must be >= 0")
        if self.init not in ("ckraft", "random"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class AlsTrace:
    """Per-iteration Frobenius reconstruction residuals.

    For the coupled ALS ``residual_1`` / ``residual_2`` are the fits of the two
    coupled tensors; for the uncoupled baseline they are the fits of the two
    single-reflection tensors. ``objective`` is the total squared misfit over the
    RIS-1, RIS-2 and double-reflection measurements.
    """

    residual_1: list[float] = field(default_factory=list)
    residual_2: list[float] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    iterations_run: int = 0
    diverged: bool = False


def build_sigma1(h1, h2, t, theta2) -> np.ndarray:
    """Stack ``[H1; (Theta2 kr H2) T]``, shape (J+1)M_BS x M_S1."""
    return vstack([h1, khatri_rao(theta2, h2) @ t])


def build_sigma2(g2, g1, t, theta1) -> np.ndarray:
    """Stack ``[G2^T; (Theta1 kr G1^T) T^T]``, shape (I+1)M_UE x M_S2."""
    return vstack([np.asarray(g2).T, khatri_rao(theta1, np.asarray(g1).T) @ np.asarray(t).T])


def estimate_t(y3_gen, g1_hat, h2_hat, tr: TrainingDesign) -> np.ndarray:
    """Bilinear LS estimate of the RIS-to-RIS channel, shape M_S2 x M_S1.

    Inverts ``y3_gen = (Theta2 kr H2) T (Theta1 kr G1^T)^T`` from both sides.
    """
    left = khatri_rao(tr.theta2, h2_hat)
    right = khatri_rao(tr.theta1, np.asarray(g1_hat).T)
    lp, rank_l = pinv(left, return_rank=True)
    rp, rank_r = pinv(right.T, return_rank=True)
    if rank_l < left.shape[1] or rank_r < right.shape[1]:
        warnings.warn(
            f"bilinear T filter is rank deficient (ranks {rank_l}/{left.shape[1]}, "
            f"{rank_r}/{right.shape[1]})",
            RankDeficientWarning,
            stacklevel=2,
        )
    return lp @ y3_gen @ rp


def _dims_of(bundle: MeasurementBundle, tr: TrainingDesign) -> tuple[int, int, int, int]:
    m_bs, m_ue, _ = bundle.y_ris1.shape
    return m_bs, m_ue, tr.theta1.shape[1], tr.theta2.shape[1]


def ckraft(bundle: MeasurementBundle, tr: TrainingDesign, dims: SystemDims | None = None) -> ChannelSet:
    """Closed-form coupled Khatri-Rao factorization estimator.

    Requires ``I >= M_S1`` and ``J >= M_S2`` so that the RIS training matrices
    have orthonormal columns; otherwise an :class:`IdentifiabilityWarning` is
    issued and the (biased) estimate is still returned.
    """
    m_bs, m_ue, m_s1, m_s2 = _dims_of(bundle, tr)
    n_i, n_j = tr.theta1.shape[0], tr.theta2.shape[0]
    if n_i < m_s1 or n_j < m_s2:
        warnings.warn(
            f"C-KRAFT needs I >= M_S1 and J >= M_S2 (I={n_i}, M_S1={m_s1}, J={n_j}, M_S2={m_s2})",
            IdentifiabilityWarning,
            stacklevel=2,
        )
    # left-filtered mode-3 unfoldings: Theta^H [Y]_(3) = (Sigma kr F)^T
    f1 = (tr.theta1.conj().T @ unfold(bundle.y1c, 3)).T
    f2 = (tr.theta2.conj().T @ unfold(bundle.y2c, 3)).T
    fit1 = krf(f1, (n_j + 1) * m_bs, m_ue)     # Sigma1, G1^T
    fit2 = krf(f2, (n_i + 1) * m_ue, m_bs)     # Sigma2, H2
    g1 = fit1.b.T
    h1 = fit1.a[:m_bs]
    h2 = fit2.b
    g2 = fit2.a[:m_ue].T
    t = estimate_t(bundle.y3_gen, g1, h2, tr)
    return ChannelSet(g1=g1, g2=g2, h1=h1, h2=h2, t=t)


def _fro2(a) -> float:
    return float(np.vdot(a, a).real)


def coupled_residuals(bundle: MeasurementBundle, tr: TrainingDesign, est: ChannelSet):
    """Return ``(||Y1 - fit||, ||Y2 - fit||, objective)`` for an estimate set.

    ``objective`` is the summed squared misfit of the RIS-1, RIS-2 and
    double-reflection measurements, the quantity every ALS update decreases.
    """
    sigma1 = build_sigma1(est.h1, est.h2, est.t, tr.theta2)
    sigma2 = build_sigma2(est.g2, est.g1, est.t, tr.theta1)
    r1 = np.linalg.norm(bundle.y1c - cp3(est.g1.T, sigma1, tr.theta1))
    r2 = np.linalg.norm(bundle.y2c - cp3(est.h2, sigma2, tr.theta2))
    obj = (
        _fro2(bundle.y_ris1 - cp3(est.h1, est.g1.T, tr.theta1))
        + _fro2(bundle.y_ris2 - cp3(est.h2, est.g2.T, tr.theta2))
        + _fro2(bundle.y3_gen - khatri_rao(tr.theta2, est.h2) @ est.t
                @ khatri_rao(tr.theta1, est.g1.T).T)
    )
    return float(r1), float(r2), obj


def _roundoff_floor(*arrays) -> float:
    energy = sum(_fro2(a) for a in arrays)
    return (1e3 * np.finfo(float).eps) ** 2 * energy


def _random_start(rng, m_bs, m_ue, m_s1, m_s2) -> ChannelSet:
    return ChannelSet(
        g1=np.zeros((m_s1, m_ue), dtype=np.complex128),
        g2=crandn(rng, (m_s2, m_ue)),
        h1=crandn(rng, (m_bs, m_s1)),
        h2=crandn(rng, (m_bs, m_s2)),
        t=crandn(rng, (m_s2, m_s1)),
    )


def _stalled(trace: AlsTrace, tol: float, floor: float) -> bool:
    if trace.objective and trace.objective[-1] <= floor:
        return True
    if len(trace.residual_1) < 2:
        return False
    for seq in (trace.residual_1, trace.residual_2):
        prev, cur = seq[-2], seq[-1]
        if abs(prev - cur) > tol * max(prev, np.finfo(float).tiny):
            return False
    return True


def _record(trace: AlsTrace, r1: float, r2: float, obj: float, floor: float) -> None:
    # increases below ``floor`` are round-off, not divergence
    if trace.objective and obj > trace.objective[-1] * (1 + 1e-6) + floor:
        trace.diverged = True
    trace.residual_1.append(r1)
    trace.residual_2.append(r2)
    trace.objective.append(obj)
    trace.iterations_run += 1


def cals(
    bundle: MeasurementBundle,
    tr: TrainingDesign,
    dims: SystemDims | None = None,
    cfg: AlsConfig | None = None,
) -> tuple[ChannelSet, AlsTrace]:
    """Coupled alternating least squares.

    Each sweep updates ``G1`` (coupled tensor 1), ``H1`` (RIS-1 tensor), ``H2``
    (coupled tensor 2), ``G2`` (RIS-2 tensor) and finally ``T`` (bilinear
    filter), always using the most recent iterates. Every update is an exact LS
    minimizer of the total misfit in :func:`coupled_residuals`, so that
    objective never increases.
    """
    cfg = cfg or AlsConfig()
    m_bs, m_ue, m_s1, m_s2 = _dims_of(bundle, tr)
    if cfg.init == "ckraft":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IdentifiabilityWarning)
            est = ckraft(bundle, tr)
    else:
        est = _random_start(np.random.default_rng(cfg.seed), m_bs, m_ue, m_s1, m_s2)
    g1, g2, h1, h2, t = est.g1, est.g2, est.h1, est.h2, est.t

    th1, th2 = tr.theta1, tr.theta2
    y1_1 = unfold(bundle.y1c, 1)
    y2_1 = unfold(bundle.y2c, 1)
    yr1_1 = unfold(bundle.y_ris1, 1)
    yr2_2 = unfold(bundle.y_ris2, 2)

    floor = _roundoff_floor(bundle.y_ris1, bundle.y_ris2, bundle.y3_gen)
    trace = AlsTrace()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficientWarning)
        for _ in range(cfg.t_max):
            sigma1 = build_sigma1(h1, h2, t, th2)
            g1 = ls_solve_right(y1_1, khatri_rao(th1, sigma1).T).T
            h1 = ls_solve_right(yr1_1, khatri_rao(th1, g1.T).T)
            sigma2 = build_sigma2(g2, g1, t, th1)
            h2 = ls_solve_right(y2_1, khatri_rao(th2, sigma2).T)
            g2 = ls_solve_right(yr2_2, khatri_rao(th2, h2).T).T
            t = estimate_t(bundle.y3_gen, g1, h2, tr)
            est = ChannelSet(g1=g1, g2=g2, h1=h1, h2=h2, t=t)
            _record(trace, *coupled_residuals(bundle, tr, est), floor)
            if _stalled(trace, cfg.rel_change_tol, floor):
                break
    return est, trace


def baseline_uncoupled(
    bundle: MeasurementBundle,
    tr: TrainingDesign,
    dims: SystemDims | None = None,
    cfg: AlsConfig | None = None,
) -> tuple[ChannelSet, AlsTrace]:
    """Per-link ALS ignoring the coupling with the double-reflection tensor.

    ``(H1, G1)`` are fitted to the RIS-1 tensor alone, ``(H2, G2)`` to the RIS-2
    tensor alone, then ``T`` is obtained by bilinear filtering. The trace records
    the residuals of the two single-reflection tensors. ``cfg.init`` is ignored;
    the starting ``H1`` and ``H2`` are always random.
    """
    cfg = cfg or AlsConfig()
    m_bs, m_ue, m_s1, m_s2 = _dims_of(bundle, tr)
    rng = np.random.default_rng(cfg.seed)
    h1 = crandn(rng, (m_bs, m_s1))
    h2 = crandn(rng, (m_bs, m_s2))
    th1, th2 = tr.theta1, tr.theta2
    yr1_1, yr1_2 = unfold(bundle.y_ris1, 1), unfold(bundle.y_ris1, 2)
    yr2_1, yr2_2 = unfold(bundle.y_ris2, 1), unfold(bundle.y_ris2, 2)

    floor = _roundoff_floor(bundle.y_ris1, bundle.y_ris2)
    trace = AlsTrace()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficientWarning)
        for _ in range(cfg.t_max):
            g1 = ls_solve_right(yr1_2, khatri_rao(th1, h1).T).T
            h1 = ls_solve_right(yr1_1, khatri_rao(th1, g1.T).T)
            g2 = ls_solve_right(yr2_2, khatri_rao(th2, h2).T).T
            h2 = ls_solve_right(yr2_1, khatri_rao(th2, g2.T).T)
            r1 = np.linalg.norm(bundle.y_ris1 - cp3(h1, g1.T, th1))
            r2 = np.linalg.norm(bundle.y_ris2 - cp3(h2, g2.T, th2))
            _record(trace, float(r1), float(r2), float(r1**2 + r2**2), floor)
            if _stalled(trace, cfg.rel_change_tol, floor):
                break
    t = estimate_t(bundle.y3_gen, g1, h2, tr)
    return ChannelSet(g1=g1, g2=g2, h1=h1, h2=h2, t=t), trace
