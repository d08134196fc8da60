"""Cascaded-channel error metrics, identifiability checks and the Monte Carlo engine."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ShapeMismatch, ZeroTruth
from .estimators import AlsConfig, baseline_uncoupled, cals, ckraft
from .protocol import (
    ChannelSet,
    NoiseModel,
    SystemDims,
    gen_channels,
    gen_training,
    run_protocol,
    snr_to_sigma2,
)

__all__ = [
    "COMPONENTS",
    "ESTIMATORS",
    "CascadeSet",
    "Verdict",
    "IdentifiabilityVerdict",
    "NmseReport",
    "cascade",
    "nmse",
    "check_identifiability",
    "check_all",
    "run_estimator",
    "run_monte_carlo",
    "report_rows",
    "write_csv",
    "CSV_COLUMNS",
]

COMPONENTS = ("p1", "p2", "p3")
ESTIMATORS = ("ckraft", "cals_random", "cals_ckraft_init", "baseline_uncoupled")
CSV_COLUMNS = ("estimator", "snr_db", "component", "statistic", "value", "trials", "failures")


@dataclass
class CascadeSet:
    p1: np.ndarray  # H1 G1
    p2: np.ndarray  # H2 G2
    p3: np.ndarray  # H2 T G1


def cascade(ch: ChannelSet) -> CascadeSet:
    """Effective BS-from-UE channels of the three links."""
    try:
        return CascadeSet(p1=ch.h1 @ ch.g1, p2=ch.h2 @ ch.g2, p3=ch.h2 @ ch.t @ ch.g1)
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from exc


def _sq_err(est: CascadeSet, truth: CascadeSet) -> tuple[np.ndarray, np.ndarray]:
    num = np.empty(3)
    den = np.empty(3)
    for k, name in enumerate(COMPONENTS):
        a, b = getattr(est, name), getattr(truth, name)
        if a.shape != b.shape:
            raise ShapeMismatch(f"{name}: {a.shape} vs {b.shape}")
        num[k] = np.linalg.norm(a - b) ** 2
        den[k] = np.linalg.norm(b) ** 2
    return num, den


def nmse(est: CascadeSet, truth: CascadeSet) -> tuple[float, float, float]:
    """Per-component ``||P_hat - P||_F^2 / ||P||_F^2``."""
    num, den = _sq_err(est, truth)
    if np.any(den == 0):
        raise ZeroTruth("true cascaded channel is zero")
    return tuple(float(x) for x in num / den)


# -- identifiability ---------------------------------------------------------


@dataclass
class Verdict:
    satisfied: bool
    failed: list[str] = field(default_factory=list)


@dataclass
class IdentifiabilityVerdict:
    dims: SystemDims
    verdicts: dict[str, Verdict]

    def __getitem__(self, estimator: str) -> Verdict:
        return self.verdicts[estimator]


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _conditions(d: SystemDims, estimator: str) -> list[tuple[str, bool]]:
    i, j, k = d.i_frames, d.j_frames, d.k_pilots
    common = [
        ("K >= M_UE", k >= d.m_ue),
        ("I >= 2", i >= 2),
        ("J >= 2", j >= 2),
        ("I >= ceil(M_S1/M_UE)", i >= _ceil_div(d.m_s1, d.m_ue)),
        ("J >= ceil(M_S2/M_BS)", j >= _ceil_div(d.m_s2, d.m_bs)),
    ]
    if estimator == "ckraft":
        return common + [("I >= M_S1", i >= d.m_s1), ("J >= M_S2", j >= d.m_s2)]
    if estimator == "cals":
        return common + [
            ("I >= ceil(M_S1/((J+1)M_BS))", i >= _ceil_div(d.m_s1, (j + 1) * d.m_bs)),
            ("J >= ceil(M_S2/((I+1)M_UE))", j >= _ceil_div(d.m_s2, (i + 1) * d.m_ue)),
        ]
    if estimator == "baseline_uncoupled":
        return common + [
            ("I >= ceil(M_S1/M_BS)", i >= _ceil_div(d.m_s1, d.m_bs)),
            ("J >= ceil(M_S2/M_UE)", j >= _ceil_div(d.m_s2, d.m_ue)),
        ]
    raise ValueError(f"unknown estimator family {estimator!r}")


_FAMILY = {
    "ckraft": "ckraft",
    "cals": "cals",
    "cals_random": "cals",
    "cals_ckraft_init": "cals",
    "baseline_uncoupled": "baseline_uncoupled",
}


def check_identifiability(dims: SystemDims, estimator: str) -> Verdict:
    """Evaluate the LS identifiability inequalities of one estimator.

    ``dims`` may be any object with the :class:`SystemDims` attributes, so that
    settings violating the structural ``I, J >= 2`` requirement can be checked.
    """
    conds = _conditions(dims, _FAMILY[estimator])
    failed = [name for name, ok in conds if not ok]
    return Verdict(satisfied=not failed, failed=failed)


def check_all(dims: SystemDims) -> IdentifiabilityVerdict:
    return IdentifiabilityVerdict(
        dims, {name: check_identifiability(dims, name) for name in ("ckraft", "cals", "baseline_uncoupled")}
    )


# -- Monte Carlo -------------------------------------------------------------


def run_estimator(name: str, bundle, tr, dims: SystemDims, als: AlsConfig, rng) -> ChannelSet:
    """Dispatch one of :data:`ESTIMATORS`; ``rng`` seeds random initializations."""
    if name == "ckraft":
        return ckraft(bundle, tr, dims)
    cfg = AlsConfig(t_max=als.t_max, rel_change_tol=als.rel_change_tol, seed=rng)
    if name == "cals_random":
        cfg.init = "random"
        return cals(bundle, tr, dims, cfg)[0]
    if name == "cals_ckraft_init":
        cfg.init = "ckraft"
        return cals(bundle, tr, dims, cfg)[0]
    if name == "baseline_uncoupled":
        return baseline_uncoupled(bundle, tr, dims, cfg)[0]
    raise ValueError(f"unknown estimator {name!r}; choose from {ESTIMATORS}")


@dataclass
class NmseReport:
    """NMSE samples of one estimator over an SNR grid.

    ``num`` and ``den`` hold per-trial squared errors and true energies with
    shape (n_snr, trials, 3); failed trials are NaN and excluded.
    """

    estimator: str
    dims: SystemDims
    snr_db: list[float]
    trials: int
    seed: int
    num: np.ndarray
    den: np.ndarray
    failures: list[int]

    @property
    def samples(self) -> np.ndarray:
        return self.num / self.den

    def median(self) -> np.ndarray:
        """Median of per-trial NMSE, shape (n_snr, 3)."""
        return np.nanmedian(self.samples, axis=1)

    def mean(self) -> np.ndarray:
        """Ratio of summed squared errors to summed energies, shape (n_snr, 3)."""
        ok = ~np.isnan(self.num)
        num = np.where(ok, self.num, 0.0).sum(axis=1)
        den = np.where(ok, self.den, 0.0).sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return num / den

    def metadata(self) -> dict:
        return {
            "estimator": self.estimator,
            "dims": asdict(self.dims),
            "snr_db": list(self.snr_db),
            "trials": self.trials,
            "seed": self.seed,
            "failures": list(self.failures),
        }


def trial_rng(seed: int, snr_index: int, trial_index: int) -> np.random.Generator:
    """Independent generator for one (SNR point, trial) pair."""
    return np.random.default_rng(np.random.SeedSequence([seed, snr_index, trial_index]))


def run_monte_carlo(
    dims: SystemDims,
    snr_grid_db: Sequence[float],
    trials: int,
    estimator: str,
    cfg: AlsConfig | None = None,
    seed: int = 0,
    progress: Callable[[int, int], None] | None = None,
) -> NmseReport:
    """Simulate ``trials`` independent channel/noise draws per SNR point.

    Every trial draws its channels, noise and random initial point from
    :func:`trial_rng` so that results do not depend on estimator choice or run
    order; different estimators with the same seed see identical data.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")
    cfg = cfg or AlsConfig()
    tr = gen_training(dims)
    snr_grid_db = [float(s) for s in snr_grid_db]
    shape = (len(snr_grid_db), trials, 3)
    num = np.full(shape, np.nan)
    den = np.full(shape, np.nan)
    failures = [0] * len(snr_grid_db)
    for s, snr in enumerate(snr_grid_db):
        noise = NoiseModel(snr_to_sigma2(snr))
        for t in range(trials):
            rng = trial_rng(seed, s, t)
            ch = gen_channels(dims, rng)
            bundle = run_protocol(ch, tr, noise, rng)
            init_rng = np.random.default_rng(rng.integers(2**63))
            try:
                est = run_estimator(estimator, bundle, tr, dims, cfg, init_rng)
                e, d = _sq_err(cascade(est), cascade(ch))
            except np.linalg.LinAlgError:
                failures[s] += 1
                continue
            if not np.all(np.isfinite(e)):
                failures[s] += 1
                continue
            num[s, t] = e
            den[s, t] = d
            if progress is not None:
                progress(s * trials + t + 1, len(snr_grid_db) * trials)
    return NmseReport(estimator, dims, snr_grid_db, trials, seed, num, den, failures)


def report_rows(reports: Iterable[NmseReport]) -> list[dict]:
    """Flatten reports into CSV rows (one per estimator/SNR/component/statistic)."""
    rows = []
    for rep in reports:
        med, mean = rep.median(), rep.mean()
        for s, snr in enumerate(rep.snr_db):
            for k, comp in enumerate(COMPONENTS):
                for stat, values in (("median", med), ("mean", mean)):
                    rows.append(
                        {
                            "estimator": rep.estimator,
                            "snr_db": snr,
                            "component": comp,
                            "statistic": stat,
                            "value": float(values[s, k]),
                            "trials": rep.trials,
                            "failures": rep.failures[s],
                        }
                    )
    return rows


def write_csv(reports: Iterable[NmseReport], stream: io.TextIOBase | None = None) -> str:
    """Serialize reports as CSV with :data:`CSV_COLUMNS`; returns the text."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in report_rows(reports):
        row = dict(row, value=repr(row["value"]), snr_db=repr(row["snr_db"]))
        writer.writerow(row)
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def nmse_db(x) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))

