"""Channels, training design and the three-stage two-state training protocol.

A measurement is taken for every RIS-1 beam ``i`` and RIS-2 beam ``j`` with each
surface either in state 0 (beam ``theta``) or state 1 (beam ``-theta``). Summing
the right-filtered measurements of suitable state pairs isolates one link:

* ``(0,0) + (0,1)`` keeps only the RIS-1 single-reflection link,
* ``(0,0) + (1,0)`` keeps only the RIS-2 single-reflection link,
* ``-(1,0) - (0,1)`` keeps only the double-reflection link.

Each combination carries a factor 2 which is removed before tensor assembly,
so the assembled tensors follow the CP models exactly in the noiseless case.
Indices ``i`` and ``j`` are zero-based throughout.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import DimError, IndexOutOfRange, ShapeMismatch
from .tensor import hstack

__all__ = [
    "SystemDims",
    "ChannelSet",
    "TrainingDesign",
    "NoiseModel",
    "MeasurementBundle",
    "crandn",
    "dft_matrix",
    "gen_channels",
    "gen_training",
    "raw_measurement",
    "run_protocol",
    "assemble_coupled_y1",
    "assemble_coupled_y2",
    "save_channels",
    "load_channels",
    "save_bundle",
    "load_bundle",
    "snr_to_sigma2",
]


@dataclass(frozen=True)
class SystemDims:
    m_bs: int
    m_ue: int
    m_s1: int
    m_s2: int
    i_frames: int
    j_frames: int
    k_pilots: int

    def __post_init__(self):
        for name, value in asdict(self).items():
            if int(value) != value or value < 1:
                raise DimError(f"{name} must be a positive integer, got {value!r}")
        if self.k_pilots < self.m_ue:
            raise DimError(f"K must be >= M_UE ({self.k_pilots} < {self.m_ue})")
        if self.i_frames < 2:
            raise DimError("I must be >= 2")
        if self.j_frames < 2:
            raise DimError("J must be >= 2")


@dataclass
class ChannelSet:
    """Ground-truth (or estimated) channel matrices.

    ``g1``: M_S1 x M_UE, ``g2``: M_S2 x M_UE, ``h1``: M_BS x M_S1,
    ``h2``: M_BS x M_S2, ``t``: M_S2 x M_S1 (RIS 1 to RIS 2).
    """

    g1: np.ndarray
    g2: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    t: np.ndarray

    def check(self, dims: SystemDims) -> None:
        expected = {
            "g1": (dims.m_s1, dims.m_ue),
            "g2": (dims.m_s2, dims.m_ue),
            "h1": (dims.m_bs, dims.m_s1),
            "h2": (dims.m_bs, dims.m_s2),
            "t": (dims.m_s2, dims.m_s1),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ShapeMismatch(f"{name} has shape {got}, expected {shape}")


@dataclass
class TrainingDesign:
    x: np.ndarray       # M_UE x K pilots, orthonormal rows
    theta1: np.ndarray  # I x M_S1, row i is the state-0 beam of RIS 1
    theta2: np.ndarray  # J x M_S2


@dataclass(frozen=True)
class NoiseModel:
    sigma2: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be >= 0")


@dataclass
class MeasurementBundle:
    y_ris1: np.ndarray  # M_BS x M_UE x I
    y_ris2: np.ndarray  # M_BS x M_UE x J
    y1c: np.ndarray     # M_UE x (J+1)M_BS x I
    y2c: np.ndarray     # M_BS x (I+1)M_UE x J
    y3_gen: np.ndarray  # J M_BS x I M_UE


def snr_to_sigma2(snr_db: float) -> float:
    return float(10.0 ** (-snr_db / 10.0))


def crandn(rng: np.random.Generator, shape, scale: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with variance ``scale**2``."""
    return scale * np.sqrt(0.5) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def dft_matrix(n: int) -> np.ndarray:
    """Unitary ``n``-point DFT matrix."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def gen_channels(dims: SystemDims, seed=None) -> ChannelSet:
    """Draw i.i.d. CN(0, 1) channels. ``seed`` may be an int or a Generator."""
    rng = np.random.default_rng(seed)
    return ChannelSet(
        g1=crandn(rng, (dims.m_s1, dims.m_ue)),
        g2=crandn(rng, (dims.m_s2, dims.m_ue)),
        h1=crandn(rng, (dims.m_bs, dims.m_s1)),
        h2=crandn(rng, (dims.m_bs, dims.m_s2)),
        t=crandn(rng, (dims.m_s2, dims.m_s1)),
    )


def _truncated_dft(frames: int, elements: int) -> np.ndarray:
    # orthonormal columns when frames >= elements, orthonormal rows otherwise
    if frames >= elements:
        return dft_matrix(frames)[:, :elements]
    return dft_matrix(elements)[:frames, :]


def gen_training(dims: SystemDims) -> TrainingDesign:
    if dims.k_pilots < dims.m_ue:
        raise DimError(f"K must be >= M_UE ({dims.k_pilots} < {dims.m_ue})")
    return TrainingDesign(
        x=dft_matrix(dims.k_pilots)[: dims.m_ue, :],
        theta1=_truncated_dft(dims.i_frames, dims.m_s1),
        theta2=_truncated_dft(dims.j_frames, dims.m_s2),
    )


def _sign(state: int) -> float:
    if state not in (0, 1):
        raise ValueError(f"beam state must be 0 or 1, got {state!r}")
    return 1.0 if state == 0 else -1.0


def raw_measurement(
    ch: ChannelSet,
    tr: TrainingDesign,
    i: int,
    j: int,
    s1: int,
    s2: int,
    noise: NoiseModel = NoiseModel(),
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Right-filtered M_BS x M_UE measurement for beams ``(i, j)`` in states ``(s1, s2)``.

    The noise is drawn as an M_BS x K matrix and right-filtered by ``X^H``.
    """
    n_i, n_j = tr.theta1.shape[0], tr.theta2.shape[0]
    if not (0 <= i < n_i and 0 <= j < n_j):
        raise IndexOutOfRange(f"beam pair ({i}, {j}) outside {n_i} x {n_j} grid")
    th1 = _sign(s1) * tr.theta1[i]
    th2 = _sign(s2) * tr.theta2[j]
    h2d = ch.h2 * th2
    d1g = th1[:, None] * ch.g1
    y = h2d @ ch.t @ d1g + ch.h1 @ d1g + h2d @ ch.g2
    if noise.sigma2 > 0:
        if rng is None:
            rng = np.random.default_rng(noise.seed)
        nbar = crandn(rng, (ch.h1.shape[0], tr.x.shape[1]), np.sqrt(noise.sigma2))
        y = y + nbar @ tr.x.conj().T
    return y


def _stage(ch, tr, s1, s2, noise, rng):
    """All ``(i, j)`` measurements of one state pair, shape (I, J, M_BS, M_UE)."""
    th1 = _sign(s1) * tr.theta1
    th2 = _sign(s2) * tr.theta2
    h2d = ch.h2[None, :, :] * th2[:, None, :]              # J x M_BS x M_S2
    d1g = th1[:, :, None] * ch.g1[None, :, :]              # I x M_S1 x M_UE
    double = np.einsum("jbs,st,itu->ijbu", h2d, ch.t, d1g, optimize=True)
    single1 = np.einsum("bt,itu->ibu", ch.h1, d1g)
    single2 = np.einsum("jbs,su->jbu", h2d, ch.g2)
    y = double + single1[:, None] + single2[None, :]
    if noise.sigma2 > 0:
        n_i, n_j = th1.shape[0], th2.shape[0]
        nbar = crandn(rng, (n_i, n_j, ch.h1.shape[0], tr.x.shape[1]), np.sqrt(noise.sigma2))
        y = y + nbar @ tr.x.conj().T
    return y


def run_protocol(
    ch: ChannelSet,
    tr: TrainingDesign,
    noise: NoiseModel = NoiseModel(),
    rng: np.random.Generator | None = None,
    average: bool = False,
) -> MeasurementBundle:
    """Run all three training stages and assemble the measurement tensors.

    Noise is drawn stage by stage in the order (0,0), (0,1), (1,0), each as one
    (I, J, M_BS, K) block, so the result is a deterministic function of the RNG
    state. With ``average=True`` the single-reflection measurements are averaged
    over the sweep of the other surface instead of taking its first beam.
    """
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    y00 = _stage(ch, tr, 0, 0, noise, rng)
    y01 = _stage(ch, tr, 0, 1, noise, rng)
    y10 = _stage(ch, tr, 1, 0, noise, rng)
    y_1 = 0.5 * (y00 + y01)     # RIS-1 link only
    y_2 = 0.5 * (y00 + y10)     # RIS-2 link only
    y_3 = -0.5 * (y10 + y01)    # double-reflection link only

    if average:
        ris1_slices = y_1.mean(axis=1)
        ris2_slices = y_2.mean(axis=0)
    else:
        ris1_slices = y_1[:, 0]
        ris2_slices = y_2[0, :]
    n_i, n_j, m_bs, m_ue = y_3.shape
    y3_gen = y_3.transpose(1, 2, 0, 3).reshape(n_j * m_bs, n_i * m_ue)
    return MeasurementBundle(
        y_ris1=np.moveaxis(ris1_slices, 0, 2),
        y_ris2=np.moveaxis(ris2_slices, 0, 2),
        y1c=assemble_coupled_y1(ris1_slices, y_3),
        y2c=assemble_coupled_y2(ris2_slices, y_3),
        y3_gen=y3_gen,
    )


def _check_blocks(slices, blocks, axis):
    slices = np.asarray(slices)
    blocks = np.asarray(blocks)
    if slices.ndim != 3 or blocks.ndim != 4:
        raise ShapeMismatch("expected (n, M_BS, M_UE) slices and (I, J, M_BS, M_UE) blocks")
    if blocks.shape[0] < 1 or blocks.shape[1] < 1:
        raise ShapeMismatch("double-reflection grid must be non-empty")
    if slices.shape != (blocks.shape[axis],) + blocks.shape[2:]:
        raise ShapeMismatch(
            f"slice stack {slices.shape} does not match block grid {blocks.shape}"
        )
    return slices, blocks


def assemble_coupled_y1(ris1_slices, double_blocks) -> np.ndarray:
    """Coupled tensor of shape M_UE x (J+1)M_BS x I sharing the factor G1^T.

    ``ris1_slices[i]`` is the RIS-1 single-reflection measurement for beam ``i``
    and ``double_blocks[i, j]`` the double-reflection measurement for ``(i, j)``.
    Frontal slice ``i`` is ``[ris1[i]^T, dbl[i,0]^T, ..., dbl[i,J-1]^T]``, which
    equals ``G1^T diag(theta1_i) Sigma1^T`` in the noiseless case.
    """
    slices, blocks = _check_blocks(ris1_slices, double_blocks, 0)
    n_i = blocks.shape[0]
    front = [hstack([slices[i].T] + [b.T for b in blocks[i]]) for i in range(n_i)]
    return np.stack(front, axis=2)


def assemble_coupled_y2(ris2_slices, double_blocks) -> np.ndarray:
    """Coupled tensor of shape M_BS x (I+1)M_UE x J sharing the factor H2.

    Frontal slice ``j`` is ``[ris2[j], dbl[0,j], ..., dbl[I-1,j]]``, which equals
    ``H2 diag(theta2_j) Sigma2^T`` in the noiseless case.
    """
    slices, blocks = _check_blocks(ris2_slices, double_blocks, 1)
    n_j = blocks.shape[1]
    front = [hstack([slices[j]] + list(blocks[:, j])) for j in range(n_j)]
    return np.stack(front, axis=2)


# -- persistence -------------------------------------------------------------

_CHANNEL_FIELDS = ("g1", "g2", "h1", "h2", "t")
_BUNDLE_FIELDS = ("y_ris1", "y_ris2", "y1c", "y2c", "y3_gen")


def _write_arrays(path, arrays: dict, manifest: dict) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for name, arr in arrays.items():
        np.save(path / f"{name}.npy", np.asarray(arr, dtype=np.complex128))
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _read_arrays(path, names) -> tuple[dict, dict]:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    return {n: np.load(path / f"{n}.npy") for n in names}, manifest


def save_channels(path, ch: ChannelSet, dims: SystemDims, seed=None) -> None:
    arrays = {n: getattr(ch, n) for n in _CHANNEL_FIELDS}
    _write_arrays(path, arrays, {"kind": "channels", "dims": asdict(dims), "seed": seed})


def load_channels(path) -> tuple[ChannelSet, SystemDims, dict]:
    arrays, manifest = _read_arrays(path, _CHANNEL_FIELDS)
    dims = SystemDims(**manifest["dims"])
    ch = ChannelSet(**arrays)
    ch.check(dims)
    return ch, dims, manifest


def save_bundle(path, bundle: MeasurementBundle, dims: SystemDims, noise: NoiseModel) -> None:
    arrays = {n: getattr(bundle, n) for n in _BUNDLE_FIELDS}
    manifest = {
        "kind": "measurements",
        "dims": asdict(dims),
        "sigma2": noise.sigma2,
        "seed": noise.seed,
    }
    _write_arrays(path, arrays, manifest)


def load_bundle(path) -> tuple[MeasurementBundle, SystemDims, NoiseModel]:
    arrays, manifest = _read_arrays(path, _BUNDLE_FIELDS)
    dims = SystemDims(**manifest["dims"])
    return MeasurementBundle(**arrays), dims, NoiseModel(manifest["sigma2"], manifest["seed"])
