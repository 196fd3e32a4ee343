"""Spatial response analysis of fixed beamformer weights.

The narrow-band beampattern is the inner product of the weights with the
acoustic transfer function of a probe source moved along a semicircular
contour; summing squared magnitudes over bins gives the wide-band
beampower, normalized to 0 dB at its maximum for polar plots.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from beamlab.errors import ShapeError
from beamlab.rooms import ArrayGeometry, Scenario, atf_grid
from beamlab.stft import StftConfig

DB_FLOOR = -80.0


@dataclass(frozen=True)
class BeampatternGrid:
    """Narrow-band responses B (K, n_thetas) and wide-band beampower P."""

    b: np.ndarray
    p: np.ndarray
    thetas: np.ndarray
    order: object
    method: str = ""

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=np.complex128))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=np.float64))
        object.__setattr__(self, "thetas", np.asarray(self.thetas, dtype=np.float64))

    def p_db(self) -> np.ndarray:
        return to_polar_db(self.p)


def narrowband(w1: np.ndarray, atfs: np.ndarray) -> np.ndarray:
    """B(k, theta) = w1(k)^H h(k, theta) for ATFs shaped (M, K, n_thetas)."""
    w1 = np.asarray(w1, dtype=np.complex128)
    atfs = np.asarray(atfs, dtype=np.complex128)
    if atfs.ndim != 3 or w1.shape != (atfs.shape[1], atfs.shape[0]):
        raise ShapeError(f"weights {w1.shape} do not match ATF grid {atfs.shape}")
    return np.einsum("km,mkt->kt", w1.conj(), atfs)


def wideband(b: np.ndarray) -> np.ndarray:
    """P(theta) = sum_k |B(k, theta)|^2."""
    b = np.asarray(b)
    if not np.all(np.isfinite(b)):
        raise ValueError("beampattern contains non-finite values")
    return np.sum(np.abs(b) ** 2, axis=0)


def to_polar_db(p: np.ndarray, floor_db: float = DB_FLOOR) -> np.ndarray:
    """Beampower in dB, maximum normalized to exactly 0, floored for plotting."""
    p = np.asarray(p, dtype=np.float64)
    peak = p.max(initial=0.0)
    if peak <= 0.0:
        raise ValueError("beampower is identically zero; cannot normalize")
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(p / peak)
    return np.maximum(db, floor_db)


def analyze_example(mixture, method: str, theta_grid=None, order=0,
                    weights=None, cfg: StftConfig | None = None,
                    out_dir=None) -> BeampatternGrid:
    """Beampattern of the weights a method derives for one mixture.

    method: "mvdr", "mpdr", or "learned-w1" (the latter requires a
    StageWeights object or interchange file path via `weights`; only the
    time-invariant stage is analyzed). The probe contour sits at the
    scenario's source radius. Writes CSV artifacts plus an SVG polar plot
    when `out_dir` is given.
    """
    from beamlab import pipeline  # deferred: pipeline imports this module's siblings
    from beamlab.beamforming import StageWeights, load_weights

    cfg = cfg or StftConfig()
    if theta_grid is None:
        theta_grid = np.arange(0.0, 181.0, 1.0)
    theta_grid = np.asarray(theta_grid, dtype=np.float64)

    if method in ("mvdr", "mpdr"):
        w1 = pipeline.solve_weights(mixture, method, cfg).w1
    elif method == "learned-w1":
        if weights is None:
            raise ValueError("learned-w1 analysis requires a weights file or StageWeights")
        sw = weights if isinstance(weights, StageWeights) else load_weights(weights)
        w1 = sw.w1
    else:
        raise ValueError(f"unknown beampattern method {method!r}")

    atfs = atf_grid(mixture.scenario, mixture.geometry, theta_grid, order=order, cfg=cfg)
    b = narrowband(w1, atfs)
    grid = BeampatternGrid(b=b, p=wideband(b), thetas=theta_grid, order=order, method=method)
    if out_dir is not None:
        write_artifacts(grid, out_dir)
    return grid


def write_artifacts(grid: BeampatternGrid, out_dir) -> None:
    """Emit beampower CSV, per-bin magnitude CSV, and an SVG polar plot."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tag = grid.method or "weights"
    db = grid.p_db()
    with open(out / f"beampower_{tag}.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["theta_deg", "beampower_db"])
        for th, val in zip(grid.thetas, db):
            writer.writerow([f"{th:.3f}", f"{val:.6f}"])
    with open(out / f"narrowband_{tag}.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["bin"] + [f"{th:.3f}" for th in grid.thetas])
        mags = np.abs(grid.b)
        for k in range(mags.shape[0]):
            writer.writerow([k] + [f"{v:.8e}" for v in mags[k]])
    _polar_svg(grid.thetas, db, out / f"beampower_{tag}.svg", tag)


def _polar_svg(thetas, db, path, title) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig = plt.figure(figsize=(5, 5))
    ax = fig.add_subplot(projection="polar")
    ax.plot(np.radians(thetas), db)
    ax.set_rlim(DB_FLOOR, 0)
    ax.set_title(f"wide-band beampower [dB], {title}")
    fig.savefig(path, format="svg")
    plt.close(fig)
