"""Lattice realisations of the ambit field ``eps(x, t) = exp(Z(S(x, t)))``.

Each cell of area ``dx * dt`` receives an independent draw of the Lévy
basis; ``log eps`` at a grid point is the sum of the cells under the
ambit stencil. Space is periodic. Time carries a burn-in band at least
as deep as the stencil, so every retained slice sees a complete ambit.
"""

from __future__ import annotations

import json
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Optional

import numpy as np

from .ambit import AmbitBoundary, AmbitMask, ambit_mask
from .levy import LevyBasisSpec, basis_to_dict, cumulant, sample_cell

_BLOCK_ELEMENTS = 1 << 18


@dataclass(frozen=True)
class LatticeConfig:
    """Grid of ``nt`` retained time slices by ``nx`` periodic space cells.

    ``burn_in_depth`` extra slices are generated before the retained ones
    and discarded; ``None`` picks ``ceil(T / dt)``.
    """

    dx: float
    dt: float
    nx: int
    nt: int
    burn_in_depth: Optional[int] = None
    seed: int = 0
    realizations: int = 1

    def validate(self, boundary: AmbitBoundary, max_spatial_lag: float = 0.0) -> list:
        """List every violated lattice invariant (empty when valid)."""
        problems = []
        if not (self.dx > 0 and self.dt > 0):
            problems.append(f"spacings must be positive (dx={self.dx}, dt={self.dt})")
            return problems
        if self.nx < 1 or self.nt < 1:
            problems.append(f"grid extent must be positive (nx={self.nx}, nt={self.nt})")
        if self.realizations < 1:
            problems.append(f"realizations must be >= 1, got {self.realizations}")
        if not self.dt < boundary.T:
            problems.append(f"dt={self.dt} must be smaller than the decorrelation time T={boundary.T}")
        depth = self.burn_in(boundary)
        if depth * self.dt < boundary.T * (1 - 1e-12):
            problems.append(f"burn-in of {depth} slices ({depth * self.dt}) is shorter than T={boundary.T}")
        span = self.nx * self.dx
        need = boundary.L + max_spatial_lag
        if not span > need:
            problems.append(f"spatial extent nx*dx={span} must exceed 2 g(0) + max lag = {need}")
        return problems

    def burn_in(self, boundary: AmbitBoundary) -> int:
        if self.burn_in_depth is not None:
            return int(self.burn_in_depth)
        return int(math.ceil(boundary.T / self.dt * (1 - 1e-12)))


@dataclass
class FieldRealization:
    """One realisation; ``values[t, x]`` holds ``eps`` on the retained slices."""

    values: np.ndarray
    lattice: LatticeConfig
    index: int


def realization_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for realisation ``index``, fixed by ``(seed, index)`` alone."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def _log_field_sliding(cells: np.ndarray, mask: AmbitMask, burn: int, nt: int) -> np.ndarray:
    # Row sums over |i| <= w become differences of a periodic prefix sum.
    nx = cells.shape[1]
    widths = mask.half_widths
    W = int(widths.max()) if widths.size else 0
    ext = np.pad(cells, ((0, 0), (W, W)), mode="wrap")
    prefix = np.zeros((ext.shape[0], ext.shape[1] + 1))
    np.cumsum(ext, axis=1, out=prefix[:, 1:])
    out = np.zeros((nt, nx))
    block = max(1, _BLOCK_ELEMENTS // max(nx, 1))
    for k0 in range(0, nt, block):
        k1 = min(nt, k0 + block)
        acc = out[k0:k1]
        for j, w in enumerate(widths):
            rows = prefix[burn + k0 - j : burn + k1 - j]
            acc += rows[:, W + w + 1 : W + w + 1 + nx]
            acc -= rows[:, W - w : W - w + nx]
    return out


def _log_field_direct(cells: np.ndarray, mask: AmbitMask, burn: int, nt: int) -> np.ndarray:
    nx = cells.shape[1]
    out = np.zeros((nt, nx))
    for i, j in mask.offsets():
        out += np.roll(cells[burn - j : burn - j + nt], -i, axis=1)
    return out


def log_field(cells: np.ndarray, mask: AmbitMask, burn: int, nt: int, method: str = "sliding") -> np.ndarray:
    """Stencil sums of ``cells`` (shape ``(burn + nt, nx)``) for the ``nt`` retained slices.

    Retained slice ``k`` sits on the top edge of cell row ``burn + k``; stencil
    row ``j`` reads cell row ``burn + k - j``.
    """
    if burn < mask.depth - 1:
        raise ValueError(f"burn-in {burn} shallower than stencil depth {mask.depth}")
    if method == "sliding":
        return _log_field_sliding(cells, mask, burn, nt)
    if method == "direct":
        return _log_field_direct(cells, mask, burn, nt)
    raise ValueError(f"unknown method {method!r}")


def generate_one(
    basis: LevyBasisSpec,
    boundary: AmbitBoundary,
    lattice: LatticeConfig,
    index: int,
    *,
    method: str = "sliding",
    cell_sampler: Optional[Callable] = None,
    mask: Optional[AmbitMask] = None,
) -> FieldRealization:
    if mask is None:
        mask = ambit_mask(boundary, lattice.dx, lattice.dt)
    burn = lattice.burn_in(boundary)
    rng = realization_rng(lattice.seed, index)
    shape = (burn + lattice.nt, lattice.nx)
    area = lattice.dx * lattice.dt
    if cell_sampler is None:
        cells = np.asarray(sample_cell(basis, area, rng, shape), dtype=float)
    else:
        cells = np.asarray(cell_sampler(rng, shape, area), dtype=float)
    logs = log_field(cells, mask, burn, lattice.nt, method)
    return FieldRealization(np.exp(logs, out=logs), lattice, index)


def generate(
    basis: LevyBasisSpec,
    boundary: AmbitBoundary,
    lattice: LatticeConfig,
    *,
    threads: int = 1,
    method: str = "sliding",
    cell_sampler: Optional[Callable] = None,
) -> Iterator[FieldRealization]:
    """Yield ``lattice.realizations`` field realisations in index order.

    Each realisation draws from its own stream derived from
    ``(lattice.seed, index)``, so the output does not depend on ``threads``.
    ``cell_sampler(rng, shape, area)`` replaces the basis sampler (test hook).
    """
    problems = lattice.validate(boundary)
    if problems:
        raise ValueError("invalid lattice: " + "; ".join(problems))
    mask = ambit_mask(boundary, lattice.dx, lattice.dt)
    kwargs = dict(method=method, cell_sampler=cell_sampler, mask=mask)
    if threads <= 1:
        for r in range(lattice.realizations):
            yield generate_one(basis, boundary, lattice, r, **kwargs)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        pending: deque = deque()
        nxt = 0
        while nxt < lattice.realizations or pending:
            while nxt < lattice.realizations and len(pending) < threads:
                pending.append(pool.submit(generate_one, basis, boundary, lattice, nxt, **kwargs))
                nxt += 1
            yield pending.popleft().result()


# --- storage ------------------------------------------------------------------

HEADER_NAME = "fields.json"


def field_header(basis, boundary: AmbitBoundary, lattice: LatticeConfig) -> dict:
    sp = boundary.spec
    return {
        "format": "float64-le",
        "layout": "row-major t then x",
        "nt": lattice.nt,
        "nx": lattice.nx,
        "dx": lattice.dx,
        "dt": lattice.dt,
        "seed": lattice.seed,
        "realizations": lattice.realizations,
        "burn_in_depth": lattice.burn_in(boundary),
        "basis": basis_to_dict(basis),
        "boundary": {"tau2": sp.tau2, "t_scal": sp.t_scal, "T_scal": sp.T_scal, "T": sp.T, "kappa": sp.kappa},
        "files": [f"field_{r:04d}.bin" for r in range(lattice.realizations)],
    }


def save_realizations(directory, stream, header: dict) -> list:
    """Write each realisation as little-endian float64 plus a JSON header."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [write_realization(directory, real, header) for real in stream]
    write_header(directory, header)
    return paths


def write_realization(directory, real: FieldRealization, header: dict) -> Path:
    path = Path(directory) / header["files"][real.index]
    real.values.astype("<f8", copy=False).tofile(path)
    return path


def write_header(directory, header: dict) -> Path:
    path = Path(directory) / HEADER_NAME
    path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return path


def read_header(directory) -> dict:
    return json.loads((Path(directory) / HEADER_NAME).read_text())


def header_lattice(header: dict) -> LatticeConfig:
    return LatticeConfig(
        dx=header["dx"],
        dt=header["dt"],
        nx=header["nx"],
        nt=header["nt"],
        burn_in_depth=header["burn_in_depth"],
        seed=header["seed"],
        realizations=header["realizations"],
    )


def load_realization(directory, index: int, header: Optional[dict] = None) -> FieldRealization:
    """Read realisation ``index`` of a stored run."""
    directory = Path(directory)
    header = read_header(directory) if header is None else header
    lattice = header_lattice(header)
    name = header["files"][index]
    values = np.fromfile(directory / name, dtype="<f8")
    if values.size != lattice.nt * lattice.nx:
        raise ValueError(f"{name}: expected {lattice.nt * lattice.nx} values, found {values.size}")
    return FieldRealization(values.reshape(lattice.nt, lattice.nx), lattice, index)


def load_realizations(directory) -> Iterator[FieldRealization]:
    header = read_header(directory)
    for r in range(len(header["files"])):
        yield load_realization(directory, r, header)


def mask_area(boundary: AmbitBoundary, lattice: LatticeConfig) -> float:
    return ambit_mask(boundary, lattice.dx, lattice.dt).area


def discrete_mean_field(basis, boundary: AmbitBoundary, lattice: LatticeConfig) -> float:
    """Exact mean of the lattice field, ``exp(K[1] * mask area)``."""
    return math.exp(cumulant(basis, 1.0) * mask_area(boundary, lattice))
