"""Random Fourier feature projection for the Gaussian (RBF) kernel.

The map z(x)_j = sqrt(2/D) * cos(w_j . x + b_j), with rows w_j drawn
from N(0, 2*gamma*I) and phases b_j from Uniform[0, 2*pi), satisfies
E[z(a) . z(b)] = exp(-gamma * ||a - b||^2), so dot products in the
D-dimensional projected space approximate the exact kernel without ever
forming a Gram matrix. Weights are generated from a counter-based
Philox stream, so a (seed, d, D, gamma) tuple fully determines the
projector; serialized files store only that header and regenerate the
arrays on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, InvalidDimension, InvalidGamma, IoFailure


@dataclass(frozen=True)
class RffProjector:
    input_dim: int
    output_dim: int
    gamma: float
    seed: int
    weights: np.ndarray = field(repr=False, compare=False)  # (D, d)
    phases: np.ndarray = field(repr=False, compare=False)  # (D,)


def new_projector(input_dim: int, output_dim: int, gamma: float, seed: int) -> RffProjector:
    """Sample a frozen projector; identical seeds give identical arrays."""
    if input_dim < 1 or output_dim < 1:
        raise InvalidDimension(
            f"dimensions must be >= 1, got d={input_dim}, D={output_dim}"
        )
    if not gamma > 0:
        raise InvalidGamma(f"gamma must be positive, got {gamma}")
    rng = np.random.Generator(np.random.Philox(seed))
    weights = rng.normal(0.0, np.sqrt(2.0 * gamma), size=(output_dim, input_dim))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=output_dim)
    weights.setflags(write=False)
    phases.setflags(write=False)
    return RffProjector(
        input_dim=input_dim,
        output_dim=output_dim,
        gamma=float(gamma),
        seed=int(seed),
        weights=weights,
        phases=phases,
    )


def default_gamma(input_dim: int) -> float:
    """Scale-free default bandwidth, 1/d."""
    return 1.0 / input_dim


def project(projector: RffProjector, x) -> np.ndarray:
    """Apply the projector to a vector or matrix (dense or CSR).

    Returns a dense array with trailing dimension D; every coordinate
    lies in [-sqrt(2/D), sqrt(2/D)].
    """
    single = False
    if sp.issparse(x):
        mat = x
    else:
        mat = np.asarray(x, dtype=np.float64)
        if mat.ndim == 1:
            mat = mat[None, :]
            single = True
    if mat.shape[1] != projector.input_dim:
        raise DimensionMismatch(
            f"input has dim {mat.shape[1]}, projector expects {projector.input_dim}"
        )
    if sp.issparse(mat):
        linear = np.asarray(mat.astype(np.float64) @ projector.weights.T)
    else:
        linear = mat @ projector.weights.T
    out = np.sqrt(2.0 / projector.output_dim) * np.cos(linear + projector.phases)
    return out[0] if single else out


def exact_kernel(a, b, gamma: float) -> float:
    """exp(-gamma * ||a - b||^2); test oracle and small exact-Gram baseline."""
    if not gamma > 0:
        raise InvalidGamma(f"gamma must be positive, got {gamma}")
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector dims differ: {a.shape} vs {b.shape}")
    return float(np.exp(-gamma * np.dot(a - b, a - b)))


def save_projector(path: str, projector: RffProjector) -> None:
    """Header-only serialization; weights regenerate from the seed on load."""
    header = {
        "format": "seqclass-rff/1",
        "input_dim": projector.input_dim,
        "output_dim": projector.output_dim,
        "gamma": projector.gamma,
        "seed": projector.seed,
    }
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(header, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write projector {path!r}: {exc}") from exc


def load_projector(path: str) -> RffProjector:
    try:
        with open(path, "r", encoding="utf-8") as f:
            header = json.load(f)
    except OSError as exc:
        raise IoFailure(f"cannot read projector {path!r}: {exc}") from exc
    if header.get("format") != "seqclass-rff/1":
        raise IoFailure(f"{path!r} is not a projector header")
    return new_projector(
        input_dim=header["input_dim"],
        output_dim=header["output_dim"],
        gamma=header["gamma"],
        seed=header["seed"],
    )
