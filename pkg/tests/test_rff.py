import numpy as np
import pytest
import scipy.sparse as sp

from seqclass.errors import DimensionMismatch, InvalidDimension, InvalidGamma
from seqclass.rff import (
    default_gamma,
    exact_kernel,
    load_projector,
    new_projector,
    project,
    save_projector,
)


def test_projector_deterministic():
    a = new_projector(9261, 1000, 1.0 / 9261, seed=42)
    b = new_projector(9261, 1000, 1.0 / 9261, seed=42)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.phases, b.phases)


def test_projector_seed_changes_arrays():
    a = new_projector(16, 64, 0.1, seed=1)
    b = new_projector(16, 64, 0.1, seed=2)
    assert not np.array_equal(a.weights, b.weights)


def test_projector_validation():
    with pytest.raises(InvalidDimension):
        new_projector(10, 0, 0.1, seed=0)
    with pytest.raises(InvalidDimension):
        new_projector(0, 10, 0.1, seed=0)
    with pytest.raises(InvalidGamma):
        new_projector(10, 10, -1.0, seed=0)
    with pytest.raises(InvalidGamma):
        exact_kernel([1.0], [1.0], 0.0)


def test_projector_distribution_parameters():
    proj = new_projector(200, 5000, 0.03, seed=7)
    # weights ~ N(0, 2*gamma), phases ~ U[0, 2*pi)
    assert abs(proj.weights.var() - 2 * 0.03) < 0.002
    assert 0.0 <= proj.phases.min() and proj.phases.max() < 2 * np.pi


def test_project_zero_vector_bound():
    proj = new_projector(8, 32, 0.5, seed=3)
    z = project(proj, np.zeros(8))
    bound = np.sqrt(2.0 / 32)
    assert np.all(np.abs(z) <= bound + 1e-15)
    assert np.allclose(z, bound * np.cos(proj.phases))


def test_project_coordinate_bound(rng):
    proj = new_projector(12, 64, 0.2, seed=5)
    X = rng.normal(size=(20, 12))
    Z = project(proj, X)
    assert Z.shape == (20, 64)
    assert np.all(np.abs(Z) <= np.sqrt(2.0 / 64) + 1e-15)
    # squared norm can never exceed 2
    assert np.all((Z**2).sum(axis=1) <= 2.0 + 1e-12)


def test_project_sparse_equals_dense(rng):
    proj = new_projector(30, 40, 0.1, seed=9)
    X = rng.poisson(0.5, size=(6, 30)).astype(np.float64)
    assert np.allclose(project(proj, sp.csr_matrix(X)), project(proj, X))


def test_project_dimension_mismatch():
    proj = new_projector(8, 16, 0.5, seed=0)
    with pytest.raises(DimensionMismatch):
        project(proj, np.zeros(9))


def test_exact_kernel_values():
    a = np.array([1.0, 0.0])
    assert exact_kernel(a, a, 1.7) == 1.0
    # gamma=0.5 with squared distance 2
    assert np.isclose(exact_kernel([1.0, 0.0], [0.0, 1.0], 0.5), np.exp(-1.0))
    # orthonormal pair at gamma=1
    assert np.isclose(exact_kernel([1.0, 0.0], [0.0, 1.0], 1.0), np.exp(-2.0))
    with pytest.raises(DimensionMismatch):
        exact_kernel([1.0], [1.0, 2.0], 1.0)


def test_self_kernel_concentration(rng):
    d, D = 24, 4096
    x = rng.normal(size=d)
    x /= np.linalg.norm(x)
    for seed in range(5):
        proj = new_projector(d, D, 1.0, seed=seed)
        z = project(proj, x)
        assert abs(z @ z - 1.0) <= 0.1


def test_pair_kernel_approximation(rng):
    # construct a pair with gamma * ||a-b||^2 = 1, oracle exp(-1)
    d, D = 24, 4096
    a = rng.normal(size=d)
    a /= np.linalg.norm(a)
    delta = rng.normal(size=d)
    delta /= np.linalg.norm(delta)
    gamma = 2.0
    b = a + delta / np.sqrt(gamma)  # ||a-b||^2 = 1/gamma
    proj = new_projector(d, D, gamma, seed=11)
    approx = project(proj, a) @ project(proj, b)
    assert abs(approx - np.exp(-1.0)) <= 0.08
    assert np.isclose(exact_kernel(a, b, gamma), np.exp(-1.0))


def test_rmse_shrinks_with_dimension(rng):
    # mean over projectors converges to the exact kernel; error ~ 1/sqrt(D)
    d = 16
    pairs = []
    for _ in range(20):
        a, b = rng.normal(size=(2, d))
        a /= np.linalg.norm(a)
        b /= np.linalg.norm(b)
        pairs.append((a, b))
    gamma = 0.5

    def rmse(D, seeds):
        errs = []
        for seed in seeds:
            proj = new_projector(d, D, gamma, seed=seed)
            for a, b in pairs:
                errs.append(project(proj, a) @ project(proj, b) - exact_kernel(a, b, gamma))
        return float(np.sqrt(np.mean(np.square(errs))))

    seeds = range(10)
    assert rmse(1024, seeds) < rmse(64, seeds) / 2


def test_default_gamma():
    assert default_gamma(9261) == 1.0 / 9261


def test_header_serialization_round_trip(tmp_path):
    proj = new_projector(100, 50, 0.25, seed=77)
    path = tmp_path / "proj.json"
    save_projector(str(path), proj)
    loaded = load_projector(str(path))
    assert np.array_equal(loaded.weights, proj.weights)
    assert np.array_equal(loaded.phases, proj.phases)
    assert loaded.gamma == proj.gamma
    # the file itself holds only the header, not the arrays
    assert path.stat().st_size < 1000
