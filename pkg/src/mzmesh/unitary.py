"""Target unitaries and matrix comparison metrics.

Matrices are plain complex ndarrays of shape (n, n).  Helpers here generate
the two target families used throughout the package (Haar-random and discrete
Fourier), measure how close two unitaries are, and read/write the JSON matrix
file format understood by the command line tools.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "UnitarityError",
    "DeviationReport",
    "unitarity_deviation",
    "assert_unitary",
    "haar_random_unitary",
    "fourier_matrix",
    "fidelity",
    "transition_probability_deviation",
    "save_matrix",
    "load_matrix",
]


class UnitarityError(ValueError):
    """A matrix that was required to be unitary failed the check.

    Attributes:
        deviation (float): measured max-entry deviation of ``U^dag U`` from
            the identity.
        tol (float): tolerance that was violated.
    """

    def __init__(self, deviation: float, tol: float):
        self.deviation = float(deviation)
        self.tol = float(tol)
        super().__init__(
            "matrix is not unitary: max |U^dag U - I| = %.3e exceeds %.1e"
            % (self.deviation, self.tol)
        )


def unitarity_deviation(u: np.ndarray) -> float:
    """Max-entry deviation of ``u^dag u`` from the identity."""
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError("expected a square matrix, got shape %r" % (u.shape,))
    n = u.shape[0]
    return float(np.max(np.abs(u.conj().T @ u - np.eye(n))))


def assert_unitary(u: np.ndarray, tol: float = 1e-10) -> None:
    """Raise :class:`UnitarityError` if ``u`` is not unitary within ``tol``."""
    dev = unitarity_deviation(u)
    if not dev <= tol:
        raise UnitarityError(dev, tol)


def haar_random_unitary(n: int, seed: int) -> np.ndarray:
    """Draw an n x n unitary from the Haar measure.

    A matrix of iid standard complex Gaussians is QR-factorized and the
    phases of the R diagonal are absorbed into Q, which makes the result
    distributionally exact and deterministic per seed.

    Args:
        n (int): number of modes, at least 1.
        seed (int): RNG seed; equal seeds give identical matrices.

    Returns:
        array[complex]: unitary of shape (n, n).
    """
    if n < 1:
        raise ValueError("mode count n must be at least 1, got %r" % (n,))
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def fourier_matrix(n: int) -> np.ndarray:
    """Discrete Fourier transform unitary, F[j, k] = exp(2*pi*i*j*k/n)/sqrt(n)."""
    if n < 1:
        raise ValueError("mode count n must be at least 1, got %r" % (n,))
    jk = np.outer(np.arange(n), np.arange(n))
    return np.exp(2j * np.pi * jk / n) / np.sqrt(n)


def fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """Similarity of two n x n unitaries, |Tr(u^dag v)|^2 / n^2.

    Equals 1 iff the matrices agree up to a global phase; insensitive to
    that phase in both arguments.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape or u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(
            "fidelity needs two square matrices of equal shape, got %r and %r"
            % (u.shape, v.shape)
        )
    n = u.shape[0]
    t = np.vdot(u, v)  # Tr(u^dag v), summed in a fixed element order
    f = (t.real * t.real + t.imag * t.imag) / float(n * n)
    return float(min(max(f, 0.0), 1.0))


@dataclass(frozen=True)
class DeviationReport:
    """Transition-probability deviations relative to the uniform value 1/n.

    Attributes:
        mean_rel: mean |P_eff - P_target| over all entries, divided by 1/n.
        max_rel: max |P_eff - P_target| over all entries, divided by 1/n.
    """

    mean_rel: float
    max_rel: float


def transition_probability_deviation(
    u_target: np.ndarray, u_eff: np.ndarray
) -> DeviationReport:
    """Compare the power transfer matrices |U|^2 of two unitaries.

    Entry deviations at or below 1e-14 are treated as exact matches, so two
    settings of the same matrix report (0, 0).
    """
    u_target = np.asarray(u_target)
    u_eff = np.asarray(u_eff)
    if u_target.shape != u_eff.shape or u_target.ndim != 2:
        raise ValueError(
            "deviation needs two matrices of equal shape, got %r and %r"
            % (u_target.shape, u_eff.shape)
        )
    n = u_target.shape[0]
    d = np.abs(np.abs(u_eff) ** 2 - np.abs(u_target) ** 2)
    d[d <= 1e-14] = 0.0
    return DeviationReport(mean_rel=float(d.mean() * n), max_rel=float(d.max() * n))


def save_matrix(path, u: np.ndarray) -> None:
    """Write a complex matrix as JSON {"n": ..., "re": [[...]], "im": [[...]]}."""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError("expected a square matrix, got shape %r" % (u.shape,))
    doc = {
        "n": int(u.shape[0]),
        "re": [[float(x) for x in row] for row in u.real],
        "im": [[float(x) for x in row] for row in u.imag],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_matrix(path, tol: float = 1e-8) -> np.ndarray:
    """Read a matrix written by :func:`save_matrix` and check unitarity.

    Raises:
        json.JSONDecodeError: the file is not valid JSON.
        ValueError: the document does not have the expected fields/shapes.
        UnitarityError: the matrix is not unitary within ``tol``.
    """
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("matrix file must hold a JSON object")
    for key in ("n", "re", "im"):
        if key not in doc:
            raise ValueError("matrix file missing field %r" % key)
    n = doc["n"]
    if not isinstance(n, int) or n < 1:
        raise ValueError("field 'n' must be a positive integer, got %r" % (n,))
    re = np.asarray(doc["re"], dtype=float)
    im = np.asarray(doc["im"], dtype=float)
    if re.shape != (n, n) or im.shape != (n, n):
        raise ValueError(
            "fields 're'/'im' must be %d x %d arrays, got %r and %r"
            % (n, n, re.shape, im.shape)
        )
    u = re + 1j * im
    assert_unitary(u, tol)
    return u
