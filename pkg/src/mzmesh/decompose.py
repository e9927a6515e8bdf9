"""Compile target unitaries into mesh settings and evaluate imperfect runs.

Both decompositions null matrix entries with Givens-style node blocks.  The
rectangular routine alternates column operations (inverse blocks multiplied
from the right, which become input-side nodes) with row operations (blocks
multiplied from the left); the left blocks are then commuted through the
residual diagonal so every node ends up in front of the output phase layer.
The triangular routine nulls border rows bottom-up with column operations
only.

The imperfection pipeline is decompose -> clip each reflectivity into its
hardware interval -> rebuild the forward model -> compare with the target.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import (
    HardwareSample,
    MeshLayout,
    MeshSettings,
    mesh_unitary,
    square_layout,
    triangular_layout,
)
from .unitary import (
    DeviationReport,
    assert_unitary,
    fidelity,
    transition_probability_deviation,
)

__all__ = [
    "clements_decompose",
    "reck_decompose",
    "clip_to_hardware",
    "EvaluationResult",
    "decompose_clip_evaluate",
]

# Entries at or below this magnitude count as already nulled; the node is
# then parked in the bar state.
_NULL_TOL = 1e-14

_TWO_PI = 2.0 * np.pi


def _wrap(phases):
    return np.mod(phases, _TWO_PI)


def _solve_right_null(v: np.ndarray, row: int, col: int) -> tuple[float, float]:
    """Angles (theta, phi) so right-multiplying T(theta, phi)^-1 on columns
    (col, col+1) nulls v[row, col]."""
    a = v[row, col]
    b = v[row, col + 1]
    if abs(a) <= _NULL_TOL:
        return 0.0, 0.0
    theta = np.arctan2(abs(a), abs(b))
    phi = np.angle(a) - np.angle(b)
    return float(theta), float(phi)


def _apply_right(v: np.ndarray, m: int, theta: float, phi: float) -> None:
    c, s = np.cos(theta), np.sin(theta)
    e = np.exp(-1j * phi)
    ti = np.array([[e * c, e * s], [-s, c]])
    v[:, m : m + 2] = v[:, m : m + 2] @ ti


def _solve_left_null(v: np.ndarray, row: int, col: int) -> tuple[float, float]:
    """Angles (theta, phi) so left-multiplying T(theta, phi) on rows
    (row-1, row) nulls v[row, col]."""
    a = v[row - 1, col]
    b = v[row, col]
    if abs(b) <= _NULL_TOL:
        return 0.0, 0.0
    theta = np.arctan2(abs(b), abs(a))
    phi = np.angle(-b) - np.angle(a)
    return float(theta), float(phi)


def _apply_left(v: np.ndarray, m: int, theta: float, phi: float) -> None:
    c, s = np.cos(theta), np.sin(theta)
    e = np.exp(1j * phi)
    t = np.array([[e * c, -s], [e * s, c]])
    v[m : m + 2, :] = t @ v[m : m + 2, :]


def _place_on_layout(layout: MeshLayout, ops, output_phases) -> MeshSettings:
    """Schedule ops (mode pair, theta, phi) in application order onto layout
    positions, earliest free layer first."""
    position = layout.position_index()
    refl = np.empty(layout.n_nodes)
    phase = np.empty(layout.n_nodes)
    next_free = np.zeros(layout.n_modes, dtype=int)
    for m, theta, phi in ops:
        layer = int(max(next_free[m], next_free[m + 1]))
        idx = position.get((layer, m))
        if idx is None:
            raise RuntimeError(
                "internal error: no layout node at layer %d, top mode %d" % (layer, m)
            )
        refl[idx] = np.cos(theta) ** 2
        phase[idx] = phi
        next_free[m] = next_free[m + 1] = layer + 1
    return MeshSettings(layout, refl, _wrap(phase), _wrap(np.asarray(output_phases)))


def clements_decompose(u: np.ndarray) -> MeshSettings:
    """Compile a unitary onto the rectangular mesh of n layers.

    Args:
        u (array[complex]): unitary matrix, n >= 2, checked at 1e-8.

    Returns:
        MeshSettings on ``square_layout(n, 0)``; the forward model rebuilds
        ``u`` to within accumulated rounding error.
    """
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] < 2:
        raise ValueError("expected a square matrix with n >= 2, got shape %r" % (u.shape,))
    assert_unitary(u, 1e-8)
    n = u.shape[0]
    v = u.copy()
    right_ops: list[tuple[int, float, float]] = []
    left_ops: list[tuple[int, float, float]] = []
    for k, i in enumerate(range(n - 2, -1, -1)):
        if k % 2 == 0:
            for j in reversed(range(n - 1 - i)):
                theta, phi = _solve_right_null(v, i + j + 1, j)
                _apply_right(v, j, theta, phi)
                right_ops.append((j, theta, phi))
        else:
            for j in range(n - 1 - i):
                theta, phi = _solve_left_null(v, i + j + 1, j)
                _apply_left(v, i + j, theta, phi)
                left_ops.append((i + j, theta, phi))
    delta = np.angle(np.diagonal(v)).copy()
    # Commute each inverse left block through the diagonal:
    # T(theta, phi)^-1 D(alpha, beta) = D(beta - phi + pi, beta) T(theta, alpha - beta + pi)
    ops = list(right_ops)
    for m, theta, phi in reversed(left_ops):
        alpha, beta = delta[m], delta[m + 1]
        ops.append((m, theta, alpha - beta + np.pi))
        delta[m] = beta - phi + np.pi
    return _place_on_layout(square_layout(n, 0), ops, delta)


def reck_decompose(u: np.ndarray) -> MeshSettings:
    """Compile a unitary onto the triangular mesh of 2n-3 layers.

    Border rows are nulled bottom-up with column operations, leaving the
    output phase diagonal directly.
    """
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] < 2:
        raise ValueError("expected a square matrix with n >= 2, got shape %r" % (u.shape,))
    assert_unitary(u, 1e-8)
    n = u.shape[0]
    v = u.copy()
    layout = triangular_layout(n)
    position = layout.position_index()
    refl = np.empty(layout.n_nodes)
    phase = np.empty(layout.n_nodes)
    for row in range(n - 1, 0, -1):
        for col in range(row):
            theta, phi = _solve_right_null(v, row, col)
            _apply_right(v, col, theta, phi)
            idx = position[(col + 2 * (n - 1 - row), col)]
            refl[idx] = np.cos(theta) ** 2
            phase[idx] = phi
    delta = np.angle(np.diagonal(v))
    return MeshSettings(layout, refl, _wrap(phase), _wrap(delta))


def clip_to_hardware(
    settings: MeshSettings, hw: HardwareSample
) -> tuple[MeshSettings, int]:
    """Clamp each reflectivity into its achievable interval; phases untouched.

    Returns the clipped settings and the number of nodes that moved.
    Idempotent: clipping a clipped result changes nothing.
    """
    if settings.layout != hw.layout:
        raise ValueError("settings and hardware belong to different layouts")
    clipped = np.clip(settings.reflectivities, hw.r_min, hw.r_max)
    n_clipped = int(np.sum(clipped != settings.reflectivities))
    return (
        MeshSettings(settings.layout, clipped, settings.phases, settings.output_phases),
        n_clipped,
    )


@dataclass(frozen=True)
class EvaluationResult:
    """Outcome of compiling a target onto one imperfect hardware draw."""

    fidelity: float
    affected: bool
    n_clipped: int
    deviation: DeviationReport


def decompose_clip_evaluate(
    u: np.ndarray, kind: str, hw: HardwareSample
) -> EvaluationResult:
    """Decompose ``u``, clip to ``hw``, and measure the loss.

    ``kind`` selects the decomposition and must match ``hw.layout.kind``;
    the hardware must be sampled on the base layout (no extra layers).
    """
    if kind not in ("square", "triangular"):
        raise ValueError("unknown decomposition kind %r" % (kind,))
    if hw.layout.kind != kind:
        raise ValueError(
            "hardware layout kind %r does not match requested %r"
            % (hw.layout.kind, kind)
        )
    if hw.layout.extra_layers != 0:
        raise ValueError("decompose_clip_evaluate needs hardware without extra layers")
    settings = clements_decompose(u) if kind == "square" else reck_decompose(u)
    clipped, n_clipped = clip_to_hardware(settings, hw)
    reconstructed = mesh_unitary(clipped)
    return EvaluationResult(
        fidelity=fidelity(u, reconstructed),
        affected=n_clipped > 0,
        n_clipped=n_clipped,
        deviation=transition_probability_deviation(u, reconstructed),
    )
