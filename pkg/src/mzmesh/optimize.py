"""Constrained recovery of fidelity lost to imperfect hardware.

The optimizer minimizes 1 - fidelity(u, mesh_unitary(settings)) over every
node reflectivity, node phase, and output phase.  Internally each node is
parametrized by its splitting angle theta = arccos(sqrt(R)); the hardware
interval [R_min, R_max] becomes a box on theta and the forward model stays
smooth at the interval endpoints, where d sqrt(R)/dR would blow up.  Node
and output phases are unconstrained and wrapped into [0, 2*pi) on output.

The gradient is analytic: with V = D T_K ... T_1 and c = Tr(u^dag V),

    d(1 - F)/dp = -2 Re(conj(c) Tr(u^dag dV/dp)) / n^2

and Tr(u^dag dV/dp) touches only the 2x2 block of node k, so one forward
pass (storing the two active rows of each prefix product) plus one backward
pass gives every component in O(K n) work.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .decompose import clements_decompose, clip_to_hardware
from .mesh import (
    HardwareSample,
    MeshLayout,
    MeshSettings,
    base_hardware,
    mesh_unitary,
)
from .unitary import fidelity

__all__ = [
    "OptimizationResult",
    "make_objective",
    "parameter_bounds",
    "pack_settings",
    "unpack_settings",
    "initial_guess_redundant",
    "optimize_settings",
    "enhancement_ratio",
]

_TWO_PI = 2.0 * np.pi

# Infidelities at or below this are treated as exactly recovered.
PERFECT_TOL = 1e-15

# Stalled-corner escape: retry fractions of the angle box, and the
# objective level below which a result counts as good enough to stop.
# The golden angle keeps retry phases off the stationary multiples of pi.
_RESTART_FRACTIONS = (0.5, 0.25, 0.75)
_RESTART_THRESHOLD = 1e-10
_GOLDEN_ANGLE = 2.399963229728653


def pack_settings(settings: MeshSettings) -> np.ndarray:
    """Flatten settings into the optimizer vector [theta..., phi..., delta...]."""
    theta = np.arccos(np.sqrt(np.clip(settings.reflectivities, 0.0, 1.0)))
    return np.concatenate([theta, settings.phases, settings.output_phases])


def unpack_settings(x: np.ndarray, layout: MeshLayout) -> MeshSettings:
    """Inverse of :func:`pack_settings`; phases wrapped into [0, 2*pi)."""
    k = layout.n_nodes
    theta = x[:k]
    return MeshSettings(
        layout,
        np.cos(theta) ** 2,
        np.mod(x[k : 2 * k], _TWO_PI),
        np.mod(x[2 * k :], _TWO_PI),
    )


def parameter_bounds(hw: HardwareSample) -> list[tuple[float | None, float | None]]:
    """Box bounds for the optimizer vector: theta boxed by hardware, phases free."""
    theta_lo = np.arccos(np.sqrt(np.clip(hw.r_max, 0.0, 1.0)))
    theta_hi = np.arccos(np.sqrt(np.clip(hw.r_min, 0.0, 1.0)))
    bounds = [(float(lo), float(hi)) for lo, hi in zip(theta_lo, theta_hi)]
    bounds += [(None, None)] * (hw.layout.n_nodes + hw.layout.n_modes)
    return bounds


def make_objective(u: np.ndarray, layout: MeshLayout):
    """Objective 1 - fidelity(u, forward(x)) with its analytic gradient.

    Returns a callable f(x) -> (value, gradient) over the packed vector.
    """
    u = np.asarray(u, dtype=complex)
    n = layout.n_modes
    k_nodes = layout.n_nodes
    tops = np.array([node.top_mode for node in layout.nodes])
    u_conj = u.conj()
    inv_n2 = 1.0 / float(n * n)

    def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
        theta = x[:k_nodes]
        phi = x[k_nodes : 2 * k_nodes]
        delta = x[2 * k_nodes :]
        c = np.cos(theta)
        s = np.sin(theta)
        e = np.exp(1j * phi)

        p = np.eye(n, dtype=complex)
        prefix_rows = np.empty((k_nodes, 2, n), dtype=complex)
        for k in range(k_nodes):
            m = tops[k]
            prefix_rows[k] = p[m : m + 2, :]
            blk = np.array([[e[k] * c[k], -s[k]], [e[k] * s[k], c[k]]])
            p[m : m + 2, :] = blk @ p[m : m + 2, :]
        v = np.exp(1j * delta)[:, None] * p

        row_dots = np.sum(u_conj * v, axis=1)  # row i: sum_a conj(u[i,a]) v[i,a]
        tr = row_dots.sum()  # Tr(u^dag v)
        value = 1.0 - (tr.real * tr.real + tr.imag * tr.imag) * inv_n2

        # Backward pass: w = u^dag D T_K ... T_{k+1}, shrunk one block per step.
        grad = np.empty_like(x)
        scale = -2.0 * inv_n2
        w = u_conj.T * np.exp(1j * delta)[None, :]
        tr_conj = tr.conjugate()
        for k in range(k_nodes - 1, -1, -1):
            m = tops[k]
            mblk = prefix_rows[k] @ w[:, m : m + 2]  # (P_{k-1} u^dag S_k) block
            # Tr(M dT) = sum_{a,j in block} M[a, j] dT[j, a]
            d_theta = (
                mblk[0, 0] * (-e[k] * s[k])
                + mblk[1, 0] * (-c[k])
                + mblk[0, 1] * (e[k] * c[k])
                + mblk[1, 1] * (-s[k])
            )
            d_phi = mblk[0, 0] * (1j * e[k] * c[k]) + mblk[0, 1] * (1j * e[k] * s[k])
            grad[k] = scale * (tr_conj * d_theta).real
            grad[k_nodes + k] = scale * (tr_conj * d_phi).real
            blk = np.array([[e[k] * c[k], -s[k]], [e[k] * s[k], c[k]]])
            w[:, m : m + 2] = w[:, m : m + 2] @ blk
        grad[2 * k_nodes :] = scale * (tr_conj * 1j * row_dots).real
        return float(value), grad

    return objective


def initial_guess_redundant(
    u: np.ndarray, layout: MeshLayout, hw: HardwareSample
) -> MeshSettings:
    """Starting point for a square mesh with extra layers.

    The base layers carry the clipped rectangular decomposition of ``u``;
    every extra-layer node starts at its maximum reflectivity (as close to
    the bar state as the hardware allows) with zero phase, so the guess
    behaves like the clipped base mesh followed by near-transparent layers.
    """
    if layout.kind != "square":
        raise ValueError("redundant meshes are square; got kind %r" % (layout.kind,))
    if hw.layout != layout:
        raise ValueError("hardware was sampled on a different layout")
    u = np.asarray(u, dtype=complex)
    if u.shape != (layout.n_modes, layout.n_modes):
        raise ValueError(
            "matrix shape %r does not match layout with %d modes"
            % (u.shape, layout.n_modes)
        )
    base = clements_decompose(u)
    clipped, _ = clip_to_hardware(base, base_hardware(hw))
    n_base = clipped.layout.n_nodes
    refl = np.concatenate([clipped.reflectivities, hw.r_max[n_base:]])
    phases = np.concatenate([clipped.phases, np.zeros(layout.n_nodes - n_base)])
    return MeshSettings(layout, refl, phases, clipped.output_phases)


@dataclass(frozen=True)
class OptimizationResult:
    """Outcome of one constrained optimization run."""

    settings: MeshSettings
    fidelity_before: float
    fidelity_after: float
    iterations: int
    converged: bool


def optimize_settings(
    u: np.ndarray,
    layout: MeshLayout,
    hw: HardwareSample,
    start: MeshSettings,
    max_iters: int = 1000,
    tol: float = 1e-12,
) -> OptimizationResult:
    """Minimize 1 - fidelity over all feasible settings from ``start``.

    Quasi-Newton descent (L-BFGS-B) under the hardware box constraints,
    with deterministic interior restarts when the solver stalls on a
    stationary corner of the box.  The returned settings always satisfy
    the constraints and never score below the start: if the solver fails
    to improve, the start is returned unchanged.  Deterministic given its
    inputs; ``iterations`` counts all runs together.

    Raises:
        ValueError: start violates the hardware constraints, or the layout,
            hardware, and start disagree.
    """
    if start.layout != layout or hw.layout != layout:
        raise ValueError("layout, hardware, and start settings must agree")
    u = np.asarray(u, dtype=complex)
    if u.shape != (layout.n_modes, layout.n_modes):
        raise ValueError(
            "matrix shape %r does not match layout with %d modes"
            % (u.shape, layout.n_modes)
        )
    if np.any(start.reflectivities < hw.r_min - 1e-9) or np.any(
        start.reflectivities > hw.r_max + 1e-9
    ):
        raise ValueError("start settings are infeasible for this hardware")

    fidelity_before = fidelity(u, mesh_unitary(start))
    if 1.0 - fidelity_before <= 1e-14:
        return OptimizationResult(start, fidelity_before, fidelity_before, 0, True)

    objective = make_objective(u, layout)
    bounds = parameter_bounds(hw)
    k = layout.n_nodes
    lo = np.array([b[0] for b in bounds[:k]])
    hi = np.array([b[1] for b in bounds[:k]])

    def run(x_init):
        return minimize(
            objective,
            x_init,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": max_iters, "ftol": tol, "gtol": tol},
        )

    x0 = pack_settings(start)
    x0[:k] = np.clip(x0[:k], lo, hi)
    best = run(x0)
    iterations = int(best.nit)

    # A start whose reflectivities are clipped onto their bounds can be a
    # first-order stationary corner of the box that is not a useful local
    # optimum (all escape directions are second order).  When the solver
    # stalls at such a corner, retry the stuck angles from deterministic
    # interior points and keep the best outcome.
    for j, frac in enumerate(_RESTART_FRACTIONS):
        if best.fun <= _RESTART_THRESHOLD:
            break
        stuck = (np.abs(best.x[:k] - lo) < 1e-9) | (np.abs(best.x[:k] - hi) < 1e-9)
        if not stuck.any():
            break
        x_retry = best.x.copy()
        x_retry[:k] = np.where(stuck, lo + frac * (hi - lo), x_retry[:k])
        # phases at multiples of pi are stationary symmetry points; kick
        # the stuck nodes' phases onto an incommensurate sequence instead
        kick = _GOLDEN_ANGLE * (j + 1) + 0.7 * np.arange(k)
        x_retry[k : 2 * k] = np.where(stuck, kick, x_retry[k : 2 * k])
        again = run(x_retry)
        iterations += int(again.nit)
        if again.fun < best.fun:
            best = again
        else:
            break

    candidate = unpack_settings(best.x, layout)
    # exact feasibility: cos^2 of a boxed angle can round a hair outside
    candidate = MeshSettings(
        layout,
        np.clip(candidate.reflectivities, hw.r_min, hw.r_max),
        candidate.phases,
        candidate.output_phases,
    )
    fidelity_after = fidelity(u, mesh_unitary(candidate))
    if fidelity_after < fidelity_before:
        return OptimizationResult(
            start, fidelity_before, fidelity_before, iterations, False
        )
    return OptimizationResult(
        candidate, fidelity_before, fidelity_after, iterations, bool(best.success)
    )


def enhancement_ratio(before: float, after: float) -> float:
    """Infidelity reduction factor (1 - before) / (1 - after).

    Both arguments are fidelities in [0, 1].  When the optimized run is
    perfect within 1e-15 the ratio is math.inf unless the direct run was
    already perfect too, in which case there was nothing to enhance and the
    ratio is 1.
    """
    for name, val in (("before", before), ("after", after)):
        if not 0.0 <= val <= 1.0:
            raise ValueError("%s fidelity must lie in [0, 1], got %r" % (name, val))
    if 1.0 - after <= PERFECT_TOL:
        return 1.0 if 1.0 - before <= PERFECT_TOL else math.inf
    return (1.0 - before) / (1.0 - after)
