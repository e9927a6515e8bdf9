"""Statistical harnesses over ensembles of targets and hardware draws.

Every harness derives one RNG seed pair per trial from
(master seed, cell index, trial index) through a fixed splitting rule, so
results are reproducible bit for bit and independent of how many worker
processes execute the trials.  Aggregation always folds per-trial results
in trial order.

Harness outputs are written as one CSV (header row, one column per record
field) plus a JSON sidecar holding the full configuration, the master seed,
and the package version.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from ._version import __version__
from .decompose import clements_decompose, clip_to_hardware, decompose_clip_evaluate
from .mesh import (
    MeshLayout,
    base_hardware,
    layout_for,
    mesh_unitary,
    sample_hardware,
    square_layout,
)
from .optimize import (
    PERFECT_TOL,
    enhancement_ratio,
    initial_guess_redundant,
    optimize_settings,
)
from .unitary import fidelity, fourier_matrix, haar_random_unitary

__all__ = [
    "SpatialStats",
    "SweepRecord",
    "BenchmarkRecord",
    "FourierProfileRecord",
    "BENCHMARK_VARIANTS",
    "trial_seeds",
    "region_node_indices",
    "reflectivity_statistics",
    "fidelity_sweep",
    "optimization_benchmark",
    "fourier_reflectivity_profile",
    "write_records_csv",
    "write_spatial_csv",
    "spatial_summary",
    "write_sidecar",
]

HISTOGRAM_BIN_WIDTH = 0.02
_BIN_EDGES = np.linspace(0.0, 1.0, 51)

BENCHMARK_VARIANTS = ("optimize_square", "optimize_extra_layer")

# An attempt cap keeps affected-trial collection finite even in cells where
# imperfections almost never bite.
_MAX_ATTEMPT_FACTOR = 1000


def trial_seeds(master_seed: int, cell_index: int, trial_index: int) -> tuple[int, int]:
    """Two 64-bit seeds (unitary, hardware) for one trial of one grid cell."""
    entropy = (int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(cell_index), int(trial_index))
    a, b = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint64)
    return int(a), int(b)


def _map_ordered(fn, items, jobs):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunk = max(1, len(items) // (jobs * 8))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


# ---------------------------------------------------------------------------
# Spatial reflectivity statistics (square mesh)


def region_node_indices(layout: MeshLayout) -> dict[str, np.ndarray]:
    """Index arrays for the first_column, top_row, and centre regions.

    The regions are disjoint: the corner node at layer 0 belongs to
    first_column only, not to top_row (its reflectivity follows the
    first-column distribution, and the top-row statistics are
    size-invariant only without it).  The centre is the closed square of
    side 20% of the interferometer size around the middle of the
    (layer, top mode) grid; the half-width never drops below half a grid
    cell so the region stays nonempty from n = 4 up.
    """
    if layout.kind != "square" or layout.extra_layers != 0:
        raise ValueError("regions are defined on the square base layout")
    n = layout.n_modes
    half = max(0.1 * n, 0.5)
    mid_layer = (n - 1) / 2.0
    mid_top = (n - 2) / 2.0
    first, top, centre = [], [], []
    for i, node in enumerate(layout.nodes):
        if node.layer == 0:
            first.append(i)
        if node.top_mode == 0 and node.layer > 0:
            top.append(i)
        if abs(node.layer - mid_layer) <= half and abs(node.top_mode - mid_top) <= half:
            centre.append(i)
    return {
        "first_column": np.array(first, dtype=int),
        "top_row": np.array(top, dtype=int),
        "centre": np.array(centre, dtype=int),
    }


@dataclass(frozen=True, eq=False)
class SpatialStats:
    """Per-position reflectivity statistics over a Haar ensemble.

    Attributes:
        n_modes, samples: ensemble parameters.
        layout: the square base layout the map refers to.
        mean_reflectivity_map: mean R per node, layout order.
        histograms: region name -> counts in 50 bins of width 0.02 on [0, 1].
        region_means: region name -> grand mean reflectivity.
        region_mean_ses: region name -> standard error of the region mean,
            estimated from per-sample region means (samples are iid).
        overall_mean: grand mean over all nodes and samples.
    """

    n_modes: int
    samples: int
    layout: MeshLayout
    mean_reflectivity_map: np.ndarray
    histograms: dict[str, np.ndarray]
    region_means: dict[str, float]
    region_mean_ses: dict[str, float]
    overall_mean: float


def _spatial_trial(args) -> np.ndarray:
    n, u_seed = args
    u = haar_random_unitary(n, u_seed)
    return clements_decompose(u).reflectivities


def reflectivity_statistics(
    n: int, samples: int, seed: int, jobs: int = 1
) -> SpatialStats:
    """Decompose ``samples`` Haar unitaries and map where reflectivity lands.

    Requires n >= 4 so the centre region is nonempty.
    """
    if n < 4:
        raise ValueError("spatial statistics need n >= 4, got %r" % (n,))
    if samples < 1:
        raise ValueError("samples must be >= 1, got %r" % (samples,))
    layout = square_layout(n, 0)
    regions = region_node_indices(layout)
    args = [(n, trial_seeds(seed, 0, t)[0]) for t in range(samples)]
    results = _map_ordered(_spatial_trial, args, jobs)

    sum_r = np.zeros(layout.n_nodes)
    hists = {name: np.zeros(50, dtype=np.int64) for name in regions}
    means = {name: [] for name in regions}
    for r in results:
        sum_r += r
        for name, idx in regions.items():
            vals = r[idx]
            hists[name] += np.histogram(vals, bins=_BIN_EDGES)[0]
            means[name].append(float(vals.mean()))
    region_means = {}
    region_ses = {}
    for name in regions:
        per_sample = np.array(means[name])
        region_means[name] = float(per_sample.mean())
        sd = float(per_sample.std(ddof=1)) if samples > 1 else 0.0
        region_ses[name] = sd / float(np.sqrt(samples))
    return SpatialStats(
        n_modes=n,
        samples=samples,
        layout=layout,
        mean_reflectivity_map=sum_r / samples,
        histograms=hists,
        region_means=region_means,
        region_mean_ses=region_ses,
        overall_mean=float(sum_r.sum() / (samples * layout.n_nodes)),
    )


# ---------------------------------------------------------------------------
# Fidelity loss sweep (decompose -> clip -> evaluate)


@dataclass(frozen=True)
class SweepRecord:
    """Aggregate outcome of one (size, sigma) cell of the loss sweep.

    Infidelity and deviation statistics are taken over affected trials only;
    a cell with no affected trials reports zeros.
    """

    n_modes: int
    sigma: float
    kind: str
    trials: int
    affected_fraction: float
    mean_infidelity_affected: float
    std_infidelity_affected: float
    mean_rel_deviation: float
    max_rel_deviation: float


def _sweep_trial(args) -> tuple[bool, float, float, float]:
    n, sigma, kind, u_seed, hw_seed = args
    u = haar_random_unitary(n, u_seed)
    hw = sample_hardware(layout_for(kind, n), sigma, hw_seed)
    res = decompose_clip_evaluate(u, kind, hw)
    return res.affected, 1.0 - res.fidelity, res.deviation.mean_rel, res.deviation.max_rel


def fidelity_sweep(
    sizes, sigmas, trials: int, kind: str, seed: int, jobs: int = 1
) -> list[SweepRecord]:
    """Monte Carlo sweep of fidelity loss over a (size, sigma) grid.

    Cell indices run size-major over the grid and do not involve ``kind``,
    so square and triangular sweeps with the same master seed see the same
    unitaries and hardware values.
    """
    sizes = [int(s) for s in sizes]
    sigmas = [float(s) for s in sigmas]
    if trials < 1:
        raise ValueError("trials must be >= 1, got %r" % (trials,))
    records = []
    for i_size, n in enumerate(sizes):
        for i_sigma, sigma in enumerate(sigmas):
            cell = i_size * len(sigmas) + i_sigma
            args = []
            for t in range(trials):
                u_seed, hw_seed = trial_seeds(seed, cell, t)
                args.append((n, sigma, kind, u_seed, hw_seed))
            results = _map_ordered(_sweep_trial, args, jobs)
            affected = [r for r in results if r[0]]
            n_aff = len(affected)
            if n_aff:
                infid = np.array([r[1] for r in affected])
                mean_infid = float(infid.mean())
                std_infid = float(infid.std(ddof=1)) if n_aff > 1 else 0.0
                mean_rel = float(np.mean([r[2] for r in affected]))
                max_rel = float(np.mean([r[3] for r in affected]))
            else:
                mean_infid = std_infid = mean_rel = max_rel = 0.0
            records.append(
                SweepRecord(
                    n_modes=n,
                    sigma=sigma,
                    kind=kind,
                    trials=trials,
                    affected_fraction=n_aff / trials,
                    mean_infidelity_affected=mean_infid,
                    std_infidelity_affected=std_infid,
                    mean_rel_deviation=mean_rel,
                    max_rel_deviation=max_rel,
                )
            )
    return records


# ---------------------------------------------------------------------------
# Optimization benchmark


@dataclass(frozen=True)
class BenchmarkRecord:
    """Aggregate outcome of one (size, variant) cell of the benchmark.

    ``trials`` counts the affected trials actually collected; ``attempts``
    the trial draws consumed to find them.  Unaffected draws lose nothing,
    so their enhancement is an undefined 0/0 and they are skipped.
    """

    n_modes: int
    variant: str
    trials: int
    attempts: int
    mean_enhancement: float
    mean_fidelity_before: float
    mean_fidelity_after: float


def _benchmark_attempt(args):
    n, variant, sigma, u_seed, hw_seed = args
    u = haar_random_unitary(n, u_seed)
    if variant == "optimize_square":
        layout = square_layout(n, 0)
        hw = sample_hardware(layout, sigma, hw_seed)
        clipped, n_clipped = clip_to_hardware(clements_decompose(u), hw)
        if n_clipped == 0:
            return None
        before = fidelity(u, mesh_unitary(clipped))
        result = optimize_settings(u, layout, hw, clipped)
    else:
        layout = square_layout(n, 1)
        hw = sample_hardware(layout, sigma, hw_seed)
        clipped, n_clipped = clip_to_hardware(clements_decompose(u), base_hardware(hw))
        if n_clipped == 0:
            return None
        before = fidelity(u, mesh_unitary(clipped))
        guess = initial_guess_redundant(u, layout, hw)
        result = optimize_settings(u, layout, hw, guess)
    return before, max(result.fidelity_after, before)


def optimization_benchmark(
    sizes, sigma: float, trials: int, seed: int, jobs: int = 1
) -> list[BenchmarkRecord]:
    """Fidelity enhancement from re-optimizing affected trials.

    For each size, variant "optimize_square" re-optimizes the clipped
    square mesh in place, and "optimize_extra_layer" optimizes a mesh with
    one redundant layer from :func:`initial_guess_redundant`.  The direct
    baseline for both is the clipped square decomposition.  Trials are drawn
    until ``trials`` affected ones are found (or an attempt cap is hit).
    """
    sizes = [int(s) for s in sizes]
    if trials < 1:
        raise ValueError("trials must be >= 1, got %r" % (trials,))
    records = []
    for i_size, n in enumerate(sizes):
        for i_var, variant in enumerate(BENCHMARK_VARIANTS):
            cell = i_size * len(BENCHMARK_VARIANTS) + i_var
            collected = []
            attempts_used = 0
            next_attempt = 0
            cap = trials * _MAX_ATTEMPT_FACTOR
            batch = max(trials, 32)
            while len(collected) < trials and next_attempt < cap:
                hi = min(next_attempt + batch, cap)
                args = []
                for t in range(next_attempt, hi):
                    u_seed, hw_seed = trial_seeds(seed, cell, t)
                    args.append((n, variant, sigma, u_seed, hw_seed))
                results = _map_ordered(_benchmark_attempt, args, jobs)
                for offset, res in enumerate(results):
                    if res is not None:
                        collected.append(res)
                        attempts_used = next_attempt + offset + 1
                        if len(collected) == trials:
                            break
                else:
                    next_attempt = hi
                    continue
                break
            if len(collected) < trials:
                attempts_used = cap
            ratios = []
            for before, after in collected:
                ratio = enhancement_ratio(before, after)
                if ratio == float("inf"):
                    ratio = (1.0 - before) / PERFECT_TOL
                ratios.append(ratio)
            n_coll = len(collected)
            records.append(
                BenchmarkRecord(
                    n_modes=n,
                    variant=variant,
                    trials=n_coll,
                    attempts=attempts_used,
                    mean_enhancement=float(np.mean(ratios)) if n_coll else 0.0,
                    mean_fidelity_before=(
                        float(np.mean([b for b, _ in collected])) if n_coll else 0.0
                    ),
                    mean_fidelity_after=(
                        float(np.mean([a for _, a in collected])) if n_coll else 0.0
                    ),
                )
            )
    return records


# ---------------------------------------------------------------------------
# Fourier reflectivity profile


@dataclass(frozen=True)
class FourierProfileRecord:
    """Low-reflectivity node counts for the Fourier target at one size."""

    n_modes: int
    low_threshold: float
    n_low_nodes: int
    centre_offdiag_low_count: int
    haar_mean_low_count: float


def _on_grid_diagonal(n: int, layer: int, top_mode: int, slack: float = 1.0) -> bool:
    """Whether a node lies on one of the two main diagonals of the
    (layer, top mode) grid, within ``slack`` grid cells."""
    if n == 2:
        return True
    t = layer * (n - 2) / (n - 1)
    return abs(top_mode - t) <= slack or abs(top_mode - (n - 2 - t)) <= slack


def fourier_reflectivity_profile(
    sizes, low_threshold: float = 0.1, haar_samples: int = 100, seed: int = 0,
    jobs: int = 1,
) -> list[FourierProfileRecord]:
    """Count low-reflectivity nodes for Fourier targets versus Haar targets.

    Fourier matrices concentrate their few low-reflectivity nodes on the
    grid diagonals, so the count grows linearly with size; for Haar targets
    the count scales with the node count instead.
    """
    sizes = [int(s) for s in sizes]
    if not 0.0 < low_threshold <= 1.0:
        raise ValueError("low_threshold must lie in (0, 1], got %r" % (low_threshold,))
    records = []
    for i_size, n in enumerate(sizes):
        settings = clements_decompose(fourier_matrix(n))
        layout = settings.layout
        low = settings.reflectivities < low_threshold
        regions = region_node_indices(layout)
        centre = np.zeros(layout.n_nodes, dtype=bool)
        centre[regions["centre"]] = True
        offdiag = np.array(
            [
                not _on_grid_diagonal(n, node.layer, node.top_mode)
                for node in layout.nodes
            ]
        )
        args = [
            (n, trial_seeds(seed, i_size, t)[0]) for t in range(haar_samples)
        ]
        haar_counts = [
            int(np.sum(r < low_threshold))
            for r in _map_ordered(_spatial_trial, args, jobs)
        ]
        records.append(
            FourierProfileRecord(
                n_modes=n,
                low_threshold=float(low_threshold),
                n_low_nodes=int(low.sum()),
                centre_offdiag_low_count=int(np.sum(low & centre & offdiag)),
                haar_mean_low_count=float(np.mean(haar_counts)),
            )
        )
    return records


# ---------------------------------------------------------------------------
# Output files


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_records_csv(path, records) -> None:
    """Write a list of dataclass records as CSV, one column per field."""
    if not records:
        raise ValueError("no records to write")
    names = [f.name for f in fields(records[0])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for rec in records:
            writer.writerow([_format_cell(getattr(rec, name)) for name in names])


def write_spatial_csv(path, stats: SpatialStats) -> None:
    """Write the per-node mean reflectivity map as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer", "slot", "top_mode", "mean_reflectivity"])
        for node, mean_r in zip(stats.layout.nodes, stats.mean_reflectivity_map):
            writer.writerow(
                [node.layer, node.slot, node.top_mode, _format_cell(float(mean_r))]
            )


def spatial_summary(stats: SpatialStats) -> dict:
    """JSON-ready summary of a :class:`SpatialStats` (histograms included)."""
    return {
        "n_modes": stats.n_modes,
        "samples": stats.samples,
        "overall_mean": stats.overall_mean,
        "bin_width": HISTOGRAM_BIN_WIDTH,
        "histograms": {k: [int(c) for c in v] for k, v in stats.histograms.items()},
        "region_means": dict(stats.region_means),
        "region_mean_ses": dict(stats.region_mean_ses),
    }


def write_sidecar(path, experiment: str, config: dict, seed: int, extra=None) -> None:
    """Write the JSON sidecar for one harness run."""
    doc = {
        "experiment": experiment,
        "version": __version__,
        "seed": int(seed),
        "config": config,
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
