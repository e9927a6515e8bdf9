import csv
import json

import numpy as np
import pytest

from mzmesh.experiments import (
    HISTOGRAM_BIN_WIDTH,
    BenchmarkRecord,
    FourierProfileRecord,
    fidelity_sweep,
    fourier_reflectivity_profile,
    optimization_benchmark,
    reflectivity_statistics,
    region_node_indices,
    spatial_summary,
    trial_seeds,
    write_records_csv,
    write_sidecar,
    write_spatial_csv,
)
from mzmesh.mesh import square_layout


# ---------------------------------------------------------------- seeding


def test_trial_seeds_frozen_values():
    assert trial_seeds(0, 0, 0) == (15793235383387715774, 12390638538380655177)
    assert trial_seeds(0, 0, 1) == (8649202198168436674, 9572846202106059917)
    assert trial_seeds(7, 3, 11) == (17205951393823839645, 16967685792303836974)


def test_trial_seeds_distinct_across_cells_and_trials():
    seen = set()
    for cell in range(6):
        for trial in range(50):
            pair = trial_seeds(1, cell, trial)
            assert pair not in seen
            seen.add(pair)


def test_trial_seeds_independent_of_each_other():
    a, b = trial_seeds(3, 2, 5)
    assert a != b


# ---------------------------------------------------------------- regions


def test_region_indices_n4_hand_derived():
    # nodes: 0=(0,0) 1=(0,2) 2=(1,1) 3=(2,0) 4=(2,2) 5=(3,1)
    regions = region_node_indices(square_layout(4))
    assert list(regions["first_column"]) == [0, 1]
    assert list(regions["top_row"]) == [3]
    assert list(regions["centre"]) == [2]


def test_region_indices_n5_hand_derived():
    # nodes: 0=(0,0) 1=(0,2) 2=(1,1) 3=(1,3) 4=(2,0) 5=(2,2)
    #        6=(3,1) 7=(3,3) 8=(4,0) 9=(4,2)
    # centre box: layers within 0.5 of 2.0, top modes within 0.5 of 1.5
    regions = region_node_indices(square_layout(5))
    assert list(regions["first_column"]) == [0, 1]
    assert list(regions["top_row"]) == [4, 8]
    assert list(regions["centre"]) == [5]


def test_regions_are_disjoint_and_corner_is_first_column_only():
    for n in (4, 5, 8, 13, 20):
        lay = square_layout(n)
        regions = region_node_indices(lay)
        all_idx = np.concatenate(list(regions.values()))
        assert len(all_idx) == len(set(all_idx.tolist()))
        corner = next(
            i for i, nd in enumerate(lay.nodes) if nd.layer == 0 and nd.top_mode == 0
        )
        assert corner in regions["first_column"]
        assert corner not in regions["top_row"]


def test_top_row_and_first_column_sizes():
    for n in (6, 9, 12):
        lay = square_layout(n)
        regions = region_node_indices(lay)
        assert len(regions["first_column"]) == n // 2
        # every even layer after the first contributes one top-row node
        n_even_layers = (n + 1) // 2
        assert len(regions["top_row"]) == n_even_layers - 1


def test_centre_region_scales_with_size():
    small = region_node_indices(square_layout(10))["centre"]
    large = region_node_indices(square_layout(30))["centre"]
    assert len(large) > len(small) >= 1


# ---------------------------------------------------------------- spatial


@pytest.fixture(scope="module")
def small_stats():
    return reflectivity_statistics(5, samples=40, seed=3)


def test_reflectivity_statistics_shapes(small_stats):
    stats = small_stats
    assert stats.n_modes == 5
    assert stats.samples == 40
    assert stats.mean_reflectivity_map.shape == (10,)
    assert np.all(stats.mean_reflectivity_map >= 0.0)
    assert np.all(stats.mean_reflectivity_map <= 1.0)
    assert 0.0 < stats.overall_mean < 1.0


def test_reflectivity_statistics_histogram_mass(small_stats):
    stats = small_stats
    regions = region_node_indices(stats.layout)
    for name, hist in stats.histograms.items():
        assert len(hist) == round(1.0 / HISTOGRAM_BIN_WIDTH)
        assert int(np.sum(hist)) == len(regions[name]) * stats.samples


def test_reflectivity_statistics_region_means_consistent(small_stats):
    stats = small_stats
    edges = np.linspace(0.0, 1.0, len(stats.histograms["centre"]) + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    for name, hist in stats.histograms.items():
        approx_mean = float(np.sum(mids * hist) / np.sum(hist))
        # histogram binning quantizes values by at most half a bin
        assert abs(approx_mean - stats.region_means[name]) <= HISTOGRAM_BIN_WIDTH
        assert stats.region_mean_ses[name] > 0.0


def test_reflectivity_statistics_deterministic():
    a = reflectivity_statistics(4, samples=25, seed=9)
    b = reflectivity_statistics(4, samples=25, seed=9)
    assert np.array_equal(a.mean_reflectivity_map, b.mean_reflectivity_map)
    assert a.overall_mean == b.overall_mean
    c = reflectivity_statistics(4, samples=25, seed=10)
    assert not np.array_equal(a.mean_reflectivity_map, c.mean_reflectivity_map)


def test_reflectivity_statistics_jobs_invariant():
    a = reflectivity_statistics(4, samples=20, seed=5)
    b = reflectivity_statistics(4, samples=20, seed=5, jobs=2)
    assert np.array_equal(a.mean_reflectivity_map, b.mean_reflectivity_map)
    for name in a.histograms:
        assert np.array_equal(a.histograms[name], b.histograms[name])


def test_reflectivity_statistics_rejects_tiny_mesh():
    with pytest.raises(ValueError):
        reflectivity_statistics(3, samples=10, seed=0)


# ---------------------------------------------------------------- sweep


def test_fidelity_sweep_perfect_hardware_row():
    (rec,) = fidelity_sweep([4], [0.0], trials=10, kind="square", seed=0)
    assert rec.n_modes == 4 and rec.sigma == 0.0 and rec.kind == "square"
    assert rec.trials == 10
    assert rec.affected_fraction == 0.0
    assert rec.mean_infidelity_affected == 0.0
    assert rec.mean_rel_deviation == 0.0
    assert rec.max_rel_deviation == 0.0


def test_fidelity_sweep_records_grid_in_order():
    recs = fidelity_sweep([4, 5], [0.0, 0.05], trials=5, kind="triangular", seed=0)
    assert [(r.n_modes, r.sigma) for r in recs] == [
        (4, 0.0),
        (4, 0.05),
        (5, 0.0),
        (5, 0.05),
    ]
    for rec in recs:
        assert 0.0 <= rec.affected_fraction <= 1.0
        assert rec.kind == "triangular"


def test_fidelity_sweep_deterministic_and_jobs_invariant():
    a = fidelity_sweep([6], [0.05, 0.1], trials=8, kind="square", seed=2)
    b = fidelity_sweep([6], [0.05, 0.1], trials=8, kind="square", seed=2)
    c = fidelity_sweep([6], [0.05, 0.1], trials=8, kind="square", seed=2, jobs=2)
    assert a == b == c
    d = fidelity_sweep([6], [0.05, 0.1], trials=8, kind="square", seed=3)
    assert a != d


def test_fidelity_sweep_affected_stats_meaningful():
    (rec,) = fidelity_sweep([6], [0.1], trials=20, kind="square", seed=1)
    assert rec.affected_fraction > 0.5
    assert rec.mean_infidelity_affected > 0.0
    assert rec.max_rel_deviation >= rec.mean_rel_deviation > 0.0


# ---------------------------------------------------------------- benchmark


def test_optimization_benchmark_variants_and_floors():
    recs = optimization_benchmark([2], sigma=0.05, trials=4, seed=0)
    assert [r.variant for r in recs] == ["optimize_square", "optimize_extra_layer"]
    for rec in recs:
        assert isinstance(rec, BenchmarkRecord)
        assert rec.n_modes == 2
        assert rec.trials == 4
        assert rec.attempts >= rec.trials
        assert rec.mean_enhancement >= 1.0
        assert rec.mean_fidelity_after >= rec.mean_fidelity_before


def test_optimization_benchmark_deterministic():
    a = optimization_benchmark([2], sigma=0.05, trials=3, seed=1)
    b = optimization_benchmark([2], sigma=0.05, trials=3, seed=1)
    assert a == b


# ---------------------------------------------------------------- fourier


def test_fourier_profile_low_counts_frozen():
    recs = fourier_reflectivity_profile([8, 16], haar_samples=3, seed=0)
    by_n = {r.n_modes: r for r in recs}
    assert by_n[8].n_low_nodes == 0
    assert by_n[16].n_low_nodes == 12
    for rec in recs:
        assert isinstance(rec, FourierProfileRecord)
        assert rec.low_threshold == 0.1
        assert rec.centre_offdiag_low_count == 0
        assert rec.haar_mean_low_count >= 0.0


def test_fourier_profile_haar_count_grows():
    recs = fourier_reflectivity_profile([8, 16], haar_samples=5, seed=1)
    assert recs[1].haar_mean_low_count > recs[0].haar_mean_low_count


# ---------------------------------------------------------------- files


def test_write_records_csv_roundtrips_floats(tmp_path):
    recs = fidelity_sweep([4], [0.037], trials=6, kind="square", seed=4)
    path = tmp_path / "out.csv"
    write_records_csv(path, recs)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    row = rows[0]
    assert row["n_modes"] == "4"
    assert row["kind"] == "square"
    assert float(row["sigma"]) == 0.037
    assert float(row["affected_fraction"]) == recs[0].affected_fraction
    assert float(row["mean_infidelity_affected"]) == recs[0].mean_infidelity_affected


def test_write_records_csv_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        write_records_csv(tmp_path / "out.csv", [])


def test_write_spatial_csv_has_one_row_per_node(tmp_path):
    stats = reflectivity_statistics(4, samples=10, seed=6)
    path = tmp_path / "sp.csv"
    write_spatial_csv(path, stats)
    lines = path.read_text().splitlines()
    assert lines[0] == "layer,slot,top_mode,mean_reflectivity"
    assert len(lines) == 1 + 6
    first = lines[1].split(",")
    assert first[:3] == ["0", "0", "0"]
    assert float(first[3]) == stats.mean_reflectivity_map[0]


def test_spatial_summary_matches_stats(tmp_path):
    stats = reflectivity_statistics(4, samples=10, seed=7)
    summary = spatial_summary(stats)
    assert summary["n_modes"] == 4
    assert summary["samples"] == 10
    assert summary["overall_mean"] == stats.overall_mean
    assert summary["bin_width"] == HISTOGRAM_BIN_WIDTH
    assert set(summary["histograms"]) == {"first_column", "top_row", "centre"}
    assert summary["region_means"]["centre"] == stats.region_means["centre"]
    json.dumps(summary)  # must be JSON-serializable as written


def test_write_sidecar_format(tmp_path):
    path = tmp_path / "side.json"
    write_sidecar(path, "fig3", {"sizes": [5, 10], "trials": 3}, seed=4)
    text = path.read_text()
    assert text.endswith("\n")
    doc = json.loads(text)
    assert doc["experiment"] == "fig3"
    assert doc["seed"] == 4
    assert doc["config"] == {"sizes": [5, 10], "trials": 3}
    assert "version" in doc
    # rewriting produces identical bytes
    write_sidecar(tmp_path / "b.json", "fig3", {"sizes": [5, 10], "trials": 3}, seed=4)
    assert (tmp_path / "b.json").read_bytes() == path.read_bytes()


def test_write_sidecar_extra_fields(tmp_path):
    path = tmp_path / "side.json"
    write_sidecar(path, "fig2", {"n": 4}, seed=0, extra={"summary": {"k": 1}})
    doc = json.loads(path.read_text())
    assert doc["summary"] == {"k": 1}
