"""Mesh geometry, node blocks, and imperfect-hardware models.

A mesh is a fixed arrangement of two-mode nodes on n optical modes.  Each
node couples the adjacent mode pair (top_mode, top_mode + 1) with the block

    T(R, phi) = [[exp(i*phi)*sqrt(R),     -sqrt(1-R)],
                 [exp(i*phi)*sqrt(1-R),    sqrt(R)]]

i.e. a phase shifter on the top input followed by a splitter of power
reflectivity R (R = 1 is the bar state, R = 0 the cross state).  The mesh
unitary is D * T(last node) * ... * T(first node) with D a diagonal of
output phase shifters.

Physically a node is a Mach-Zehnder interferometer built from two static
beam splitters and a tunable internal phase.  Fabrication scatter in the
static splitters restricts the reflectivities the node can reach; that
restriction is captured by :class:`HardwareSample`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

__all__ = [
    "KINDS",
    "NodeId",
    "MeshLayout",
    "NodeSetting",
    "MeshSettings",
    "HardwareSample",
    "square_layout",
    "triangular_layout",
    "layout_for",
    "base_layout",
    "base_hardware",
    "node_block",
    "mesh_unitary",
    "mzi_power_reflectivity",
    "achievable_range",
    "internal_phase_for_reflectivity",
    "sample_hardware",
    "save_settings",
    "load_settings",
    "save_hardware",
    "load_hardware",
]

KINDS = ("square", "triangular")

# Static splitter reflectivities are redrawn into this open interval so a
# node never degenerates into a fixed mirror or a bare phase shifter.
_SPLITTER_LO = 0.005
_SPLITTER_HI = 0.995


@dataclass(frozen=True, order=True)
class NodeId:
    """Position of a node: layer index, slot within the layer, top mode."""

    layer: int
    slot: int
    top_mode: int


@dataclass(frozen=True)
class MeshLayout:
    """Immutable arrangement of nodes on ``n_modes`` optical modes.

    ``nodes`` is ordered by (layer, slot); settings and hardware arrays are
    aligned with this order everywhere in the package.
    """

    n_modes: int
    kind: str
    extra_layers: int
    nodes: tuple[NodeId, ...]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_layers(self) -> int:
        if self.kind == "square":
            return self.n_modes + self.extra_layers
        return 2 * self.n_modes - 3

    def position_index(self) -> dict[tuple[int, int], int]:
        """Map (layer, top_mode) -> index into ``nodes``."""
        return {(nd.layer, nd.top_mode): i for i, nd in enumerate(self.nodes)}


@lru_cache(maxsize=None)
def square_layout(n: int, extra_layers: int = 0) -> MeshLayout:
    """Rectangular (Clements) layout: n + extra_layers layers in a quincunx.

    Even layers carry nodes at even top modes (floor(n/2) of them), odd
    layers at odd top modes (floor((n-1)/2)).  Extra layers continue the
    alternation at the output side.
    """
    if n < 2:
        raise ValueError("square layout needs n >= 2 modes, got %r" % (n,))
    if extra_layers < 0:
        raise ValueError("extra_layers must be >= 0, got %r" % (extra_layers,))
    nodes = []
    for layer in range(n + extra_layers):
        for slot, top in enumerate(range(layer % 2, n - 1, 2)):
            nodes.append(NodeId(layer, slot, top))
    return MeshLayout(n, "square", extra_layers, tuple(nodes))


@lru_cache(maxsize=None)
def triangular_layout(n: int) -> MeshLayout:
    """Triangular (Reck) layout: n(n-1)/2 nodes in 2n-3 layers.

    The node nulling row r, column c of the target sits at layer
    c + 2(n-1-r) on mode pair (c, c+1); the staircase this produces is the
    usual triangle with the longest diagonal first.
    """
    if n < 2:
        raise ValueError("triangular layout needs n >= 2 modes, got %r" % (n,))
    positions = []
    for row in range(n - 1, 0, -1):
        for col in range(row):
            positions.append((col + 2 * (n - 1 - row), col))
    positions.sort()
    nodes = []
    slot = 0
    prev_layer = -1
    for layer, top in positions:
        slot = slot + 1 if layer == prev_layer else 0
        prev_layer = layer
        nodes.append(NodeId(layer, slot, top))
    return MeshLayout(n, "triangular", 0, tuple(nodes))


def layout_for(kind: str, n: int, extra_layers: int = 0) -> MeshLayout:
    """Build a layout by kind name; triangular layouts take no extra layers."""
    if kind == "square":
        return square_layout(n, extra_layers)
    if kind == "triangular":
        if extra_layers:
            raise ValueError("triangular layouts do not support extra layers")
        return triangular_layout(n)
    raise ValueError("unknown mesh kind %r (expected one of %r)" % (kind, KINDS))


def base_layout(layout: MeshLayout) -> MeshLayout:
    """The same layout with any extra layers removed."""
    if layout.extra_layers == 0:
        return layout
    return square_layout(layout.n_modes, 0)


@dataclass(frozen=True)
class NodeSetting:
    """Programmed state of one node: power reflectivity and phase."""

    reflectivity: float
    phase: float


@dataclass(frozen=True, eq=False)
class MeshSettings:
    """Programmed state of a whole mesh.

    Attributes:
        layout: the node arrangement.
        reflectivities: array of R in [0, 1], one per node, layout order.
        phases: array of node phases, one per node, layout order.
        output_phases: array of n output phase shifts (the diagonal D).
    """

    layout: MeshLayout
    reflectivities: np.ndarray
    phases: np.ndarray
    output_phases: np.ndarray

    def __post_init__(self):
        k = self.layout.n_nodes
        if self.reflectivities.shape != (k,) or self.phases.shape != (k,):
            raise ValueError(
                "settings arrays must have one entry per node (%d), got %r and %r"
                % (k, self.reflectivities.shape, self.phases.shape)
            )
        if self.output_phases.shape != (self.layout.n_modes,):
            raise ValueError(
                "output_phases must have one entry per mode (%d), got %r"
                % (self.layout.n_modes, self.output_phases.shape)
            )
        if np.any(self.reflectivities < -1e-9) or np.any(self.reflectivities > 1 + 1e-9):
            raise ValueError("reflectivities must lie in [0, 1]")

    def node_setting(self, index: int) -> NodeSetting:
        return NodeSetting(
            float(self.reflectivities[index]), float(self.phases[index])
        )


def node_block(reflectivity: float, phase: float) -> np.ndarray:
    """2x2 node block T(R, phi); see the module docstring for the convention."""
    r = min(max(float(reflectivity), 0.0), 1.0)
    c = np.sqrt(r)
    s = np.sqrt(1.0 - r)
    e = np.exp(1j * float(phase))
    return np.array([[e * c, -s], [e * s, c]])


def mesh_unitary(settings: MeshSettings) -> np.ndarray:
    """Forward model: the n x n unitary realized by programmed settings."""
    layout = settings.layout
    n = layout.n_modes
    u = np.eye(n, dtype=complex)
    r = np.clip(settings.reflectivities, 0.0, 1.0)
    c = np.sqrt(r)
    s = np.sqrt(1.0 - r)
    e = np.exp(1j * settings.phases)
    for k, node in enumerate(layout.nodes):
        m = node.top_mode
        blk = np.array([[e[k] * c[k], -s[k]], [e[k] * s[k], c[k]]])
        u[m : m + 2, :] = blk @ u[m : m + 2, :]
    return np.exp(1j * settings.output_phases)[:, None] * u


# ---------------------------------------------------------------------------
# Imperfect MZI physics


def _check_splitter(name: str, r: float) -> float:
    r = float(r)
    if not 0.0 < r < 1.0:
        raise ValueError(
            "static splitter %s must lie strictly inside (0, 1), got %r" % (name, r)
        )
    return r


def mzi_power_reflectivity(r1: float, r2: float, phi_int: float) -> float:
    """|M_11|^2 of an MZI with static splitters r1, r2 at internal phase phi_int."""
    r1 = _check_splitter("r1", r1)
    r2 = _check_splitter("r2", r2)
    t1, t2 = 1.0 - r1, 1.0 - r2
    return r1 * r2 + t1 * t2 - 2.0 * np.sqrt(r1 * r2 * t1 * t2) * np.cos(phi_int)


def achievable_range(r1: float, r2: float) -> tuple[float, float]:
    """Reflectivity interval an imperfect MZI can reach.

    R_min = (sqrt(r1 r2) - sqrt(t1 t2))^2 at internal phase 0,
    R_max = (sqrt(r1 r2) + sqrt(t1 t2))^2 at internal phase pi, clamped
    into [0, 1].  Perfect splitters (0.5, 0.5) give exactly (0, 1); R_min
    is 0 iff r1 + r2 = 1.
    """
    r1 = _check_splitter("r1", r1)
    r2 = _check_splitter("r2", r2)
    a = np.sqrt(r1 * r2)
    b = np.sqrt((1.0 - r1) * (1.0 - r2))
    rmin = (a - b) ** 2
    rmax = (a + b) ** 2
    return float(max(rmin, 0.0)), float(min(rmax, 1.0))


def internal_phase_for_reflectivity(target: float, r1: float, r2: float) -> float:
    """Internal phase at which the MZI reflectivity equals ``target``.

    Inverts :func:`mzi_power_reflectivity` on [0, pi].  Raises ValueError
    when the target lies outside the achievable range.
    """
    r1 = _check_splitter("r1", r1)
    r2 = _check_splitter("r2", r2)
    target = float(target)
    rmin, rmax = achievable_range(r1, r2)
    if target < rmin - 1e-12 or target > rmax + 1e-12:
        raise ValueError(
            "target reflectivity %r outside achievable range [%g, %g]"
            % (target, rmin, rmax)
        )
    t1, t2 = 1.0 - r1, 1.0 - r2
    arg = (r1 * r2 + t1 * t2 - target) / (2.0 * np.sqrt(r1 * r2 * t1 * t2))
    return float(np.arccos(min(max(arg, -1.0), 1.0)))


@dataclass(frozen=True, eq=False)
class HardwareSample:
    """One draw of static-splitter imperfections for every node of a layout.

    Attributes:
        layout: the mesh the sample belongs to.
        sigma: standard deviation of the splitter reflectivity scatter.
        seed: RNG seed the sample was drawn with.
        r1, r2: static splitter reflectivities per node, layout order.
        r_min, r_max: achievable reflectivity interval per node.
    """

    layout: MeshLayout
    sigma: float
    seed: int
    r1: np.ndarray
    r2: np.ndarray
    r_min: np.ndarray
    r_max: np.ndarray


def sample_hardware(layout: MeshLayout, sigma: float, seed: int) -> HardwareSample:
    """Draw static splitters Normal(0.5, sigma^2) for every node of a layout.

    Draws falling outside the open interval (0.005, 0.995) are redrawn.
    sigma = 0 gives perfect (0.5, 0.5) splitters and full [0, 1] ranges.
    Deterministic per (layout, sigma, seed).
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0, got %r" % (sigma,))
    rng = np.random.default_rng(seed)
    draws = rng.normal(0.5, sigma, size=(layout.n_nodes, 2))
    bad = (draws <= _SPLITTER_LO) | (draws >= _SPLITTER_HI)
    while bad.any():
        draws[bad] = rng.normal(0.5, sigma, size=int(bad.sum()))
        bad = (draws <= _SPLITTER_LO) | (draws >= _SPLITTER_HI)
    r1 = draws[:, 0]
    r2 = draws[:, 1]
    a = np.sqrt(r1 * r2)
    b = np.sqrt((1.0 - r1) * (1.0 - r2))
    r_min = np.maximum((a - b) ** 2, 0.0)
    r_max = np.minimum((a + b) ** 2, 1.0)
    return HardwareSample(
        layout=layout,
        sigma=float(sigma),
        seed=int(seed),
        r1=r1,
        r2=r2,
        r_min=r_min,
        r_max=r_max,
    )


def base_hardware(hw: HardwareSample) -> HardwareSample:
    """Restrict a hardware sample to the layout without its extra layers."""
    if hw.layout.extra_layers == 0:
        return hw
    base = base_layout(hw.layout)
    k = base.n_nodes
    if hw.layout.nodes[:k] != base.nodes:
        raise ValueError("extra layers are not a suffix of the node order")
    return replace(
        hw,
        layout=base,
        r1=hw.r1[:k],
        r2=hw.r2[:k],
        r_min=hw.r_min[:k],
        r_max=hw.r_max[:k],
    )


# ---------------------------------------------------------------------------
# JSON serialization


def _layout_header(layout: MeshLayout) -> dict:
    return {
        "kind": layout.kind,
        "n": layout.n_modes,
        "extra_layers": layout.extra_layers,
    }


def _load_layout_header(doc: dict, what: str) -> MeshLayout:
    for key in ("kind", "n", "extra_layers", "nodes"):
        if key not in doc:
            raise ValueError("%s file missing field %r" % (what, key))
    layout = layout_for(doc["kind"], int(doc["n"]), int(doc["extra_layers"]))
    if len(doc["nodes"]) != layout.n_nodes:
        raise ValueError(
            "%s file lists %d nodes but the %s layout has %d"
            % (what, len(doc["nodes"]), doc["kind"], layout.n_nodes)
        )
    for rec, node in zip(doc["nodes"], layout.nodes):
        pos = (int(rec["layer"]), int(rec["slot"]), int(rec["top_mode"]))
        if pos != (node.layer, node.slot, node.top_mode):
            raise ValueError(
                "%s file node at %r does not match layout node %r" % (what, pos, node)
            )
    return layout


def save_settings(path, settings: MeshSettings) -> None:
    """Write mesh settings as JSON (see README for the schema)."""
    doc = _layout_header(settings.layout)
    doc["nodes"] = [
        {
            "layer": node.layer,
            "slot": node.slot,
            "top_mode": node.top_mode,
            "R": float(settings.reflectivities[i]),
            "phi": float(settings.phases[i]),
        }
        for i, node in enumerate(settings.layout.nodes)
    ]
    doc["output_phases"] = [float(x) for x in settings.output_phases]
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_settings(path) -> MeshSettings:
    """Read mesh settings written by :func:`save_settings`."""
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("settings file must hold a JSON object")
    layout = _load_layout_header(doc, "settings")
    if "output_phases" not in doc:
        raise ValueError("settings file missing field 'output_phases'")
    r = np.array([float(rec["R"]) for rec in doc["nodes"]])
    phi = np.array([float(rec["phi"]) for rec in doc["nodes"]])
    delta = np.asarray(doc["output_phases"], dtype=float)
    return MeshSettings(layout, r, phi, delta)


def save_hardware(path, hw: HardwareSample) -> None:
    """Write a hardware sample as JSON (see README for the schema)."""
    doc = _layout_header(hw.layout)
    doc["sigma"] = float(hw.sigma)
    doc["seed"] = int(hw.seed)
    doc["nodes"] = [
        {
            "layer": node.layer,
            "slot": node.slot,
            "top_mode": node.top_mode,
            "r1": float(hw.r1[i]),
            "r2": float(hw.r2[i]),
            "Rmin": float(hw.r_min[i]),
            "Rmax": float(hw.r_max[i]),
        }
        for i, node in enumerate(hw.layout.nodes)
    ]
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_hardware(path) -> HardwareSample:
    """Read a hardware sample written by :func:`save_hardware`."""
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("hardware file must hold a JSON object")
    layout = _load_layout_header(doc, "hardware")
    for key in ("sigma", "seed"):
        if key not in doc:
            raise ValueError("hardware file missing field %r" % key)
    r1 = np.array([float(rec["r1"]) for rec in doc["nodes"]])
    r2 = np.array([float(rec["r2"]) for rec in doc["nodes"]])
    r_min = np.array([float(rec["Rmin"]) for rec in doc["nodes"]])
    r_max = np.array([float(rec["Rmax"]) for rec in doc["nodes"]])
    return HardwareSample(
        layout=layout,
        sigma=float(doc["sigma"]),
        seed=int(doc["seed"]),
        r1=r1,
        r2=r2,
        r_min=r_min,
        r_max=r_max,
    )
