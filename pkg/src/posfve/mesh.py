"""Quadrilateral meshes, random distortion, and the overlapping diagonal dual."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, InvalidMesh
from .geometry import cross2, shoelace_area, triangle_area

Domain = tuple  # (x0, x1, y0, y1)


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def convexity_crosses(vertices):
    """Cross products of consecutive edge vectors at each corner, shape ``(..., 4)``."""
    v = np.asarray(vertices, dtype=float)
    e = np.roll(v, -1, axis=-2) - v
    return cross2(e, np.roll(e, -1, axis=-2))


def element_diameters(vertices):
    v = np.asarray(vertices, dtype=float)
    sides = np.linalg.norm(np.roll(v, -1, axis=-2) - v, axis=-1)
    diags = np.stack(
        [np.linalg.norm(v[..., 2, :] - v[..., 0, :], axis=-1),
         np.linalg.norm(v[..., 3, :] - v[..., 1, :], axis=-1)],
        axis=-1,
    )
    return np.maximum(sides.max(axis=-1), diags.max(axis=-1))


@dataclass(frozen=True)
class QuadMesh:
    """Counterclockwise quadrilateral mesh.

    ``boundary_edges`` rows are ``(node_a, node_b, elem)`` with the domain on
    the left of a -> b, so the outward normal is the clockwise rotation of
    the edge vector.
    """

    nodes: np.ndarray
    elems: np.ndarray
    boundary_edges: np.ndarray
    level: int = 0
    domain: Domain | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen(self.nodes, float))
        object.__setattr__(self, "elems", _frozen(self.elems, np.int64))
        object.__setattr__(self, "boundary_edges", _frozen(self.boundary_edges, np.int64).reshape(-1, 3))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elems(self) -> int:
        return len(self.elems)

    @property
    def elem_vertices(self) -> np.ndarray:
        return self.nodes[self.elems]

    @property
    def h(self) -> float:
        return float(element_diameters(self.elem_vertices).max())

    @property
    def area(self) -> float:
        return float(shoelace_area(self.elem_vertices).sum())

    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_edges[:, :2])

    def is_boundary(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary_edges[:, :2].ravel()] = True
        return mask


def validate_mesh(mesh: QuadMesh) -> None:
    """Raise :class:`InvalidMesh` unless every element is strictly convex and counterclockwise."""
    cr = convexity_crosses(mesh.elem_vertices)
    bad = np.flatnonzero(np.any(cr <= 0.0, axis=1))
    if bad.size:
        raise InvalidMesh(f"{bad.size} non-convex or clockwise element(s), first: {bad[0]}")


def generate_uniform(nx: int, ny: int, domain: Domain = (0.0, 1.0, 0.0, 1.0), level: int = 0) -> QuadMesh:
    """Tensor-product mesh; node (i, j) has index ``j * (nx + 1) + i``."""
    if nx < 1 or ny < 1:
        raise InvalidArgument(f"need nx, ny >= 1, got {nx}, {ny}")
    x0, x1, y0, y1 = (float(c) for c in domain)
    if not (x1 > x0 and y1 > y0):
        raise InvalidArgument(f"degenerate domain {domain}")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    I, J = np.meshgrid(np.arange(nx), np.arange(ny))
    I, J = I.ravel(), J.ravel()
    elems = np.column_stack([nid(I, J), nid(I + 1, J), nid(I + 1, J + 1), nid(I, J + 1)])

    def eid(i, j):
        return j * nx + i

    edges = []
    for i in range(nx):
        edges.append((nid(i, 0), nid(i + 1, 0), eid(i, 0)))
    for j in range(ny):
        edges.append((nid(nx, j), nid(nx, j + 1), eid(nx - 1, j)))
    for i in reversed(range(nx)):
        edges.append((nid(i + 1, ny), nid(i, ny), eid(i, ny - 1)))
    for j in reversed(range(ny)):
        edges.append((nid(0, j + 1), nid(0, j), eid(0, j)))
    return QuadMesh(nodes, elems, np.array(edges), level=level, domain=(x0, x1, y0, y1))


@dataclass(frozen=True)
class DistortionConfig:
    """Random interior-node perturbation.

    Nodes lying on one of the ``fixed_x`` (``fixed_y``) lines keep their x (y)
    coordinate, so material interfaces stay resolved by element edges.
    """

    theta: float = 0.2
    seed: int = 0
    max_retries: int = 100
    fixed_x: tuple = ()
    fixed_y: tuple = ()

    def __post_init__(self):
        if not (0.0 <= self.theta < 0.5):
            raise InvalidArgument(f"theta must lie in [0, 0.5), got {self.theta}")
        if self.max_retries < 1:
            raise InvalidArgument("max_retries must be >= 1")


def _node_elements(mesh: QuadMesh) -> list[list[int]]:
    incident = [[] for _ in range(mesh.n_nodes)]
    for k, quad in enumerate(mesh.elems):
        for p in quad:
            incident[p].append(k)
    return incident


def _min_incident_edge(mesh: QuadMesh) -> np.ndarray:
    v = mesh.elem_vertices
    sides = np.linalg.norm(np.roll(v, -1, axis=1) - v, axis=2)
    s = np.full(mesh.n_nodes, np.inf)
    # side l of element k joins local vertices l and l+1
    for l in range(4):
        np.minimum.at(s, mesh.elems[:, l], sides[:, l])
        np.minimum.at(s, mesh.elems[:, (l + 1) % 4], sides[:, l])
    return s


def _quad_convex(pts) -> bool:
    for c in range(4):
        ax, ay = pts[c]
        bx, by = pts[(c + 1) % 4]
        cx, cy = pts[(c + 2) % 4]
        if (bx - ax) * (cy - by) - (by - ay) * (cx - bx) <= 0.0:
            return False
    return True


def distort_random(mesh: QuadMesh, cfg: DistortionConfig) -> QuadMesh:
    """Perturb interior nodes by uniform offsets in ``[-theta*s, theta*s]`` per coordinate.

    ``s`` is the shortest edge incident to the node in the input mesh. Nodes
    are visited in index order; a draw that would make an incident element
    non-convex is rejected and redrawn, and after ``max_retries`` rejections
    the node stays put.
    """
    if cfg.theta == 0.0:
        return QuadMesh(mesh.nodes.copy(), mesh.elems, mesh.boundary_edges, mesh.level, mesh.domain)
    rng = np.random.default_rng(cfg.seed)
    nodes = mesh.nodes.copy()
    on_boundary = mesh.is_boundary()
    incident = _node_elements(mesh)
    spacing = _min_incident_edge(mesh)
    scale = float(np.abs(nodes).max()) or 1.0
    tol = 1e-12 * scale
    fixed_x = np.zeros(mesh.n_nodes, dtype=bool)
    fixed_y = np.zeros(mesh.n_nodes, dtype=bool)
    for c in cfg.fixed_x:
        fixed_x |= np.abs(nodes[:, 0] - c) <= tol
    for c in cfg.fixed_y:
        fixed_y |= np.abs(nodes[:, 1] - c) <= tol
    elems = mesh.elems.tolist()
    for p in range(mesh.n_nodes):
        if on_boundary[p]:
            continue
        amp = cfg.theta * spacing[p]
        origin = nodes[p].copy()
        for _ in range(cfg.max_retries):
            dx, dy = rng.uniform(-amp, amp, size=2)
            if fixed_x[p]:
                dx = 0.0
            if fixed_y[p]:
                dy = 0.0
            nodes[p] = origin[0] + dx, origin[1] + dy
            if all(_quad_convex(nodes[elems[k]].tolist()) for k in incident[p]):
                break
        else:
            nodes[p] = origin
    return QuadMesh(nodes, mesh.elems, mesh.boundary_edges, mesh.level, mesh.domain)


@dataclass(frozen=True)
class DualPartition:
    """Overlapping control volumes built from element diagonals.

    Entry ``e`` of the flat arrays describes the part of node ``node[e]``'s
    control volume inside element ``elem[e]``: the triangle cut off by the
    diagonal that does not pass through the node. ``opposite[e]`` is the
    diagonally opposite vertex of that element.
    """

    n_nodes: int
    elem: np.ndarray
    local: np.ndarray
    node: np.ndarray
    opposite: np.ndarray
    tri_area: np.ndarray
    tri_centroid: np.ndarray
    dual_area: np.ndarray
    bnd_node: np.ndarray
    bnd_edge: np.ndarray
    bnd_length: np.ndarray
    _by_node: list = field(default_factory=list, repr=False, compare=False)

    def entries(self, p: int) -> list[tuple[int, int, int]]:
        """``(elem, local index, opposite node)`` for every element incident to ``p``."""
        return [(int(self.elem[e]), int(self.local[e]), int(self.opposite[e])) for e in self._by_node[p]]

    def boundary_segments(self, p: int) -> list[tuple[int, float]]:
        idx = np.flatnonzero(self.bnd_node == p)
        return [(int(self.bnd_edge[i]), float(self.bnd_length[i])) for i in idx]


def build_dual(mesh: QuadMesh) -> DualPartition:
    validate_mesh(mesh)
    v = mesh.elem_vertices
    n_el = mesh.n_elems
    prev = np.roll(v, 1, axis=1)
    nxt = np.roll(v, -1, axis=1)
    areas = triangle_area(v, nxt, prev)
    centroids = (v + nxt + prev) / 3.0

    elem = np.repeat(np.arange(n_el), 4)
    local = np.tile(np.arange(4), n_el)
    node = mesh.elems.ravel()
    opposite = mesh.elems[elem, (local + 2) % 4]
    dual_area = np.bincount(node, weights=areas.ravel(), minlength=mesh.n_nodes)
    if np.any(dual_area <= 0.0):
        raise InvalidMesh("node without control volume")

    be = mesh.boundary_edges
    lengths = np.linalg.norm(mesh.nodes[be[:, 1]] - mesh.nodes[be[:, 0]], axis=1)
    bnd_node = np.concatenate([be[:, 0], be[:, 1]])
    bnd_edge = np.concatenate([np.arange(len(be)), np.arange(len(be))])
    bnd_length = np.concatenate([lengths, lengths])

    by_node = [[] for _ in range(mesh.n_nodes)]
    for e, p in enumerate(node.tolist()):
        by_node[p].append(e)
    return DualPartition(
        n_nodes=mesh.n_nodes,
        elem=_frozen(elem, np.int64),
        local=_frozen(local, np.int64),
        node=_frozen(node, np.int64),
        opposite=_frozen(opposite, np.int64),
        tri_area=_frozen(areas.ravel(), float),
        tri_centroid=_frozen(centroids.reshape(-1, 2), float),
        dual_area=_frozen(dual_area, float),
        bnd_node=_frozen(bnd_node, np.int64),
        bnd_edge=_frozen(bnd_edge, np.int64),
        bnd_length=_frozen(bnd_length, float),
        _by_node=by_node,
    )


@dataclass(frozen=True)
class RegularityReport:
    max_aspect: float
    max_abs_cos: float
    min_area: float
    valid: bool
    flagged: bool


def check_regularity(mesh: QuadMesh, cos_limit: float = 0.999) -> RegularityReport:
    """Shape-regularity indicators; ``aspect`` is h_K over the shortest side."""
    v = mesh.elem_vertices
    e_out = np.roll(v, -1, axis=1) - v
    e_in = np.roll(v, 1, axis=1) - v
    sides = np.linalg.norm(e_out, axis=2)
    norm_prod = sides * np.roll(sides, 1, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = np.einsum("kij,kij->ki", e_out, e_in) / norm_prod
        aspect = element_diameters(v) / sides.min(axis=1)
    cos = np.where(np.isfinite(cos), cos, 1.0)
    areas = shoelace_area(v)
    valid = bool(np.all(convexity_crosses(v) > 0.0))
    max_abs_cos = float(np.abs(cos).max())
    return RegularityReport(
        max_aspect=float(np.nanmax(np.where(np.isfinite(aspect), aspect, np.inf))),
        max_abs_cos=max_abs_cos,
        min_area=float(areas.min()),
        valid=valid,
        flagged=(not valid) or max_abs_cos >= cos_limit,
    )


def write_mesh(mesh: QuadMesh, path) -> None:
    lines = [f"quadmesh {mesh.n_nodes} {mesh.n_elems}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    lines += [" ".join(str(i) for i in quad) for quad in mesh.elems.tolist()]
    lines.append(f"boundary {len(mesh.boundary_edges)}")
    lines += [" ".join(str(i) for i in edge) for edge in mesh.boundary_edges.tolist()]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def read_mesh(path) -> QuadMesh:
    tokens = Path(path).read_text().split("\n")
    tokens = [t.split() for t in tokens if t.strip()]
    head = tokens[0]
    if len(head) != 3 or head[0] != "quadmesh":
        raise InvalidMesh(f"bad header in {path}: {' '.join(head)}")
    n_nodes, n_elems = int(head[1]), int(head[2])
    pos = 1
    nodes = np.array([[float(t) for t in row] for row in tokens[pos:pos + n_nodes]])
    pos += n_nodes
    elems = np.array([[int(t) for t in row] for row in tokens[pos:pos + n_elems]], dtype=np.int64)
    pos += n_elems
    if tokens[pos][0] != "boundary":
        raise InvalidMesh(f"missing boundary section in {path}")
    n_bnd = int(tokens[pos][1])
    edges = np.array([[int(t) for t in row] for row in tokens[pos + 1:pos + 1 + n_bnd]], dtype=np.int64)
    mesh = QuadMesh(nodes, elems, edges.reshape(-1, 3))
    validate_mesh(mesh)
    return mesh
