"""Simplicial meshes: structured generators and a minimal Gmsh MSH 2.2 reader.

Meshes are immutable after construction; all constructors guarantee positive
cell orientation and consistent boundary facet lists.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

WALL_TAG = "wall"

# Gmsh MSH 2.2 element types admitted by the reader.
_MSH_LINE = 1
_MSH_TRIANGLE = 2
_MSH_TET = 4
_ELEMENT_NODES = {_MSH_LINE: 2, _MSH_TRIANGLE: 3, _MSH_TET: 4}
_ELEMENT_DIM = {_MSH_LINE: 1, _MSH_TRIANGLE: 2, _MSH_TET: 3}
_DIM_ELEMENT = {1: _MSH_LINE, 2: _MSH_TRIANGLE, 3: _MSH_TET}


class MshParseError(ValueError):
    """Malformed MSH input; carries the 1-based offending line number."""

    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(eq=False)
class SimplicialMesh:
    """Conforming simplicial mesh in 2d (triangles) or 3d (tetrahedra).

    Fields
    ------
    dim : 2 or 3
    vertices : (n_vertices, dim) float array
    cells : (n_cells, dim+1) int array, positively oriented
    boundary_facets : list of (vertex index tuple, tag string)
    h : max cell diameter, computed at construction
    """

    dim: int
    vertices: np.ndarray
    cells: np.ndarray
    boundary_facets: list
    h: float = field(init=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(np.asarray(self.vertices, dtype=float))
        self.cells = np.ascontiguousarray(np.asarray(self.cells, dtype=np.int64))
        self.boundary_facets = [
            (tuple(int(v) for v in facet), str(tag)) for facet, tag in self.boundary_facets
        ]
        self.h = mesh_size(self)

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_cells(self):
        return self.cells.shape[0]

    def cell_volumes(self):
        """Signed volumes of all cells (positive for a valid mesh)."""
        pts = self.vertices[self.cells]
        mats = pts[:, 1:, :] - pts[:, :1, :]
        return np.linalg.det(mats) / math.factorial(self.dim)

    def facet_incidence(self):
        """Map sorted facet vertex tuple -> number of incident cells."""
        counts = {}
        for cell in self.cells:
            for facet in itertools.combinations(sorted(int(v) for v in cell), self.dim):
                counts[facet] = counts.get(facet, 0) + 1
        return counts

    def validate(self):
        """Check the structural invariants; raises ValueError on violation."""
        nv = self.num_vertices
        if self.cells.size and (self.cells.min() < 0 or self.cells.max() >= nv):
            raise ValueError("cell vertex index out of range")
        vols = self.cell_volumes()
        if not (vols > 0.0).all():
            bad = int(np.argmin(vols))
            raise ValueError(f"cell {bad} has non-positive volume {vols[bad]:g}")
        counts = self.facet_incidence()
        if any(c > 2 for c in counts.values()):
            raise ValueError("facet shared by more than two cells")
        boundary = {f for f, c in counts.items() if c == 1}
        listed = set()
        for facet, _tag in self.boundary_facets:
            if any(v < 0 or v >= nv for v in facet):
                raise ValueError("boundary facet vertex index out of range")
            key = tuple(sorted(facet))
            if key not in boundary:
                raise ValueError(f"listed boundary facet {facet} is not an exterior facet")
            listed.add(key)
        missing = boundary - listed
        if missing:
            raise ValueError(f"{len(missing)} exterior facets missing from boundary list")


def mesh_size(mesh):
    """Max cell diameter: largest vertex-pair distance within any cell."""
    if mesh.num_cells == 0:
        raise ValueError("empty mesh has no size")
    pts = mesh.vertices[mesh.cells]
    diffs = pts[:, :, None, :] - pts[:, None, :, :]
    return float(np.sqrt((diffs**2).sum(axis=-1).max()))


def _boundary_facet_list(cells, dim, tag=WALL_TAG):
    counts = {}
    for cell in cells:
        for facet in itertools.combinations(sorted(int(v) for v in cell), dim):
            counts[facet] = counts.get(facet, 0) + 1
    return [(facet, tag) for facet in sorted(f for f, c in counts.items() if c == 1)]


def generate_unit_square(n):
    """Uniform triangulation of (0,1)^2: n x n squares, each split by the same diagonal.

    All exterior edges are tagged "wall".
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    coords = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(coords, coords, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    cells = []
    for j in range(n):
        for i in range(n):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            cells.append((a, b, c))  # both CCW, sharing diagonal a-c
            cells.append((a, c, d))
    cells = np.asarray(cells, dtype=np.int64)
    return SimplicialMesh(2, vertices, cells, _boundary_facet_list(cells, 2))


_PERMUTATIONS_3 = tuple(itertools.permutations((0, 1, 2)))


def _perm_sign(perm):
    inversions = sum(
        1 for a, b in itertools.combinations(range(len(perm)), 2) if perm[a] > perm[b]
    )
    return -1 if inversions % 2 else 1


def generate_unit_cube(n):
    """Kuhn subdivision of (0,1)^3: n^3 subcubes, 6 tetrahedra each.

    Each tetrahedron walks from a subcube corner to the opposite corner along
    one axis permutation; all subcubes use the same walks, so faces conform.
    Exterior faces are tagged "wall".
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    coords = np.linspace(0.0, 1.0, n + 1)
    # index (i,j,k) -> flat id with i fastest
    vertices = np.empty(((n + 1) ** 3, 3))
    for flat, (k, j, i) in enumerate(itertools.product(range(n + 1), repeat=3)):
        vertices[flat] = (coords[i], coords[j], coords[k])

    def vid(i, j, k):
        return (k * (n + 1) + j) * (n + 1) + i

    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                for perm in _PERMUTATIONS_3:
                    corner = np.array((i, j, k))
                    path = [corner.copy()]
                    for axis in perm:
                        corner = corner.copy()
                        corner[axis] += 1
                        path.append(corner)
                    tet = [vid(*p) for p in path]
                    if _perm_sign(perm) < 0:
                        tet[2], tet[3] = tet[3], tet[2]
                    cells.append(tuple(tet))
    cells = np.asarray(cells, dtype=np.int64)
    return SimplicialMesh(3, vertices, cells, _boundary_facet_list(cells, 3))


def _decode(source):
    if isinstance(source, bytes):
        return source.decode("ascii")
    if isinstance(source, str):
        return source
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("ascii")
    return data


def import_msh(source):
    """Read an ASCII Gmsh MSH 2.2 file into a SimplicialMesh.

    Supports $MeshFormat/$PhysicalNames/$Nodes/$Elements with 2-node line,
    3-node triangle and 4-node tetrahedron elements only. Cells are the
    highest-dimension simplices present; explicitly listed (dim-1)-elements
    become boundary facets carrying their physical names. Orientation is
    fixed to positive volumes. Unreferenced nodes are dropped.

    Raises MshParseError with a line number on malformed input.
    """
    lines = _decode(source).splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines):
            pos += 1
            stripped = lines[pos - 1].strip()
            if stripped:
                return stripped
        return None

    physical_names = {}
    node_ids = []
    node_coords = []
    elements = []  # (line_no, etype, physical_tag_or_None, node id tuple)

    while True:
        header = next_line()
        if header is None:
            break
        if not header.startswith("$"):
            raise MshParseError(f"expected section header, got {header!r}", pos)
        section = header[1:]
        if section.startswith("End"):
            raise MshParseError(f"unexpected {header}", pos)
        end_marker = "$End" + section

        if section == "MeshFormat":
            fmt = next_line()
            if fmt is None:
                raise MshParseError("unterminated $MeshFormat", pos)
            parts = fmt.split()
            if not parts or not parts[0].startswith("2."):
                raise MshParseError(f"unsupported MSH version {parts[0] if parts else '?'}", pos)
            if len(parts) > 1 and parts[1] != "0":
                raise MshParseError("binary MSH files are not supported", pos)
            if next_line() != end_marker:
                raise MshParseError(f"missing {end_marker}", pos)
        elif section == "PhysicalNames":
            count_line = next_line()
            try:
                count = int(count_line)
            except (TypeError, ValueError):
                raise MshParseError("bad $PhysicalNames count", pos) from None
            for _ in range(count):
                row = next_line()
                if row is None:
                    raise MshParseError("unterminated $PhysicalNames", pos)
                parts = row.split(maxsplit=2)
                if len(parts) != 3:
                    raise MshParseError(f"bad physical name entry {row!r}", pos)
                try:
                    tag = int(parts[1])
                except ValueError:
                    raise MshParseError(f"bad physical tag in {row!r}", pos) from None
                physical_names[tag] = parts[2].strip().strip('"')
            if next_line() != end_marker:
                raise MshParseError(f"missing {end_marker}", pos)
        elif section == "Nodes":
            count_line = next_line()
            try:
                count = int(count_line)
            except (TypeError, ValueError):
                raise MshParseError("bad $Nodes count", pos) from None
            for _ in range(count):
                row = next_line()
                if row is None:
                    raise MshParseError("unterminated $Nodes", pos)
                parts = row.split()
                if len(parts) != 4:
                    raise MshParseError(f"node line needs 'id x y z', got {row!r}", pos)
                try:
                    node_ids.append(int(parts[0]))
                    node_coords.append([float(v) for v in parts[1:]])
                except ValueError:
                    raise MshParseError(f"non-numeric node entry {row!r}", pos) from None
            if next_line() != end_marker:
                raise MshParseError(f"missing {end_marker}", pos)
        elif section == "Elements":
            count_line = next_line()
            try:
                count = int(count_line)
            except (TypeError, ValueError):
                raise MshParseError("bad $Elements count", pos) from None
            for _ in range(count):
                row = next_line()
                if row is None:
                    raise MshParseError("unterminated $Elements", pos)
                parts = row.split()
                try:
                    values = [int(v) for v in parts]
                except ValueError:
                    raise MshParseError(f"non-integer element entry {row!r}", pos) from None
                if len(values) < 3:
                    raise MshParseError(f"element line too short: {row!r}", pos)
                etype, ntags = values[1], values[2]
                if etype not in _ELEMENT_NODES:
                    raise MshParseError(f"unsupported element type {etype}", pos)
                nnodes = _ELEMENT_NODES[etype]
                if len(values) != 3 + ntags + nnodes:
                    raise MshParseError(
                        f"element expects {ntags} tags + {nnodes} nodes: {row!r}", pos
                    )
                physical = values[3] if ntags >= 1 else None
                elements.append((pos, etype, physical, tuple(values[3 + ntags :])))
            if next_line() != end_marker:
                raise MshParseError(f"missing {end_marker}", pos)
        else:
            # unknown section: skip to its end marker
            while True:
                row = next_line()
                if row is None:
                    raise MshParseError(f"unterminated ${section}", pos)
                if row == end_marker:
                    break

    if not node_coords:
        raise MshParseError("no $Nodes section", pos)
    if not elements:
        raise MshParseError("no $Elements section", pos)

    id_to_index = {nid: i for i, nid in enumerate(node_ids)}
    if len(id_to_index) != len(node_ids):
        raise MshParseError("duplicate node ids in $Nodes", pos)

    cell_dim = max(_ELEMENT_DIM[etype] for _, etype, _, _ in elements)
    if cell_dim < 2:
        raise MshParseError("no triangle or tetrahedron elements present", pos)
    facet_dim = cell_dim - 1

    def resolve(nodes, line_no):
        out = []
        for nid in nodes:
            if nid not in id_to_index:
                raise MshParseError(f"element references unknown node id {nid}", line_no)
            out.append(id_to_index[nid])
        return out

    raw_cells = []
    raw_facets = []
    for line_no, etype, physical, nodes in elements:
        edim = _ELEMENT_DIM[etype]
        idx = resolve(nodes, line_no)
        if edim == cell_dim:
            raw_cells.append(idx)
        elif edim == facet_dim:
            tag = physical_names.get(physical, str(physical)) if physical is not None else WALL_TAG
            raw_facets.append((idx, tag))
        # lower-dimension elements (e.g. lines in a tet mesh) are ignored

    # drop unreferenced nodes, renumber
    used = sorted({v for cell in raw_cells for v in cell} | {v for f, _ in raw_facets for v in f})
    remap = {old: new for new, old in enumerate(used)}
    coords = np.asarray(node_coords, dtype=float)[used]
    if cell_dim == 2:
        coords = coords[:, :2]
    cells = np.asarray([[remap[v] for v in cell] for cell in raw_cells], dtype=np.int64)
    facets = [(tuple(remap[v] for v in f), tag) for f, tag in raw_facets]

    # fix orientation to positive signed volume
    pts = coords[cells]
    vols = np.linalg.det(pts[:, 1:, :] - pts[:, :1, :])
    flip = vols < 0
    cells[flip, -1], cells[flip, -2] = cells[flip, -2].copy(), cells[flip, -1].copy()

    mesh = SimplicialMesh(cell_dim, coords, cells, facets)
    mesh.validate()
    return mesh


def export_msh(mesh):
    """Serialize a mesh as ASCII MSH 2.2 (inverse of import_msh up to renumbering)."""
    tags = sorted({tag for _, tag in mesh.boundary_facets})
    tag_ids = {tag: i + 1 for i, tag in enumerate(tags)}
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat"]
    if tags:
        out.append("$PhysicalNames")
        out.append(str(len(tags)))
        for tag in tags:
            out.append(f'{mesh.dim - 1} {tag_ids[tag]} "{tag}"')
        out.append("$EndPhysicalNames")
    out.append("$Nodes")
    out.append(str(mesh.num_vertices))
    for i, p in enumerate(mesh.vertices):
        coords = [float(v) for v in p] + [0.0] * (3 - mesh.dim)
        out.append(f"{i + 1} {coords[0]!r} {coords[1]!r} {coords[2]!r}")
    out.append("$EndNodes")
    out.append("$Elements")
    out.append(str(len(mesh.boundary_facets) + mesh.num_cells))
    eid = 1
    facet_type = _DIM_ELEMENT[mesh.dim - 1]
    for facet, tag in mesh.boundary_facets:
        nodes = " ".join(str(v + 1) for v in facet)
        out.append(f"{eid} {facet_type} 2 {tag_ids[tag]} 0 {nodes}")
        eid += 1
    cell_type = _DIM_ELEMENT[mesh.dim]
    for cell in mesh.cells:
        nodes = " ".join(str(v + 1) for v in cell)
        out.append(f"{eid} {cell_type} 2 0 0 {nodes}")
        eid += 1
    out.append("$EndElements")
    return "\n".join(out) + "\n"
