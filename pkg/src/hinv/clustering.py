"""Geometric-bisection cluster trees and far/near block partitions.

Clusters are built by halving the tight coordinate box of the contained DOF
nodes along its longest axis (median-split fallback when one side would be
empty).  Each cluster stores an axis-aligned hyper-cube that covers the full
hat-function supports of its DOFs; admissibility compares cube diameters with
the Euclidean distance between cubes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fem import DofMap
from .mesh import Mesh

STRONG = "strong"
WEAK = "weak"


@dataclass
class Cluster:
    start: int
    end: int  # exclusive, range in the permuted ordering
    center: np.ndarray
    side: float  # side length of the covering hyper-cube
    lo: np.ndarray  # tight bounding box of the contained hat-function supports
    hi: np.ndarray
    level: int
    children: tuple["Cluster", "Cluster"] | tuple = ()
    id: int = -1

    @property
    def size(self) -> int:
        return self.end - self.start

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def diameter(self) -> float:
        return self.side * np.sqrt(len(self.center))


@dataclass
class ClusterTree:
    root: Cluster
    perm: np.ndarray  # perm[new_position] = old dof index
    n_leaf: int
    clusters: list[Cluster] = field(default_factory=list)

    @property
    def N(self) -> int:
        return self.root.size

    @property
    def depth(self) -> int:
        return max(c.level for c in self.clusters)

    def leaves(self) -> list[Cluster]:
        return [c for c in self.clusters if c.is_leaf]


def _support_boxes(mesh: Mesh, dofmap: DofMap) -> tuple[np.ndarray, np.ndarray]:
    """Per-free-DOF bounding boxes of the hat-function supports."""
    lo = np.full((mesh.num_nodes, mesh.dim), np.inf)
    hi = np.full((mesh.num_nodes, mesh.dim), -np.inf)
    for el in mesh.elements:
        verts = mesh.nodes[el]
        emin, emax = verts.min(axis=0), verts.max(axis=0)
        for node in el:
            np.minimum(lo[node], emin, out=lo[node])
            np.maximum(hi[node], emax, out=hi[node])
    return lo[dofmap.free_nodes], hi[dofmap.free_nodes]


def build_cluster_tree(mesh: Mesh, dofmap: DofMap, n_leaf: int) -> ClusterTree:
    """Binary geometric-bisection tree over the free DOFs."""
    if n_leaf < 1:
        raise ValueError("n_leaf must be >= 1")
    coords = mesh.nodes[dofmap.free_nodes]
    if coords.shape[0] != len({tuple(x) for x in coords}):
        raise ValueError("duplicate DOF coordinates")
    sup_lo, sup_hi = _support_boxes(mesh, dofmap)

    perm = np.empty(dofmap.N, dtype=np.int64)
    clusters: list[Cluster] = []

    def make_cluster(dofs: np.ndarray, start: int, level: int) -> Cluster:
        # Stored box: smallest cube covering all hat-function supports.
        lo = sup_lo[dofs].min(axis=0)
        hi = sup_hi[dofs].max(axis=0)
        side = float((hi - lo).max())
        center = (lo + hi) / 2.0
        cl = Cluster(start=start, end=start + dofs.size, center=center,
                     side=side, lo=lo, hi=hi, level=level, id=len(clusters))
        clusters.append(cl)

        if dofs.size <= n_leaf:
            perm[start:start + dofs.size] = dofs
            return cl

        # Split decision uses the tight box of the node coordinates.
        pts = coords[dofs]
        tlo, thi = pts.min(axis=0), pts.max(axis=0)
        axis = int(np.argmax(thi - tlo))
        mid = (tlo[axis] + thi[axis]) / 2.0
        mask = pts[:, axis] <= mid
        if mask.all() or not mask.any():
            # Midpoint left a side empty: fall back to a median split.
            order = np.argsort(pts[:, axis], kind="stable")
            half = dofs.size // 2
            mask = np.zeros(dofs.size, dtype=bool)
            mask[order[:half]] = True
        left, right = dofs[mask], dofs[~mask]
        c1 = make_cluster(left, start, level + 1)
        c2 = make_cluster(right, start + left.size, level + 1)
        cl.children = (c1, c2)
        return cl

    root = make_cluster(np.arange(dofmap.N, dtype=np.int64), 0, 0)
    return ClusterTree(root=root, perm=perm, n_leaf=n_leaf, clusters=clusters)


def box_distance(a: Cluster, b: Cluster) -> float:
    """Best achievable Euclidean distance between covering cubes of a and b.

    The covering cube of each cluster may slide along axes with slack (side
    larger than the support extent); placing the slack away from the other
    cluster realizes the distance between the tight support boxes, which is
    what this returns (0 if the support boxes overlap).
    """
    gap = np.maximum(a.lo - b.hi, b.lo - a.hi)
    return float(np.linalg.norm(np.maximum(gap, 0.0)))


def is_admissible(box_tau: Cluster, box_sigma: Cluster, eta: float,
                  mode: str = STRONG) -> bool:
    """Admissibility: {max|min} cube diameter <= eta * distance."""
    d_tau, d_sigma = box_tau.diameter(), box_sigma.diameter()
    agg = max(d_tau, d_sigma) if mode == STRONG else min(d_tau, d_sigma)
    return agg <= eta * box_distance(box_tau, box_sigma)


@dataclass
class BlockPartition:
    tree: ClusterTree
    eta: float
    mode: str
    far: list[tuple[Cluster, Cluster]] = field(default_factory=list)
    near: list[tuple[Cluster, Cluster]] = field(default_factory=list)

    def blocks(self):
        for pair in self.far:
            yield pair + (True,)
        for pair in self.near:
            yield pair + (False,)

    def dump(self) -> str:
        lines = []
        for tau, sigma, is_far in self.blocks():
            lines.append(f"{tau.level} {tau.start} {tau.end} "
                         f"{sigma.start} {sigma.end} {'far' if is_far else 'near'}")
        return "\n".join(lines) + "\n"


def descend_blocks(tau: Cluster, sigma: Cluster, eta: float, mode: str):
    """Yield (tau', sigma', admissible) leaf blocks of the standard descent.

    Emit an admissible pair as soon as the test passes; otherwise recurse on
    the children of the coarser cluster (both when the levels match); a pair
    of leaves that is still inadmissible becomes a near block.
    """
    if is_admissible(tau, sigma, eta, mode):
        yield (tau, sigma, True)
        return
    split_tau = not tau.is_leaf and (tau.level <= sigma.level or sigma.is_leaf)
    split_sigma = not sigma.is_leaf and (sigma.level <= tau.level or tau.is_leaf)
    if not split_tau and not split_sigma:
        yield (tau, sigma, False)
        return
    taus = tau.children if split_tau else (tau,)
    sigmas = sigma.children if split_sigma else (sigma,)
    for t in taus:
        for s in sigmas:
            yield from descend_blocks(t, s, eta, mode)


def build_partition(tree: ClusterTree, eta: float, mode: str = STRONG) -> BlockPartition:
    """Far/near partition of I x I via descend-until-admissible-or-leaf."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if mode not in (STRONG, WEAK):
        raise ValueError(f"unknown admissibility mode: {mode!r}")
    part = BlockPartition(tree=tree, eta=eta, mode=mode)
    for tau, sigma, admissible in descend_blocks(tree.root, tree.root, eta, mode):
        (part.far if admissible else part.near).append((tau, sigma))
    return part


def sparsity_constant(partition: BlockPartition) -> int:
    """Maximum number of far-field partners over all clusters (0 if none)."""
    if not partition.far:
        return 0
    row: dict[int, int] = {}
    col: dict[int, int] = {}
    for tau, sigma in partition.far:
        row[tau.id] = row.get(tau.id, 0) + 1
        col[sigma.id] = col.get(sigma.id, 0) + 1
    return max(max(row.values()), max(col.values()))
