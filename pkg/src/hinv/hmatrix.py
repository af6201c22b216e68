"""H-matrix container: blockwise compression, matvec, norm bound, storage.

A dense matrix in cluster order is compressed against a block partition by
replacing every far block with its rank-r truncated SVD and copying near
blocks verbatim.  The per-level norm aggregation bounds the global spectral
norm of a partition-structured matrix by C_sp times the sum over levels of
the largest block norm.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .clustering import BlockPartition, Cluster, sparsity_constant
from .dense import LowRankFactor, full_svd


@dataclass
class HBlock:
    tau: Cluster
    sigma: Cluster
    lowrank: LowRankFactor | None  # None for near (dense) blocks
    dense: np.ndarray | None
    error: float = 0.0  # spectral-norm truncation error (sigma_{r+1})

    @property
    def is_far(self) -> bool:
        return self.lowrank is not None


@dataclass
class HMatrix:
    partition: BlockPartition
    N: int
    max_rank: int
    blocks: list[HBlock] = field(default_factory=list)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = np.zeros(self.N)
        for b in self.blocks:
            xs = x[b.sigma.start:b.sigma.end]
            if b.is_far:
                y[b.tau.start:b.tau.end] += b.lowrank.matvec(xs)
            else:
                y[b.tau.start:b.tau.end] += b.dense @ xs
        return y

    def matvec_transpose(self, x: np.ndarray) -> np.ndarray:
        y = np.zeros(self.N)
        for b in self.blocks:
            xt = x[b.tau.start:b.tau.end]
            if b.is_far:
                y[b.sigma.start:b.sigma.end] += b.lowrank.rmatvec(xt)
            else:
                y[b.sigma.start:b.sigma.end] += b.dense.T @ xt
        return y

    def toarray(self) -> np.ndarray:
        A = np.zeros((self.N, self.N))
        for b in self.blocks:
            block = b.lowrank.toarray() if b.is_far else b.dense
            A[b.tau.start:b.tau.end, b.sigma.start:b.sigma.end] = block
        return A

    def dump(self, path) -> None:
        """Plain binary snapshot: per-block header + little-endian f64 payload.

        Header per block: 6 little-endian int64 fields
        (tau_start, tau_end, sigma_start, sigma_end, kind, rank)
        with kind 1 = low-rank (payloads X then Y, row-major), 0 = dense.
        """
        with open(path, "wb") as f:
            f.write(struct.pack("<qq", self.N, len(self.blocks)))
            for b in self.blocks:
                kind = 1 if b.is_far else 0
                rank = b.lowrank.rank if b.is_far else 0
                f.write(struct.pack("<6q", b.tau.start, b.tau.end,
                                    b.sigma.start, b.sigma.end, kind, rank))
                if b.is_far:
                    f.write(np.ascontiguousarray(b.lowrank.X, dtype="<f8").tobytes())
                    f.write(np.ascontiguousarray(b.lowrank.Y, dtype="<f8").tobytes())
                else:
                    f.write(np.ascontiguousarray(b.dense, dtype="<f8").tobytes())


class BlockSvdCache:
    """Per-far-block SVDs of a fixed dense matrix, reused across ranks.

    Rank sweeps re-truncate the same block SVDs instead of recomputing them.
    """

    def __init__(self, dense: np.ndarray, partition: BlockPartition):
        N = partition.tree.N
        if dense.shape != (N, N):
            raise ValueError(f"dense matrix shape {dense.shape} does not match "
                             f"partition size {N}")
        self.partition = partition
        self.N = N
        self._near = [(tau, sigma,
                       dense[tau.start:tau.end, sigma.start:sigma.end].copy())
                      for tau, sigma in partition.near]
        self._far = []
        for tau, sigma in partition.far:
            U, s, Vt = full_svd(dense[tau.start:tau.end, sigma.start:sigma.end])
            self._far.append((tau, sigma, U, s, Vt))

    def truncate(self, r: int) -> HMatrix:
        if r < 0:
            raise ValueError("rank must be non-negative")
        blocks = []
        for tau, sigma, U, s, Vt in self._far:
            k = min(r, s.size)
            lr = LowRankFactor(X=U[:, :k], Y=(Vt[:k, :].T) * s[:k])
            err = float(s[k]) if k < s.size else 0.0
            blocks.append(HBlock(tau=tau, sigma=sigma, lowrank=lr,
                                 dense=None, error=err))
        for tau, sigma, block in self._near:
            blocks.append(HBlock(tau=tau, sigma=sigma, lowrank=None, dense=block))
        return HMatrix(partition=self.partition, N=self.N, max_rank=r, blocks=blocks)


def compress(dense: np.ndarray, partition: BlockPartition, r: int) -> HMatrix:
    """Blockwise rank-r compression of a cluster-ordered dense matrix."""
    return BlockSvdCache(dense, partition).truncate(r)


@dataclass
class NormBoundReport:
    per_level: list[float]
    c_sp: int
    bound: float


def norm_bound(block_norms: list[tuple[Cluster, Cluster, float]],
               partition: BlockPartition) -> NormBoundReport:
    """Level-wise aggregation of blockwise spectral norms into a global bound.

    ``block_norms`` lists (tau, sigma, ||M restricted to tau x sigma||_2);
    blocks of the partition not listed count as zero.  The bound is
    C_sp * sum over levels of the per-level maximum.
    """
    depth = partition.tree.depth
    per_level = [0.0] * (depth + 1)
    for tau, _sigma, nrm in block_norms:
        per_level[tau.level] = max(per_level[tau.level], float(nrm))
    c_sp = sparsity_constant(partition)
    return NormBoundReport(per_level=per_level, c_sp=c_sp,
                           bound=c_sp * sum(per_level))


def storage_stats(H: HMatrix) -> tuple[int, float]:
    """Floats stored by the H-matrix and the ratio versus dense N^2 storage."""
    floats = 0
    for b in H.blocks:
        if b.is_far:
            floats += b.lowrank.rank * (b.tau.size + b.sigma.size)
        else:
            floats += b.tau.size * b.sigma.size
    return floats, floats / float(H.N) ** 2
