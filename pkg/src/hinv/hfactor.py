"""Schur complements and approximate block-triangular factorizations.

The factorization recurses over the cluster tree: leaf diagonal blocks get a
pivot-free dense LU (or Cholesky), internal nodes couple their sons through
the exact Schur complement, and the off-diagonal factor blocks are truncated
to rank r on admissible sub-blocks after the exact recursion has finished.
Full rank therefore reproduces the classical dense factorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .clustering import BlockPartition, Cluster, ClusterTree, descend_blocks
from .dense import (LowRankFactor, NotSpdError, SingularMatrixError, cholesky,
                    full_svd, lu_nopivot)
from .hmatrix import HBlock


def _range_of(obj) -> tuple[int, int]:
    if isinstance(obj, Cluster):
        return obj.start, obj.end
    start, end = obj
    return int(start), int(end)


def schur_complement(A: np.ndarray, tau, sigma) -> np.ndarray:
    """S(tau, sigma) = A[t,s] - A[t,rho] A[rho,rho]^{-1} A[rho,s].

    rho is the contiguous leading range of indices preceding both clusters;
    an empty rho returns the plain restriction A[t,s].
    """
    t0, t1 = _range_of(tau)
    s0, s1 = _range_of(sigma)
    n_rho = min(t0, s0)
    if n_rho == 0:
        return np.array(A[t0:t1, s0:s1], dtype=float)
    Arr = A[:n_rho, :n_rho]
    if np.abs(Arr).max() == 0.0:
        raise SingularMatrixError("leading block numerically singular")
    try:
        lu, piv = sla.lu_factor(Arr)
    except ValueError as exc:
        raise SingularMatrixError(str(exc)) from exc
    if np.abs(np.diag(lu)).min() < 1e-14 * np.abs(Arr).max():
        raise SingularMatrixError("leading block numerically singular")
    correction = A[t0:t1, :n_rho] @ sla.lu_solve((lu, piv), np.array(A[:n_rho, s0:s1]))
    return A[t0:t1, s0:s1] - correction


def schur_recursion_check(A: np.ndarray, tau: Cluster) -> float:
    """Max-norm residual of the son-based Schur recursion at a non-leaf cluster.

    Assembles S(tau, tau) from the Schur complements of the two sons and
    compares against the direct formula; used as a test oracle only.
    """
    if tau.is_leaf:
        raise ValueError("recursion check needs a non-leaf cluster")
    t1, t2 = tau.children
    s11 = schur_complement(A, t1, t1)
    s12 = schur_complement(A, t1, t2)
    s21 = schur_complement(A, t2, t1)
    s22 = schur_complement(A, t2, t2)
    n1 = t1.size
    assembled = np.empty((tau.size, tau.size))
    assembled[:n1, :n1] = s11
    assembled[:n1, n1:] = s12
    assembled[n1:, :n1] = s21
    assembled[n1:, n1:] = s22 + s21 @ np.linalg.solve(s11, s12)
    direct = schur_complement(A, tau, tau)
    return float(np.abs(assembled - direct).max())


@dataclass
class HTriangularFactor:
    """Block-triangular H-factor aligned with a cluster tree.

    Leaf diagonal blocks are dense triangular; each internal cluster owns one
    off-diagonal factor block stored as a list of low-rank / dense sub-blocks
    following the partition's admissibility structure.
    """

    tree: ClusterTree
    orientation: str  # "lower" | "upper"
    unit_diagonal: bool
    diag: dict[int, np.ndarray] = field(default_factory=dict)  # leaf id -> block
    off: dict[int, list[HBlock]] = field(default_factory=dict)  # internal id -> subblocks

    @property
    def N(self) -> int:
        return self.tree.N

    def toarray(self) -> np.ndarray:
        A = np.zeros((self.N, self.N))
        for leaf in self.tree.leaves():
            A[leaf.start:leaf.end, leaf.start:leaf.end] = self.diag[leaf.id]
        for blocks in self.off.values():
            for b in blocks:
                sub = b.lowrank.toarray() if b.is_far else b.dense
                A[b.tau.start:b.tau.end, b.sigma.start:b.sigma.end] = sub
        return A

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = np.zeros(self.N)
        for leaf in self.tree.leaves():
            y[leaf.start:leaf.end] = self.diag[leaf.id] @ x[leaf.start:leaf.end]
        for blocks in self.off.values():
            for b in blocks:
                xs = x[b.sigma.start:b.sigma.end]
                if b.is_far:
                    y[b.tau.start:b.tau.end] += b.lowrank.matvec(xs)
                else:
                    y[b.tau.start:b.tau.end] += b.dense @ xs
        return y

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Forward/backward substitution through the block structure."""
        x = np.array(rhs, dtype=float)
        lower = self.orientation == "lower"

        def apply_off(cluster: Cluster) -> None:
            for b in self.off.get(cluster.id, ()):
                xs = x[b.sigma.start:b.sigma.end]
                upd = b.lowrank.matvec(xs) if b.is_far else b.dense @ xs
                x[b.tau.start:b.tau.end] -= upd

        def descend(cluster: Cluster) -> None:
            if cluster.is_leaf:
                block = self.diag[cluster.id]
                if self.unit_diagonal is False and np.abs(np.diag(block)).min() == 0.0:
                    raise SingularMatrixError("zero diagonal entry in factor")
                x[cluster.start:cluster.end] = sla.solve_triangular(
                    block, x[cluster.start:cluster.end], lower=lower,
                    unit_diagonal=self.unit_diagonal)
                return
            c1, c2 = cluster.children
            if lower:
                descend(c1)
                apply_off(cluster)
                descend(c2)
            else:
                descend(c2)
                apply_off(cluster)
                descend(c1)

        descend(self.tree.root)
        return x


def triangular_solve(factor: HTriangularFactor, rhs: np.ndarray) -> np.ndarray:
    if rhs.shape[0] != factor.N:
        raise ValueError("rhs length does not match factor size")
    return factor.solve(rhs)


class _OffBlockData:
    """Exact off-diagonal factor block with cached sub-block SVDs."""

    def __init__(self, row: Cluster, col: Cluster, exact: np.ndarray,
                 partition: BlockPartition):
        self.subblocks = []  # (tau, sigma, admissible, payload)
        for tau, sigma, admissible in descend_blocks(row, col, partition.eta,
                                                     partition.mode):
            sub = exact[tau.start - row.start:tau.end - row.start,
                        sigma.start - col.start:sigma.end - col.start]
            if admissible:
                self.subblocks.append((tau, sigma, True, full_svd(sub)))
            else:
                self.subblocks.append((tau, sigma, False, sub.copy()))

    def truncate(self, r: int | None) -> list[HBlock]:
        out = []
        for tau, sigma, admissible, payload in self.subblocks:
            if admissible:
                U, s, Vt = payload
                k = s.size if r is None else min(r, s.size)
                lr = LowRankFactor(X=U[:, :k], Y=(Vt[:k, :].T) * s[:k])
                err = float(s[k]) if k < s.size else 0.0
                out.append(HBlock(tau=tau, sigma=sigma, lowrank=lr,
                                  dense=None, error=err))
            else:
                out.append(HBlock(tau=tau, sigma=sigma, lowrank=None,
                                  dense=payload))
        return out


class HFactorization:
    """Exact recursive block factorization plus rank-truncated H-factors.

    The recursion computes the exact factors (so the dense L/U anchors are
    available for verification); ``factors(r)`` then assembles H-factors with
    admissible off-diagonal sub-blocks truncated to rank r (None = exact).
    """

    def __init__(self, A: np.ndarray, tree: ClusterTree,
                 partition: BlockPartition, symmetric: bool = False):
        A = np.asarray(A, dtype=float)
        if A.shape != (tree.N, tree.N):
            raise ValueError("matrix size does not match cluster tree")
        if symmetric and not np.allclose(A, A.T, atol=1e-12 * max(1.0, np.abs(A).max())):
            raise NotSpdError("Cholesky factorization requires a symmetric matrix")
        self.tree = tree
        self.partition = partition
        self.symmetric = symmetric
        self.L_dense = np.zeros_like(A)
        self.U_dense = np.zeros_like(A)
        self._off_lower: dict[int, _OffBlockData] = {}
        self._off_upper: dict[int, _OffBlockData] = {}
        self._factor_cluster(tree.root, np.array(A))

    def _factor_cluster(self, cluster: Cluster, S: np.ndarray):
        """Factor the exact Schur complement S(cluster, cluster)."""
        o = cluster.start
        if cluster.is_leaf:
            if self.symmetric:
                # Schur updates are symmetric up to roundoff; resymmetrize.
                C = cholesky(0.5 * (S + S.T))
                L, U = C, C.T
            else:
                L, U = lu_nopivot(S)
            self.L_dense[o:cluster.end, o:cluster.end] = L
            self.U_dense[o:cluster.end, o:cluster.end] = U
            return L, U
        c1, c2 = cluster.children
        n1 = c1.size
        s11, s12 = S[:n1, :n1], S[:n1, n1:]
        s21, s22 = S[n1:, :n1], S[n1:, n1:]
        L1, U1 = self._factor_cluster(c1, s11)
        if self.symmetric:
            U12 = sla.solve_triangular(L1, s12, lower=True)
            L21 = U12.T
        else:
            U12 = sla.solve_triangular(L1, s12, lower=True, unit_diagonal=True)
            L21 = sla.solve_triangular(U1.T, s21.T, lower=True).T
        L2, U2 = self._factor_cluster(c2, s22 - L21 @ U12)

        self.L_dense[c2.start:c2.end, c1.start:c1.end] = L21
        self.U_dense[c1.start:c1.end, c2.start:c2.end] = U12
        self._off_lower[cluster.id] = _OffBlockData(c2, c1, L21, self.partition)
        self._off_upper[cluster.id] = _OffBlockData(c1, c2, U12, self.partition)

        nL = np.zeros((cluster.size, cluster.size))
        nU = np.zeros((cluster.size, cluster.size))
        nL[:n1, :n1], nL[n1:, :n1], nL[n1:, n1:] = L1, L21, L2
        nU[:n1, :n1], nU[:n1, n1:], nU[n1:, n1:] = U1, U12, U2
        return nL, nU

    def factors(self, r: int | None) -> tuple[HTriangularFactor, HTriangularFactor]:
        unit = not self.symmetric
        L = HTriangularFactor(tree=self.tree, orientation="lower",
                              unit_diagonal=unit)
        U = HTriangularFactor(tree=self.tree, orientation="upper",
                              unit_diagonal=False)
        for leaf in self.tree.leaves():
            L.diag[leaf.id] = self.L_dense[leaf.start:leaf.end, leaf.start:leaf.end]
            U.diag[leaf.id] = self.U_dense[leaf.start:leaf.end, leaf.start:leaf.end]
        for cid, data in self._off_lower.items():
            L.off[cid] = data.truncate(r)
        for cid, data in self._off_upper.items():
            U.off[cid] = data.truncate(r)
        return L, U

    def lower_inverse_norm(self, cluster: Cluster, seed: int = 42) -> float:
        """Power-iteration estimate of ||L(cluster)^{-1}||_2 via solves."""
        from .dense import spectral_norm

        block = self.L_dense[cluster.start:cluster.end, cluster.start:cluster.end]
        unit = not self.symmetric

        def mv(x):
            return sla.solve_triangular(block, x, lower=True, unit_diagonal=unit)

        def rmv(x):
            return sla.solve_triangular(block.T, x, lower=False, unit_diagonal=unit)

        return spectral_norm(mv, rmv, cluster.size, seed=seed).value


def hlu_factorize(A: np.ndarray, tree: ClusterTree, partition: BlockPartition,
                  r: int | None) -> tuple[HTriangularFactor, HTriangularFactor]:
    """Rank-truncated block LU; ``r=None`` keeps the factors exact."""
    return HFactorization(A, tree, partition, symmetric=False).factors(r)


def hcholesky_factorize(A: np.ndarray, tree: ClusterTree,
                        partition: BlockPartition, r: int | None) -> HTriangularFactor:
    """Symmetric specialization: returns the lower factor with U = C^T."""
    fact = HFactorization(A, tree, partition, symmetric=True)
    C, _ = fact.factors(r)
    return C
