"""Experiment driver: rank sweeps, error measurement, decay-rate fits, CSV.

For a named problem the driver assembles the stiffness matrix, builds the
cluster tree and block partition, computes the dense inverse, and sweeps the
block rank while measuring either ||I - A B_H||_2 (inverse compression) or
the relative factorization residual (LU / Cholesky targets).  Log-errors are
fitted against r^s by least squares to extract the decay rate.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .clustering import STRONG, build_cluster_tree, build_partition
from .dense import inverse, spectral_norm, spectral_norm_dense
from .fem import DofMap, PdeCoefficients, assemble, assemble_convdiff, assemble_neumann
from .hfactor import HFactorization
from .hmatrix import BlockSvdCache, storage_stats
from .mesh import build_problem_mesh

DENSE_BUDGET = 5000
ERROR_FLOOR = 1e-14

PROBLEMS = ("mixed-2d", "neumann-2d", "mixed-3d", "neumann-3d", "convdiff-lshape")


class BudgetExceededError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    problem: str
    n: int
    eta: float = 2.0
    n_leaf: int = 25
    mode: str = STRONG
    ranks: list[int] = field(default_factory=lambda: list(range(1, 17)))
    target: str = "inverse"  # inverse | lu | cholesky
    seed: int = 42

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.target not in ("inverse", "lu", "cholesky"):
            raise ValueError(f"unknown target {self.target!r}")
        if any(b <= a for a, b in zip(self.ranks, self.ranks[1:])) or not self.ranks:
            raise ValueError("ranks must be non-empty and strictly increasing")

    @property
    def dim(self) -> int:
        return 3 if self.problem.endswith("3d") else 2


@dataclass
class ExperimentRecord:
    rank: int
    error: float
    seconds: float
    storage_floats: int
    converged: bool = True


@dataclass
class RateFit:
    s: float  # exponent of the model exp(-b * r^s)
    b: float
    prefactor: float
    correlation: float
    n_used: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    N: int
    depth: int
    c_sp: int
    records: list[ExperimentRecord]
    fits: list[RateFit]


def assemble_problem(problem: str, n: int):
    """Mesh, DOF map and assembled matrix for a named experiment problem."""
    mesh = build_problem_mesh(problem, n)
    dofmap = DofMap.from_mesh(mesh)
    if problem.startswith("neumann"):
        A = assemble_neumann(mesh, np.eye(mesh.dim))
    elif problem == "convdiff-lshape":
        A = assemble_convdiff(mesh, 1e-2, dofmap)
    else:
        A = assemble(mesh, PdeCoefficients(diffusion=np.eye(mesh.dim)), dofmap)
    return mesh, dofmap, A


def fit_rate(records: list[ExperimentRecord], s: float) -> RateFit:
    """Least squares of ln(error) = ln(C) - b * r^s above the error floor."""
    pts = [(rec.rank, rec.error) for rec in records if rec.error > ERROR_FLOOR]
    if len(pts) < 3:
        raise ValueError("need at least 3 records above the error floor")
    x = np.array([r ** s for r, _ in pts])
    y = np.log(np.array([e for _, e in pts]))
    slope, intercept = np.polyfit(x, y, 1)
    corr = float(np.corrcoef(x, y)[0, 1])
    return RateFit(s=s, b=float(-slope), prefactor=float(math.exp(intercept)),
                   correlation=corr, n_used=len(pts))


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    config.validate()
    mesh, dofmap, A = assemble_problem(config.problem, config.n)
    if dofmap.N > DENSE_BUDGET:
        raise BudgetExceededError(
            f"N = {dofmap.N} exceeds the dense-inverse budget {DENSE_BUDGET}")

    tree = build_cluster_tree(mesh, dofmap, config.n_leaf)
    partition = build_partition(tree, config.eta, config.mode)
    from .clustering import sparsity_constant
    c_sp = sparsity_constant(partition)

    A_perm = A.permuted(tree.perm)
    A_dense = A_perm.toarray()
    records: list[ExperimentRecord] = []

    if config.target == "inverse":
        A_inv = inverse(A_dense, residual_tol=1e-8)
        cache = BlockSvdCache(A_inv, partition)
        for r in config.ranks:
            t0 = time.perf_counter()
            H = cache.truncate(r)

            def mv(x):
                return x - A_perm.matvec(H.matvec(x))

            def rmv(x):
                return x - H.matvec_transpose(A_perm.rmatvec(x))

            est = spectral_norm(mv, rmv, tree.N, seed=config.seed)
            floats, _ = storage_stats(H)
            records.append(ExperimentRecord(
                rank=r, error=est.value, seconds=time.perf_counter() - t0,
                storage_floats=floats, converged=est.converged))
    else:
        symmetric = config.target == "cholesky"
        fact = HFactorization(A_dense, tree, partition, symmetric=symmetric)
        norm_a = spectral_norm_dense(A_dense, seed=config.seed).value
        for r in config.ranks:
            t0 = time.perf_counter()
            L, U = fact.factors(r)
            if symmetric:
                resid = A_dense - L.toarray() @ L.toarray().T
            else:
                resid = A_dense - L.toarray() @ U.toarray()
            est = spectral_norm_dense(resid, seed=config.seed)
            floats = _factor_storage(L) + (0 if symmetric else _factor_storage(U))
            records.append(ExperimentRecord(
                rank=r, error=est.value / norm_a,
                seconds=time.perf_counter() - t0,
                storage_floats=floats, converged=est.converged))

    fits = []
    for s in dict.fromkeys((1.0, 1.0 / (config.dim + 1), 0.5)):
        try:
            fits.append(fit_rate(records, s))
        except ValueError:
            pass
    return ExperimentResult(config=config, N=tree.N, depth=tree.depth,
                            c_sp=c_sp, records=records, fits=fits)


def _factor_storage(factor) -> int:
    floats = sum(b.size ** 2 for b in factor.tree.leaves())
    for blocks in factor.off.values():
        for b in blocks:
            if b.is_far:
                floats += b.lowrank.rank * (b.tau.size + b.sigma.size)
            else:
                floats += b.tau.size * b.sigma.size
    return floats


def emit_csv(records: list[ExperimentRecord], fits: list[RateFit], path) -> None:
    """Deterministic CSV: one row per rank plus fit-summary footer comments."""
    lines = ["r,error,seconds,storage_floats"]
    for rec in records:
        lines.append(f"{rec.rank},{float(rec.error)!r},{float(rec.seconds)!r},"
                     f"{rec.storage_floats}")
    for fit in fits:
        lines.append(f"# b={float(fit.b)!r} s={float(fit.s)!r} "
                     f"corr={float(fit.correlation)!r}")
    unconverged = [rec.rank for rec in records if not rec.converged]
    if unconverged:
        lines.append(f"# unconverged_ranks={','.join(map(str, unconverged))}")
    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
