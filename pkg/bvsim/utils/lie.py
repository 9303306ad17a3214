import itertools
import numpy as np
from dataclasses import dataclass, field
from bvsim import base
from bvsim.base import DomainError
from bvsim.modeling.dynamics import Dynamics, VectorField


def lie_bracket(g_alpha: VectorField, g_beta: VectorField, x: base.VectorType) -> base.ArrayType:
    """
    [g_alpha, g_beta](x) = Dg_beta(x) g_alpha(x) - Dg_alpha(x) g_beta(x), from symbolic Jacobians.

    :g_alpha (VectorField): First field.
    :g_beta (VectorField): Second field.
    :x (base.VectorType): Point.
    :returns (base.ArrayType): The bracket at x.
    """
    x = np.asarray(x, dtype = float)
    forward = g_beta.jacobian_at(x) @ g_alpha(0.0, x)
    backward = g_alpha.jacobian_at(x) @ g_beta(0.0, x)
    return forward - backward


def lie_bracket_fd(g_alpha: VectorField, g_beta: VectorField, x: base.VectorType, h: float = 1e-5
                   ) -> base.ArrayType:
    """
    The same bracket with Jacobian-vector products from central differences.

    :h (float, default = 1e-5): Difference step.
    """
    x = np.asarray(x, dtype = float)

    def directional(field: VectorField, direction: base.ArrayType) -> base.ArrayType:
        return (field(0.0, x + h * direction) - field(0.0, x - h * direction)) / (2 * h)

    return directional(g_beta, g_alpha(0.0, x)) - directional(g_alpha, g_beta(0.0, x))


def sample_points(n: int, count: int = 16, seed: int = base.DEFAULT_SEED, scale: float = 1.0) -> base.ArrayType:
    """Seeded normal sample points in R^n."""
    return np.random.default_rng(seed).normal(scale = scale, size = (count, n))


@dataclass
class CommutativityReport:
    """Sampled check of [g_alpha, g_beta] = 0 for all pairs."""

    commuting: bool
    max_norms: base.Dict[base.Tuple[int, int], float] = field(default_factory = dict)
    witness: base.Optional[base.Tuple[int, int, base.List[float]]] = None
    tol: float = base.COMMUTING_TOL

    @property
    def verdict(self) -> str:
        if self.commuting:
            return "commuting (sampled)"
        alpha, beta, point = self.witness
        return f"non-commuting: [g{alpha}, g{beta}] != 0 at x = {point}"


def commutativity_report(dyn: Dynamics, points: base.VectorType, tol: float = base.COMMUTING_TOL
                         ) -> CommutativityReport:
    """
    Largest bracket norm per pair of input fields over the sample points.

    :dyn (Dynamics): The system.
    :points (base.VectorType): At least one sample point, shape (p, n).
    :tol (float, default = base.COMMUTING_TOL): Norm below which a bracket counts as zero.
    :returns (CommutativityReport): Norms, verdict and the first witness found.
    """
    points = np.atleast_2d(np.asarray(points, dtype = float))
    if points.size == 0:
        raise DomainError("At least one sample point is required")

    report = CommutativityReport(commuting = True, tol = tol)
    for alpha, beta in itertools.combinations(range(dyn.m), 2):
        worst, worst_point = 0.0, None
        for x in points:
            norm = float(np.linalg.norm(lie_bracket(dyn.g[alpha], dyn.g[beta], x)))
            if norm > worst:
                worst, worst_point = norm, x
        report.max_norms[(alpha + 1, beta + 1)] = worst
        if worst > tol and report.commuting:
            report.commuting = False
            report.witness = (alpha + 1, beta + 1, worst_point.tolist())
    return report
