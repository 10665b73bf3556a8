"""Deterministic quadrature for the three integral shapes used by the certificates.

* half-line integrals with an s^{-1/2} endpoint factor (mean-curvature terms):
  the substitution s = tan^2(theta) absorbs the singularity and maps to a
  smooth integrand on (0, pi/2), handled by Gauss-Legendre;
* half-line integrals with a t^q algebraic factor, q in (0, 1) (resolvent
  representations of matrix powers): exp-sinh nodes t = exp(pi sinh x), which
  resolve both algebraic endpoints at double precision;
* the triangular double integral int_0^1 int_{t lam}^{lam} g d sigma d lam,
  reduced to a single weighted integral over (0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import InvalidInputError, NumericalFailureError, hermitian_part

NODES_HALF_LINE = 200
NODES_POWER = 241
NODES_UNIT = 100


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes/weights evaluating one of the three integral shapes."""

    kind: str  # half_line_sqrt_singularity | half_line_power | unit_interval
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise InvalidInputError(f"{self.kind}: weights must be positive")
        if np.any(np.diff(self.nodes) <= 0):
            raise InvalidInputError(f"{self.kind}: nodes must strictly increase")


def _gauss_legendre(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1) * (b - a) / 2 + a, w * (b - a) / 2


def half_line_sqrt_rule(n: int = NODES_HALF_LINE) -> QuadratureRule:
    """Rule for int_0^inf f(s) ds with f = s^{-1/2} * (smooth, decaying).

    s = tan^2(theta) gives s^{-1/2} ds = 2 dtheta / cos^2(theta); nodes are the
    mapped Gauss-Legendre points on (0, pi/2) and weights absorb the jacobian
    together with the s^{1/2} that cancels the singular factor of f.
    """
    theta, w = _gauss_legendre(n, 0.0, math.pi / 2)
    tan = np.tan(theta)
    nodes = tan**2
    weights = w * 2.0 * tan / np.cos(theta) ** 2
    return QuadratureRule("half_line_sqrt_singularity", nodes, weights)


def half_line_power_rule(n: int = NODES_POWER, xmax: float = 6.0) -> QuadratureRule:
    """exp-sinh rule for int_0^inf h(t) dt with algebraic endpoint behavior."""
    x = np.linspace(-xmax, xmax, n)
    h = x[1] - x[0]
    u = np.pi * np.sinh(x)
    keep = np.abs(u) < 700.0  # keep exp(u) inside double range
    t = np.exp(u[keep])
    w = np.pi * np.cosh(x[keep]) * t * h
    return QuadratureRule("half_line_power", t, w)


def unit_interval_rule(n: int = NODES_UNIT, a: float = 0.0, b: float = 1.0) -> QuadratureRule:
    nodes, weights = _gauss_legendre(n, a, b)
    return QuadratureRule("unit_interval", nodes, weights)


def integrate_half_line_sqrt(f, rule: QuadratureRule | None = None) -> np.ndarray:
    """int_0^inf f(s) ds for matrix-valued f(s) = s^{-1/2} * smooth_decaying(s).

    The result is symmetrized to Hermitian.
    """
    if rule is None:
        rule = half_line_sqrt_rule()
    if rule.kind != "half_line_sqrt_singularity":
        raise InvalidInputError(f"wrong rule kind {rule.kind}")
    total = None
    for s, w in zip(rule.nodes, rule.weights):
        val = np.asarray(f(s))
        if not np.all(np.isfinite(val)):
            raise NumericalFailureError(f"integrand not finite at s = {s!r}")
        total = w * val if total is None else total + w * val
    if total.ndim == 0:
        return total
    return hermitian_part(total)


def integrate_loewner(q: float, g, rule: QuadratureRule | None = None) -> np.ndarray:
    """(sin(pi q)/pi) int_0^inf t^q g(t) dt for q strictly inside (0, 1).

    The weight is applied as (w * g(t)) * t^q so that neither factor overflows
    for extreme nodes.  Callers must handle q in {0, 1} analytically; values
    within 1e-8 of the endpoints are rejected because sin(pi q) cancellation
    makes the representation useless there.
    """
    if not (1e-8 < q < 1 - 1e-8):
        raise InvalidInputError(f"integrate_loewner: q = {q} outside (0, 1) interior")
    if rule is None:
        rule = half_line_power_rule()
    if rule.kind != "half_line_power":
        raise InvalidInputError(f"wrong rule kind {rule.kind}")
    logt = np.log(rule.nodes)
    total = None
    for t, w, lt in zip(rule.nodes, rule.weights, logt):
        p = q * lt
        if p < -700.0:
            continue  # t^q below double precision; g is at worst O(1/t) there
        # apply w before t^q: w*g stays bounded wherever g decays like 1/t^2
        val = (np.asarray(g(t)) * w) * math.exp(p)
        if not np.all(np.isfinite(val)):
            raise NumericalFailureError(f"integrand not finite at t = {t!r}")
        total = val if total is None else total + val
    total = total * (math.sin(math.pi * q) / math.pi)
    if total.ndim == 0:
        return total
    return hermitian_part(total)


def triangular_weight_function(t: float, sigma: np.ndarray) -> np.ndarray:
    """Length of {lam in [0,1] : t*lam <= sigma <= lam}, the inner-integral weight."""
    sigma = np.asarray(sigma, dtype=float)
    return np.where(sigma <= t, sigma * (1 - t) / t, 1 - sigma)


def triangular_weight(t: float, g, n: int = NODES_UNIT) -> float:
    """int_0^1 int_{t lam}^{lam} g(sigma) dsigma dlam as one weighted integral.

    Exchanging the integration order gives int_0^1 g(sigma) w_t(sigma) dsigma
    with w_t(sigma) = sigma (1-t)/t on (0, t] and 1 - sigma on (t, 1);
    Gauss-Legendre is applied separately on each subinterval since w_t has a
    kink at t.
    """
    if not (0.0 < t < 1.0):
        raise InvalidInputError(f"triangular_weight: t = {t} outside (0, 1)")
    total = 0.0
    for a, b in ((0.0, t), (t, 1.0)):
        nodes, weights = _gauss_legendre(n, a, b)
        wt = triangular_weight_function(t, nodes)
        vals = np.array([float(g(s)) for s in nodes])
        total += float(np.sum(weights * wt * vals))
    return total


@dataclass
class QuadratureConfig:
    """Node counts shared by the verification suites (overridable per run)."""

    nodes_half_line: int = NODES_HALF_LINE
    nodes_power: int = NODES_POWER
    nodes_unit: int = NODES_UNIT
    tol: float = 1e-11
    _sqrt_rule: QuadratureRule | None = field(default=None, repr=False, compare=False)
    _power_rule: QuadratureRule | None = field(default=None, repr=False, compare=False)

    def sqrt_rule(self) -> QuadratureRule:
        if self._sqrt_rule is None or self._sqrt_rule.node_count != self.nodes_half_line:
            self._sqrt_rule = half_line_sqrt_rule(self.nodes_half_line)
        return self._sqrt_rule

    def power_rule(self) -> QuadratureRule:
        if self._power_rule is None:
            self._power_rule = half_line_power_rule(self.nodes_power)
        return self._power_rule
