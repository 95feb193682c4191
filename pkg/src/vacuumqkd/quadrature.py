"""Globally adaptive Gauss-Kronrod (7, 15) quadrature for vector-valued integrands.

Integrands are called with a 1-D array of abscissae and must return an array of
shape ``(m, n)`` (or ``(n,)`` for a scalar integrand). Each refinement step
bisects a batch of the worst panels so that the integrand is evaluated on
many nodes per call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# Full 15-point rule on [-1, 1]; Gauss nodes sit at odd positions of _XGK.
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


class QuadratureBudgetError(RuntimeError):
    """Evaluation budget exhausted before the error target was met."""

    def __init__(self, estimate, error, evals):
        self.estimate = estimate
        self.error = error
        self.evals = evals
        super().__init__(f"quadrature budget exceeded after {evals} evaluations "
                         f"(estimate {estimate}, error {error})")


@dataclass
class Budget:
    """Shared evaluation counter so nested integrals draw on one allowance."""

    max_evals: int
    used: int = 0

    def charge(self, n: int) -> bool:
        self.used += n
        return self.used <= self.max_evals


@dataclass
class QuadResult:
    value: np.ndarray
    error: np.ndarray
    evals: int


def _rule(func, lo, hi):
    """Apply GK15 on panels [lo_j, hi_j]; returns (kronrod, error) of shape (m, p)."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = (mid[:, None] + half[:, None] * NODES[None, :]).ravel()
    y = np.asarray(func(x), dtype=float)
    scalar = y.ndim == 1
    y = y.reshape((1 if scalar else y.shape[0]), lo.size, NODES.size)
    kron = (y @ KRONROD_WEIGHTS) * half
    gauss = (y @ GAUSS_WEIGHTS) * half
    return kron, np.abs(kron - gauss), x.size


def integrate(func, a, b, *, rel_tol=1e-8, abs_tol=0.0, max_evals=200_000,
              breakpoints=(), budget: Budget | None = None, initial_panels=1) -> QuadResult:
    """Integrate ``func`` over ``[a, b]`` to ``|err| <= max(abs_tol, rel_tol*|I|)`` per component.

    Raises:
        QuadratureBudgetError: when ``max_evals`` (or the shared ``budget``)
            runs out; carries the best estimate and its error bound.
    """
    if not b > a:
        raise ValueError("need b > a")
    budget = budget if budget is not None else Budget(max_evals)
    edges = [a] + sorted(p for p in breakpoints if a < p < b) + [b]
    grid = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        grid.extend(np.linspace(lo, hi, initial_panels + 1)[:-1])
    lo = np.array(grid)
    hi = np.append(lo[1:], b)

    est, err, n = _rule(func, lo, hi)
    evals = n
    ok = budget.charge(n)
    while True:
        total = est.sum(axis=1)
        total_err = err.sum(axis=1)
        tol = np.maximum(abs_tol, rel_tol * np.abs(total))
        if np.all(total_err <= tol):
            return QuadResult(total, total_err, evals)
        if not ok:
            raise QuadratureBudgetError(total, total_err, evals)
        # Scaled contribution of each panel to the worst-off component.
        scaled = np.max(err / np.where(tol > 0, tol, np.inf)[:, None], axis=0)
        if not np.any(np.isfinite(scaled)):
            scaled = np.max(err, axis=0)
        order = np.argsort(scaled)[::-1]
        cum = np.cumsum(scaled[order])
        nsplit = int(np.searchsorted(cum, 0.5 * cum[-1])) + 1
        pick = order[:nsplit]
        mids = 0.5 * (lo[pick] + hi[pick])
        if np.any((mids <= lo[pick]) | (mids >= hi[pick])):
            raise QuadratureBudgetError(total, total_err, evals)
        new_lo = np.concatenate([lo[pick], mids])
        new_hi = np.concatenate([mids, hi[pick]])
        k2, e2, n = _rule(func, new_lo, new_hi)
        evals += n
        ok = budget.charge(n)
        keep = np.ones(lo.size, dtype=bool)
        keep[pick] = False
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        est = np.concatenate([est[:, keep], k2], axis=1)
        err = np.concatenate([err[:, keep], e2], axis=1)
