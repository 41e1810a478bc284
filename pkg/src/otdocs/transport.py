"""Discrete optimal transport: exact plans and entropic-regularized Sinkhorn scaling.

Solves, for discrete probability vectors ``a`` (source) and ``b`` (target) and a
nonnegative cost matrix ``A``:

    exact:      min_{g in Pi(a, b)} <A, g>
    sinkhorn:   min_{g in Pi(a, b)} <A, g> - (1/lam) * H(g),   H(g) = -sum g log g

where ``Pi(a, b)`` is the set of nonnegative matrices with row sums ``a`` and
column sums ``b``.  The regularized problem is solved by alternating row/column
scaling of the kernel ``exp(-lam * A)``; for both solvers the reported objective
is the transport cost ``<A, g>`` alone so the two distances live on one scale.

All functions are pure; plans carry a feasibility certificate (``marginal_error``)
so callers can audit how well the marginal constraints were met.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.special import logsumexp

from .errors import DimensionMismatchError, InputError, NumericalError

# Distributions must sum to one within this absolute tolerance.
WEIGHT_SUM_TOL = 1e-9
# Feasibility certificate bound guaranteed by the exact solver.
EXACT_FEASIBILITY_TOL = 1e-9
# Plain-domain scaling is abandoned once any kernel entry would drop below this.
LOG_DOMAIN_TRIGGER = 1e-300

_LOG_TRIGGER_EXPONENT = -np.log(LOG_DOMAIN_TRIGGER)  # ~690.78


@dataclass(frozen=True)
class Distribution:
    """A discrete probability vector: nonnegative weights summing to one.

    Weights must sum to 1 within ``WEIGHT_SUM_TOL``; use :meth:`normalized` to
    build one from raw nonnegative masses.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise InputError("distribution weights must be a non-empty 1-d array")
        if not np.all(np.isfinite(w)):
            raise InputError("distribution weights must be finite")
        if np.any(w < 0):
            raise InputError("distribution weights must be nonnegative")
        total = float(w.sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise InputError(
                f"distribution weights must sum to 1 within {WEIGHT_SUM_TOL:g} "
                f"(got {total!r})"
            )
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, raw) -> "Distribution":
        """Scale raw nonnegative masses to sum to one."""
        w = np.asarray(raw, dtype=np.float64)
        total = w.sum()
        if not np.isfinite(total) or total <= 0:
            raise InputError("cannot normalize masses with non-positive total")
        return cls(w / total)

    def __len__(self) -> int:
        return int(self.weights.size)


@dataclass(frozen=True)
class SinkhornConfig:
    """Knobs for the entropic solver.

    ``lam`` is the regularization parameter as it appears in the objective
    (entropy coefficient 1/lam, scaling kernel exp(-lam * A)): larger values
    mean weaker smoothing and plans closer to the exact optimum.
    ``log_domain`` is one of "auto" (switch to log-space scaling when the plain
    kernel underflows), "always", or "never" (raise on underflow instead).
    """

    lam: float = 0.01
    max_iterations: int = 1000
    convergence_tolerance: float = 1e-6
    log_domain: str = "auto"

    def __post_init__(self):
        if not (self.lam > 0 and np.isfinite(self.lam)):
            raise InputError("lam must be a positive finite scalar")
        if self.max_iterations < 1:
            raise InputError("max_iterations must be >= 1")
        if not (self.convergence_tolerance > 0):
            raise InputError("convergence_tolerance must be positive")
        if self.log_domain not in ("auto", "always", "never"):
            raise InputError("log_domain must be 'auto', 'always' or 'never'")


@dataclass(frozen=True)
class TransportPlan:
    """A coupling with its transport cost and feasibility certificate.

    ``marginal_error`` is the maximum absolute deviation of any row sum from the
    source weights or column sum from the target weights.  ``converged`` is
    False only for Sinkhorn runs that hit the iteration cap before meeting the
    configured tolerance; the achieved error is still reported.
    """

    coupling: np.ndarray
    objective: float
    marginal_error: float
    converged: bool = True
    iterations: int = 0
    log_domain: bool = field(default=False, compare=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.coupling.shape


def _as_distribution(d) -> Distribution:
    return d if isinstance(d, Distribution) else Distribution(np.asarray(d, dtype=np.float64))


def _validated_cost(cost, n_source: int, n_target: int) -> np.ndarray:
    A = np.asarray(cost, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionMismatchError(f"cost matrix must be 2-d, got ndim={A.ndim}")
    if A.shape != (n_source, n_target):
        raise DimensionMismatchError(
            f"cost matrix shape {A.shape} does not match ({n_source}, {n_target})"
        )
    if not np.all(np.isfinite(A)):
        raise InputError("cost matrix entries must be finite")
    if np.any(A < 0):
        raise InputError("cost matrix entries must be nonnegative")
    return A


def marginal_violation(coupling: np.ndarray, source_weights, target_weights) -> float:
    """Max absolute row/column-sum deviation of a coupling from its marginals."""
    g = np.asarray(coupling, dtype=np.float64)
    a = np.asarray(source_weights, dtype=np.float64)
    b = np.asarray(target_weights, dtype=np.float64)
    row_err = np.abs(g.sum(axis=1) - a).max()
    col_err = np.abs(g.sum(axis=0) - b).max()
    return float(max(row_err, col_err))


def _plan_from_coupling(coupling, A, a, b, *, converged=True, iterations=0,
                        log_domain=False) -> TransportPlan:
    g = np.maximum(coupling, 0.0)
    return TransportPlan(
        coupling=g,
        objective=float((A * g).sum()),
        marginal_error=marginal_violation(g, a, b),
        converged=converged,
        iterations=iterations,
        log_domain=log_domain,
    )


def _two_row_vertex(a: np.ndarray, b: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Optimal vertex for a 2 x n instance by direct endpoint enumeration.

    With two source atoms the plan is determined by the first row x (the second
    is b - x), and the objective is affine in x with per-column slopes
    A[0, j] - A[1, j].  Filling columns greedily in ascending slope order walks
    straight to the optimal vertex (continuous-knapsack argument).
    """
    n = b.size
    delta = A[0] - A[1]
    order = np.argsort(delta, kind="stable")
    x = np.zeros(n)
    remaining = a[0]
    for j in order:
        take = b[j] if b[j] < remaining else remaining
        x[j] = take
        remaining -= take
        if remaining <= 0.0:
            break
    return np.vstack([x, b - x])


def _constraint_matrix(m: int, n: int):
    """Row-sum then column-sum equality constraints over the flattened plan.

    Dense for small instances (lower per-call overhead); sparse beyond that,
    since the dense matrix is (m+n) x (m*n) and blows up for long documents.
    """
    nvar = m * n
    rows = np.concatenate([
        np.repeat(np.arange(m), n),
        m + np.tile(np.arange(n), m),
    ])
    cols = np.concatenate([np.arange(nvar), np.arange(nvar)])
    data = np.ones(2 * nvar)
    matrix = sparse.coo_matrix((data, (rows, cols)), shape=(m + n, nvar))
    return matrix.toarray() if nvar <= 256 else matrix.tocsc()


def _linprog_plan(a: np.ndarray, b: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Solve the transportation LP with HiGHS; returns an optimal vertex."""
    m, n = A.shape
    A_eq = _constraint_matrix(m, n)
    b_eq = np.concatenate([a, b])
    res = linprog(
        A.ravel(),
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=(0, None),
        method="highs",
        options={
            "primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10,
        },
    )
    if res.status != 0:
        raise NumericalError(f"exact transport LP failed: {res.message}")
    return res.x.reshape(m, n)


def exact_plan(source, target, cost) -> TransportPlan:
    """Minimum-cost coupling of ``source`` and ``target`` under ``cost``.

    Returns an optimal vertex of the transportation polytope.  Instances whose
    smaller side has at most two atoms are solved by direct endpoint
    enumeration; larger ones go through an LP solver.  The certificate
    satisfies ``marginal_error <= EXACT_FEASIBILITY_TOL``.
    """
    src = _as_distribution(source)
    tgt = _as_distribution(target)
    A = _validated_cost(cost, len(src), len(tgt))
    a_orig, b_orig = src.weights, tgt.weights
    # Solve against exactly-balanced marginals; inputs may be off by <= 1e-9.
    a = a_orig / a_orig.sum()
    b = b_orig / b_orig.sum()
    m, n = A.shape

    if m == 1:
        g = b[np.newaxis, :].copy()
    elif n == 1:
        g = a[:, np.newaxis].copy()
    elif m == 2:
        g = _two_row_vertex(a, b, A)
    elif n == 2:
        g = _two_row_vertex(b, a, A.T).T
    else:
        g = _linprog_plan(a, b, A)
        residual = marginal_violation(g, a, b)
        if residual > EXACT_FEASIBILITY_TOL:
            raise NumericalError(
                f"LP solution violates marginals by {residual:.3e} "
                f"(> {EXACT_FEASIBILITY_TOL:g})"
            )
    return _plan_from_coupling(g, A, a_orig, b_orig)


def wasserstein_distance(source, target, cost) -> float:
    """Optimal transport cost between two distributions (a metric for metric costs)."""
    return exact_plan(source, target, cost).objective


def _needs_log_domain(scaled_cost: np.ndarray) -> bool:
    # exp(-x) < LOG_DOMAIN_TRIGGER iff x > -log(LOG_DOMAIN_TRIGGER).  Any
    # underflowed kernel entry silently forbids its cell, which skews the fixed
    # point even when every row/column keeps a representable max, so the whole
    # kernel must stay above the trigger for plain-domain scaling to be trusted.
    return bool(scaled_cost.max() > _LOG_TRIGGER_EXPONENT)


def _sinkhorn_plain(a, b, scaled_cost, config):
    """Classic scaling iterations on K = exp(-lam * A).

    Returns (coupling, converged, iterations) or None if the scaling vectors
    degenerate (caller falls back to the log-domain variant or raises).
    """
    K = np.exp(-scaled_cost)
    m, n = K.shape
    u = np.ones(m)
    v = np.ones(n)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for it in range(1, config.max_iterations + 1):
            Kv = K @ v
            if not np.all(Kv > 0):
                return None
            u = a / Kv
            if not np.all(np.isfinite(u)):
                return None
            Ktu = K.T @ u
            if not np.all(Ktu > 0):
                return None
            v = b / Ktu
            if not np.all(np.isfinite(v)):
                return None
            g = u[:, np.newaxis] * K * v[np.newaxis, :]
            if not np.all(np.isfinite(g)):
                return None
            if marginal_violation(g, a, b) <= config.convergence_tolerance:
                return g, True, it
    return g, False, config.max_iterations


def _sinkhorn_log(a, b, scaled_cost, config):
    """Log-domain scaling: stable for large lam * A where exp(-lam * A) underflows."""
    log_K = -scaled_cost
    log_a = np.log(a)
    log_b = np.log(b)
    m, n = scaled_cost.shape
    f = np.zeros(m)
    g_pot = np.zeros(n)
    for it in range(1, config.max_iterations + 1):
        f = log_a - logsumexp(log_K + g_pot[np.newaxis, :], axis=1)
        g_pot = log_b - logsumexp(log_K + f[:, np.newaxis], axis=0)
        plan = np.exp(log_K + f[:, np.newaxis] + g_pot[np.newaxis, :])
        if marginal_violation(plan, a, b) <= config.convergence_tolerance:
            return plan, True, it
    return plan, False, config.max_iterations


def sinkhorn_plan(source, target, cost, config: SinkhornConfig | None = None) -> TransportPlan:
    """Entropic-regularized coupling via Sinkhorn-Knopp matrix scaling.

    The returned plan has the form diag(u) * exp(-lam * A) * diag(v).  Iteration
    stops once the marginal violation drops below ``config.convergence_tolerance``
    or after ``config.max_iterations`` sweeps, in which case the plan is flagged
    ``converged=False`` with its achieved error.  The ``objective`` field is the
    transport cost <A, g> only (no entropy term), comparable to :func:`exact_plan`.
    """
    config = config or SinkhornConfig()
    src = _as_distribution(source)
    tgt = _as_distribution(target)
    A = _validated_cost(cost, len(src), len(tgt))
    a_orig, b_orig = src.weights, tgt.weights
    a = a_orig / a_orig.sum()
    b = b_orig / b_orig.sum()
    m, n = A.shape

    # Single-atom marginals force the plan; no iteration needed.
    if m == 1 or n == 1:
        g = b[np.newaxis, :].copy() if m == 1 else a[:, np.newaxis].copy()
        return _plan_from_coupling(g, A, a_orig, b_orig)

    # Zero weights make exact scaling impossible in either domain (log(0) in the
    # potentials); drop empty atoms and reinsert zero rows/columns afterwards.
    src_keep = np.flatnonzero(a > 0)
    tgt_keep = np.flatnonzero(b > 0)
    reduced = src_keep.size < m or tgt_keep.size < n
    a_red = a[src_keep] / a[src_keep].sum() if reduced else a
    b_red = b[tgt_keep] / b[tgt_keep].sum() if reduced else b
    A_red = A[np.ix_(src_keep, tgt_keep)] if reduced else A

    if a_red.size == 1 or b_red.size == 1:
        g_red = (b_red[np.newaxis, :] if a_red.size == 1 else a_red[:, np.newaxis]).copy()
        converged, iterations, used_log = True, 0, False
    else:
        scaled_cost = config.lam * A_red
        use_log = config.log_domain == "always" or (
            config.log_domain == "auto" and _needs_log_domain(scaled_cost)
        )
        if config.log_domain == "never" and _needs_log_domain(scaled_cost):
            raise NumericalError(
                "sinkhorn kernel underflow: exp(-lam * cost) has entries below "
                f"{LOG_DOMAIN_TRIGGER:g}; reduce lam or enable log-domain mode"
            )
        if use_log:
            g_red, converged, iterations = _sinkhorn_log(a_red, b_red, scaled_cost, config)
            used_log = True
        else:
            result = _sinkhorn_plain(a_red, b_red, scaled_cost, config)
            if result is None:
                if config.log_domain == "never":
                    raise NumericalError(
                        "sinkhorn scaling degenerated in plain domain; reduce lam "
                        "or enable log-domain mode"
                    )
                g_red, converged, iterations = _sinkhorn_log(a_red, b_red, scaled_cost, config)
                used_log = True
            else:
                g_red, converged, iterations = result
                used_log = False

    if reduced:
        g = np.zeros((m, n))
        g[np.ix_(src_keep, tgt_keep)] = g_red
    else:
        g = g_red
    return _plan_from_coupling(
        g, A, a_orig, b_orig,
        converged=converged, iterations=iterations, log_domain=used_log,
    )


def entropy(plan) -> float:
    """Shannon entropy -sum g log g of a coupling, with the 0 log 0 = 0 convention."""
    g = np.asarray(getattr(plan, "coupling", plan), dtype=np.float64)
    if np.any(g < 0):
        raise InputError("coupling entries must be nonnegative")
    positive = g[g > 0]
    return float(-(positive * np.log(positive)).sum())


def transport_cost(plan, cost) -> float:
    """Frobenius product <A, g> of a coupling with a cost matrix."""
    g = np.asarray(getattr(plan, "coupling", plan), dtype=np.float64)
    A = np.asarray(cost, dtype=np.float64)
    if g.shape != A.shape:
        raise DimensionMismatchError(
            f"plan shape {g.shape} does not match cost shape {A.shape}"
        )
    return float((A * g).sum())
