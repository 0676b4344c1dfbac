"""General solution of the Poisson equation for recurrent and transient chains.

Every solution of the level equations

    (B - I) u_0 + A1 u_1            = -g_0
    A_neg u_r + (A0 - I) u_{r+1} + A1 u_{r+2} = -g_{r+1},   r >= 0

has the form u_r = G^r x + L V1^{-r} y + sigma_r, where (x, y) parametrize
the homogeneous family and sigma_r is the particular solution

    sigma_r = - sum_{k=1}^{r} (G^{r-k} - L V1^{k-r} E) W g_k
              - sum_{j=1}^{nu-1} K V0^j F W g_{j+r}.

The boundary equation pins x through a finite Poisson equation in
P* = B + A1 G.  For a transient chain I - P* is nonsingular and y is free;
for a positive recurrent chain x is determined up to alpha * 1 via the group
inverse of I - P*, and y = y* + y_perp with y* = -sum_k V1^k E W g_k and
y_perp constrained to the hyperplane pi_0^T W^{-1} L y_perp = pi^T g.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qme, spectral, triple, verify
from ._linalg import (Array, as_readonly, condition_number, norm_inf,
                      stationary_vector)
from .exceptions import (ClassificationError, InfeasibleConstraintError,
                         NumericalError)
from .model import QbdModel, RhsSpec
from .qme import Classification, Normalization
from .spectral import SpectralSplit
from .verify import ResidualReport

DEFAULT_RESIDUAL_TOL = 1e-7
_EXTRA_LEVELS = 10

Y_PERP_MODES = ("minimal_norm", "zero", "explicit")


@dataclass(frozen=True)
class SolveOptions:
    """Knobs of the solution pipeline.

    ``y_free`` is the free homogeneous parameter of the transient case
    (length p, default zero, which gives the bounded representative).
    ``y_perp_mode`` selects the recurrent-case hyperplane solution:
    ``minimal_norm`` (default), ``zero``, or ``explicit`` with ``y_perp``
    supplied.  ``R_max`` defaults to N + 10.
    """

    y_free: tuple | None = None
    y_perp_mode: str = "minimal_norm"
    y_perp: tuple | None = None
    alpha: float = 0.0
    R_max: int | None = None
    residual_tol: float = DEFAULT_RESIDUAL_TOL
    null_band: float = qme.NULL_BAND
    eps_zero: float | None = None
    qme_tol: float = qme.QME_TOL
    qme_max_iter: int = qme.QME_MAX_ITER

    def __post_init__(self):
        if self.y_perp_mode not in Y_PERP_MODES:
            raise ValueError(f"y_perp_mode must be one of {Y_PERP_MODES}, "
                             f"got {self.y_perp_mode!r}")
        if self.y_perp_mode == "explicit" and self.y_perp is None:
            raise ValueError("y_perp_mode 'explicit' requires a y_perp vector")


@dataclass(frozen=True)
class GroupInverseData:
    """Group inverse of I - P*, P* = B + A1 G.

    For a stochastic (recurrent) P* the group inverse is
    (I - P* + 1 pi*^T)^{-1} - 1 pi*^T with pi* its stationary vector; for a
    strictly substochastic (transient) P* it reduces to the plain inverse and
    ``pi_star`` is None.
    """

    Pstar: Array
    sharp: Array
    pi_star: Array | None
    recurrent: bool

    def __post_init__(self):
        object.__setattr__(self, "Pstar", as_readonly(self.Pstar))
        object.__setattr__(self, "sharp", as_readonly(self.sharp))
        if self.pi_star is not None:
            object.__setattr__(self, "pi_star", as_readonly(self.pi_star))


@dataclass(frozen=True)
class PoissonSolution:
    """Solution data (x, y) plus evaluated blocks u_0 ... u_{R_max}.

    ``alpha`` is the free additive constant of the recurrent case (None for
    transient chains, where x is fully determined).  ``sigma1`` is the
    particular-solution block entering the boundary equation; on the
    null-recurrent path it belongs to the shifted difference equation.  For
    :func:`solve_nonsingular_a1` the parameter ``y`` multiplies W R^{-r}
    instead of L V1^{-r}.
    """

    classification: Classification
    x: Array
    y: Array
    y_star: Array
    alpha: float | None
    sigma1: Array
    R_max: int
    u: Array
    diagnostics: ResidualReport

    def __post_init__(self):
        for name in ("x", "y", "y_star", "sigma1", "u"):
            object.__setattr__(self, name, as_readonly(getattr(self, name)))


def group_inverse(Pstar: Array, *, stochastic_tol: float = 1e-10) -> GroupInverseData:
    """Group inverse of I - P* for a (sub)stochastic P*.

    Raises :class:`NumericalError` when the fundamental matrix is singular,
    which signals a reducible P*.
    """
    Pstar = np.atleast_2d(np.asarray(Pstar, dtype=float))
    m = Pstar.shape[0]
    eye = np.eye(m)
    rows = Pstar.sum(axis=1)
    if norm_inf(rows - 1.0) <= stochastic_tol:
        pi = stationary_vector(Pstar)
        fundamental = eye - Pstar + np.outer(np.ones(m), pi)
        if condition_number(fundamental) > 1e14:
            raise NumericalError("group inverse: fundamental matrix is singular "
                                 "(P* appears reducible)")
        sharp = np.linalg.solve(fundamental, eye) - np.outer(np.ones(m), pi)
        return GroupInverseData(Pstar=Pstar, sharp=sharp, pi_star=pi, recurrent=True)
    if rows.max() > 1.0 + stochastic_tol:
        raise ValueError("P* must be substochastic")
    if condition_number(eye - Pstar) > 1e14:
        raise NumericalError("group inverse: I - P* is numerically singular")
    sharp = np.linalg.solve(eye - Pstar, eye)
    return GroupInverseData(Pstar=Pstar, sharp=sharp, pi_star=None, recurrent=False)


def _w_times_rhs(W: Array, g: RhsSpec) -> Array:
    """Stacked products W g_k for k = 0 ... N, shape (N+1, m)."""
    return g.blocks @ W.T


def compute_sigma(G: Array, split: SpectralSplit, W: Array, g: RhsSpec,
                  r: int) -> Array:
    """Particular-solution block sigma_r, in the regrouped form

        sigma_r = - sum_{j=0}^{r-1} G^j W g_{r-j}
                  + L V1^{-r} sum_{k=1}^{r} V1^k E W g_k
                  - sum_{j=1}^{nu-1} K V0^j F W g_{j+r}.

    Equals the evaluation of the general solution at x = 0, y = 0.
    """
    if r < 0:
        raise ValueError(f"level index must be nonnegative, got {r}")
    m = G.shape[0]
    return _u_sequence(np.zeros(m), np.zeros(split.p), G, split, W, g, r)[r]


def evaluate_u(x: Array, y: Array, G: Array, split: SpectralSplit, W: Array,
               g: RhsSpec, r: int) -> Array:
    """u_r = G^r x + L V1^{-r} y + sigma_r for a single level r."""
    return evaluate_u_sequence(x, y, G, split, W, g, r)[r]


def evaluate_u_sequence(x: Array, y: Array, G: Array, split: SpectralSplit,
                        W: Array, g: RhsSpec, R_max: int) -> Array:
    """Solution blocks u_0 ... u_{R_max} for parameters (x, y).

    Evaluated in the numerically convenient regrouping: with
    y* = -sum_{k=1}^{N} V1^k E W g_k,

        u_r = G^r x - sum_{j=0}^{r-1} G^j W g_{r-j}
              + L V1^{-r} (y - y*) - L sum_{k=r+1}^{N} V1^{k-r} E W g_k
              - sum_{j=1}^{nu-1} K V0^j F W g_{j+r}.

    Negative powers of V1 multiply only the exact deviation y - y*; the
    remaining series tail uses positive powers, so the bounded choice y = y*
    stays bounded instead of drowning in amplified cancellation noise.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.shape != (split.p,):
        raise ValueError(f"y must have length p = {split.p}, got shape {y.shape}")
    return _u_sequence(x, y, G, split, W, g, R_max)


def _u_sequence(x: Array, y: Array, G: Array, split: SpectralSplit, W: Array,
                g: RhsSpec, R_max: int) -> Array:
    m = G.shape[0]
    p = split.p
    N = g.N
    Wg = _w_times_rhs(W, g)
    EWg = Wg @ split.E.T                      # rows E W g_k
    FWg = Wg @ split.F.T                      # rows F W g_k

    # tails[r] = sum_{k=r+1}^{N} V1^{k-r} E W g_k, by the backward recursion
    # tails[r] = V1 (E W g_{r+1} + tails[r+1]); zero from r = N on
    tails = np.zeros((N + 1, p))
    for r in range(N - 1, -1, -1):
        tails[r] = split.V1 @ (EWg[r + 1] + tails[r + 1])

    dev = y - compute_y_star(split, W, g)     # multiplied by V1^{-r} below
    out = np.empty((R_max + 1, m))
    xr = x.astype(float).copy()
    down = np.zeros(m)                        # sum_{j=0}^{r-1} G^j W g_{r-j}
    t = dev.copy()
    for r in range(R_max + 1):
        if r > 0:
            xr = G @ xr
            down = G @ down + (Wg[r] if r <= N else 0.0)
            t = np.linalg.solve(split.V1, t) if p else t
        tail = tails[r] if r < N else np.zeros(p)
        ntail = np.zeros(m)
        v0_pow = np.eye(m - p)
        for j in range(1, split.nu):
            v0_pow = v0_pow @ split.V0
            if j + r <= N:
                ntail += split.K @ (v0_pow @ FWg[j + r])
        out[r] = xr - down + split.L @ (t - tail) - ntail
    return out


def compute_y_star(split: SpectralSplit, W: Array, g: RhsSpec) -> Array:
    """y* = -sum_{k=1}^{N} V1^k E W g_k (a finite sum for finitely supported g)."""
    Wg = _w_times_rhs(W, g)
    acc = np.zeros(split.p)
    v1_pow = np.eye(split.p)
    for k in range(1, g.N + 1):
        v1_pow = v1_pow @ split.V1
        acc -= v1_pow @ (split.E @ Wg[k])
    return acc


def pi_dot_g(pi0: Array, R: Array, g: RhsSpec) -> float:
    """pi^T g = sum_{k=0}^{N} pi_0^T R^k g_k."""
    v = np.asarray(pi0, dtype=float)
    total = 0.0
    for k in range(g.N + 1):
        total += float(v @ g.block(k))
        v = v @ R
    return total


def _solve_hyperplane(direction: Array, target: float, g_scale: float,
                      options: SolveOptions) -> Array:
    """A vector y_perp with direction^T y_perp = target, per the chosen mode.

    ``direction`` is (pi_0^T W^{-1} L)^T.  The constraint is infeasible only
    when the direction vanishes while the target does not; that case (and an
    explicit or zero y_perp violating the constraint) raises
    :class:`InfeasibleConstraintError`.
    """
    feas_tol = 1e-8 * (1.0 + g_scale)
    if options.y_perp_mode == "zero":
        if abs(target) > feas_tol:
            raise InfeasibleConstraintError(
                f"y_perp = 0 violates the boundary constraint: pi^T g = "
                f"{target:.6e} must vanish")
        return np.zeros_like(direction)
    if options.y_perp_mode == "explicit":
        y_perp = np.asarray(options.y_perp, dtype=float)
        if y_perp.shape != direction.shape:
            raise ValueError(
                f"explicit y_perp must have length {direction.shape[0]}, "
                f"got shape {y_perp.shape}")
        gap = abs(float(direction @ y_perp) - target)
        if gap > feas_tol:
            raise InfeasibleConstraintError(
                f"explicit y_perp misses the boundary constraint by {gap:.6e}")
        return y_perp
    # minimal-norm solution of the single linear constraint
    nrm2 = float(direction @ direction)
    if nrm2 <= 1e-24:
        if abs(target) > feas_tol:
            raise InfeasibleConstraintError(
                "boundary constraint infeasible: pi_0^T W^{-1} L = 0 while "
                f"pi^T g = {target:.6e} != 0")
        return np.zeros_like(direction)
    if abs(target) <= 1e-12 * (1.0 + g_scale):
        # a rounding-level target would seed a spurious growing component
        return np.zeros_like(direction)
    return (target / nrm2) * direction


def solve_poisson(model: QbdModel, g: RhsSpec,
                  options: SolveOptions | None = None) -> PoissonSolution:
    """General solution of the Poisson equation (I - P) u = g.

    Positive recurrent and transient chains are handled here; a null
    recurrent chain is dispatched to the shift path
    (:func:`qbdpoisson.shift.solve_null_recurrent`).
    """
    opt = options or SolveOptions()
    sols = qme.solve_model(model, tol=opt.qme_tol, max_iter=opt.qme_max_iter,
                           null_band=opt.null_band)
    if sols.classification is Classification.NULL_RECURRENT:
        from .shift import solve_null_recurrent
        return solve_null_recurrent(model, g, opt, sols=sols)

    split = spectral.split(sols.Ghat, eps_zero=opt.eps_zero)
    wdata = triple.compute_w(sols.G, sols.U, sols.R, sols.Ghat)
    W = wdata.W
    m = model.m
    eye = np.eye(m)
    Pstar = model.B + model.A1 @ sols.G
    sigma1 = compute_sigma(sols.G, split, W, g, 1)
    y_star = compute_y_star(split, W, g)

    if sols.classification is Classification.TRANSIENT:
        if opt.y_free is None:
            y = np.zeros(split.p)
        else:
            y = np.asarray(opt.y_free, dtype=float)
            if y.shape != (split.p,):
                raise ValueError(f"y_free must have length p = {split.p}, "
                                 f"got shape {y.shape}")
        rhs = ((model.B - eye) @ sols.Ghat + model.A1) @ (
            sigma1 + split.L @ _v1_inv_apply(split, y)) + g.block(0)
        x = np.linalg.solve(eye - Pstar, rhs)
        alpha = None
    else:
        st = qme.stationary(model, sols, Normalization.PROBABILITY)
        pig = pi_dot_g(st.pi0, sols.R, g)
        direction = split.L.T @ (wdata.W_inv.T @ st.pi0)
        y_perp = _solve_hyperplane(direction, pig, norm_inf(g.blocks), opt)
        y = y_star + y_perp
        rhs = ((model.B - eye) @ sols.Ghat + model.A1) @ (
            sigma1 + split.L @ _v1_inv_apply(split, y)) + g.block(0)
        gi = group_inverse(Pstar)
        x = gi.sharp @ rhs + opt.alpha * np.ones(m)
        alpha = opt.alpha

    R_max = g.N + _EXTRA_LEVELS if opt.R_max is None else max(2, int(opt.R_max))
    u = evaluate_u_sequence(x, y, sols.G, split, W, g, R_max)
    report = verify.residuals(model, g, u, tol=opt.residual_tol)
    return PoissonSolution(classification=sols.classification, x=x, y=y,
                           y_star=y_star, alpha=alpha, sigma1=sigma1,
                           R_max=R_max, u=u, diagnostics=report)


def _v1_inv_apply(split: SpectralSplit, y: Array) -> Array:
    return np.linalg.solve(split.V1, y) if split.p else y


def solve_nonsingular_a1(model: QbdModel, g: RhsSpec,
                         options: SolveOptions | None = None) -> PoissonSolution:
    """Simplified solution family for nonsingular A1 (hence nonsingular R).

    u_r = G^r x + W R^{-r} y - sum_{k=1}^{r} (G^{r-k} W - W R^{k-r}) g_k,
    with the boundary handled as in :func:`solve_poisson` but with y an
    m-vector multiplying W R^{-r} (so here p = m and no splitting is needed).
    The output differs from :func:`solve_poisson` by a homogeneous solution
    only.
    """
    opt = options or SolveOptions()
    if condition_number(model.A1) > 1e12:
        raise NumericalError("A1 is numerically singular; use solve_poisson")
    sols = qme.solve_model(model, tol=opt.qme_tol, max_iter=opt.qme_max_iter,
                           null_band=opt.null_band)
    if sols.classification is Classification.NULL_RECURRENT:
        raise ClassificationError(
            "nonsingular-A1 path requires a chain that is not null recurrent")
    wdata = triple.compute_w(sols.G, sols.U, sols.R, sols.Ghat)
    W = wdata.W
    m = model.m
    eye = np.eye(m)
    Pstar = model.B + model.A1 @ sols.G

    # y* and the constraint take the R-parametrized form
    y_star = np.zeros(m)
    r_pow = np.eye(m)
    for k in range(1, g.N + 1):
        r_pow = r_pow @ sols.R
        y_star -= r_pow @ g.block(k)

    if sols.classification is Classification.TRANSIENT:
        if opt.y_free is None:
            y = np.zeros(m)
        else:
            y = np.asarray(opt.y_free, dtype=float)
            if y.shape != (m,):
                raise ValueError(f"y_free must have length m = {m}, "
                                 f"got shape {y.shape}")
        rhs = (model.B - eye) @ W @ y + model.A1 @ W @ np.linalg.solve(sols.R, y) \
            + g.block(0)
        x = np.linalg.solve(eye - Pstar, rhs)
        alpha = None
    else:
        st = qme.stationary(model, sols, Normalization.PROBABILITY)
        pig = pi_dot_g(st.pi0, sols.R, g)
        y_perp = _solve_hyperplane(st.pi0.copy(), pig, norm_inf(g.blocks), opt)
        y = y_star + y_perp
        rhs = (model.B - eye) @ W @ y + model.A1 @ W @ np.linalg.solve(sols.R, y) \
            + g.block(0)
        gi = group_inverse(Pstar)
        x = gi.sharp @ rhs + opt.alpha * np.ones(m)
        alpha = opt.alpha

    R_max = g.N + _EXTRA_LEVELS if opt.R_max is None else max(2, int(opt.R_max))
    u = np.empty((R_max + 1, m))
    Wg = _w_times_rhs(W, g)
    # same stable regrouping as evaluate_u_sequence, with (R, I) for (V1, E):
    # R^{-r} multiplies only the deviation y - y*; the series tail
    # sum_{k=r+1}^{N} R^{k-r} g_k goes through positive powers
    tails = np.zeros((g.N + 1, m))
    for r in range(g.N - 1, -1, -1):
        tails[r] = sols.R @ (g.block(r + 1) + tails[r + 1])
    xr = x.copy()
    t = y - y_star                   # R^{-r} (y - y*)
    down = np.zeros(m)               # sum_{j=0}^{r-1} G^j W g_{r-j}
    for r in range(R_max + 1):
        if r > 0:
            xr = sols.G @ xr
            down = sols.G @ down + (Wg[r] if r <= g.N else 0.0)
            t = np.linalg.solve(sols.R, t)
        tail = tails[r] if r < g.N else np.zeros(m)
        u[r] = xr - down + W @ (t - tail)
    report = verify.residuals(model, g, u, tol=opt.residual_tol)
    return PoissonSolution(classification=sols.classification, x=x, y=y,
                           y_star=y_star, alpha=alpha, sigma1=np.zeros(m),
                           R_max=R_max, u=u, diagnostics=report)
