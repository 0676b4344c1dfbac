"""Independent oracles and deterministic random-model generation.

``residuals`` plugs a candidate solution straight into the level equations,
``forward_oracle`` reconstructs a solution by running the three-term
recurrence forward (numerically unstable over long horizons, so comparisons
stay short), and ``random_model`` draws reproducible test models of a
requested recurrence class from a counter-based stream.  The generation
recipe is part of the public test contract: failures reproduce by seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qme
from ._linalg import Array, condition_number, norm_inf
from .exceptions import NumericalError
from .model import QbdModel, RhsSpec

DEFAULT_TOL = 1e-7
_DRIFT_MARGIN = 1e-6


@dataclass(frozen=True)
class ResidualReport:
    """Residuals of a candidate solution against the level equations.

    ``passed`` holds iff the largest residual is at most tol * scale, with
    scale = 1 + max_r ||u_r||.
    """

    boundary_residual: float
    interior_residuals: tuple[float, ...]
    scale: float
    tol: float
    passed: bool

    @property
    def max_residual(self) -> float:
        return max(self.boundary_residual, *(self.interior_residuals or (0.0,)))

    def to_dict(self) -> dict:
        return {
            "boundary": self.boundary_residual,
            "interior": list(self.interior_residuals),
            "scale": self.scale,
            "tol": self.tol,
            "pass": self.passed,
        }


def residuals(model: QbdModel, g: RhsSpec, u, tol: float = DEFAULT_TOL
              ) -> ResidualReport:
    """Exact residual evaluation of the boundary and interior equations.

    The boundary residual is ||(B - I) u_0 + A1 u_1 + g_0||; interior
    residual r (for r = 0 ... len(u) - 3) is
    ||A_neg u_r + (A0 - I) u_{r+1} + A1 u_{r+2} + g_{r+1}||.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    if u.shape[0] < 3:
        raise ValueError(f"need at least 3 solution blocks, got {u.shape[0]}")
    if u.shape[1] != model.m:
        raise ValueError(f"solution blocks have length {u.shape[1]}, "
                         f"model has m = {model.m}")
    eye = np.eye(model.m)
    scale = 1.0 + max(norm_inf(block) for block in u)
    boundary = norm_inf((model.B - eye) @ u[0] + model.A1 @ u[1] + g.block(0))
    interior = tuple(
        norm_inf(model.A_neg @ u[r] + (model.A0 - eye) @ u[r + 1]
                 + model.A1 @ u[r + 2] + g.block(r + 1))
        for r in range(u.shape[0] - 2))
    passed = max(boundary, *interior) <= tol * scale
    return ResidualReport(boundary_residual=boundary,
                          interior_residuals=interior,
                          scale=scale, tol=tol, passed=passed)


def forward_oracle(model: QbdModel, g: RhsSpec, u0, u1, R_max: int) -> Array:
    """Reconstruct u_2 ... u_{R_max} from seeds (u_0, u_1) by forward recurrence.

    u_{r+2} = A1^{-1} (-g_{r+1} - A_neg u_r - (A0 - I) u_{r+1}).  Requires a
    nonsingular A1; growing characteristic modes amplify rounding, so use
    short horizons only.
    """
    if condition_number(model.A1) > 1e12:
        raise NumericalError("forward recurrence requires a nonsingular A1")
    if R_max < 1:
        raise ValueError(f"horizon must cover both seeds, got R_max = {R_max}")
    m = model.m
    eye = np.eye(m)
    out = np.empty((R_max + 1, m))
    out[0] = np.asarray(u0, dtype=float)
    out[1] = np.asarray(u1, dtype=float)
    for r in range(R_max - 1):
        rhs = -g.block(r + 1) - model.A_neg @ out[r] - (model.A0 - eye) @ out[r + 1]
        out[r + 2] = np.linalg.solve(model.A1, rhs)
    return out


def _draw_directional(rng: np.random.Generator, m: int,
                      target: qme.Classification) -> QbdModel | None:
    raw = rng.uniform(0.05, 1.0, size=(3, m, m))
    raw /= raw.sum(axis=(0, 2))[None, :, None]
    A_neg, A0, A1 = raw[0], raw[1], raw[2]
    model = QbdModel(B=A_neg + A0, A_neg=A_neg, A0=A0, A1=A1)
    d = qme.drift(model)
    if abs(d) < _DRIFT_MARGIN:
        return None
    want_negative = target is qme.Classification.POSITIVE_RECURRENT
    if (d < 0) != want_negative:
        # moving the mass between the up and down blocks flips the drift sign
        # without touching A_neg + A0 + A1
        A_neg, A1 = A1, A_neg
        model = QbdModel(B=A_neg + A0, A_neg=A_neg, A0=A0, A1=A1)
    return model


def _draw_null(rng: np.random.Generator, m: int) -> QbdModel:
    raw = rng.uniform(0.05, 1.0, size=(m, m))
    mass = rng.uniform(0.15, 0.45, size=m)
    A_neg = raw * (mass / raw.sum(axis=1))[:, None]
    A1 = A_neg.copy()                      # equal up/down blocks: drift exactly 0
    A0 = np.diag(1.0 - 2.0 * A_neg.sum(axis=1))
    return QbdModel(B=A_neg + A0, A_neg=A_neg, A0=A0, A1=A1)


def random_model(seed: int, m: int, target_class: qme.Classification,
                 *, max_retries: int = 50,
                 null_band: float = qme.NULL_BAND) -> QbdModel:
    """Deterministic random model of the requested recurrence class.

    Strictly positive blocks are normalized to a stochastic repeating row;
    the boundary block is the reflecting choice B = A_neg + A0, which keeps
    B + A1 stochastic.  Positive recurrent / transient targets are reached by
    exchanging mass between A1 and A_neg until the drift sign is right; the
    null recurrent target sets A1 = A_neg (zero drift by symmetry) with a
    diagonal A0 absorbing the rest of each row.  The classification of the
    output is verified before returning.
    """
    if m < 1:
        raise ValueError(f"phase count must be positive, got {m}")
    target = qme.Classification(target_class)
    rng = np.random.Generator(np.random.Philox(key=abs(int(seed))))
    for _ in range(max_retries):
        if target is qme.Classification.NULL_RECURRENT:
            model = _draw_null(rng, m)
        else:
            model = _draw_directional(rng, m, target)
            if model is None:
                continue
        d = qme.drift(model)
        got = qme._classify_drift(d, null_band)
        if got is target:
            return model
    raise NumericalError(
        f"random model generation failed for seed={seed}, m={m}, "
        f"target={target.value} after {max_retries} attempts")
