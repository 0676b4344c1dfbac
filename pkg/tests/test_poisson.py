import numpy as np
import pytest

from qbdpoisson import (Classification, ClassificationError,
                        InfeasibleConstraintError, NumericalError, QbdModel,
                        SolveOptions, compute_sigma, compute_y_star,
                        evaluate_u, evaluate_u_sequence, group_inverse,
                        pi_dot_g, random_model, residuals, solve_model,
                        solve_nonsingular_a1, solve_poisson, split, stationary,
                        compute_w)

from conftest import random_rhs, rhs, scalar_model


def direct_u(x, y, G, sp, W, g, r):
    """Oracle: the unregrouped solution formula with explicit matrix powers,

    u_r = G^r x + L V1^{-r} y
          - sum_{k=1}^{r} (G^{r-k} - L V1^{k-r} E) W g_k
          - sum_{j=1}^{nu-1} K V0^j F W g_{j+r}.
    """
    m = G.shape[0]
    v1_inv = np.linalg.inv(sp.V1) if sp.p else None
    acc = np.linalg.matrix_power(G, r) @ np.asarray(x, dtype=float)
    if sp.p:
        acc = acc + sp.L @ np.linalg.matrix_power(v1_inv, r) @ np.asarray(y, dtype=float)
    for k in range(1, r + 1):
        term = np.linalg.matrix_power(G, r - k) @ W @ g.block(k)
        if sp.p:
            term = term - sp.L @ np.linalg.matrix_power(v1_inv, r - k) @ sp.E @ W @ g.block(k)
        acc = acc - term
    for j in range(1, sp.nu):
        acc = acc - sp.K @ np.linalg.matrix_power(sp.V0, j) @ sp.F @ W @ g.block(j + r)
    return acc


def _ingredients(model):
    s = solve_model(model)
    sp = split(s.Ghat)
    w = compute_w(s.G, s.U, s.R, s.Ghat)
    return s, sp, w


def test_sigma_scalar_values(pr1, pr1_rhs):
    s, sp, w = _ingredients(pr1)
    # r = 1: (G^0 - L V1^0 E) = 1 - 1 = 0 annihilates the only term
    assert compute_sigma(s.G, sp, w.W, pr1_rhs, 1)[0] == pytest.approx(0.0, abs=1e-12)
    # r = 3: -(1 - 3^2) W g_1 with W g_1 = 7.5
    assert compute_sigma(s.G, sp, w.W, pr1_rhs, 3)[0] == pytest.approx(60.0, abs=1e-9)


def test_sigma_vanishes_without_interior_forcing(pr1):
    s, sp, w = _ingredients(pr1)
    g0_only = rhs([4.2])
    for r in range(6):
        assert compute_sigma(s.G, sp, w.W, g0_only, r)[0] == pytest.approx(0.0, abs=1e-14)


def test_sigma_start_identity(pr1, pr1_rhs):
    # sigma_0 = Ghat sigma_1 ties the two lowest particular blocks together
    for seed in (3, 4):
        model = random_model(seed, 3, Classification.POSITIVE_RECURRENT)
        s, sp, w = _ingredients(model)
        g = random_rhs(seed, 3)
        sigma0 = compute_sigma(s.G, sp, w.W, g, 0)
        sigma1 = compute_sigma(s.G, sp, w.W, g, 1)
        np.testing.assert_allclose(sigma0, s.Ghat @ sigma1, atol=1e-10)


def test_y_star_scalar_values(pr1):
    s, sp, w = _ingredients(pr1)
    assert compute_y_star(sp, w.W, rhs([1.0], [-3.0]))[0] == pytest.approx(-2.5, abs=1e-12)
    assert compute_y_star(sp, w.W, rhs([7.0]))[0] == pytest.approx(0.0, abs=1e-15)
    assert compute_y_star(sp, w.W, rhs([0.0], [3.0]))[0] == pytest.approx(2.5, abs=1e-12)


def group_inverse_equations_hold(H, sharp):
    """Oracle: the three defining equations, by direct multiplication."""
    return (np.allclose(H @ sharp, sharp @ H, atol=1e-10)
            and np.allclose(H @ sharp @ H, H, atol=1e-10)
            and np.allclose(sharp @ H @ sharp, sharp, atol=1e-10))


def test_group_inverse_scalar_cases():
    gi = group_inverse(np.array([[1.0]]))
    assert gi.sharp[0, 0] == 0.0
    assert gi.pi_star[0] == pytest.approx(1.0)
    gi = group_inverse(np.array([[0.6]]))
    assert not gi.recurrent
    assert gi.sharp[0, 0] == pytest.approx(2.5, abs=1e-14)


def test_group_inverse_permutation():
    Pstar = np.array([[0.0, 1.0], [1.0, 0.0]])
    gi = group_inverse(Pstar)
    np.testing.assert_allclose(gi.sharp, [[0.25, -0.25], [-0.25, 0.25]], atol=1e-12)
    assert group_inverse_equations_hold(np.eye(2) - Pstar, gi.sharp)


def test_group_inverse_characterization_random():
    for seed in range(6):
        cls = Classification.POSITIVE_RECURRENT if seed % 2 else Classification.NULL_RECURRENT
        model = random_model(seed, seed % 4 + 1, cls)
        s = solve_model(model)
        Pstar = model.B + model.A1 @ s.G
        gi = group_inverse(Pstar)
        m = model.m
        eye = np.eye(m)
        np.testing.assert_allclose(
            eye - (eye - Pstar) @ gi.sharp, np.outer(np.ones(m), gi.pi_star),
            atol=1e-10)
        np.testing.assert_allclose(gi.pi_star @ gi.sharp, np.zeros(m), atol=1e-10)
        assert group_inverse_equations_hold(eye - Pstar, gi.sharp)


def test_positive_recurrent_walkthrough(pr1, pr1_rhs):
    sol = solve_poisson(pr1, pr1_rhs)
    assert sol.classification is Classification.POSITIVE_RECURRENT
    # pi^T g = (2/3)(1) + (2/9)(-3) = 0, so the minimal-norm y_perp vanishes
    assert sol.y[0] == pytest.approx(-2.5, abs=1e-12)
    assert sol.y_star[0] == pytest.approx(-2.5, abs=1e-12)
    assert sol.u[0, 0] == pytest.approx(sol.x[0] - 2.5, abs=1e-12)
    for r in range(1, sol.R_max + 1):
        assert sol.u[r, 0] == pytest.approx(sol.x[0] - 7.5, abs=1e-10)
    assert sol.diagnostics.passed
    assert sol.diagnostics.max_residual < 1e-12


def test_alpha_shifts_recurrent_solution(pr1, pr1_rhs):
    base = solve_poisson(pr1, pr1_rhs, SolveOptions(alpha=0.0))
    lifted = solve_poisson(pr1, pr1_rhs, SolveOptions(alpha=1.25))
    np.testing.assert_allclose(lifted.u - base.u, 1.25, atol=1e-10)
    assert lifted.diagnostics.passed


def test_transient_solution(tr1, tr1_rhs):
    sol = solve_poisson(tr1, tr1_rhs)
    assert sol.classification is Classification.TRANSIENT
    assert sol.alpha is None
    assert sol.x[0] == pytest.approx(2.5, abs=1e-13)
    for r in range(sol.R_max + 1):
        assert sol.u[r, 0] == pytest.approx(2.5 / 3.0 ** r, abs=1e-12)
    # boundary: -0.6 * 2.5 + 0.6 * (2.5 / 3) = -1 = -g_0
    assert sol.diagnostics.boundary_residual < 1e-14


def test_transient_free_parameter(tr1, tr1_rhs):
    sol = solve_poisson(tr1, tr1_rhs, SolveOptions(y_free=(0.3,)))
    assert sol.diagnostics.passed
    with pytest.raises(ValueError, match="y_free"):
        solve_poisson(tr1, tr1_rhs, SolveOptions(y_free=(0.3, 0.4)))


def test_unbalanced_rhs_forces_growing_solution(pr1):
    # pi^T g = 2/3 != 0: the constraint pins y_perp = -2.5 and the solution
    # grows like -2.5 * 3^r
    g = rhs([1.0])
    sol = solve_poisson(pr1, g)
    assert sol.y_star[0] == pytest.approx(0.0, abs=1e-15)
    assert sol.y[0] == pytest.approx(-2.5, abs=1e-12)
    assert sol.diagnostics.passed
    ratio = sol.u[6, 0] / sol.u[5, 0]
    assert ratio == pytest.approx(3.0, abs=1e-6)


def test_zero_mode_requires_balanced_rhs(pr1):
    with pytest.raises(InfeasibleConstraintError):
        solve_poisson(pr1, rhs([1.0]), SolveOptions(y_perp_mode="zero"))


def test_explicit_y_perp_checked_against_constraint(pr1):
    sol = solve_poisson(pr1, rhs([1.0]),
                        SolveOptions(y_perp_mode="explicit", y_perp=(-2.5,)))
    assert sol.diagnostics.passed
    with pytest.raises(InfeasibleConstraintError):
        solve_poisson(pr1, rhs([1.0]),
                      SolveOptions(y_perp_mode="explicit", y_perp=(1.0,)))


@pytest.mark.parametrize("seed", range(8))
def test_regrouped_evaluation_matches_direct_formula(seed):
    m = seed % 5 + 1
    cls = Classification.POSITIVE_RECURRENT if seed % 2 == 0 else Classification.TRANSIENT
    model = random_model(seed, m, cls)
    s, sp, w = _ingredients(model)
    g = random_rhs(seed, m)
    gen = np.random.Generator(np.random.Philox(key=seed))
    x = gen.normal(size=m)
    y = gen.normal(size=sp.p)
    R_max = g.N + 6
    u = evaluate_u_sequence(x, y, s.G, sp, w.W, g, R_max)
    for r in range(R_max + 1):
        np.testing.assert_allclose(u[r], direct_u(x, y, s.G, sp, w.W, g, r),
                                    atol=1e-9 * (1 + np.max(np.abs(u))))
    np.testing.assert_allclose(evaluate_u(x, y, s.G, sp, w.W, g, 3), u[3],
                               atol=1e-12)


@pytest.mark.parametrize("seed", [0, 2, 5])
def test_homogeneous_family(seed):
    m = seed % 4 + 2
    model = random_model(seed, m, Classification.POSITIVE_RECURRENT)
    s, sp, w = _ingredients(model)
    g = random_rhs(seed, m)
    gen = np.random.Generator(np.random.Philox(key=seed + 13))
    x = gen.normal(size=m)
    y = gen.normal(size=sp.p)
    dx = gen.normal(size=m)
    dy = gen.normal(size=sp.p)
    R_max = 8
    base = evaluate_u_sequence(x, y, s.G, sp, w.W, g, R_max)
    bumped = evaluate_u_sequence(x + dx, y + dy, s.G, sp, w.W, g, R_max)
    v1_inv = np.linalg.inv(sp.V1)
    scale = 1 + np.max(np.abs(bumped))
    for r in range(R_max + 1):
        expected = np.linalg.matrix_power(s.G, r) @ dx \
            + sp.L @ np.linalg.matrix_power(v1_inv, r) @ dy
        np.testing.assert_allclose(bumped[r] - base[r], expected,
                                   atol=1e-9 * scale)
    # the difference solves the homogeneous interior equation
    diff = bumped - base
    rep = residuals(model, rhs(*np.zeros((g.N + 2, m))), diff, tol=1e-8)
    assert max(rep.interior_residuals) <= 1e-8 * rep.scale


def test_bounded_solution_when_balanced(pr1, pr1_rhs):
    # balanced forcing with y = y* keeps the solution bounded and flat
    sol = solve_poisson(pr1, pr1_rhs, SolveOptions(R_max=40))
    norms = np.max(np.abs(sol.u), axis=1)
    assert norms.max() < 10.0
    assert abs(sol.u[-1, 0] - sol.u[-2, 0]) < 1e-9


def test_nonsingular_a1_matches_general_path(pr1, pr1_rhs):
    general = solve_poisson(pr1, pr1_rhs)
    simple = solve_nonsingular_a1(pr1, pr1_rhs)
    assert simple.y[0] == pytest.approx(1.0, abs=1e-12)   # y = W^{-1} (-2.5) = 1
    assert simple.diagnostics.passed
    # same solution family: the difference solves the homogeneous equations
    diff = general.u - simple.u
    zero_g = rhs(*np.zeros((pr1_rhs.N + 1, 1)))
    rep = residuals(pr1, zero_g, diff, tol=1e-8)
    assert rep.boundary_residual <= 1e-8 * rep.scale
    assert max(rep.interior_residuals) <= 1e-8 * rep.scale


def test_nonsingular_a1_transient(tr1, tr1_rhs):
    sol = solve_nonsingular_a1(tr1, tr1_rhs)
    for r in range(sol.R_max + 1):
        assert sol.u[r, 0] == pytest.approx(2.5 / 3.0 ** r, abs=1e-12)


def test_nonsingular_a1_rejects_singular_up_block():
    model = scalar_model(0.5, 0.5, 0.0, 1.0)
    with pytest.raises(NumericalError, match="singular"):
        solve_nonsingular_a1(model, rhs([1.0]))


def test_nonsingular_a1_rejects_null_recurrent(nr1, nr1_rhs):
    with pytest.raises(ClassificationError):
        solve_nonsingular_a1(nr1, nr1_rhs)


def test_chain_without_up_transitions():
    # A1 = 0 forces p = 0: no free y at all, so an unbalanced rhs has no
    # solution in this family and must be reported as infeasible
    model = QbdModel(B=[[1.0]], A_neg=[[0.5]], A0=[[0.5]], A1=[[0.0]])
    with pytest.raises(InfeasibleConstraintError):
        solve_poisson(model, rhs([1.0]))
    # balanced rhs (R = 0, so only g_0 enters pi^T g): solvable exactly
    sol = solve_poisson(model, rhs([0.0], [-1.0], [2.0]))
    assert sol.y.shape == (0,)
    np.testing.assert_allclose(sol.u.ravel()[:5], [0.0, -2.0, 2.0, 2.0, 2.0],
                               atol=1e-12)
    assert sol.diagnostics.passed


def test_pi_dot_g_matches_brute_force(pr1, pr1_rhs):
    s = solve_model(pr1)
    st = stationary(pr1, s)
    total = sum(float(st.level(k) @ pr1_rhs.block(k)) for k in range(pr1_rhs.N + 1))
    assert pi_dot_g(st.pi0, s.R, pr1_rhs) == pytest.approx(total, abs=1e-14)
    assert pi_dot_g(st.pi0, s.R, pr1_rhs) == pytest.approx(0.0, abs=1e-14)
