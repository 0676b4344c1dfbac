import numpy as np
import pytest

from qbdpoisson import (Classification, NumericalError, build_triple,
                        check_identities, compute_w, eta, random_model,
                        solve_model, split, w_series)


def geometric_series_w(G, U, R, terms=400):
    """Oracle: truncated defining series, plain summation."""
    m = G.shape[0]
    core = np.linalg.solve(U - np.eye(m), np.eye(m))
    total = np.zeros((m, m))
    term = core.copy()
    for _ in range(terms):
        total += term
        term = G @ term @ R
    return total


def test_w_scalar_values(pr1, tr1):
    # scalar oracle: sum G^j (U-1)^{-1} R^j = (1/(U-1)) / (1 - G R)
    for model, g_val, r_val in [(pr1, 1.0, 1.0 / 3.0), (tr1, 1.0 / 3.0, 1.0)]:
        s = solve_model(model)
        expected = (1.0 / (0.4 - 1.0)) / (1.0 - g_val * r_val)
        assert expected == pytest.approx(-2.5, abs=1e-14)
        w = compute_w(s.G, s.U, s.R, s.Ghat)
        assert w.W[0, 0] == pytest.approx(-2.5, abs=1e-12)
        # closed-form inverse: (1-U)(G Ghat - 1) = 0.6 * (1/3 - 1) = -0.4
        assert w.W_inv[0, 0] == pytest.approx(-0.4, abs=1e-12)


def test_w_closed_form_matches_series(pr1):
    s = solve_model(pr1)
    w = compute_w(s.G, s.U, s.R, s.Ghat)
    np.testing.assert_allclose(w.W, geometric_series_w(s.G, s.U, s.R),
                               atol=1e-10)
    np.testing.assert_allclose(w.W, w_series(s.G, s.U, s.R), atol=1e-10)


def test_w_rejects_null_recurrent_input(nr1):
    s = solve_model(nr1)
    with pytest.raises(NumericalError, match="null recurrent"):
        compute_w(s.G, s.U, s.R, s.Ghat)
    with pytest.raises(NumericalError):
        w_series(s.G, s.U, s.R)


def test_triple_assembly_scalar(pr1):
    s = solve_model(pr1)
    sp = split(s.Ghat)
    w = compute_w(s.G, s.U, s.R, s.Ghat)
    t = build_triple(s.G, sp, w.W)
    np.testing.assert_allclose(t.X1, [[1.0, 1.0]], atol=1e-12)
    assert t.X2.shape == (1, 0)
    np.testing.assert_allclose(t.T1, np.diag([1.0, 3.0]), atol=1e-12)
    np.testing.assert_allclose(t.Z1.ravel(), [-2.5, 2.5], atol=1e-12)


def test_resolvent_identity_scalar(pr1):
    # eta(2) = 0.6 - 1.6 + 0.8 = -0.2; the triple must reproduce 1/eta(2) = -5
    s = solve_model(pr1)
    sp = split(s.Ghat)
    w = compute_w(s.G, s.U, s.R, s.Ghat)
    t = build_triple(s.G, sp, w.W)
    assert eta(pr1, 2.0)[0, 0] == pytest.approx(-0.2, abs=1e-15)
    assert t.resolvent(2.0)[0, 0] == pytest.approx(-5.0, abs=1e-12)


def test_identity_suite_scalar(pr1, tr1):
    for model in (pr1, tr1):
        s = solve_model(model)
        sp = split(s.Ghat)
        w = compute_w(s.G, s.U, s.R, s.Ghat)
        report = check_identities(model, s, sp, w)
        for name, value in report.items():
            if name == "pair_condition_number":
                assert value < 1e12
            else:
                assert value < 1e-12, f"{name} = {value}"


@pytest.mark.parametrize("seed", range(10))
def test_identity_suite_random(seed):
    m = seed % 6 + 1
    cls = Classification.POSITIVE_RECURRENT if seed % 2 == 0 else Classification.TRANSIENT
    model = random_model(seed, m, cls)
    s = solve_model(model)
    sp = split(s.Ghat)
    w = compute_w(s.G, s.U, s.R, s.Ghat)
    np.testing.assert_allclose(w.W, geometric_series_w(s.G, s.U, s.R, terms=2000),
                               atol=1e-8 * (1 + np.max(np.abs(w.W))))
    report = check_identities(model, s, sp, w)
    for name, value in report.items():
        if name == "pair_condition_number":
            assert value < 1e12
        else:
            assert value < 1e-8, f"{name} = {value}"
