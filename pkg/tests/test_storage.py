import io

import numpy as np
import pytest

from brl_lab.discretization import TimeGrid, build_maps, simulate
from brl_lab.errors import (
    NotL2Controllable,
    NotStrictlyContractive,
    NotStrictSchur,
    ShapeError,
    Unreachable,
)
from brl_lab.kyp import kyp_node_check
from brl_lab.storage import (
    available_storage,
    dissipation_audit,
    extremal_band,
    extremal_solutions,
    required_supply,
    richardson,
    storage_ordering_check,
)
from brl_lab.system_model import StateSpaceSystem, diagonal_example, truncate

from helpers import random_stable, riccati_extremals


@pytest.fixture(scope="module")
def small_instance():
    s = random_stable(np.random.default_rng(30), 2, 1, 1, hinf=0.7)
    return s, build_maps(s, TimeGrid(8.0, 40))


def test_zero_state_has_zero_storage(small_instance):
    s, mp = small_instance
    assert available_storage(mp, np.zeros(2)).value == 0.0
    assert required_supply(mp, np.zeros(2)).value == 0.0


def test_storage_closed_forms_match_oracles(small_instance):
    s, mp = small_instance
    rng = np.random.default_rng(0)
    for _ in range(3):
        x0 = rng.standard_normal(2)
        a = available_storage(mp, x0)
        ao = available_storage(mp, x0, method="oracle")
        assert abs(a.value - ao.value) <= 1e-5 * a.value
        r = required_supply(mp, x0)
        ro = required_supply(mp, x0, method="oracle")
        assert abs(r.value - ro.value) <= 1e-5 * r.value
        assert a.value <= r.value


def test_optimizers_attain_values(small_instance):
    s, mp = small_instance
    x0 = np.array([0.3, -1.2])
    a = available_storage(mp, x0)
    v = mp.Wo @ x0 + mp.Tfut @ a.optimizer
    assert np.vdot(v, v).real - np.vdot(a.optimizer, a.optimizer).real == pytest.approx(a.value,
                                                                                         rel=1e-9)
    r = required_supply(mp, x0)
    u = r.optimizer
    np.testing.assert_allclose(mp.Wc @ u, x0, atol=1e-9)
    F = np.eye(u.size) - mp.Tfut.T @ mp.Tfut
    assert u @ F @ u == pytest.approx(r.value, rel=1e-9)


def test_quadratic_homogeneity_and_gram_form(small_instance):
    s, mp = small_instance
    Ha, Hr = extremal_solutions(mp)
    rng = np.random.default_rng(1)
    for _ in range(20):
        x0 = rng.standard_normal(2)
        alpha = rng.uniform(-3, 3)
        a = available_storage(mp, x0).value
        assert available_storage(mp, alpha * x0).value == pytest.approx(alpha ** 2 * a, rel=1e-9)
        assert x0 @ Ha @ x0 == pytest.approx(a, rel=1e-9)
        assert x0 @ Hr @ x0 == pytest.approx(required_supply(mp, x0).value, rel=1e-7)


def test_auto_falls_back_with_warning():
    s = StateSpaceSystem([[-1.0]], [[1.0]], [[1.0]], [[1.0]])
    mp = build_maps(s, TimeGrid(2.0, 10))
    with pytest.raises(NotStrictlyContractive):
        available_storage(mp, [1.0])
    rep = available_storage(mp, [1.0], method="auto")
    assert rep.method == "oracle" and rep.warnings
    with pytest.raises(NotStrictSchur):
        extremal_solutions(mp)
    with pytest.raises(ShapeError):
        available_storage(mp, [1.0, 2.0])


def test_unreachable_state():
    # second state is not driven by the input
    s = StateSpaceSystem(np.diag([-1.0, -2.0]), [[1.0], [0.0]], [[1.0, 1.0]], [[0.0]])
    mp = build_maps(s, TimeGrid(6.0, 40))
    with pytest.raises(Unreachable):
        required_supply(mp, [0.0, 1.0])
    assert required_supply(mp, [1.0, 0.0]).value > 0
    with pytest.raises(NotL2Controllable):
        extremal_solutions(mp)


def test_richardson_exact_on_polynomial_error():
    h = 0.1
    f = lambda hh: 3.0 + 2.0 * hh ** 2 - 5.0 * hh ** 3
    assert richardson([f(h), f(h / 2), f(h / 4)]) == pytest.approx(3.0, abs=1e-13)
    with pytest.raises(ValueError):
        richardson([1.0, 2.0])


@pytest.mark.parametrize("N", [1, 3])
def test_diagonal_example_extremals_are_two_and_eight(N):
    band = extremal_band(truncate(diagonal_example(N), N), levels=3, horizon_factor=18.0,
                         h_scale=0.05)
    np.testing.assert_allclose(band.Ha, 2.0 * np.eye(N), atol=1e-6)
    np.testing.assert_allclose(band.Hr, 8.0 * np.eye(N), atol=1e-6)


def test_single_grid_is_second_order_accurate():
    s = truncate(diagonal_example(1), 1)
    errs = []
    for steps in (256, 512):
        band = extremal_band(s, steps=steps, horizon_factor=18.0)
        errs.append(abs(band.Ha[0, 0] - 2.0))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_band_matches_riccati_oracle():
    rng = np.random.default_rng(31)
    for complex_ in (False, True):
        s = random_stable(rng, 3, 2, 2, complex_=complex_)
        Ha_ref, Hr_ref = riccati_extremals(s)
        band = extremal_band(s, levels=3, horizon_factor=18.0, h_scale=0.05)
        assert np.abs(band.Ha - Ha_ref).max() <= 1e-6 * max(1.0, np.abs(Ha_ref).max())
        assert np.abs(band.Hr - Hr_ref).max() <= 1e-5 * max(1.0, np.abs(Hr_ref).max())
        assert storage_ordering_check(band.Ha, band.Ha, band.Hr)
        assert kyp_node_check(s, band.Ha) <= 1e-6
        assert kyp_node_check(s, band.Hr) <= 1e-5


def test_splitting_agrees_with_joint_computation():
    s = truncate(diagonal_example(2), 2)
    g = TimeGrid(12.0, 1024)
    a = extremal_band(s, g, split=True)
    b = extremal_band(s, g, split=False)
    np.testing.assert_allclose(a.Ha, b.Ha, atol=1e-9)
    np.testing.assert_allclose(a.Hr, b.Hr, atol=1e-7)
    assert len(a.grids) == 2 and len(b.grids) == 1


def test_ordering_check():
    assert storage_ordering_check(np.eye(2), 2 * np.eye(2), 3 * np.eye(2))
    assert not storage_ordering_check(np.eye(2), 4 * np.eye(2), 3 * np.eye(2))


def passive_system():
    # A + A^T + C^T C <= 0, B = C^T, D = 0 makes H = I a storage function
    A = np.array([[-1.0, 2.0], [-2.0, -1.0]])
    C = np.array([[1.0, 0.5]])
    return StateSpaceSystem(A, C.T * 0.5, C, [[0.0]])


def test_audit_zero_storage_fails_and_identity_passes():
    s = passive_system()
    assert kyp_node_check(s, np.eye(2)) <= 0
    g = TimeGrid(4.0, 200)
    rng = np.random.default_rng(2)
    tr = simulate(s, np.array([1.0, -1.0]), rng.standard_normal((200, 1)), g)
    led_zero = dissipation_audit(s, np.zeros((2, 2)), tr)
    assert not led_zero.passed(1e-8)
    led_id = dissipation_audit(s, np.eye(2), tr)
    assert led_id.max_violation <= 10 * g.h ** 2
    assert led_id.summary(1e-2)["pass"]
    fh = io.StringIO()
    led_id.write_csv(fh)
    assert fh.getvalue().startswith("t1, t2, lhs, rhs, slack")


def test_audit_pairs_and_validation():
    s = passive_system()
    g = TimeGrid(1.0, 10)
    tr = simulate(s, [1.0, 0.0], np.zeros((10, 1)), g)
    led = dissipation_audit(s, np.eye(2), tr)
    assert led.rows.shape == (55, 5)
    with pytest.raises(ValueError):
        dissipation_audit(s, np.eye(2), tr, mode="bogus")
    with pytest.raises(ValueError):
        dissipation_audit(s, np.eye(2), tr, mode="strict", delta=1.0)
