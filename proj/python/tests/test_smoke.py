import math

import pytest

import hhp_py

SMALL = {"half_width_xy": 3, "half_width_tau": 9, "n_xy": 12, "n_tau": 12, "t_horizon": 1}


def test_group_and_kernel():
    assert hhp_py.compose((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)) == (1.0, 1.0, 2.0)
    assert hhp_py.koranyi_norm(0.0, 0.0, 16.0) == pytest.approx(4.0)
    assert hhp_py.kernel_at_origin(1.0) == pytest.approx(1.0 / 64.0)
    assert hhp_py.heat_kernel(1.0, 0.0, 0.0, 0.0) == pytest.approx(1.0 / 64.0, rel=1e-8)
    # Dilation identity h_t(x, y, tau) = t^{-2} h_1(x/sqrt t, y/sqrt t, tau/t).
    t = 4.0
    lhs = hhp_py.heat_kernel(t, 0.6, -0.2, 1.0)
    rhs = hhp_py.heat_kernel(1.0, 0.3, -0.1, 0.25) / t**2
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_thresholds():
    assert hhp_py.fujita_exponent(0.0) == 1.5
    assert hhp_py.hardy_threshold(-0.5) == pytest.approx(1 + 1.5 / 3.5)
    assert hhp_py.classify(1.4, -0.5) == "gap"
    assert hhp_py.classify(2.0, 0.0) == "global"


def test_config_errors():
    with pytest.raises(hhp_py.ConfigError):
        hhp_py.config_echo({"gama": 1})
    with pytest.raises(ValueError):
        hhp_py.run_single({"gamma": -3})
    echo = hhp_py.config_echo({"p_values": [1.3, 2], "offset": True})
    assert echo["p_values"] == "1.3,2"
    assert set(echo) == set(hhp_py.config_keys())


def test_single_run_and_sweep():
    cell = hhp_py.run_single(dict(SMALL, gamma=0.0, p=2.0))
    assert cell["verdict"] == "global_certified"
    assert cell["certified"] is True
    assert math.isfinite(cell["max_norm"])
    assert cell["history"]
    assert '"verdict": "global_certified"' in cell["manifest"]

    cfg = dict(SMALL, gamma_values=[-0.5], p_values=[1.4, 2.0])
    cells, csv = hhp_py.run_sweep(cfg)
    assert [c["verdict"] for c in cells][0] == "open_gap"
    assert csv.splitlines()[0] == "p,gamma,p_c,hardy_threshold,verdict,t_final,max_norm"
    assert len(csv.splitlines()) == 3
    assert hhp_py.run_sweep(cfg)[1] == csv


def test_kernel_check_rows():
    rows = hhp_py.kernel_check(0)
    names = {r["name"] for r in rows}
    assert {"normalization", "scaling", "gaussian_envelope", "residual_order"} <= names
    assert all(r["pass"] for r in rows)
