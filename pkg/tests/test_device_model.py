import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nanosim.device_model import (SMOOTHING_WINDOW, Chirality, CntfetParams, DomainError, ModelConfig,
                                  Polarity, conductances, diameter, drain_current, ids_vectorized,
                                  is_semiconducting, threshold_voltage)


def fixed(polarity=Polarity.N, vth=0.28, tubes=1, cfg=ModelConfig()):
    """Device with a round threshold, bypassing the chirality path."""
    c = Chirality(19, 0)
    return CntfetParams(polarity, c, tubes, diameter(c, cfg), polarity.sign * vth,
                        tubes * cfg.k_per_tube, tubes * cfg.cap_per_tube, cfg)


NO_CLM = ModelConfig(lambda_=0.0)


# -- geometry ------------------------------------------------------------------

def test_diameter_zigzag_matches_closed_form():
    assert diameter(Chirality(19, 0)) == pytest.approx(0.249 * 19 / math.pi, rel=1e-15)


def test_diameter_armchair_matches_closed_form():
    assert diameter(Chirality(10, 10)) == pytest.approx(0.249 * math.sqrt(200) / math.pi, rel=1e-15)
    # the quoted five-digit value carries a rounding slip of about 4e-5
    assert diameter(Chirality(10, 10)) == pytest.approx(1.12085, rel=1e-4)


def test_standard_formula_adds_cross_term():
    std = ModelConfig(diameter_formula="standard")
    assert diameter(Chirality(10, 10), std) == pytest.approx(0.249 * math.sqrt(300) / math.pi)


@given(st.integers(1, 60))
def test_formulas_agree_for_zigzag(n):
    std = ModelConfig(diameter_formula="standard")
    assert diameter(Chirality(n, 0)) == diameter(Chirality(n, 0), std)


def test_threshold_unit_diameter():
    assert threshold_voltage(1.0) == 0.42


def test_threshold_homogeneous():
    assert threshold_voltage(3.0) == pytest.approx(threshold_voltage(1.5) / 2)


@pytest.mark.parametrize("d", [0.0, -1.0, float("nan"), float("inf")])
def test_threshold_rejects_bad_diameter(d):
    with pytest.raises(DomainError):
        threshold_voltage(d)


@given(st.integers(0, 30), st.integers(1, 30))
def test_threshold_decreases_with_n(m, extra):
    n = m + extra
    lo = threshold_voltage(diameter(Chirality(n, m)))
    hi = threshold_voltage(diameter(Chirality(n + 1, m)))
    assert 0 < hi < lo


@pytest.mark.parametrize("n,m,expected", [(19, 0, True), (9, 0, False), (6, 3, False), (10, 0, True)])
def test_semiconducting_rule(n, m, expected):
    assert is_semiconducting(Chirality(n, m)) is expected


@pytest.mark.parametrize("n,m", [(0, 0), (3, 5), (-1, 0)])
def test_chirality_invariants(n, m):
    with pytest.raises(DomainError):
        Chirality(n, m)


def test_params_from_chirality():
    p = CntfetParams.from_chirality("P", Chirality(19, 0), tubes=3)
    assert p.vth < 0
    assert abs(p.vth) == pytest.approx(0.42 / p.diameter_nm)
    assert p.k_eff == pytest.approx(3 * 40e-6)
    assert p.gate_cap == pytest.approx(12e-18)


def test_params_reject_zero_tubes():
    with pytest.raises(DomainError):
        CntfetParams.from_chirality("N", Chirality(19, 0), tubes=0)


@pytest.mark.parametrize("field,value", [("k_per_tube", 0.0), ("lambda_", -0.1), ("i_off_300K", -1.0),
                                         ("diameter_formula", "other")])
def test_model_config_validation(field, value):
    with pytest.raises(DomainError):
        ModelConfig(**{field: value})


def test_model_config_from_mapping_accepts_lambda_alias():
    cfg = ModelConfig.from_mapping({"lambda": "0.1", "diameter_formula": "standard"})
    assert cfg.lambda_ == 0.1 and cfg.diameter_formula == "standard"


# -- drain current -----------------------------------------------------------------

def test_saturation_example():
    p = fixed(cfg=NO_CLM)
    assert drain_current(p, 0.9, 0.9) == pytest.approx(20e-6 * 0.62**2, rel=1e-4)
    gm, gds = conductances(p, 0.9, 0.9)
    assert gm == pytest.approx(40e-6 * 0.62, rel=1e-4)
    assert abs(gds) < 1e-12


def test_triode_formula():
    p = fixed(cfg=NO_CLM)
    u, v = 0.5, 0.2
    assert drain_current(p, 0.28 + u, v) == pytest.approx(40e-6 * (u * v - v * v / 2), rel=1e-6)


def test_channel_length_modulation_scales_saturation():
    base = drain_current(fixed(cfg=NO_CLM), 0.9, 0.8)
    clm = drain_current(fixed(), 0.9, 0.8)
    assert clm / base == pytest.approx(1 + 0.05 * 0.8, rel=1e-6)


@given(st.floats(-1.5, 1.5), st.sampled_from([Polarity.N, Polarity.P]), st.floats(250, 400))
def test_zero_vds_gives_zero_current(vgs, pol, temp):
    assert drain_current(fixed(pol), vgs, 0.0, temp) == 0.0


def test_subthreshold_bounded_by_off_current():
    p = fixed(tubes=3)
    assert 0 < drain_current(p, 0.0, 0.9) <= 3 * 1e-12


def test_deep_subthreshold_output_conductance_negligible():
    gm, gds = conductances(fixed(), -0.2, 0.6)
    assert abs(gds) < 1e-20


@given(st.floats(-1.2, 1.2), st.floats(-1.2, 1.2), st.floats(250, 400))
def test_polarity_mirror(vgs, vds, temp):
    n, p = fixed(Polarity.N), fixed(Polarity.P)
    assert drain_current(p, vgs, vds, temp) == -drain_current(n, -vgs, -vds, temp)


@given(st.floats(-1.2, 1.2), st.floats(0, 1.2), st.floats(250, 400))
def test_n_device_monotone_for_forward_bias(vgs, vds, temp):
    gm, gds = conductances(fixed(), vgs, vds, temp)
    assert gm >= 0 and gds >= 0


@given(st.floats(-1.2, 1.2), st.floats(-1.2, 1.2))
def test_drain_source_swap_antisymmetry(vgs, vds):
    # exchanging drain and source reverses the current
    p = fixed()
    assert drain_current(p, vgs - vds, -vds) == pytest.approx(-drain_current(p, vgs, vds), rel=1e-12, abs=1e-30)


def test_leakage_rises_with_temperature():
    p = fixed()
    temps = [250, 275, 300, 325, 350, 400]
    leak = [drain_current(p, 0.0, 0.6, t) for t in temps]
    assert all(b > a for a, b in zip(leak, leak[1:]))


def test_on_current_falls_with_temperature():
    p = fixed()
    temps = [250, 275, 300, 325, 350, 400]
    on = [drain_current(p, 0.9, 0.9, t) for t in temps]
    assert all(b < a for a, b in zip(on, on[1:]))


@pytest.mark.parametrize("args", [(float("nan"), 0.1, 300), (0.1, float("inf"), 300), (0.1, 0.1, 0.0)])
def test_rejects_bad_inputs(args):
    with pytest.raises(DomainError):
        drain_current(fixed(), *args)


# -- finite-difference oracle -----------------------------------------------------

def fd_mismatch(p, vgs, vds, temp, h=1e-6):
    """Worst relative gap between analytic and central-difference conductances.

    The scale is the larger conductance, floored at |I| per volt so that a
    conductance that is zero next to a large current is judged against the
    roundoff of the difference quotient rather than against zero.
    """
    gm, gds = ids_vectorized(p.polarity.sign, abs(p.vth), p.k_eff, p.tubes, p.model, vgs, vds, temp)[1:]
    f = lambda a, b: ids_vectorized(p.polarity.sign, abs(p.vth), p.k_eff, p.tubes, p.model, a, b, temp)[0]
    gm_fd = (f(vgs + h, vds) - f(vgs - h, vds)) / (2 * h)
    gds_fd = (f(vgs, vds + h) - f(vgs, vds - h)) / (2 * h)
    floor = np.maximum(np.abs(f(vgs, vds)), 1e-30)
    scale = np.maximum(np.maximum(np.abs(gm), np.abs(gds)), floor)
    return np.maximum(np.abs(gm - gm_fd), np.abs(gds - gds_fd)) / scale


def boundary_points(rng, count, vth=0.28):
    """Random biases concentrated on the region seams: u = 0, u = v, v = 0,
    and the edges of the smoothing windows."""
    w = SMOOTHING_WINDOW
    seams = np.array([0.0, -w / 2, w / 2, w])
    u = rng.choice(seams, count) + rng.uniform(-2 * w, 2 * w, count)
    v = rng.uniform(-1.0, 1.0, count)
    on_diag = rng.random(count) < 0.3
    v[on_diag] = u[on_diag] + rng.uniform(-w, w, on_diag.sum())
    near_zero = rng.random(count) < 0.2
    v[near_zero] = rng.uniform(-2e-3, 2e-3, near_zero.sum())
    return u + vth, v


@pytest.mark.parametrize("pol", [Polarity.N, Polarity.P])
def test_conductances_match_finite_differences_everywhere(pol):
    rng = np.random.default_rng(7)
    p = fixed(pol, tubes=3)
    vgs = rng.uniform(-1.3, 1.3, 1000)
    vds = rng.uniform(-1.3, 1.3, 1000)
    bu, bv = boundary_points(rng, 1000)
    vgs = np.concatenate([vgs, pol.sign * bu])
    vds = np.concatenate([vds, pol.sign * bv])
    temps = rng.uniform(250, 400, vgs.size)
    assert fd_mismatch(p, vgs, vds, temps).max() <= 1e-4


def test_scalar_wrapper_agrees_with_vectorized():
    p = fixed()
    i, gm, gds = ids_vectorized(1, 0.28, p.k_eff, 1, p.model, 0.7, 0.3, 310.0)
    assert drain_current(p, 0.7, 0.3, 310.0) == float(i)
    assert conductances(p, 0.7, 0.3, 310.0) == (float(gm), float(gds))


@settings(max_examples=200)
@given(st.floats(-0.05, 0.05), st.floats(-0.05, 0.6))
def test_current_continuous_across_threshold(du, vds):
    p = fixed()
    a = drain_current(p, 0.28 + du, vds)
    b = drain_current(p, 0.28 + du + 1e-9, vds)
    assert abs(a - b) <= 1e-9 * 40e-6 * 1.2 + 1e-18
