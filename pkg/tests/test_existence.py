import sys
import os
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import math

import numpy as np
import pytest

from src import density_core
from src.errors import InputError
from src.existence import (Verdict, ZetaMode, bumpy_density, divergence_verdict, growth_bound_check,
                           planar_annulus_inequality_check, planar_existence_verdict, zeta_sequence)
from src.symmetrize import annular_sector, ball


def radial(text, dimension=2):
    return density_core.radial(text, dimension)


def test_zeta_of_exp_square():
    seq = zeta_sequence(radial("r^2"), 1, m_max=20)
    assert seq.log_values[0] == pytest.approx(-2.0)
    assert seq.values[0][1] == pytest.approx(math.exp(-2.0))
    assert seq.log_values[10] == pytest.approx(28.0)
    assert len(seq.log_values) == 21
    assert list(seq.to_frame().columns) == ["m", "log_zeta"]


def test_zeta_of_flat_density_is_one():
    seq = zeta_sequence(radial("0"), 2, m_max=15)
    assert all(v == 1.0 for _, v in seq.values)
    assert divergence_verdict(seq) == Verdict.BOUNDED


def test_zeta_stays_finite_for_double_exponential():
    seq = zeta_sequence(radial("exp(r)"), 1, m_max=200)
    assert all(math.isfinite(v) for v in seq.log_values)
    assert seq.log_values[5] == pytest.approx(math.exp(5.0) - math.exp(7.0) / 2.0)
    assert divergence_verdict(seq) == Verdict.BOUNDED


@pytest.mark.parametrize("profile, expected", [
    ("r^2", Verdict.DIVERGES),
    ("r^3", Verdict.DIVERGES),
    ("exp(0.2*r)", Verdict.DIVERGES),
    ("exp(0.5*r)", Verdict.BOUNDED),
    ("exp(r)", Verdict.BOUNDED),
    ("2^r", Verdict.BOUNDED),
    ("r", Verdict.INCONCLUSIVE),
])
def test_verdict_matches_growth_classification(profile, expected):
    # n = 1: zeta diverges exactly when psi grows slower than 2^(r/2)
    seq = zeta_sequence(radial(profile), 1, m_max=100)
    assert divergence_verdict(seq, horizon=10) == expected


def test_annulus_mode_agrees_for_monotone_density():
    density = radial("r^2")
    radial_seq = zeta_sequence(density, 1, m_max=10)
    annulus_seq = zeta_sequence(density, 1, m_max=10, mode=ZetaMode.ANNULUS)
    assert annulus_seq.mode == ZetaMode.ANNULUS
    assert annulus_seq.log_values == pytest.approx(radial_seq.log_values)


def test_bumpy_density_fools_the_radial_formula():
    density = bumpy_density(1)
    radial_seq = zeta_sequence(density, 1, m_max=40)
    annulus_seq = zeta_sequence(density, 1, m_max=40, mode=ZetaMode.ANNULUS)
    assert divergence_verdict(radial_seq) == Verdict.DIVERGES
    assert divergence_verdict(annulus_seq) == Verdict.BOUNDED


def test_zeta_rejects_bad_arguments():
    with pytest.raises(InputError):
        zeta_sequence(radial("r^2"), 0)
    with pytest.raises(InputError):
        zeta_sequence(radial("r^2"), 1, m_max=-1)
    seq = zeta_sequence(radial("r^2"), 1, m_max=5)
    with pytest.raises(InputError):
        divergence_verdict(seq, horizon=7)
    with pytest.raises(InputError):
        divergence_verdict(seq, horizon=2)


def test_growth_bound_examples():
    assert growth_bound_check(radial("r^2"), 1, 10.0, 0.1, (0.0, 40.0)).holds
    assert growth_bound_check(radial("0"), 1, 1.0, 0.1, (0.0, 40.0)).holds
    violated = growth_bound_check(radial("exp(r)"), 1, 10.0, 0.1, (0.0, 40.0))
    assert not violated.holds
    assert 3.0 < violated.first_violation < 4.0
    with pytest.raises(InputError):
        growth_bound_check(radial("r"), 1, -1.0, 0.1, (0.0, 1.0))


def test_annulus_inequality_small_disk():
    disk = ball((3.0, 0.0), 0.2, 1.0 / 128.0, 0.1)
    check = planar_annulus_inequality_check(disk, 1.0)
    assert check.in_scope
    assert check.holds
    assert check.slack > 0.0
    assert check.to_dict()["P"] == pytest.approx(2.0 * math.pi * 0.2 * math.exp(0.9), rel=0.05)


def test_annulus_inequality_thin_arc():
    arc = annular_sector(2.0, 2.1, -0.1, 0.1, 1.0 / 256.0, 0.1)
    check = planar_annulus_inequality_check(arc, 1.0)
    assert check.in_scope and check.holds


def test_annulus_inequality_scope_and_containment():
    large = planar_annulus_inequality_check(ball((3.0, 0.0), 0.5, 1.0 / 64.0, 1.0), 1.0)
    assert not large.in_scope
    assert large.holds is None
    with pytest.raises(InputError):
        planar_annulus_inequality_check(ball((0.5, 0.0), 0.3, 1.0 / 64.0, 0.1), 1.0)


def _random_admissible_set(rng, h):
    if rng.random() < 0.5:
        distance = float(rng.uniform(1.6, 3.0))
        angle = float(rng.uniform(0.0, 2.0 * math.pi))
        radius = float(rng.uniform(0.05, 0.3))
        return ball((distance * math.cos(angle), distance * math.sin(angle)), radius, h, 0.1)
    r_in = float(rng.uniform(1.2, 2.4))
    thickness = float(rng.uniform(0.05, 0.2))
    middle = float(rng.uniform(-1.2, 1.2))
    span = float(rng.uniform(0.1, 0.5))
    return annular_sector(r_in, r_in + thickness, middle - span / 2, middle + span / 2, h, 0.1)


def test_annulus_inequality_on_random_admissible_sets():
    rng = np.random.default_rng(13)
    checked = 0
    for _ in range(100):
        cset = _random_admissible_set(rng, 1.0 / 64.0)
        check = planar_annulus_inequality_check(cset, 1.0)
        if check.in_scope:
            assert check.holds, f"slack {check.slack} for P = {check.perimeter}"
            checked += 1
    assert checked >= 50


def test_planar_existence_verdict():
    assert planar_existence_verdict(radial("r^2")).minimizers_exist
    flat = planar_existence_verdict(radial("0"))
    assert flat.nondecreasing and not flat.unbounded and not flat.minimizers_exist
    assert not planar_existence_verdict(radial("r^2", 3)).radial
    assert not planar_existence_verdict(bumpy_density(1)).nondecreasing
