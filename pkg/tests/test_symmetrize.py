import sys
import os
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import math

import numpy as np
import pytest

from src.errors import InputError
from src.symmetrize import (HORIZONTAL, LOG_COLUMNS, VERTICAL, ColumnarSet, ball, box, column_integrands,
                            converge_to_ball, convexity_inequality, equal_volume_radius, from_mask, hsiang_reflect,
                            line_primitive, perimeter_allowance, radial_volume, random_blobs, rebase,
                            steiner_symmetrize, symmetric_difference, symmetrization_directions,
                            weighted_perimeter_columnar, weighted_volume_columnar)

H = 1.0 / 128.0


def test_line_primitive():
    assert float(line_primitive(2.0, 0.0)) == 2.0
    assert float(line_primitive(1.0, -1.0)) == pytest.approx(math.sqrt(math.pi) / 2.0 * math.erf(1.0))
    assert float(line_primitive(-1.0, 1.0)) == pytest.approx(-float(line_primitive(1.0, 1.0)))


@pytest.mark.parametrize("c, expected", [(0.0, 2.0 * math.pi), (1.0, 2.0 * math.pi * math.e)])
def test_disk_perimeter(c, expected):
    disk = ball((0.0, 0.0), 1.0, H, c)
    assert weighted_perimeter_columnar(disk) == pytest.approx(expected, rel=0.03)


def test_disk_volume():
    assert weighted_volume_columnar(ball((0.0, 0.0), 1.0, H, 0.0)) == pytest.approx(math.pi, rel=1e-3)
    assert weighted_volume_columnar(ball((0.0, 0.0), 1.0, H, 1.0)) == pytest.approx(math.pi * (math.e - 1.0),
                                                                                  rel=1e-3)


def test_square_volume_and_perimeter():
    square = box((-1.0, -1.0), (1.0, 1.0), H, 0.0)
    assert weighted_volume_columnar(square) == pytest.approx(4.0, rel=1e-12)
    assert weighted_perimeter_columnar(square) == pytest.approx(8.0, rel=1e-12)
    weighted = box((-1.0, -1.0), (1.0, 1.0), H, 1.0)
    side = 2.0 * float(line_primitive(1.0, 1.0))
    assert weighted_volume_columnar(weighted) == pytest.approx(side * side, rel=1e-3)
    assert side * side == pytest.approx(8.5574, abs=1e-3)
    assert weighted_perimeter_columnar(weighted) == pytest.approx(4.0 * math.e * side, rel=1e-9)


def test_steiner_preserves_volume_and_is_idempotent():
    blobs = random_blobs(seed=5, h=1.0 / 64.0, c=1.0)
    once = steiner_symmetrize(blobs, angle=VERTICAL)
    assert weighted_volume_columnar(once) == pytest.approx(weighted_volume_columnar(blobs), rel=1e-9)
    twice = steiner_symmetrize(once, angle=VERTICAL)
    assert twice.columns == once.columns
    for region in once.columns.values():
        assert len(region.intervals) == 1
        a, b = region.intervals[0]
        assert a == -b


def test_steiner_in_a_rotated_frame():
    blobs = random_blobs(seed=8, h=1.0 / 64.0, c=0.5)
    frame = rebase(blobs, angle=0.7)
    after = steiner_symmetrize(frame, angle=0.7)
    assert after.angle == pytest.approx(0.7)
    assert weighted_volume_columnar(after) == pytest.approx(weighted_volume_columnar(frame), rel=1e-9)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_steiner_does_not_increase_perimeter(seed):
    blobs = random_blobs(seed=seed, h=1.0 / 64.0, c=1.0)
    after = steiner_symmetrize(blobs, axis=1)
    assert weighted_perimeter_columnar(after) <= \
        weighted_perimeter_columnar(blobs) + perimeter_allowance(blobs, after)


def test_steiner_on_random_sets_in_random_frames():
    rng = np.random.default_rng(17)
    for seed in range(100):
        angle = float(rng.uniform(0.0, math.pi))
        frame = rebase(random_blobs(seed=seed, h=H, c=1.0), angle=angle)
        after = steiner_symmetrize(frame, angle=angle)
        assert weighted_volume_columnar(after) == pytest.approx(weighted_volume_columnar(frame), rel=1e-9)
        assert weighted_perimeter_columnar(after) <= \
            weighted_perimeter_columnar(frame) + perimeter_allowance(frame, after)
        assert steiner_symmetrize(after, angle=angle).columns == after.columns


def test_rebase_keeps_volume_close():
    disk = ball((0.3, -0.2), 0.5, 1.0 / 64.0, 1.0)
    turned = rebase(disk, angle=HORIZONTAL)
    assert turned.angle == HORIZONTAL
    assert weighted_volume_columnar(turned) == pytest.approx(weighted_volume_columnar(disk), rel=1e-3)
    assert symmetric_difference(disk, turned) < 2e-2


def test_rebase_keeps_a_ball_round():
    h = 1.0 / 64.0
    disk = ball((0.0, 0.0), 1.08, h, 1.0)
    once = rebase(disk, angle=VERTICAL + math.radians(15.0))
    assert symmetric_difference(once, ball((0.0, 0.0), 1.08, h, 1.0, angle=once.angle)) <= h / 16.0
    assert symmetric_difference(once, steiner_symmetrize(once, angle=once.angle)) <= h / 16.0

    current = disk
    for j in range(1, 41):
        current = rebase(current, angle=VERTICAL + 0.37 * j)
    exact = ball((0.0, 0.0), 1.08, h, 1.0, angle=current.angle)
    assert symmetric_difference(current, exact) <= h / 2.0
    assert weighted_volume_columnar(current) == pytest.approx(weighted_volume_columnar(disk), rel=3e-3)


def test_rebase_closes_tips_between_columns():
    # the right tip of this disk lies 0.7 h past its last column
    h = 1.0 / 64.0
    disk = ball((0.0, 0.0), 20.2 * h, h, 0.0)
    upright = rebase(rebase(disk, angle=HORIZONTAL), angle=VERTICAL)
    assert set(upright.columns) == set(disk.columns)
    assert symmetric_difference(disk, upright) <= 1e-2 * h


def test_hsiang_reflection_keeps_smaller_relative_perimeter():
    rect = box((-1.0, -0.5), (1.0, 1.5), H, 0.0)
    result = hsiang_reflect(rect, 1)
    assert result.kept == "negative"
    assert result.volume_positive == pytest.approx(3.0)
    assert result.volume_negative == pytest.approx(1.0)
    assert result.perimeter_positive == pytest.approx(5.0)
    assert result.perimeter_negative == pytest.approx(3.0)
    assert weighted_volume_columnar(result.result) == pytest.approx(2.0)
    assert all(region.intervals == ((-0.5, 0.5),) for region in result.result.columns.values())
    with pytest.raises(InputError):
        hsiang_reflect(rect, 2)


def test_radial_volume_and_radius():
    assert radial_volume(1.0, 0.0, 2) == pytest.approx(math.pi)
    assert radial_volume(1.0, 1.0, 2) == pytest.approx(math.pi * (math.e - 1.0))
    assert radial_volume(1.0, 0.0, 3) == pytest.approx(4.0 * math.pi / 3.0)
    assert equal_volume_radius(math.pi * (math.e - 1.0), 1.0, 2) == pytest.approx(1.0, abs=1e-10)
    assert equal_volume_radius(4.0 * math.pi / 3.0, 0.0, 3) == pytest.approx(1.0, abs=1e-8)


def test_off_center_disk_converges_to_centred_ball():
    h = 1.0 / 64.0
    disk = ball((0.5, 0.2), 0.6, h, 1.0)
    start = symmetric_difference(disk, ball((0.0, 0.0), 0.6, h, 1.0))
    run = converge_to_ball(disk)
    assert run.log
    assert run.symmetric_difference_to_ball <= 5.0 * h
    assert run.symmetric_difference_to_ball < start
    frame = run.to_frame()
    assert list(frame.columns) == LOG_COLUMNS
    drift = (frame["volume_after"] - frame["volume_before"]).abs() / frame["volume_before"]
    assert drift.max() <= 1e-9


def test_translated_euclidean_disk():
    h = 1.0 / 64.0
    run = converge_to_ball(ball((0.3, 0.0), 0.5, h, 0.0))
    assert run.ball_radius == pytest.approx(0.5, rel=1e-2)
    assert run.symmetric_difference_to_ball <= 5.0 * h


def test_centred_ball_needs_no_steps():
    run = converge_to_ball(ball((0.0, 0.0), 0.5, 1.0 / 64.0, 1.0))
    assert run.converged
    assert run.log == ()
    with pytest.raises(InputError):
        converge_to_ball(ColumnarSet(H, 0.0, {}))


@pytest.mark.parametrize("seed", range(10))
def test_random_sets_converge_to_the_ball(seed):
    h = 1.0 / 64.0
    run = converge_to_ball(random_blobs(seed=seed, h=h, c=1.0))
    assert run.converged
    assert run.symmetric_difference_to_ball <= 5.0 * h
    frame = run.to_frame()
    assert (frame["perimeter_after"] <= frame["perimeter_before"] + frame["allowance"]).all()
    drift = (frame["volume_after"] - frame["volume_before"]).abs() / frame["volume_before"]
    assert drift.max() <= 1e-9


def test_rotated_directions_never_repeat_a_frame():
    directions = symmetrization_directions(2)
    angles = [next(directions)["angle"] for _ in range(66)]
    assert angles[:2] == [VERTICAL, HORIZONTAL]
    assert all(0.0 <= a < math.pi for a in angles)
    assert all(a != b for a, b in zip(angles, angles[1:]))
    axes = symmetrization_directions(2, rotations=False)
    assert [next(axes)["angle"] for _ in range(4)] == [VERTICAL, HORIZONTAL, VERTICAL, HORIZONTAL]


def test_spatial_ball():
    sphere = ball((0.0, 0.0, 0.0), 0.5, 1.0 / 32.0, 0.0, dimension=3)
    assert weighted_volume_columnar(sphere) == pytest.approx(math.pi / 6.0, rel=1e-2)
    again = steiner_symmetrize(sphere, axis=2)
    assert again.columns == sphere.columns


def test_from_mask():
    payload = {"h": 0.5, "window": [[0.0, 1.5], [0.0, 1.0]], "rows": ["100", "011"]}
    cset = from_mask(payload)
    assert cset.columns[(0,)].intervals == ((0.0, 0.5),)
    assert cset.columns[(2,)].intervals == ((0.5, 1.0),)
    assert weighted_volume_columnar(cset) == pytest.approx(0.75)
    with pytest.raises(InputError):
        from_mask({"h": 0.5, "window": [[0.1, 1.6], [0.0, 1.0]], "rows": ["100", "011"]})


def test_from_dict_validates_columns():
    disk = ball((0.0, 0.0), 0.25, 1.0 / 32.0, 0.5)
    restored = ColumnarSet.from_dict(disk.to_dict())
    assert restored.columns == disk.columns
    with pytest.raises(InputError):
        ColumnarSet.from_dict({"h": 0.5, "columns": [{"p": [0.3], "intervals": [[0.0, 1.0]]}]})
    with pytest.raises(InputError):
        ColumnarSet.from_dict({"h": 0.5, "columns": [{"p": [0.25], "intervals": [[1.0, 0.0]]}]})


def test_convexity_inequality():
    equal = convexity_inequality([1.0, 1.0], [1.0, 1.0], 1.0, 1.0)
    assert equal.equality_case
    assert equal.lhs == pytest.approx(equal.rhs)
    strict = convexity_inequality([1.0, 1.0], [0.0, 2.0], 1.0, 1.0)
    assert not strict.equality_case
    assert strict.lhs == pytest.approx(1.0 + math.sqrt(5.0))
    assert strict.lhs > strict.rhs
    heavier = convexity_inequality([2.0, 1.0], [1.0, 1.0], 1.0, 1.0)
    assert heavier.lhs == pytest.approx(3.0 * math.sqrt(2.0))
    assert heavier.rhs == pytest.approx(2.0 * math.sqrt(2.0))
    with pytest.raises(InputError):
        convexity_inequality([1.0], [1.0], 1.0, 1.0)


def test_convexity_inequality_random_tuples():
    rng = np.random.default_rng(31)
    n = 100_000
    sizes = rng.integers(1, 5, size=n)
    alphas = rng.uniform(0.0, 2.0, size=(n, 4))
    slopes = rng.uniform(0.0, 3.0, size=(n, 4))
    u, v = rng.uniform(0.0, 1.0, size=n), rng.uniform(0.0, 1.0, size=n)
    for i in range(n):
        k = int(sizes[i])
        al, sl = alphas[i, :k], slopes[i, :k]
        alpha = float(u[i]) * al.sum() / 2.0
        a = float(v[i]) * (al @ sl) / (2.0 * alpha) if alpha > 0.0 else 0.0
        check = convexity_inequality(al, sl, alpha, a)
        assert check.lhs >= check.rhs * (1.0 - 1e-12)


def test_convexity_inequality_detects_constructed_equality():
    rng = np.random.default_rng(32)
    for _ in range(500):
        k = int(rng.integers(1, 6))
        alphas = rng.uniform(0.1, 2.0, size=k)
        a = float(rng.uniform(0.0, 3.0))
        equal = convexity_inequality(alphas, np.full(k, a), alphas.sum() / 2.0, a)
        assert equal.equality_case
        assert equal.lhs == pytest.approx(equal.rhs, rel=1e-12)
        bent = np.full(k, a)
        bent[0] += 0.5
        assert not convexity_inequality(alphas, bent, alphas.sum() / 2.0, a).equality_case


def test_translated_disk_symmetrizes_to_centred_disk():
    h = 1.0 / 64.0
    moved = steiner_symmetrize(ball((0.0, 0.4), 0.5, h, 0.0), angle=VERTICAL)
    centred = ball((0.0, 0.0), 0.5, h, 0.0)
    assert set(moved.columns) == set(centred.columns)
    for key, region in centred.columns.items():
        (a, b), = moved.columns[key].intervals
        assert (a, b) == (pytest.approx(region.intervals[0][0], abs=1e-12),
                          pytest.approx(region.intervals[0][1], abs=1e-12))


def test_column_integrands_inequality():
    h = 1.0 / 64.0
    before = ball((0.2, 0.1), 0.5, h, 0.5)
    after = steiner_symmetrize(before, angle=VERTICAL)
    f_max = math.exp(0.5 * 0.9 ** 2)
    checked = 0
    for key in before.columns:
        p = float(before.base_point(key)[0])
        if abs(p - 0.2) >= 0.3:
            continue
        pair = column_integrands(before, after, key)
        assert pair is not None
        lhs, rhs = pair
        assert lhs >= rhs * (1.0 - 1e-6) - 4.0 * h * f_max
        checked += 1
    assert checked > 10
    assert column_integrands(before, after, (250,)) is None
