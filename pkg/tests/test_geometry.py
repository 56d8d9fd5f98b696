import io
import math

import numpy as np
import pytest

from patchdyn.errors import InvalidInputError
from patchdyn import geometry
from patchdyn.geometry import (
    Contour, Disk, Patch, check_mfold_symmetry, contains, contains_many,
    disk_intersection_area, disk_symmetric_difference, hausdorff_distance,
    locate, moments, moment_tensor, perimeter, read_contour_csv, signed_area,
    write_contour_csv,
)

from conftest import disk_patch, random_star_polygon, regular_polygon

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def winding_number(vertices, x):
    """Independent angle-summation oracle for membership."""
    d = vertices - np.asarray(x)
    ang = np.arctan2(d[:, 1], d[:, 0])
    inc = np.diff(ang, append=ang[:1])
    inc = (inc + math.pi) % (2 * math.pi) - math.pi
    return int(round(float(inc.sum()) / (2 * math.pi)))


class TestSignedArea:
    def test_unit_square(self):
        assert signed_area(Contour(SQUARE)) == pytest.approx(1.0)

    def test_reversed_square_flips_sign(self):
        assert signed_area(Contour(SQUARE[::-1])) == pytest.approx(-1.0)

    def test_fine_polygon_approximates_disk(self):
        # analytic n-gon area (n/2) sin(2pi/n) as the oracle
        n = 1024
        c = Contour(regular_polygon(n), check_simple=False)
        exact = 0.5 * n * math.sin(2 * math.pi / n)
        assert signed_area(c) == pytest.approx(exact, abs=1e-12)
        assert abs(signed_area(c) - math.pi) < 1e-4

    def test_degenerate_contour_rejected(self):
        with pytest.raises(InvalidInputError):
            Contour(np.array([[0.0, 0.0], [1.0, 0.0]]))

    def test_reverse_antisymmetry_random(self, rng):
        for _ in range(20):
            v = random_star_polygon(rng)
            assert signed_area(Contour(v[::-1], check_simple=False)) == \
                pytest.approx(-signed_area(Contour(v, check_simple=False)))


class TestPerimeter:
    def test_unit_square(self):
        assert perimeter(Contour(SQUARE)) == pytest.approx(4.0)

    def test_fine_polygon_approximates_circle(self):
        # analytic n-gon perimeter 2 n sin(pi/n)
        n = 1024
        c = Contour(regular_polygon(n), check_simple=False)
        assert perimeter(c) == pytest.approx(2 * n * math.sin(math.pi / n))
        assert abs(perimeter(c) - 2 * math.pi) < 1e-4


class TestMoments:
    def test_centered_unit_square(self):
        p = Patch(Contour(SQUARE - 0.5))
        mass, first, second = moments(p)
        assert mass == pytest.approx(1.0)
        assert np.allclose(first, 0.0, atol=1e-15)
        assert second == pytest.approx(1.0 / 6.0)  # int (x^2+y^2) over the square

    def test_unit_disk(self):
        mass, first, second = moments(disk_patch(1.0, 2048))
        assert mass == pytest.approx(math.pi, abs=1e-3)
        assert np.allclose(first, 0.0, atol=1e-12)
        assert second == pytest.approx(math.pi / 2, abs=1e-3)

    def test_shifted_disk_parallel_axis(self):
        # second moment of B((1,0),1) is pi/2 + pi |a|^2
        _, _, second = moments(disk_patch(1.0, 2048, center=(1.0, 0.0)))
        assert second == pytest.approx(math.pi / 2 + math.pi, abs=1e-3)

    def test_translation_covariance(self, rng):
        for _ in range(10):
            p = Patch(Contour(random_star_polygon(rng), check_simple=False))
            shift = rng.normal(size=2) * 3
            mass, first, second = moments(p)
            m2, f2, s2 = moments(p.translated(shift))
            assert m2 == pytest.approx(mass, abs=1e-10)
            assert np.allclose(f2, first + mass * shift, atol=1e-10)
            expected = second + 2 * shift @ first + mass * shift @ shift
            assert s2 == pytest.approx(expected, abs=1e-10)

    def test_moment_tensor_consistent(self, rng):
        p = Patch(Contour(random_star_polygon(rng), check_simple=False))
        ixx, ixy, iyy = moment_tensor(p)
        _, _, second = moments(p)
        assert ixx + iyy == pytest.approx(second, rel=1e-12)


class TestMembership:
    def test_center_inside(self):
        assert contains(disk_patch(), (0.0, 0.0))

    def test_far_point_outside(self):
        assert not contains(disk_patch(), (2.0, 0.0))

    def test_boundary_flagged(self):
        p = disk_patch(1.0, 512)
        r_vertex = float(np.linalg.norm(p.vertices[0]))
        assert locate(p, (r_vertex + 1e-12, 0.0)) == "boundary"

    def test_agrees_with_winding_number(self, rng):
        p = Patch(Contour(random_star_polygon(rng), check_simple=False))
        pts = rng.uniform(-2, 2, size=(1000, 2))
        got = contains_many(p, pts)
        for x, g in zip(pts, got):
            if locate(p, x) == "boundary":
                continue
            assert g == (winding_number(p.vertices, x) != 0)


class TestDiskSymmetricDifference:
    def test_identical_sets(self):
        p = disk_patch(1.0, 1024)
        sd = disk_symmetric_difference(p, Disk((0.0, 0.0), 1.0))
        assert abs(sd) < 1e-4  # discretization floor of the 1024-gon

    def test_lens_formula_oracle(self):
        # symdiff of two unit disks at distance d: 2 pi - 2 lens(d)
        p = disk_patch(1.0, 4096)
        for d in (0.02, 0.05, 0.1):
            sd = disk_symmetric_difference(p, Disk((d, 0.0), 1.0))
            lens = 2 * math.acos(d / 2) - (d / 2) * math.sqrt(4 - d * d)
            oracle = 2 * math.pi - 2 * lens
            assert sd == pytest.approx(oracle, rel=2e-2)
            assert sd == pytest.approx(4 * d, rel=2e-2)

    def test_disjoint_sets(self):
        p = disk_patch(1.0, 1024)
        sd = disk_symmetric_difference(p, Disk((3.0, 0.0), 1.0))
        assert sd == pytest.approx(2 * math.pi, abs=1e-3)

    def test_zero_iff_full_overlap(self):
        p = disk_patch(1.0, 1024)
        mass = signed_area(p.boundary)
        inter = disk_intersection_area(p, Disk((0.0, 0.0), 1.0))
        assert abs(inter - mass) < 1e-4
        assert abs(inter - math.pi) < 1e-4

    def test_triangle_inequality(self, rng):
        # L1 metric: d(p, D1) <= d(p, D2) + |D1 symdiff D2| on random disks
        p = Patch(Contour(random_star_polygon(rng), check_simple=False))
        for _ in range(20):
            c1 = rng.normal(size=2) * 0.5
            c2 = rng.normal(size=2) * 0.5
            r = rng.uniform(0.7, 1.3)
            d1 = disk_symmetric_difference(p, Disk(tuple(c1), r))
            d2 = disk_symmetric_difference(p, Disk(tuple(c2), r))
            dd = float(np.linalg.norm(c1 - c2))
            lens = (2 * r * r * math.acos(min(dd / (2 * r), 1.0))
                    - (dd / 2) * math.sqrt(max(4 * r * r - dd * dd, 0.0)))
            disk_dist = 2 * math.pi * r * r - 2 * lens if dd < 2 * r \
                else 2 * math.pi * r * r
            assert d1 <= d2 + disk_dist + 1e-6


class TestMfoldSymmetry:
    def test_hexagon_threefold(self):
        hexagon = Contour(regular_polygon(6))
        assert check_mfold_symmetry(Patch(hexagon), 3) < 1e-10

    def test_disk_fivefold(self):
        assert check_mfold_symmetry(disk_patch(1.0, 1024), 5) < 1e-3

    def test_square_threefold_defect_vs_quadrature(self, rng):
        p = Patch(Contour(SQUARE - 0.5))
        defect = check_mfold_symmetry(p, 3)
        assert defect > 0.1
        # independent oracle: Monte Carlo area of the symmetric difference
        n = 200_000
        pts = rng.uniform(-1.0, 1.0, size=(n, 2))
        inside = contains_many(p, pts)
        rot = p.rotated(2 * math.pi / 3)
        inside_rot = contains_many(rot, pts)
        mc = 4.0 * np.mean(inside != inside_rot)
        assert defect == pytest.approx(mc, abs=4 * 4.0 * math.sqrt(0.25 / n) * 3)

    def test_m_must_be_at_least_two(self):
        with pytest.raises(InvalidInputError):
            check_mfold_symmetry(disk_patch(), 1)


class TestContourValidation:
    def test_duplicate_vertices_rejected(self):
        v = np.array([[0, 0], [1, 0], [1, 0], [0, 1]], dtype=float)
        with pytest.raises(InvalidInputError):
            Contour(v)

    def test_bowtie_rejected(self):
        bowtie = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float)
        with pytest.raises(InvalidInputError):
            Contour(bowtie)
        c = Contour(bowtie, check_simple=False)  # opt-out works
        assert not c.is_simple()

    def test_orientation_flag(self):
        assert Contour(SQUARE).is_ccw
        assert not Contour(SQUARE[::-1]).is_ccw

    def test_patch_requires_ccw(self):
        with pytest.raises(InvalidInputError):
            Patch(Contour(SQUARE[::-1]))


class TestIO:
    def test_csv_round_trip(self, tmp_path, rng):
        c = Contour(random_star_polygon(rng), check_simple=False)
        path = tmp_path / "contour.csv"
        write_contour_csv(path, c)
        c2 = read_contour_csv(path, check_simple=False)
        assert np.array_equal(c.vertices, c2.vertices)

    def test_header_required(self):
        with pytest.raises(InvalidInputError):
            read_contour_csv(io.StringIO("0.0,1.0\n1.0,0.0\n0.5,2.0\n"))

    def test_hausdorff_distance(self):
        a = Contour(regular_polygon(64), check_simple=False)
        b = Contour(regular_polygon(64) + [0.1, 0.0], check_simple=False)
        d = hausdorff_distance(a, b)
        assert 0.05 < d <= 0.1 + 1e-12
