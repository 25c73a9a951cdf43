"""Feasible-set geometry: preflight clamp, projections, oracle equivalence."""

import numpy as np
import pytest

from pvjtcs.projection import (
    FeasibleSet,
    Halfspace,
    InfeasibleSetError,
    clamp_demand,
    project_box_hyperplane,
    project_feasible,
    project_intersection,
)
from oracles import active_set_projection


def random_halfspace(rng, n):
    normal = rng.normal(size=n)
    anchor = rng.uniform(0.0, 1.0, size=n)
    return Halfspace(normal=normal, anchor=anchor)


class TestClampDemand:
    def test_already_feasible(self):
        fset = FeasibleSet(m=[10, 10], d_total=8, e_plus=8.0, r=1.0)
        out, report = clamp_demand(fset)
        assert not report.clamped
        assert out.e_plus == 8.0

    def test_clamps_to_cap(self):
        fset = FeasibleSet(m=[10, 10], d_total=8, e_plus=20.0, r=1.0)
        out, report = clamp_demand(fset)
        assert report.clamped
        assert out.e_plus == pytest.approx(12.0)
        assert report.delta == pytest.approx(-8.0)
        assert out.is_feasible()

    def test_negative_demand_clamped_to_zero(self):
        fset = FeasibleSet(m=[5], d_total=2, e_plus=-3.0, r=2.0)
        out, report = clamp_demand(fset)
        assert report.clamped and out.e_plus == 0.0

    def test_unsatisfiable(self):
        with pytest.raises(InfeasibleSetError):
            clamp_demand(FeasibleSet(m=[5], d_total=6, e_plus=0.0, r=1.0))


class TestBoxHyperplane:
    def test_symmetric_point(self):
        z = project_box_hyperplane([1.0, 1.0], [1.0, 1.0], 1.0)
        assert z == pytest.approx([0.5, 0.5])

    def test_interior_closed_form(self):
        z = project_box_hyperplane([0.9, 0.3], [1.0, 1.0], 1.0)
        assert z == pytest.approx([0.8, 0.2], abs=1e-12)

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = int(rng.integers(1, 6))
            m = rng.uniform(0.5, 50.0, size=n)
            S = float(rng.uniform(0.0, np.sum(m)))
            z = project_box_hyperplane(rng.uniform(-1.0, 2.0, size=n), m, S)
            z2 = project_box_hyperplane(z, m, S)
            assert np.max(np.abs(z2 - z)) <= 1e-9

    def test_membership(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            n = int(rng.integers(1, 6))
            m = rng.uniform(0.5, 50.0, size=n)
            S = float(rng.uniform(0.0, np.sum(m)))
            z = project_box_hyperplane(rng.uniform(-2.0, 3.0, size=n), m, S)
            assert np.all(z >= 0.0) and np.all(z <= 1.0)
            assert abs(float(m @ z) - S) <= 1e-8 * max(1.0, np.sum(m))

    def test_nonexpansive(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            n = int(rng.integers(1, 6))
            m = rng.uniform(0.5, 20.0, size=n)
            S = float(rng.uniform(0.0, np.sum(m)))
            x = rng.uniform(-1.0, 2.0, size=n)
            y = rng.uniform(-1.0, 2.0, size=n)
            px = project_box_hyperplane(x, m, S)
            py = project_box_hyperplane(y, m, S)
            assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-9

    def test_infeasible_rhs(self):
        with pytest.raises(InfeasibleSetError):
            project_box_hyperplane([0.5], [2.0], 3.0)
        with pytest.raises(InfeasibleSetError):
            project_box_hyperplane([0.5], [2.0], -0.5)

    def test_zero_weight_rejected(self):
        with pytest.raises(ValueError):
            project_box_hyperplane([0.5, 0.5], [1.0, 0.0], 0.5)

    def test_matches_active_set_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            n = int(rng.integers(1, 5))
            m = rng.uniform(0.5, 10.0, size=n)
            S = float(rng.uniform(0.0, np.sum(m)))
            p = rng.uniform(-0.5, 1.5, size=n)
            ours = project_box_hyperplane(p, m, S)
            ref = active_set_projection(p, m, S)
            assert np.max(np.abs(ours - ref)) <= 1e-6


class TestProjectFeasible:
    def test_singleton_set(self):
        fset = FeasibleSet(m=[10.0], d_total=0.0, e_plus=4.0, r=1.0)
        for p in ([0.0], [1.0], [0.37]):
            assert project_feasible(p, fset) == pytest.approx([0.6])

    def test_point_on_plane_fixed(self):
        fset = FeasibleSet(m=[10.0, 10.0], d_total=0.0, e_plus=8.0, r=1.0)
        assert project_feasible([0.6, 0.6], fset) == pytest.approx([0.6, 0.6])

    def test_symmetric_corner(self):
        fset = FeasibleSet(m=[10.0, 10.0], d_total=0.0, e_plus=8.0, r=1.0)
        assert project_feasible([1.0, 1.0], fset) == pytest.approx([0.6, 0.6])

    def test_propagates_infeasibility(self):
        fset = FeasibleSet(m=[10.0], d_total=9.0, e_plus=15.0, r=1.0)
        with pytest.raises(InfeasibleSetError):
            project_feasible([0.5], fset)


class TestProjectIntersection:
    def test_point_inside_is_fixed(self):
        fset = FeasibleSet(m=[10.0, 10.0], d_total=0.0, e_plus=8.0, r=1.0)
        half = Halfspace(normal=[1.0, -1.0], anchor=[0.0, 0.0])
        z = project_intersection([0.5, 0.7], fset, half)
        assert z == pytest.approx([0.5, 0.7], abs=1e-9)

    def test_zero_normal_reduces_to_feasible_projection(self):
        fset = FeasibleSet(m=[10.0, 10.0], d_total=0.0, e_plus=8.0, r=1.0)
        half = Halfspace(normal=[0.0, 0.0], anchor=[0.0, 0.0])
        z = project_intersection([1.0, 1.0], fset, half)
        assert z == pytest.approx([0.6, 0.6])

    def test_reference_cut_instance(self):
        # m=(10,10), S=12, cut z1 - z2 <= 0, project (1, 0.2)
        fset = FeasibleSet(m=[10.0, 10.0], d_total=0.0, e_plus=8.0, r=1.0)
        half = Halfspace(normal=[1.0, -1.0], anchor=[0.0, 0.0])
        ours = project_intersection([1.0, 0.2], fset, half)
        ref = active_set_projection(
            [1.0, 0.2], [10.0, 10.0], 12.0, normal=[1.0, -1.0], anchor=[0.0, 0.0]
        )
        assert np.max(np.abs(ours - ref)) <= 1e-6
        assert half.violation(ours) <= 1e-8

    def test_matches_active_set_oracle(self):
        rng = np.random.default_rng(11)
        checked = 0
        while checked < 200:
            n = int(rng.integers(2, 5))
            m = rng.uniform(0.5, 10.0, size=n)
            S = float(rng.uniform(0.05, 0.95) * np.sum(m))
            fset = FeasibleSet(m=m, d_total=0.0, e_plus=(np.sum(m) - S) * 1.0, r=1.0)
            half = random_halfspace(rng, n)
            # keep only instances whose intersection is provably nonempty
            try:
                probe = active_set_projection(
                    rng.uniform(0, 1, size=n), m, S,
                    normal=half.normal, anchor=half.anchor,
                )
            except ValueError:
                continue
            if half.violation(probe) > 1e-9:
                continue
            p = rng.uniform(-0.5, 1.5, size=n)
            ours = project_intersection(p, fset, half)
            ref = active_set_projection(p, m, S, normal=half.normal, anchor=half.anchor)
            assert np.max(np.abs(ours - ref)) <= 1e-6
            checked += 1

    def test_idempotent_and_members(self):
        rng = np.random.default_rng(12)
        fset = FeasibleSet(m=[3.0, 7.0, 5.0], d_total=0.0, e_plus=6.0, r=1.0)
        half = Halfspace(normal=[2.0, -1.0, 0.5], anchor=[0.3, 0.5, 0.4])
        for _ in range(50):
            p = rng.uniform(-1.0, 2.0, size=3)
            z = project_intersection(p, fset, half)
            assert abs(float(fset.m @ z) - fset.S) <= 1e-8 * max(1.0, fset.m_total)
            assert half.violation(z) <= 1e-8
            z2 = project_intersection(z, fset, half)
            assert np.max(np.abs(z2 - z)) <= 1e-9


class TestHalfspace:
    def test_projection_closed_form(self):
        half = Halfspace(normal=[0.0, 2.0], anchor=[0.0, 1.0])
        assert half.project([0.3, 3.0]) == pytest.approx([0.3, 1.0])
        assert half.project([0.3, 0.5]) == pytest.approx([0.3, 0.5])

    def test_membership(self):
        half = Halfspace(normal=[1.0], anchor=[2.0])
        assert half.contains([1.5]) and not half.contains([2.5])
