"""Equilibrium solver: residual, backtracking, convergence, KKT audit."""

import io

import numpy as np
import pytest

from pvjtcs.model import GameParams, PvGroup
from pvjtcs.projection import FeasibleSet
from pvjtcs.vi_solver import (
    LineSearchError,
    SspmConvergenceError,
    kkt_verify,
    line_search,
    make_operator,
    residual,
    sspm_solve,
    write_trace_csv,
)
from oracles import projected_gradient_equilibrium

PARAMS = GameParams()


def make_instance(m, d, e_plus, r=1.0, d_total=None):
    groups = [PvGroup(region=i, m=mi, d=di) for i, (mi, di) in enumerate(zip(m, d))]
    if d_total is None:
        d_total = float(sum(d))
    fset = FeasibleSet(m=[float(v) for v in m], d_total=d_total, e_plus=e_plus, r=r)
    return groups, fset


SYMMETRIC = make_instance([10, 10], [5, 5], e_plus=8.0, d_total=8.0)
ASYMMETRIC = make_instance([10, 20], [8, 4], e_plus=6.0, d_total=12.0)
SINGLETON = make_instance([10], [0], e_plus=4.0, d_total=0.0)


class TestResidual:
    def test_zero_at_fixed_point(self):
        groups, fset = SINGLETON
        F = make_operator(groups, 2.0, PARAMS)
        nu = residual(np.array([0.6]), 1.0, F, fset)
        assert np.max(np.abs(nu)) <= 1e-9

    def test_zero_at_solution(self):
        groups, fset = SYMMETRIC
        x, _ = sspm_solve(groups, fset, 2.0, PARAMS)
        F = make_operator(groups, 2.0, PARAMS)
        assert np.linalg.norm(residual(x, 1.0, F, fset)) < 1e-3

    def test_is_projection_composition(self):
        groups, fset = SYMMETRIC
        F = make_operator(groups, 2.0, PARAMS)
        x = np.array([1.0, 0.2])
        from pvjtcs.projection import project_feasible

        expected = x - project_feasible(x - 1.0 * F(x), fset)
        nu = residual(x, 1.0, F, fset)
        assert nu == pytest.approx(expected)
        assert np.linalg.norm(nu) > 0.0

    def test_rejects_nonpositive_step(self):
        groups, fset = SINGLETON
        F = make_operator(groups, 2.0, PARAMS)
        with pytest.raises(ValueError):
            residual(np.array([0.6]), 0.0, F, fset)


class TestLineSearch:
    def test_immediate_acceptance(self):
        # F constant and aligned with nu: condition holds at zeta = 0
        F = lambda v: np.array([10.0])
        nu = np.array([0.1])
        zeta, eta = line_search(np.array([0.5]), nu, 1.0, F, PARAMS)
        assert zeta == 0 and eta == 1.0

    def test_two_backtracks(self):
        # F(t) = 100 (t - 0.9): fails at probes 0.5 and 0.8, passes at 0.92
        F = lambda v: np.array([100.0 * (v[0] - 0.9)])
        x = np.array([1.0])
        nu = np.array([0.5])
        zeta, eta = line_search(x, nu, 1.0, F, PARAMS)
        assert zeta == 2
        assert eta == pytest.approx(0.4**2)

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(13)
        params = PARAMS
        for _ in range(50):
            a = float(rng.uniform(1.0, 200.0))
            root = float(rng.uniform(0.0, 1.0))
            F = lambda v, a=a, root=root: np.array([a * (v[0] - root)])
            x = np.array([float(rng.uniform(0.0, 1.0))])
            nu = np.array([float(rng.uniform(0.01, 0.5))])
            mu = float(rng.uniform(0.1, 1.0))
            try:
                zeta, eta = line_search(x, nu, mu, F, params)
            except LineSearchError:
                continue
            threshold = (params.gamma2 / mu) * float(nu @ nu)
            accepted = [
                z
                for z in range(101)
                if float(F(x - params.gamma1**z * mu * nu) @ nu) >= threshold
            ]
            assert zeta == accepted[0]
            assert eta == pytest.approx(params.gamma1**zeta * mu)

    def test_zero_residual_rejected(self):
        with pytest.raises(ValueError):
            line_search(np.array([0.5]), np.array([0.0]), 1.0, lambda v: v, PARAMS)


class TestSspmSolve:
    def test_singleton_one_effective_iteration(self):
        groups, fset = SINGLETON
        for x0 in (None, [0.0], [1.0]):
            x, trace = sspm_solve(groups, fset, 3.0, PARAMS, x0=x0)
            assert x == pytest.approx([0.6])
            assert len(trace) == 1
            assert trace.converged

    def test_symmetric_instance(self):
        groups, fset = SYMMETRIC
        x, trace = sspm_solve(groups, fset, 2.0, PARAMS)
        assert x == pytest.approx([0.6, 0.6], abs=1e-3)

    def test_asymmetric_matches_hyperplane_scan(self):
        groups, fset = ASYMMETRIC
        x, _ = sspm_solve(groups, fset, 3.0, PARAMS)
        # the feasible set is the segment 10 z1 + 20 z2 = 24, z in the box;
        # scan its 1-D parameterization for the aggregate-payoff maximizer
        best, best_val = None, -np.inf
        for t in np.linspace(0.4, 1.0, 200001):
            z2 = (24.0 - 10.0 * t) / 20.0
            val = (
                -((10.0 * t - 8.0) ** 2)
                + PARAMS.alpha1 * 10.0 * np.log(2.0 - t)
                - PARAMS.alpha2 * 3.0 * 10.0 * (1.0 - t)
                - ((20.0 * z2 - 4.0) ** 2)
                + PARAMS.alpha1 * 20.0 * np.log(2.0 - z2)
                - PARAMS.alpha2 * 3.0 * 20.0 * (1.0 - z2)
            )
            if val > best_val:
                best, best_val = np.array([t, z2]), val
        assert np.max(np.abs(x - best)) <= 1e-3

    def test_matches_projected_gradient_on_random_instances(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            n = int(rng.integers(2, 6))
            m = rng.integers(1, 101, size=n).astype(float)
            d = np.array([float(rng.integers(0, int(mi) + 1)) for mi in m])
            e_plus = float(rng.uniform(0.0, PARAMS.r * (m.sum() - d.sum())))
            groups, fset = make_instance(m, d, e_plus=e_plus, r=PARAMS.r,
                                         d_total=float(d.sum()))
            p = float(rng.uniform(1.0, 10.0))
            x, trace = sspm_solve(groups, fset, p, PARAMS)
            assert trace.converged
            ref = projected_gradient_equilibrium(
                m, d, fset.S, p, PARAMS.alpha1, PARAMS.alpha2
            )
            assert np.max(np.abs(x - ref)) <= 1e-3

    def test_unique_equilibrium_from_different_starts(self):
        groups, fset = ASYMMETRIC
        x1, _ = sspm_solve(groups, fset, 3.0, PARAMS, x0=[0.0, 0.0])
        x2, _ = sspm_solve(groups, fset, 3.0, PARAMS, x0=[1.0, 1.0])
        assert np.max(np.abs(x1 - x2)) <= 1e-3

    def test_two_projections_per_update_iteration(self):
        groups, fset = make_instance([15, 40, 8], [12, 10, 8], e_plus=30.0,
                                     d_total=30.0, r=5.625)
        _, trace = sspm_solve(groups, fset, 4.0, PARAMS)
        assert all(calls == 2 for calls in trace.projection_calls[:-1])
        assert trace.projection_calls[-1] in (1, 2)

    def test_trace_shapes(self):
        groups, fset = SYMMETRIC
        x, trace = sspm_solve(groups, fset, 2.0, PARAMS)
        k = len(trace)
        assert len(trace.iterates) == k
        assert len(trace.etas) == k
        assert len(trace.zetas) == k
        assert len(trace.utilities) == k
        assert trace.residual_norms[-1] < PARAMS.epsilon

    def test_cap_exhaustion_carries_trace(self):
        groups, fset = make_instance([1, 76, 57], [0, 59, 38], e_plus=0.0,
                                     d_total=0.0)
        fset.e_plus = (fset.m_total - 101.4684) * 1.0
        with pytest.raises(SspmConvergenceError) as err:
            sspm_solve(groups, fset, 7.7, PARAMS, max_iterations=3)
        assert len(err.value.trace) == 3

    def test_rejects_empty_groups(self):
        groups = [PvGroup(region=0, m=0, d=0), PvGroup(region=1, m=5, d=2)]
        fset = FeasibleSet(m=[0.0, 5.0], d_total=2.0, e_plus=1.0, r=1.0)
        with pytest.raises(ValueError):
            sspm_solve(groups, fset, 1.0, PARAMS)

    def test_rejects_weight_mismatch(self):
        groups, _ = SYMMETRIC
        fset = FeasibleSet(m=[10.0, 11.0], d_total=8.0, e_plus=8.0, r=1.0)
        with pytest.raises(ValueError):
            sspm_solve(groups, fset, 2.0, PARAMS)


class TestKktVerify:
    def test_solution_passes(self):
        groups, fset = SYMMETRIC
        x, _ = sspm_solve(groups, fset, 2.0, PARAMS)
        report = kkt_verify(x, groups, fset, 2.0, PARAMS)
        assert report.worst() <= 1e-3

    def test_single_common_multiplier_vector(self):
        groups, fset = SYMMETRIC
        x, _ = sspm_solve(groups, fset, 2.0, PARAMS)
        report = kkt_verify(x, groups, fset, 2.0, PARAMS)
        # one equality multiplier, one demand multiplier, box pairs per group
        assert report.lambda_bar.shape == (2 + 2 * len(groups),)

    def test_perturbed_point_fails(self):
        groups, fset = ASYMMETRIC
        x, _ = sspm_solve(groups, fset, 3.0, PARAMS)
        # stay on the hyperplane: move along the tangent (-2, 1)
        bad = x + np.array([-0.2, 0.1])
        report = kkt_verify(bad, groups, fset, 3.0, PARAMS)
        assert report.stationarity_residual > 0.1 * report.worst() >= 0.0
        assert report.worst() > 1e-2

    def test_singleton_trivial(self):
        groups, fset = SINGLETON
        report = kkt_verify(np.array([0.6]), groups, fset, 3.0, PARAMS)
        assert report.worst() <= 1e-9

    def test_residuals_nonnegative(self):
        groups, fset = ASYMMETRIC
        report = kkt_verify(np.array([0.9, 0.75]), groups, fset, 3.0, PARAMS)
        for v in (
            report.stationarity_residual,
            report.complementarity_residual,
            report.primal_violation,
            report.dual_violation,
        ):
            assert v >= 0.0


class TestTraceExport:
    def test_csv_round_trip(self):
        groups, fset = SYMMETRIC
        _, trace = sspm_solve(groups, fset, 2.0, PARAMS)
        buf = io.StringIO()
        write_trace_csv(trace, buf)
        lines = buf.getvalue().strip().splitlines()
        header = lines[0].split(",")
        assert header[:3] == ["iteration", "residual", "eta"]
        assert len(lines) == len(trace) + 1
        first = lines[1].split(",")
        assert float(first[1]) == trace.residual_norms[0]
