import math

import numpy as np
import pytest

from logkg import (
    AmplificationQuery,
    Grid1D,
    Scheme,
    SchemeParams,
    SnapshotRecorder,
    SolverState,
    StabilityViolation,
    StepOverflowError,
    TimeMesh,
    F_eps,
    amplification_factor,
    f_eps,
    first_step,
    initial_state,
    run_simulation,
    second_diff,
    sigma_max,
    stability_limit,
    step_efd,
    step_sifd,
)
from logkg.core import norm_l2, norm_linf
from logkg.kernels import efd_advance, sifd_advance, sifd_factor


def efd_params(eps, lam=1.0):
    return SchemeParams(epsilon=eps, lam=lam, scheme=Scheme.EFD)


def sifd_params(eps, lam=1.0):
    return SchemeParams(epsilon=eps, lam=lam, scheme=Scheme.SIFD)


class TestNonlinearity:
    def test_f_eps_values(self):
        assert f_eps(0.0, 1.0) == 0.0
        assert f_eps(3.0, 1.0) == pytest.approx(math.log(4.0), rel=1e-15)
        assert f_eps(0.0, 1e-3) == pytest.approx(math.log(1e-6), rel=1e-12)

    def test_f_eps_domain(self):
        with pytest.raises(ValueError):
            f_eps(-0.1, 1.0)
        with pytest.raises(ValueError):
            f_eps(1.0, 0.0)

    def test_F_eps_values(self):
        assert F_eps(0.0, 1.0) == 0.0
        assert F_eps(0.0, 1e-5) == 0.0
        assert F_eps(1.0, 1.0) == pytest.approx(2 * math.log(2.0) - 1.0, rel=1e-14)

    @pytest.mark.parametrize("rho", [0.1, 1.0, 10.0])
    @pytest.mark.parametrize("eps", [1e-3, 1.0])
    def test_F_eps_derivative_matches_f_eps(self, rho, eps):
        # 1e-6 agreement with an absolute floor: near rho = 1, eps << 1 the
        # derivative itself is ~1e-6 and a purely relative check would demand
        # more than double precision can deliver through the difference of
        # O(1) antiderivative values
        d = 1e-5 * max(1.0, rho)
        fd = (F_eps(rho + d, eps) - F_eps(rho - d, eps)) / (2 * d)
        assert fd == pytest.approx(f_eps(rho, eps), rel=1e-6, abs=1e-6)


class TestFirstStep:
    def test_zero_data(self):
        g = Grid1D(0.0, 1.0, 8)
        u1 = first_step(np.zeros(8), np.zeros(8), g, 0.1, efd_params(1e-3))
        assert np.all(u1 == 0.0)

    def test_constant_closed_form(self):
        g = Grid1D(0.0, 1.0, 8)
        u1 = first_step(np.ones(8), np.zeros(8), g, 0.1, efd_params(1e-3))
        expected = 1.0 - 0.005 * (1.0 + math.log(1.0 + 1e-6))
        assert np.allclose(u1, expected, rtol=1e-14)

    def test_third_order_startup(self, gausson):
        # against the exact traveling wave at fixed fine h the start-up error
        # is O(tau^3)
        g = Grid1D.from_spacing(-16.0, 16.0, 2.0**-7)
        phi = gausson.phi(g.x)
        gamma = gausson.gamma(g.x)
        params = efd_params(1e-7)
        errs = []
        taus = [0.1 / 2**i for i in range(4)]
        for tau in taus:
            u1 = first_step(phi, gamma, g, tau, params)
            errs.append(norm_linf(u1 - gausson.exact(g.x, tau)))
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
        assert orders[-1] >= 2.7


class TestSteppers:
    def test_efd_uniform_closed_form(self):
        g = Grid1D(0.0, 1.0, 8)
        st = SolverState(1, np.ones(8), np.ones(8), 1.0)
        out = step_efd(st, g, 0.1, efd_params(1.0))
        assert np.allclose(out, 1.0 - 0.01 * (1.0 + math.log(2.0)), rtol=1e-14)

    def test_sifd_uniform_closed_form(self):
        g = Grid1D(0.0, 1.0, 8)
        st = SolverState(1, np.ones(8), np.ones(8), 1.0)
        out = step_sifd(st, g, 0.1, sifd_params(1.0))
        expected = (100.0 - 0.5 - math.log(2.0)) / 100.5
        assert np.allclose(out, expected, rtol=1e-14)

    @pytest.mark.parametrize("maker,stepper", [(efd_params, step_efd), (sifd_params, step_sifd)])
    def test_zero_preservation(self, maker, stepper):
        # 0 * ln(eps^2) must evaluate to 0, not NaN
        g = Grid1D(0.0, 1.0, 8)
        st = SolverState(1, np.zeros(8), np.zeros(8), 0.0)
        out = stepper(st, g, 0.1, maker(1e-3))
        assert np.all(out == 0.0)

    def test_scheme_mismatch_rejected(self):
        g = Grid1D(0.0, 1.0, 8)
        st = SolverState(1, np.zeros(8), np.zeros(8), 0.0)
        with pytest.raises(ValueError):
            step_efd(st, g, 0.1, sifd_params(1.0))
        with pytest.raises(ValueError):
            step_sifd(st, g, 0.1, efd_params(1.0))

    def test_sifd_solve_residual(self):
        rng = np.random.default_rng(42)
        g = Grid1D(-16.0, 16.0, 256)
        h, tau = g.spacing, 0.05
        a = rng.normal(size=256)
        b = a + 0.05 * rng.normal(size=256)
        st = SolverState(1, a, b, 0.0)
        u = step_sifd(st, g, tau, sifd_params(1e-3))
        lhs = (1 / tau**2 + 0.5 + 1 / h**2) * u - (np.roll(u, -1) + np.roll(u, 1)) / (2 * h**2)
        rhs = (2 * b - a) / tau**2 + 0.5 * second_diff(a, g) - 0.5 * a - b * np.log(1e-6 + b * b)
        assert norm_l2(lhs - rhs, g) <= 1e-12 * norm_l2(rhs, g)

    @pytest.mark.parametrize("scheme", [Scheme.EFD, Scheme.SIFD])
    def test_single_step_reversibility(self, scheme, gausson):
        g = Grid1D.from_spacing(-16.0, 16.0, 0.25)
        params = SchemeParams(epsilon=1.0, lam=1.0, scheme=scheme)
        st = initial_state(gausson.phi(g.x), gausson.gamma(g.x), g, 0.1, params)
        stepper = step_efd if scheme is Scheme.EFD else step_sifd
        u2 = stepper(st, g, 0.1, params)
        back = stepper(SolverState(2, u2, st.u_curr, 0.0), g, 0.1, params)
        scale = norm_linf(st.u_prev)
        assert norm_linf(back - st.u_prev) <= 1e-10 * scale

    @pytest.mark.parametrize("scheme", [Scheme.EFD, Scheme.SIFD])
    def test_500_step_reversibility(self, scheme, gausson):
        g = Grid1D.from_spacing(-16.0, 16.0, 0.25)
        tau, h = 0.1, g.spacing
        params = SchemeParams(epsilon=1.0, lam=1.0, scheme=scheme)
        st = initial_state(gausson.phi(g.x), gausson.gamma(g.x), g, tau, params)
        u0, u1 = st.u_prev.copy(), st.u_curr.copy()
        a, b = u0.copy(), u1.copy()
        if scheme is Scheme.SIFD:
            fac = sifd_factor(g.n_points, tau, h)
            adv = lambda x, y: sifd_advance(x, y, 500, tau, h, 1.0, 1.0, fac)
        else:
            adv = lambda x, y: efd_advance(x, y, 500, tau, h, 1.0, 1.0)
        adv(a, b)
        a, b = b, a  # swap the pair to march backwards
        adv(a, b)
        scale = norm_linf(u0)
        assert norm_linf(a - u1) <= 1e-8 * scale
        assert norm_linf(b - u0) <= 1e-8 * scale

    def test_efd_shift_equivariance_bitwise(self):
        rng = np.random.default_rng(5)
        g = Grid1D(0.0, 1.0, 64)
        a = rng.normal(size=64)
        b = rng.normal(size=64)
        out = step_efd(SolverState(1, a, b, 0.0), g, 0.01, efd_params(1e-3))
        for k in (1, 17):
            rolled = step_efd(
                SolverState(1, np.roll(a, k), np.roll(b, k), 0.0), g, 0.01, efd_params(1e-3)
            )
            assert np.array_equal(rolled, np.roll(out, k))

    def test_sifd_shift_equivariance(self):
        rng = np.random.default_rng(6)
        g = Grid1D(0.0, 1.0, 64)
        a = rng.normal(size=64)
        b = rng.normal(size=64)
        out = step_sifd(SolverState(1, a, b, 0.0), g, 0.01, sifd_params(1e-3))
        rolled = step_sifd(
            SolverState(1, np.roll(a, 9), np.roll(b, 9), 0.0), g, 0.01, sifd_params(1e-3)
        )
        assert norm_linf(rolled - np.roll(out, 9)) <= 1e-13 * norm_linf(out)


class TestStabilityMachinery:
    def test_sigma_max_values(self):
        assert sigma_max(1e-3, 1.0) == pytest.approx(13.8155106, abs=1e-6)
        assert sigma_max(1.0, 0.0) == 0.0
        assert sigma_max(0.8, 1.0) == pytest.approx(0.4946962, abs=1e-6)

    def test_sigma_max_domain(self):
        with pytest.raises(ValueError):
            sigma_max(0.0, 1.0)
        with pytest.raises(ValueError):
            sigma_max(1.0, -1.0)

    def test_sifd_limit(self):
        g = Grid1D(0.0, 1.0, 8)
        rep = stability_limit(sifd_params(1e-3), g, 5.0)
        assert rep.tau_limit == pytest.approx(1.0, rel=1e-14)

    def test_sifd_unconditional(self):
        g = Grid1D(0.0, 1.0, 8)
        rep = stability_limit(sifd_params(1e-3), g, 0.5, tau=123.0)
        assert rep.tau_limit is None
        assert rep.satisfied is True
        assert rep.margin is None

    def test_efd_limit(self):
        g = Grid1D.from_spacing(0.0, 1.0, 0.1)
        rep = stability_limit(efd_params(1e-3), g, 1.0, tau=0.05)
        assert rep.tau_limit == pytest.approx(0.2 / math.sqrt(4.02), rel=1e-12)
        assert rep.satisfied is True
        assert rep.margin == pytest.approx(rep.tau_limit / 0.05, rel=1e-12)

    def test_amplification_efd_mean_mode(self):
        q = AmplificationQuery(alpha=0.0, mode_index=0, n_points=64, spacing=0.1, tau=0.1)
        theta, xi = amplification_factor(q, Scheme.EFD)
        assert theta == pytest.approx(0.995, rel=1e-14)
        assert xi == 1.0

    def test_amplification_sifd_contractive(self):
        for l in (-32, -7, 0, 13, 31):
            q = AmplificationQuery(alpha=1.0, mode_index=l, n_points=64, spacing=0.1, tau=0.3)
            theta, xi = amplification_factor(q, Scheme.SIFD)
            assert abs(theta) <= 1.0
            assert xi == 1.0

    def test_amplification_efd_unstable_above_limit(self):
        n, h = 64, 0.1
        sigma = 13.8155
        g = Grid1D.from_spacing(0.0, n * h, h)
        limit = stability_limit(efd_params(1e-3), g, sigma).tau_limit
        q = AmplificationQuery(alpha=sigma, mode_index=-n // 2, n_points=n,
                               spacing=h, tau=1.02 * limit)
        _, xi = amplification_factor(q, Scheme.EFD)
        assert xi > 1.0

    @pytest.mark.parametrize("scheme", [Scheme.EFD, Scheme.SIFD])
    def test_amplification_consistency_at_limit(self, scheme):
        # every mode has |xi| <= 1 + 1e-12 when tau satisfies the bound
        n, h = 64, 0.125
        sigma = 9.7
        g = Grid1D.from_spacing(0.0, n * h, h)
        params = SchemeParams(epsilon=1e-3, lam=1.0, scheme=scheme)
        limit = stability_limit(params, g, sigma).tau_limit
        tau = limit if limit is not None else 1.0
        for l in range(-n // 2, n // 2):
            q = AmplificationQuery(alpha=sigma, mode_index=l, n_points=n, spacing=h, tau=tau)
            _, xi = amplification_factor(q, scheme)
            assert xi <= 1.0 + 1e-12

    def test_mode_index_validated(self):
        with pytest.raises(ValueError):
            AmplificationQuery(alpha=0.0, mode_index=32, n_points=64, spacing=0.1, tau=0.1)


class TestRunSimulation:
    def test_zero_data_zero_trajectory(self):
        g = Grid1D(0.0, 1.0, 16)
        mesh = TimeMesh(0.05, 20)
        res = run_simulation(np.zeros(16), np.zeros(16), g, mesh, efd_params(1e-3))
        assert np.all(res.state.u_curr == 0.0)
        assert res.state.amplitude_max == 0.0
        assert res.state.step_index == 20

    def test_refusal_without_force(self, gausson):
        g = Grid1D.from_spacing(-16.0, 16.0, 2.0**-3)
        phi, gamma = gausson.phi(g.x), gausson.gamma(g.x)
        mesh = TimeMesh(0.25, 4)
        with pytest.raises(StabilityViolation):
            run_simulation(phi, gamma, g, mesh, efd_params(1e-3))

    def test_forced_run_reports_post_verdict(self, gausson):
        g = Grid1D.from_spacing(-16.0, 16.0, 2.0**-3)
        phi, gamma = gausson.phi(g.x), gausson.gamma(g.x)
        mesh = TimeMesh(0.125, 8)  # just above the ~0.12 limit
        with pytest.warns(UserWarning):
            res = run_simulation(phi, gamma, g, mesh, efd_params(1e-3), force=True)
        assert res.post_ok is False

    def test_overflow_names_step(self, gausson):
        g = Grid1D.from_spacing(-16.0, 16.0, 2.0**-3)
        phi, gamma = gausson.phi(g.x), gausson.gamma(g.x)
        mesh = TimeMesh(1.0, 100)
        with pytest.raises(StepOverflowError) as exc:
            run_simulation(phi, gamma, g, mesh, efd_params(1e-3), force=True)
        assert 1 < exc.value.step_index <= 100
        assert exc.value.time == pytest.approx(exc.value.step_index * 1.0)

    def test_amplitude_monitor(self, gausson):
        g = Grid1D.from_spacing(-16.0, 16.0, 2.0**-4)
        phi, gamma = gausson.phi(g.x), gausson.gamma(g.x)
        mesh = TimeMesh(0.05, 20)
        res = run_simulation(phi, gamma, g, mesh, efd_params(1e-3))
        assert res.state.amplitude_max >= norm_linf(res.state.u_curr) - 1e-15
        assert res.state.amplitude_max == pytest.approx(1.0, abs=0.05)


class TestSnapshotRecorder:
    def test_captures_initial_levels_and_targets(self):
        g = Grid1D(0.0, 1.0, 16)
        tau = 0.05
        rec = SnapshotRecorder((0.0, tau, 0.5), tau)
        phi = np.sin(2 * np.pi * g.x)
        res = run_simulation(phi, np.zeros(16), g, TimeMesh(tau, 20),
                             efd_params(1.0), observers=(rec,))
        assert np.array_equal(rec.at(0.0), phi)
        assert set(round(t, 3) for t in rec.fields) == {0.0, 0.05, 0.5}
        assert res.state.step_index == 20

    def test_rejects_off_mesh_time(self):
        with pytest.raises(ValueError):
            SnapshotRecorder((0.3,), 0.2)

    def test_missing_snapshot_raises(self):
        rec = SnapshotRecorder((0.2,), 0.1)
        with pytest.raises(KeyError):
            rec.at(0.2)


class TestBackends:
    def test_fallback_matches_selected_backend(self):
        # exercises the compiled kernels against the reference implementation
        # whenever the compiled backend is the one selected at import
        from logkg.kernels import BACKEND, _fallback

        if BACKEND != "compiled":
            pytest.skip("compiled backend not selected")
        rng = np.random.default_rng(0)
        h, tau = 0.125, 0.01
        u0 = rng.normal(size=96)
        u1 = u0 + 0.01 * rng.normal(size=96)

        a1, b1 = u0.copy(), u1.copy()
        a2, b2 = u0.copy(), u1.copy()
        efd_advance(a1, b1, 200, tau, h, 1e-3, 1.0)
        _fallback.efd_advance(a2, b2, 200, tau, h, 1e-3, 1.0)
        assert np.array_equal(a1, a2)
        assert np.array_equal(b1, b2)

        a1, b1 = u0.copy(), u1.copy()
        a2, b2 = u0.copy(), u1.copy()
        sifd_advance(a1, b1, 200, tau, h, 1e-3, 1.0, sifd_factor(96, tau, h))
        _fallback.sifd_advance(a2, b2, 200, tau, h, 1e-3, 1.0,
                               _fallback.sifd_factor(96, tau, h))
        assert norm_linf(b1 - b2) <= 1e-11 * max(norm_linf(b2), 1.0)

    def test_overflow_reports_completed_steps(self):
        # a pair diverging immediately: huge tau on a rough field
        rng = np.random.default_rng(9)
        u0 = 1e150 * rng.normal(size=32)
        u1 = -1e150 * rng.normal(size=32)
        done, amp = efd_advance(u0.copy(), u1.copy(), 10, 10.0, 0.1, 1e-3, 1.0)
        assert done < 10
        assert math.isfinite(amp)
