"""Tests for the coupled elliptic solve and the IMEX time stepping."""

import numpy as np
import pytest

from bsvem import (
    AnalyticField,
    EllipticProblem,
    ImexStepper,
    ParabolicProblem,
    SnapshotWriter,
    SolverError,
    TrajectoryRecorder,
    assemble,
    build_elliptic_system,
    discrete_mass,
    generate_cartesian_cut,
    imex_step,
    linear_coupling_problem,
    solve_elliptic,
    solve_parabolic,
    structured_disc_triangulation,
    unit_disc,
    wave_pinning_problem,
    wave_pinning_reaction,
)


@pytest.fixture(scope="module")
def coarse_ops():
    return assemble(generate_cartesian_cut(unit_disc(), 0.25))


def constant_field(c):
    return AnalyticField(lambda x, y, t=0.0: np.full_like(np.asarray(x, float), c))


class TestEllipticSolve:
    def test_problem_validation(self):
        f = constant_field(1.0)
        with pytest.raises(SolverError):
            EllipticProblem(alpha=0.0, beta=1.0, f=f, g=f)
        with pytest.raises(SolverError):
            EllipticProblem(alpha=1.0, beta=-2.0, f=f, g=f)

    def test_block_system_layout(self, coarse_ops):
        ops = coarse_ops
        alpha, beta = 1.3, 2.7
        system = build_elliptic_system(ops, alpha, beta)
        n, m = ops.num_nodes, ops.num_boundary
        assert system.shape == (n + m, n + m)
        dense = system.toarray()
        a11 = (ops.A_bulk + ops.M_bulk).toarray()
        a11[:m, :m] += alpha * ops.M_surf.toarray()
        assert dense[:n, :n] == pytest.approx(a11, abs=1e-14)
        a12 = np.zeros((n, m))
        a12[:m] = -beta * ops.M_surf.toarray()
        assert dense[:n, n:] == pytest.approx(a12, abs=1e-14)
        a21 = np.zeros((m, n))
        a21[:, :m] = -alpha * ops.M_surf.toarray()
        assert dense[n:, :n] == pytest.approx(a21, abs=1e-14)
        a22 = (ops.A_surf + (beta + 1.0) * ops.M_surf).toarray()
        assert dense[n:, n:] == pytest.approx(a22, abs=1e-14)

    def test_constant_pair_exact(self, coarse_ops):
        rng = np.random.default_rng(31)
        for _ in range(3):
            alpha, beta = rng.uniform(0.5, 3.0, 2)
            c1 = rng.uniform(-2.0, 2.0)
            problem = EllipticProblem(
                alpha=alpha,
                beta=beta,
                f=constant_field(c1),
                g=constant_field(alpha * c1 / beta),
            )
            sol = solve_elliptic(coarse_ops, problem)
            assert np.abs(sol.xi - c1).max() <= 1e-9
            assert np.abs(sol.eta - alpha * c1 / beta).max() <= 1e-9

    def test_info_and_condition(self, coarse_ops):
        problem = EllipticProblem(
            alpha=1.0, beta=2.0, f=constant_field(1.0), g=constant_field(0.5)
        )
        sol = solve_elliptic(coarse_ops, problem)
        assert "residual" in sol.info
        assert sol.info["residual"] <= 1e-8
        assert "cond_estimate" not in sol.info
        sol2 = solve_elliptic(coarse_ops, problem, estimate_condition=True)
        assert sol2.info["cond_estimate"] > 1.0


class TestImexStep:
    def test_negative_tau_rejected(self, coarse_ops):
        with pytest.raises(SolverError):
            ImexStepper(coarse_ops, linear_coupling_problem(), -0.1)

    def test_tau_zero_is_identity(self, coarse_ops):
        ops = coarse_ops
        rng = np.random.default_rng(37)
        xi = rng.standard_normal(ops.num_nodes)
        eta = rng.standard_normal(ops.num_boundary)
        xi1, eta1 = imex_step(ops, linear_coupling_problem(), xi, eta, 0.0)
        assert xi1 == pytest.approx(xi, abs=1e-10)
        assert eta1 == pytest.approx(eta, abs=1e-10)

    def test_zero_state_stays_zero(self, coarse_ops):
        ops = coarse_ops
        problem = ParabolicProblem(
            d_u=1.0, d_v=1.0, u0=constant_field(0.0), v0=constant_field(0.0)
        )
        xi, eta = imex_step(
            ops, problem, np.zeros(ops.num_nodes), np.zeros(ops.num_boundary), 0.1
        )
        assert np.abs(xi).max() <= 1e-14
        assert np.abs(eta).max() <= 1e-14

    def test_constants_are_steady_without_kinetics(self, coarse_ops):
        ops = coarse_ops
        problem = ParabolicProblem(
            d_u=2.0, d_v=0.5, u0=constant_field(3.0), v0=constant_field(-1.0)
        )
        xi = np.full(ops.num_nodes, 3.0)
        eta = np.full(ops.num_boundary, -1.0)
        for _ in range(3):
            xi, eta = imex_step(ops, problem, xi, eta, 0.05)
        assert np.abs(xi - 3.0).max() <= 1e-10
        assert np.abs(eta + 1.0).max() <= 1e-10

    def test_step_solves_declared_systems(self, coarse_ops):
        # one step must satisfy the two implicit equations exactly:
        # (M_b + tau d_u A_b) xi1 = M_b (xi0 + tau q(xi0)) + tau R^T M_s s
        # (M_s + tau d_v A_s) eta1 = M_s (eta0 + tau (r - s))
        ops = coarse_ops
        problem = linear_coupling_problem()
        tau = 0.01
        rng = np.random.default_rng(41)
        xi0 = rng.standard_normal(ops.num_nodes)
        eta0 = rng.standard_normal(ops.num_boundary)
        xi1, eta1 = imex_step(ops, problem, xi0, eta0, tau)
        m = ops.num_boundary
        trace = xi0[:m]
        s0 = problem.s(trace, eta0)
        rhs_b = ops.M_bulk @ (xi0 + tau * problem.q(xi0))
        rhs_b[:m] += tau * (ops.M_surf @ s0)
        lhs_b = (ops.M_bulk + tau * problem.d_u * ops.A_bulk) @ xi1
        assert np.abs(lhs_b - rhs_b).max() <= 1e-11
        rhs_s = ops.M_surf @ (eta0 + tau * (problem.r(trace, eta0) - s0))
        lhs_s = (ops.M_surf + tau * problem.d_v * ops.A_surf) @ eta1
        assert np.abs(lhs_s - rhs_s).max() <= 1e-12

    def test_mass_conserved_with_pure_exchange(self, coarse_ops):
        # kinetics that only move mass across the boundary: q = r = 0,
        # s arbitrary; the tau*s loads cancel between the two equations
        ops = coarse_ops
        problem = ParabolicProblem(
            d_u=1.0,
            d_v=0.25,
            u0=AnalyticField.stationary(lambda x, y: 1.0 + 0.3 * x),
            v0=AnalyticField.stationary(lambda x, y: 0.5 - 0.2 * y),
            s=lambda u, v: (4.0 / 3.0) * v - 0.5 * u,
        )
        recorder = TrajectoryRecorder(ops)
        solve_parabolic(ops, problem, tau=0.02, t_end=1.0, observers=(recorder,))
        assert recorder.mass_drift() <= 1e-12

    def test_projected_kinetics_match_plain_on_triangles(self):
        # on triangles the projector is the identity, so both reaction
        # load variants coincide
        ops = assemble(structured_disc_triangulation(3))
        rng = np.random.default_rng(43)
        xi0 = rng.standard_normal(ops.num_nodes)
        eta0 = rng.standard_normal(ops.num_boundary)
        base = dict(
            d_u=1.0,
            d_v=1.0,
            u0=constant_field(0.0),
            v0=constant_field(0.0),
            q=lambda u: u * u - u,
        )
        plain = ParabolicProblem(kinetics_variant="plain-kinetics", **base)
        proj = ParabolicProblem(kinetics_variant="projected-kinetics", **base)
        xi_a, eta_a = imex_step(ops, plain, xi0, eta0, 0.05)
        xi_b, eta_b = imex_step(ops, proj, xi0, eta0, 0.05)
        assert np.abs(xi_a - xi_b).max() <= 1e-12
        assert np.array_equal(eta_a, eta_b)

    def test_problem_validation(self):
        with pytest.raises(SolverError):
            ParabolicProblem(d_u=0.0, d_v=1.0, u0=constant_field(0.0), v0=constant_field(0.0))
        with pytest.raises(SolverError):
            ParabolicProblem(
                d_u=1.0, d_v=1.0, u0=constant_field(0.0), v0=constant_field(0.0),
                kinetics_variant="bogus",
            )


class TestSolveParabolic:
    def test_step_count_and_final_time(self, coarse_ops):
        problem = linear_coupling_problem()
        result = solve_parabolic(coarse_ops, problem, tau=0.3, t_end=1.0)
        assert result.num_steps == 4
        assert result.t_final == pytest.approx(1.2)
        exact = solve_parabolic(coarse_ops, problem, tau=0.25, t_end=1.0)
        assert exact.num_steps == 4
        assert exact.t_final == pytest.approx(1.0)

    def test_observers_called_including_initial(self, coarse_ops):
        seen = []
        solve_parabolic(
            coarse_ops,
            linear_coupling_problem(),
            tau=0.25,
            t_end=1.0,
            observers=(lambda step, t, xi, eta: seen.append((step, t)),),
        )
        assert [s for s, _ in seen] == [0, 1, 2, 3, 4]
        assert seen[0][1] == 0.0
        assert seen[-1][1] == pytest.approx(1.0)

    def test_invalid_inputs(self, coarse_ops):
        with pytest.raises(SolverError):
            solve_parabolic(coarse_ops, linear_coupling_problem(), tau=0.0, t_end=1.0)
        with pytest.raises(SolverError):
            solve_parabolic(coarse_ops, linear_coupling_problem(), tau=0.1, t_end=-1.0)

    def test_linear_benchmark_tracks_exact_solution(self, coarse_ops):
        result = solve_parabolic(coarse_ops, linear_coupling_problem(), tau=1e-3, t_end=0.2)
        mesh = coarse_ops.mesh
        exact = np.exp(-0.2) * mesh.nodes[:, 0] * mesh.nodes[:, 1]
        assert np.abs(result.xi - exact).max() <= 0.05
        assert np.isfinite(result.xi).all() and np.isfinite(result.eta).all()


class TestPresets:
    def test_wave_pinning_reaction_values(self):
        assert wave_pinning_reaction(0.0, 2.487) == pytest.approx(0.12435)
        assert wave_pinning_reaction(1.0, 0.0) == pytest.approx(-1.0)
        a = np.array([0.0, 1.0])
        vals = wave_pinning_reaction(a, 2.0)
        assert vals == pytest.approx([0.1, 2.0 * (0.05 + 0.395) - 1.0])

    def test_wave_pinning_problem_mapping(self):
        problem = wave_pinning_problem(eps2=0.001)
        eps = np.sqrt(0.001)
        assert problem.d_u == pytest.approx(1.0 / eps)
        assert problem.d_v == pytest.approx(eps)
        assert problem.q is None and problem.r is None
        # s(u, v) = -f(v, u)/eps with bulk trace u and surface activity v
        assert problem.s(2.487, 0.0) == pytest.approx(-0.12435 / eps)
        assert problem.u0(0.3, -0.8) == pytest.approx(2.487)
        assert problem.v0(1.0, 0.0) == pytest.approx(1.009)
        assert problem.v0(-1.0, 0.0) == pytest.approx(0.309)
        with pytest.raises(SolverError):
            wave_pinning_problem(eps2=0.0)

    def test_wave_pinning_short_run_conserves_mass(self):
        ops = assemble(generate_cartesian_cut(unit_disc(), 0.2))
        recorder = TrajectoryRecorder(ops)
        result = solve_parabolic(
            ops, wave_pinning_problem(), tau=2e-3, t_end=0.1, observers=(recorder,)
        )
        assert recorder.mass_drift() <= 1e-9
        assert np.isfinite(result.xi).all() and np.isfinite(result.eta).all()

    def test_linear_coupling_problem_data(self):
        problem = linear_coupling_problem()
        assert problem.d_u == 1.0
        assert problem.d_v == 0.25
        assert problem.q(1.0) == -1.0
        assert problem.r(2.0, 0.0) == 4.0
        assert problem.s(0.0, 3.0) == pytest.approx(4.0)
        assert problem.u0(0.5, 0.5) == 0.25


class TestObservers:
    def test_trajectory_recorder(self, coarse_ops, tmp_path):
        ops = coarse_ops
        recorder = TrajectoryRecorder(ops)
        solve_parabolic(
            ops, linear_coupling_problem(), tau=0.25, t_end=1.0, observers=(recorder,)
        )
        assert len(recorder.rows) == 5
        assert recorder.times == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
        assert recorder.mass_drift() >= 0.0
        path = tmp_path / "trajectory.csv"
        recorder.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,mass,bulk_min,bulk_max,surf_min,surf_max"
        assert len(lines) == 6

    def test_discrete_mass_definition(self, coarse_ops):
        ops = coarse_ops
        rng = np.random.default_rng(47)
        xi = rng.standard_normal(ops.num_nodes)
        eta = rng.standard_normal(ops.num_boundary)
        expect = np.ones(ops.num_nodes) @ (ops.M_bulk @ xi)
        expect += np.ones(ops.num_boundary) @ (ops.M_surf @ eta)
        assert discrete_mass(ops, xi, eta) == pytest.approx(expect, rel=1e-13)

    def test_snapshot_writer(self, coarse_ops, tmp_path):
        mesh = coarse_ops.mesh
        writer = SnapshotWriter(mesh, str(tmp_path / "snaps"), every=2, final_step=3)
        solve_parabolic(
            coarse_ops, linear_coupling_problem(), tau=0.35, t_end=1.0,
            observers=(writer,),
        )
        steps = [s for s, _, _, _ in writer.written]
        assert steps == [0, 2, 3]
        _, _, bulk, surf = writer.written[0]
        blines = open(bulk).read().splitlines()
        assert blines[0] == "node_index,x,y,value"
        assert len(blines) == mesh.num_nodes + 1
        assert len(open(surf).read().splitlines()) == mesh.num_boundary + 1

    def test_snapshot_writer_validation(self, coarse_ops, tmp_path):
        with pytest.raises(SolverError):
            SnapshotWriter(coarse_ops.mesh, str(tmp_path), every=0)
