"""Status-taxonomy branches, inner-solver monotonicity, and loader paths
that the mainline tests do not reach."""

import numpy as np
import pytest

import pgcon.globalization as glob
from pgcon.bench import corpus_suite, profile_to_csv, run_benchmark
from pgcon.corpus import get_instance
from pgcon.driver import SolverConfig, solve
from pgcon.problem import BoxSet, L1Regularizer, ProblemInstance, load_problem
from pgcon.qp import solve_qp
from pgcon.scca import scca_generate
from test_qp import random_qp


class TestQpInnerMonotonicity:
    def test_objective_nonincreasing_along_path(self):
        rng = np.random.default_rng(55)
        for _ in range(30):
            qp = random_qp(rng)
            sol = solve_qp(qp, track_objective=True)
            if sol.status != "solved":
                continue
            hist = sol.objective_history
            assert hist is not None and len(hist) == sol.iterations
            for a, b in zip(hist, hist[1:]):
                assert b <= a + 1e-9 * (1.0 + abs(a))

    def test_history_off_by_default(self):
        qp = random_qp(np.random.default_rng(1))
        assert solve_qp(qp).objective_history is None


class TestStatusBranches:
    def test_merit_collapse(self, monkeypatch):
        # force the floor above the initial weight: the first update trips it
        monkeypatch.setattr(glob, "TAU_FLOOR", 1.1)
        inst = get_instance("l1-sign-1")
        rep = solve(inst.problem, SolverConfig())
        assert rep.status == "MeritCollapse"

    def test_alpha_floor_stall(self, monkeypatch):
        monkeypatch.setattr(glob, "ALPHA_FLOOR", 1.0)
        # steep curvature rejects large-alpha steps repeatedly
        p = ProblemInstance(
            name="steep", n=1, m=0,
            f_eval=lambda x: 50.0 * float(x[0] ** 2),
            g_eval=lambda x: np.array([100.0 * x[0]]),
            c_eval=lambda x: np.zeros(0),
            J_eval=lambda x: np.zeros((0, 1)),
            reg=L1Regularizer(np.zeros(1)),
            box=BoxSet.free(1), x0=np.array([1.0]),
        )
        rep = solve(p, SolverConfig(alpha0=10.0, scaling=False))
        assert rep.status == "Stalled"

    def test_projection_warning(self):
        inst = get_instance("eq-quad-1")
        with pytest.warns(UserWarning, match="projected"):
            solve(inst.problem, SolverConfig(x0=np.array([-1.0, 2.0]),
                                             max_iter=2))


class TestLoaders:
    def test_scca_kind(self):
        p = load_problem({
            "name": "s", "kind": "scca",
            "data": {"n_x": 64, "n_y": 64, "N": 64, "seed": 3, "lam": 1e-2},
        })
        assert p.n == 130 and p.m == 2
        assert p.x0 is not None

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            load_problem({"name": "x", "kind": "martian"})


class TestGeneratorGroundTruth:
    def test_block_cross_correlation(self):
        # rows in the signal blocks correlate across views; rows in the
        # zero blocks carry only the (weak) noise channel
        data = scca_generate(200, 200, 200, seed=0)
        x_sig = data.X[:25].mean(axis=0)   # first eighth: +e block
        y_sig = data.Y[175:].mean(axis=0)  # last eighth: -e block
        corr = np.corrcoef(x_sig, y_sig)[0, 1]
        assert abs(corr) >= 0.999  # shared latent series, opposite sign
        assert corr < 0


class TestProfileCsv:
    def test_times_sortable_monotone(self):
        results = run_benchmark(corpus_suite()[:4])
        csv = profile_to_csv(results, "cfg")
        rows = [line.split(",") for line in csv.strip().splitlines()[1:]]
        times = sorted(float(r[2]) for r in rows)
        assert all(a <= b for a, b in zip(times, times[1:]))
