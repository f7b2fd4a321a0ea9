import numpy as np
import pytest

from pgcon.corpus import CorpusInstance, corpus, get_instance, validate_corpus
from pgcon.driver import kkt_residual


class TestValidation:
    def test_all_oracles_certified(self):
        insts = corpus()
        assert len(insts) >= 10
        names = [i.name for i in insts]
        assert len(set(names)) == len(names)

    def test_kkt_oracles_tight(self):
        for inst in corpus():
            if inst.expected_status != "KktPoint":
                continue
            chi, _ = kkt_residual(inst.problem, inst.oracle_x, inst.oracle_y,
                                  inst.oracle_z, inst.oracle_g_r)
            assert chi <= 1e-10, inst.name

    def test_bad_oracle_rejected(self):
        inst = get_instance("eq-quad-1")
        broken = CorpusInstance(
            problem=inst.problem,
            oracle_x=inst.oracle_x + 0.1,
            oracle_y=inst.oracle_y, oracle_z=inst.oracle_z,
            oracle_g_r=inst.oracle_g_r,
            oracle_active_lower=inst.oracle_active_lower,
            oracle_active_upper=inst.oracle_active_upper,
            note="deliberately off",
        )
        with pytest.raises(RuntimeError):
            validate_corpus([broken])

    def test_variety(self):
        insts = corpus()
        assert any(i.expected_status == "InfeasibleStationary" for i in insts)
        assert any(i.problem.m == 0 for i in insts)  # pure box problems
        assert any(np.any(i.problem.reg.weights > 0) for i in insts)
        assert any(i.problem.box.is_orthant() for i in insts)

    def test_get_instance_unknown(self):
        with pytest.raises(KeyError):
            get_instance("does-not-exist")


class TestBruteForceCrossCheck:
    """Grid sweep around each small oracle point: no grid point may beat the
    oracle on the penalized objective, so the certificates are optimality
    claims, not just stationarity claims."""

    PEN = 1e4

    def penalized(self, p, x):
        if not p.box.contains(x, tol=0.0):
            return np.inf
        return p.f(x) + p.reg.value(x) + self.PEN * float(np.linalg.norm(p.c(x)))

    @pytest.mark.parametrize("name", ["eq-quad-1", "l1-lin-1", "box-qp-1",
                                      "box-qp-2", "soft-thresh-1", "l1-sign-1",
                                      "orthant-lp-l1", "fixed-var-1"])
    def test_grid_cannot_beat_oracle(self, name):
        inst = get_instance(name)
        p = inst.problem
        if p.n > 3:
            pytest.skip("grid oracle only for n <= 3")
        base = self.penalized(p, inst.oracle_x)
        step = 0.02
        offsets = np.arange(-0.5, 0.5 + step / 2, step)
        grids = np.meshgrid(*[offsets] * p.n, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1) + inst.oracle_x
        best = base
        for pt in pts:
            val = self.penalized(p, pt)
            if val < best:
                best = val
        # the grid is off-manifold for equality constraints, so allow the
        # penalty-resolution slack
        assert best >= base - self.PEN * step * 1e-3 - 1e-9, name
