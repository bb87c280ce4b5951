import dataclasses

import numpy as np
import pytest

from rcebench.evaluators import eval_delta_robustness
from rcebench.generators import (
    GENERATORS, GeneratorConfig, PreconditionError, generate, resolve_method, stability,
)
from rcebench.model import DenseModel, ParamBall, forward_logit, interval_logit
from rcebench.task import ClassificationTask

from conftest import dataset, make_l1
from oracles import linear_scan_nearest

ORIGIN = np.zeros(2)


def same(a, b):
    fields = [f.name for f in dataclasses.fields(a) if f.name not in ("wall_time", "ce")]
    ce_equal = (a.ce is None and b.ce is None) or np.array_equal(a.ce, b.ce)
    return ce_equal and all(getattr(a, f) == getattr(b, f) for f in fields)


def blobs_negatives(task, limit=10):
    return task.negative_instances()[:limit]


class TestContract:
    @pytest.mark.parametrize("method", sorted(GENERATORS))
    def test_precondition(self, l1_task, method):
        with pytest.raises(PreconditionError):
            generate(method, l1_task, (1, 1))

    @pytest.mark.parametrize("method", sorted(GENERATORS))
    def test_valid_in_box_and_deterministic(self, blobs_task, method):
        lo, hi = blobs_task.box
        cfg = GeneratorConfig(seed=3)
        for i, x in blobs_negatives(blobs_task, 5):
            r = generate(method, blobs_task, x, cfg, index=i)
            assert r.found and r.valid
            assert (r.ce >= lo).all() and (r.ce <= hi).all()
            assert r.l2_distance == pytest.approx(np.linalg.norm(r.ce - x))
            assert same(r, generate(method, blobs_task, x, cfg, index=i))

    def test_names(self):
        assert resolve_method("KDTreeNNCE") == "kdtree-nnce"
        assert resolve_method("MCER") == "mcer"
        with pytest.raises(KeyError, match="choose from"):
            resolve_method("dice")

    def test_no_target_points(self):
        t = ClassificationTask(make_l1(), dataset([[0, 0], [0.2, 0.1]]))
        for m in ("bls", "kdtree-nnce", "rnce", "stce", "proplace"):
            r = generate(m, t, ORIGIN)
            assert not r.found and not r.valid and "reason" in r.diagnostics


class TestWachter:
    def test_l1(self, l1_task):
        r = generate("wachter", l1_task, ORIGIN)
        assert r.valid and r.ce.sum() >= 1 and r.l2_distance <= 0.9

    def test_blobs_all_negatives(self, blobs_task):
        res = [generate("wachter", blobs_task, x, index=i) for i, x in blobs_task.negative_instances()]
        assert all(r.valid for r in res)


class TestBls:
    def test_l1(self, l1_task):
        r = generate("bls", l1_task, ORIGIN)
        assert r.valid
        assert r.ce == pytest.approx([0.5, 0.5], abs=1e-5)
        assert r.l2_distance == pytest.approx(np.sqrt(0.5), abs=1e-5)

    def test_anchor_when_midpoints_negative(self):
        m = DenseModel((np.array([[1.0]]),), (np.array([-0.9999999]),))
        t = ClassificationTask(m, dataset([[0.0], [1.0]], np.array([0, 1])))
        r = generate("bls", t, np.zeros(1))
        assert r.ce.tolist() == [1.0]

    def test_target_segment_shrinks_to_x(self):
        m = DenseModel((np.array([[1.0]]),), (np.array([-1e-9]),))
        t = ClassificationTask(m, dataset([[0.0], [1.0]], np.array([0, 1])))
        r = generate("bls", t, np.zeros(1))
        assert r.valid and r.ce[0] == pytest.approx(2.0 ** -20)


class TestNnce:
    def test_single_candidate(self, l1_task):
        assert generate("kdtree-nnce", l1_task, (0.2, 0.2)).ce.tolist() == [1, 1]

    def test_linear_scan(self):
        rng = np.random.default_rng(0)
        P = rng.uniform(-1, 1, size=(1000, 3))
        m = DenseModel((np.array([[1.0, 0.5, -0.3]]),), (np.array([0.1]),))
        t = ClassificationTask(m, dataset(P))
        target = t.target_rows()
        for q in rng.uniform(-1, 1, size=(300, 3)):
            if t.is_valid_ce(q):
                continue
            j = target[linear_scan_nearest(P[target], q)]
            assert generate("kdtree-nnce", t, q).diagnostics["row"] == j

    def test_tie(self):
        m = DenseModel((np.array([[1.0, 0.0]]),), (np.array([0.0]),))
        t = ClassificationTask(m, dataset([[-1, 0], [1, 1], [1, -1]]))
        assert generate("kdtree-nnce", t, (0, 0)).diagnostics["row"] == 1


class TestMce:
    def test_net_a(self, net_a_task):
        r = generate("mce", net_a_task, ORIGIN)
        assert r.ce == pytest.approx([0.51, 0.0], abs=1e-9)
        assert np.abs(r.ce - [0.5, 0]).sum() <= 0.01 + 1e-9

    def test_infeasible(self, net_a_task):
        r = generate("mce", net_a_task, ORIGIN, GeneratorConfig(mce_kappa=1.0))
        assert not r.found and r.diagnostics["reason"] == "MILP infeasible"

    def test_grid_optimality(self, blobs_task):
        lo, hi = blobs_task.box
        g0 = np.arange(lo[0], hi[0] + 1e-12, 1e-2)
        g1 = np.arange(lo[1], hi[1] + 1e-12, 1e-2)
        G = np.stack(np.meshgrid(g0, g1, indexing="ij"), -1).reshape(-1, 2)
        ok = blobs_task.model.logits(G) > 0
        for i, x in blobs_negatives(blobs_task, 3):
            r = generate("mce", blobs_task, x, index=i)
            l1 = np.abs(r.ce - x).sum()
            assert np.abs(G[ok] - x).sum(axis=1).min() >= l1 - 2e-2


class TestMcer:
    def test_zero_delta_equals_mce(self, blobs_task):
        cfg = GeneratorConfig(delta=0.0)
        for i, x in blobs_negatives(blobs_task, 3):
            a = generate("mcer", blobs_task, x, cfg, index=i)
            b = generate("mce", blobs_task, x, cfg, index=i)
            assert np.array_equal(a.ce, b.ce) and a.diagnostics["rungs"] == 1

    def test_l1_certificate(self, l1_task):
        r = generate("mcer", l1_task, ORIGIN, GeneratorConfig(delta=0.1))
        assert r.diagnostics["robust"]
        assert 0.9 * r.ce.sum() - 1.1 > 0

    def test_ladder_exhausted(self, net_a_task):
        # every feasible rung fails certification at this delta
        r = generate("mcer", net_a_task, ORIGIN, GeneratorConfig(delta=0.4))
        assert r.found and not r.diagnostics["robust"]
        assert r.diagnostics["kappa"] == 0.32


class TestRnce:
    def test_zero_delta_equals_nnce(self, blobs_task):
        cfg = GeneratorConfig(delta=0.0)
        for i, x in blobs_negatives(blobs_task):
            assert np.array_equal(generate("rnce", blobs_task, x, cfg).ce,
                                  generate("kdtree-nnce", blobs_task, x, cfg).ce)

    def test_certified(self, blobs_task):
        cfg = GeneratorConfig(delta=0.05)
        for i, x in blobs_negatives(blobs_task):
            r = generate("rnce", blobs_task, x, cfg)
            assert eval_delta_robustness(blobs_task, r.ce, 0.05).certified

    def test_huge_delta(self, blobs_task):
        _, x = blobs_task.negative_instances()[0]
        assert not generate("rnce", blobs_task, x, GeneratorConfig(delta=100.0)).found


class TestStce:
    def test_deep_candidate(self, blobs_task):
        c = np.full(2, 3.0)
        assert forward_logit(blobs_task.model, c) > 0
        noise = 0.1 * np.random.default_rng(0).standard_normal((500, 2))
        assert stability(blobs_task.model, c, noise) > 0.9

    def test_boundary_candidate(self):
        noise = 0.1 * np.random.default_rng(0).standard_normal((500, 2))
        s = stability(make_l1(), np.array([0.5, 0.5]), noise)
        assert 0.4 < s < 0.5

    def test_single_sample(self):
        assert stability(make_l1(), np.array([1.0, 1.0]), np.zeros((1, 2))) == pytest.approx(1 / (1 + np.exp(-1)))

    def test_fallback(self, l1_task):
        r = generate("stce", l1_task, ORIGIN)
        assert r.found and not r.diagnostics["robust"] and r.diagnostics["stability"] < 0.9


class TestProplace:
    def test_single_anchor(self, l1_task):
        r = generate("proplace", l1_task, ORIGIN, GeneratorConfig(delta=0.1))
        assert r.ce.tolist() == [1, 1]

    def test_certified_and_close(self, blobs_task):
        cfg = GeneratorConfig(delta=0.05)
        for i, x in blobs_negatives(blobs_task):
            r = generate("proplace", blobs_task, x, cfg, index=i)
            assert eval_delta_robustness(blobs_task, r.ce, 0.05).certified
            anchor = generate("rnce", blobs_task, x, cfg, index=i).ce
            if not r.diagnostics["bisected"]:
                assert np.abs(r.ce - x).sum() <= np.abs(anchor - x).sum() + 1e-9


class TestRoar:
    def test_exact_surrogate(self, l1_task):
        r = generate("roar", l1_task, ORIGIN, GeneratorConfig(roar_delta=0.0))
        assert r.valid and r.l2_distance <= 0.9

    def test_worst_case(self, l1_task):
        r = generate("roar", l1_task, ORIGIN, GeneratorConfig(roar_delta=0.1))
        c = r.ce
        assert (c >= 0).all() and 0.9 * c.sum() - 1.1 >= 0
        assert interval_logit(ParamBall(make_l1(), 0.1), c)[0] >= -1e-12

    def test_budget(self, l1_task):
        r = generate("roar", l1_task, ORIGIN, GeneratorConfig(roar_max_steps=2))
        assert not r.found and r.diagnostics["reason"] == "step budget exhausted"
