import math
from dataclasses import replace

import numpy as np
import pytest

from aspire.apft import (APFTPlanner, ObservationNode, PlannerParams, iter_action_nodes, plan,
                         sample_new_observation, tree_depth, tree_to_dict, ucb_select)
from aspire.baselines import fixed_rollout_plan, rollout_params
from aspire.belief import ParticleBelief
from aspire.dynamics import ControlInput, RobotModel
from aspire.errors import PlanningInfeasibleError
from aspire.info import MIParams
from aspire.sensing import Detection, MeasurementNoise, h
from aspire.world import ObstacleMap, Pose2D, box

FAST = PlannerParams(iterations=60, horizon=8)


class Node:
    def __init__(self, Q, W):
        self.Q, self.W = Q, W


def near_belief(rng, n=300, robot=Pose2D(20, 20, 0), centre=(26, 22)):
    pts = np.c_[rng.normal(centre[0], 1.5, n), rng.normal(centre[1], 1.5, n), np.zeros(n)]
    return ParticleBelief.create(robot, pts)


class TestUCB:
    def test_unvisited_first(self):
        kids = [Node(5.0, 3), Node(0.0, 0), Node(1.0, 2)]
        assert ucb_select(5, kids, 1.0) is kids[1]

    def test_tie_lowest_index(self):
        kids = [Node(0.5, 4), Node(0.5, 4)]
        assert ucb_select(8, kids, 1.0) is kids[0]

    def test_pure_exploitation(self):
        kids = [Node(1.0, 10), Node(0.0, 10)]
        assert ucb_select(20, kids, 0.0) is kids[0]

    def test_bonus(self):
        kids = [Node(1.0, 50), Node(0.9, 2)]
        assert ucb_select(52, kids, 1.0) is kids[1]


class TestParams:
    @pytest.mark.parametrize("kw", [dict(iterations=0), dict(discount=0.0), dict(k_o=0.0),
                                    dict(alpha_o=1.0), dict(ucb_c=-1.0), dict(final_selection="x"),
                                    dict(backend="cuda")])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            PlannerParams(**kw)

    def test_defaults_from_h0(self, task):
        p = PlannerParams().resolved(task.noise)
        assert p.ucb_c == pytest.approx(2 * 0.993437, abs=1e-5)
        assert p.delta_r == pytest.approx(0.6 * 0.993437, abs=1e-5)


class TestPlan:
    def test_single_feasible_action(self, task, rng):
        robot = RobotModel(v_levels=(0.5,), w_levels=(0.0,))
        t = replace(task, robot=robot)
        b = near_belief(rng)
        assert plan(b, FAST, t, rng) == ControlInput(1.0, 0.0)

    def test_informative_arm(self, task, rng):
        t = replace(task, robot=RobotModel(v_levels=(0.0,), w_levels=(-1.0, 1.0)))
        # a spread-out cloud to the left comes into view after a left turn;
        # a lone particle would not do, its MI is exactly zero
        pts = np.c_[rng.uniform(21, 23.5, 60), rng.uniform(21.5, 24.5, 60), np.zeros(60)]
        b = ParticleBelief.create(Pose2D(20, 20, 0), pts)
        params = PlannerParams(iterations=50, horizon=1, final_selection="ucb")
        assert plan(b, params, t, rng).w > 0

    def test_infeasible(self, task, rng):
        omap = ObstacleMap((0, 0, 50, 50), [box(20, 20, 0.2, 0.2)])
        b = ParticleBelief.create(Pose2D(20, 20, 0), np.zeros((1, 3)))
        with pytest.raises(PlanningInfeasibleError):
            plan(b, FAST, replace(task, omap=omap), rng)

    @pytest.mark.parametrize("backend", ["numba", "numpy"])
    def test_seeded_determinism(self, task, backend):
        b = near_belief(np.random.default_rng(3))
        p = replace(FAST, backend=backend)
        a1 = plan(b, p, task, np.random.default_rng(9))
        a2 = plan(b, p, task, np.random.default_rng(9))
        assert a1 == a2

    def test_max_q_selection(self, task, rng):
        res = APFTPlanner(task, replace(FAST, final_selection="max_q")).search(near_belief(rng), rng)
        best = max(res.root.children, key=lambda n: n.Q)
        assert res.control == best.control


class TestTreeAudits:
    @staticmethod
    @pytest.fixture(scope="class")
    def result(task):
        r = np.random.default_rng(11)
        params = PlannerParams(iterations=300, horizon=10, record_returns=True)
        return APFTPlanner(task, params).search(near_belief(r), r)

    def test_widening_bound(self, result, task):
        p = PlannerParams().resolved(task.noise)
        for a in iter_action_nodes(result.root):
            assert len(a.children) <= p.k_o * a.W ** p.alpha_o + 1

    def test_q_is_mean_of_returns(self, result):
        n = 0
        for a in iter_action_nodes(result.root):
            if a.W:
                assert len(a.returns) == a.W
                assert abs(a.Q - float(np.mean(a.returns))) < 1e-9
                n += 1
        assert n > 10

    def test_visit_counts(self, result):
        root = result.root
        assert root.W == 300 == sum(a.W for a in root.children)
        for a in iter_action_nodes(root):
            assert a.W == sum(c.W for c in a.children)

    def test_depth_bound(self, result):
        assert 1 <= tree_depth(result.root) <= 10
        assert result.stats.max_depth <= 10

    def test_dump_is_json(self, result):
        import json
        json.dumps(tree_to_dict(result.root, max_depth=2))


class TestSimulateAndRollout:
    def test_simulate_zero_depth(self, task, rng):
        pl = APFTPlanner(task, FAST)
        root = ObservationNode()
        assert pl.simulate(near_belief(rng), root, 0, rng) == 0
        assert root.children is None and root.W == 0

    def test_first_visit_samples_observation(self, task, rng):
        pl = APFTPlanner(task, FAST)
        root = ObservationNode()
        pl.simulate(near_belief(rng), root, 3, rng)
        visited = [a for a in root.children if a.W]
        assert len(visited) == 1 and len(visited[0].children) == 1

    def test_rollout_zero_depth(self, task, rng):
        assert APFTPlanner(task, FAST).rollout(near_belief(rng), 0, rng) == 0

    @pytest.mark.parametrize("backend", ["numba", "numpy"])
    def test_rollout_early_stop(self, task, backend):
        # a robot facing a tight, in-range cluster gets a large first-step reward
        rng = np.random.default_rng(0)
        b = ParticleBelief.create(Pose2D(20, 20, 0), np.array([[24, 21.5, 0], [24, 18.5, 0.0]]))
        pl = APFTPlanner(task, replace(FAST, delta_r=0.1, backend=backend))
        from aspire.apft import SearchStats
        st = SearchStats()
        r = pl.rollout(b, 10, rng, st)
        assert st.rollout_steps == 1 and st.early_stops == 1 and r > 0.1

    @pytest.mark.parametrize("backend", ["numba", "numpy"])
    def test_rollout_zero_reward_runs_full_depth(self, task, backend, rng):
        from aspire.apft import SearchStats
        b = ParticleBelief.create(Pose2D(5, 5, 0), np.array([[45.0, 45.0, 0.0]]))
        pl = APFTPlanner(task, replace(FAST, delta_r=math.inf, discount=1.0, backend=backend))
        st = SearchStats()
        assert pl.rollout(b, 7, rng, st) == 0
        assert st.rollout_steps == 7 and st.early_stops == 0


class TestEquivalences:
    def test_infinite_threshold_is_fixed_rollout(self, task):
        base = PlannerParams(iterations=40)
        for seed in range(20):
            b = near_belief(np.random.default_rng(seed), n=200)
            a1 = fixed_rollout_plan(b, base, task, np.random.default_rng(seed), depth=10)
            a2 = plan(b, replace(base, horizon=10, delta_r=math.inf), task, np.random.default_rng(seed))
            assert a1 == a2
        assert rollout_params(base, 30).horizon == 30

    def test_reward_scale_invariance(self, task):
        base = PlannerParams(iterations=80, horizon=6).resolved(task.noise)
        for seed in range(5):
            b = near_belief(np.random.default_rng(seed), n=200)
            a1 = plan(b, base, task, np.random.default_rng(seed))
            scaled = replace(base, reward_scale=7.0, ucb_c=7.0 * base.ucb_c, delta_r=7.0 * base.delta_r)
            assert plan(b, scaled, task, np.random.default_rng(seed)) == a1

    def test_reward_deterministic(self, task, rng):
        pl = APFTPlanner(task, FAST)
        b = near_belief(rng)
        from aspire.apft import SearchStats
        st = SearchStats()
        pose = Pose2D(21, 20, 0)
        r1, _ = pl._step(b, pose, np.random.default_rng(1), st)
        r2, _ = pl._step(b, pose, np.random.default_rng(2), st)
        assert r1 == r2

    def test_compiled_reward_matches_numpy(self, task):
        fast = APFTPlanner(task, FAST)
        ref = APFTPlanner(task, replace(FAST, backend="numpy"))
        assert fast._fast is not None and ref._fast is None
        from aspire.apft import SearchStats
        for seed in range(10):
            r = np.random.default_rng(seed)
            b = near_belief(r, centre=(r.uniform(21, 28), r.uniform(16, 24)))
            pose = Pose2D(20 + r.uniform(0, 1), 20, r.uniform(-0.5, 0.5))
            r1, _ = fast._step(b, pose, r, SearchStats())
            r2, _ = ref._step(b, pose, r, SearchStats())
            assert r1 == pytest.approx(r2, abs=1e-12)


class TestSampleObservation:
    def test_all_out_of_view(self, task, rng):
        b = ParticleBelief.create(Pose2D(5, 5, 0), np.array([[45.0, 45.0, 0.0], [5, 45, 0]]))
        assert all(sample_new_observation(b, task.footprint, task.omap, task.noise, rng) is None
                   for _ in range(50))

    def test_tiny_noise_is_exact(self, task, rng):
        noise = MeasurementNoise(np.diag([1e-20, 1e-20]))
        b = ParticleBelief.create(Pose2D(20, 20, 0), np.array([[24.0, 21.0, 0.0]]))
        z = sample_new_observation(b, task.footprint, task.omap, noise, rng)
        assert [z.range, z.bearing] == pytest.approx(h(Pose2D(20, 20, 0), Pose2D(24, 21)), abs=1e-8)

    def test_distribution_mean(self, task, rng):
        robot = Pose2D(20, 20, 0)
        b = ParticleBelief.create(robot, np.array([[24.0, 21.0, 0.0], [5, 45, 0]]), [1.0, 0.0])
        zs = np.array([[z.range, z.bearing] for z in
                       (sample_new_observation(b, task.footprint, task.omap, task.noise, rng)
                        for _ in range(10_000))])
        se = zs.std(axis=0, ddof=1) / 100
        assert np.all(np.abs(zs.mean(axis=0) - h(robot, Pose2D(24, 21))) < 3 * se)

    def test_compiled_sampler_matches(self, task):
        b = near_belief(np.random.default_rng(0))
        fast = APFTPlanner(task, FAST)
        ref = APFTPlanner(task, replace(FAST, backend="numpy"))
        for seed in range(20):
            z1 = fast._sample_observation(b, np.random.default_rng(seed))
            z2 = ref._sample_observation(b, np.random.default_rng(seed))
            if z1 is None:
                assert z2 is None
            else:
                assert isinstance(z2, Detection)
                assert (z1.range, z1.bearing) == pytest.approx((z2.range, z2.bearing), abs=1e-12)
