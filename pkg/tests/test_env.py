"""Decision environment: reward identity, masking, determinism, protocol."""
import numpy as np
import pytest

from floodadapt.adaptation import Measure
from floodadapt.climate import (
    RainQuantileTable,
    RcpScenario,
    synth_scenario_model,
)
from floodadapt.env import (
    EnvConfig,
    FloodAdaptEnv,
    ZoneGraph,
    build_zone_graph,
    do_nothing_actions,
    episode_return,
)
from floodadapt.errors import FeasibilityError, ProtocolError, ValidationError
from floodadapt.floodsim import TerrainGrid
from floodadapt.synth import synth_world


@pytest.fixture(scope="module")
def world():
    return synth_world(5, seed=11, n_trips=60, grid_shape=(20, 20))


@pytest.fixture()
def env(world):
    return FloodAdaptEnv(world, EnvConfig(scenario=RcpScenario.RCP45, seed=7))


def legal_random_actions(masks, rng):
    acts = np.zeros(masks.shape[0], dtype=np.int64)
    for z in range(masks.shape[0]):
        allowed = np.flatnonzero(masks[z])
        acts[z] = int(rng.choice(allowed))
    return acts


class TestRewardIdentity:
    def test_reward_equals_negative_cost_sum_exactly(self, env):
        _, masks = env.reset()
        rng = np.random.default_rng(0)
        for _ in range(25):
            res = env.step(legal_random_actions(masks, rng))
            t = res.info.totals
            assert res.reward_dkk == -(t["I"] + t["D"] + t["C"] + t["A"] + t["M"])
            assert res.reward == res.reward_dkk * env.reward_scale
            masks = res.masks
            if res.done:
                break

    def test_do_nothing_never_pays_action_or_maintenance(self, env):
        env.reset()
        for _ in range(20):
            res = env.step(do_nothing_actions(env.n_zones))
            assert res.info.totals["A"] == 0.0
            assert res.info.totals["M"] == 0.0
            assert res.reward_dkk == -(res.info.totals["I"] + res.info.totals["D"]
                                       + res.info.totals["C"])

    def test_state_mirrors_info(self, env):
        env.reset()
        res = env.step(do_nothing_actions(env.n_zones))
        assert np.array_equal(res.state[:, 0], res.info.I_dkk)
        assert np.array_equal(res.state[:, 1], res.info.D_dkk)
        assert np.array_equal(res.state[:, 2], res.info.C_dkk)
        assert np.array_equal(res.state[:, 3:], res.info.z)


class TestDeterminism:
    def test_same_seed_same_trajectory(self, world):
        def run(seed):
            e = FloodAdaptEnv(world, EnvConfig(scenario=RcpScenario.RCP45, seed=seed))
            _, masks = e.reset()
            rng = np.random.default_rng(3)
            rews, rains = [], []
            for _ in range(15):
                res = e.step(legal_random_actions(masks, rng))
                rews.append(res.reward_dkk)
                rains.append(res.info.rain_mm)
                masks = res.masks
            return rews, rains

        assert run(42) == run(42)

    def test_different_seeds_draw_different_rain(self, world):
        def rains(seed):
            e = FloodAdaptEnv(world, EnvConfig(scenario=RcpScenario.RCP45, seed=seed))
            e.reset()
            return [e.step(do_nothing_actions(e.n_zones)).info.rain_mm
                    for _ in range(10)]

        assert rains(1) != rains(2)

    def test_snapshot_restore_replays_identically(self, env):
        env.reset()
        env.step(do_nothing_actions(env.n_zones))
        snap = env.get_state()
        a = env.step(do_nothing_actions(env.n_zones))
        b = env.step(do_nothing_actions(env.n_zones))
        env.set_state(snap)
        a2 = env.step(do_nothing_actions(env.n_zones))
        b2 = env.step(do_nothing_actions(env.n_zones))
        assert (a.reward_dkk, a.info.rain_mm) == (a2.reward_dkk, a2.info.rain_mm)
        assert (b.reward_dkk, b.info.rain_mm) == (b2.reward_dkk, b2.info.rain_mm)

    def test_branching_does_not_disturb_the_main_line(self, env):
        env.reset()
        snap = env.get_state()
        baseline = [env.step(do_nothing_actions(env.n_zones)).reward_dkk
                    for _ in range(3)]
        env.set_state(snap)
        acts = do_nothing_actions(env.n_zones)
        acts[0] = int(Measure.SOAKAWAY)
        env.step(acts)  # a what-if branch
        env.set_state(snap)
        replay = [env.step(do_nothing_actions(env.n_zones)).reward_dkk
                  for _ in range(3)]
        assert baseline == replay


class TestProtocol:
    def test_step_before_reset_raises(self, world):
        e = FloodAdaptEnv(world, EnvConfig(scenario=RcpScenario.RCP45))
        with pytest.raises(ProtocolError):
            e.step(do_nothing_actions(e.n_zones))

    def test_step_after_done_raises(self, world):
        cfg = EnvConfig(scenario=RcpScenario.RCP45, seed=1,
                        start_year=2024, end_year=2024)
        e = FloodAdaptEnv(world, cfg)
        e.reset()
        res = e.step(do_nothing_actions(e.n_zones))
        assert res.done
        with pytest.raises(ProtocolError):
            e.step(do_nothing_actions(e.n_zones))

    def test_horizon_default_is_77_years(self, env):
        assert env.horizon == 77
        env.reset()
        steps = 0
        while True:
            res = env.step(do_nothing_actions(env.n_zones))
            steps += 1
            if res.done:
                break
        assert steps == 77

    def test_masked_action_raises_and_leaves_state_intact(self, env):
        _, masks = env.reset()
        acts = do_nothing_actions(env.n_zones)
        acts[1] = int(Measure.STORAGE_TANK)
        env.step(acts)
        snap = env.get_state()
        with pytest.raises(FeasibilityError) as exc:
            env.step(acts)  # zone 1 already has a tank
        assert exc.value.zones == [1]
        replay = env.get_state()
        assert replay["year"] == snap["year"]
        assert replay["rng"] == snap["rng"]
        assert replay["ledger"] == snap["ledger"]

    def test_action_validation(self, env):
        env.reset()
        with pytest.raises(ValidationError):
            env.step(np.zeros(env.n_zones + 1, dtype=np.int64))
        with pytest.raises(ValidationError):
            env.step(np.zeros(env.n_zones))  # float dtype
        with pytest.raises(ValidationError):
            env.step(np.full(env.n_zones, 9, dtype=np.int64))

    def test_config_validation(self, world):
        with pytest.raises(ValidationError):
            EnvConfig(scenario=RcpScenario.RCP45, gamma=0.0)
        with pytest.raises(ValidationError):
            EnvConfig(scenario=RcpScenario.RCP45, reward_scale=-1.0)
        with pytest.raises(ValidationError):
            FloodAdaptEnv(world, EnvConfig(scenario=RcpScenario.RCP45,
                                           start_year=2050, end_year=2040))


class TestMaskLifecycle:
    def test_deployment_blocks_until_expiry(self, world):
        e = FloodAdaptEnv(world, EnvConfig(scenario=RcpScenario.RCP45, seed=5))
        _, masks = e.reset()
        assert masks[2, Measure.SOAKAWAY]
        acts = do_nothing_actions(e.n_zones)
        acts[2] = int(Measure.SOAKAWAY)
        res = e.step(acts)
        lifetime = world.catalog[Measure.SOAKAWAY].lifetime_years
        for _ in range(lifetime - 1):
            assert not res.masks[2, Measure.SOAKAWAY]
            res = e.step(do_nothing_actions(e.n_zones))
        assert not res.masks[2, Measure.SOAKAWAY]  # final installed year
        res = e.step(do_nothing_actions(e.n_zones))
        # the expiry year bills maintenance once more, then frees the slot
        assert res.masks[2, Measure.SOAKAWAY]
        assert res.info.totals["M"] > 0.0
        res = e.step(do_nothing_actions(e.n_zones))
        assert res.info.totals["M"] == 0.0

    def test_do_nothing_always_allowed(self, env):
        _, masks = env.reset()
        rng = np.random.default_rng(8)
        for _ in range(10):
            assert masks[:, Measure.DO_NOTHING].all()
            masks = env.step(legal_random_actions(masks, rng)).masks


class TestZeroRainBaseline:
    def test_no_rain_no_cost_under_inaction(self):
        base = RainQuantileTable((0.0, 1.0), (0.0, 0.0))
        w = synth_world(4, seed=2, n_trips=40, grid_shape=(16, 16))
        dry = synth_scenario_model((1.0, 1.0, 1.0), base)
        w.scenario_model = dry
        e = FloodAdaptEnv(w, EnvConfig(scenario=RcpScenario.RCP85, seed=3))
        e.reset()
        for _ in range(5):
            res = e.step(do_nothing_actions(e.n_zones))
            assert res.reward_dkk == 0.0

    def test_spending_without_rain_is_strictly_worse(self):
        base = RainQuantileTable((0.0, 1.0), (0.0, 0.0))
        w = synth_world(4, seed=2, n_trips=40, grid_shape=(16, 16))
        w.scenario_model = synth_scenario_model((1.0, 1.0, 1.0), base)
        e = FloodAdaptEnv(w, EnvConfig(scenario=RcpScenario.RCP85, seed=3))
        _, masks = e.reset()
        acts = do_nothing_actions(e.n_zones)
        acts[0] = int(np.flatnonzero(masks[0, 1:])[0] + 1)
        res = e.step(acts)
        assert res.reward_dkk < 0.0


class TestEpisodeReturn:
    def test_undiscounted_sum(self):
        assert episode_return([-1.0, -1.0], 1.0) == -2.0

    def test_discounted_sum(self):
        assert episode_return([-1.0, -1.0], 0.5) == -1.5

    def test_first_reward_undiscounted(self):
        assert episode_return([3.0], 0.25) == 3.0

    def test_empty_is_zero(self):
        assert episode_return([], 0.9) == 0.0


class TestZoneGraph:
    def test_edges_are_sorted_undirected_pairs(self, env):
        g = env.graph
        assert g.n_zones == env.n_zones
        for a, b in g.edges:
            assert 0 <= a < b < g.n_zones

    def test_adjacency_matrix_symmetric_no_self_loops(self, env):
        adj = env.graph.adjacency_matrix()
        assert np.array_equal(adj, adj.T)
        assert np.trace(adj) == 0.0
        assert adj.sum() == 2 * len(env.graph.edges)

    def test_connected_on_synthetic_worlds(self):
        from scipy.sparse.csgraph import connected_components

        for seed in (0, 1, 2):
            w = synth_world(7, seed=seed, n_trips=0, grid_shape=(18, 18))
            g = build_zone_graph(w.grid)
            n, _ = connected_components(g.adjacency_matrix(), directed=False)
            assert n == 1

    def test_disconnected_zones_get_bridged(self):
        # two zones separated by permanent outlet cells share no border
        zones = np.array([[0, -1, 1], [0, -1, 1]])
        grid = TerrainGrid(np.ones((2, 3)), zones, cell_area_m2=1.0)
        g = build_zone_graph(grid)
        assert g.edges == ((0, 1),)

    def test_neighbors(self):
        g = ZoneGraph(3, ((0, 1), (1, 2)))
        assert g.neighbors(1) == [0, 2]
        assert g.neighbors(0) == [1]
