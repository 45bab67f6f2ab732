"""Evaluation protocols: paired rollouts, baselines, and comparison studies.

All comparisons pair event randomness: every policy in a study sees the same
environment seeds, and the annual rain draw consumes exactly one uniform per
step regardless of actions, so two policies on the same seed face the same
weather path. Policy-internal randomness is seeded separately per episode.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bayesopt import BoConfig, PlanSpace, bo_optimize
from .climate import RcpScenario
from .env import EnvConfig, FloodAdaptEnv, episode_return
from .errors import ValidationError
from .policy import argmax_actions, forward, normalized_adjacency
from .ppo import PpoConfig, train
from .worldio import World


# -- policies -------------------------------------------------------------------


class NoActionPolicy:
    """Never deploys anything; the no-cost reference line."""

    name = "no-action"

    def reset_episode(self, seed: int) -> None:
        pass

    def act(self, state, masks) -> np.ndarray:
        return np.zeros(masks.shape[0], dtype=np.int64)


class RandomPolicy:
    """Uniform over each zone's currently allowed actions."""

    name = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def reset_episode(self, seed: int) -> None:
        self._rng = np.random.default_rng((self.seed, seed))

    def act(self, state, masks) -> np.ndarray:
        out = np.zeros(masks.shape[0], dtype=np.int64)
        for z in range(masks.shape[0]):
            allowed = np.flatnonzero(masks[z])
            out[z] = int(self._rng.choice(allowed))
        return out


class TrainedPolicy:
    """Greedy decoding of a trained graph policy network."""

    def __init__(self, params: dict, graph, name: str = "rl"):
        self.name = name
        self.params = params
        self.adj = normalized_adjacency(graph)

    def reset_episode(self, seed: int) -> None:
        pass

    def act(self, state, masks) -> np.ndarray:
        dist, _ = forward(self.params, self.adj, state, masks)
        return argmax_actions(dist)


class PlanPolicy:
    """Replays a fixed zone-by-year action matrix."""

    def __init__(self, plan: np.ndarray, name: str = "plan"):
        self.name = name
        self.plan = np.asarray(plan, dtype=np.int64)
        self._t = 0

    def reset_episode(self, seed: int) -> None:
        self._t = 0

    def act(self, state, masks) -> np.ndarray:
        if self._t >= self.plan.shape[1]:
            return np.zeros(self.plan.shape[0], dtype=np.int64)
        col = self.plan[:, self._t].copy()
        self._t += 1
        # a feasible plan never hits a mask, but guard against drift anyway
        for z in range(col.shape[0]):
            if not masks[z, col[z]]:
                col[z] = 0
        return col


# -- rollouts ---------------------------------------------------------------------


@dataclass(frozen=True)
class EpisodeRecord:
    """One evaluated episode under one event seed."""

    seed: int
    discounted_return: float
    total_cost_dkk: float
    totals: dict


def rollout(env: FloodAdaptEnv, policy) -> EpisodeRecord:
    state, masks = env.reset()
    policy.reset_episode(env.config.seed)
    rewards = []
    cost = 0.0
    sums: dict[str, float] = {}
    while not env.done:
        res = env.step(policy.act(state, masks))
        state, masks = res.state, res.masks
        rewards.append(res.reward)
        cost -= res.reward_dkk
        for key, val in res.info.totals.items():
            sums[key] = sums.get(key, 0.0) + val
    return EpisodeRecord(
        seed=env.config.seed,
        discounted_return=episode_return(rewards, env.gamma),
        total_cost_dkk=cost,
        totals=sums,
    )


@dataclass(frozen=True)
class EvalReport:
    """Paired evaluation of one policy over a set of event seeds."""

    policy: str
    scenario: str
    episodes: tuple[EpisodeRecord, ...]

    @property
    def returns(self) -> np.ndarray:
        return np.array([e.discounted_return for e in self.episodes])

    @property
    def mean_return(self) -> float:
        return float(self.returns.mean())

    @property
    def sd_return(self) -> float:
        r = self.returns
        return float(r.std(ddof=1)) if len(r) > 1 else 0.0

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "scenario": self.scenario,
            "meanReturn": self.mean_return,
            "sdReturn": self.sd_return,
            "returns": [float(r) for r in self.returns],
            "meanCost_dkk": float(np.mean([e.total_cost_dkk for e in self.episodes])),
            "componentMeans_dkk": {
                k: float(np.mean([e.totals[k] for e in self.episodes]))
                for k in (self.episodes[0].totals if self.episodes else {})
            },
        }


def evaluate_policy(world: World, config: EnvConfig, policy,
                    seeds) -> EvalReport:
    episodes = []
    for seed in seeds:
        env = FloodAdaptEnv(world, replace(config, seed=int(seed)))
        episodes.append(rollout(env, policy))
    return EvalReport(policy=policy.name, scenario=config.scenario.name,
                      episodes=tuple(episodes))


def paired_wins(a: EvalReport, b: EvalReport) -> int:
    """Seeds on which policy a strictly beats policy b."""
    if len(a.episodes) != len(b.episodes):
        raise ValidationError("paired reports need the same number of episodes")
    for ea, eb in zip(a.episodes, b.episodes):
        if ea.seed != eb.seed:
            raise ValidationError("paired reports must share event seeds")
    return int(np.sum(a.returns > b.returns))


# -- study 1: adaptive policy against the baselines --------------------------------


@dataclass(frozen=True)
class ShowdownReport:
    """Trained policy versus the no-action and random baselines."""

    scenario: str
    reports: dict
    train_steps: int

    def wins(self, policy: str, over: str) -> int:
        return paired_wins(self.reports[policy], self.reports[over])

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "trainSteps": self.train_steps,
            "reports": {k: v.to_dict() for k, v in self.reports.items()},
            "wins": {
                "rlOverNoAction": self.wins("rl", "no-action"),
                "rlOverRandom": self.wins("rl", "random"),
            },
        }


def policy_showdown(world: World, config: EnvConfig, eval_seeds,
                    ppo_config: PpoConfig, out_dir: str | None = None,
                    initial_params: dict | None = None) -> ShowdownReport:
    """Train a policy, then evaluate it and both baselines on paired seeds."""
    result = train(world, config, ppo_config, out_dir=out_dir,
                   initial_params=initial_params)
    probe = FloodAdaptEnv(world, config)
    policies = [
        NoActionPolicy(),
        RandomPolicy(seed=config.seed),
        TrainedPolicy(result.params, probe.graph),
    ]
    reports = {p.name: evaluate_policy(world, config, p, eval_seeds)
               for p in policies}
    return ShowdownReport(scenario=config.scenario.name, reports=reports,
                          train_steps=result.total_steps)


# -- study 2: belief checkpoints under realized scenarios ---------------------------


@dataclass(frozen=True)
class BeliefMatrixReport:
    """Mean return of each belief checkpoint under each realized scenario."""

    beliefs: tuple[RcpScenario, ...]
    realized: tuple[RcpScenario, ...]
    mean: np.ndarray  # (beliefs, realized)
    sd: np.ndarray

    def to_dict(self) -> dict:
        return {
            "beliefs": [b.name for b in self.beliefs],
            "realized": [r.name for r in self.realized],
            "meanReturn": [[float(v) for v in row] for row in self.mean],
            "sdReturn": [[float(v) for v in row] for row in self.sd],
        }

    def severity_monotone(self) -> bool:
        """Per belief row, returns must not improve as severity worsens,
        allowing ties within one paired-difference standard deviation."""
        for i in range(self.mean.shape[0]):
            for j in range(self.mean.shape[1] - 1):
                slack = max(self.sd[i, j], self.sd[i, j + 1])
                if self.mean[i, j + 1] > self.mean[i, j] + slack:
                    return False
        return True


def train_belief_checkpoints(world: World, config: EnvConfig,
                             ppo_config: PpoConfig,
                             beliefs=tuple(RcpScenario)) -> dict:
    """One trained parameter set per assumed scenario."""
    out = {}
    for belief in beliefs:
        cfg = replace(config, scenario=belief)
        out[belief] = train(world, cfg, ppo_config).params
    return out


def belief_matrix(world: World, config: EnvConfig, checkpoints: dict,
                  seeds, realized=tuple(RcpScenario)) -> BeliefMatrixReport:
    """Cross-evaluate belief checkpoints on paired seeds per realized column."""
    beliefs = tuple(checkpoints)
    probe = FloodAdaptEnv(world, config)
    mean = np.zeros((len(beliefs), len(realized)))
    sd = np.zeros_like(mean)
    for i, belief in enumerate(beliefs):
        policy = TrainedPolicy(checkpoints[belief], probe.graph,
                               name=f"rl-{belief.name.lower()}")
        for j, real in enumerate(realized):
            rep = evaluate_policy(world, replace(config, scenario=real),
                                  policy, seeds)
            mean[i, j] = rep.mean_return
            sd[i, j] = rep.sd_return
    return BeliefMatrixReport(beliefs=beliefs, realized=tuple(realized),
                              mean=mean, sd=sd)


# -- study 3: adaptive policy against optimized static plans ------------------------


@dataclass(frozen=True)
class PlanStudyCell:
    scenario: str
    rl_returns: tuple[float, ...]
    bo_returns: tuple[float, ...]

    @property
    def rl_mean(self) -> float:
        return float(np.mean(self.rl_returns))

    @property
    def bo_mean(self) -> float:
        return float(np.mean(self.bo_returns))


@dataclass(frozen=True)
class PlanStudyReport:
    cells: tuple[PlanStudyCell, ...]

    def to_dict(self) -> dict:
        return {
            "cells": [{
                "scenario": c.scenario,
                "rlMean": c.rl_mean,
                "boMean": c.bo_mean,
                "rlReturns": list(c.rl_returns),
                "boReturns": list(c.bo_returns),
            } for c in self.cells],
        }


def reduced_instance(zones: int = 4, years: int = 5, seed: int = 20,
                     **synth_kwargs) -> tuple[World, EnvConfig]:
    """Small world and horizon where exhaustive-scale plan search is viable.

    The one-hot plan encoding has zones x years x 8 dimensions; the defaults
    give 160.
    """
    from .synth import synth_world

    world = synth_world(zones=zones, seed=seed, **synth_kwargs)
    config = EnvConfig(scenario=RcpScenario.RCP45, seed=0, gamma=1.0,
                       start_year=world.start_year,
                       end_year=world.start_year + years - 1)
    return world, config


def plan_study(world: World, config: EnvConfig, scenarios, runs: int,
               ppo_config: PpoConfig, bo_config: BoConfig,
               eval_seeds) -> PlanStudyReport:
    """Per scenario: trained policies and optimized plans, both evaluated on
    the same fresh event seeds that neither optimizer saw."""
    cells = []
    for scenario in scenarios:
        cfg = replace(config, scenario=scenario)
        probe = FloodAdaptEnv(world, cfg)
        rl_returns = []
        bo_returns = []
        for run in range(runs):
            run_cfg = replace(cfg, seed=cfg.seed + 1000 * (run + 1))
            trained = train(world, run_cfg, ppo_config)
            rl_rep = evaluate_policy(
                world, cfg, TrainedPolicy(trained.params, probe.graph),
                eval_seeds)
            rl_returns.append(rl_rep.mean_return)

            bo_run = replace(bo_config, seed=bo_config.seed + run)
            envs = [FloodAdaptEnv(world, replace(run_cfg, seed=run_cfg.seed + k))
                    for k in range(bo_run.eval_seeds)]
            space = PlanSpace.from_env(envs[0])
            best = bo_optimize(envs, space, bo_run)
            bo_rep = evaluate_policy(
                world, cfg, PlanPolicy(best.best_plan, name="bo-plan"),
                eval_seeds)
            bo_returns.append(bo_rep.mean_return)
        cells.append(PlanStudyCell(scenario=scenario.name,
                                   rl_returns=tuple(rl_returns),
                                   bo_returns=tuple(bo_returns)))
    return PlanStudyReport(cells=tuple(cells))
