"""Command-line front end: world generation, training, evaluation suites,
and the session server.

Every command that writes files also persists a run manifest (``run.json``)
next to its outputs.  The manifest records the resolved configuration, a
hash of it, the seeds in play, and the artifact paths, so any run can be
reproduced from the manifest alone.  The hash is computed over canonical
JSON (sorted keys, no whitespace) and is therefore stable under field
reordering.  If a command fails partway, the manifest is still written
with ``status: failed`` and the error message.

Exit codes follow one convention across commands:

* 0  success
* 1  usage errors (bad flags, unknown scenario ids)
* 2  configuration or data problems (unreadable files, invalid values,
     missing checkpoints)
* 3  runtime failures (infeasible actions, numerical breakdown)

Configuration files are JSON with one section per command.  Keys mirror
the long option names; hyphens and underscores are interchangeable::

    {
      "train": {"max-steps": 200000, "envs": 8},
      "eval":  {"seeds": 10}
    }

Explicit command-line flags override file values, which override the
built-in defaults shown in ``--help``.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time
import uuid
from dataclasses import dataclass, field, replace

import click
from click.core import ParameterSource

from .bayesopt import BoConfig
from .climate import RcpScenario
from .env import EnvConfig, FloodAdaptEnv
from .errors import (ConfigError, DomainError, FloodAdaptError, ParseError,
                     ValidationError)
from .experiments import (NoActionPolicy, RandomPolicy, TrainedPolicy,
                          belief_matrix, evaluate_policy, plan_study,
                          reduced_instance)
from .policy import load_checkpoint
from .ppo import PpoConfig, train
from .synth import synth_world
from .worldio import MANIFEST_NAME, load_world, save_world
from .worlds import SHIPPED_WORLDS, shipped_world, shipped_world_names

EXIT_SUCCESS = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


# --------------------------------------------------------------------------
# run manifests


def canonical_json(payload) -> str:
    """Sorted-keys, no-whitespace encoding; the basis of config hashing."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def _utc_now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


@dataclass
class RunManifest:
    """Reproducibility record written next to a command's outputs.

    ``config`` holds the fully resolved parameter values (after config-file
    merging), so re-running the command with exactly these values repeats
    the run; ``seeds`` lists every seed the command consumed.
    """

    command: str
    config: dict
    seeds: list
    run_id: str = ""
    created_at: str = ""
    finished_at: str | None = None
    status: str = "running"
    artifacts: dict = field(default_factory=dict)
    error: str | None = None

    def __post_init__(self):
        if not self.created_at:
            self.created_at = _utc_now()
        if not self.run_id:
            stamp = self.created_at.replace("-", "").replace(":", "")
            self.run_id = "-".join([self.command, stamp,
                                    config_hash(self.config)[:8],
                                    uuid.uuid4().hex[:6]])

    def finish(self, status: str, error: str | None = None) -> None:
        self.status = status
        self.error = error
        self.finished_at = _utc_now()

    def to_dict(self) -> dict:
        return {
            "runId": self.run_id,
            "command": self.command,
            "createdAt": self.created_at,
            "finishedAt": self.finished_at,
            "status": self.status,
            "configHash": config_hash(self.config),
            "config": self.config,
            "seeds": list(self.seeds),
            "artifacts": dict(self.artifacts),
            "error": self.error,
        }

    def write(self, out_dir: str) -> str:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, "run.json")
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")
        return path


def _guarded(manifest: RunManifest, out_dir: str, body) -> None:
    """Run ``body``, persisting the manifest whether it succeeds or not."""
    try:
        body()
    except BaseException as exc:
        manifest.finish("failed", error=f"{type(exc).__name__}: {exc}")
        try:
            manifest.write(out_dir)
        except OSError:
            pass
        raise
    manifest.finish("completed")
    manifest.write(out_dir)


# --------------------------------------------------------------------------
# config file handling


def _load_config_section(path: str | None, command: str) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"config file is not valid JSON: {exc}", path=path)
    if not isinstance(data, dict):
        raise ParseError("config file must be a JSON object", path=path)
    section = data.get(command, {})
    if not isinstance(section, dict):
        raise ParseError(f"config section {command!r} must be an object",
                         path=path)
    return section


def _merge_config(ctx: click.Context, section: dict, params: dict) -> dict:
    """File values fill in parameters the command line left at defaults."""
    resolved = dict(params)
    for raw_key, value in section.items():
        key = raw_key.replace("-", "_")
        if key not in params:
            raise ConfigError(f"unknown config key {raw_key!r} for command "
                              f"{ctx.command.name!r}")
        if ctx.get_parameter_source(key) == ParameterSource.DEFAULT:
            resolved[key] = value
    return resolved


def _jsonable(params: dict) -> dict:
    """Manifest-safe copy of resolved parameters."""
    out = {}
    for key, value in params.items():
        if isinstance(value, RcpScenario):
            value = value.name.lower()
        elif isinstance(value, (tuple, list)):
            value = [v.name.lower() if isinstance(v, RcpScenario) else v
                     for v in value]
        out[key] = value
    return out


# --------------------------------------------------------------------------
# parameter types and small parsers


class ScenarioChoice(click.ParamType):
    """Scenario id; the failure message lists the valid ones."""

    name = "scenario"

    def convert(self, value, param, ctx):
        if value is None or isinstance(value, RcpScenario):
            return value
        try:
            return RcpScenario.parse(str(value))
        except DomainError as exc:
            self.fail(str(exc), param, ctx)


SCENARIO = ScenarioChoice()


class WorldRef(click.ParamType):
    """A world directory on disk or the name of a shipped world."""

    name = "world"

    def convert(self, value, param, ctx):
        ref = str(value)
        if os.path.isdir(ref) or ref in SHIPPED_WORLDS:
            return ref
        self.fail(f"{ref!r} is neither a world directory nor a shipped "
                  f"world ({', '.join(shipped_world_names())})", param, ctx)


WORLD = WorldRef()


def _resolve_world(ref):
    ref = str(ref)
    if os.path.isdir(ref):
        return load_world(ref)
    if ref in SHIPPED_WORLDS:
        return shipped_world(ref)
    raise ConfigError(f"{ref!r} is neither a world directory nor a shipped "
                      f"world ({', '.join(shipped_world_names())})")


def _parse_scenario_list(value) -> tuple:
    items = value if isinstance(value, (list, tuple)) else [
        tok for tok in str(value).split(",") if tok.strip()]
    parsed = tuple(item if isinstance(item, RcpScenario)
                   else RcpScenario.parse(str(item)) for item in items)
    if not parsed:
        raise DomainError("expected at least one scenario id")
    return parsed


def _scenario_list_callback(ctx, param, value):
    if value is None:
        return None
    try:
        return _parse_scenario_list(value)
    except DomainError as exc:
        raise click.BadParameter(str(exc), ctx=ctx, param=param)


def _coerce_scenario(value):
    """Config files carry scenario ids as strings; flags arrive parsed."""
    if value is None or isinstance(value, RcpScenario):
        return value
    return RcpScenario.parse(str(value))


def _coerce_scenarios(value, fallback: tuple) -> tuple:
    if value is None:
        return fallback
    return _parse_scenario_list(value)


def _parse_checkpoint_map(entries) -> dict:
    """BELIEF=PATH pairs from repeated --checkpoint options."""
    out = {}
    for entry in entries:
        belief, sep, path = str(entry).partition("=")
        if not sep or not belief or not path:
            raise ConfigError(f"--checkpoint expects BELIEF=PATH, got {entry!r}")
        out[RcpScenario.parse(belief)] = path
    return out


def _echo_table(headers, rows) -> None:
    cells = [headers] + [["" if c is None else str(c) for c in row]
                         for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]

    def line(row):
        return "  ".join(str(c).ljust(widths[i]) if i == 0 else
                         str(c).rjust(widths[i]) for i, c in enumerate(row))

    click.echo(line(headers))
    click.echo(line(["-" * w for w in widths]))
    for row in cells[1:]:
        click.echo(line(row))


def _component_summary(components: dict) -> str:
    order = ["I", "D", "C", "A", "M"]
    return "  ".join(f"{k}={components[k]:,.0f}" for k in order
                     if k in components)


# --------------------------------------------------------------------------
# commands


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli():
    """Flood-adaptation planning over synthetic urban worlds."""


@cli.command(name="synth")
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="World directory to create.")
@click.option("--zones", default=12, show_default=True,
              type=click.IntRange(min=1))
@click.option("--trips", default=600, show_default=True,
              type=click.IntRange(min=0))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--name", default=None,
              help="World name (defaults to one derived from zones/seed).")
@click.option("--force", is_flag=True,
              help="Overwrite an existing world directory.")
@click.option("--config", "config_file", default=None, type=click.Path(),
              help="JSON config file; section 'synth'.")
@click.pass_context
def cmd_synth(ctx, out, zones, trips, seed, name, force, config_file):
    """Generate a synthetic world directory.

    Writes terrain, network, trips, scenario model, cost model, and the
    measure catalog.  Output is deterministic per --seed: rerunning with
    identical flags reproduces byte-identical world files.
    """
    params = _merge_config(ctx, _load_config_section(config_file, "synth"),
                           dict(out=out, zones=zones, trips=trips, seed=seed,
                                name=name, force=force))
    out = params["out"]
    if os.path.exists(os.path.join(out, MANIFEST_NAME)) and not params["force"]:
        raise ConfigError(f"world files already exist at {out}; "
                          "pass --force to overwrite")
    manifest = RunManifest("synth", _jsonable(params), seeds=[params["seed"]])

    def body():
        world = synth_world(zones=params["zones"], seed=params["seed"],
                            name=params["name"], n_trips=params["trips"])
        save_world(world, out)
        with open(os.path.join(out, MANIFEST_NAME)) as fh:
            files = dict(json.load(fh)["files"])
        files["manifest"] = MANIFEST_NAME
        manifest.artifacts.update(
            {key: os.path.join(out, rel) for key, rel in sorted(files.items())})
        click.echo(f"world {world.name!r}: {world.n_zones} zones, "
                   f"{len(world.trips)} trips -> {out}")

    _guarded(manifest, out, body)


@cli.command(name="train")
@click.option("--world", "world_dir", required=True, type=WORLD,
              help="World directory from `synth`, or a shipped world name.")
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Directory for checkpoints and the learning curve.")
@click.option("--scenario", type=SCENARIO, default=None,
              help="Assumed climate scenario (default: the world's).")
@click.option("--max-steps", default=4_500_000, show_default=True,
              type=click.IntRange(min=1), help="Environment step budget.")
@click.option("--envs", default=10, show_default=True,
              type=click.IntRange(min=1), help="Parallel environments.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--steps-per-update", default=1024, show_default=True,
              type=click.IntRange(min=1))
@click.option("--batch-size", default=64, show_default=True,
              type=click.IntRange(min=1))
@click.option("--epochs", default=10, show_default=True,
              type=click.IntRange(min=1))
@click.option("--hidden", default=64, show_default=True,
              type=click.IntRange(min=1), help="Policy network width.")
@click.option("--learning-rate", default=3e-4, show_default=True, type=float)
@click.option("--patience", default=15, show_default=True,
              type=click.IntRange(min=1),
              help="Plateau rounds before early stop.")
@click.option("--gamma", default=0.99, show_default=True, type=float)
@click.option("--start-year", default=None, type=int,
              help="Override the world's first planning year.")
@click.option("--end-year", default=None, type=int,
              help="Override the world's final planning year.")
@click.option("--config", "config_file", default=None, type=click.Path(),
              help="JSON config file; section 'train'.")
@click.pass_context
def cmd_train(ctx, world_dir, out, scenario, max_steps, envs, seed,
              steps_per_update, batch_size, epochs, hidden, learning_rate,
              patience, gamma, start_year, end_year, config_file):
    """Train the zone-graph policy on a world.

    Writes latest.npz (final parameters), best.npz (best smoothed return,
    when training improved at least once), and curve.jsonl with one row
    per update round.
    """
    params = _merge_config(
        ctx, _load_config_section(config_file, "train"),
        dict(world=world_dir, out=out, scenario=scenario,
             max_steps=max_steps, envs=envs, seed=seed,
             steps_per_update=steps_per_update, batch_size=batch_size,
             epochs=epochs, hidden=hidden, learning_rate=learning_rate,
             patience=patience, gamma=gamma, start_year=start_year,
             end_year=end_year))
    out = params["out"]
    world = _resolve_world(params["world"])
    scenario = _coerce_scenario(params["scenario"]) or world.default_scenario
    params["scenario"] = scenario
    manifest = RunManifest("train", _jsonable(params), seeds=[params["seed"]])

    def body():
        env_config = EnvConfig(scenario=scenario, seed=params["seed"],
                               gamma=params["gamma"],
                               start_year=params["start_year"],
                               end_year=params["end_year"])
        ppo_config = PpoConfig(max_steps=params["max_steps"],
                               parallel_envs=params["envs"],
                               steps_per_update=params["steps_per_update"],
                               batch_size=params["batch_size"],
                               epochs=params["epochs"],
                               hidden=params["hidden"],
                               learning_rate=params["learning_rate"],
                               patience=params["patience"],
                               seed=params["seed"])
        result = train(world, env_config, ppo_config, out_dir=out)
        artifacts = {"checkpoint": os.path.join(out, "latest.npz"),
                     "curve": os.path.join(out, "curve.jsonl")}
        best = os.path.join(out, "best.npz")
        if os.path.exists(best):
            artifacts["best"] = best
        manifest.artifacts.update(artifacts)
        last = result.curve[-1]
        click.echo(f"trained {result.total_steps} steps over "
                   f"{len(result.curve)} update rounds -> {out}")
        click.echo(f"final mean return {last['meanReturn']:.6f} "
                   f"(ema {last['emaReturn']:.6f}, "
                   f"early stop: {'yes' if result.stopped_early else 'no'})")

    _guarded(manifest, out, body)


@cli.command(name="eval")
@click.option("--world", "world_dir", required=True, type=WORLD)
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Directory for report.json.")
@click.option("--policy", "policy_kind", default="nc", show_default=True,
              type=click.Choice(["nc", "random", "rl"]),
              help="nc: never act; random: uniform feasible; rl: checkpoint.")
@click.option("--checkpoint", default=None, type=click.Path(),
              help="Trained parameters (required for --policy rl).")
@click.option("--scenario", type=SCENARIO, default=None)
@click.option("--seeds", "n_seeds", default=10, show_default=True,
              type=click.IntRange(min=1), help="Number of evaluation seeds.")
@click.option("--seed-base", default=0, show_default=True, type=int,
              help="First evaluation seed; episodes use seed-base..+seeds-1.")
@click.option("--gamma", default=0.99, show_default=True, type=float)
@click.option("--start-year", default=None, type=int)
@click.option("--end-year", default=None, type=int)
@click.option("--config", "config_file", default=None, type=click.Path(),
              help="JSON config file; section 'eval'.")
@click.pass_context
def cmd_eval(ctx, world_dir, out, policy_kind, checkpoint, scenario, n_seeds,
             seed_base, gamma, start_year, end_year, config_file):
    """Evaluate a policy over paired seeds and write a report."""
    params = _merge_config(
        ctx, _load_config_section(config_file, "eval"),
        dict(world=world_dir, out=out, policy=policy_kind,
             checkpoint=checkpoint, scenario=scenario, seeds=n_seeds,
             seed_base=seed_base, gamma=gamma, start_year=start_year,
             end_year=end_year))
    out = params["out"]
    world = _resolve_world(params["world"])
    scenario = _coerce_scenario(params["scenario"]) or world.default_scenario
    params["scenario"] = scenario
    seeds = [params["seed_base"] + i for i in range(params["seeds"])]
    manifest = RunManifest("eval", _jsonable(params), seeds=seeds)

    def body():
        env_config = EnvConfig(scenario=scenario, seed=0,
                               gamma=params["gamma"],
                               start_year=params["start_year"],
                               end_year=params["end_year"])
        kind = params["policy"]
        if kind == "nc":
            policy = NoActionPolicy()
        elif kind == "random":
            policy = RandomPolicy(seed=params["seed_base"])
        else:
            if params["checkpoint"] is None:
                raise ConfigError("--policy rl requires --checkpoint")
            weights, _ = load_checkpoint(params["checkpoint"])
            probe = FloodAdaptEnv(world, env_config)
            policy = TrainedPolicy(weights, probe.graph)
        report = evaluate_policy(world, env_config, policy, seeds)
        payload = {"version": 1, "world": world.name}
        payload.update(report.to_dict())
        path = os.path.join(out, "report.json")
        os.makedirs(out, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
        manifest.artifacts["report"] = path
        click.echo(f"policy {report.policy!r} on {scenario.name.lower()} "
                   f"over {len(seeds)} seeds")
        click.echo(f"mean return {report.mean_return:.6f} "
                   f"+/- {report.sd_return:.6f}")
        click.echo(f"mean cost {payload['meanCost_dkk']:,.0f} DKK  "
                   f"({_component_summary(payload['componentMeans_dkk'])})")

    _guarded(manifest, out, body)


@cli.command(name="matrix")
@click.option("--world", "world_dir", required=True, type=WORLD)
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Directory for matrix.json.")
@click.option("--beliefs", default="rcp26,rcp45,rcp85", show_default=True,
              callback=_scenario_list_callback,
              help="Comma-separated scenario ids the policies were trained "
                   "to assume.")
@click.option("--realized", default=None, callback=_scenario_list_callback,
              help="Comma-separated realized scenarios (default: beliefs).")
@click.option("--checkpoint", "checkpoints", multiple=True,
              help="BELIEF=PATH; repeat once per belief.")
@click.option("--seeds", "n_seeds", default=10, show_default=True,
              type=click.IntRange(min=1))
@click.option("--seed-base", default=0, show_default=True, type=int)
@click.option("--gamma", default=0.99, show_default=True, type=float)
@click.option("--start-year", default=None, type=int)
@click.option("--end-year", default=None, type=int)
@click.option("--config", "config_file", default=None, type=click.Path(),
              help="JSON config file; section 'matrix'.")
@click.pass_context
def cmd_matrix(ctx, world_dir, out, beliefs, realized, checkpoints, n_seeds,
               seed_base, gamma, start_year, end_year, config_file):
    """Cross-evaluate belief-conditioned checkpoints on realized scenarios.

    Produces the beliefs x realized mean-return table; each realized
    column is evaluated on the same seeds for every belief.
    """
    params = _merge_config(
        ctx, _load_config_section(config_file, "matrix"),
        dict(world=world_dir, out=out, beliefs=beliefs, realized=realized,
             checkpoint=list(checkpoints), seeds=n_seeds,
             seed_base=seed_base, gamma=gamma, start_year=start_year,
             end_year=end_year))
    out = params["out"]
    world = _resolve_world(params["world"])
    beliefs = _coerce_scenarios(params["beliefs"], tuple(RcpScenario))
    realized = _coerce_scenarios(params["realized"], beliefs)
    params["beliefs"] = beliefs
    params["realized"] = realized
    ckpt_paths = _parse_checkpoint_map(params["checkpoint"])
    seeds = [params["seed_base"] + i for i in range(params["seeds"])]
    manifest = RunManifest("matrix", _jsonable(params), seeds=seeds)

    def body():
        loaded = {}
        for belief in beliefs:
            if belief not in ckpt_paths:
                raise ConfigError(
                    f"no checkpoint for belief {belief.name.lower()}; "
                    f"pass --checkpoint {belief.name.lower()}=PATH")
            loaded[belief], _ = load_checkpoint(ckpt_paths[belief])
        env_config = EnvConfig(scenario=world.default_scenario, seed=0,
                               gamma=params["gamma"],
                               start_year=params["start_year"],
                               end_year=params["end_year"])
        report = belief_matrix(world, env_config, loaded, seeds,
                               realized=realized)
        payload = {"version": 1, "world": world.name}
        payload.update(report.to_dict())
        path = os.path.join(out, "matrix.json")
        os.makedirs(out, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
        manifest.artifacts["matrix"] = path
        headers = ["belief \\ realized"] + [s.name.lower() for s in realized]
        rows = [[b.name.lower()] + [f"{report.mean[i, j]:.6f}"
                                    for j in range(len(realized))]
                for i, b in enumerate(beliefs)]
        _echo_table(headers, rows)
        click.echo("severity-monotone rows: "
                   f"{'yes' if report.severity_monotone() else 'no'}")

    _guarded(manifest, out, body)


@cli.command(name="reduced")
@click.option("--kind", default="A", show_default=True,
              type=click.Choice(["A", "B"], case_sensitive=False),
              help="A: 4 zones x 5 years; B: 6 zones x 10 years.")
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Directory for reduced.json.")
@click.option("--runs", default=3, show_default=True,
              type=click.IntRange(min=1), help="Repetitions per scenario.")
@click.option("--scenarios", default=None, callback=_scenario_list_callback,
              help="Comma-separated scenario ids (default: all three).")
@click.option("--eval-seeds", default=3, show_default=True,
              type=click.IntRange(min=1),
              help="Held-out seeds both methods are scored on.")
@click.option("--max-steps", default=40_000, show_default=True,
              type=click.IntRange(min=1), help="RL step budget per run.")
@click.option("--steps-per-update", default=512, show_default=True,
              type=click.IntRange(min=1))
@click.option("--envs", default=10, show_default=True,
              type=click.IntRange(min=1))
@click.option("--hidden", default=32, show_default=True,
              type=click.IntRange(min=1))
@click.option("--bo-init", default=16, show_default=True,
              type=click.IntRange(min=1), help="Random plans before the GP.")
@click.option("--bo-iters", default=40, show_default=True,
              type=click.IntRange(min=1), help="GP-guided evaluations.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--config", "config_file", default=None, type=click.Path(),
              help="JSON config file; section 'reduced'.")
@click.pass_context
def cmd_reduced(ctx, kind, out, runs, scenarios, eval_seeds, max_steps,
                steps_per_update, envs, hidden, bo_init, bo_iters, seed,
                config_file):
    """Run the reduced two-method study: trained policy vs optimized plan.

    Both methods are scored on the same held-out event seeds per scenario;
    the table reports per-scenario mean returns.
    """
    params = _merge_config(
        ctx, _load_config_section(config_file, "reduced"),
        dict(kind=kind, out=out, runs=runs, scenarios=scenarios,
             eval_seeds=eval_seeds, max_steps=max_steps,
             steps_per_update=steps_per_update, envs=envs, hidden=hidden,
             bo_init=bo_init, bo_iters=bo_iters, seed=seed))
    out = params["out"]
    kind = str(params["kind"]).upper()
    if kind not in ("A", "B"):
        raise ConfigError(f"kind must be A or B, got {params['kind']!r}")
    params["kind"] = kind
    scenarios = _coerce_scenarios(params["scenarios"], tuple(RcpScenario))
    params["scenarios"] = scenarios
    manifest = RunManifest("reduced", _jsonable(params),
                           seeds=[params["seed"]])

    def body():
        if kind == "A":
            world, env_config = reduced_instance(zones=4, years=5)
        else:
            world, env_config = reduced_instance(zones=6, years=10)
        env_config = replace(env_config, seed=params["seed"])
        ppo_config = PpoConfig(max_steps=params["max_steps"],
                               steps_per_update=params["steps_per_update"],
                               parallel_envs=params["envs"],
                               hidden=params["hidden"], epochs=6,
                               patience=8, seed=params["seed"])
        bo_config = BoConfig(init_samples=params["bo_init"],
                             max_iters=params["bo_iters"],
                             seed=params["seed"])
        held_out = [9000 + i for i in range(params["eval_seeds"])]
        report = plan_study(world, env_config, scenarios, params["runs"],
                            ppo_config, bo_config, held_out)
        payload = {"version": 1, "kind": kind, "world": world.name,
                   "zones": world.n_zones,
                   "years": env_config.end_year - env_config.start_year + 1,
                   "evalSeeds": held_out}
        payload.update(report.to_dict())
        path = os.path.join(out, "reduced.json")
        os.makedirs(out, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
        manifest.artifacts["reduced"] = path
        headers = ["scenario", "rl mean", "plan mean", "runs"]
        rows = [[cell.scenario.lower(), f"{cell.rl_mean:.6f}",
                 f"{cell.bo_mean:.6f}", str(params["runs"])]
                for cell in report.cells]
        _echo_table(headers, rows)

    _guarded(manifest, out, body)


@cli.command(name="serve")
@click.option("--world", "world_dirs", multiple=True, required=True,
              help="World directory or shipped world name; repeatable.  "
                   "NAME=REF registers the world under NAME instead of "
                   "its own name.")
@click.option("--checkpoint", "checkpoints", multiple=True,
              help="Attach a trained policy: PATH (all worlds) or NAME=PATH.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--config", "config_file", default=None, type=click.Path(),
              help="JSON config file; section 'serve'.")
@click.pass_context
def cmd_serve(ctx, world_dirs, checkpoints, host, port, config_file):
    """Serve the session API over HTTP.

    Serves until interrupted and writes no run manifest (the command
    produces no files).
    """
    params = _merge_config(
        ctx, _load_config_section(config_file, "serve"),
        dict(world=list(world_dirs), checkpoint=list(checkpoints),
             host=host, port=port))
    worlds = {}
    for entry in params["world"]:
        name, sep, path = str(entry).partition("=")
        wname, wdir = (name, path) if sep else (None, str(entry))
        world = _resolve_world(wdir)
        key = wname or world.name
        if key in worlds:
            raise ConfigError(f"duplicate world name {key!r}")
        worlds[key] = world
    policies = {}
    for entry in params["checkpoint"]:
        name, sep, path = str(entry).partition("=")
        targets = [name] if sep else list(worlds)
        if not sep:
            path = str(entry)
        weights, _ = load_checkpoint(path)
        for target in targets:
            if target not in worlds:
                raise ConfigError(f"checkpoint names unknown world "
                                  f"{target!r}")
            policies[target] = weights

    from .server import create_app
    import uvicorn

    app = create_app(worlds, policies)
    click.echo(f"serving {len(worlds)} world(s) on "
               f"http://{params['host']}:{params['port']}")
    uvicorn.run(app, host=params["host"], port=int(params["port"]),
                log_level="warning")


# --------------------------------------------------------------------------
# entry point


def main(argv: list | None = None) -> int:
    """Console entry point; maps exception classes onto exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_CONFIG
    except (ValidationError, ConfigError, DomainError, OSError) as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except FloodAdaptError as exc:
        click.echo(f"runtime error: {exc}", err=True)
        return EXIT_RUNTIME
    except Exception as exc:  # last resort: report, never traceback
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_RUNTIME
    return EXIT_SUCCESS


if __name__ == "__main__":
    sys.exit(main())
