"""Static-plan Bayesian optimization baseline.

A plan fixes every zone's action for every year up front. Plans are encoded
one-hot per (zone, year) cell, a Gaussian process with a Matern 5/2 ARD
kernel models the mapping from encodings to discounted episode returns, and
expected improvement (computed through scaled complementary error functions,
so it stays finite far into the tails) picks the next plan to simulate.
Every evaluation averages the same fixed set of event seeds, so the
surrogate sees a deterministic objective.

This scales only to reduced instances: the full zones x years space is
astronomically large, which is exactly the motivation for the learned
policy this baseline is compared against.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize as sciopt
from scipy.special import erfcx, ndtr

from .adaptation import Measure, N_ACTIONS
from .env import EnvConfig, FloodAdaptEnv, episode_return
from .errors import NumericalError, ValidationError
from .worldio import World

SQRT5 = np.sqrt(5.0)
LOG2PI = np.log(2.0 * np.pi)


# -- plan space ----------------------------------------------------------------


@dataclass(frozen=True)
class PlanSpace:
    """Feasible zone-by-year action matrices under lifetime and inventory rules.

    A measure deployed in year y blocks its (zone, measure) slot through year
    y + lifetime inclusive, matching the ledger's expiry billing.
    """

    n_zones: int
    n_years: int
    inventory: np.ndarray  # (zones, actions) bool
    lifetimes: tuple[int, ...]  # per action id; 0 for the no-op

    @classmethod
    def from_env(cls, env: FloodAdaptEnv) -> "PlanSpace":
        lifetimes = [0] * N_ACTIONS
        for m in Measure:
            if m != Measure.DO_NOTHING:
                lifetimes[m] = env.world.catalog[m].lifetime_years
        return cls(env.n_zones, env.horizon, env.inventory_mask,
                   tuple(lifetimes))

    @property
    def dimension(self) -> int:
        return self.n_zones * self.n_years * N_ACTIONS

    def is_feasible(self, plan: np.ndarray) -> bool:
        plan = np.asarray(plan)
        if plan.shape != (self.n_zones, self.n_years):
            return False
        blocked_until = np.full((self.n_zones, N_ACTIONS), -1)
        for y in range(self.n_years):
            for z in range(self.n_zones):
                a = int(plan[z, y])
                if a == Measure.DO_NOTHING:
                    continue
                if not (0 < a < N_ACTIONS):
                    return False
                if not self.inventory[z, a] or y <= blocked_until[z, a]:
                    return False
                blocked_until[z, a] = y + self.lifetimes[a]
        return True

    def repair(self, plan: np.ndarray) -> np.ndarray:
        """Year-order projection: any infeasible cell becomes the no-op."""
        plan = np.asarray(plan, dtype=np.int64).copy()
        blocked_until = np.full((self.n_zones, N_ACTIONS), -1)
        for y in range(self.n_years):
            for z in range(self.n_zones):
                a = int(plan[z, y])
                if a == Measure.DO_NOTHING:
                    continue
                if not (0 < a < N_ACTIONS) or not self.inventory[z, a] \
                        or y <= blocked_until[z, a]:
                    plan[z, y] = int(Measure.DO_NOTHING)
                    continue
                blocked_until[z, a] = y + self.lifetimes[a]
        return plan

    def random_plan(self, rng: np.random.Generator) -> np.ndarray:
        raw = rng.integers(0, N_ACTIONS, size=(self.n_zones, self.n_years))
        return self.repair(raw)

    def perturb(self, plan: np.ndarray, rng: np.random.Generator,
                cells: int = 1) -> np.ndarray:
        out = np.asarray(plan).copy()
        for _ in range(cells):
            z = int(rng.integers(self.n_zones))
            y = int(rng.integers(self.n_years))
            out[z, y] = int(rng.integers(N_ACTIONS))
        return self.repair(out)


def encode_plan(plan: np.ndarray) -> np.ndarray:
    """One-hot per (zone, year) cell, concatenated row-major."""
    plan = np.asarray(plan, dtype=np.int64)
    z, y = plan.shape
    out = np.zeros((z, y, N_ACTIONS))
    out[np.arange(z)[:, None], np.arange(y)[None, :], plan] = 1.0
    return out.reshape(-1)


def decode_plan(vec: np.ndarray, n_zones: int, n_years: int) -> np.ndarray:
    cells = np.asarray(vec).reshape(n_zones, n_years, N_ACTIONS)
    return cells.argmax(axis=-1).astype(np.int64)


# -- Gaussian process ----------------------------------------------------------


@dataclass
class GpSurrogate:
    """Fitted Matern 5/2 ARD surrogate over standardized targets."""

    x: np.ndarray
    alpha: np.ndarray  # K^-1 y_std
    chol: np.ndarray
    log_lengthscales: np.ndarray
    log_signal: float
    log_noise: float
    y_mean: float
    y_std: float
    jitter: float

    @property
    def noise_sd(self) -> float:
        return float(np.exp(self.log_noise)) * self.y_std


def _matern52(x1, x2, log_ls, log_sf):
    ls = np.exp(log_ls)
    a = x1 / ls
    b = x2 / ls
    sq = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
          - 2.0 * a @ b.T)
    sq = np.maximum(sq, 0.0)
    r = np.sqrt(sq)
    sf2 = np.exp(2.0 * log_sf)
    return sf2 * (1.0 + SQRT5 * r + 5.0 * sq / 3.0) * np.exp(-SQRT5 * r), r


def _neg_log_marginal(theta, x, y, jitter):
    n, d = x.shape
    log_ls = theta[:d]
    log_sf = theta[d]
    log_sn = theta[d + 1]
    k, r = _matern52(x, x, log_ls, log_sf)
    k[np.diag_indices(n)] += np.exp(2.0 * log_sn) + jitter
    try:
        chol = np.linalg.cholesky(k)
    except np.linalg.LinAlgError:
        return np.inf, np.zeros_like(theta)
    alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, y))
    nll = 0.5 * float(y @ alpha) + float(np.log(np.diag(chol)).sum()) \
        + 0.5 * n * LOG2PI

    kinv = np.linalg.solve(chol.T, np.linalg.solve(chol, np.eye(n)))
    w = np.outer(alpha, alpha) - kinv  # dL/dK appears as -1/2 tr(w dK)

    sf2 = np.exp(2.0 * log_sf)
    base = sf2 * np.exp(-SQRT5 * r)
    grad = np.zeros_like(theta)
    # lengthscales: dk/dlog ls_i = (5/3) sf2 (1 + sqrt5 r) e^(-sqrt5 r) * d_i^2/ls_i^2
    pref = (5.0 / 3.0) * base * (1.0 + SQRT5 * r)
    ls = np.exp(log_ls)
    for i in range(d):
        diff = (x[:, i, None] - x[None, :, i]) / ls[i]
        dki = pref * diff * diff
        grad[i] = -0.5 * float(np.sum(w * dki))
    k_noiseless = base * (1.0 + SQRT5 * r + 5.0 * r * r / 3.0)
    grad[d] = -0.5 * float(np.sum(w * (2.0 * k_noiseless)))
    dnoise = np.zeros((n, n))
    dnoise[np.diag_indices(n)] = 2.0 * np.exp(2.0 * log_sn)
    grad[d + 1] = -0.5 * float(np.sum(w * dnoise))
    return nll, grad


JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2)


def _standardize(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    y_raw = np.asarray(values, dtype=np.float64)
    y_mean = float(y_raw.mean())
    y_std = float(y_raw.std())
    if y_std <= 0:
        y_std = 1.0
    return (y_raw - y_mean) / y_std, y_mean, y_std


def _condition(x, y, theta, y_mean, y_std) -> GpSurrogate:
    """Factorize the kernel at fixed hyperparameters, escalating jitter."""
    n, d = x.shape
    for jitter in JITTER_LADDER:
        k, _ = _matern52(x, x, theta[:d], theta[d])
        k[np.diag_indices(n)] += np.exp(2.0 * theta[d + 1]) + jitter
        try:
            chol = np.linalg.cholesky(k)
        except np.linalg.LinAlgError:
            continue
        alpha = np.linalg.solve(chol.T, np.linalg.solve(chol, y))
        return GpSurrogate(
            x=x, alpha=alpha, chol=chol,
            log_lengthscales=np.asarray(theta[:d]), log_signal=float(theta[d]),
            log_noise=float(theta[d + 1]),
            y_mean=y_mean, y_std=y_std, jitter=jitter)
    raise NumericalError(
        "kernel matrix stayed singular through jitter escalation")


def _check_training_data(x, y_raw):
    if x.ndim != 2 or len(y_raw) != x.shape[0]:
        raise ValidationError("points must be (n, d) with one value per point")
    if x.shape[0] < 2:
        raise ValidationError("the surrogate needs at least two observations")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y_raw)):
        raise ValidationError("surrogate inputs must be finite")


def gp_fit(points: np.ndarray, values: np.ndarray, restarts: int = 2,
           seed: int = 0, max_opt_iters: int = 40) -> GpSurrogate:
    """Hyperparameters by multi-start gradient descent on the negative
    marginal likelihood, then a jitter-escalated factorization."""
    x = np.asarray(points, dtype=np.float64)
    y_raw = np.asarray(values, dtype=np.float64)
    _check_training_data(x, y_raw)
    n, d = x.shape
    y, y_mean, y_std = _standardize(y_raw)

    rng = np.random.default_rng(seed)
    starts = []
    for i in range(max(1, restarts)):
        if i < 2:
            ls0 = np.full(d, np.log(1.0 + 2.0 * i))
        else:
            ls0 = rng.normal(np.log(2.0), 0.5, size=d)
        starts.append(np.concatenate([ls0, [0.0], [np.log(0.1)]]))

    bounds = [(np.log(1e-2), np.log(1e3))] * d \
        + [(np.log(1e-3), np.log(1e3)), (np.log(1e-4), np.log(1e1))]
    for jitter in JITTER_LADDER:
        best = None
        for theta0 in starts:
            res = sciopt.minimize(
                _neg_log_marginal, theta0, args=(x, y, jitter), jac=True,
                method="L-BFGS-B", options={"maxiter": max_opt_iters},
                bounds=bounds)
            if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
                best = res
        if best is None:
            continue
        try:
            return _condition(x, y, best.x, y_mean, y_std)
        except NumericalError:
            continue
    raise NumericalError(
        "kernel matrix stayed singular through jitter escalation")


def gp_refit(gp: GpSurrogate, points: np.ndarray,
             values: np.ndarray) -> GpSurrogate:
    """Condition on new data reusing a previous fit's hyperparameters."""
    x = np.asarray(points, dtype=np.float64)
    y_raw = np.asarray(values, dtype=np.float64)
    _check_training_data(x, y_raw)
    y, y_mean, y_std = _standardize(y_raw)
    theta = np.concatenate(
        [gp.log_lengthscales, [gp.log_signal], [gp.log_noise]])
    return _condition(x, y, theta, y_mean, y_std)


def gp_posterior(gp: GpSurrogate, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and sd of the latent function at query encodings."""
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    ks, _ = _matern52(gp.x, q, gp.log_lengthscales, gp.log_signal)
    mu = gp.y_mean + gp.y_std * (ks.T @ gp.alpha)
    v = np.linalg.solve(gp.chol, ks)
    kqq = np.exp(2.0 * gp.log_signal)
    var = np.maximum(kqq - np.sum(v * v, axis=0), 0.0)
    sd = gp.y_std * np.sqrt(var)
    return mu, sd


# -- expected improvement --------------------------------------------------------


def _ei_h(z: np.ndarray) -> np.ndarray:
    """phi(z) + z Phi(z), stable for very negative z via erfcx."""
    z = np.asarray(z, dtype=np.float64)
    phi = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    out = np.empty_like(z)
    pos = z >= -1.0
    if np.any(pos):
        out[pos] = phi[pos] + z[pos] * ndtr(z[pos])
    neg = ~pos
    if np.any(neg):
        zn = -z[neg]
        # Phi(-zn) = phi(zn) sqrt(pi/2) erfcx(zn / sqrt 2), so the bracket
        # below is Phi(-zn)/phi(zn) rescaled; it avoids 0 * inf in the tail.
        mills = np.sqrt(np.pi / 2.0) * erfcx(zn / np.sqrt(2.0))
        out[neg] = phi[neg] * (1.0 - zn * mills)
    return np.maximum(out, 0.0)


def expected_improvement(mu, sd, best_so_far: float) -> np.ndarray:
    """Closed-form E[max(f - best, 0)] under a Gaussian posterior."""
    mu = np.asarray(mu, dtype=np.float64)
    sd = np.asarray(sd, dtype=np.float64)
    out = np.zeros(np.broadcast(mu, sd).shape)
    degenerate = sd <= 0.0
    out = np.where(degenerate, np.maximum(mu - best_so_far, 0.0), out)
    safe_sd = np.where(degenerate, 1.0, sd)
    z = (mu - best_so_far) / safe_sd
    out = np.where(degenerate, out, safe_sd * _ei_h(z))
    return out if out.ndim else float(out)


def gp_expected_improvement(gp: GpSurrogate, queries: np.ndarray,
                            best_so_far: float) -> np.ndarray:
    mu, sd = gp_posterior(gp, queries)
    return expected_improvement(mu, sd, best_so_far)


# -- optimization loop -----------------------------------------------------------


@dataclass(frozen=True)
class BoConfig:
    init_samples: int = 1000
    max_iters: int = 500
    eval_seeds: int = 3
    candidate_pool: int = 128
    refine_rounds: int = 32
    restarts: int = 2
    refit_every: int = 10
    convergence_window: int = 100
    rel_tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.init_samples < 1:
            raise ValidationError("init_samples must be >= 1")
        if self.convergence_window < 1:
            raise ValidationError("convergence_window must be >= 1")
        if self.eval_seeds < 1:
            raise ValidationError("eval_seeds must be >= 1")
        if self.refit_every < 1:
            raise ValidationError("refit_every must be >= 1")


@dataclass
class BoResult:
    best_plan: np.ndarray
    best_return: float
    history: list[dict] = field(default_factory=list)


def plan_return(envs: list[FloodAdaptEnv], plan: np.ndarray) -> float:
    """Mean discounted return of one plan over the fixed evaluation seeds."""
    totals = []
    for env in envs:
        env.reset()
        rewards = []
        for y in range(plan.shape[1]):
            rewards.append(env.step(plan[:, y]).reward)
        totals.append(episode_return(rewards, env.gamma))
    return float(np.mean(totals))


def _plan_key(plan: np.ndarray) -> bytes:
    return np.asarray(plan, dtype=np.int64).tobytes()


def bo_optimize(envs: list[FloodAdaptEnv], space: PlanSpace,
                config: BoConfig) -> BoResult:
    """Init with random feasible plans, then fit/acquire/evaluate to a plateau.

    Evaluated plans never repeat: acquisition falls back through the ranked
    candidate list and finally to fresh random plans.
    """
    rng = np.random.default_rng(config.seed)
    plans: list[np.ndarray] = []
    xs: list[np.ndarray] = []
    ys: list[float] = []
    seen: set[bytes] = set()
    history: list[dict] = []

    def evaluate(plan) -> float:
        value = plan_return(envs, plan)
        plans.append(plan)
        xs.append(encode_plan(plan))
        ys.append(value)
        seen.add(_plan_key(plan))
        history.append({
            "iteration": len(ys) - 1,
            "plan": "".join(str(int(a)) for a in plan.ravel()),
            "return": value,
            "incumbent": max(ys),
        })
        return value

    def fresh_random(attempts: int = 200):
        for _ in range(attempts):
            plan = space.random_plan(rng)
            if _plan_key(plan) not in seen:
                return plan
        return None

    while len(ys) < config.init_samples:
        plan = fresh_random()
        if plan is None:
            break
        evaluate(plan)
    if len(ys) < 2:
        base = np.zeros((space.n_zones, space.n_years), dtype=np.int64)
        if _plan_key(base) not in seen:
            evaluate(base)
    if len(ys) < 2:
        # degenerate space with a single feasible plan; nothing to optimize
        i = int(np.argmax(ys))
        return BoResult(best_plan=plans[i], best_return=ys[i], history=history)

    gp = None
    best_trace = [max(ys)]
    for it in range(config.max_iters):
        if gp is None or it % config.refit_every == 0:
            gp = gp_fit(np.array(xs), np.array(ys), restarts=config.restarts,
                        seed=config.seed)
        else:
            gp = gp_refit(gp, np.array(xs), np.array(ys))
        best = max(ys)
        incumbent = plans[int(np.argmax(ys))]

        candidates = [space.random_plan(rng)
                      for _ in range(config.candidate_pool)]
        candidates += [space.perturb(incumbent, rng, cells=1 + int(rng.integers(3)))
                       for _ in range(config.candidate_pool // 2)]
        enc = np.array([encode_plan(p) for p in candidates])
        ei = gp_expected_improvement(gp, enc, best)

        top = candidates[int(np.argmax(ei))]
        top_ei = float(np.max(ei))
        for _ in range(config.refine_rounds):
            z = int(rng.integers(space.n_zones))
            y = int(rng.integers(space.n_years))
            variants = []
            for a in range(N_ACTIONS):
                cand = top.copy()
                cand[z, y] = a
                variants.append(space.repair(cand))
            venc = np.array([encode_plan(p) for p in variants])
            vei = gp_expected_improvement(gp, venc, best)
            j = int(np.argmax(vei))
            if vei[j] > top_ei:
                top, top_ei = variants[j], float(vei[j])

        if _plan_key(top) in seen:
            order = np.argsort(-ei)
            top = None
            for j in order:
                if _plan_key(candidates[j]) not in seen:
                    top = candidates[j]
                    break
            if top is None:
                top = fresh_random()
            if top is None:
                break  # every reachable plan has been evaluated
        evaluate(top)

        best_trace.append(max(ys))
        w = config.convergence_window
        if len(best_trace) > w:
            then = best_trace[-w - 1]
            if best_trace[-1] - then < config.rel_tol * abs(then):
                break

    i = int(np.argmax(ys))
    return BoResult(best_plan=plans[i], best_return=ys[i], history=history)


def bo_optimize_world(world: World, env_config: EnvConfig,
                      config: BoConfig) -> BoResult:
    """Build the paired evaluation environments and run the optimizer."""
    envs = [FloodAdaptEnv(world, _with_seed(env_config, env_config.seed + k))
            for k in range(config.eval_seeds)]
    space = PlanSpace.from_env(envs[0])
    return bo_optimize(envs, space, config)


def _with_seed(cfg: EnvConfig, seed: int) -> EnvConfig:
    return replace(cfg, seed=seed)
