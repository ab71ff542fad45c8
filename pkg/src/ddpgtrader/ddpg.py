"""Actor-critic agent over the trading environment.

The actor maps a scaled observation to a continuous allocation signal in
[-1, 1] per stock; map_action() negates and scales it into integer shares
(the environment counts positive shares as sales, while the actor's positive
output means buy). A replay buffer decorrelates updates, mean-reverting
exploration noise perturbs actions during training, and slowly blended
target copies of both networks stabilize the bootstrap targets.

Rewards entering the buffer are pre-multiplied by Agent.reward_scale
(default 1/initial_balance) so critic targets sit near unit scale; the
environment itself stays in currency.

All randomness derives from DdpgConfig.seed through fixed named streams, so
a (seed, data, config) triple fixes every parameter and report bit-exactly:
stream 0 = actor init, 1 = critic init, 2 = exploration noise,
3 = minibatch sampling.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from . import metrics, nn
from .env import ObservationScaler, PortfolioState, TradeAction, Transition, clip_to_feasible, observe, portfolio_value, reset, step
from .errors import DataError, NumericError
from .marketdata import PriceSeries

CHECKPOINT_KIND = "ddpgtrader-agent"
CHECKPOINT_VERSION = 1

_STREAM_ACTOR, _STREAM_CRITIC, _STREAM_NOISE, _STREAM_SAMPLER = range(4)


@dataclass(frozen=True)
class DdpgConfig:
    seed: int
    gamma: float = 0.99
    tau: float = 0.001
    batch_size: int = 64
    episodes: int = 30
    buffer_capacity: int = 100_000
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    h_max: int = 100
    warmup: int = 1000
    hidden_sizes: tuple[int, ...] = (64, 32)
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    ou_mu: float = 0.0
    reward_scale: float | None = None  # None: resolve to 1/initial_balance

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("need batch_size >= 1 and buffer_capacity >= batch_size")
        if self.episodes < 0 or self.warmup < 0:
            raise ValueError("episodes and warmup must be >= 0")
        if self.h_max < 1:
            raise ValueError(f"h_max must be >= 1, got {self.h_max}")
        if self.actor_lr < 0.0 or self.critic_lr < 0.0:
            raise ValueError("learning rates must be >= 0 (0 freezes that network)")
        if self.ou_sigma < 0.0 or self.ou_theta < 0.0:
            raise ValueError("noise parameters must be >= 0")
        if self.reward_scale is not None and self.reward_scale <= 0.0:
            raise ValueError(f"reward_scale must be positive, got {self.reward_scale}")
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))


def _stream(seed: int, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform with-replacement sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.size = 0
        self._next = 0
        self._obs = self._actions = self._rewards = self._next_obs = self._terminals = None

    def _allocate(self, obs_dim: int, act_dim: int) -> None:
        self._obs = np.zeros((self.capacity, obs_dim))
        self._actions = np.zeros((self.capacity, act_dim))
        self._rewards = np.zeros(self.capacity)
        self._next_obs = np.zeros((self.capacity, obs_dim))
        self._terminals = np.zeros(self.capacity, dtype=bool)

    def push(self, tr: Transition) -> None:
        if self._obs is None:
            self._allocate(len(tr.s), len(tr.a))
        i = self._next
        self._obs[i] = tr.s
        self._actions[i] = tr.a
        self._rewards[i] = tr.r
        self._next_obs[i] = tr.s_next
        self._terminals[i] = tr.terminal
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator) -> "Batch":
        if not 1 <= n <= self.size:
            raise ValueError(f"cannot sample {n} of {self.size} stored transitions")
        idx = rng.integers(0, self.size, size=n)
        return Batch(
            obs=self._obs[idx],
            actions=self._actions[idx],
            rewards=self._rewards[idx],
            next_obs=self._next_obs[idx],
            terminals=self._terminals[idx],
        )

    def transitions(self) -> list[Transition]:
        """Stored entries, oldest first."""
        if self.size < self.capacity:
            order = range(self.size)
        else:
            order = [(self._next + k) % self.capacity for k in range(self.capacity)]
        return [
            Transition(self._obs[i], self._actions[i], float(self._rewards[i]), self._next_obs[i], bool(self._terminals[i]))
            for i in order
        ]


@dataclass
class Batch:
    obs: np.ndarray  # (N, O)
    actions: np.ndarray  # (N, D)
    rewards: np.ndarray  # (N,)
    next_obs: np.ndarray  # (N, O)
    terminals: np.ndarray  # (N,) bool


@dataclass
class OuNoise:
    """Mean-reverting gaussian exploration: x += theta*(mu - x) + sigma*N(0,1)."""

    theta: float
    sigma: float
    mu: float
    dim: int
    rng: np.random.Generator
    x: np.ndarray = field(init=False)

    def __post_init__(self):
        self.x = np.full(self.dim, float(self.mu))

    def reset(self) -> None:
        self.x = np.full(self.dim, float(self.mu))

    def step(self) -> np.ndarray:
        self.x = self.x + self.theta * (self.mu - self.x) + self.sigma * self.rng.standard_normal(self.dim)
        return self.x.copy()


@dataclass
class Agent:
    """Networks plus the mutable training state that feeds them."""

    config: DdpgConfig
    scaler: ObservationScaler
    actor: nn.Mlp
    critic: nn.Mlp
    actor_target: nn.Mlp
    critic_target: nn.Mlp
    actor_opt: nn.OptimizerState
    critic_opt: nn.OptimizerState
    reward_scale: float
    buffer: ReplayBuffer
    noise: OuNoise
    sample_rng: np.random.Generator
    total_env_steps: int = 0

    @property
    def num_assets(self) -> int:
        return self.scaler.num_assets


def new_agent(cfg: DdpgConfig, scaler: ObservationScaler, initial_balance: float) -> Agent:
    """Fresh agent; targets start as exact copies of their source networks."""
    d = scaler.num_assets
    obs_dim = 2 * d + 1
    actor = nn.init_mlp((obs_dim, *cfg.hidden_sizes, d), "relu", "tanh", _stream(cfg.seed, _STREAM_ACTOR))
    critic = nn.init_mlp((obs_dim + d, *cfg.hidden_sizes, 1), "relu", "identity", _stream(cfg.seed, _STREAM_CRITIC))
    if cfg.reward_scale is not None:
        reward_scale = cfg.reward_scale
    else:
        reward_scale = 1.0 / initial_balance if initial_balance > 0.0 else 1.0
    return Agent(
        config=cfg,
        scaler=scaler,
        actor=actor,
        critic=critic,
        actor_target=actor.copy(),
        critic_target=critic.copy(),
        actor_opt=nn.adam_init(actor, cfg.actor_lr),
        critic_opt=nn.adam_init(critic, cfg.critic_lr),
        reward_scale=reward_scale,
        buffer=ReplayBuffer(cfg.buffer_capacity),
        noise=OuNoise(cfg.ou_theta, cfg.ou_sigma, cfg.ou_mu, d, _stream(cfg.seed, _STREAM_NOISE)),
        sample_rng=_stream(cfg.seed, _STREAM_SAMPLER),
    )


def select_action(agent: Agent, obs: np.ndarray, noise: OuNoise | None = None) -> np.ndarray:
    """Deterministic policy output, optionally perturbed, clamped to [-1, 1]."""
    out, _ = nn.forward(agent.actor, obs)
    if noise is not None:
        out = out + noise.step()
    return np.clip(out, -1.0, 1.0)


def map_action(continuous: np.ndarray, h_max: int) -> TradeAction:
    """Continuous signal in [-1,1]^D to integer shares: positive signal buys.

    a[d] = round(-c[d] * h_max), rounding halves away from zero; the sign flip
    converts the actor's buy-positive convention to the environment's
    sell-positive one.
    """
    c = np.asarray(continuous, dtype=np.float64)
    if np.any(np.abs(c) > 1.0) or not np.all(np.isfinite(c)):
        raise ValueError("continuous action entries must lie in [-1, 1]")
    v = -c * h_max
    return TradeAction(np.copysign(np.floor(np.abs(v) + 0.5), v).astype(np.int64))


def _critic_input(obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
    return np.concatenate([obs, actions], axis=-1)


def critic_targets(agent: Agent, batch: Batch) -> np.ndarray:
    """Bootstrap targets y = r + gamma * Q'(s', mu'(s')); y = r at terminals."""
    next_actions, _ = nn.forward(agent.actor_target, batch.next_obs)
    q_next, _ = nn.forward(agent.critic_target, _critic_input(batch.next_obs, next_actions))
    return batch.rewards + agent.config.gamma * np.where(batch.terminals, 0.0, q_next[:, 0])


def critic_loss_gradients(agent: Agent, batch: Batch) -> tuple[float, nn.GradientSet]:
    """Mean squared error against frozen targets, with its exact gradient."""
    y = critic_targets(agent, batch)
    q, tape = nn.forward(agent.critic, _critic_input(batch.obs, batch.actions))
    diff = q[:, 0] - y
    loss = float(np.mean(diff * diff))
    grads = nn.backward(agent.critic, tape, (2.0 / len(diff)) * diff[:, None])
    return loss, grads


def critic_update(agent: Agent, batch: Batch) -> float:
    """One optimizer step on the critic; returns the pre-step loss."""
    loss, grads = critic_loss_gradients(agent, batch)
    if not np.isfinite(loss):
        raise NumericError(f"critic loss is not finite: {loss}")
    nn.optimizer_step(agent.critic, grads, agent.critic_opt)
    return loss


def actor_objective_gradients(agent: Agent, batch: Batch) -> tuple[float, nn.GradientSet]:
    """J = mean Q(s, mu(s)) and the gradient of -J wrt actor parameters.

    The chain runs backward through the critic's action input columns, then
    through the actor; critic parameters receive no update from this path.
    """
    n = len(batch.obs)
    actions, actor_tape = nn.forward(agent.actor, batch.obs)
    q, critic_tape = nn.forward(agent.critic, _critic_input(batch.obs, actions))
    objective = float(np.mean(q[:, 0]))
    through_critic = nn.backward(agent.critic, critic_tape, np.full((n, 1), -1.0 / n))
    d_actions = through_critic.d_input[:, batch.obs.shape[1] :]
    grads = nn.backward(agent.actor, actor_tape, d_actions)
    return objective, grads


def actor_update(agent: Agent, batch: Batch) -> float:
    """One ascent step on J (descent on -J); returns the pre-step objective."""
    objective, grads = actor_objective_gradients(agent, batch)
    nn.optimizer_step(agent.actor, grads, agent.actor_opt)
    return objective


def learn_step(agent: Agent) -> tuple[float, float] | None:
    """One full update round, gated until warmup and one minibatch are banked."""
    cfg = agent.config
    if agent.total_env_steps < cfg.warmup or agent.buffer.size < cfg.batch_size:
        return None
    batch = agent.buffer.sample(cfg.batch_size, agent.sample_rng)
    loss = critic_update(agent, batch)
    objective = actor_update(agent, batch)
    nn.soft_update(agent.actor_target, agent.actor, cfg.tau)
    nn.soft_update(agent.critic_target, agent.critic, cfg.tau)
    return loss, objective


@dataclass(frozen=True)
class EpisodeStats:
    episode: int
    final_value: float
    mean_critic_loss: float  # nan when no update ran this episode
    mean_actor_objective: float


@dataclass
class TrainingLog:
    rows: list[EpisodeStats] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("episode,final_value,mean_critic_loss,mean_actor_objective\n")
            for r in self.rows:
                fh.write(f"{r.episode},{r.final_value!r},{r.mean_critic_loss!r},{r.mean_actor_objective!r}\n")


def _run_episode(agent: Agent, series: PriceSeries, initial_balance: float, *, explore: bool, learn: bool) -> tuple[np.ndarray, list, list]:
    """Roll one pass over the series; returns (value curve, losses, objectives)."""
    if series.num_assets != agent.num_assets:
        raise ValueError(f"series has {series.num_assets} assets, agent expects {agent.num_assets}")
    state = reset(series, initial_balance)
    curve = np.empty(series.num_days)
    curve[0] = portfolio_value(state)
    losses, objectives = [], []
    if explore:
        agent.noise.reset()
    for t in range(series.num_days - 1):
        obs = observe(state, agent.scaler)
        continuous = select_action(agent, obs, agent.noise if explore else None)
        trade = clip_to_feasible(state, map_action(continuous, agent.config.h_max))
        state_next, reward = step(state, trade, series.prices[t + 1])
        if learn:
            agent.buffer.push(
                Transition(
                    s=obs,
                    a=continuous,
                    r=reward * agent.reward_scale,
                    s_next=observe(state_next, agent.scaler),
                    terminal=t == series.num_days - 2,
                )
            )
            agent.total_env_steps += 1
            stats = learn_step(agent)
            if stats is not None:
                losses.append(stats[0])
                objectives.append(stats[1])
        curve[t + 1] = portfolio_value(state_next)
        state = state_next
    return curve, losses, objectives


def train_episodes(agent: Agent, series: PriceSeries, episodes: int, initial_balance: float, log: TrainingLog | None = None) -> TrainingLog:
    """Run exploration episodes over the series, extending the given log."""
    log = log if log is not None else TrainingLog()
    start = len(log.rows)
    for ep in range(episodes):
        curve, losses, objectives = _run_episode(agent, series, initial_balance, explore=True, learn=True)
        log.rows.append(
            EpisodeStats(
                episode=start + ep + 1,
                final_value=float(curve[-1]),
                mean_critic_loss=float(np.mean(losses)) if losses else float("nan"),
                mean_actor_objective=float(np.mean(objectives)) if objectives else float("nan"),
            )
        )
    return log


def train(series: PriceSeries, cfg: DdpgConfig, initial_balance: float) -> tuple[Agent, TrainingLog]:
    """Train a fresh agent for cfg.episodes passes over the series."""
    if series.num_days < 2:
        raise ValueError("training series must span at least 2 days")
    if initial_balance < 0.0:
        raise ValueError(f"initial_balance must be >= 0, got {initial_balance}")
    scaler = ObservationScaler.from_training(series, initial_balance, cfg.h_max)
    agent = new_agent(cfg, scaler, initial_balance)
    log = train_episodes(agent, series, cfg.episodes, initial_balance)
    return agent, log


def evaluate(agent: Agent, series: PriceSeries, initial_balance: float, online_learning: bool = False, strategy: str = "ddpg") -> metrics.BacktestReport:
    """Noise-free rollout over the series; optionally keeps learning per step."""
    curve, _, _ = _run_episode(agent, series, initial_balance, explore=False, learn=online_learning)
    return metrics.build_report(strategy, series.dates, curve)


def _scaler_to_dict(scaler: ObservationScaler) -> dict:
    return {
        "price_scale": scaler.price_scale.tolist(),
        "holdings_scale": scaler.holdings_scale,
        "balance_scale": scaler.balance_scale,
    }


def save_checkpoint(agent: Agent, path) -> None:
    """One JSON container for all four networks plus optimizer and run state.

    Serialization is canonical (sorted keys, repr floats), so identical agents
    produce byte-identical files.
    """
    payload = {
        "kind": CHECKPOINT_KIND,
        "version": CHECKPOINT_VERSION,
        "config": dataclasses.asdict(agent.config),
        "scaler": _scaler_to_dict(agent.scaler),
        "reward_scale": agent.reward_scale,
        "total_env_steps": agent.total_env_steps,
        "actor": nn.mlp_to_dict(agent.actor),
        "critic": nn.mlp_to_dict(agent.critic),
        "actor_target": nn.mlp_to_dict(agent.actor_target),
        "critic_target": nn.mlp_to_dict(agent.critic_target),
        "actor_opt": nn.optimizer_to_dict(agent.actor_opt),
        "critic_opt": nn.optimizer_to_dict(agent.critic_opt),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> Agent:
    """Restore an agent. Buffer, noise, and sampling streams restart from the
    config seed; learned parameters, optimizer moments, and the step counter
    resume exactly."""
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"checkpoint {path} is not valid JSON: {exc}") from exc
    if payload.get("kind") != CHECKPOINT_KIND or payload.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"checkpoint {path} has unsupported kind/version")
    try:
        raw_cfg = dict(payload["config"])
        raw_cfg["hidden_sizes"] = tuple(raw_cfg["hidden_sizes"])
        cfg = DdpgConfig(**raw_cfg)
        scaler = ObservationScaler(
            price_scale=np.array(payload["scaler"]["price_scale"], dtype=np.float64),
            holdings_scale=payload["scaler"]["holdings_scale"],
            balance_scale=payload["scaler"]["balance_scale"],
        )
        agent = Agent(
            config=cfg,
            scaler=scaler,
            actor=nn.mlp_from_dict(payload["actor"]),
            critic=nn.mlp_from_dict(payload["critic"]),
            actor_target=nn.mlp_from_dict(payload["actor_target"]),
            critic_target=nn.mlp_from_dict(payload["critic_target"]),
            actor_opt=nn.optimizer_from_dict(payload["actor_opt"]),
            critic_opt=nn.optimizer_from_dict(payload["critic_opt"]),
            reward_scale=float(payload["reward_scale"]),
            buffer=ReplayBuffer(cfg.buffer_capacity),
            noise=OuNoise(cfg.ou_theta, cfg.ou_sigma, cfg.ou_mu, scaler.num_assets, _stream(cfg.seed, _STREAM_NOISE)),
            sample_rng=_stream(cfg.seed, _STREAM_SAMPLER),
            total_env_steps=int(payload["total_env_steps"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"checkpoint {path} is malformed: {exc}") from exc
    expected_in = 2 * agent.num_assets + 1
    if agent.actor.in_dim != expected_in or agent.actor.out_dim != agent.num_assets:
        raise DataError(f"checkpoint {path}: actor shape does not match its scaler")
    return agent
