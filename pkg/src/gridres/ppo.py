"""Strategic and tactical actor-critic policies with clipped PPO updates.

The strategic head is a 6-way categorical over configurations; during
calamity its logits receive the fixed emergency bias
alpha = (0, 0.5, 1, 2, 4, 5).  The tactical network maps the 21-dim
state (observation plus chosen configuration) to 10 per-switch Bernoulli
heads, biased by +2 per logit during calamity, and one unbiased grid head.

Updates maximize  L_clip - c1 * L_vf + c2 * L_ent  per agent with ratio
clipping, advantage normalization, global gradient-norm clipping, and an
approximate-KL early stop at kl_stop_factor * target_kl.  All math is
float64 numpy; gradients are exact (they are checked against central
finite differences in the test suite).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Adam, Mlp, clip_global_norm

EMERGENCY_ALPHA = np.array([0.0, 0.5, 1.0, 2.0, 4.0, 5.0])
SWITCH_EMERGENCY_BIAS = 2.0

PROB_FLOOR = 1e-8

STRATEGIC_STATE_DIM = 20
TACTICAL_STATE_DIM = 21
N_CONFIG_ACTIONS = 6
N_SWITCH_ACTIONS = 10


@dataclass(frozen=True)
class PpoHyperparams:
    lr_strategic: float = 3e-4
    lr_tactical: float = 3e-5
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    c1: float = 0.5  # value loss coefficient
    c2: float = 0.01  # entropy coefficient
    minibatch: int = 64
    epochs: int = 4
    update_every: int = 25  # episodes between update rounds
    grad_clip_norm: float = 0.5
    kl_stop_factor: float = 1.5
    target_kl: float = 0.01


@dataclass
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float  # full-batch entropy under the pre-update policy
    approx_kl: float  # full-batch mean(old_logp - new_logp) after the update
    epochs_run: int
    minibatch_steps: int
    stopped_early: bool


class ExperienceBuffer:
    """Append-only rollout storage; cleared after each update round."""

    def __init__(self):
        self.states: list[np.ndarray] = []
        self.actions: list = []
        self.log_probs: list[float] = []
        self.rewards: list[float] = []
        self.values: list[float] = []
        self.dones: list[bool] = []

    def add(self, state, action, log_prob, reward, value, done) -> None:
        self.states.append(np.asarray(state, dtype=np.float64))
        self.actions.append(action)
        self.log_probs.append(float(log_prob))
        self.rewards.append(float(reward))
        self.values.append(float(value))
        self.dones.append(bool(done))

    def __len__(self) -> int:
        return len(self.states)

    def clear(self) -> None:
        self.__init__()


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _clip_probs(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)


def entropy_strategic(probs) -> float:
    """Shannon entropy -sum p log p of one categorical distribution."""
    p = _clip_probs(np.asarray(probs, dtype=np.float64))
    return float(-(p * np.log(p)).sum())


def entropy_tactical(switch_probs, grid_prob: float) -> float:
    """Sum of the per-switch and grid binary entropies."""
    p = _clip_probs(np.append(np.asarray(switch_probs, dtype=np.float64), grid_prob))
    return float(-(p * np.log(p) + (1.0 - p) * np.log(1.0 - p)).sum())


def joint_log_prob(switch_probs, grid_prob: float, switch_bits, grid_bit: int) -> float:
    """log of the product of the 10 switch Bernoullis and the grid Bernoulli."""
    p = _clip_probs(np.append(np.asarray(switch_probs, dtype=np.float64), grid_prob))
    bits = np.append(np.asarray(switch_bits, dtype=np.float64), grid_bit)
    return float((bits * np.log(p) + (1.0 - bits) * np.log(1.0 - p)).sum())


def sample_strategic(probs, rng: np.random.Generator) -> tuple[int, float]:
    """Draw a configuration index; returns it with its exact log-probability."""
    p = np.asarray(probs, dtype=np.float64)
    c = int(rng.choice(len(p), p=p / p.sum()))
    return c, float(np.log(_clip_probs(p)[c]))


def sample_tactical(switch_probs, grid_prob: float, rng: np.random.Generator):
    """Draw the 10 switch bits and the grid bit; returns (bits, g, log_prob)."""
    u = rng.random(len(switch_probs) + 1)
    p = np.append(np.asarray(switch_probs, dtype=np.float64), grid_prob)
    bits = (u < p).astype(np.int64)
    logp = joint_log_prob(p[:-1], p[-1], bits[:-1], int(bits[-1]))
    return tuple(int(b) for b in bits[:-1]), int(bits[-1]), logp


def gae(rewards, values, dones, gamma: float, lam: float):
    """Generalized advantage estimation with episode-boundary masking.

    values must hold one more entry than rewards (the bootstrap value of
    the state after the last step).  Returns (advantages, returns) where
    returns = advantages + values[:-1].
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    t_len = len(rewards)
    if len(values) != t_len + 1 or len(dones) != t_len:
        raise ValueError("gae needs len(values) == len(rewards) + 1 == len(dones) + 1")
    adv = np.empty(t_len)
    running = 0.0
    for t in range(t_len - 1, -1, -1):
        nonterminal = 1.0 - dones[t]
        delta = rewards[t] + gamma * values[t + 1] * nonterminal - values[t]
        running = delta + gamma * lam * nonterminal * running
        adv[t] = running
    return adv, adv + values[:-1]


class _ActorCriticPolicy:
    """Shared PPO machinery; subclasses define the action distribution."""

    def __init__(self, state_dim: int, head_dim: int, hidden: int, seed, lr: float):
        rng = np.random.default_rng(seed)
        self.actor = Mlp((state_dim, hidden, hidden, head_dim), rng)
        self.critic = Mlp((state_dim, hidden, hidden, 1), rng)
        self.actor_opt = Adam(self.actor.parameter_arrays(), lr)
        self.critic_opt = Adam(self.critic.parameter_arrays(), lr)
        self.update_count = 0

    # subclasses: _log_probs_entropy(states, actions) -> (logps, entropies, head_grad_ctx)
    # subclasses: _head_gradient(ctx, dlogp, dentropy) -> dL/d(actor head)

    def value(self, state) -> float:
        return float(self.critic(np.atleast_2d(state))[0, 0])

    def _loss_terms(self, states, actions, old_logps, advantages, returns, hp, want_grads):
        """Total loss = -L_clip + c1 * L_vf - c2 * mean entropy, with exact
        gradients for actor and critic when want_grads is set."""
        logits, actor_acts = self.actor.forward(states)
        values, critic_acts = self.critic.forward(states)
        values = values[:, 0]
        logps, entropies, ctx = self._log_probs_entropy(states, logits, actions)
        batch = len(logps)

        ratio = np.exp(logps - old_logps)
        clipped_ratio = np.clip(ratio, 1.0 - hp.clip_eps, 1.0 + hp.clip_eps)
        surr = np.minimum(ratio * advantages, clipped_ratio * advantages)
        l_clip = surr.mean()
        v_err = values - returns
        l_vf = float((v_err**2).mean())
        l_ent = entropies.mean()
        loss = -l_clip + hp.c1 * l_vf - hp.c2 * l_ent
        stats = {
            "loss": float(loss),
            "policy_loss": float(-l_clip),
            "value_loss": l_vf,
            "entropy": float(l_ent),
            "logps": logps,
        }
        if not want_grads:
            return stats, None, None

        # d(-L_clip)/dlogp: the clipped branch is flat wherever it is active
        unclipped_active = ratio * advantages <= clipped_ratio * advantages
        dlogp = np.where(unclipped_active, ratio * advantages, 0.0) * (-1.0 / batch)
        dentropy = np.full(batch, -hp.c2 / batch)
        dhead = self._head_gradient(ctx, dlogp, dentropy)
        actor_grads = self.actor.backward(actor_acts, dhead)
        dvalue = (2.0 * hp.c1 / batch) * v_err
        critic_grads = self.critic.backward(critic_acts, dvalue[:, None])
        return stats, actor_grads, critic_grads

    def loss_for_check(self, states, actions, old_logps, advantages, returns, hp) -> float:
        """Scalar total loss only; used by the finite-difference oracle."""
        stats, _, _ = self._loss_terms(states, actions, old_logps, advantages, returns, hp, False)
        return stats["loss"]

    def loss_and_grads(self, states, actions, old_logps, advantages, returns, hp):
        stats, ag, cg = self._loss_terms(states, actions, old_logps, advantages, returns, hp, True)
        return stats, ag, cg

    def update(self, buffer: ExperienceBuffer, hp: PpoHyperparams, rng: np.random.Generator) -> UpdateStats:
        """Up to hp.epochs shuffled minibatch passes over the buffer, with
        the KL early stop checked before every applied step.  The buffer is
        left untouched; the caller clears it."""
        if len(buffer) == 0:
            raise ValueError("cannot update from an empty buffer")
        states = np.stack(buffer.states)
        actions = self._stack_actions(buffer.actions)
        old_logps = np.asarray(buffer.log_probs)
        values = np.append(np.asarray(buffer.values), 0.0)
        adv, ret = gae(buffer.rewards, values, buffer.dones, hp.gamma, hp.lam)
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

        pre = self._loss_terms(states, actions, old_logps, adv, ret, hp, False)[0]
        entropy_before = pre["entropy"]

        n = len(buffer)
        kl_limit = hp.kl_stop_factor * hp.target_kl
        stopped = False
        steps = 0
        epochs_run = 0
        policy_losses: list[float] = []
        value_losses: list[float] = []
        for _ in range(hp.epochs):
            order = rng.permutation(n)
            for start in range(0, n, hp.minibatch):
                idx = order[start : start + hp.minibatch]
                stats, actor_grads, critic_grads = self.loss_and_grads(
                    states[idx], actions[idx], old_logps[idx], adv[idx], ret[idx], hp
                )
                kl = float(np.mean(old_logps[idx] - stats["logps"]))
                if kl > kl_limit:
                    stopped = True
                    break
                if not np.isfinite(stats["loss"]):
                    raise FloatingPointError(f"non-finite PPO loss {stats['loss']}")
                self.actor_opt.step(
                    self.actor.parameter_arrays(),
                    clip_global_norm(actor_grads, hp.grad_clip_norm),
                )
                self.critic_opt.step(
                    self.critic.parameter_arrays(),
                    clip_global_norm(critic_grads, hp.grad_clip_norm),
                )
                steps += 1
                policy_losses.append(stats["policy_loss"])
                value_losses.append(stats["value_loss"])
            if stopped:
                break
            epochs_run += 1

        post = self._loss_terms(states, actions, old_logps, adv, ret, hp, False)[0]
        approx_kl = float(np.mean(old_logps - post["logps"]))
        self.update_count += 1
        return UpdateStats(
            policy_loss=float(np.mean(policy_losses)) if policy_losses else 0.0,
            value_loss=float(np.mean(value_losses)) if value_losses else 0.0,
            entropy=entropy_before,
            approx_kl=approx_kl,
            epochs_run=epochs_run,
            minibatch_steps=steps,
            stopped_early=stopped,
        )

    def parameter_count(self) -> int:
        return self.actor.n_params + self.critic.n_params


class StrategicPolicy(_ActorCriticPolicy):
    """Configuration selector: 20-dim state -> 6-way categorical."""

    def __init__(self, state_dim=STRATEGIC_STATE_DIM, n_actions=N_CONFIG_ACTIONS,
                 hidden=64, seed=0, lr=PpoHyperparams.lr_strategic, alpha=EMERGENCY_ALPHA):
        super().__init__(state_dim, n_actions, hidden, seed, lr)
        self.alpha = np.asarray(alpha, dtype=np.float64)

    def forward(self, state, w_t: int):
        """(probabilities, value) with the emergency bias w_t * alpha."""
        state = np.atleast_2d(np.asarray(state, dtype=np.float64))
        logits = self.actor(state)[0]
        probs = softmax(logits + float(w_t) * self.alpha)
        if not np.all(np.isfinite(probs)):
            raise FloatingPointError("non-finite strategic policy output")
        return probs, self.value(state)

    def act(self, state, rng: np.random.Generator):
        probs, value = self.forward(state, int(round(float(state[0]))))
        c, logp = sample_strategic(probs, rng)
        return c, logp, value, probs

    def _stack_actions(self, actions) -> np.ndarray:
        return np.asarray(actions, dtype=np.int64)

    def _log_probs_entropy(self, states, logits, actions):
        # the weather flag is the first state entry, exactly as sampled
        w = states[:, 0:1]
        probs = softmax(logits + w * self.alpha)
        base = softmax(logits)  # entropy regularizes the learnable logits
        sel = _clip_probs(probs[np.arange(len(actions)), actions])
        logps = np.log(sel)
        base_c = _clip_probs(base)
        entropies = -(base_c * np.log(base_c)).sum(axis=1)
        return logps, entropies, {"probs": probs, "base": base_c, "actions": actions}

    def _head_gradient(self, ctx, dlogp, dentropy):
        probs, base, actions = ctx["probs"], ctx["base"], ctx["actions"]
        batch, k = probs.shape
        onehot = np.zeros((batch, k))
        onehot[np.arange(batch), actions] = 1.0
        dh = dlogp[:, None] * (onehot - probs)
        ent = -(base * np.log(base)).sum(axis=1, keepdims=True)
        d_ent_dh = -base * (np.log(base) + ent)
        dh += dentropy[:, None] * d_ent_dh
        return dh


class TacticalPolicy(_ActorCriticPolicy):
    """Switch-level controller: 21-dim state -> 10 switch heads + grid head."""

    def __init__(self, state_dim=TACTICAL_STATE_DIM, n_switches=N_SWITCH_ACTIONS,
                 hidden=64, seed=1, lr=PpoHyperparams.lr_tactical,
                 switch_bias=SWITCH_EMERGENCY_BIAS):
        super().__init__(state_dim, n_switches + 1, hidden, seed, lr)
        self.n_switches = n_switches
        self.switch_bias = float(switch_bias)

    def forward(self, state, w_t: int):
        """(switch_probs, grid_prob, value); the emergency bias lifts only
        the switch logits, the grid head is weather-neutral."""
        state = np.atleast_2d(np.asarray(state, dtype=np.float64))
        head = self.actor(state)[0]
        switch_probs = sigmoid(head[: self.n_switches] + float(w_t) * self.switch_bias)
        grid_prob = float(sigmoid(head[self.n_switches : self.n_switches + 1])[0])
        if not (np.all(np.isfinite(switch_probs)) and np.isfinite(grid_prob)):
            raise FloatingPointError("non-finite tactical policy output")
        return switch_probs, grid_prob, self.value(state)

    def act(self, state, rng: np.random.Generator):
        switch_probs, grid_prob, value = self.forward(state, int(round(float(state[0]))))
        bits, g, logp = sample_tactical(switch_probs, grid_prob, rng)
        return bits, g, logp, value

    def _stack_actions(self, actions) -> np.ndarray:
        # each action is (switch bits, grid bit) -> one 11-wide row
        return np.asarray([[*bits, g] for bits, g in actions], dtype=np.float64)

    def _log_probs_entropy(self, states, head, actions):
        w = states[:, 0:1]
        bias = np.concatenate(
            [np.full(self.n_switches, self.switch_bias), np.zeros(1)]
        )
        probs = _clip_probs(sigmoid(head + w * bias))
        logps = (actions * np.log(probs) + (1.0 - actions) * np.log(1.0 - probs)).sum(axis=1)
        entropies = -(probs * np.log(probs) + (1.0 - probs) * np.log(1.0 - probs)).sum(axis=1)
        return logps, entropies, {"probs": probs, "actions": actions}

    def _head_gradient(self, ctx, dlogp, dentropy):
        probs, actions = ctx["probs"], ctx["actions"]
        dh = dlogp[:, None] * (actions - probs)
        d_ent_dh = np.log((1.0 - probs) / probs) * probs * (1.0 - probs)
        dh += dentropy[:, None] * d_ent_dh
        return dh
