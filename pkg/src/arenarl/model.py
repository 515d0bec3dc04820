"""Dual-head attention policy network over per-entity-type feature rows.

The observation is encoded as one player row plus masked, distance-ordered
rows per entity type. Type-specific embedding stacks feed a multi-head
attention block (player embedding as query, everything else as keys and
values), a shared trunk, and two linear heads: Q-values and imitation
logits. Both heads read the identical trunk features.
"""

from __future__ import annotations

import dataclasses
import json
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import EncoderLimits, GameConfig, ModelConfig
from .nn.layers import Dense, LayerNorm, LeakyReLU, MultiHeadAttention, Param, kaiming_uniform
from .nn.losses import softmax
from .sim import Observation

PLAYER_FEATURES = 8
ENEMY_FEATURES = 8
BULLET_FEATURES = 6
WALL_FEATURES = 6
N_ACTIONS = 18

CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    """Checkpoint file is malformed or does not match the requested config."""


class ModelError(RuntimeError):
    """Model produced non-finite outputs."""


@dataclass(slots=True)
class EncodedObservation:
    """Fixed-shape feature rows for one observation; masks mark real rows."""

    player: np.ndarray  # (PLAYER_FEATURES,)
    enemies: np.ndarray  # (max_enemies, ENEMY_FEATURES)
    enemy_mask: np.ndarray  # (max_enemies,) bool
    bullets: np.ndarray
    bullet_mask: np.ndarray
    walls: np.ndarray
    wall_mask: np.ndarray


@dataclass(slots=True)
class FeatureBatch:
    """Stacked EncodedObservations with a leading batch axis."""

    player: np.ndarray  # (B, PLAYER_FEATURES)
    enemies: np.ndarray  # (B, Me, ENEMY_FEATURES)
    enemy_mask: np.ndarray
    bullets: np.ndarray
    bullet_mask: np.ndarray
    walls: np.ndarray
    wall_mask: np.ndarray

    @property
    def size(self) -> int:
        return self.player.shape[0]

    @classmethod
    def from_single(cls, obs: EncodedObservation) -> "FeatureBatch":
        return cls.from_list([obs])

    @classmethod
    def from_list(cls, items: list[EncodedObservation]) -> "FeatureBatch":
        return cls(
            player=np.stack([o.player for o in items]),
            enemies=np.stack([o.enemies for o in items]),
            enemy_mask=np.stack([o.enemy_mask for o in items]),
            bullets=np.stack([o.bullets for o in items]),
            bullet_mask=np.stack([o.bullet_mask for o in items]),
            walls=np.stack([o.walls for o in items]),
            wall_mask=np.stack([o.wall_mask for o in items]),
        )

    def gather(self, indices: np.ndarray) -> "FeatureBatch":
        return FeatureBatch(
            player=self.player[indices],
            enemies=self.enemies[indices],
            enemy_mask=self.enemy_mask[indices],
            bullets=self.bullets[indices],
            bullet_mask=self.bullet_mask[indices],
            walls=self.walls[indices],
            wall_mask=self.wall_mask[indices],
        )


def encode_observation(
    obs: Observation, limits: EncoderLimits, config: GameConfig | None = None
) -> EncodedObservation:
    """Normalize an observation into padded, nearest-first feature rows."""
    cfg = config if config is not None else obs.config
    w, h = cfg.arena_width, cfg.arena_height
    diag = cfg.diagonal
    me = obs.me
    px, py = me.position.x, me.position.y

    player = np.array(
        [
            px / w,
            py / h,
            me.facing.x,
            me.facing.y,
            me.health / 3.0,
            me.ammo / cfg.ammo_capacity,
            me.cooldown / cfg.shot_cooldown,
            1.0,
        ]
    )

    enemies = np.zeros((limits.max_enemies, ENEMY_FEATURES))
    enemy_mask = np.zeros(limits.max_enemies, dtype=bool)
    ordered = sorted(obs.others, key=lambda e: me.position.distance_to(e.position))
    for i, e in enumerate(ordered[: limits.max_enemies]):
        d = me.position.distance_to(e.position)
        enemies[i] = (
            e.position.x / w,
            e.position.y / h,
            (e.position.x - px) / w,
            (e.position.y - py) / h,
            e.health / 3.0,
            d / diag,
            0.0,
            0.0,
        )
        enemy_mask[i] = True

    bullets = np.zeros((limits.max_bullets, BULLET_FEATURES))
    bullet_mask = np.zeros(limits.max_bullets, dtype=bool)
    ordered_b = sorted(obs.bullets, key=lambda b: me.position.distance_to(b.position))
    for i, b in enumerate(ordered_b[: limits.max_bullets]):
        d = me.position.distance_to(b.position)
        bullets[i] = (
            b.position.x / w,
            b.position.y / h,
            b.direction.x,
            b.direction.y,
            0.0 if b.owner == me.id else 1.0,
            d / diag,
        )
        bullet_mask[i] = True

    walls = np.zeros((limits.max_walls, WALL_FEATURES))
    wall_mask = np.zeros(limits.max_walls, dtype=bool)
    ordered_w = sorted(obs.walls, key=lambda wl: me.position.distance_to(wl.center))
    for i, wl in enumerate(ordered_w[: limits.max_walls]):
        half = wl.half_extents
        center = wl.center
        walls[i] = (
            center.x / w,
            center.y / h,
            half.x / w,
            half.y / h,
            me.position.distance_to(center) / diag,
            0.0,
        )
        wall_mask[i] = True

    return EncodedObservation(
        player=player,
        enemies=enemies,
        enemy_mask=enemy_mask,
        bullets=bullets,
        bullet_mask=bullet_mask,
        walls=walls,
        wall_mask=wall_mask,
    )


class MLPStack:
    """Chain of Dense -> LayerNorm -> LeakyReLU stages."""

    def __init__(self, name: str, dims: tuple[int, ...], rng: np.random.Generator):
        self.layers: list = []
        for i in range(len(dims) - 1):
            self.layers.append(Dense(f"{name}.{i}.dense", dims[i], dims[i + 1], rng))
            self.layers.append(LayerNorm(f"{name}.{i}.norm", dims[i + 1]))
            self.layers.append(LeakyReLU())

    @property
    def params(self) -> list[Param]:
        return [p for layer in self.layers for p in layer.params]

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(self, caches: list, grad: np.ndarray) -> np.ndarray:
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            grad = layer.backward(cache, grad)
        return grad


class PolicyModel:
    def __init__(
        self,
        model_config: ModelConfig | None = None,
        limits: EncoderLimits | None = None,
        seed: int = 0,
    ):
        self.model_config = model_config if model_config is not None else ModelConfig()
        self.limits = limits if limits is not None else EncoderLimits()
        rng = np.random.default_rng(seed)
        emb = self.model_config.embedding_width
        t1, t2 = self.model_config.trunk_widths

        self.embed_player = MLPStack("embed.player", (PLAYER_FEATURES, emb, emb), rng)
        self.embed_enemy = MLPStack("embed.enemy", (ENEMY_FEATURES, emb, emb), rng)
        self.embed_bullet = MLPStack("embed.bullet", (BULLET_FEATURES, emb, emb), rng)
        self.embed_wall = MLPStack("embed.wall", (WALL_FEATURES, emb, emb), rng)
        # Learned type tags keep entity kinds distinguishable after concatenation.
        self.tag_enemy = Param("tag.enemy", rng.normal(0.0, 0.1, emb))
        self.tag_bullet = Param("tag.bullet", rng.normal(0.0, 0.1, emb))
        self.tag_wall = Param("tag.wall", rng.normal(0.0, 0.1, emb))
        self.attention = MultiHeadAttention(
            "attention", emb, self.model_config.attention_heads, rng
        )
        self.trunk = MLPStack("trunk", (2 * emb, t1, t2), rng)
        self.q_head = Dense("head.q", t2, N_ACTIONS, rng)
        self.imitation_head = Dense("head.imitation", t2, N_ACTIONS, rng)
        # Down-scaled head init keeps initial Q-values small and the imitation
        # distribution near uniform.
        self.q_head.weight.value *= 0.1
        self.imitation_head.weight.value *= 0.1

    # ------------------------------------------------------------------
    # Parameter views
    # ------------------------------------------------------------------

    @property
    def shared_params(self) -> list[Param]:
        return (
            self.embed_player.params
            + self.embed_enemy.params
            + self.embed_bullet.params
            + self.embed_wall.params
            + [self.tag_enemy, self.tag_bullet, self.tag_wall]
            + self.attention.params
            + self.trunk.params
        )

    @property
    def params(self) -> list[Param]:
        return self.shared_params + self.q_head.params + self.imitation_head.params

    @property
    def q_view_params(self) -> list[Param]:
        """Everything the DQN optimizer may update: trunk side plus Q head."""
        return self.shared_params + self.q_head.params

    @property
    def bc_view_params(self) -> list[Param]:
        """Everything the BC optimizer may update: trunk side plus imitation head."""
        return self.shared_params + self.imitation_head.params

    def state_dict(self) -> dict[str, np.ndarray]:
        return {p.name: p.value.copy() for p in self.params}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for p in self.params:
            if p.name not in state:
                raise CheckpointError(f"missing parameter {p.name}")
            if state[p.name].shape != p.value.shape:
                raise CheckpointError(
                    f"shape mismatch for {p.name}: {state[p.name].shape} vs {p.value.shape}"
                )
            p.value[...] = state[p.name]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    # ------------------------------------------------------------------
    # Forward / backward
    # ------------------------------------------------------------------

    def _embed_masked(
        self, stack: MLPStack, tag: Param, rows: np.ndarray, mask: np.ndarray
    ) -> tuple[np.ndarray, tuple]:
        """Run the stack on real rows only; padded rows stay at the bare tag.

        Masked rows never reach the attention softmax, so their embedding
        values are irrelevant; skipping them saves most of the row compute.
        """
        b, m, f = rows.shape
        emb = self.model_config.embedding_width
        flat_mask = mask.reshape(b * m)
        idx = np.flatnonzero(flat_mask)
        out = np.zeros((b * m, emb))
        packed_cache = None
        if idx.size:
            packed, packed_cache = stack.forward(rows.reshape(b * m, f)[idx])
            out[idx] = packed
        out += tag.value
        return out.reshape(b, m, emb), (idx, packed_cache, (b, m))

    def _embed_masked_backward(
        self, stack: MLPStack, tag: Param, cache: tuple, d_rows: np.ndarray
    ) -> None:
        idx, packed_cache, (b, m) = cache
        # Tag was added to every row, but masked rows carry zero gradient.
        tag.grad += d_rows.sum(axis=(0, 1))
        if idx.size:
            flat = d_rows.reshape(b * m, -1)
            stack.backward(packed_cache, flat[idx])

    def forward_trunk(self, fb: FeatureBatch) -> tuple[np.ndarray, dict]:
        player_emb, player_cache = self.embed_player.forward(fb.player)
        enemy_emb, enemy_cache = self._embed_masked(
            self.embed_enemy, self.tag_enemy, fb.enemies, fb.enemy_mask
        )
        bullet_emb, bullet_cache = self._embed_masked(
            self.embed_bullet, self.tag_bullet, fb.bullets, fb.bullet_mask
        )
        wall_emb, wall_cache = self._embed_masked(
            self.embed_wall, self.tag_wall, fb.walls, fb.wall_mask
        )

        rows = np.concatenate((enemy_emb, bullet_emb, wall_emb), axis=1)
        mask = np.concatenate((fb.enemy_mask, fb.bullet_mask, fb.wall_mask), axis=1)
        query = player_emb[:, None, :]
        context, attn_cache = self.attention.forward(query, rows, rows, mask)

        trunk_in = np.concatenate((player_emb, context[:, 0, :]), axis=1)
        trunk_out, trunk_cache = self.trunk.forward(trunk_in)
        cache = {
            "player_cache": player_cache,
            "enemy_cache": enemy_cache,
            "bullet_cache": bullet_cache,
            "wall_cache": wall_cache,
            "attn_cache": attn_cache,
            "trunk_cache": trunk_cache,
            "n_enemies": fb.enemies.shape[1],
            "n_bullets": fb.bullets.shape[1],
            "emb": player_emb.shape[1],
        }
        return trunk_out, cache

    def _backward_trunk(self, cache: dict, grad_trunk_out: np.ndarray) -> None:
        emb = cache["emb"]
        grad_trunk_in = self.trunk.backward(cache["trunk_cache"], grad_trunk_out)
        d_player = grad_trunk_in[:, :emb].copy()
        d_context = grad_trunk_in[:, emb:][:, None, :]

        d_query, d_keys, d_values = self.attention.backward(cache["attn_cache"], d_context)
        d_rows = d_keys + d_values
        ne, nb = cache["n_enemies"], cache["n_bullets"]
        self._embed_masked_backward(
            self.embed_enemy, self.tag_enemy, cache["enemy_cache"], d_rows[:, :ne, :]
        )
        self._embed_masked_backward(
            self.embed_bullet, self.tag_bullet, cache["bullet_cache"], d_rows[:, ne : ne + nb, :]
        )
        self._embed_masked_backward(
            self.embed_wall, self.tag_wall, cache["wall_cache"], d_rows[:, ne + nb :, :]
        )
        d_player += d_query[:, 0, :]
        self.embed_player.backward(cache["player_cache"], d_player)

    def forward_q_batch(self, fb: FeatureBatch) -> tuple[np.ndarray, dict]:
        trunk_out, cache = self.forward_trunk(fb)
        q, head_cache = self.q_head.forward(trunk_out)
        cache["head_cache"] = head_cache
        if not np.isfinite(q).all():
            raise ModelError("Q head produced non-finite values")
        return q, cache

    def backward_q(self, cache: dict, grad_q: np.ndarray) -> None:
        grad_trunk = self.q_head.backward(cache["head_cache"], grad_q)
        self._backward_trunk(cache, grad_trunk)

    def forward_imitation_batch(self, fb: FeatureBatch) -> tuple[np.ndarray, dict]:
        trunk_out, cache = self.forward_trunk(fb)
        logits, head_cache = self.imitation_head.forward(trunk_out)
        cache["head_cache"] = head_cache
        if not np.isfinite(logits).all():
            raise ModelError("imitation head produced non-finite values")
        return logits, cache

    def backward_imitation(self, cache: dict, grad_logits: np.ndarray) -> None:
        grad_trunk = self.imitation_head.backward(cache["head_cache"], grad_logits)
        self._backward_trunk(cache, grad_trunk)

    # ------------------------------------------------------------------
    # Inference conveniences
    # ------------------------------------------------------------------

    def forward_q(self, features: EncodedObservation | FeatureBatch) -> np.ndarray:
        single = isinstance(features, EncodedObservation)
        fb = FeatureBatch.from_single(features) if single else features
        q, _ = self.forward_q_batch(fb)
        return q[0] if single else q

    def forward_imitation(self, features: EncodedObservation | FeatureBatch) -> np.ndarray:
        single = isinstance(features, EncodedObservation)
        fb = FeatureBatch.from_single(features) if single else features
        logits, _ = self.forward_imitation_batch(fb)
        probs = softmax(logits, axis=1)
        return probs[0] if single else probs


def select_greedy(q: np.ndarray) -> int:
    """Argmax action; ties break toward the lowest index."""
    q = np.asarray(q)
    if q.shape != (N_ACTIONS,):
        raise ValueError(f"expected {N_ACTIONS} Q-values, got shape {q.shape}")
    if not np.isfinite(q).all():
        raise ValueError("Q-values must be finite")
    return int(np.argmax(q))


def select_epsilon(q: np.ndarray, epsilon: float, rng: random.Random) -> int:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return rng.randrange(N_ACTIONS)
    return select_greedy(q)


# ----------------------------------------------------------------------
# Checkpoints: npz container with named tensors plus a JSON metadata blob.
# ----------------------------------------------------------------------


def save_model(model: PolicyModel, path: str | Path, fingerprint: str | None = None) -> None:
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "model": dataclasses.asdict(model.model_config),
        "limits": dataclasses.asdict(model.limits),
        "fingerprint": fingerprint,
    }
    arrays = {p.name: p.value for p in model.params}
    meta_bytes = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, __meta__=meta_bytes, **arrays)


def load_model(path: str | Path) -> tuple[PolicyModel, dict]:
    try:
        with np.load(path) as data:
            if "__meta__" not in data:
                raise CheckpointError(f"{path}: missing checkpoint metadata")
            meta = json.loads(bytes(data["__meta__"]).decode())
            arrays = {k: data[k] for k in data.files if k != "__meta__"}
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if meta.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {meta.get('format_version')}"
        )
    model_config = ModelConfig(
        size=meta["model"]["size"],
        embedding_width=meta["model"]["embedding_width"],
        trunk_widths=tuple(meta["model"]["trunk_widths"]),
        attention_heads=meta["model"]["attention_heads"],
    )
    limits = EncoderLimits(**meta["limits"])
    model = PolicyModel(model_config, limits, seed=0)
    model.load_state_dict(arrays)
    return model, meta
