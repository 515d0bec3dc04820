"""The 18-action command set: 9 move directions x shoot / don't shoot.

Index layout is `2 * dir_code + shoot_bit` with direction codes ordered
(stay, N, NE, E, SE, S, SW, W, NW). North is negative y (screen coordinates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Vec2

DIRECTION_NAMES = ("stay", "n", "ne", "e", "se", "s", "sw", "w", "nw")
N_DIRECTIONS = 9
N_ACTIONS = 18

_DIAG = math.sqrt(0.5)
_DIRECTION_VECTORS = (
    Vec2(0.0, 0.0),
    Vec2(0.0, -1.0),
    Vec2(_DIAG, -_DIAG),
    Vec2(1.0, 0.0),
    Vec2(_DIAG, _DIAG),
    Vec2(0.0, 1.0),
    Vec2(-_DIAG, _DIAG),
    Vec2(-1.0, 0.0),
    Vec2(-_DIAG, -_DIAG),
)


@dataclass(frozen=True)
class ActionSpec:
    move_dir: int  # 0..8, see DIRECTION_NAMES
    shoot: bool

    def __post_init__(self) -> None:
        if not 0 <= self.move_dir < N_DIRECTIONS:
            raise ValueError(f"move_dir must be in 0..8, got {self.move_dir}")


def decode_action(index: int) -> ActionSpec:
    if not isinstance(index, int) or isinstance(index, bool):
        raise ValueError(f"action index must be an int, got {index!r}")
    if not 0 <= index < N_ACTIONS:
        raise ValueError(f"action index must be in 0..17, got {index}")
    return ActionSpec(move_dir=index // 2, shoot=bool(index % 2))


def encode_action(spec: ActionSpec) -> int:
    return 2 * spec.move_dir + int(spec.shoot)


def direction_vector(dir_code: int) -> Vec2:
    """Unit movement vector for a direction code (zero vector for `stay`)."""
    return _DIRECTION_VECTORS[dir_code]


def nearest_direction(v: Vec2) -> int:
    """Compass direction code (1..8) whose unit vector best matches v (nonzero)."""
    if v.x == 0.0 and v.y == 0.0:
        raise ValueError("nearest_direction of the zero vector is undefined")
    best_code = 1
    best_dot = -math.inf
    unit = v.normalized()
    for code in range(1, N_DIRECTIONS):
        d = _DIRECTION_VECTORS[code].dot(unit)
        if d > best_dot:
            best_dot = d
            best_code = code
    return best_code


def angle_between(a: Vec2, b: Vec2) -> float:
    """Angle in radians between two nonzero vectors."""
    cos = a.normalized().dot(b.normalized())
    return math.acos(max(-1.0, min(1.0, cos)))
