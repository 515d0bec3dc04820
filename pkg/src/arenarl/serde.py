"""JSON-friendly encoding of simulation values, shared by datasets and the
play-server protocol.

Datasets use the compact array forms (fast to parse at 100k-sample scale);
the play-server protocol uses the keyed dict forms (self-describing for
browser clients).
"""

from __future__ import annotations

from .geometry import Vec2
from .sim import Bullet, EntityState, Wall

# Array layout: [id, kind, x, y, fx, fy, health, ammo, cooldown, reload].
def entity_to_list(e: EntityState) -> list:
    return [
        e.id, e.kind, e.position.x, e.position.y, e.facing.x, e.facing.y,
        e.health, e.ammo, e.cooldown, e.reload_timer,
    ]


def entity_from_list(v: list) -> EntityState:
    return EntityState(
        id=v[0], kind=v[1], position=Vec2(v[2], v[3]), facing=Vec2(v[4], v[5]),
        health=v[6], ammo=v[7], cooldown=v[8], reload_timer=v[9],
    )


# Array layout: [x, y, dx, dy, owner, speed].
def bullet_to_list(b: Bullet) -> list:
    return [b.position.x, b.position.y, b.direction.x, b.direction.y, b.owner, b.speed]


def bullet_from_list(v: list) -> Bullet:
    return Bullet(position=Vec2(v[0], v[1]), direction=Vec2(v[2], v[3]), owner=v[4], speed=v[5])


def entity_to_dict(e: EntityState) -> dict:
    return {
        "id": e.id,
        "kind": e.kind,
        "x": e.position.x,
        "y": e.position.y,
        "fx": e.facing.x,
        "fy": e.facing.y,
        "health": e.health,
        "ammo": e.ammo,
        "cooldown": e.cooldown,
        "reload": e.reload_timer,
    }


def entity_from_dict(d: dict) -> EntityState:
    return EntityState(
        id=d["id"],
        kind=d["kind"],
        position=Vec2(d["x"], d["y"]),
        facing=Vec2(d["fx"], d["fy"]),
        health=d["health"],
        ammo=d["ammo"],
        cooldown=d["cooldown"],
        reload_timer=d["reload"],
    )


def bullet_to_dict(b: Bullet) -> dict:
    return {
        "x": b.position.x,
        "y": b.position.y,
        "dx": b.direction.x,
        "dy": b.direction.y,
        "owner": b.owner,
        "speed": b.speed,
    }


def bullet_from_dict(d: dict) -> Bullet:
    return Bullet(
        position=Vec2(d["x"], d["y"]),
        direction=Vec2(d["dx"], d["dy"]),
        owner=d["owner"],
        speed=d["speed"],
    )


def wall_to_list(w: Wall) -> list[float]:
    return [w.min_corner.x, w.min_corner.y, w.max_corner.x, w.max_corner.y]


def wall_from_list(values: list[float]) -> Wall:
    x0, y0, x1, y1 = values
    return Wall(Vec2(x0, y0), Vec2(x1, y1))
