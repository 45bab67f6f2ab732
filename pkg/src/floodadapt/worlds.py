"""Named worlds shipped with the package.

Shipped worlds are built on demand from pinned generator settings rather
than stored as data files. The synthesis pipeline is deterministic for a
fixed seed, so a small registry of keyword arguments reproduces every
terrain cell, street segment, and trip byte for byte on any machine, and
the package stays free of bundled-data plumbing. `floodadapt synth` can
still materialize any of them to disk when files are wanted.

`basin10` is the default benchmark: ten zones on a 32x32 terrain tile
(5 m cells), roughly 400 street segments, 300 daily trips, and a 20-year
planning horizon (2024-2043). It is sized so that a policy trained for a
minute or two visibly separates from the no-action and random baselines
while full-horizon episodes stay in the hundreds-of-steps-per-second
range.
"""
from __future__ import annotations

from .errors import ConfigError
from .synth import synth_world
from .worldio import World

SHIPPED_WORLDS: dict[str, dict] = {
    "basin10": dict(
        zones=10,
        seed=7,
        end_year=2043,
        grid_shape=(32, 32),
        n_trips=300,
        node_spacing_cells=8,
    ),
}


def shipped_world_names() -> tuple[str, ...]:
    return tuple(sorted(SHIPPED_WORLDS))


def shipped_world(name: str) -> World:
    """Build a registered world; raises ConfigError for unknown names."""
    try:
        kwargs = SHIPPED_WORLDS[name]
    except KeyError:
        known = ", ".join(shipped_world_names())
        raise ConfigError(
            f"unknown shipped world {name!r} (shipped worlds: {known})"
        ) from None
    return synth_world(name=name, **kwargs)
