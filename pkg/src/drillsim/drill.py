"""Drill scripts and sphere removal.

A drill script is a plain-text timeline of bur states. Replaying it against a
volume removes every sphere whose center comes within the bur radius of the
bur tip while drilling is active; an inactive bur may touch without cutting.
Removal is the only mutation a volume undergoes (single writer; no
concurrent drilling on one volume).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _fast
from .volume import SpherePackVolume

__all__ = [
    "DrillStep",
    "DrillScript",
    "RemovalLog",
    "parse_drill_script",
    "load_drill_script",
    "save_drill_script",
    "apply_drill_step",
    "replay",
]


@dataclass(frozen=True)
class DrillStep:
    t: float
    position: np.ndarray        # bur tip, world coordinates
    orientation_deg: np.ndarray  # euler angles; spherical bur, kept for audit
    bur_radius: float
    active: bool

    def __post_init__(self):
        p = np.asarray(self.position, dtype=np.float64).reshape(3)
        o = np.asarray(self.orientation_deg, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(o))):
            raise ValueError("drill step pose must be finite")
        if not (np.isfinite(self.bur_radius) and self.bur_radius > 0):
            raise ValueError("bur radius must be positive")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation_deg", o)


@dataclass(frozen=True)
class DrillScript:
    steps: tuple[DrillStep, ...]

    def __post_init__(self):
        steps = tuple(self.steps)
        for a, b in zip(steps, steps[1:]):
            if not (b.t > a.t):
                raise ValueError(
                    f"drill script timestamps must be strictly increasing "
                    f"({a.t!r} followed by {b.t!r})")
        object.__setattr__(self, "steps", steps)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)


def parse_drill_script(text: str) -> DrillScript:
    """Parse script lines: t x y z rx ry rz radius active. '#' starts a comment."""
    steps = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if len(tok) != 9:
            raise ValueError(f"line {lineno}: expected 9 fields, got {len(tok)}")
        try:
            t = float(tok[0])
            pos = [float(v) for v in tok[1:4]]
            ori = [float(v) for v in tok[4:7]]
            radius = float(tok[7])
            active = tok[8]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
        if active not in ("0", "1"):
            raise ValueError(f"line {lineno}: active flag must be 0 or 1")
        try:
            steps.append(DrillStep(t, pos, ori, radius, active == "1"))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    try:
        return DrillScript(tuple(steps))
    except ValueError as exc:
        raise ValueError(f"drill script: {exc}") from exc


def load_drill_script(path) -> DrillScript:
    with open(path) as f:
        return parse_drill_script(f.read())


def save_drill_script(script: DrillScript, path) -> None:
    lines = ["# t x y z rx ry rz radius active"]
    for s in script:
        vals = [s.t, *s.position, *s.orientation_deg, s.bur_radius]
        lines.append(" ".join(repr(float(v)) for v in vals)
                     + f" {1 if s.active else 0}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def apply_drill_step(volume: SpherePackVolume, step: DrillStep) -> int:
    """Remove spheres whose center lies within the bur radius of the tip.

    Returns the number of spheres newly removed; inactive steps remove none.
    Removing again with the same step is a no-op (idempotent).
    """
    if not step.active:
        return 0
    return int(_fast.remove_in_ball(
        volume.centers, volume.removed,
        float(step.position[0]), float(step.position[1]), float(step.position[2]),
        float(step.bur_radius) ** 2))


@dataclass(frozen=True)
class RemovalLog:
    times: np.ndarray
    removed_per_step: np.ndarray
    cumulative: np.ndarray

    @property
    def total_removed(self) -> int:
        return int(self.cumulative[-1]) if self.cumulative.size else 0


def replay(volume: SpherePackVolume, script: DrillScript) -> RemovalLog:
    """Apply every step of the script in order, recording removal counts."""
    times = np.array([s.t for s in script], dtype=np.float64)
    removed = np.zeros(len(script), dtype=np.int64)
    for i, step in enumerate(script):
        removed[i] = apply_drill_step(volume, step)
    return RemovalLog(times=times, removed_per_step=removed,
                      cumulative=np.cumsum(removed))
