"""Hand-tool calibration: wrapped angle arithmetic, controller-to-camera
offsets, grip misalignment correction, and the little pose algebra the
tracking rig needs.

Angles are degrees throughout. Every angle that leaves this module is
normalized into (-180, 180], with +180 chosen over -180 so each heading has
exactly one representation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DEFAULT_DOWN_OFFSET_MM",
    "DEFAULT_FORWARD_OFFSET_MM",
    "Pose",
    "CalibrationOffset",
    "ToolFrame",
    "normalize_angle",
    "angle_difference",
    "target_controller_pose",
    "camera_correction",
    "apply_correction",
    "alignment_residual",
    "apply_misalignment",
    "save_calibration",
    "load_calibration",
]

# Grip-to-tip offset of the physical hand tool, in the tool's own frame.
DEFAULT_DOWN_OFFSET_MM = 20.0
DEFAULT_FORWARD_OFFSET_MM = 50.0

_AXIS_VECTORS = {
    "+x": (1.0, 0.0, 0.0),
    "-x": (-1.0, 0.0, 0.0),
    "+y": (0.0, 1.0, 0.0),
    "-y": (0.0, -1.0, 0.0),
    "+z": (0.0, 0.0, 1.0),
    "-z": (0.0, 0.0, -1.0),
}


def normalize_angle(angle_deg: float) -> float:
    """Wrap an angle into (-180, 180]; 180 and -180 both normalize to +180."""
    a = float(angle_deg)
    if not math.isfinite(a):
        raise ValueError("angle must be finite")
    return 180.0 - ((180.0 - a) % 360.0)


def angle_difference(a_deg: float, b_deg: float) -> float:
    """Shortest signed difference a - b, wrapped into (-180, 180]."""
    return normalize_angle(float(a_deg) - float(b_deg))


def _vec3(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have exactly 3 components")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Pose:
    """A tracked position (mm) and Euler orientation (degrees)."""

    position: np.ndarray
    orientation_deg: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "position"))
        wrapped = np.array(
            [normalize_angle(a) for a in np.asarray(self.orientation_deg, dtype=np.float64).reshape(-1)]
        )
        object.__setattr__(self, "orientation_deg", _vec3(wrapped, "orientation_deg"))


@dataclass(frozen=True)
class CalibrationOffset:
    """Additive pose correction: millimetres and wrapped degrees."""

    position_offset: np.ndarray
    orientation_offset_deg: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "position_offset", _vec3(self.position_offset, "position_offset")
        )
        wrapped = np.array(
            [
                normalize_angle(a)
                for a in np.asarray(self.orientation_offset_deg, dtype=np.float64).reshape(-1)
            ]
        )
        object.__setattr__(
            self, "orientation_offset_deg", _vec3(wrapped, "orientation_offset_deg")
        )


@dataclass(frozen=True)
class ToolFrame:
    """Which world directions the gripped tool's 'down' and 'forward' point at.

    Axis labels are one of +x -x +y -y +z -z. Down and forward must be
    different axes (a sign flip of the same axis is still the same axis).
    """

    down: str
    forward: str

    def __post_init__(self):
        for label in (self.down, self.forward):
            if label not in _AXIS_VECTORS:
                raise ValueError(
                    f"unknown axis label {label!r}; use one of {sorted(_AXIS_VECTORS)}"
                )
        if self.down[1] == self.forward[1]:
            raise ValueError("down and forward must use different axes")

    @property
    def down_vector(self) -> np.ndarray:
        return np.array(_AXIS_VECTORS[self.down])

    @property
    def forward_vector(self) -> np.ndarray:
        return np.array(_AXIS_VECTORS[self.forward])


def target_controller_pose(tracked: Pose, offset: CalibrationOffset) -> Pose:
    """Where the controller should sit once the offset is applied."""
    return Pose(
        position=tracked.position + offset.position_offset,
        orientation_deg=[
            normalize_angle(a + d)
            for a, d in zip(tracked.orientation_deg, offset.orientation_offset_deg)
        ],
    )


def camera_correction(measured: Pose, reference: Pose) -> CalibrationOffset:
    """The additive correction that moves a measured pose onto the reference."""
    return CalibrationOffset(
        position_offset=reference.position - measured.position,
        orientation_offset_deg=[
            angle_difference(r, m)
            for r, m in zip(reference.orientation_deg, measured.orientation_deg)
        ],
    )


def apply_correction(pose: Pose, correction: CalibrationOffset) -> Pose:
    return target_controller_pose(pose, correction)


def alignment_residual(a: Pose, b: Pose) -> tuple[float, float]:
    """(euclidean position distance, largest wrapped per-axis angle gap)."""
    pos = float(np.linalg.norm(a.position - b.position))
    ang = max(
        abs(angle_difference(x, y))
        for x, y in zip(a.orientation_deg, b.orientation_deg)
    )
    return pos, ang


def apply_misalignment(
    grip_position,
    frame: ToolFrame,
    down_mm: float = DEFAULT_DOWN_OFFSET_MM,
    forward_mm: float = DEFAULT_FORWARD_OFFSET_MM,
) -> np.ndarray:
    """Tracked grip position -> working tip position.

    The tool tip sits down_mm along the tool's down direction and forward_mm
    along its forward direction from the gripped tracking point.
    """
    p = _vec3(grip_position, "grip_position")
    return p + float(down_mm) * frame.down_vector + float(forward_mm) * frame.forward_vector


def save_calibration(path, offset: CalibrationOffset) -> None:
    payload = {
        "position_offset_mm": [float(v) for v in offset.position_offset],
        "orientation_offset_deg": [float(v) for v in offset.orientation_offset_deg],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_calibration(path) -> CalibrationOffset:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        pos = payload["position_offset_mm"]
        ang = payload["orientation_offset_deg"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: not a calibration file") from exc
    return CalibrationOffset(position_offset=pos, orientation_offset_deg=ang)
