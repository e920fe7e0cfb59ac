"""Shoebox image-source simulator used as the ground-truth oracle.

Reflections are frequency- and angle-independent (one coefficient per wall),
with no air absorption: the simulator exists to give the analysis and
synthesis stages scenes with exactly known geometry, not to be a room
acoustics product. Arrival times are sub-sample exact via windowed-sinc
fractional delays.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .arrays import FoaSignal, MicArrayGeometry
from .dsp import place_fractional_impulses
from .errors import TruncatedResponseWarning
from .hrir import HrirSet
from .signals import BinauralIr, MonoIr, MultichannelIr


@dataclass(frozen=True)
class ShoeboxRoom:
    """Axis-aligned room with per-wall reflection coefficients.

    ``reflection_coefficients`` order: (x=0, x=Lx, y=0, y=Ly, z=0, z=Lz).
    """

    dimensions: np.ndarray
    reflection_coefficients: np.ndarray
    speed_of_sound: float = 343.0
    max_order: int = 10

    def __post_init__(self):
        dims = np.asarray(self.dimensions, dtype=np.float64)
        coeffs = np.asarray(self.reflection_coefficients, dtype=np.float64)
        if dims.shape != (3,) or np.any(dims <= 0):
            raise ValueError("dimensions must be three positive lengths")
        if coeffs.shape != (6,) or np.any(coeffs < 0) or np.any(coeffs > 1):
            raise ValueError("need six wall coefficients in [0, 1]")
        if self.speed_of_sound <= 0:
            raise ValueError("speed_of_sound must be > 0")
        if self.max_order < 0:
            raise ValueError("max_order must be >= 0")
        object.__setattr__(self, "dimensions", dims)
        object.__setattr__(self, "reflection_coefficients", coeffs)


@dataclass(frozen=True)
class Scene:
    """A source and a receiver origin inside a shoebox room.

    ``receiver`` declares what sits at the origin: a microphone array
    geometry, an HRIR set (dummy head), or the string ``"ideal-foa"`` for a
    coincident first-order receiver.
    """

    room: ShoeboxRoom
    source: np.ndarray
    receiver_origin: np.ndarray
    receiver: object = "ideal-foa"

    def __post_init__(self):
        src = np.asarray(self.source, dtype=np.float64)
        origin = np.asarray(self.receiver_origin, dtype=np.float64)
        if src.shape != (3,) or origin.shape != (3,):
            raise ValueError("source and receiver_origin must be 3-vectors")
        for name, p in (("source", src), ("receiver_origin", origin)):
            if np.any(p <= 0) or np.any(p >= self.room.dimensions):
                raise ValueError(f"{name} must lie strictly inside the room")
        if np.allclose(src, origin):
            raise ValueError("source must differ from receiver_origin")
        if not (
            isinstance(self.receiver, (MicArrayGeometry, HrirSet))
            or self.receiver == "ideal-foa"
        ):
            raise ValueError("receiver must be a geometry, an HRIR set, or 'ideal-foa'")
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "receiver_origin", origin)


@dataclass(frozen=True)
class ImageSourceList:
    """Mirror images sorted by arrival time at the receiver origin."""

    positions: np.ndarray  # (k, 3) meters
    amplitudes: np.ndarray  # (k,) wall product / distance
    delays: np.ndarray  # (k,) seconds
    directions: np.ndarray  # (k, 3) unit, receiver -> image
    orders: np.ndarray  # (k,) reflection counts
    receiver_origin: np.ndarray
    speed_of_sound: float

    def __len__(self) -> int:
        return int(self.delays.size)

    @property
    def wall_products(self) -> np.ndarray:
        """Accumulated wall coefficients (amplitude with the 1/r removed)."""
        return self.amplitudes * self.delays * self.speed_of_sound

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["order", "x", "y", "z", "delay_s", "amplitude"])
            for i in range(len(self)):
                x, y, z = self.positions[i]
                writer.writerow(
                    [int(self.orders[i]), f"{x:.9f}", f"{y:.9f}", f"{z:.9f}",
                     f"{self.delays[i]:.9f}", f"{self.amplitudes[i]:.9g}"]
                )


def _axis_images(source_coord: float, length: float, max_order: int) -> tuple:
    """Per-axis image coordinates with wall-hit counts, order <= max_order."""
    coords, hits0, hits1, orders = [], [], [], []
    m_range = max_order // 2 + 2
    for m in range(-m_range, m_range + 1):
        for p in (0, 1):
            order = abs(m - p) + abs(m)
            if order > max_order:
                continue
            coords.append((1 - 2 * p) * source_coord + 2.0 * m * length)
            hits0.append(abs(m - p))
            hits1.append(abs(m))
            orders.append(order)
    return (np.array(coords), np.array(hits0), np.array(hits1), np.array(orders))


def enumerate_images(scene: Scene) -> ImageSourceList:
    """All mirror images of the source up to the room's max_order.

    Amplitude is the product of the wall coefficients along the reflection
    path divided by the travel distance; the direct path has order 0.
    """
    room = scene.room
    per_axis = [
        _axis_images(scene.source[a], room.dimensions[a], room.max_order)
        for a in range(3)
    ]
    cx, h0x, h1x, ox = per_axis[0]
    cy, h0y, h1y, oy = per_axis[1]
    cz, h0z, h1z, oz = per_axis[2]

    order = ox[:, None, None] + oy[None, :, None] + oz[None, None, :]
    keep = order <= room.max_order
    ix, iy, iz = np.nonzero(keep)

    positions = np.stack([cx[ix], cy[iy], cz[iz]], axis=1)
    beta = room.reflection_coefficients
    wall_product = (
        beta[0] ** h0x[ix] * beta[1] ** h1x[ix]
        * beta[2] ** h0y[iy] * beta[3] ** h1y[iy]
        * beta[4] ** h0z[iz] * beta[5] ** h1z[iz]
    )
    offsets = positions - scene.receiver_origin
    distances = np.linalg.norm(offsets, axis=1)
    delays = distances / room.speed_of_sound
    amplitudes = wall_product / distances
    directions = offsets / distances[:, None]
    orders = order[keep]

    sorting = np.lexsort((orders, delays))
    return ImageSourceList(
        positions=positions[sorting],
        amplitudes=amplitudes[sorting],
        delays=delays[sorting],
        directions=directions[sorting],
        orders=orders[sorting],
        receiver_origin=scene.receiver_origin.copy(),
        speed_of_sound=room.speed_of_sound,
    )


def _warn_truncated(count: int, where: str) -> None:
    if count:
        warnings.warn(
            f"{count} image arrivals truncated while rendering {where}",
            TruncatedResponseWarning,
            stacklevel=3,
        )


def render_array_srir(images: ImageSourceList, geometry: MicArrayGeometry,
                      sample_rate: float, length: int) -> MultichannelIr:
    """Open-array SRIR: per capsule, every image lands at its exact
    distance-derived fractional delay with a 1/r amplitude."""
    c = images.speed_of_sound
    wall = images.wall_products
    channels = []
    truncated = 0
    for cap in geometry.positions:
        capsule_pos = images.receiver_origin + cap
        dist = np.linalg.norm(images.positions - capsule_pos, axis=1)
        out = np.zeros(length)
        truncated += place_fractional_impulses(out, dist / c * sample_rate, wall / dist)
        channels.append(MonoIr(out, sample_rate))
    _warn_truncated(truncated, "array SRIR")
    return MultichannelIr(tuple(channels), geometry_id=geometry.name)


def render_foa_srir(images: ImageSourceList, sample_rate: float, length: int) -> FoaSignal:
    """Ideal coincident first-order receiver at the origin (sn3d-mic).

    w collects each image's pressure impulse; x, y, z weight it by the
    toward-image direction components.
    """
    delays = images.delays * sample_rate
    w = np.zeros(length)
    truncated = place_fractional_impulses(w, delays, images.amplitudes)
    dipoles = []
    for axis in range(3):
        ch = np.zeros(length)
        place_fractional_impulses(
            ch, delays, images.amplitudes * images.directions[:, axis]
        )
        dipoles.append(ch)
    _warn_truncated(truncated, "FOA SRIR")
    return FoaSignal(
        w=MonoIr(w, sample_rate),
        x=MonoIr(dipoles[0], sample_rate),
        y=MonoIr(dipoles[1], sample_rate),
        z=MonoIr(dipoles[2], sample_rate),
    )


def render_reference_brir(images: ImageSourceList, hrirs: HrirSet,
                          sample_rate: float, length: int) -> BinauralIr:
    """Nearest-HRIR reference rendering.

    Each image contributes its amplitude at its fractional delay through the
    HRIR pair closest to its direction; the result is the sum, with length
    ``length + hrir_taps - 1``.
    """
    if hrirs.sample_rate != sample_rate:
        raise ValueError(
            f"HRIR sample rate {hrirs.sample_rate} != render rate {sample_rate}"
        )
    matches = hrirs.nearest_indices(images.directions)
    delays = images.delays * sample_rate
    out_len = length + hrirs.length - 1
    left = np.zeros(out_len)
    right = np.zeros(out_len)
    truncated = 0
    for h in np.unique(matches):
        sel = matches == h
        train = np.zeros(length)
        truncated += place_fractional_impulses(train, delays[sel], images.amplitudes[sel])
        left += sps.fftconvolve(train, hrirs.left[h], mode="full")
        right += sps.fftconvolve(train, hrirs.right[h], mode="full")
    _warn_truncated(truncated, "reference BRIR")
    return BinauralIr(MonoIr(left, sample_rate), MonoIr(right, sample_rate))


def scene_to_json_dict(scene: Scene, sample_rate: float, length: int) -> dict:
    """JSON-serializable description of a scene plus render settings."""
    if isinstance(scene.receiver, MicArrayGeometry):
        receiver = {"kind": "array", "name": scene.receiver.name}
    elif isinstance(scene.receiver, HrirSet):
        receiver = {"kind": "hrir"}
    else:
        receiver = {"kind": "ideal-foa"}
    return {
        "room": {
            "dimensions": [float(v) for v in scene.room.dimensions],
            "reflection_coefficients": [
                float(v) for v in scene.room.reflection_coefficients
            ],
            "speed_of_sound": float(scene.room.speed_of_sound),
            "max_order": int(scene.room.max_order),
        },
        "source": [float(v) for v in scene.source],
        "receiver_origin": [float(v) for v in scene.receiver_origin],
        "receiver": receiver,
        "sample_rate": float(sample_rate),
        "length": int(length),
    }


def scene_from_json(path_or_dict, receiver=None) -> tuple[Scene, float, int]:
    """Load a scene description written by :func:`scene_to_json_dict`.

    ``receiver`` overrides the declared receiver object (files can only
    name built-in arrays). Returns (scene, sample_rate, length).
    """
    if isinstance(path_or_dict, dict):
        data = path_or_dict
    else:
        data = json.loads(Path(path_or_dict).read_text())
    room = ShoeboxRoom(
        dimensions=data["room"]["dimensions"],
        reflection_coefficients=data["room"]["reflection_coefficients"],
        speed_of_sound=data["room"].get("speed_of_sound", 343.0),
        max_order=data["room"].get("max_order", 10),
    )
    if receiver is None:
        kind = data.get("receiver", {"kind": "ideal-foa"})["kind"]
        if kind == "array":
            from .arrays import builtin_array

            receiver = builtin_array(data["receiver"].get("name", "om6"))
        elif kind == "ideal-foa":
            receiver = "ideal-foa"
        else:
            raise ValueError(
                "HRIR receivers cannot be loaded from JSON; pass one explicitly"
            )
    scene = Scene(
        room=room,
        source=data["source"],
        receiver_origin=data["receiver_origin"],
        receiver=receiver,
    )
    return scene, float(data.get("sample_rate", 48000.0)), int(data.get("length", 14400))
