"""Layered-medium geometry and bookkeeping.

Layer indexing follows the top-down convention: interfaces at depths
d_0 > d_1 > ... > d_{L-1} separate layer l (above d_l) from layer l+1
(below d_l); layers are numbered 0..L.  Every vertical direction tag
carries a sign tau(up) = +1, tau(down) = -1, and the "relevant"
interface of a (layer, direction) pair is the one the field propagates
away from:

    up   in layer l  ->  d_l      (the interface below, l != L)
    down in layer l  ->  d_{l-1}  (the interface above, l != 0)

The bottom layer cannot carry an up-going reaction component and the top
layer cannot carry a down-going one (nothing radiates in from infinity).
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    BoundaryTieError,
    DomainError,
    InadmissibleComponentError,
    ValidationError,
)

MAX_LAYERS = 64


class Dir(Enum):
    UP = "up"
    DOWN = "down"

    @property
    def tau(self):
        return 1.0 if self is Dir.UP else -1.0

    def __repr__(self):
        return self.value


@dataclass(frozen=True)
class InterfaceRow:
    """One matching condition [a G + b dG/dy] = 0 across an interface.

    The (a, b) pair may differ between the upper and the lower side,
    which is how jump conditions such as flux continuity with a density
    contrast are expressed.
    """

    a_upper: complex
    b_upper: complex
    a_lower: complex
    b_lower: complex


@dataclass(frozen=True)
class LayeredMedium:
    """Horizontally layered medium: depths, wavenumbers, interface rows.

    interface_depths : strictly decreasing depths d_0 > ... > d_{L-1}
    wavenumbers      : k_0 .. k_L, one per layer, all positive
    condition_rows   : per interface, exactly two InterfaceRow entries
    """

    interface_depths: tuple
    wavenumbers: tuple
    condition_rows: tuple

    def __post_init__(self):
        depths = tuple(float(d) for d in self.interface_depths)
        ks = tuple(float(k) for k in self.wavenumbers)
        rows = tuple(tuple(r) for r in self.condition_rows)
        object.__setattr__(self, "interface_depths", depths)
        object.__setattr__(self, "wavenumbers", ks)
        object.__setattr__(self, "condition_rows", rows)
        L = len(depths)
        if L < 1:
            raise ValidationError("at least one interface is required")
        if L > MAX_LAYERS:
            raise ValidationError(f"more than {MAX_LAYERS} layers is unsupported")
        if any(depths[i] <= depths[i + 1] for i in range(L - 1)):
            raise ValidationError("interface depths must be strictly decreasing")
        if len(ks) != L + 1:
            raise ValidationError("need exactly L+1 wavenumbers for L interfaces")
        if any(k <= 0 for k in ks):
            raise ValidationError("all wavenumbers must be positive")
        if len(rows) != L or any(len(r) != 2 for r in rows):
            raise ValidationError("need exactly two condition rows per interface")

    @property
    def n_interfaces(self):
        return len(self.interface_depths)

    @property
    def k_max(self):
        return max(self.wavenumbers)

    @property
    def k_min(self):
        return min(self.wavenumbers)


def acoustic(interface_depths, wavenumbers, densities=None):
    """Standard acoustic transmission medium.

    Row 1 enforces continuity of G; row 2 continuity of (1/rho) dG/dy
    with per-layer densities defaulting to 1.
    """
    L = len(interface_depths)
    if densities is None:
        densities = [1.0] * (L + 1)
    if len(densities) != L + 1:
        raise ValidationError("need one density per layer")
    rows = []
    for l in range(L):
        r1 = InterfaceRow(1.0, 0.0, 1.0, 0.0)
        r2 = InterfaceRow(0.0, 1.0 / densities[l], 0.0, 1.0 / densities[l + 1])
        rows.append((r1, r2))
    return LayeredMedium(tuple(interface_depths), tuple(wavenumbers), tuple(rows))


def sound_soft_halfspace(k, depth=0.0):
    """Half-space with G = 0 on the interface seen from above.

    The reaction field above the interface is exactly the negative
    free-space field of the mirror source, the classic image oracle.
    """
    r1 = InterfaceRow(1.0, 0.0, 0.0, 0.0)  # G = 0 from above
    r2 = InterfaceRow(0.0, 0.0, 1.0, 0.0)  # pins the (decoupled) lower field
    return LayeredMedium((depth,), (k, k), ((r1, r2),))


@dataclass(frozen=True)
class ReactionComponentId:
    """Tag (t, s, dir_t, dir_s) selecting one reaction-field integral."""

    t: int
    s: int
    dir_t: Dir
    dir_s: Dir

    def validate(self, L):
        for layer, d, what in ((self.t, self.dir_t, "target"), (self.s, self.dir_s, "source")):
            if not 0 <= layer <= L:
                raise DomainError(f"{what} layer {layer} out of range 0..{L}")
            if layer == 0 and d is not Dir.UP:
                raise InadmissibleComponentError(
                    f"{what} in the top layer must propagate up"
                )
            if layer == L and d is not Dir.DOWN:
                raise InadmissibleComponentError(
                    f"{what} in the bottom layer must propagate down"
                )
        return self

    def __repr__(self):
        arrows = {Dir.UP: "+", Dir.DOWN: "-"}
        return f"u[{self.t}{self.s}]^({arrows[self.dir_t]}{arrows[self.dir_s]})"


@dataclass(frozen=True)
class PolarizedPair:
    """Target point, source point, and the component tag relating them."""

    x1: tuple
    x2: tuple
    id: ReactionComponentId


def layer_of(medium, y):
    """Index of the layer containing height y (ties with depths are errors)."""
    y = float(y)
    for l, d in enumerate(medium.interface_depths):
        if y == d:
            raise BoundaryTieError(f"y={y} lies exactly on interface {l}")
        if y > d:
            return l
    return medium.n_interfaces


def relevant_interface(medium, l, direction):
    """Depth the (layer, direction) pair propagates away from."""
    L = medium.n_interfaces
    if direction is Dir.UP:
        if l == L:
            raise InadmissibleComponentError("up-going field in the bottom layer")
        return medium.interface_depths[l]
    if l == 0:
        raise InadmissibleComponentError("down-going field in the top layer")
    return medium.interface_depths[l - 1]


def admissible_components(t, s, L):
    """All direction combinations for layers (t, s), prohibitions removed."""
    def dirs(layer):
        if layer == 0:
            return (Dir.UP,)
        if layer == L:
            return (Dir.DOWN,)
        return (Dir.UP, Dir.DOWN)

    return [
        ReactionComponentId(t, s, dt, ds) for dt in dirs(t) for ds in dirs(s)
    ]


def _offsets(medium, pair):
    cid = pair.id
    cid.validate(medium.n_interfaces)
    d_t = relevant_interface(medium, cid.t, cid.dir_t)
    d_s = relevant_interface(medium, cid.s, cid.dir_s)
    a = cid.dir_t.tau * (pair.x1[1] - d_t)
    b = cid.dir_s.tau * (pair.x2[1] - d_s)
    return a, b


def polarized_distance(medium, pair):
    """Polarized distance between target x1 and source x2.

    sqrt((x1-x2)^2 + (tau*(y1-d_t) + tau*(y2-d_s))^2); both vertical
    offsets must be positive.  Note it is NOT symmetric in x1, x2.
    """
    a, b = _offsets(medium, pair)
    if not (a > 0 and b > 0):
        raise DomainError(
            f"polarized pair invariant violated: offsets ({a}, {b}) must be > 0"
        )
    return math.hypot(pair.x1[0] - pair.x2[0], a + b)


def polarization_image(medium, cid, x2):
    """Image of the source x2 under the bijective polarization map.

    Keeps the x-coordinate; maps y2 to d_t - tau_t tau_s (y2 - d_s), which
    places the image on the far side of the target's relevant interface so
    that the polarized distance becomes the plain Euclidean distance
    between the target and the image.
    """
    cid.validate(medium.n_interfaces)
    d_t = relevant_interface(medium, cid.t, cid.dir_t)
    d_s = relevant_interface(medium, cid.s, cid.dir_s)
    b = cid.dir_s.tau * (x2[1] - d_s)
    if not b > 0:
        raise DomainError("source must lie on its propagating side")
    return np.array([x2[0], d_t - cid.dir_t.tau * b])


def polarization_preimage(medium, cid, ximg):
    """Inverse of :func:`polarization_image` (the map is affine in y)."""
    cid.validate(medium.n_interfaces)
    d_t = relevant_interface(medium, cid.t, cid.dir_t)
    d_s = relevant_interface(medium, cid.s, cid.dir_s)
    y = d_s + cid.dir_s.tau * cid.dir_t.tau * (d_t - ximg[1])
    return np.array([ximg[0], y])


def polarization_image_batch(medium, cid, xy):
    """Vectorized image map for an (n, 2) array of source points."""
    cid.validate(medium.n_interfaces)
    d_t = relevant_interface(medium, cid.t, cid.dir_t)
    d_s = relevant_interface(medium, cid.s, cid.dir_s)
    b = cid.dir_s.tau * (xy[:, 1] - d_s)
    if not np.all(b > 0):
        raise DomainError("all sources must lie on their propagating side")
    out = xy.copy().astype(float)
    out[:, 1] = d_t - cid.dir_t.tau * b
    return out
