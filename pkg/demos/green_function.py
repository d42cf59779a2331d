"""Layered Green's function basics.

Evaluates G(x, x') in a two-layer acoustic medium, checks it against the
classic image solution on a sound-soft half-space, and verifies the
interface conditions and reciprocity numerically.

Run:  python demos/green_function.py
"""

import numpy as np

from helmlayer import (
    ContourSpec,
    Dir,
    ReactionComponentId,
    acoustic,
    evaluate_component,
    free_space_green,
    green,
    sound_soft_halfspace,
)

spec = ContourSpec(rtol=1e-10)

# --- a two-layer acoustic medium: water-like over a stiffer bottom -------
medium = acoustic(interface_depths=(0.0,), wavenumbers=(1.0, 1.5))

x_src = (0.0, 0.45)  # source in the top layer
print("Field of a unit source at", x_src)
for x in ((0.3, 0.7), (1.2, 0.2), (-0.4, -0.5), (2.0, -1.2)):
    g = green(medium, x, x_src, spec)
    gf = free_space_green(1.0, x, x_src) if x[1] > 0 else complex("nan")
    print(f"  G({x[0]:+.1f},{x[1]:+.1f}) = {g:.6f}   (free-space part {gf:.6f})")

# --- the image oracle: sound-soft half-space ------------------------------
# With G = 0 enforced on the interface, the reaction field above is exactly
# minus the free-space field of the mirrored source.
soft = sound_soft_halfspace(1.0)
upup = ReactionComponentId(0, 0, Dir.UP, Dir.UP)
x, xp = (0.8, 0.9), (-0.2, 0.6)
u_r = evaluate_component(soft, upup, x, xp, spec)
mirror = -free_space_green(1.0, x, (xp[0], -xp[1]))
print("\nSound-soft image check:")
print(f"  quadrature  u^r = {u_r:.12f}")
print(f"  image field     = {mirror:.12f}")
print(f"  relative error  = {abs(u_r - mirror) / abs(mirror):.2e}")

# --- interface conditions --------------------------------------------------
# Both acoustic rows ([G] = 0 and [dG/dy] = 0) hold at y = 0; approach the
# interface from both sides and extrapolate.
h = 5e-3
j = np.arange(1, 6, dtype=float)
V = np.vander(j, 5, increasing=True).T
bv = np.linalg.solve(V, np.eye(5)[0])
gu = np.array([green(medium, (0.5, k * h), x_src, spec) for k in j]) @ bv
gl = np.array([green(medium, (0.5, -k * h), x_src, spec) for k in j]) @ bv
print("\nInterface continuity at (0.5, 0):")
print(f"  from above {gu:.9f}")
print(f"  from below {gl:.9f}")
print(f"  jump       {abs(gu - gl):.2e}")

# --- reciprocity ------------------------------------------------------------
a = green(medium, (0.4, 0.9), (-0.3, -0.6), spec)
b = green(medium, (-0.3, -0.6), (0.4, 0.9), spec)
print("\nReciprocity across the interface:")
print(f"  G(x, x') = {a:.10f}")
print(f"  G(x', x) = {b:.10f}")
print(f"  |difference| = {abs(a - b):.2e}")
