"""Focal length slaved to camera distance.

Moving a selfie camera back while keeping the face the same size on the
sensor requires a longer focal length. The coupling anchors magnification at
the eye plane: f * d0 stays proportional to the eye distance as t_z changes.
This script walks the distance range and shows the invariant holding.
"""

import numpy as np

from persview import ReparamContext, halve_distance_init, reparam_focal

ctx = ReparamContext(d0=0.45, f0=950.0, t_z0=0.35)  # a phone-ish close-up

print("camera pulled back from its initial distance, focal slaved:\n")
print(f"{'t_z':>8} {'focal':>10} {'f*d0':>12} {'f0*(d0+tz-tz0)':>16}")
for tz in np.linspace(0.2, 1.4, 7):
    f = reparam_focal(ctx, tz)
    lhs = f * ctx.d0
    rhs = ctx.f0 * (ctx.d0 + tz - ctx.t_z0)
    print(f"{tz:8.2f} {f:10.1f} {lhs:12.4f} {rhs:16.4f}")

print("\nthe magnification product matches on both sides at every distance.")

half = halve_distance_init(ctx.t_z0)
print(f"\ninitialization rule: start the optimizer at half the estimated")
print(f"distance, t_z0 = {ctx.t_z0} -> {half}, focal {reparam_focal(ctx, half):.1f}")

print("\npushing past the eye plane is rejected:")
try:
    reparam_focal(ctx, ctx.t_z0 - ctx.d0)
except Exception as exc:
    print(f"  {type(exc).__name__}: {exc}")
