"""Stream function exploration for axisymmetric flow.

Starting near the origin of the meridian plane, the exploration walks to the
axis either radially or along a level set of psi, switching with hysteresis
on |d_r psi|. Along the way psi changes by at most 3 C1 r0, which bounds
|psi(r0, z0)| since psi vanishes on the axis.
"""
import numpy as np

from nsgeom import axisym as X

C1 = C2 = 11.0
eps = 1 / (100 * C2)
r0, z0 = 0.6 * eps, 0.1 * eps

rng = np.random.default_rng(3)
psi = X.random_banded_stream(rng, C1, C2, r0, z0)
print("slope condition margin:", psi.slope_excess(C1, C2, 1.2 * r0, z0 - 2 * r0, z0 + 2 * r0))

tr = X.explore_level_set(psi, (r0, z0), C1, C2)
print(f"|psi(r0, z0)| = {abs(tr.psi_start):.3e} <= 3 C1 r0 = {tr.bound:.3e}: {tr.passed}")
print(f"{len(tr.points)} points, {len(tr.switches)} mode switches, ends at {tr.final}")
for s in tr.switches[:4]:
    print(f"  switch to mode ({s['to']}) at r = {s['r']:.3e}, z = {s['z']:.3e}")

# the same machinery on a field: v_z = 2 (1 - r^2) e^{-r^2} sin z, v_r = -r e^{-r^2} cos z
r = np.linspace(0, 1.5, 31)
z = np.linspace(-1, 1, 21)
e = lambda rr: np.exp(-rr**2)
m = X.MeridianField.from_functions(
    lambda rr, zz: -rr * e(rr) * np.cos(zz), lambda rr, zz: 0 * rr,
    lambda rr, zz: 2 * (1 - rr**2) * e(rr) * np.sin(zz), r, z,
    dz={2: lambda rr, zz: 2 * (1 - rr**2) * e(rr) * np.cos(zz)})
sf = X.stream_function(m)
print("stream function at (1, 0.5):", sf.value(1.0, 0.5), "exact:", np.exp(-1) * np.sin(0.5))
# on the axis the velocity is purely vertical, so no cone around e_3 of gap 0.1 fits
cone = X.velocity_cone_check(m, 0.1, 0.5)
print(f"velocity cone (delta 0.1, M 0.5) passes: {cone.passed}, worst |v_z|/|v| = {cone.worst_ratio:.3f}")
