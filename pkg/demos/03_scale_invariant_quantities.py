"""Scale-invariant quantities on shrinking parabolic cylinders.

F, E, A and D measure velocity, gradient, kinetic energy and pressure on
Q(r) in units that do not change under the Navier-Stokes scaling. For a
smooth flow they all tend to zero as r shrinks.
"""
from nsgeom import criticality as C, fields as F, solver as S
from nsgeom.analytic import AnalyticField

grid = F.GridSpec.cube(16)
run = S.simulate(F.sample(AnalyticField.abc(), grid), S.SolverConfig(dt=0.01, t_end=0.3, snap_every=0.01))

rep = C.type_i_scan(run.snapshots, [(0.0, 0.0, 0.0)], r_max=0.5, levels=3, quad=C.Quadrature(8, 8, 16, 4))
print("    r        F         E         A         D    small?")
for q, flag in zip(rep.table, rep.flags):
    print(f"{q.r:6.4f} {q.F:9.2e} {q.E:9.2e} {q.A:9.2e} {q.D:9.2e}  {flag}")
print("Lambda_q:", rep.lambda_q, " G:", round(rep.G, 4), " critical flux:", round(rep.critical_flux, 4))

# the rescaled flow lam v(x0 + lam x, t0 + lam^2 t) gives the same numbers on Q(r / lam)
abc = AnalyticField.abc()
a = C.scale_quantities(abc, (0.3, 0.1, 0.2), [0.4], 0.1)[0]
b = C.scale_quantities(abc.rescale(2.0, (0.3, 0.1, 0.2), 0.1), (0, 0, 0), [0.2], 0.0)[0]
print("F, E before and after rescaling:", (a.F, a.E), (b.F, b.E))

# an exact solution balances the local energy identity
phi = C.TestFunction((0.0, 0.0, 0.0), 1.0, time_bump=(0.0, 0.3))
print("local energy residual:", C.local_energy_residual(run.snapshots, phi))
