"""Fixed-step RK4 reference integrator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import CoordinateSystem, DomainError, compile_exprs
from .geometry import HamiltonianSystem, VectorField, dynamics_field


class IntegrationError(RuntimeError):
    pass


@dataclass
class Trajectory:
    params: np.ndarray
    states: np.ndarray
    chart: CoordinateSystem
    h: float | None
    method: str

    def __len__(self):
        return len(self.params)

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.chart.index(name)]

    def at(self, s: float) -> np.ndarray:
        """Linear interpolation between samples (exact at grid points)."""
        return np.array([np.interp(s, self.params, self.states[:, j]) for j in range(self.states.shape[1])])


def integrate_field(
    v: VectorField, x0, t_span: tuple[float, float], h: float, method: str = "rk4"
) -> Trajectory:
    t0, t1 = map(float, t_span)
    if not h > 0:
        raise ValueError("step size must be positive")
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    x = np.asarray(x0, dtype=float)
    if x.shape != (v.chart.dim,):
        raise ValueError(f"initial point must have {v.chart.dim} coordinates")
    rhs = compile_exprs(v.components, v.chart.names)

    def f(s, y):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                return np.asarray(rhs(y), dtype=float)
        except DomainError as exc:
            raise IntegrationError(f"evaluation failed at t={s:.12g}: {exc}") from exc

    nsteps = int(np.floor((t1 - t0) / h + 1e-9))
    params = [t0]
    states = [x.copy()]
    s = t0
    k = 0
    while True:
        target = t0 + (k + 1) * h if k < nsteps else t1
        step = target - s
        if step <= 1e-12 * max(1.0, abs(t1)):
            break
        k1 = f(s, x)
        k2 = f(s + step / 2, x + step / 2 * k1)
        k3 = f(s + step / 2, x + step / 2 * k2)
        k4 = f(s + step, x + step * k3)
        x = x + step * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        if not np.all(np.isfinite(x)):
            raise IntegrationError(f"trajectory left the finite range at t={target:.12g}")
        # the parameter takes the same update as a unit-speed coordinate, so t == s bitwise
        s = s + step * 6.0 / 6
        params.append(s)
        states.append(x.copy())
        k += 1
        if k > nsteps:
            break
    return Trajectory(np.array(params), np.array(states), v.chart, h, method)


def integrate(sys: HamiltonianSystem, x0, t_span, h: float) -> Trajectory:
    return integrate_field(dynamics_field(sys), x0, t_span, h)


@dataclass
class DriftReport:
    max_deviation: float
    profile: np.ndarray


def monitor(sys: HamiltonianSystem, f, traj: Trajectory) -> DriftReport:
    f = sys.geometry.scalar(f)
    fn = compile_exprs((f,), traj.chart.names)
    vals = np.array([fn(x)[0] for x in traj.states])
    dev = np.abs(vals - vals[0])
    return DriftReport(float(dev.max()), dev)
