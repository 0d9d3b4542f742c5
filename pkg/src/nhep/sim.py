"""Time integration with monitors and sign-change event location.

``rhs(t, y)`` returns ``dy/dt``.  Fixed-step RK4 is the default; ``rk45``
delegates to :func:`scipy.integrate.solve_ivp` with tight tolerances and
reports the solution on the same fixed grid.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

EVENT_TIME_TOL = 1e-9
RK45_TOL = 1e-10


class NonFiniteStateError(FloatingPointError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    """``event(y)`` is a scalar whose first sign change is located.

    ``monitors`` are read-only scalar functions of the state evaluated on the
    stored grid.  With ``stop_at_event`` the trajectory ends at the event.
    """

    method: str = "rk4"
    dt: float = 1e-4
    t_end: float = 1.0
    event: Optional[Callable[[np.ndarray], float]] = None
    monitors: Sequence[Callable[[np.ndarray], float]] = ()
    stop_at_event: bool = False
    store_every: int = 1

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if not (self.t_end > 0 and np.isfinite(self.t_end)):
            raise ValueError("t_end must be positive")
        if self.store_every < 1:
            raise ValueError("store_every must be >= 1")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    monitor_values: np.ndarray
    event_time: Optional[float] = None
    event_state: Optional[np.ndarray] = None
    stats: dict = field(default_factory=dict)


def rk4_step(rhs, t, y, h):
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_finite(t, y):
    if not np.all(np.isfinite(y)):
        raise NonFiniteStateError(f"non-finite state at t={t:.6g}: {y}")


def _bisect_event(step_fn, event, t0, y0, t1, g0):
    """Locate the sign change of ``event`` in ``(t0, t1]`` by bisection.

    ``step_fn(t0, y0, h)`` advances the state from the bracket start.
    """
    lo, hi = 0.0, t1 - t0
    y_hi = step_fn(t0, y0, hi)
    while hi - lo > EVENT_TIME_TOL:
        mid = 0.5 * (lo + hi)
        y_mid = step_fn(t0, y0, mid)
        g_mid = event(y_mid)
        if g_mid == 0.0:
            return t0 + mid, y_mid
        if np.sign(g_mid) == np.sign(g0):
            lo = mid
        else:
            hi, y_hi = mid, y_mid
    return t0 + hi, y_hi


def _grid(config):
    n = int(round(config.t_end / config.dt))
    if abs(n * config.dt - config.t_end) > 1e-9 * config.t_end:
        n = int(np.ceil(config.t_end / config.dt))
    return n


def integrate(rhs, state0, config):
    """Integrate from ``t = 0`` to ``config.t_end``."""
    y = np.array(state0, dtype=float)
    _check_finite(0.0, y)
    if config.method == "rk45":
        return _integrate_rk45(rhs, y, config)
    n = _grid(config)
    h = config.dt
    step_fn = lambda t0, y0, hh: rk4_step(rhs, t0, y0, hh)
    times = [0.0]
    states = [y.copy()]
    event_time = event_state = None
    g_prev = config.event(y) if config.event is not None else None
    t = 0.0
    for i in range(1, n + 1):
        h_i = min(h, config.t_end - t) if i == n else h
        y_new = rk4_step(rhs, t, y, h_i)
        t_new = i * h if i < n else config.t_end
        _check_finite(t_new, y_new)
        if config.event is not None and event_time is None:
            g_new = config.event(y_new)
            if g_prev != 0.0 and (g_new == 0.0 or np.sign(g_new) != np.sign(g_prev)):
                event_time, event_state = _bisect_event(step_fn, config.event, t, y, t_new, g_prev)
                if config.stop_at_event:
                    times.append(event_time)
                    states.append(event_state)
                    break
            g_prev = g_new
        t, y = t_new, y_new
        if i % config.store_every == 0 or i == n:
            times.append(t)
            states.append(y.copy())
    return _finish(times, states, config, event_time, event_state, {"steps": i if n else 0})


def _integrate_rk45(rhs, y0, config):
    events = None
    if config.event is not None:
        ev = lambda t, y: config.event(y)
        ev.terminal = config.stop_at_event
        events = [ev]
    n = _grid(config)
    t_eval = np.minimum(np.arange(n + 1) * config.dt, config.t_end)[:: config.store_every]
    if t_eval[-1] != config.t_end:
        t_eval = np.append(t_eval, config.t_end)
    sol = solve_ivp(
        rhs,
        (0.0, config.t_end),
        y0,
        method="RK45",
        t_eval=t_eval,
        rtol=RK45_TOL,
        atol=RK45_TOL,
        first_step=config.dt,
        events=events,
    )
    if sol.status == -1:
        raise NonFiniteStateError(f"RK45 failed: {sol.message}")
    times = list(sol.t)
    states = list(sol.y.T)
    event_time = event_state = None
    if events is not None and len(sol.t_events[0]):
        event_time = float(sol.t_events[0][0])
        event_state = sol.y_events[0][0]
        if config.stop_at_event and (not times or times[-1] < event_time):
            times.append(event_time)
            states.append(event_state)
    for t, y in zip(times, states):
        _check_finite(t, y)
    return _finish(times, states, config, event_time, event_state, {"nfev": sol.nfev})


def _finish(times, states, config, event_time, event_state, stats):
    states = np.array(states)
    monitors = np.array([[float(m(y)) for m in config.monitors] for y in states]).reshape(len(states), -1)
    return Trajectory(
        times=np.array(times),
        states=states,
        monitor_values=monitors,
        event_time=event_time,
        event_state=None if event_state is None else np.array(event_state),
        stats=stats,
    )


@dataclass(frozen=True)
class DriftReport:
    names: tuple
    absolute: np.ndarray
    relative: np.ndarray
    initial: np.ndarray

    def as_dict(self):
        return {
            n: {"absolute": float(a), "relative": float(r), "initial": float(i)}
            for n, a, r, i in zip(self.names, self.absolute, self.relative, self.initial)
        }


def drift_report(trajectory, invariants, names=None, upto=None):
    """Max ``|I(t) - I(0)|`` per invariant and the same divided by ``|I(0)|``.

    ``invariants`` maps a state to a vector of values.  The relative drift
    equals the absolute one where ``I(0) = 0``.  ``upto`` truncates the
    window at that time.
    """
    states = trajectory.states
    if len(states) == 0:
        raise ValueError("empty trajectory")
    if upto is not None:
        states = states[trajectory.times <= upto]
    values = np.array([np.atleast_1d(invariants(y)) for y in states])
    init = values[0]
    absolute = np.max(np.abs(values - init), axis=0)
    scale = np.where(np.abs(init) > 0, np.abs(init), 1.0)
    if names is None:
        names = tuple(f"I{k}" for k in range(values.shape[1]))
    return DriftReport(names=tuple(names), absolute=absolute, relative=absolute / scale, initial=init)
