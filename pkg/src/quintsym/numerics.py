"""Periodic pseudo-spectral integration of the family with monitors for the
constants of motion H0..H4.

The spatial operator uses 2/3-rule dealiasing on every product; time
stepping uses the Dormand-Prince 5(4) pair from scipy with a driver loop
that samples monitors at fixed output times and aborts cleanly.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import tomli
from scipy.integrate import RK45

from . import expr as E
from .expr import Expr, Param, Trans, Var
from .parse import parse_expr

__all__ = [
    "SimConfig", "SimState", "DriftSeries", "SimulationAborted", "ConfigError",
    "spectral_diff", "evaluate_rhs", "integrate", "monitor_functionals",
    "load_config", "write_csv", "MONITORS",
]

MONITORS = ("H0", "H1", "H2", "H3", "H4")
_PARAMS = ("p1", "p3", "beta", "q0", "q1", "q2")


class ConfigError(ValueError):
    """Invalid simulation configuration."""


class SimulationAborted(RuntimeError):
    def __init__(self, msg, state, series):
        super().__init__(msg)
        self.state, self.series = state, series


def evaluate_on_grid(e: Expr, x: np.ndarray, params: Mapping[str, float]) -> np.ndarray:
    """Vectorized numeric value of an expression in ``x`` and parameters."""
    out = np.zeros_like(x, dtype=float)
    for mono, c in e.terms():
        term = np.full_like(x, float(c), dtype=float)
        for a, k in mono:
            if isinstance(a, Var):
                if a.name != "x":
                    raise ConfigError(f"initial data may only depend on x, not {a.name}")
                val = x
            elif isinstance(a, Param):
                if a.name not in params:
                    raise ConfigError(f"initial data uses unknown parameter {a.name!r}")
                val = params[a.name]
            elif isinstance(a, Trans):
                arg = evaluate_on_grid(a.arg, x, params)
                val = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "ln": np.log, "sqrt": np.sqrt}[a.fn](arg)
            else:
                raise ConfigError(f"initial data cannot contain {a!r}")
            kv = k if type(k) is int else float(evaluate_on_grid(k, np.zeros(1), params)[0])
            term = term * np.power(val, kv)
        out = out + term
    return out


@dataclass
class SimConfig:
    params: Mapping[str, float]
    N: int = 128
    L: float = 2 * math.pi
    t_end: float = 0.01
    tol: float = 1e-8
    u0: str = "1 + 1/10*cos(x)"
    monitors: Sequence[str] = ("H0", "H1")
    sigma: float | None = None
    n_out: int = 10
    max_steps: int = 2_000_000
    min_step: float = 1e-14

    def __post_init__(self):
        if self.N < 16 or self.N & (self.N - 1):
            raise ConfigError("N must be a power of two and at least 16")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if not (self.L > 0 and self.tol > 0 and self.n_out >= 1):
            raise ConfigError("L, tol and n_out must be positive")
        missing = [p for p in _PARAMS if p not in self.params]
        if missing:
            raise ConfigError(f"missing parameters: {', '.join(missing)}")
        bad = [m for m in self.monitors if m not in MONITORS]
        if bad:
            raise ConfigError(f"unknown monitors: {', '.join(bad)}")
        if "H4" in self.monitors and (self.sigma is None or self.sigma == 0):
            raise ConfigError("H4 needs a nonzero sigma")
        if float(self.params.get("h", 1.0)) <= 0:
            raise ConfigError("h must be positive")
        u = self.initial()
        if not np.all(np.isfinite(u)):
            raise ConfigError("initial data is not finite")
        if self._needs_positive() and np.any(u <= 0):
            raise ConfigError("initial data must be strictly positive for the requested monitors")

    def _needs_positive(self) -> bool:
        if "H2" in self.monitors:
            return True
        return "H4" in self.monitors and float(self.sigma) != int(self.sigma)

    def grid(self) -> np.ndarray:
        return np.arange(self.N) * (self.L / self.N)

    def initial(self) -> np.ndarray:
        try:
            e = parse_expr(self.u0)
        except ValueError as exc:
            raise ConfigError(f"cannot parse initial data: {exc}") from None
        with np.errstate(all="ignore"):
            return evaluate_on_grid(e, self.grid(), self.params)


@dataclass
class SimState:
    t: float
    u: np.ndarray
    L: float

    @property
    def N(self):
        return len(self.u)

    def spectrum(self) -> np.ndarray:
        return np.fft.rfft(self.u)


@dataclass
class DriftSeries:
    monitors: list[str]
    t: list[float] = field(default_factory=list)
    values: dict[str, list[float]] = field(default_factory=dict)

    def append(self, t: float, vals: Mapping[str, float]):
        if self.t and t <= self.t[-1]:
            raise ValueError("time stamps must increase")
        self.t.append(t)
        for m in self.monitors:
            self.values.setdefault(m, []).append(vals[m])

    def drift(self, m: str) -> np.ndarray:
        v = np.asarray(self.values[m])
        return np.abs(v - v[0]) / max(1.0, abs(v[0]))

    def max_drift(self, m: str) -> float:
        return float(self.drift(m).max())


# --------------------------------------------------------------------------
# spatial operator

class _Spectral:
    def __init__(self, N: int, L: float):
        self.N, self.L = N, L
        k = np.fft.rfftfreq(N, d=L / N) * 2 * math.pi
        self.ik = 1j * k
        # 2/3 rule on integer wavenumbers
        m = np.arange(len(k))
        self.mask = (m <= N // 3).astype(float)
        self.powers = np.stack([self.ik ** j for j in range(6)])

    def derivatives(self, u_hat: np.ndarray, orders=6) -> np.ndarray:
        return np.fft.irfft(self.powers[:orders] * (self.mask * u_hat), n=self.N, axis=-1)

    def project(self, f: np.ndarray) -> np.ndarray:
        return self.mask * np.fft.rfft(f, axis=-1)


def spectral_diff(values: np.ndarray, order: int, L: float = 2 * math.pi) -> np.ndarray:
    """Derivative of periodic samples via Fourier multipliers ``(ik)^order``."""
    values = np.asarray(values, dtype=float)
    if not 0 <= order <= 5:
        raise ValueError("order must be between 0 and 5")
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite input")
    n = len(values)
    k = np.fft.rfftfreq(n, d=L / n) * 2 * math.pi
    mult = (1j * k) ** order
    if n % 2 == 0 and order % 2 == 1:
        mult[-1] = 0.0  # Nyquist mode has no odd derivative
    return np.fft.irfft(mult * np.fft.rfft(values), n=n)


def _rhs_hat(sp: _Spectral, u_hat: np.ndarray, p: Mapping[str, float]) -> np.ndarray:
    h = float(p.get("h", 1.0))
    d = sp.derivatives(u_hat)
    u, ux, uxx, u3, u4, u5 = d
    flux = p["p1"] * u * u + h * h * p["p3"] * (u * uxx + p["beta"] * ux * ux)
    quint = h ** 4 * (p["q0"] * u * u5 + p["q1"] * ux * u4 + p["q2"] * uxx * u3)
    return sp.ik * sp.project(flux) + sp.project(quint)


def evaluate_rhs(state: SimState, params: Mapping[str, float]) -> np.ndarray:
    """Right-hand side of the family on the periodic grid (dealiased)."""
    if not np.all(np.isfinite(state.u)):
        raise ValueError("non-finite state")
    sp = _Spectral(state.N, state.L)
    out = np.fft.irfft(_rhs_hat(sp, np.fft.rfft(state.u), params), n=state.N)
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite right-hand side")
    return out


def monitor_functionals(state: SimState, monitors: Iterable[str], sigma: float | None = None) -> dict[str, float]:
    """Trapezoid-rule values of H0..H4 on the periodic grid."""
    u = state.u
    dx = state.L / state.N
    out = {}
    for m in monitors:
        if m == "H0":
            f = u
        elif m == "H1":
            f = u * u
        elif m == "H2":
            if np.any(u <= 0):
                raise ValueError("H2 needs u > 0")
            f = u * np.log(np.abs(u))
        elif m == "H3":
            f = spectral_diff(u, 1, state.L) ** 2
        elif m == "H4":
            if sigma is None or sigma == 0:
                raise ValueError("H4 needs a nonzero sigma")
            if float(sigma) != int(sigma) and np.any(u <= 0):
                raise ValueError("H4 with fractional sigma needs u > 0")
            f = u ** sigma
        else:
            raise ValueError(f"unknown monitor {m!r}")
        out[m] = float(np.sum(f) * dx)
    return out


# --------------------------------------------------------------------------
# time integration

def integrate(config: SimConfig) -> tuple[SimState, DriftSeries]:
    """Advance to ``t_end`` and record monitors at ``n_out`` equal intervals.

    Raises :class:`SimulationAborted` (carrying the partial series) on step
    size underflow or a non-finite state.
    """
    sp = _Spectral(config.N, config.L)
    params = dict(config.params)
    u0 = config.initial()
    series = DriftSeries(list(config.monitors))
    state = SimState(0.0, u0, config.L)
    series.append(0.0, monitor_functionals(state, config.monitors, config.sigma))

    def f(_t, y):
        return np.fft.irfft(_rhs_hat(sp, np.fft.rfft(y), params), n=config.N)

    solver = RK45(f, 0.0, u0, config.t_end, rtol=config.tol, atol=config.tol, first_step=None)
    outputs = list(np.linspace(0.0, config.t_end, config.n_out + 1)[1:])
    steps = 0
    while outputs:
        msg = solver.step()
        steps += 1
        if solver.status == "failed" or (solver.step_size is not None and solver.step_size < config.min_step):
            raise SimulationAborted(f"step size underflow at t = {solver.t:.6g}: {msg}", state, series)
        if not np.all(np.isfinite(solver.y)):
            raise SimulationAborted(f"non-finite state at t = {solver.t:.6g}", state, series)
        if steps > config.max_steps:
            raise SimulationAborted(f"step budget exhausted at t = {solver.t:.6g}", state, series)
        if outputs[0] <= solver.t or solver.status == "finished":
            dense = solver.dense_output()
            while outputs and (outputs[0] <= solver.t or solver.status == "finished"):
                tout = outputs.pop(0)
                y = solver.y if tout >= solver.t else dense(tout)
                sample = SimState(float(tout), np.asarray(y, dtype=float), config.L)
                try:
                    values = monitor_functionals(sample, config.monitors, config.sigma)
                except ValueError as exc:
                    raise SimulationAborted(f"monitor failed at t = {tout:.6g}: {exc}", state, series) from None
                state = sample
                series.append(state.t, values)
    state = SimState(float(solver.t), np.asarray(solver.y, dtype=float), config.L)
    series.steps = steps
    return state, series


# --------------------------------------------------------------------------
# configuration and output

def load_config(path: str | Path) -> SimConfig:
    """Read a TOML simulation config (see the README for the schema)."""
    try:
        data = tomli.loads(Path(path).read_text())
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_dict(data)


def _number(v, name):
    if isinstance(v, bool):
        raise ConfigError(f"{name} must be a number")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            e = parse_expr(v)
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}") from None
        if e.is_const():
            return float(e.as_const())
    raise ConfigError(f"{name} must be a number or a rational string, got {v!r}")


def config_from_dict(data: Mapping) -> SimConfig:
    sim = dict(data.get("simulation", {}))
    raw = data.get("parameters")
    if not isinstance(raw, Mapping):
        raise ConfigError("config needs a [parameters] table")
    params = {k: _number(v, k) for k, v in raw.items()}
    known = {"N", "L", "t_end", "tol", "u0", "monitors", "sigma", "n_out", "max_steps", "min_step"}
    extra = set(sim) - known
    if extra:
        raise ConfigError(f"unknown simulation keys: {', '.join(sorted(extra))}")
    kw = {}
    for key in ("L", "t_end", "tol", "sigma", "min_step"):
        if key in sim:
            kw[key] = _number(sim[key], key)
    for key in ("N", "n_out", "max_steps"):
        if key in sim:
            if not isinstance(sim[key], int) or isinstance(sim[key], bool):
                raise ConfigError(f"{key} must be an integer")
            kw[key] = sim[key]
    if "u0" in sim:
        kw["u0"] = str(sim["u0"])
    if "monitors" in sim:
        kw["monitors"] = tuple(sim["monitors"])
    try:
        return SimConfig(params=params, **kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def write_csv(series: DriftSeries, path: str | Path) -> None:
    """``t,H0,...,H4,drift_H0,...``; monitors not requested are left empty."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *MONITORS, *(f"drift_{m}" for m in MONITORS)])
        drifts = {m: series.drift(m) for m in series.monitors}
        for i, t in enumerate(series.t):
            vals = [repr(series.values[m][i]) if m in series.values else "" for m in MONITORS]
            dr = [repr(float(drifts[m][i])) if m in drifts else "" for m in MONITORS]
            w.writerow([repr(t), *vals, *dr])
