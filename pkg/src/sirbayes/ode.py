"""SIR dynamics, first-order parameter sensitivities, and a fixed-step RK4 integrator.

States are person counts. Parameters live on the log scale
(c_i0 = ln I(0), c_gamma = ln of the removal rate, c_beta = ln of the
transmissibility) so the underlying quantities stay positive by construction.
The extended system appends, for each free parameter, the sensitivities
(dS/dc_j, dI/dc_j, dR/dc_j) as additional states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is optional
    _njit = None

DEFAULT_STEP = 0.01

FULL_PARAM_NAMES = ("c_i0", "c_gamma", "c_beta")
_CSV_SUFFIX = {"c_i0": "cI0", "c_gamma": "cgamma", "c_beta": "cbeta"}


class PopulationTooSmallError(ValueError):
    """Raised when e^{c_i0} >= P so S(0) would not be positive."""


class NonMonotoneTimesError(ValueError):
    """Raised when a requested output grid is not strictly increasing from t >= 0."""


class NonFiniteStateError(RuntimeError):
    """Raised when the integrator produces a non-finite state."""

    def __init__(self, time, row=None):
        self.time = time
        self.row = row
        at = f"t={time:g}" + ("" if row is None else f", parameter row {row}")
        super().__init__(f"non-finite state encountered at {at}")


@dataclass(frozen=True)
class ParamVector:
    """Log-scale SIR parameters; with fixed_i0=True, c_i0 is pinned to 0 and not inferred."""

    c_i0: float
    c_gamma: float
    c_beta: float
    fixed_i0: bool = False

    def __post_init__(self):
        vals = (self.c_i0, self.c_gamma, self.c_beta)
        if not all(np.isfinite(vals)):
            raise ValueError(f"parameters must be finite, got {vals}")
        if self.fixed_i0 and self.c_i0 != 0.0:
            raise ValueError("fixed_i0 pins c_i0 to 0")

    @property
    def free_names(self) -> tuple[str, ...]:
        return FULL_PARAM_NAMES[1:] if self.fixed_i0 else FULL_PARAM_NAMES

    @property
    def n_free(self) -> int:
        return 2 if self.fixed_i0 else 3

    @property
    def free(self) -> np.ndarray:
        if self.fixed_i0:
            return np.array([self.c_gamma, self.c_beta])
        return np.array([self.c_i0, self.c_gamma, self.c_beta])

    @classmethod
    def from_free(cls, values, fixed_i0=False) -> "ParamVector":
        values = np.asarray(values, dtype=float)
        if fixed_i0:
            if values.shape != (2,):
                raise ValueError("fixed-I0 variant takes (c_gamma, c_beta)")
            return cls(0.0, values[0], values[1], fixed_i0=True)
        if values.shape != (3,):
            raise ValueError("expected (c_i0, c_gamma, c_beta)")
        return cls(values[0], values[1], values[2])


@dataclass
class Trajectory:
    """Time-indexed states (plain 3-vector or extended 3+3k-vector per row)."""

    times: np.ndarray
    states: np.ndarray
    params: ParamVector
    population: float

    @property
    def extended(self) -> bool:
        return self.states.shape[1] > 3

    @property
    def columns(self) -> list[str]:
        cols = ["t", "S", "I", "R"]
        if self.extended:
            for name in self.params.free_names:
                suffix = _CSV_SUFFIX[name]
                cols += [f"dS_d{suffix}", f"dI_d{suffix}", f"dR_d{suffix}"]
        return cols

    def state_block(self, name: str) -> np.ndarray:
        """Series for S, I, R, or a sensitivity column like dI_dcgamma."""
        idx = self.columns.index(name) - 1
        return self.states[:, idx]

    def to_csv(self, path):
        data = np.column_stack([self.times, self.states])
        header = ",".join(self.columns)
        np.savetxt(path, data, fmt="%.12g", delimiter=",", header=header, comments="")


def initial_state(c: ParamVector, population: float) -> np.ndarray:
    """(S, I, R) at t = 0: S = P - e^{c_i0}, I = e^{c_i0}, R = 0."""
    i0 = np.exp(c.c_i0)
    if i0 >= population:
        raise PopulationTooSmallError(
            f"initial infectious count e^{{c_i0}} = {i0:g} must be below P = {population:g}"
        )
    return np.array([population - i0, i0, 0.0])


def initial_extended_state(c: ParamVector, population: float) -> np.ndarray:
    """Extended initial state; only dS/dc_i0 = -e^{c_i0} and dI/dc_i0 = e^{c_i0} are nonzero."""
    y = np.zeros(3 + 3 * c.n_free)
    y[:3] = initial_state(c, population)
    if not c.fixed_i0:
        i0 = np.exp(c.c_i0)
        y[3] = -i0
        y[4] = i0
    return y


def sir_rhs(state, c: ParamVector, population: float) -> np.ndarray:
    """Rates of (S, I, R) in persons/day; the three components sum to zero exactly."""
    s, i = state[0], state[1]
    infection = np.exp(c.c_beta) * s * i / population
    removal = np.exp(c.c_gamma) * i
    return np.array([-infection, infection - removal, removal])


def sir_extended_rhs(state, c: ParamVector, population: float) -> np.ndarray:
    """Rates of the extended state: SIR rates plus the differentiated system.

    Uses the corrected chain rule for the dI/dc_gamma and dR/dc_gamma rates,
    which carry the extra e^{c_gamma} * I term.
    """
    state = np.asarray(state, dtype=float)
    eb_over_p = np.exp(c.c_beta) / population
    eg = np.exp(c.c_gamma)
    out = np.empty_like(state)
    s, i = state[0], state[1]
    infection = eb_over_p * s * i
    out[0] = -infection
    out[1] = infection - eg * i
    out[2] = eg * i
    for j, name in enumerate(c.free_names):
        sj, ij = state[3 + 3 * j], state[4 + 3 * j]
        cross = eb_over_p * (i * sj + s * ij)
        if name == "c_beta":
            cross += infection
        extra_removal = eg * i if name == "c_gamma" else 0.0
        out[3 + 3 * j] = -cross
        out[4 + 3 * j] = cross - eg * ij - extra_removal
        out[5 + 3 * j] = eg * ij + extra_removal
    return out


def constraint_residuals(state, population: float) -> np.ndarray:
    """(S+I+R-P, and per free parameter the sum of its three sensitivities)."""
    state = np.asarray(state, dtype=float)
    n_params = (state.shape[-1] - 3) // 3
    out = np.empty(state.shape[:-1] + (1 + n_params,))
    out[..., 0] = state[..., 0] + state[..., 1] + state[..., 2] - population
    for j in range(n_params):
        block = state[..., 3 + 3 * j : 6 + 3 * j]
        out[..., 1 + j] = block.sum(axis=-1)
    return out


def _check_times(times) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise NonMonotoneTimesError(
            "output times must be strictly increasing and start at t >= 0"
        )
    return times


def _batch_rates(y, eb_over_p, eg, param_names):
    """Vectorized extended/plain rates; y has shape (batch, 3 + 3k)."""
    out = np.empty_like(y)
    s, i = y[:, 0], y[:, 1]
    infection = eb_over_p * s * i
    removal = eg * i
    out[:, 0] = -infection
    out[:, 1] = infection - removal
    out[:, 2] = removal
    for j, name in enumerate(param_names):
        sj, ij = y[:, 3 + 3 * j], y[:, 4 + 3 * j]
        cross = eb_over_p * (i * sj + s * ij)
        if name == "c_beta":
            cross = cross + infection
        extra = removal if name == "c_gamma" else 0.0
        out[:, 3 + 3 * j] = -cross
        out[:, 4 + 3 * j] = cross - eg * ij - extra
        out[:, 5 + 3 * j] = eg * ij + extra
    return out


def integrate_batch(params, population, times, extended=False, step=DEFAULT_STEP):
    """Integrate many parameter vectors at once from t = 0.

    params: sequence of ParamVector sharing the fixed_i0 flag.
    Returns an array of shape (len(params), len(times), state_dim), row order
    matching the input order.
    """
    times = _check_times(times)
    params = list(params)
    if not params:
        raise ValueError("need at least one parameter vector")
    fixed = params[0].fixed_i0
    if any(p.fixed_i0 != fixed for p in params):
        raise ValueError("all parameter vectors must share the fixed_i0 flag")
    names = params[0].free_names if extended else ()
    init = initial_extended_state if extended else initial_state
    y = np.stack([init(p, population) for p in params])
    eb_over_p = np.array([np.exp(p.c_beta) for p in params]) / population
    eg = np.array([np.exp(p.c_gamma) for p in params])

    out = np.empty((y.shape[0], times.size, y.shape[1]))
    t_prev = 0.0
    for k, t in enumerate(times):
        dt = t - t_prev
        if dt > 0:
            n_sub = max(1, int(round(dt / step)))
            h = dt / n_sub
            for _ in range(n_sub):
                k1 = _batch_rates(y, eb_over_p, eg, names)
                k2 = _batch_rates(y + 0.5 * h * k1, eb_over_p, eg, names)
                k3 = _batch_rates(y + 0.5 * h * k2, eb_over_p, eg, names)
                k4 = _batch_rates(y + h * k3, eb_over_p, eg, names)
                y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        finite = np.isfinite(y).all(axis=1)
        if not finite.all():
            raise NonFiniteStateError(t, row=int(np.flatnonzero(~finite)[0]))
        out[:, k, :] = y
        t_prev = t
    return out


def integrate(
    c: ParamVector, population, times, extended=False, step=DEFAULT_STEP
) -> Trajectory:
    """RK4 with fixed internal step from t = 0, sampled at the requested times."""
    states = integrate_batch([c], population, times, extended=extended, step=step)[0]
    return Trajectory(_check_times(times), states, c, population)


# Scalar fast path for samplers that integrate once per proposal. Same RK4
# arithmetic and substep rule as integrate(); only S and I are tracked since
# R feeds back into neither. JIT-compiled when numba is available.
def _infectious_series_py(c_i0, c_gamma, c_beta, population, times, step):
    i = np.exp(c_i0)
    s = population - i
    out = np.empty(times.shape[0])
    if i >= population:
        out[:] = np.nan
        return out
    eb_over_p = np.exp(c_beta) / population
    eg = np.exp(c_gamma)
    t_prev = 0.0
    for k in range(times.shape[0]):
        dt = times[k] - t_prev
        if dt > 0:
            n_sub = max(1, int(round(dt / step)))
            h = dt / n_sub
            for _ in range(n_sub):
                a1s = -eb_over_p * s * i
                a1i = eb_over_p * s * i - eg * i
                s2 = s + 0.5 * h * a1s
                i2 = i + 0.5 * h * a1i
                a2s = -eb_over_p * s2 * i2
                a2i = eb_over_p * s2 * i2 - eg * i2
                s3 = s + 0.5 * h * a2s
                i3 = i + 0.5 * h * a2i
                a3s = -eb_over_p * s3 * i3
                a3i = eb_over_p * s3 * i3 - eg * i3
                s4 = s + h * a3s
                i4 = i + h * a3i
                a4s = -eb_over_p * s4 * i4
                a4i = eb_over_p * s4 * i4 - eg * i4
                s = s + (h / 6.0) * (a1s + 2.0 * a2s + 2.0 * a3s + a4s)
                i = i + (h / 6.0) * (a1i + 2.0 * a2i + 2.0 * a3i + a4i)
        out[k] = i
        t_prev = times[k]
    return out


if _njit is not None:
    _infectious_series = _njit(cache=True, nogil=True)(_infectious_series_py)
else:  # pragma: no cover - exercised only without numba
    _infectious_series = _infectious_series_py


def infectious_series(c: ParamVector, population, times, step=DEFAULT_STEP) -> np.ndarray:
    """I(t, c) at the requested times; NaNs signal an infeasible or diverged run."""
    times = _check_times(times)
    return _infectious_series(
        float(c.c_i0), float(c.c_gamma), float(c.c_beta), float(population), times, float(step)
    )
