"""Neutral-atom Thomas-Fermi problem in dimensionless form.

Solves y'' = y^{3/2}/sqrt(x) with y(0) = 1 and y -> 0 at infinity (the
screening function of the neutral atom) and exposes the unit-charge
potential phi1(r) = y(r/a)/r with a = (3*pi/4)^{2/3}, its Z-scaled form,
and the associated density rho1 = phi1^{3/2}/(3*pi^2).
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator

from .errors import CacheFormatError, CacheVersionError, NumericalError

LENGTH_SCALE_A = (3.0 * math.pi / 4.0) ** (2.0 / 3.0)
SOMMERFELD_COEFFICIENT = 144.0  # coefficient of the exact power solution c/x^3

_SCHEMA_VERSION = 1
_X_START = 1e-6  # series start; y^{3/2}/sqrt(x) is non-smooth at 0
_SLOPE_BRACKET = (1.5, 1.7)
_BISECTION_BUDGET = 200


def series_y(x, yprime0):
    """Near-origin expansion of the screening function and its derivative.

    Terms through x^4; truncation error is O(x^{9/2}), negligible below
    the grid start.
    """
    x = np.asarray(x, dtype=float)
    p = yprime0
    sx = np.sqrt(x)
    y = (
        1.0
        + p * x
        + (4.0 / 3.0) * x * sx
        + (2.0 * p / 5.0) * x * x * sx
        + (1.0 / 3.0) * x**3
        + (3.0 * p * p / 70.0) * x**3 * sx
        + (2.0 * p / 15.0) * x**4
    )
    yp = (
        p
        + 2.0 * sx
        + p * x * sx
        + x * x
        + (3.0 * p * p / 20.0) * x * x * sx
        + (8.0 * p / 15.0) * x**3
    )
    return y, yp


@dataclass(frozen=True)
class TfSolution:
    """Solved dimensionless screening function on a fixed radial grid.

    Grid values beyond ``tail_match_x`` follow the fitted power tail
    c/x^3; the shooting trajectory is stored only where it still tracks
    the decaying separatrix (float64 slope resolution limits that region).
    """

    x_grid: np.ndarray
    y_values: np.ndarray
    yprime_values: np.ndarray
    slope_b: float
    tail_match_x: float
    tail_coefficient: float
    tolerance: float
    length_scale_a: float = LENGTH_SCALE_A
    _interp: PchipInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("x_grid", "y_values", "yprime_values"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        # log-log monotone cubic: positive, monotone, accurate over 6 decades
        interp = PchipInterpolator(np.log(self.x_grid), np.log(self.y_values))
        object.__setattr__(self, "_interp", interp)

    def y(self, x):
        """Screening function at dimensionless radius x > 0 (any regime)."""
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.empty_like(x)
        lo = x < self.x_grid[0]
        hi = x > self.tail_match_x
        mid = ~(lo | hi)
        if np.any(lo):
            out[lo] = series_y(x[lo], -self.slope_b)[0]
        if np.any(mid):
            out[mid] = np.exp(self._interp(np.log(x[mid])))
        if np.any(hi):
            out[hi] = self.tail_coefficient / x[hi] ** 3
        return float(out[0]) if scalar else out

    @property
    def cache_key(self):
        """Hashable identity used by in-process memoization of spectra."""
        return (
            self.slope_b,
            self.tolerance,
            self.tail_match_x,
            float(self.x_grid[-1]),
            len(self.x_grid),
        )


def _tf_rhs(x, state):
    y, yp = state
    # y clipped at 0: trial steps past a zero crossing must stay real
    return (yp, max(y, 0.0) ** 1.5 / math.sqrt(x))


def _shoot(yprime0, tolerance, x_end):
    """Integrate from the series start; terminate on y=0 or on y'=0."""
    y0, yp0 = series_y(_X_START, yprime0)

    def hit_zero(x, state):
        return state[0]

    def turn_up(x, state):
        return state[1]

    hit_zero.terminal = True
    hit_zero.direction = -1
    turn_up.terminal = True
    turn_up.direction = 1
    return solve_ivp(
        _tf_rhs,
        (_X_START, x_end),
        (float(y0), float(yp0)),
        method="DOP853",
        rtol=tolerance,
        atol=tolerance * 1e-3,
        events=(hit_zero, turn_up),
        dense_output=False,
    )


def _classify(sol_ivp):
    """'zero' if the trajectory crossed y=0, 'turn' if y' turned positive."""
    if sol_ivp.t_events[0].size:
        return "zero"
    if sol_ivp.t_events[1].size:
        return "turn"
    return "neither"


def solve_tf(
    tolerance: float = 1e-12,
    x_max: float = 400.0,
    grid_points: int = 4000,
    tail_match_x: float = 80.0,
) -> TfSolution:
    """Solve the screening-function boundary-value problem by shooting.

    Bisection on the initial slope separates trajectories that cross zero
    at finite x from those that turn upward; the separatrix decays to 0.
    Beyond ``tail_match_x`` the stored values switch to the power tail
    c/x^3 with c fitted by continuity.
    """
    if tolerance <= 0.0:
        raise ConfigErrorIfNeeded("tolerance must be positive")
    if x_max <= 4.0 * tail_match_x / 4.0 or x_max <= _X_START:
        raise ConfigErrorIfNeeded("x_max too small for the tail regime")
    if grid_points < 16:
        raise ConfigErrorIfNeeded("grid_points too small")

    x_classify = max(2.0 * x_max, 800.0)
    p_lo, p_hi = -_SLOPE_BRACKET[1], -_SLOPE_BRACKET[0]
    cls_lo = _classify(_shoot(p_lo, tolerance, x_classify))
    cls_hi = _classify(_shoot(p_hi, tolerance, x_classify))
    if cls_lo != "zero" or cls_hi != "turn":
        raise NumericalError(
            f"shooting bracket ({-p_hi}, {-p_lo}) does not enclose the "
            f"separatrix slope (classifications: {cls_lo}, {cls_hi})"
        )

    for _ in range(_BISECTION_BUDGET):
        p_mid = 0.5 * (p_lo + p_hi)
        if p_mid <= p_lo or p_mid >= p_hi:
            break  # bracket at float resolution
        cls = _classify(_shoot(p_mid, tolerance, x_classify))
        if cls == "zero":
            p_lo = p_mid
        elif cls == "turn":
            p_hi = p_mid
        else:
            break  # tracked the separatrix to x_classify: converged
    else:
        raise NumericalError(
            f"slope bisection did not converge within {_BISECTION_BUDGET} "
            f"iterations; bracket ({-p_hi}, {-p_lo})"
        )
    p_star = 0.5 * (p_lo + p_hi)

    x_grid = np.geomspace(_X_START, x_max, grid_points)
    n_ode = int(np.searchsorted(x_grid, tail_match_x, side="right"))
    x_ode = x_grid[:n_ode]
    y0, yp0 = series_y(_X_START, p_star)
    final = solve_ivp(
        _tf_rhs,
        (_X_START, tail_match_x),
        (float(y0), float(yp0)),
        method="DOP853",
        rtol=tolerance,
        atol=tolerance * 1e-3,
        t_eval=np.append(x_ode, tail_match_x),
        dense_output=False,
    )
    if not final.success:
        raise NumericalError(f"final trajectory integration failed: {final.message}")
    y_tm = float(final.y[0, -1])
    c_tail = y_tm * tail_match_x**3

    y_vals = np.empty_like(x_grid)
    yp_vals = np.empty_like(x_grid)
    y_vals[:n_ode] = final.y[0, :n_ode]
    yp_vals[:n_ode] = final.y[1, :n_ode]
    x_tail = x_grid[n_ode:]
    y_vals[n_ode:] = c_tail / x_tail**3
    yp_vals[n_ode:] = -3.0 * c_tail / x_tail**4

    return TfSolution(
        x_grid=x_grid,
        y_values=y_vals,
        yprime_values=yp_vals,
        slope_b=-p_star,
        tail_match_x=float(tail_match_x),
        tail_coefficient=c_tail,
        tolerance=float(tolerance),
    )


def ConfigErrorIfNeeded(msg):  # local import cycle avoidance is not needed; keep simple
    from .errors import ConfigError

    return ConfigError(msg)


def phi1(sol: TfSolution, r):
    """Unit-charge mean-field potential phi1(r) = y(r/a)/r, total on r > 0."""
    r = np.asarray(r, dtype=float)
    x = r / sol.length_scale_a
    return sol.y(x) / r


def phi_z(sol: TfSolution, z: float, r):
    """Charge-Z potential via the exact scaling z^{4/3} * phi1(z^{1/3} r)."""
    zr = np.asarray(r, dtype=float) * z ** (1.0 / 3.0)
    return z ** (4.0 / 3.0) * phi1(sol, zr)


def rho1(sol: TfSolution, r):
    """Unit-charge electron density phi1^{3/2}/(3 pi^2)."""
    return phi1(sol, r) ** 1.5 / (3.0 * math.pi**2)


def save_solution(sol: TfSolution, path) -> None:
    """Write the solution cache atomically (temp file + rename)."""
    payload = {
        "schema_version": _SCHEMA_VERSION,
        "tolerance": sol.tolerance,
        "slope_b": sol.slope_b,
        "length_scale_a": sol.length_scale_a,
        "tail_match_x": sol.tail_match_x,
        "tail_coefficient": sol.tail_coefficient,
        "x_grid": sol.x_grid.tolist(),
        "y_values": sol.y_values.tolist(),
        "yprime_values": sol.yprime_values.tolist(),
    }
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            json.dump(payload, handle)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


_REQUIRED_KEYS = (
    "schema_version",
    "tolerance",
    "slope_b",
    "tail_match_x",
    "tail_coefficient",
    "x_grid",
    "y_values",
    "yprime_values",
)


def load_solution(path) -> TfSolution:
    """Read a solution cache written by :func:`save_solution`."""
    try:
        with open(path, "r") as handle:
            payload = json.load(handle)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CacheFormatError(f"unreadable solution cache {path!r}: {exc}") from exc
    if not isinstance(payload, dict):
        raise CacheFormatError(f"solution cache {path!r} is not a mapping")
    version = payload.get("schema_version")
    if version != _SCHEMA_VERSION:
        raise CacheVersionError(
            f"unsupported cache schema_version {version!r} (expected {_SCHEMA_VERSION})"
        )
    missing = [key for key in _REQUIRED_KEYS if key not in payload]
    if missing:
        raise CacheFormatError(f"solution cache {path!r} missing keys: {missing}")
    arrays = {}
    for key in ("x_grid", "y_values", "yprime_values"):
        arrays[key] = np.asarray(payload[key], dtype=float)
    if not (arrays["x_grid"].shape == arrays["y_values"].shape == arrays["yprime_values"].shape):
        raise CacheFormatError(f"solution cache {path!r} has inconsistent array lengths")
    return TfSolution(
        x_grid=arrays["x_grid"],
        y_values=arrays["y_values"],
        yprime_values=arrays["yprime_values"],
        slope_b=float(payload["slope_b"]),
        tail_match_x=float(payload["tail_match_x"]),
        tail_coefficient=float(payload["tail_coefficient"]),
        tolerance=float(payload["tolerance"]),
        length_scale_a=float(payload.get("length_scale_a", LENGTH_SCALE_A)),
    )
