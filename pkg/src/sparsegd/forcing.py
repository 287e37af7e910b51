"""Built-in body forces for the experiment harness.

All forcings accept an (m, dim) point array or a single point, plus the
time, and return matching shapes. The rotational drives ramp up over the
first time unit and stay constant afterwards.
"""

from __future__ import annotations

import numpy as np

FORCING_NAMES = ("paper_rotational", "box_rotational", "zero")


def _as_points(points):
    arr = np.asarray(points, dtype=float)
    single = arr.ndim == 1
    return (np.atleast_2d(arr), single)


def rotational_origin(points, t):
    """Counter-clockwise rotational force about the z-axis, centered at the
    origin and vanishing on the unit circle x^2 + y^2 = 1."""
    pts, single = _as_points(points)
    x, y = pts[:, 0], pts[:, 1]
    mag = min(t, 1.0) * (1.0 - x**2 - y**2)
    out = np.zeros_like(pts)
    out[:, 0] = -4.0 * y * mag
    out[:, 1] = 4.0 * x * mag
    return out[0] if single else out


def rotational_box(points, t):
    """The rotational drive recentred to the unit box.

    Uses xh = 2x - 1, yh = 2y - 1 and clamps the radial profile at zero, so
    the force vanishes on and outside the inscribed cylinder; in particular
    it is zero on all vertical box faces.
    """
    pts, single = _as_points(points)
    xh = 2.0 * pts[:, 0] - 1.0
    yh = 2.0 * pts[:, 1] - 1.0
    mag = min(t, 1.0) * np.clip(1.0 - xh**2 - yh**2, 0.0, None)
    out = np.zeros_like(pts)
    out[:, 0] = -4.0 * yh * mag
    out[:, 1] = 4.0 * xh * mag
    return out[0] if single else out


def zero_forcing(points, t):
    pts, single = _as_points(points)
    out = np.zeros_like(pts)
    return out[0] if single else out


_BUILTIN = {
    "paper_rotational": rotational_origin,
    "box_rotational": rotational_box,
    "zero": zero_forcing,
}


def get_forcing(name):
    """Look up a builtin forcing callable by name."""
    try:
        return _BUILTIN[name]
    except KeyError:
        raise ValueError(f"unknown forcing {name!r}; choose from {FORCING_NAMES}") from None


def builtin_forcing(name, point, t):
    """Evaluate the named builtin forcing at a point (or point array)."""
    return get_forcing(name)(point, t)
