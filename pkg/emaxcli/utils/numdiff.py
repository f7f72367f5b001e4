"""Newton step shared by the root finders.

Finite-difference derivatives come from ``statsmodels.tools.numdiff.approx_fprime``.
"""
from __future__ import annotations

import numpy as np
from numpy.typing import NDArray


def newton_step(J: NDArray, f: NDArray) -> NDArray:
    """Solve ``J d = -f``; least squares when J is singular."""
    try:
        return -np.linalg.solve(J, f)
    except np.linalg.LinAlgError:
        return -np.linalg.lstsq(J, f, rcond=None)[0]
