from __future__ import annotations

import math

import numpy as np


def project_frobenius(o: np.ndarray, eps: float) -> np.ndarray:
    """Project ``o`` onto the ball ``{A : ||A||_F^2 <= eps}``.

    Points inside the ball are returned unchanged (same object); points
    outside are rescaled radially so the result has squared norm ``eps``.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    norm_sq = float(np.vdot(o, o))
    if norm_sq <= eps:
        return o
    return o * (math.sqrt(eps) / math.sqrt(norm_sq))
