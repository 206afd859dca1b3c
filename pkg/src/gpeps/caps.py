"""Memory budget for dense objects, counted in complex amplitudes."""

from __future__ import annotations

import os

DEFAULT_MAX_AMPLITUDES = 2**26
ENV_VAR = "GPEPS_MAX_AMPLITUDES"


def max_amplitudes(override: int | None = None) -> int:
    """Resolve the amplitude cap: explicit override > env var > default."""
    if override is not None:
        return int(override)
    env = os.environ.get(ENV_VAR)
    if env:
        return int(env)
    return DEFAULT_MAX_AMPLITUDES
