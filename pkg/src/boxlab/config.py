"""Process-wide numeric settings.

Exact comparisons never consult these; they only govern float fallbacks
(logs, square roots) and size guards.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Settings:
    tol: float = 1e-9  # relative tolerance for unavoidable float comparisons
    mp_bits: int = 200  # mpmath precision for irrational reference values
    dense_cap: int = 2**24  # max entries of a dense box
    pattern_cap: int = 2**20  # max (z, sign) patterns in a diamond LP sweep


def _from_env() -> Settings:
    s = Settings()
    cap = os.environ.get("BOXLAB_PATTERN_CAP")
    if cap:
        s = replace(s, pattern_cap=int(cap))
    return s


settings = _from_env()


def configure(**kwargs) -> Settings:
    """Replace fields of the global settings; returns the new value."""
    global settings
    settings = replace(settings, **kwargs)
    return settings
