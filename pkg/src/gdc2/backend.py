"""Selection between the compiled kernels and the pure-Python fallback.

The compiled extension (gdc2._kernels) and the pure implementations
produce byte-identical archives; the extension is just fast.  Selection
order: explicit set_backend() call, then the GDC2_BACKEND environment
variable (pure / compiled / auto), then auto (compiled if importable).
"""

from __future__ import annotations

import os

from .errors import ConfigError

_CHOICES = ("auto", "pure", "compiled")
_forced: str | None = None
_cached = None  # (name, module_or_None)


def set_backend(name: str | None) -> None:
    """Force a backend for this process (tests and benchmarks)."""
    global _forced, _cached
    if name is not None and name not in _CHOICES:
        raise ConfigError(f"unknown backend {name!r}, expected one of {_CHOICES}")
    _forced = name
    _cached = None


def _resolve() -> tuple[str, object | None]:
    choice = _forced or os.environ.get("GDC2_BACKEND", "auto")
    if choice not in _CHOICES:
        raise ConfigError(
            f"GDC2_BACKEND={choice!r} not recognised, expected one of {_CHOICES}"
        )
    if choice == "pure":
        return "pure", None
    try:
        from . import _kernels
    except ImportError:
        if choice == "compiled":
            raise ConfigError(
                "compiled backend requested but gdc2._kernels is not built"
            ) from None
        return "pure", None
    return "compiled", _kernels


def kernels():
    """The compiled kernel module, or None when running pure."""
    global _cached
    if _cached is None:
        _cached = _resolve()
    return _cached[1]


def active_backend() -> str:
    global _cached
    if _cached is None:
        _cached = _resolve()
    return _cached[0]
