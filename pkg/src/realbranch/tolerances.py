"""Numerical tolerances shared by every module."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    """Central tolerance record.

    Every check in the package reads its threshold from an instance of this
    class, so a run can tighten or loosen them in one place.
    """

    normalized: float = 1e-12
    hermitian: float = 1e-10
    psd: float = 1e-10
    trace: float = 1e-10
    projector: float = 1e-10
    orthonormal: float = 1e-10
    unitarity: float = 1e-10
    # squared-norm floor below which a component counts as zero
    eps_branch: float = 1e-12
    # Schmidt coefficients closer than this are grouped as degenerate
    eps_deg: float = 1e-8
    # Schmidt coefficients below this are dropped before grouping
    schmidt_zero: float = 1e-12
    eps_p: float = 1e-9
    eps_rho: float = 1e-9
    n_stable: int = 3
    ambiguity: float = 1e-9

    def with_overrides(self, **overrides) -> "Tolerances":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise KeyError(f"unknown tolerance(s): {sorted(unknown)}")
        return replace(self, **overrides)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


DEFAULT = Tolerances()
