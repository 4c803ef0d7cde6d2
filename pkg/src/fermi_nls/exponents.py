"""Regularity exponents for the density Strichartz estimates and the solution space."""
from __future__ import annotations

from dataclasses import dataclass

BOUNDARY_GAP = 0.05
ETA_DEFAULT = 0.05


def check_alpha(d: int, alpha: float) -> None:
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    if d == 1 and alpha < 0:
        raise ValueError(f"alpha must be >= 0 in d=1, got {alpha}")
    if d >= 2 and not alpha > (d - 1) / 4:
        raise ValueError(f"alpha must exceed (d-1)/4 = {(d - 1) / 4:g} in d={d}, got {alpha}")


def alpha1_of(d: int, alpha: float, gap: float = BOUNDARY_GAP) -> tuple[float, str]:
    """Density regularity alpha_1 and the regime it comes from.

    Regimes: 'one_dim' (alpha_1 = alpha), 'middle' ((d-1)/4 < alpha < (d-1)/2,
    alpha_1 = 2 alpha - (d-1)/2), 'boundary' (alpha = (d-1)/2, any alpha_1 below
    (d-1)/2; we take (d-1)/2 - gap) and 'high' (alpha > (d-1)/2, alpha_1 = alpha).
    """
    check_alpha(d, alpha)
    if d == 1:
        return float(alpha), "one_dim"
    half = (d - 1) / 2
    if abs(alpha - half) < 1e-12:
        return half - gap, "boundary"
    if alpha < half:
        return 2 * alpha - half, "middle"
    return float(alpha), "high"


def eta_of(d: int, alpha: float, eta: float = ETA_DEFAULT) -> float:
    """Loss exponent in the density part of the solution norm: positive only for d=3, alpha=1."""
    if d == 3 and abs(alpha - 1.0) < 1e-12:
        return eta
    return 0.0


@dataclass(frozen=True)
class ExponentConfig:
    d: int
    alpha: float
    alpha1: float
    eta: float
    regime: str = ""

    def __post_init__(self):
        check_alpha(self.d, self.alpha)
        ref, _ = alpha1_of(self.d, self.alpha)
        if self.alpha1 > ref + 1e-12 and not (self.d >= 2 and abs(self.alpha - (self.d - 1) / 2) < 1e-12
                                             and self.alpha1 < (self.d - 1) / 2):
            raise ValueError(f"alpha1={self.alpha1} exceeds the admissible value {ref} for "
                             f"d={self.d}, alpha={self.alpha}")

    @classmethod
    def resolve(cls, d: int, alpha: float) -> "ExponentConfig":
        a1, regime = alpha1_of(d, alpha)
        return cls(d, float(alpha), a1, eta_of(d, alpha), regime)

    def as_dict(self) -> dict:
        return {"d": self.d, "alpha": self.alpha, "alpha1": self.alpha1, "eta": self.eta,
                "regime": self.regime}
