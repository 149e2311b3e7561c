"""Conditional-independence test from a Renyi CMI estimate and its deviation bound.

The null ``X independent of Y given Z`` gives zero CMI.  The test forms the
interval ``estimate +/- (halfwidth + bias_allowance)`` and rejects when the
whole interval lies above zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import bounds
from .conditional import make_cmi_spec, renyi_cmi
from .errors import ConfigError
from .kernels import Kernel

__all__ = ["TestResult", "conditional_independence_test", "max_abs_cmi", "MODES", "MCDIARMID_K"]

REJECT = "reject-CI-hypothesis"
KEEP = "fail-to-reject"
MCDIARMID_K = 4
MODES = {
    "conc": "concentration-only",
    "concentration-only": "concentration-only",
    "conc+bias": "concentration-plus-bias",
    "concentration-plus-bias": "concentration-plus-bias",
}
_CAVEATS = {
    "concentration-only": (
        "interval bounds the deviation from the estimator's mean only; "
        "estimator bias is not controlled, so type-I error is bounded by delta only up to bias"
    ),
    "concentration-plus-bias": "bias allowance is C_B (h^beta + h^(2 beta) + 1/(n h^D)) and is only as good as C_B",
}


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # keep pytest from collecting this class

    decision: str
    cmi_estimate: float
    ci: list
    delta: float
    mode: str
    ci_halfwidth: float
    bias_allowance: float
    caveat: str
    report: dict = field(default_factory=dict)

    @property
    def rejected(self) -> bool:
        return self.decision == REJECT

    def to_dict(self) -> dict:
        return {key: getattr(self, key) for key in self.__dataclass_fields__}


def max_abs_cmi(alpha: float, kappa_min: float, kappa_max: float, dx: int = 1, dy: int = 1, dz: int = 1) -> float:
    """Largest |estimate| the clipped estimator can return: ``kappa_max * sup|f|``."""
    spec = make_cmi_spec(alpha, kappa_min, kappa_max, dx, dy, dz)
    return kappa_max * spec.C_f


def conditional_independence_test(data, alpha: float, delta: float, kappa_min: float, kappa_max: float,
                                  beta: float = 2.0, mode: str = "conc", *, dx: int = 1, dy: int = 1,
                                  dz: int = 1, C_B: float = 1.0, c: float = 1.0, kernel: Optional[Kernel] = None,
                                  h: Optional[float] = None, grid_m: Optional[int] = None, seed: int = 0,
                                  cmi_split: str = "shared") -> TestResult:
    """Test ``X independent of Y given Z`` on rows ``[x | y | z]``."""
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; use 'conc' or 'conc+bias'")
    mode = MODES[mode]
    if not (0.0 < delta < 1.0):
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    rep = renyi_cmi(data, alpha, kappa_min, kappa_max, dx, dy, dz, kernel=kernel, h=h, beta=beta, c=c,
                    grid_m=grid_m, delta=delta, C_B=C_B, seed=seed, cmi_split=cmi_split)
    n_eff = min(rep.n)
    eps = bounds.ci_halfwidth(delta, n_eff, MCDIARMID_K, rep.C_V)
    bias = rep.bias_bound if mode == "concentration-plus-bias" else 0.0
    width = eps + bias
    lo, hi = rep.value - width, rep.value + width
    return TestResult(
        decision=REJECT if lo > 0 else KEEP,
        cmi_estimate=rep.value,
        ci=[lo, hi],
        delta=float(delta),
        mode=mode,
        ci_halfwidth=eps,
        bias_allowance=float(bias),
        caveat=_CAVEATS[mode],
        report=rep.to_dict(),
    )
