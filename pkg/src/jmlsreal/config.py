"""Run-wide tolerances and pipeline knobs."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .errors import ValidationError


@dataclass(frozen=True)
class RunConfig:
    """Tolerances and options shared by the identification pipeline.

    eps_rank: relative singular-value cutoff for all rank decisions.
    ridge: optional Tikhonov term added to the regression Gram matrix
        (default off; raises SingularGram instead of regularizing silently).
    pinned_selection: optional explicit (rows, cols) Hankel selection for
        reproducibility across sample sizes.
    """

    eps_rank: float = 1e-8
    stability_margin: float = 1e-10
    pd_tol: float = 1e-10
    residual_cap: float = 1e-8
    ridge: float = 0.0
    pinned_selection: object | None = None
    max_riccati_iter: int = 100_000
    riccati_tol: float = 1e-10
    min_letter_count: int = 10
    threads: int = 0

    def __post_init__(self):
        for name in ("eps_rank", "stability_margin", "pd_tol", "residual_cap"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.ridge < 0:
            raise ValidationError("ridge must be nonnegative")

    def as_report(self) -> dict:
        d = asdict(self)
        d.pop("pinned_selection")
        return d
