"""DDCSieve exceptions."""

from typing import Any


class DDCError(Exception):
    """
    Structured exception for model, solver and estimation operations.

    Usage:
        try:
            vf = solver.solve_infinite(spec, params, kernel)
        except DDCError as e:
            if e.code == "NOT_CONVERGED":
                handle_slow_contraction(e.context["last_residual"])
    """

    _default_messages = {
        "CONFIG_INVALID": "Invalid configuration",
        "DIMENSION_MISMATCH": "Dimension mismatch",
        "NUMERIC_ERROR": "Non-finite value encountered",
        "NOT_CONVERGED": "Iteration did not converge",
        "SOLVER_FAILED": "Model solve failed at grid point",
        "EM_NOT_MONOTONE": "EM log-likelihood decreased",
        "EMPTY_MATRIX": "No cells above the positivity floor",
        "FACTORIZATION_RESIDUAL": "Operator factorization residual above tolerance",
        "EIGENVALUE_COLLISION": "Eigenvalues are not distinct",
        "NOT_INJECTIVE": "Operator is not injective on the grid",
        "UNSUPPORTED_HORIZON": "Operation not available for this horizon",
        "PANEL_INVALID": "Invalid panel",
    }

    # CLI exit code per error family
    numeric_codes = frozenset(
        {
            "NUMERIC_ERROR",
            "NOT_CONVERGED",
            "SOLVER_FAILED",
            "EM_NOT_MONOTONE",
            "EMPTY_MATRIX",
            "FACTORIZATION_RESIDUAL",
            "EIGENVALUE_COLLISION",
            "NOT_INJECTIVE",
        }
    )

    def __init__(self, code: str, message: str | None = None, **context: Any):
        self.code = code
        self.message = message or self._default_messages.get(code, code)
        self.context = context
        detail = ", ".join(f"{k}={v}" for k, v in context.items())
        super().__init__(f"[{code}] {self.message}" + (f" ({detail})" if detail else ""))

    @property
    def is_numeric(self) -> bool:
        return self.code in self.numeric_codes

    def as_dict(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "context": self.context}


class ConvergenceError(DDCError):
    """Fixed-point iteration ran out of iterations."""

    def __init__(self, iterations: int = 0, last_residual: float = float("nan"), message: str | None = None):
        self.iterations = iterations
        self.last_residual = last_residual
        super().__init__(
            "NOT_CONVERGED",
            message,
            iterations=iterations,
            last_residual=last_residual,
        )
