"""
Django DDCSieve - dynamic discrete choice models with continuous unobserved heterogeneity.

Usage:
    from ddcsieve.services import solver, simulator, transition, mixture
    from ddcsieve.gates import Gates, GateError, GateResult

    vf = solver.solve_infinite(spec, params, kernel)
    panel = simulator.simulate_panel(spec, gamma, kernel, betas, periods, init, seed)
    result = mixture.estimate(spec, panel, transition.estimate_frequency(panel))

    # Gates validation
    Gates.row_stochastic(kernel)
    Gates.discount_contraction(spec)
"""


def __getattr__(name):
    if name == "Gates":
        from ddcsieve.gates import Gates

        return Gates
    if name == "GateError":
        from ddcsieve.gates import GateError

        return GateError
    if name == "GateResult":
        from ddcsieve.gates import GateResult

        return GateResult
    if name == "DDCError":
        from ddcsieve.exceptions import DDCError

        return DDCError
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = ["Gates", "GateError", "GateResult", "DDCError"]
__version__ = "0.1.0"
