"""DDCSieve services.

One module per stage of the pipeline:
- model, solver, simulator: the structural model
- transition, mixture: the two estimation steps
- population, rank, identification: number of types and the identification lab
- montecarlo: replication harness
- config, io: RunConfig and file formats
"""

from ddcsieve.services import (
    identification,
    mixture,
    model,
    montecarlo,
    population,
    rank,
    simulator,
    solver,
    transition,
)

__all__ = [
    "identification",
    "mixture",
    "model",
    "montecarlo",
    "population",
    "rank",
    "simulator",
    "solver",
    "transition",
]
