"""
DDCSieve signals - public event API.

Emitted signals:
- estimation_completed: Emitted by services.mixture.estimate()
- replication_completed: Emitted by services.montecarlo.run() per replication
"""

from django.dispatch import Signal

# Estimation signals (emitted by services)
estimation_completed = Signal()  # sender=EstimateResult, result=EstimateResult
replication_completed = Signal()  # sender=ReplicationRecord, record=ReplicationRecord
