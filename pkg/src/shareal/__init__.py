"""shareal-core: collaborative data-analytics service.

Shared catalog, streaming telemetry, a simulated HPC cluster, facility
scoring, and team chat behind one HTTP gateway.
"""

__version__ = "0.1.0"
