"""State-contingent day-ahead market toolkit.

Pipeline: ingest an ensemble forecast into a discrete scenario measure,
compute minimal-size Voronoi state partitions, assemble agent bids over the
resulting state-contingent contracts, and clear the market to dual prices
with welfare, budget-balance, and rationality checks.
"""

from . import clearing, errors, market, quantize, scenarios

__version__ = "0.1.0"

__all__ = ["scenarios", "quantize", "market", "clearing", "errors", "__version__"]
