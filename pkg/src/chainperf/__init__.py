"""Performability analysis of chained containerized services.

Queueing-network delay analysis (qnet), greedy container allocation
(alloc), stochastic reward net availability models (srn, deploy) and
redundancy-configuration search (search), behind the chainperf CLI.
"""

from .alloc import AllocationResult, optcnt, stability_floor
from .chaindoc import ChainDocument, load
from .deploy import (DeploymentConfig, LayerParams, LayerRates,
                     chain_availability, cost, leading_nines)
from .qnet import ChainSpec, NodeSpec, csd, erlang_c, wait_mgc, wait_mmc
from .search import SearchParams, optsearchchain, srneval

__version__ = "0.1.0"

__all__ = [
    "AllocationResult", "ChainDocument", "ChainSpec", "DeploymentConfig",
    "LayerParams", "LayerRates", "NodeSpec", "SearchParams", "__version__",
    "chain_availability", "cost", "csd", "erlang_c", "leading_nines", "load",
    "optcnt", "optsearchchain", "srneval", "stability_floor", "wait_mgc",
    "wait_mmc",
]
