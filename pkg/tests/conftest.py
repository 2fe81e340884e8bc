from pathlib import Path

import pytest

from chainperf import LayerParams, LayerRates, NodeSpec
from chainperf.qnet import ChainSpec

TABLE1_SERVICE = (
    ("P-CSCF", 0.008),
    ("S-CSCF", 0.0068),
    ("I-CSCF", 0.0054),
    ("HSS", 0.009),
)
TABLE1_THRESHOLDS = (("P-CSCF", 2), ("S-CSCF", 2), ("I-CSCF", 2), ("HSS", 3))


@pytest.fixture(scope="session")
def table1_chain() -> ChainSpec:
    nodes = [NodeSpec(name, s, 1.25) for name, s in TABLE1_SERVICE]
    return ChainSpec.tandem(nodes, alpha_ext=200.0, csd_target=0.3)


@pytest.fixture(scope="session")
def table1_rates() -> LayerRates:
    return LayerRates(
        cnt=LayerParams(500.0, 2.0 / 3600.0),
        dck=LayerParams(1000.0, 5.0 / 3600.0),
        vm=LayerParams(2880.0, 1.0),
        hyp=LayerParams(2880.0, 2.0),
        phy=LayerParams(60000.0, 8.0),
    )


@pytest.fixture(scope="session")
def doc_path() -> Path:
    return Path(__file__).resolve().parent.parent / "chains" / "table1.chain"
