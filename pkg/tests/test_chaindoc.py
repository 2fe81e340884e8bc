import numpy as np
import pytest

from chainperf import chaindoc
from chainperf.deploy import COLOCATED, HOMOGENEOUS
from chainperf.errors import SchemaError

MINIMAL = """
nodes:
  - {name: A, mean_service_time_s: 0.01, cv: 1.0}
  - {name: B, mean_service_time_s: 0.02, cv: 0.5}
routing: tandem
alpha_ext_per_s: 50.0
csd_target_s: 0.5
availability_target: 0.999
layers:
  cnt: {mttf_h: 500.0, mttr_s: 2.0}
  dck: {mttf_h: 1000.0, mttr_s: 5.0}
  vm: {mttf_h: 2880.0, mttr_h: 1.0}
  hyp: {mttf_h: 2880.0, mttr_h: 2.0}
  phy: {mttf_h: 60000.0, mttr_h: 8.0}
"""


def test_parse_reference_document(doc_path):
    doc = chaindoc.load(doc_path)
    chain = doc.chain
    assert chain.names == ("P-CSCF", "S-CSCF", "I-CSCF", "HSS")
    assert [n.mean_service_time for n in chain.nodes] == [0.008, 0.0068, 0.0054, 0.009]
    assert all(n.cv == 1.25 for n in chain.nodes)
    assert chain.alpha_ext == 200.0
    assert chain.external_arrivals[0] == 200.0
    assert chain.routing[0, 1] == 1.0 and chain.routing[3].sum() == 0.0
    assert chain.csd_target == 0.3
    assert chain.c_max == 10
    assert doc.availability_target == 0.99999
    assert doc.thresholds == (("P-CSCF", 2), ("S-CSCF", 2), ("I-CSCF", 2), ("HSS", 3))
    # Second-based repair times arrive converted to hours.
    assert doc.rates.cnt.mttr_h == pytest.approx(2.0 / 3600.0)
    assert doc.rates.dck.mttr_h == pytest.approx(5.0 / 3600.0)
    assert doc.rates.phy.mttf_h == 60000.0
    assert len(doc.deployments) == 16
    assert doc.search.pair == ("I-CSCF", "HSS")
    assert doc.search.max_nrs_per_node == 4

    star_h = doc.deployment("C*_H")
    assert star_h.deployment_type == HOMOGENEOUS
    assert star_h.node_nrs == (
        ("P-CSCF", (1, 1)), ("S-CSCF", (1, 1)), ("I-CSCF", (1, 1)), ("HSS", (1, 2)))
    star_c = doc.deployment("C*_C")
    assert star_c.deployment_type == COLOCATED
    assert star_c.pair == ("I-CSCF", "HSS")
    assert star_c.pair_nrs == ((2, 3),)
    assert star_c.node_nrs == (("P-CSCF", (1, 1)), ("S-CSCF", (1, 1)))
    # Omitted pair members read as zero containers on that side.
    c2 = doc.deployment("C_2C")
    assert c2.pair_nrs == ((0, 2), (1, 3), (2, 3))
    with pytest.raises(SchemaError):
        doc.deployment("C_9Z")


def test_round_trip_is_stable(doc_path):
    doc = chaindoc.load(doc_path)
    text = chaindoc.dump(doc)
    again = chaindoc.parse(text)
    assert chaindoc.canonical_dict(again) == chaindoc.canonical_dict(doc)
    assert chaindoc.dump(again) == text


def test_minimal_document_defaults():
    doc = chaindoc.parse(MINIMAL)
    assert doc.chain.c_max == 10
    assert doc.chain.propagation_delay == 0.0
    assert doc.thresholds is None
    assert doc.deployments == ()
    assert doc.search.max_containers_per_nr == 6
    assert doc.search.pair is None
    # A scalar external rate lands on the first node.
    assert doc.chain.external_arrivals == pytest.approx([50.0, 0.0])


def test_alpha_list_form():
    text = MINIMAL.replace("alpha_ext_per_s: 50.0", "alpha_ext_per_s: [30.0, 20.0]")
    doc = chaindoc.parse(text)
    assert doc.chain.external_arrivals == pytest.approx([30.0, 20.0])
    bad = MINIMAL.replace("alpha_ext_per_s: 50.0", "alpha_ext_per_s: [30.0]")
    with pytest.raises(SchemaError, match="alpha_ext_per_s"):
        chaindoc.parse(bad)
    negative = MINIMAL.replace("alpha_ext_per_s: 50.0", "alpha_ext_per_s: [30.0, -1.0]")
    with pytest.raises(SchemaError, match="alpha_ext_per_s"):
        chaindoc.parse(negative)


def test_explicit_routing_matrix():
    text = MINIMAL.replace("routing: tandem", "routing: [[0.0, 0.6], [0.2, 0.0]]")
    doc = chaindoc.parse(text)
    assert doc.chain.routing == pytest.approx(np.array([[0.0, 0.6], [0.2, 0.0]]))
    bad_shape = MINIMAL.replace("routing: tandem", "routing: [[0.0, 0.6]]")
    with pytest.raises(SchemaError, match="routing"):
        chaindoc.parse(bad_shape)
    bad_row = MINIMAL.replace("routing: tandem", "routing: [[0.0, 0.6], [0.2]]")
    with pytest.raises(SchemaError, match=r"routing\[1\]"):
        chaindoc.parse(bad_row)
    # Row sums above one fail ChainSpec validation, surfaced as SchemaError.
    heavy = MINIMAL.replace("routing: tandem", "routing: [[0.0, 0.9], [0.9, 0.9]]")
    with pytest.raises(SchemaError, match="sums to"):
        chaindoc.parse(heavy)


def test_unknown_keys_are_named():
    with pytest.raises(SchemaError, match=r"nodes\[0\]\.bogus: unknown key"):
        chaindoc.parse(MINIMAL.replace("cv: 1.0", "cv: 1.0, bogus: 3"))
    with pytest.raises(SchemaError, match=r"layers\.cnt\.spares: unknown key"):
        chaindoc.parse(MINIMAL.replace("mttr_s: 2.0", "mttr_s: 2.0, spares: 1"))
    with pytest.raises(SchemaError, match="document.extra: unknown key"):
        chaindoc.parse(MINIMAL + "\nextra: 1\n")


def test_missing_fields_are_named():
    with pytest.raises(SchemaError, match=r"nodes\[1\]\.cv: missing required field"):
        chaindoc.parse(MINIMAL.replace("mean_service_time_s: 0.02, cv: 0.5",
                                       "mean_service_time_s: 0.02"))
    with pytest.raises(SchemaError, match="csd_target_s: missing required field"):
        chaindoc.parse(MINIMAL.replace("csd_target_s: 0.5\n", ""))
    with pytest.raises(SchemaError, match=r"layers\.hyp"):
        chaindoc.parse(MINIMAL.replace("  hyp: {mttf_h: 2880.0, mttr_h: 2.0}\n", ""))


def test_mttr_units_are_exclusive():
    both = MINIMAL.replace("mttr_h: 1.0", "mttr_h: 1.0, mttr_s: 3600.0")
    with pytest.raises(SchemaError, match="exactly one of mttr_s or mttr_h"):
        chaindoc.parse(both)
    neither = MINIMAL.replace("{mttf_h: 2880.0, mttr_h: 1.0}", "{mttf_h: 2880.0}")
    with pytest.raises(SchemaError, match="exactly one of mttr_s or mttr_h"):
        chaindoc.parse(neither)


def test_value_validation():
    with pytest.raises(SchemaError, match="mean_service_time_s: must be > 0"):
        chaindoc.parse(MINIMAL.replace("mean_service_time_s: 0.01", "mean_service_time_s: 0"))
    with pytest.raises(SchemaError, match="availability_target"):
        chaindoc.parse(MINIMAL.replace("availability_target: 0.999",
                                       "availability_target: 1.0"))
    with pytest.raises(SchemaError, match="expected a number"):
        chaindoc.parse(MINIMAL.replace("csd_target_s: 0.5", "csd_target_s: soon"))
    with pytest.raises(SchemaError, match="c_max"):
        chaindoc.parse(MINIMAL + "\nc_max: 0\n")
    with pytest.raises(SchemaError, match="expected an integer"):
        chaindoc.parse(MINIMAL + "\nc_max: 2.5\n")
    with pytest.raises(SchemaError, match="propagation_delay_s"):
        chaindoc.parse(MINIMAL + "\npropagation_delay_s: -1\n")
    with pytest.raises(SchemaError, match="duplicate node names"):
        chaindoc.parse(MINIMAL.replace("name: B", "name: A"))
    with pytest.raises(SchemaError, match="not valid YAML"):
        chaindoc.parse("nodes: [}")
    with pytest.raises(SchemaError, match="expected a mapping"):
        chaindoc.parse("just a string")


def test_thresholds_block():
    doc = chaindoc.parse(MINIMAL + "\nthresholds: {A: 1, B: 2}\n")
    assert doc.thresholds == (("A", 1), ("B", 2))
    with pytest.raises(SchemaError, match=r"thresholds\.C: unknown key"):
        chaindoc.parse(MINIMAL + "\nthresholds: {A: 1, B: 2, C: 3}\n")
    with pytest.raises(SchemaError, match=r"thresholds\.B"):
        chaindoc.parse(MINIMAL + "\nthresholds: {A: 1}\n")
    with pytest.raises(SchemaError, match="must be >= 1"):
        chaindoc.parse(MINIMAL + "\nthresholds: {A: 0, B: 2}\n")


def test_deployment_blocks_require_thresholds():
    block = "\ndeployments:\n  D:\n    type: homogeneous\n    nodes: {A: [1], B: [1]}\n"
    with pytest.raises(SchemaError, match="thresholds"):
        chaindoc.parse(MINIMAL + block)
    doc = chaindoc.parse(MINIMAL + "\nthresholds: {A: 1, B: 1}\n" + block)
    assert doc.deployment("D").node_nrs == (("A", (1,)), ("B", (1,)))


def test_deployment_block_validation():
    base = MINIMAL + "\nthresholds: {A: 1, B: 1}\n"
    with pytest.raises(SchemaError, match=r"deployments\.D\.type"):
        chaindoc.parse(base + "deployments: {D: {type: weird}}\n")
    with pytest.raises(SchemaError, match=r"deployments\.D\.nodes\.B: missing"):
        chaindoc.parse(base + "deployments: {D: {type: homogeneous, nodes: {A: [1]}}}\n")
    with pytest.raises(SchemaError, match="not a standalone chain node"):
        chaindoc.parse(
            base + "deployments: {D: {type: homogeneous, nodes: {A: [1], B: [1], C: [1]}}}\n")
    with pytest.raises(SchemaError, match="container count must be >= 1"):
        chaindoc.parse(base + "deployments: {D: {type: homogeneous, nodes: {A: [0], B: [1]}}}\n")
    with pytest.raises(SchemaError, match="homogeneous deployments take no pair"):
        chaindoc.parse(
            base + "deployments: {D: {type: homogeneous, nodes: {A: [1], B: [1]}, "
                   "pair: [A, B]}}\n")
    with pytest.raises(SchemaError, match="need pair and pair_nrs"):
        chaindoc.parse(base + "deployments: {D: {type: co-located}}\n")
    with pytest.raises(SchemaError, match=r"pair: expected two chain node names"):
        chaindoc.parse(
            base + "deployments: {D: {type: co-located, pair: [A, Z], "
                   "pair_nrs: [{A: 1}]}}\n")
    with pytest.raises(SchemaError, match="not a pair node"):
        chaindoc.parse(
            base + "deployments: {D: {type: co-located, pair: [A, B], "
                   "pair_nrs: [{C: 1}]}}\n")
    # An all-zero pair NR violates the deployment invariant.
    with pytest.raises(SchemaError, match="at least one container"):
        chaindoc.parse(
            base + "deployments: {D: {type: co-located, pair: [A, B], "
                   "pair_nrs: [{}]}}\n")


def test_search_block_validation():
    with pytest.raises(SchemaError, match=r"search\.depth: unknown key"):
        chaindoc.parse(MINIMAL + "\nsearch: {depth: 3}\n")
    with pytest.raises(SchemaError, match="caps must be >= 1"):
        chaindoc.parse(MINIMAL + "\nsearch: {max_nrs_per_node: 0}\n")
    with pytest.raises(SchemaError, match="cost_share_first"):
        chaindoc.parse(MINIMAL + "\nsearch: {cost_share_first: 0.9, cost_share_first_two: 0.5}\n")
    with pytest.raises(SchemaError, match=r"search\.pair"):
        chaindoc.parse(MINIMAL + "\nsearch: {pair: [A]}\n")
    doc = chaindoc.parse(MINIMAL + "\nsearch: {pair: [A, B], max_nrs_per_node: 2}\n")
    assert doc.search.pair == ("A", "B")
    assert doc.search.max_nrs_per_node == 2
    assert doc.search.cost_share_first == 0.5


def test_search_params_construction(doc_path):
    doc = chaindoc.load(doc_path)
    params = doc.search_params(doc.thresholds, COLOCATED)
    assert params.pair == ("I-CSCF", "HSS")
    assert params.availability_target == 0.99999
    assert params.max_containers_per_nr == 6
    homog = doc.search_params(doc.thresholds, HOMOGENEOUS)
    assert homog.pair is None
    assert homog.deployment_type == HOMOGENEOUS
