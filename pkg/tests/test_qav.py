import itertools

import numpy as np
import pytest

from conftest import BELL_TABLE, CLUSTER_TABLE, GHZ_TABLE
from qcomm.qav import (VoteVector, all_patterns, max_iterations, protocol_a_final, protocol_a_run,
                       protocol_b_initial, protocol_b_run)
from qcomm.qstate import StateError


def _vetoers(v):
    return tuple(i + 1 for i, x in enumerate(v.vetoes) if x)


@pytest.mark.parametrize("resource,table", [("cluster4", CLUSTER_TABLE), ("ghz3", GHZ_TABLE)])
def test_protocol_b_tables(resource, table):
    for v in all_patterns(4):
        r = protocol_b_run(v, resource)
        assert r.outcome == table[_vetoers(v)]
        assert r.probability == pytest.approx(1, abs=1e-10)
        assert r.conclusive == (0 < v.count < 4)


def test_protocol_a_table():
    for v in all_patterns(4):
        res = protocol_a_run(v)
        want = BELL_TABLE[v.count]
        got = [r.outcome for r in res.rounds][: len(want)]
        assert got == want
        assert res.verdict == ("no veto" if v.count == 0 else "veto")


def test_anonymity_same_count_same_state():
    for t in range(max_iterations(4)):
        for k in range(5):
            states = [protocol_a_final(VoteVector.from_vetoers(4, c), t).amplitudes
                      for c in itertools.combinations(range(1, 5), k)]
            assert all(np.allclose(s, states[0]) for s in states)


@pytest.mark.parametrize("resource", ["cluster4", "ghz3"])
def test_protocol_b_blind_spot(resource):
    psi = protocol_b_initial(resource).amplitudes
    fin = protocol_b_run(VoteVector.from_string("1111"), resource).final_state.amplitudes
    assert abs(abs(np.vdot(psi, fin)) - 1) < 1e-10


@pytest.mark.parametrize("bad", ["", "10a1", "2"])
def test_bad_vote_string(bad):
    with pytest.raises(StateError):
        VoteVector.from_string(bad)


def test_protocol_b_needs_four_voters():
    with pytest.raises(StateError):
        protocol_b_run(VoteVector.from_string("101"), "cluster4")
