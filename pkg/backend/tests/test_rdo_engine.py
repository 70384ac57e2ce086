import itertools

import numpy as np
import pytest

from lfcodec.core.exceptions import DomainError, NoModelForQp
from lfcodec.models.bitstream import CodecConfig
from lfcodec.models.decision import Branch, LagrangianConfig
from lfcodec.models.lightfield import View
from lfcodec.services.codec import SequenceEncoder, decode_sequence
from lfcodec.services.rdo_engine import (
    decide_gop,
    decisions_frame,
    lagrangian_cost,
    read_decision_log,
    select_branches,
    total_cost,
    write_decision_log,
)
from lfcodec.services.sequencing import coding_order

LEVEL4 = list(range(1, 16, 2))
LEVEL3 = [2, 6, 10, 14]
UPPER = sorted(LEVEL4 + LEVEL3)
LEVELS = {**{poc: 4 for poc in LEVEL4}, **{poc: 3 for poc in LEVEL3}}
DEPENDENTS = {poc: [poc - 1, poc + 1] for poc in LEVEL3}


@pytest.mark.parametrize(
    "distortion,rate,lam,expected",
    [(0.0, 0.0, 0.1, 0.0), (10.0, 0.5, 0.1, 10.05), (25.0, 0.0, 0.1, 25.0)],
)
def test_lagrangian_cost(distortion, rate, lam, expected):
    assert lagrangian_cost(distortion, rate, lam) == pytest.approx(expected)


def test_lagrangian_cost_rejects_negatives():
    for args in [(-1.0, 0.0, 0.1), (0.0, -0.5, 0.1), (1.0, 1.0, -0.1)]:
        with pytest.raises(DomainError):
            lagrangian_cost(*args)


def test_everything_prefers_dropping():
    choices = select_branches({poc: (2.0, 1.0) for poc in UPPER}, LEVELS, DEPENDENTS)
    assert all(choices[poc] == (Branch.DROPPED, False) for poc in UPPER)


def test_level_three_is_forced_by_a_coded_neighbour():
    costs = {poc: (2.0, 1.0) for poc in UPPER}
    costs[1] = (1.0, 2.0)
    choices = select_branches(costs, LEVELS, DEPENDENTS)
    assert choices[1] == (Branch.CODED, False)
    assert choices[2] == (Branch.CODED, True)
    assert choices[6] == (Branch.DROPPED, False)


def test_ties_keep_the_view_coded():
    choices = select_branches({poc: (1.0, 1.0) for poc in UPPER}, LEVELS, DEPENDENTS)
    assert all(choices[poc] == (Branch.CODED, False) for poc in UPPER)


def _legal(dropped):
    return all(not dropped[l3] or all(dropped[dep] for dep in DEPENDENTS[l3]) for l3 in LEVEL3)


PATTERNS = np.array(list(itertools.product([False, True], repeat=len(UPPER))))
LEGAL = np.array([_legal(dict(zip(UPPER, pattern))) for pattern in PATTERNS])


@pytest.mark.parametrize("trial", range(200))
def test_greedy_selection_against_exhaustive_search(trial):
    rng = np.random.default_rng(trial)
    if trial % 4 == 0:
        # small integer tables produce plenty of ties
        table = rng.integers(0, 4, size=(len(UPPER), 2)).astype(float)
    else:
        table = rng.uniform(0, 10, size=(len(UPPER), 2))
    costs = {poc: (table[i, 0], table[i, 1]) for i, poc in enumerate(UPPER)}

    choices = select_branches(costs, LEVELS, DEPENDENTS)
    dropped = {poc: choices[poc][0] == Branch.DROPPED for poc in UPPER}
    assert _legal(dropped)

    greedy = sum(table[i, 1] if dropped[poc] else table[i, 0] for i, poc in enumerate(UPPER))
    pattern_costs = np.where(PATTERNS, table[:, 1], table[:, 0]).sum(axis=1)
    optimum = pattern_costs[LEGAL].min()

    assert greedy <= table[:, 0].sum() + 1e-9
    assert greedy >= optimum - 1e-9
    for i, poc in enumerate(UPPER):
        branch, forced = choices[poc]
        if not forced:
            chosen, other = (table[i, 1], table[i, 0]) if branch == Branch.DROPPED else (table[i, 0], table[i, 1])
            assert chosen <= other
        else:
            assert LEVELS[poc] == 3 and branch == Branch.CODED

    if not any(forced for _, forced in choices.values()):
        assert greedy == pytest.approx(optimum)
        assert greedy <= table[:, 1].sum() + 1e-9


def _frames(rng, count=17):
    y, x = np.mgrid[0:16, 0:16]
    return [
        View(np.clip(50 + 5 * x + 3 * y + 2 * i + rng.integers(-4, 5, size=(3, 16, 16)), 0, 255))
        for i in range(count)
    ]


def _prepared(frames, config):
    """Encoder with levels 0-2 already committed"""
    encoder = SequenceEncoder(config, 16, 16, len(frames))
    for poc in coding_order(encoder.layout):
        if encoder.layout.level(poc) <= 2:
            encoder.encode(poc, frames[poc])
    return encoder


def test_exact_synthesis_drops_every_upper_view(rng):
    frames = _frames(rng)
    encoder = _prepared(frames, CodecConfig(qp=28, search_range=2))
    decisions = decide_gop(encoder.layout.gop_pocs(0), frames, encoder, lambda poc: frames[poc], LagrangianConfig())

    assert [d.poc for d in decisions] == UPPER
    assert all(d.dropped and not d.forced and d.d_gan == 0.0 for d in decisions)
    assert all(d.r_gan == pytest.approx(16 / 256) for d in decisions)

    _, dropped = decode_sequence(encoder.bitstream())
    assert dropped == set(UPPER)


def test_coded_neighbour_forces_its_reference(rng):
    frames = _frames(rng)
    encoder = _prepared(frames, CodecConfig(qp=28, search_range=2))

    def synthesizer(poc):
        return View(255 - frames[poc].planes) if poc == 1 else frames[poc]

    decisions = {d.poc: d for d in decide_gop(encoder.layout.gop_pocs(0), frames, encoder, synthesizer, LagrangianConfig())}
    assert decisions[1].branch == Branch.CODED and not decisions[1].forced
    assert decisions[2].branch == Branch.CODED and decisions[2].forced
    assert decisions[2].j_gan < decisions[2].j_codec
    assert all(decisions[poc].dropped for poc in UPPER if poc not in (1, 2))

    decoded, dropped = decode_sequence(encoder.bitstream())
    assert dropped == set(UPPER) - {1, 2}
    assert {1, 2} <= decoded.keys()


def test_lossless_codec_branch_has_zero_distortion(rng):
    frames = [View(rng.integers(0, 256, size=(3, 16, 16), dtype=np.uint8)) for _ in range(17)]
    encoder = _prepared(frames, CodecConfig(lossless_bypass=True, search_range=2))
    gray = View(np.full((3, 16, 16), 128, dtype=np.uint8))
    decisions = decide_gop(encoder.layout.gop_pocs(0), frames, encoder, lambda poc: gray, LagrangianConfig(lambda_=0.1))

    assert all(d.d_codec == 0.0 and d.branch == Branch.CODED for d in decisions)
    assert total_cost(decisions) == pytest.approx(sum(d.j_codec for d in decisions))
    assert all(d.j_codec == pytest.approx(0.1 * d.r_codec) for d in decisions)


def test_missing_model_is_reported(rng):
    frames = _frames(rng)
    encoder = _prepared(frames, CodecConfig(qp=32, search_range=2))
    with pytest.raises(NoModelForQp) as info:
        decide_gop(encoder.layout.gop_pocs(0), frames, encoder, None, LagrangianConfig())
    assert info.value.qp == 32


def test_decision_log_round_trip(tmp_path, rng):
    frames = _frames(rng)
    encoder = _prepared(frames, CodecConfig(qp=28, search_range=2))
    decisions = decide_gop(encoder.layout.gop_pocs(0), frames, encoder, lambda poc: frames[poc - 1], LagrangianConfig())
    path = tmp_path / "out" / "decisions.csv"
    write_decision_log(decisions, path)

    frame = decisions_frame(decisions)
    assert list(frame.columns) == ["poc", "level", "j_codec", "j_gan", "d_codec", "r_codec", "d_gan", "r_gan", "branch", "forced"]
    assert len(frame) == 12

    loaded = read_decision_log(path)
    for before, after in zip(decisions, loaded):
        assert (after.poc, after.level, after.branch, after.forced) == (before.poc, before.level, before.branch, before.forced)
        assert after.j_codec == pytest.approx(before.j_codec)
        assert after.j_gan == pytest.approx(before.j_gan)
