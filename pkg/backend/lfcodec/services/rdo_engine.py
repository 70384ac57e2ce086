"""
Lagrangian encode-or-drop decisions for the two upper temporal levels

Level-4 views are decided first by a plain argmin of J = D + lambda * R. A
level-3 view may then only be dropped when every level-4 view predicted from
it was dropped too; otherwise it is kept and marked as forced.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog

from lfcodec.core.exceptions import DomainError, NoModelForQp
from lfcodec.models.bitstream import UNIT_SYNTAX_BITS, Unit
from lfcodec.models.decision import DECISION_COLUMNS, Branch, BranchMeasurement, LagrangianConfig, ViewDecision
from lfcodec.models.lightfield import View
from lfcodec.services.codec import SequenceEncoder
from lfcodec.services.sequencing import dependent_pocs

logger = structlog.get_logger()

Synthesizer = Callable[[int], View]

LEVEL_FIRST_PASS = 4
LEVEL_SECOND_PASS = 3


def lagrangian_cost(distortion: float, rate: float, lam: float) -> float:
    """J = D + lambda * R"""
    if distortion < 0 or rate < 0 or lam < 0:
        raise DomainError(f"Lagrangian inputs must be non-negative: D={distortion}, R={rate}, lambda={lam}")
    return float(distortion + lam * rate)


def luma_mse(a: View, b: View) -> float:
    diff = a.luma.astype(np.float64) - b.luma.astype(np.float64)
    return float(np.mean(diff * diff))


@dataclass
class ViewEvaluation:
    """Both branches of one view, with the trial encode kept for a later commit"""

    poc: int
    level: int
    codec: BranchMeasurement
    gan: BranchMeasurement
    unit: Unit
    padded_recon: np.ndarray

    @property
    def j_codec(self) -> float:
        return self.codec.cost

    @property
    def j_gan(self) -> float:
        return self.gan.cost


def evaluate_view(
    poc: int,
    original: View,
    encoder: SequenceEncoder,
    synthesizer: Optional[Synthesizer],
    lam: float,
) -> ViewEvaluation:
    """Measure the coded branch by a trial encode and the dropped branch by synthesis"""
    if synthesizer is None:
        raise NoModelForQp(encoder.config.qp)

    num_pixels = original.width * original.height
    unit, recon, padded = encoder.trial(poc, original)
    d_codec = luma_mse(original, recon)
    r_codec = unit.bits / num_pixels

    synthesized = synthesizer(poc)
    d_gan = luma_mse(original, synthesized)
    r_gan = UNIT_SYNTAX_BITS / num_pixels

    return ViewEvaluation(
        poc=poc,
        level=encoder.layout.level(poc),
        codec=BranchMeasurement(d_codec, r_codec, lagrangian_cost(d_codec, r_codec, lam)),
        gan=BranchMeasurement(d_gan, r_gan, lagrangian_cost(d_gan, r_gan, lam)),
        unit=unit,
        padded_recon=padded,
    )


def select_branches(
    costs: Mapping[int, Tuple[float, float]],
    levels: Mapping[int, int],
    dependents: Mapping[int, Sequence[int]],
) -> Dict[int, Tuple[Branch, bool]]:
    """Two-pass greedy selection from (j_codec, j_gan) per POC.

    dependents maps each level-3 POC to the level-4 POCs predicted from it.
    Returns POC -> (branch, forced).
    """
    result: Dict[int, Tuple[Branch, bool]] = {}
    for poc in sorted(p for p in costs if levels[p] == LEVEL_FIRST_PASS):
        j_codec, j_gan = costs[poc]
        result[poc] = (Branch.DROPPED if j_gan < j_codec else Branch.CODED, False)

    for poc in sorted(p for p in costs if levels[p] == LEVEL_SECOND_PASS):
        j_codec, j_gan = costs[poc]
        if j_codec <= j_gan:
            result[poc] = (Branch.CODED, False)
        elif all(result.get(dep, (Branch.CODED, False))[0] == Branch.DROPPED for dep in dependents.get(poc, ())):
            result[poc] = (Branch.DROPPED, False)
        else:
            result[poc] = (Branch.CODED, True)
    return result


def decide_gop(
    gop_pocs: Sequence[int],
    frames: Sequence[View],
    encoder: SequenceEncoder,
    synthesizer: Optional[Synthesizer],
    lagrangian: LagrangianConfig,
) -> List[ViewDecision]:
    """Decide and commit every level-3/4 view of one GOP.

    Levels 0-2 must already be committed. Level-3 views are coded
    tentatively so level-4 candidates can be encoded against them; a level-3
    view that ends up dropped leaves no coded dependents behind.
    """
    layout = encoder.layout
    lam = lagrangian.lambda_
    upper = [poc for poc in gop_pocs if layout.level(poc) in (LEVEL_SECOND_PASS, LEVEL_FIRST_PASS)]
    level3 = [poc for poc in upper if layout.level(poc) == LEVEL_SECOND_PASS]
    level4 = [poc for poc in upper if layout.level(poc) == LEVEL_FIRST_PASS]

    evaluations: Dict[int, ViewEvaluation] = {}
    for poc in level3:
        evaluations[poc] = evaluate_view(poc, frames[poc], encoder, synthesizer, lam)
        encoder.commit(evaluations[poc].unit, evaluations[poc].padded_recon)
    for poc in level4:
        evaluations[poc] = evaluate_view(poc, frames[poc], encoder, synthesizer, lam)

    dependents = {
        poc: [dep for dep in dependent_pocs(poc, layout) if layout.level(dep) == LEVEL_FIRST_PASS] for poc in level3
    }
    choices = select_branches(
        {poc: (ev.j_codec, ev.j_gan) for poc, ev in evaluations.items()},
        {poc: ev.level for poc, ev in evaluations.items()},
        dependents,
    )

    for poc in level3 + level4:
        branch, _ = choices[poc]
        if branch == Branch.DROPPED:
            encoder.drop(poc)
        elif layout.level(poc) == LEVEL_FIRST_PASS:
            encoder.commit(evaluations[poc].unit, evaluations[poc].padded_recon)

    decisions = []
    for poc in sorted(upper):
        ev = evaluations[poc]
        branch, forced = choices[poc]
        decisions.append(
            ViewDecision(
                poc=poc,
                level=ev.level,
                branch=branch,
                j_codec=ev.j_codec,
                j_gan=ev.j_gan,
                d_codec=ev.codec.distortion,
                r_codec=ev.codec.rate,
                d_gan=ev.gan.distortion,
                r_gan=ev.gan.rate,
                forced=forced,
            )
        )

    logger.info(
        "GOP decided",
        gop=layout.gop_index(gop_pocs[0]) if gop_pocs else None,
        dropped=sum(d.dropped for d in decisions),
        forced=sum(d.forced for d in decisions),
        views=len(decisions),
    )
    return decisions


def total_cost(decisions: Sequence[ViewDecision]) -> float:
    return float(sum(decision.cost for decision in decisions))


def decisions_frame(decisions: Sequence[ViewDecision]) -> pd.DataFrame:
    return pd.DataFrame([decision.to_record() for decision in decisions], columns=DECISION_COLUMNS)


def write_decision_log(decisions: Sequence[ViewDecision], path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    decisions_frame(decisions).to_csv(path, index=False)


def read_decision_log(path: Union[str, Path]) -> List[ViewDecision]:
    frame = pd.read_csv(path)
    return [
        ViewDecision(
            poc=int(row.poc),
            level=int(row.level),
            branch=Branch(row.branch),
            j_codec=float(row.j_codec),
            j_gan=float(row.j_gan),
            d_codec=float(row.d_codec),
            r_codec=float(row.r_codec),
            d_gan=float(row.d_gan),
            r_gan=float(row.r_gan),
            forced=bool(row.forced),
        )
        for row in frame.itertuples(index=False)
    ]
