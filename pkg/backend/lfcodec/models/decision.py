"""
Rate-distortion decision records
"""

from dataclasses import asdict, dataclass
from enum import Enum

from pydantic import BaseModel, Field


class Branch(str, Enum):
    CODED = "Coded"
    DROPPED = "Dropped"


class LagrangianConfig(BaseModel):
    """J = D + lambda * R with D as luma MSE and R in bits per pixel"""

    lambda_: float = Field(0.1, gt=0.0, alias="lambda")
    distortion: str = "luma-mse"
    rate_unit: str = "bpp"

    model_config = {"populate_by_name": True}


@dataclass(frozen=True)
class BranchMeasurement:
    distortion: float
    rate: float
    cost: float


@dataclass(frozen=True)
class ViewDecision:
    """Outcome for one level-3/4 view; forced marks a level-3 view kept only for its dependents"""

    poc: int
    level: int
    branch: Branch
    j_codec: float
    j_gan: float
    d_codec: float
    r_codec: float
    d_gan: float
    r_gan: float
    forced: bool = False

    @property
    def dropped(self) -> bool:
        return self.branch == Branch.DROPPED

    @property
    def cost(self) -> float:
        return self.j_gan if self.dropped else self.j_codec

    def to_record(self) -> dict:
        record = asdict(self)
        record["branch"] = self.branch.value
        return record


DECISION_COLUMNS = ["poc", "level", "j_codec", "j_gan", "d_codec", "r_codec", "d_gan", "r_gan", "branch", "forced"]
