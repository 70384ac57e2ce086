"""
Command-line run configuration
"""

from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator

from lfcodec.core.exceptions import NoModelForQp
from lfcodec.models.bitstream import check_gop_size


class RunConfig(BaseModel):
    mode: str = "rdo"
    qps: List[int] = Field(default_factory=lambda: [18, 24, 28, 32])
    lambda_: float = Field(0.1, gt=0.0)
    gop_size: int = 16
    model_paths: Dict[int, str] = Field(default_factory=dict)
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    seed: int = 0

    @field_validator("mode")
    @classmethod
    def _known_mode(cls, value: str) -> str:
        if value not in ("all-coded", "rdo", "all-dropped"):
            raise ValueError(f"Unknown mode: {value}")
        return value

    @field_validator("qps")
    @classmethod
    def _qp_range(cls, values: List[int]) -> List[int]:
        if not values:
            raise ValueError("At least one QP is required")
        for qp in values:
            if not 0 <= qp <= 51:
                raise ValueError(f"QP must lie in [0, 51], got {qp}")
        return values

    @field_validator("gop_size")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        return check_gop_size(value)

    def model_for(self, qp: int) -> Optional[Path]:
        path = self.model_paths.get(qp)
        return Path(path) if path and Path(path).is_file() else None

    def require_models(self) -> None:
        """rdo mode needs a generator model for every requested QP"""
        if self.mode != "rdo":
            return
        for qp in self.qps:
            if self.model_for(qp) is None:
                raise NoModelForQp(qp)
