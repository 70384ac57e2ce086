"""
Application configuration using Pydantic Settings
"""

from pathlib import Path
from typing import List, Optional, Union

from pydantic_settings import BaseSettings, SettingsConfigDict


def parse_int_list(raw: str) -> List[int]:
    """Parse a comma separated list of integers ("18,24,28,32")"""
    return [int(item) for item in raw.split(",") if item.strip()]


class Settings(BaseSettings):
    """Application settings"""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # Application
    APP_NAME: str = "Light Field D2GAN Codec"
    VERSION: str = "1.0.0"
    DEBUG: bool = False

    # Monitoring & Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "console"  # console, json

    # Pipeline
    MODE: str = "rdo"  # all-coded, rdo, all-dropped
    QP_LIST: str = "18,24,28,32"
    LAMBDA: float = 0.1
    GOP_SIZE: int = 16
    SCAN: str = "spiral"  # spiral, raster
    SEED: int = 0

    # Codec
    BLOCK_SIZE: int = 8
    SEARCH_RANGE: int = 8
    QP_LEVEL_OFFSETS: str = "0,1,2,3,4"
    LOSSLESS_BYPASS: bool = False

    # View synthesis
    SWEEP_LEVELS: int = 9
    DISPARITY_MAX: float = 2.0
    NUM_REFS: int = 4

    # Training
    TRAIN_REGIME: str = "per-qp"  # original, mixed, per-qp
    TRAIN_STEPS: int = 2000
    ALPHA: float = 0.2
    BETA: float = 0.2
    LEARNING_RATE: float = 0.0002
    ADAM_BETA1: float = 0.9
    ADAM_BETA2: float = 0.999
    ADAM_EPS: float = 1e-8
    BATCH_SIZE: int = 10
    PATCH_IN: int = 60
    PATCH_OUT: int = 36
    PATCH_STRIDE: int = 16
    RECON_WEIGHT: float = 10.0

    # Storage
    DATA_DIR: str = "./data/synthetic"
    MODEL_DIR: str = "./data/models"
    OUTPUT_DIR: str = "./data/output"

    @property
    def qp_values(self) -> List[int]:
        return parse_int_list(self.QP_LIST)

    @property
    def qp_level_offsets(self) -> List[int]:
        return parse_int_list(self.QP_LEVEL_OFFSETS)


def load_settings(config_file: Optional[Union[str, Path]] = None, **overrides) -> Settings:
    """Build settings from a flat KEY=value config file, then apply flag overrides"""
    if config_file is not None:
        loaded = Settings(_env_file=str(config_file))
    else:
        loaded = Settings()

    overrides = {key: value for key, value in overrides.items() if value is not None}
    if overrides:
        # model_copy skips validation, so go through the constructor again
        loaded = Settings.model_validate({**loaded.model_dump(), **overrides})

    validate_settings(loaded)
    return loaded


def validate_settings(candidate: Settings) -> bool:
    """Validate critical settings"""
    for qp in candidate.qp_values:
        if not 0 <= qp <= 51:
            raise ValueError(f"QP_LIST entries must lie in [0, 51], got {qp}")

    gop = candidate.GOP_SIZE
    if gop < 1 or gop & (gop - 1) or gop > 16:
        # deeper GOPs would need temporal ids above 4
        raise ValueError(f"GOP_SIZE must be a power of two <= 16, got {gop}")

    if candidate.LAMBDA <= 0:
        raise ValueError("LAMBDA must be positive")

    if candidate.PATCH_OUT >= candidate.PATCH_IN:
        raise ValueError("PATCH_OUT must be smaller than PATCH_IN")

    if candidate.MODE not in ("all-coded", "rdo", "all-dropped"):
        raise ValueError(f"Unknown MODE: {candidate.MODE}")

    return True


# Create settings instance
settings = Settings()
