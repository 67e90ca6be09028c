"""Application configuration using Pydantic Settings."""

from functools import lru_cache
from typing import Optional

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Engine settings loaded from environment variables (CLI flags override per job)."""

    # Truncation and windows
    DEGREE_BOUND: int = 10
    PMAX: Optional[int] = None
    SMAX: Optional[int] = None
    STABILIZATION_BOUND: int = 12

    # Sampling - identical seeds give byte-identical reports
    SAMPLES: int = 1000
    SEED: int = 0

    # Algebra
    MONOMIAL_ORDER: str = "grevlex"
    MAX_ANNIHILATOR_POWER: int = 4
    STRICT_TRANSITIVITY: bool = False

    # Output
    REPORT_DIR: str = "reports"
    LOG_LEVEL: str = "INFO"

    class Config:
        env_file = ".env"
        case_sensitive = True

    def p_window(self, m: int) -> int:
        """Upper p of the strip-complete window for a chart with m fiber variables."""
        return m if self.PMAX is None else self.PMAX

    def s_window(self, m: int, l: int) -> int:  # noqa: E741
        return m + l if self.SMAX is None else self.SMAX


@lru_cache()
def get_settings() -> Settings:
    """Cached settings instance."""
    return Settings()
