import logging
import os
from typing import Optional

from pydantic_settings import BaseSettings

LOG_LEVELS = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warn": logging.WARNING,
    "warning": logging.WARNING,
}


class Settings(BaseSettings):
    # Application settings
    APP_NAME: str = "untangle"
    APP_VERSION: str = "0.1.0"
    APP_DESCRIPTION: str = "Interpenetration repair for triangle meshes"

    # Logging settings (debug | info | warn)
    UNTANGLE_LOG: str = os.getenv("UNTANGLE_LOG", "info")

    # Worker settings
    UNTANGLE_THREADS: int = 1

    # Output settings
    UNTANGLE_OUTPUT_DIR: str = "."

    # Scene settings
    UNTANGLE_SCENE_DIR: Optional[str] = None

    @property
    def log_level(self) -> int:
        """Numeric logging level for UNTANGLE_LOG; unknown names map to INFO."""
        return LOG_LEVELS.get(self.UNTANGLE_LOG.strip().lower(), logging.INFO)

    @property
    def log_level_known(self) -> bool:
        return self.UNTANGLE_LOG.strip().lower() in LOG_LEVELS

    class Config:
        env_file = ".env"
        case_sensitive = True


settings = Settings()
