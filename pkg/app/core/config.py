from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    PROJECT_NAME: str = "Bavart Nowcast"

    # Paths
    OUTPUT_DIR: str = "data/runs"

    # Runtime
    LOG_LEVEL: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    PROGRESS: bool = True
    CHECKPOINT_EVERY: int = 1000  # sweeps; 0 disables periodic checkpoints
    N_JOBS: int = 1  # joblib workers for chains / backtest origins

    model_config = SettingsConfigDict(env_file=".env", env_prefix="BAVART_", extra="ignore")


settings = Settings()
