import os

from pydantic import computed_field
from pydantic_settings import BaseSettings, SettingsConfigDict


class AppSettings(BaseSettings):
    APP_NAME: str = "crvae"
    APP_VERSION: str | None = "0.1.0"


class RuntimeSettings(BaseSettings):
    # caps the worker pools used for mixing and per-item metrics, 0 = one per CPU
    CRVAE_THREADS: int = 0
    LOG_DIR: str = "logs"

    @computed_field  # type: ignore[prop-decorator]
    @property
    def WORKER_COUNT(self) -> int:
        if self.CRVAE_THREADS > 0:
            return self.CRVAE_THREADS
        return os.cpu_count() or 1


class FileLoggerSettings(BaseSettings):
    FILE_LOG_ENABLED: bool = True
    FILE_LOG_MAX_BYTES: int = 10 * 1024 * 1024
    FILE_LOG_BACKUP_COUNT: int = 5
    FILE_LOG_FORMAT_JSON: bool = True
    FILE_LOG_LEVEL: str = "INFO"

    # Include run ID, command and epoch in the file log
    FILE_LOG_INCLUDE_RUN_ID: bool = True
    FILE_LOG_INCLUDE_COMMAND: bool = True
    FILE_LOG_INCLUDE_EPOCH: bool = True


class ConsoleLoggerSettings(BaseSettings):
    CONSOLE_LOG_LEVEL: str = "INFO"
    CONSOLE_LOG_FORMAT_JSON: bool = False

    # Include run ID, command and epoch in the console log
    CONSOLE_LOG_INCLUDE_RUN_ID: bool = False
    CONSOLE_LOG_INCLUDE_COMMAND: bool = True
    CONSOLE_LOG_INCLUDE_EPOCH: bool = True


class Settings(
    AppSettings,
    RuntimeSettings,
    FileLoggerSettings,
    ConsoleLoggerSettings,
):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )


settings = Settings()
