from pathlib import Path
from pydantic import Field, field_validator, ConfigDict
from pydantic_settings import BaseSettings
from dotenv import load_dotenv

# -------------------------------------------------------------------
# Load .env file deterministically from project root
# -------------------------------------------------------------------

PROJECT_ROOT = Path(__file__).resolve().parents[2]
ENV_PATH = PROJECT_ROOT / ".env"

# Defaults apply when no .env is present (CI, fresh checkouts).
if ENV_PATH.exists():
    load_dotenv(dotenv_path=ENV_PATH)


# -------------------------------------------------------------------
# Settings Schema
# -------------------------------------------------------------------

class Settings(BaseSettings):
    # ---------------------------------------------------------------
    # Core Metadata
    # ---------------------------------------------------------------

    project_name: str = Field(default="MD_Lattice_VQ")
    environment: str = Field(default="development")
    log_level: str = Field(default="INFO")

    # ---------------------------------------------------------------
    # Root Paths
    # ---------------------------------------------------------------

    root_path: Path = Field(default=PROJECT_ROOT)

    # ---------------------------------------------------------------
    # Data Paths
    # ---------------------------------------------------------------

    artifacts_path: Path = Field(default=PROJECT_ROOT / "data" / "artifacts")
    configs_path: Path = Field(default=PROJECT_ROOT / "configs")
    logs_path: Path = Field(default=PROJECT_ROOT / "logs")

    # ---------------------------------------------------------------
    # Numerical Budgets
    # ---------------------------------------------------------------

    tolerance: float = Field(default=1e-9, gt=0)
    max_enumeration_points: int = Field(default=5_000_000, gt=0)
    max_cost_matrix_entries: int = Field(default=25_000_000, gt=0)
    simulation_chunk_size: int = Field(default=65_536, gt=0)
    entropy_window: int = Field(default=64, gt=0)

    # ---------------------------------------------------------------
    # Validation
    # ---------------------------------------------------------------

    @field_validator("environment")
    @classmethod
    def validate_environment(cls, v):
        allowed = {"development", "staging", "production"}
        if v not in allowed:
            raise ValueError(f"environment must be one of {allowed}")
        return v

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v):
        allowed = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
        level = str(v).upper()
        if level not in allowed:
            raise ValueError(f"log_level must be one of {allowed}")
        return level

    model_config = ConfigDict(
        env_file=str(ENV_PATH),
        case_sensitive=False,
        extra="ignore"
    )


# -------------------------------------------------------------------
# Singleton Instance
# -------------------------------------------------------------------

settings = Settings()


def get_settings() -> Settings:
    """Get the settings singleton instance."""
    return settings
