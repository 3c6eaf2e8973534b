import os
import platform
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


def get_user_data_dir() -> Path:
    """Get the appropriate user data directory for the current platform."""
    system = platform.system()

    if system == "Windows":
        base_dir = Path(os.environ.get("LOCALAPPDATA", Path.home() / "AppData" / "Local"))
    elif system == "Darwin":  # macOS
        base_dir = Path.home() / "Library" / "Application Support"
    else:  # Linux and other Unix-like systems
        base_dir = Path(os.environ.get("XDG_DATA_HOME", Path.home() / ".local" / "share"))

    return base_dir / "pump-probe"


def get_user_config_dir() -> Path:
    """Get the appropriate user config directory for the current platform."""
    system = platform.system()

    if system == "Windows":
        base_dir = Path(os.environ.get("APPDATA", Path.home() / "AppData" / "Roaming"))
    elif system == "Darwin":  # macOS
        base_dir = Path.home() / "Library" / "Application Support"
    else:
        base_dir = Path(os.environ.get("XDG_CONFIG_HOME", Path.home() / ".config"))

    return base_dir / "pump-probe"


# User-specific .env first, then the working directory (for development)
user_config_dir = get_user_config_dir()
load_dotenv(user_config_dir / ".env")
load_dotenv()


class Settings(BaseSettings):
    """Runtime settings, overridable with PUMP_PROBE_* environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="PUMP_PROBE_", env_file=".env", case_sensitive=False, extra="ignore"
    )

    # User directories
    user_data_dir: Path = Field(default_factory=get_user_data_dir)
    user_config_dir: Path = Field(default_factory=get_user_config_dir)
    output_dir: Optional[Path] = Field(default=None)

    # Sweep engine
    default_jobs: int = Field(default=1, ge=1)
    default_orders: int = Field(default=1, ge=1)
    default_velocity_groups: int = Field(default=201, ge=1)
    velocity_span_sigmas: float = Field(default=5.0, gt=0)

    # Linear solver
    condition_threshold: float = Field(default=1e12, gt=0)
    residual_tolerance: float = Field(default=1e-9, gt=0)

    # Validation
    builder_tolerance: float = Field(default=1e-12, gt=0)
    oracle_order: int = Field(default=6, ge=1)
    oracle_tolerance: float = Field(default=1e-4, gt=0)
    oracle_steps_per_scale: int = Field(default=100, ge=10)
    oracle_settle_tolerance: float = Field(default=1e-6, gt=0)
    oracle_max_periods: int = Field(default=20000, ge=2)

    # Logging
    log_level: str = Field(default="INFO")
    log_file: Optional[str] = Field(default=None)

    def model_post_init(self, __context) -> None:
        """Set defaults for paths after initialization."""
        if self.output_dir is None:
            object.__setattr__(self, "output_dir", self.user_data_dir / "spectra")


# Global settings instance
settings = Settings()


def ensure_user_directories() -> bool:
    """Ensure the user directories exist."""
    from rich.console import Console

    console = Console()

    try:
        settings.user_data_dir.mkdir(parents=True, exist_ok=True)
        settings.user_config_dir.mkdir(parents=True, exist_ok=True)
        if settings.log_file:
            Path(settings.log_file).parent.mkdir(parents=True, exist_ok=True)
        return True
    except OSError as e:
        console.print(f"❌ Error creating user directories: {e}", style="red")
        return False


def show_user_paths() -> None:
    """Display user paths and the active solver settings."""
    from rich.console import Console
    from rich.panel import Panel

    console = Console()

    paths_info = f"""[bold]Data Directory:[/bold] {settings.user_data_dir}
  • Spectra: {settings.output_dir}
  • Log file: {settings.log_file or '(console only)'}

[bold]Config Directory:[/bold] {settings.user_config_dir}
  • Environment file (.env): {settings.user_config_dir / '.env'}

[bold]Solver:[/bold] condition threshold {settings.condition_threshold:g}, default jobs {settings.default_jobs}, velocity groups {settings.default_velocity_groups}

[bold]Note:[/bold] You can override these with environment variables:
  • PUMP_PROBE_DEFAULT_JOBS, PUMP_PROBE_CONDITION_THRESHOLD, PUMP_PROBE_LOG_LEVEL
  • PUMP_PROBE_USER_DATA_DIR, PUMP_PROBE_USER_CONFIG_DIR, PUMP_PROBE_LOG_FILE"""

    panel = Panel(paths_info, title="File Locations", border_style="blue")
    console.print(panel)
