import hashlib
import json
import logging
import os
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from app.core.config import settings
from app.core.errors import ConfigError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
_MONTH = re.compile(r"^\d{4}-(0[1-9]|1[0-2])$")


class BartSettings(BaseModel):
    trees: int = Field(default=250, ge=1)
    alpha: float = Field(default=0.95, gt=0.0, lt=1.0)
    beta: float = Field(default=2.0, gt=0.0)
    shrink_k: float = Field(default=2.0, gt=0.0)
    quantile_v: float = Field(default=0.75, gt=0.0, lt=1.0)
    vmu_convention: Literal["printed", "chipman"] = "printed"
    loose_prior: bool = False


class HorseshoeSettings(BaseModel):
    half_n_lambda_shape: bool = False  # M(M-1)/4 instead of (n+1)/2
    linear_lambda_tau_scale: bool = False  # q^2/(2 lambda) instead of q^2/(2 lambda^2)


class SamplerSettings(BaseModel):
    mode: Literal["bavart", "linear"] = "bavart"
    lags: int = Field(default=5, ge=1)
    sweeps: int = Field(default=30000, ge=1)
    burn: int = Field(default=15000, ge=0)
    thin: int = Field(default=1, ge=1)
    intercept: bool = False
    seed: int = 20210101
    chains: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _burn_below_sweeps(self) -> "SamplerSettings":
        if self.burn >= self.sweeps:
            raise ValueError("burn must be smaller than sweeps")
        return self


class StateSpaceSettings(BaseModel):
    diffuse_variance: float = Field(default=1e7, gt=0.0)
    measurement_jitter: float = Field(default=0.0, ge=0.0)
    constraint_tol: float = Field(default=1e-6, gt=0.0)


class ReleaseRule(BaseModel):
    """Publication lag relative to the end of the reference month."""

    days: float = 0.0
    business_days: bool = False


def _default_release_rules() -> Dict[str, ReleaseRule]:
    return {
        "GDP": ReleaseRule(days=42),  # six weeks after the quarter
        "IP": ReleaseRule(days=42),
        "ESI": ReleaseRule(days=-1, business_days=True),  # next-to-last working day
        "CAR": ReleaseRule(days=17.5),  # two and a half weeks
        "PMI": ReleaseRule(days=1, business_days=True),  # first working day of next month
        "EUR": ReleaseRule(days=0),
    }


class CalendarSettings(BaseModel):
    rules: Dict[str, ReleaseRule] = Field(default_factory=_default_release_rules)
    default_monthly_days: float = 0.0
    default_quarterly_days: float = 42.0


class BacktestSettings(BaseModel):
    panel_id: str = "sim"
    target_series: Optional[str] = None  # default: first quarterly series
    origins: List[str] = Field(default_factory=list)  # nowcast months, YYYY-MM
    first_origin: Optional[str] = None
    n_origins: int = Field(default=0, ge=0)
    refit: Literal["origin", "quarterly"] = "origin"
    min_train_months: int = Field(default=36, ge=12)


class EvalSettings(BaseModel):
    lps_method: Literal["kde", "normal"] = "kde"
    bootstrap_reps: int = Field(default=10000, ge=100)
    block_length: float = Field(default=4.0, gt=0.0)
    seed: int = 7
    window_ends: List[str] = Field(default_factory=list)  # last origin of each window, YYYY-MM

    @field_validator("window_ends")
    @classmethod
    def _months(cls, value: List[str]) -> List[str]:
        bad = [v for v in value if not _MONTH.match(v)]
        if bad:
            raise ValueError(f"window ends must be YYYY-MM: {bad}")
        return sorted(set(value))


class SimulationSettings(BaseModel):
    dgp: Literal["linear", "threshold", "outlier", "threshold_outlier"] = "linear"
    start: str = "2000-01"
    n_months: int = Field(default=240, ge=24)
    n_monthly: int = Field(default=5, ge=1)
    noise_scale: float = Field(default=1.0, ge=0.0)
    shock_correlation: float = Field(default=0.3, ge=0.0, lt=1.0)
    outlier_size: float = -20.0
    outlier_months_from_end: int = Field(default=12, ge=1)
    seed: int = 1


class RunConfig(BaseModel):
    """Everything a run needs; the on-disk config file maps onto this model."""

    format_version: int = FORMAT_VERSION
    dataset: Optional[str] = None
    output_dir: str = Field(default_factory=lambda: os.path.join(settings.OUTPUT_DIR, "default"))
    series: Optional[List[str]] = None
    quarterly_divide_by_3: bool = True
    levels_to_growth: bool = False
    sampler: SamplerSettings = Field(default_factory=SamplerSettings)
    bart: BartSettings = Field(default_factory=BartSettings)
    horseshoe: HorseshoeSettings = Field(default_factory=HorseshoeSettings)
    statespace: StateSpaceSettings = Field(default_factory=StateSpaceSettings)
    calendar: CalendarSettings = Field(default_factory=CalendarSettings)
    backtest: BacktestSettings = Field(default_factory=BacktestSettings)
    evaluation: EvalSettings = Field(default_factory=EvalSettings)
    simulation: SimulationSettings = Field(default_factory=SimulationSettings)

    def config_hash(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _line_of(text: str, loc: tuple) -> Optional[int]:
    """Best-effort 1-based line number of the deepest key in *loc*."""
    keys = [str(part) for part in loc if isinstance(part, str)]
    lines = text.splitlines()
    for key in reversed(keys):
        pattern = re.compile(rf'^\s*"?{re.escape(key)}"?\s*[=:]')
        for number, line in enumerate(lines, start=1):
            if pattern.search(line):
                return number
        section = re.compile(rf"^\s*\[{re.escape(key)}\]")
        for number, line in enumerate(lines, start=1):
            if section.search(line):
                return number
    return None


def parse_run_config(text: str, suffix: str = ".toml", source: str = "<config>") -> RunConfig:
    try:
        if suffix == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"cannot parse config: {exc}", path=source, line=line) from exc

    try:
        return RunConfig(**data)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = tuple(first.get("loc", ()))
        raise ConfigError(
            f"invalid config value at {'.'.join(str(p) for p in loc) or '<root>'}: {first.get('msg')}",
            path=source,
            line=_line_of(text, loc),
        ) from exc


def load_run_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    if not os.path.exists(path):
        raise ConfigError("config file not found", path=path)
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    suffix = os.path.splitext(path)[1].lower()
    config = parse_run_config(text, suffix=suffix, source=path)
    logger.info("Loaded run config %s (hash=%s)", path, config.config_hash()[:12], extra={"event": "config"})
    return config


def save_run_config(config: RunConfig, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(config.model_dump_json(indent=2))
