from typing import Any, Dict

from app import __version__
from app.core.run_config import FORMAT_VERSION, RunConfig


def code_version() -> str:
    return __version__


def provenance_block(config: RunConfig) -> Dict[str, Any]:
    """Header embedded in every artifact the toolkit writes."""
    return {
        "format_version": FORMAT_VERSION,
        "code_version": code_version(),
        "config_hash": config.config_hash(),
    }
