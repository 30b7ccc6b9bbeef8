from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from app.core.errors import ChainMismatchError, DegenerateDrawsError
from app.system.gibbs import SystemDraw, SystemHyper


@dataclass
class SweepDiagnostics:
    sweep: int
    acceptance: float
    projection_rms: float
    max_violation: float
    failed: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sweep": self.sweep,
            "acceptance": self.acceptance,
            "projection_rms": self.projection_rms,
            "max_violation": self.max_violation,
            "failed": self.failed,
        }


@dataclass
class Chain:
    """Stored draws of one MCMC run plus what is needed to resume it."""

    chain_id: int
    config_hash: str
    mode: str
    series: tuple
    dates: tuple  # YYYY-MM of the fitted panel
    draws: List[SystemDraw] = field(default_factory=list)
    filled: List[np.ndarray] = field(default_factory=list)  # each (T, M)
    diagnostics: List[SweepDiagnostics] = field(default_factory=list)
    sweeps_done: int = 0
    current: Optional[SystemDraw] = None
    current_filled: Optional[np.ndarray] = None
    rng_state: Optional[Dict[str, Any]] = None
    hyper: Optional[SystemHyper] = field(default=None, repr=False)

    @property
    def n_draws(self) -> int:
        return len(self.draws)

    def filled_array(self) -> np.ndarray:
        """(n_keep, T, M) completed panels."""
        if not self.filled:
            raise DegenerateDrawsError("chain holds no stored draws", chain=self.chain_id)
        return np.stack(self.filled)

    def check_compatible(self, config_hash: str, series: tuple) -> None:
        if config_hash != self.config_hash:
            raise ChainMismatchError("chain was fitted with a different config", chain=self.chain_id)
        if tuple(series) != tuple(self.series):
            raise ChainMismatchError("chain was fitted on different series", chain=self.chain_id)


def pool_chains(chains: List[Chain]) -> Chain:
    """Concatenate the stored draws of independent chains."""
    if not chains:
        raise DegenerateDrawsError("no chains to pool")
    first = chains[0]
    for other in chains[1:]:
        other.check_compatible(first.config_hash, first.series)
        if other.dates != first.dates:
            raise ChainMismatchError("chains cover different months")
    pooled = Chain(
        chain_id=first.chain_id,
        config_hash=first.config_hash,
        mode=first.mode,
        series=first.series,
        dates=first.dates,
        hyper=first.hyper,
    )
    for chain in chains:
        pooled.draws.extend(chain.draws)
        pooled.filled.extend(chain.filled)
        pooled.diagnostics.extend(chain.diagnostics)
    pooled.sweeps_done = sum(c.sweeps_done for c in chains)
    return pooled
