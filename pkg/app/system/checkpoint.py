"""
Chain checkpoints
=================
A checkpoint is a JSON document (``format_version``, bookkeeping, forests,
RNG state and the calibrated hyperparameters) plus an ``.npz`` sidecar
holding every numeric array.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict
from typing import Any, Dict, List, Optional

import numpy as np

from app.bart.priors import BartHyper
from app.bart.serialization import forest_from_model, forest_to_model, ForestModel
from app.core.errors import SchemaError
from app.core.run_config import FORMAT_VERSION, HorseshoeSettings
from app.system.chain import Chain, SweepDiagnostics
from app.system.gibbs import EquationScale, SystemDraw, SystemHyper
from app.system.horseshoe import HorseshoeState

logger = logging.getLogger(__name__)


def sidecar_path(path: str) -> str:
    root, _ = os.path.splitext(path)
    return root + ".npz"


def _stack_draws(prefix: str, draws: List[SystemDraw], arrays: Dict[str, np.ndarray]) -> Dict[str, Any]:
    arrays[f"{prefix}Q"] = np.stack([d.Q for d in draws])
    arrays[f"{prefix}H"] = np.stack([d.H for d in draws])
    arrays[f"{prefix}sigma2_scaled"] = np.stack([d.sigma2_scaled for d in draws])
    arrays[f"{prefix}hs_tau2"] = np.stack([d.hs.tau2 for d in draws])
    arrays[f"{prefix}hs_w"] = np.stack([d.hs.w for d in draws])
    arrays[f"{prefix}hs_scalars"] = np.array([[d.hs.lambda2, d.hs.zeta] for d in draws])
    doc: Dict[str, Any] = {"count": len(draws)}
    if draws[0].linear_A is not None:
        arrays[f"{prefix}linear_A"] = np.stack([d.linear_A for d in draws])
        arrays[f"{prefix}hsA_tau2"] = np.stack([d.hs_A.tau2 for d in draws])
        arrays[f"{prefix}hsA_w"] = np.stack([d.hs_A.w for d in draws])
        arrays[f"{prefix}hsA_scalars"] = np.array([[d.hs_A.lambda2, d.hs_A.zeta] for d in draws])
        if draws[0].intercept is not None:
            arrays[f"{prefix}intercept"] = np.stack([d.intercept for d in draws])
    else:
        doc["forests"] = [
            [forest_to_model(f).model_dump(mode="json", exclude_none=True) for f in d.forests] for d in draws
        ]
    return doc


def _unstack_draws(prefix: str, doc: Dict[str, Any], arrays: Dict[str, np.ndarray]) -> List[SystemDraw]:
    draws: List[SystemDraw] = []
    linear = f"{prefix}linear_A" in arrays
    for i in range(int(doc["count"])):
        lambda2, zeta = arrays[f"{prefix}hs_scalars"][i]
        draw = SystemDraw(
            Q=arrays[f"{prefix}Q"][i],
            H=arrays[f"{prefix}H"][i],
            hs=HorseshoeState(arrays[f"{prefix}hs_tau2"][i], float(lambda2), arrays[f"{prefix}hs_w"][i], float(zeta)),
            sigma2_scaled=arrays[f"{prefix}sigma2_scaled"][i],
        )
        if linear:
            a_lambda2, a_zeta = arrays[f"{prefix}hsA_scalars"][i]
            draw.linear_A = arrays[f"{prefix}linear_A"][i]
            draw.hs_A = HorseshoeState(
                arrays[f"{prefix}hsA_tau2"][i], float(a_lambda2), arrays[f"{prefix}hsA_w"][i], float(a_zeta)
            )
            if f"{prefix}intercept" in arrays:
                draw.intercept = arrays[f"{prefix}intercept"][i]
        else:
            draw.forests = [forest_from_model(ForestModel(**f)) for f in doc["forests"][i]]
        draws.append(draw)
    return draws


def _hyper_to_doc(hyper: SystemHyper) -> Dict[str, Any]:
    return {
        "mode": hyper.mode,
        "p": hyper.p,
        "M": hyper.M,
        "intercept": hyper.intercept,
        "bart": [asdict(b) for b in hyper.bart],
        "scales": [[float(s.offset), float(s.scale)] for s in hyper.scales],
        "horseshoe": hyper.horseshoe.model_dump(),
    }


def _hyper_from_doc(doc: Dict[str, Any]) -> SystemHyper:
    return SystemHyper(
        mode=doc["mode"],
        p=int(doc["p"]),
        M=int(doc["M"]),
        bart=[BartHyper(**b) for b in doc["bart"]],
        scales=[EquationScale(float(offset), float(scale)) for offset, scale in doc["scales"]],
        horseshoe=HorseshoeSettings(**doc["horseshoe"]),
        intercept=bool(doc["intercept"]),
    )


def save_chain(chain: Chain, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    arrays: Dict[str, np.ndarray] = {}
    doc: Dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "chain_id": chain.chain_id,
        "config_hash": chain.config_hash,
        "mode": chain.mode,
        "series": list(chain.series),
        "dates": list(chain.dates),
        "sweeps_done": chain.sweeps_done,
        "rng_state": chain.rng_state,
        "diagnostics": [d.to_dict() for d in chain.diagnostics],
        "draws": _stack_draws("draw_", chain.draws, arrays) if chain.draws else {"count": 0},
        "current": _stack_draws("current_", [chain.current], arrays) if chain.current is not None else None,
    }
    if chain.hyper is not None:
        doc["hyper"] = _hyper_to_doc(chain.hyper)
    if chain.filled:
        arrays["filled"] = np.stack(chain.filled)
    if chain.current_filled is not None:
        arrays["current_filled"] = chain.current_filled

    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(doc, f, sort_keys=True)
    os.replace(tmp, path)
    np.savez_compressed(sidecar_path(path), **arrays)
    logger.info(
        "Checkpoint written: %s (%d draws, %d sweeps)",
        path,
        chain.n_draws,
        chain.sweeps_done,
        extra={"event": "checkpoint", "chain": chain.chain_id},
    )


def load_chain(path: str) -> Chain:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    version = int(doc.get("format_version", 0))
    if version < 1 or version > FORMAT_VERSION:
        raise SchemaError("unsupported checkpoint format", path=path, format_version=version)
    with np.load(sidecar_path(path)) as npz:
        arrays = {key: npz[key] for key in npz.files}

    chain = Chain(
        chain_id=int(doc["chain_id"]),
        config_hash=doc["config_hash"],
        mode=doc["mode"],
        series=tuple(doc["series"]),
        dates=tuple(doc["dates"]),
        sweeps_done=int(doc["sweeps_done"]),
        rng_state=doc.get("rng_state"),
        diagnostics=[SweepDiagnostics(**d) for d in doc.get("diagnostics", [])],
    )
    if doc.get("hyper") is not None:
        chain.hyper = _hyper_from_doc(doc["hyper"])
    if doc["draws"]["count"]:
        chain.draws = _unstack_draws("draw_", doc["draws"], arrays)
        chain.filled = list(arrays["filled"])
    current: Optional[Dict[str, Any]] = doc.get("current")
    if current is not None:
        chain.current = _unstack_draws("current_", current, arrays)[0]
        chain.current_filled = arrays.get("current_filled")
    return chain
