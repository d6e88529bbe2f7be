"""Campaign configuration: a small, versioned YAML schema.

Example (all keys shown; most have defaults):

.. code-block:: yaml

    schema: 1
    name: ber-desk
    seed: 1234
    trials: 10000
    snr_db: [15, 20, 25, 30]
    sigma2_delta: [1.0e-4, 1.0e-5]
    num_tx: 2
    num_rx: 2
    ofdm: {n_subcarriers: 64, cp_len: 16, qam_order: 16, sample_rate_hz: 2.0e7}
    pdp_db: [-1.52, -6.75, -11.91, -17.08]
    detectors: [proposed, perfect, no_tracking, pilot]
    coding: false
    gop_symbols: 1
    num_pilots: 4
    zeta_scale: 1.0e-3
    max_iterations: 10
    phn_convention: per_pair
    rd: {a: 5.0, b: 100.0, z: 1.0, t_s: 4.0e-5, t0: 4.0e-6, r_c: 0.5}
    workers: 1
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .channel import DEFAULT_PDP_DB, PowerDelayProfile
from .exceptions import ConfigError
from .phase_noise import VARIANCE_CONVENTIONS
from .phy import OfdmConfig
from .video import RdParams

SCHEMA_VERSION = 1
DETECTOR_IDS = ("proposed", "perfect", "no_tracking", "pilot")


@dataclass(frozen=True)
class CampaignConfig:
    snr_db: tuple[float, ...]
    sigma2_delta: tuple[float, ...]
    name: str = "campaign"
    seed: int = 0
    trials: int = 100
    num_tx: int = 2
    num_rx: int = 2
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    pdp: PowerDelayProfile = field(default_factory=PowerDelayProfile)
    detectors: tuple[str, ...] = DETECTOR_IDS
    coding: bool = False
    gop_symbols: int = 1
    num_pilots: int = 4
    zeta_scale: float = 1e-3
    max_iterations: int = 10
    phn_convention: str = "per_pair"
    rd: RdParams = field(default_factory=RdParams)
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if len(self.snr_db) == 0 or len(self.sigma2_delta) == 0:
            raise ConfigError("snr_db and sigma2_delta sweeps must be non-empty")
        if any(s < 0 for s in self.sigma2_delta):
            raise ConfigError("sigma2_delta values must be >= 0")
        if self.num_tx < 1 or self.num_rx < 1:
            raise ConfigError("antenna counts must be >= 1")
        unknown = set(self.detectors) - set(DETECTOR_IDS)
        if unknown:
            raise ConfigError(f"unknown detectors: {sorted(unknown)}")
        if len(self.detectors) == 0:
            raise ConfigError("at least one detector required")
        if self.ofdm.cp_len < self.pdp.num_taps - 1:
            raise ConfigError(
                f"cp_len {self.ofdm.cp_len} shorter than channel memory "
                f"{self.pdp.num_taps - 1}"
            )
        if self.phn_convention not in VARIANCE_CONVENTIONS:
            raise ConfigError(f"unknown phn_convention {self.phn_convention!r}")
        if self.gop_symbols < 1:
            raise ConfigError("gop_symbols must be >= 1")
        if self.num_pilots < 0 or self.num_pilots >= self.ofdm.n_subcarriers:
            raise ConfigError("num_pilots out of range")
        if "pilot" in self.detectors and self.num_pilots < 1:
            raise ConfigError("pilot detector needs num_pilots >= 1")
        if self.workers < 0:
            raise ConfigError("workers must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pdp_db"] = list(d.pop("pdp")["avg_power_db"])
        d["schema"] = SCHEMA_VERSION
        return d


def config_from_dict(raw: dict) -> CampaignConfig:
    raw = dict(raw)
    schema = raw.pop("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {schema}")
    try:
        ofdm = OfdmConfig(**raw.pop("ofdm", {}))
        pdp = PowerDelayProfile(tuple(raw.pop("pdp_db", DEFAULT_PDP_DB)))
        rd = RdParams(**raw.pop("rd", {}))
        for key in ("snr_db", "sigma2_delta", "detectors"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return CampaignConfig(ofdm=ofdm, pdp=pdp, rd=rd, **raw)
    except TypeError as exc:
        raise ConfigError(f"bad config: {exc}") from exc


def load_config(path) -> CampaignConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")
    return config_from_dict(raw)


def config_hash(cfg: CampaignConfig) -> str:
    canonical = json.dumps(cfg.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
