"""Deterministic sensor-array and degradation simulator.

Assets carry a known degradation onset (the P point) and a P-F window; each
channel reads its nominal value plus Gaussian noise until P, then the mean
drifts by its degradation gain. Injected sensor faults override honest
values. Identical seeds produce bit-identical wire streams: randomness comes
from per-channel PCG64 generators with an explicit Box-Muller transform
(documented in docs/wire.md).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
import yaml

from .reliability import FailurePatternClass, PFInterval, WeibullModel
from .units import MS_PER_HOUR, hours_to_ms
from .wire import CHANNEL_KINDS, WIRE_SCHEMA_VERSION, TelemetryFrame

SCENARIO_SCHEMA_VERSION = 1

FAULT_KINDS = ("stuck-value", "spike", "dropout", "drift")

# RNG stream tags (SeedSequence entropy: [seed, tag, index...])
_STREAM_CHANNEL = 1
_STREAM_POLICY = 2
_STREAM_LIFETIME = 3


class InvalidSpec(Exception):
    """Scenario violates an invariant; the message names it."""


class HorizonExceeded(Exception):
    """step() called with the simulation clock at or past the horizon."""


class UnknownAsset(Exception):
    """Asset identifier not present in the scenario."""


@dataclass(frozen=True)
class SensorChannelSpec:
    channel_id: str
    kind: str
    unit: str
    nominal: float
    noise_sigma: float
    sample_period_hours: float


@dataclass(frozen=True)
class AssetSpec:
    asset_id: str
    pattern_class: FailurePatternClass
    pf: PFInterval
    degradation_onset_hours: float
    channels: Tuple[SensorChannelSpec, ...]
    degradation_gain: Mapping[str, float]  # channel_id -> value units per hour past P
    drift_exponent: float = 1.0
    lifetime_weibull: Optional[Tuple[float, float]] = None  # (shape, scale)


@dataclass(frozen=True)
class FaultInjection:
    sensor: str  # "<asset_id>.<channel_id>"
    kind: str
    start_hours: float
    magnitude: float


@dataclass(frozen=True)
class Scenario:
    seed: int
    horizon_hours: float
    tick_hours: float
    assets: Tuple[AssetSpec, ...]
    faults: Tuple[FaultInjection, ...] = ()
    start_ts_ms: int = 0


def sensor_id(asset_id: str, channel_id: str) -> str:
    return f"{asset_id}.{channel_id}"


def validate_scenario(spec: Scenario) -> None:
    """Raise InvalidSpec naming the first violated invariant."""
    if not spec.assets:
        raise InvalidSpec("asset set must be non-empty")
    if spec.tick_hours <= 0:
        raise InvalidSpec("tick must be positive")
    if spec.horizon_hours <= 0:
        raise InvalidSpec("horizon must be positive")
    seen_assets = set()
    sensors = set()
    largest_f = 0.0
    for asset in spec.assets:
        if asset.asset_id in seen_assets:
            raise InvalidSpec(f"duplicate asset id {asset.asset_id!r}")
        seen_assets.add(asset.asset_id)
        if not asset.channels:
            raise InvalidSpec(f"asset {asset.asset_id!r}: channel set must be non-empty")
        if not (0 <= asset.degradation_onset_hours <= spec.horizon_hours):
            raise InvalidSpec(
                f"asset {asset.asset_id!r}: degradation onset outside simulation horizon"
            )
        largest_f = max(largest_f, asset.degradation_onset_hours + asset.pf.length)
        for chan in asset.channels:
            sid = sensor_id(asset.asset_id, chan.channel_id)
            if sid in sensors:
                raise InvalidSpec(f"duplicate channel id {sid!r}")
            sensors.add(sid)
            if chan.kind not in CHANNEL_KINDS:
                raise InvalidSpec(f"channel {sid!r}: unknown kind {chan.kind!r}")
            if chan.sample_period_hours <= 0:
                raise InvalidSpec(f"channel {sid!r}: sample_period must be positive")
            if chan.noise_sigma < 0:
                raise InvalidSpec(f"channel {sid!r}: noise_sigma must be non-negative")
            if spec.tick_hours > chan.sample_period_hours:
                raise InvalidSpec(
                    f"tick ({spec.tick_hours}h) exceeds sample_period of {sid!r}"
                )
            if chan.channel_id not in asset.degradation_gain:
                raise InvalidSpec(f"channel {sid!r}: missing degradation_gain")
    if spec.horizon_hours < largest_f:
        raise InvalidSpec(
            f"horizon ({spec.horizon_hours}h) shorter than the largest F time ({largest_f}h)"
        )
    for fault in spec.faults:
        if fault.sensor not in sensors:
            raise InvalidSpec(f"fault references unknown sensor {fault.sensor!r}")
        if fault.kind not in FAULT_KINDS:
            raise InvalidSpec(f"unknown fault kind {fault.kind!r}")
        if not (0 <= fault.start_hours <= spec.horizon_hours):
            raise InvalidSpec(f"fault on {fault.sensor!r}: start outside horizon")


def _gaussian(rng: np.random.Generator) -> float:
    """Standard normal via Box-Muller on PCG64 uniforms (documented stream)."""
    u1 = rng.random()
    if u1 <= 0.0:
        u1 = 5e-324
    u2 = rng.random()
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def _channel_rng(seed: int, index: int, tag: int = _STREAM_CHANNEL) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, tag, index]))
    )


@dataclass
class _ChannelRun:
    asset: AssetSpec
    spec: SensorChannelSpec
    sensor: str
    gain: float
    onset_ms: int
    period_ms: int
    next_due_ms: int
    seq: int
    rng: np.random.Generator
    faults: List[FaultInjection]
    spike_pending: Dict[int, bool] = field(default_factory=dict)


class SimulatorState:
    """Single-owner stepping state; emitted frames are immutable."""

    def __init__(self, scenario: Scenario):
        validate_scenario(scenario)
        self.scenario = scenario
        self.start_ts_ms = scenario.start_ts_ms
        self.tick_ms = hours_to_ms(scenario.tick_hours)
        self.horizon_ms = hours_to_ms(scenario.horizon_hours)
        self.clock_ms = 0  # offset from start_ts_ms
        self._assets = {a.asset_id: a for a in scenario.assets}

        runs: List[_ChannelRun] = []
        ordered = sorted(
            (
                (asset.asset_id, chan.channel_id, asset, chan)
                for asset in scenario.assets
                for chan in asset.channels
            ),
            key=lambda item: (item[0], item[1]),
        )
        for index, (_, _, asset, chan) in enumerate(ordered):
            sid = sensor_id(asset.asset_id, chan.channel_id)
            faults = sorted(
                (f for f in scenario.faults if f.sensor == sid),
                key=lambda f: f.start_hours,
            )
            runs.append(
                _ChannelRun(
                    asset=asset,
                    spec=chan,
                    sensor=sid,
                    gain=float(asset.degradation_gain[chan.channel_id]),
                    onset_ms=hours_to_ms(asset.degradation_onset_hours),
                    period_ms=hours_to_ms(chan.sample_period_hours),
                    next_due_ms=0,
                    seq=0,
                    rng=_channel_rng(scenario.seed, index),
                    faults=list(faults),
                    spike_pending={i: True for i, f in enumerate(faults) if f.kind == "spike"},
                )
            )
        self._runs = runs

    def _mean_value(self, run: _ChannelRun, t_ms: int) -> float:
        mean = run.spec.nominal
        if t_ms >= run.onset_ms:
            past_p_hours = (t_ms - run.onset_ms) / MS_PER_HOUR
            mean += run.gain * past_p_hours ** run.asset.drift_exponent
        return mean

    def _apply_faults(self, run: _ChannelRun, t_ms: int, value: float):
        """Returns (value, suppressed)."""
        suppressed = False
        t_hours = t_ms / MS_PER_HOUR
        for i, fault in enumerate(run.faults):
            if t_hours < fault.start_hours:
                continue
            if fault.kind == "stuck-value":
                value = fault.magnitude
            elif fault.kind == "drift":
                value += fault.magnitude * (t_hours - fault.start_hours)
            elif fault.kind == "spike":
                if run.spike_pending.get(i):
                    value += fault.magnitude
                    run.spike_pending[i] = False
            elif fault.kind == "dropout":
                if t_hours <= fault.start_hours + abs(fault.magnitude):
                    suppressed = True
        return value, suppressed

    def step(self) -> List[TelemetryFrame]:
        """Advance one tick; emit every frame due at the current instant."""
        if self.clock_ms >= self.horizon_ms:
            raise HorizonExceeded(f"clock at {self.clock_ms}ms, horizon {self.horizon_ms}ms")
        now = self.clock_ms
        frames: List[TelemetryFrame] = []
        for run in self._runs:
            while run.next_due_ms <= now:
                t_ms = run.next_due_ms
                value = self._mean_value(run, t_ms)
                if run.spec.noise_sigma > 0:
                    value += run.spec.noise_sigma * _gaussian(run.rng)
                value, suppressed = self._apply_faults(run, t_ms, value)
                seq = run.seq
                run.seq += 1
                run.next_due_ms += run.period_ms
                if suppressed:
                    continue
                frames.append(
                    TelemetryFrame(
                        schema_version=WIRE_SCHEMA_VERSION,
                        asset=run.asset.asset_id,
                        sensor=run.sensor,
                        channel_kind=run.spec.kind,
                        ts=self.start_ts_ms + t_ms,
                        value=value,
                        unit=run.spec.unit,
                        seq=seq,
                    )
                )
        self.clock_ms += self.tick_ms
        return frames

    def done(self) -> bool:
        return self.clock_ms >= self.horizon_ms

    def ground_truth(self, asset_id: str) -> Tuple[int, int]:
        """(P, F) timestamps in epoch milliseconds; F - P is the P-F length."""
        asset = self._assets.get(asset_id)
        if asset is None:
            raise UnknownAsset(asset_id)
        p = self.start_ts_ms + hours_to_ms(asset.degradation_onset_hours)
        return p, p + hours_to_ms(asset.pf.length)


def build_scenario(spec: Scenario) -> SimulatorState:
    """Validate and instantiate; identical seeds yield identical emissions."""
    return SimulatorState(spec)


def sample_weibull(shape: float, scale: float, n: int, seed: int) -> np.ndarray:
    """Inverse-CDF Weibull draws from a dedicated PCG64 stream."""
    model = WeibullModel(shape_beta=shape, scale_eta=scale)  # validates parameters
    rng = _channel_rng(seed, 0, tag=_STREAM_LIFETIME)
    u = rng.random(n)
    return model.scale_eta * (-np.log1p(-u)) ** (1.0 / model.shape_beta)


def draw_lifetimes(scenario: Scenario, asset_id: str, n: int) -> np.ndarray:
    """Lifetime draws from the asset's configured Weibull model."""
    for index, asset in enumerate(sorted(scenario.assets, key=lambda a: a.asset_id)):
        if asset.asset_id == asset_id:
            if asset.lifetime_weibull is None:
                raise InvalidSpec(f"asset {asset_id!r} has no lifetime_weibull configured")
            shape, scale = asset.lifetime_weibull
            rng = _channel_rng(scenario.seed, index, tag=_STREAM_LIFETIME)
            u = rng.random(n)
            return scale * (-np.log1p(-u)) ** (1.0 / shape)
    raise UnknownAsset(asset_id)


def policy_rng(seed: int, asset_index: int, channel_index: int) -> np.random.Generator:
    """Noise stream for policy simulation sampling (independent of emission)."""
    return np.random.Generator(
        np.random.PCG64(
            np.random.SeedSequence(
                [seed & 0xFFFFFFFFFFFFFFFF, _STREAM_POLICY, asset_index, channel_index]
            )
        )
    )


def gaussian_draw(rng: np.random.Generator) -> float:
    return _gaussian(rng)


# ---------------------------------------------------------------------------
# Scenario file schema (versioned YAML)
# ---------------------------------------------------------------------------


def _require(mapping: Mapping, key: str, context: str):
    if key not in mapping:
        raise InvalidSpec(f"{context}: missing required key {key!r}")
    return mapping[key]


def scenario_from_dict(doc: Mapping) -> Scenario:
    if not isinstance(doc, Mapping):
        raise InvalidSpec("scenario document must be a mapping")
    version = _require(doc, "version", "scenario")
    if version != SCENARIO_SCHEMA_VERSION:
        raise InvalidSpec(f"unsupported scenario schema version {version!r}")
    try:
        assets = []
        for araw in _require(doc, "assets", "scenario") or []:
            channels = []
            gains: Dict[str, float] = {}
            for craw in _require(araw, "channels", f"asset {araw.get('asset_id')}") or []:
                channels.append(
                    SensorChannelSpec(
                        channel_id=str(_require(craw, "channel_id", "channel")),
                        kind=str(_require(craw, "kind", "channel")),
                        unit=str(craw.get("unit", "")),
                        nominal=float(_require(craw, "nominal", "channel")),
                        noise_sigma=float(craw.get("noise_sigma", 0.0)),
                        sample_period_hours=float(
                            _require(craw, "sample_period_hours", "channel")
                        ),
                    )
                )
                gains[channels[-1].channel_id] = float(craw.get("degradation_gain", 0.0))
            lifetime = None
            if araw.get("lifetime_weibull"):
                lw = araw["lifetime_weibull"]
                lifetime = (float(lw["shape"]), float(lw["scale"]))
            assets.append(
                AssetSpec(
                    asset_id=str(_require(araw, "asset_id", "asset")),
                    pattern_class=FailurePatternClass[str(araw.get("pattern_class", "B"))],
                    pf=PFInterval(
                        length=float(_require(araw, "pf_hours", "asset")),
                        unit_kind=str(araw.get("pf_unit", "time")),
                    ),
                    degradation_onset_hours=float(
                        _require(araw, "degradation_onset_hours", "asset")
                    ),
                    channels=tuple(channels),
                    degradation_gain=gains,
                    drift_exponent=float(araw.get("drift_exponent", 1.0)),
                    lifetime_weibull=lifetime,
                )
            )
        faults = tuple(
            FaultInjection(
                sensor=str(_require(fraw, "sensor", "fault")),
                kind=str(_require(fraw, "kind", "fault")),
                start_hours=float(_require(fraw, "start_hours", "fault")),
                magnitude=float(fraw.get("magnitude", 0.0)),
            )
            for fraw in doc.get("faults") or []
        )
        scenario = Scenario(
            seed=int(_require(doc, "seed", "scenario")),
            horizon_hours=float(_require(doc, "horizon_hours", "scenario")),
            tick_hours=float(_require(doc, "tick_hours", "scenario")),
            assets=tuple(assets),
            faults=faults,
            start_ts_ms=int(doc.get("start_ts_ms", 0)),
        )
    except InvalidSpec:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidSpec(f"malformed scenario document: {exc}") from exc
    validate_scenario(scenario)
    return scenario


def scenario_to_dict(scenario: Scenario) -> Dict:
    """Normalized form: sorted entries, defaults made explicit."""
    return {
        "version": SCENARIO_SCHEMA_VERSION,
        "seed": scenario.seed,
        "start_ts_ms": scenario.start_ts_ms,
        "horizon_hours": scenario.horizon_hours,
        "tick_hours": scenario.tick_hours,
        "assets": [
            {
                "asset_id": a.asset_id,
                "pattern_class": a.pattern_class.name,
                "pf_hours": a.pf.length,
                "pf_unit": a.pf.unit_kind,
                "degradation_onset_hours": a.degradation_onset_hours,
                "drift_exponent": a.drift_exponent,
                **(
                    {
                        "lifetime_weibull": {
                            "shape": a.lifetime_weibull[0],
                            "scale": a.lifetime_weibull[1],
                        }
                    }
                    if a.lifetime_weibull
                    else {}
                ),
                "channels": [
                    {
                        "channel_id": c.channel_id,
                        "kind": c.kind,
                        "unit": c.unit,
                        "nominal": c.nominal,
                        "noise_sigma": c.noise_sigma,
                        "sample_period_hours": c.sample_period_hours,
                        "degradation_gain": a.degradation_gain.get(c.channel_id, 0.0),
                    }
                    for c in sorted(a.channels, key=lambda c: c.channel_id)
                ],
            }
            for a in sorted(scenario.assets, key=lambda a: a.asset_id)
        ],
        "faults": [
            {
                "sensor": f.sensor,
                "kind": f.kind,
                "start_hours": f.start_hours,
                "magnitude": f.magnitude,
            }
            for f in sorted(scenario.faults, key=lambda f: (f.sensor, f.start_hours))
        ],
    }


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    return scenario_from_dict(doc)


def dump_scenario(scenario: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(scenario), sort_keys=False)
