import numpy as np
import pytest

from cbmengine.reliability import FailurePatternClass, PFInterval
from cbmengine.simulator import AssetSpec, Scenario, SensorChannelSpec


def make_channel(
    channel_id="temp",
    kind="point-temperature",
    nominal=70.0,
    noise_sigma=0.0,
    sample_period_hours=5.0,
    unit="degC",
):
    return SensorChannelSpec(
        channel_id=channel_id,
        kind=kind,
        unit=unit,
        nominal=nominal,
        noise_sigma=noise_sigma,
        sample_period_hours=sample_period_hours,
    )


def make_asset(
    asset_id,
    onset_hours,
    pf_hours=120.0,
    gain=0.02,
    channels=None,
    gains=None,
    pattern=FailurePatternClass.B,
    drift_exponent=1.0,
    noise_sigma=0.0,
    sample_period_hours=5.0,
):
    channels = (
        channels
        if channels is not None
        else (
            make_channel(
                noise_sigma=noise_sigma, sample_period_hours=sample_period_hours
            ),
        )
    )
    if gains is None:
        gains = {c.channel_id: gain for c in channels}
    return AssetSpec(
        asset_id=asset_id,
        pattern_class=pattern,
        pf=PFInterval(pf_hours),
        degradation_onset_hours=onset_hours,
        channels=tuple(channels),
        degradation_gain=gains,
        drift_exponent=drift_exponent,
    )


def make_scenario(
    n_assets=5,
    seed=42,
    horizon_hours=400.0,
    tick_hours=5.0,
    onset_base=120.0,
    onset_step=7.0,
    faults=(),
    **asset_kwargs,
):
    assets = tuple(
        make_asset(f"A{i:03d}", onset_base + onset_step * i, **asset_kwargs)
        for i in range(n_assets)
    )
    return Scenario(
        seed=seed,
        horizon_hours=horizon_hours,
        tick_hours=tick_hours,
        assets=assets,
        faults=tuple(faults),
    )


@pytest.fixture
def small_scenario():
    return make_scenario(n_assets=3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
