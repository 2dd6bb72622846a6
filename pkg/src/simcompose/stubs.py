"""Deterministic package stubs for the bundled sea/ship knowledge base.

Each stub is a pure function over JSON payloads with a declared value-id
signature; numeric outputs are rounded to nine decimals to keep serialized
results byte-stable.
"""

from __future__ import annotations

from .workflow import PackageRegistry, PackageStub


def _round(x: float) -> float:
    return round(float(x), 9)


def _swan(inputs: dict, params: dict) -> dict:
    wind = inputs["near_water_wind"]
    if not isinstance(wind, (int, float)):
        raise ValueError("near_water_wind payload must be a wind speed")
    if wind < 0:
        raise ValueError("wind speed must be non-negative")
    # Significant wave height scales with the driving wind.
    return {"wave_spectrum": _round(0.3 * wind)}


def _level_currents(inputs: dict, params: dict) -> dict:
    obs = inputs["level_obs"]
    series = obs if isinstance(obs, list) else [obs]
    if not series:
        raise ValueError("level_obs payload is empty")
    return {"water_level": _round(sum(float(x) for x in series) / len(series))}


def _spectrum(inputs: dict, params: dict) -> dict:
    height = float(inputs["wave_spectrum"])
    return {
        "wave_parameters": {
            "significant_height": _round(height),
            "mean_period": _round(3.0 + 0.5 * height),
        }
    }


def _ship_dynamics(inputs: dict, params: dict) -> dict:
    height = float(inputs["wave_spectrum"])
    hull = params.get("hull")
    if not isinstance(hull, dict) or "length" not in hull:
        raise ValueError("hull parameter must carry a length")
    length = float(hull["length"])
    if length <= 0:
        raise ValueError("hull length must be positive")
    return {
        "rocking": _round(25.0 * height / length),
        "danger_level": _round(min(1.0, height / 5.0)),
    }


def _advisor(inputs: dict, params: dict) -> dict:
    danger = float(inputs["danger_level"])
    margin = float(params.get("safety_margin", 0.0))
    return {"recommendation": "hold_course" if danger + margin < 0.9 else "reduce_speed"}


def fixture_registry() -> PackageRegistry:
    """Registry covering every package the bundled classes reference."""
    return PackageRegistry(
        stubs=(
            PackageStub(
                id="swan_stub",
                inputs=frozenset({"near_water_wind", "bathymetry"}),
                outputs=frozenset({"wave_spectrum"}),
                fn=_swan,
            ),
            PackageStub(
                id="level_currents_stub",
                inputs=frozenset({"level_obs"}),
                outputs=frozenset({"water_level"}),
                fn=_level_currents,
            ),
            PackageStub(
                id="spectrum_stub",
                inputs=frozenset({"wave_spectrum"}),
                outputs=frozenset({"wave_parameters"}),
                fn=_spectrum,
            ),
            PackageStub(
                id="ship_dynamics_stub",
                inputs=frozenset({"wave_spectrum"}),
                outputs=frozenset({"rocking", "danger_level"}),
                fn=_ship_dynamics,
            ),
            PackageStub(
                id="advisor_stub",
                inputs=frozenset({"danger_level"}),
                outputs=frozenset({"recommendation"}),
                fn=_advisor,
            ),
        )
    )
