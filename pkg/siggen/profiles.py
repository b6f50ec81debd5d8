"""
Test-rig and component profiles for the synthetic vibration generator.

Defaults follow the dynamometer rig: 40 kHz accelerometers, 22.09 rpm
low-speed shaft, 1800 rpm high-speed shaft, 1:81.491 transmission. Gear
tooth counts are not published, so the tones below are plausible mesh and
defect lines picked on integer-Hz bins; they are configuration, not physics.
"""

import json
from enum import StrEnum
from pathlib import Path
from typing import List, Tuple, Union

from pydantic import BaseModel, Field, ValidationError, model_validator

from errors import ConfigError, DataFormatError
from store import atomic_write_text


class Health(StrEnum):
    HEALTHY = "healthy"
    DAMAGED = "damaged"


RING_GEAR = "ring gear"
LSS_BEARING = "low-speed shaft bearing"
HSS_BEARING = "high-speed shaft bearing"

# Channel order of stacked segments and of the three labels.
COMPONENT_ORDER: Tuple[str, ...] = (RING_GEAR, LSS_BEARING, HSS_BEARING)


class FaultSignature(BaseModel):
    """Surrogate damage manifestation added on top of the healthy signal.

    All-zero amplitudes with noise_floor_gain = 1 leave the damaged signal
    identical to the healthy one.
    """
    sideband_spacing_hz: float = Field(..., gt=0)
    sideband_amplitude: float = Field(0.0, ge=0)
    impulse_rate_hz: float = Field(0.0, ge=0)
    impulse_amplitude: float = Field(0.0, ge=0)
    impulse_resonance_hz: float = Field(800.0, gt=0)
    impulse_decay_s: float = Field(0.002, gt=0)
    noise_floor_gain: float = Field(1.0, ge=1.0)

    @property
    def is_identity(self) -> bool:
        return (
            self.sideband_amplitude == 0
            and (self.impulse_amplitude == 0 or self.impulse_rate_hz == 0)
            and self.noise_floor_gain == 1.0
        )


class ComponentProfile(BaseModel):
    """Spectral content of one monitored component."""
    name: str
    tones: List[Tuple[float, float]] = Field(default_factory=list)
    noise_sigma: float = Field(0.0, ge=0)
    fault_signature: FaultSignature

    @model_validator(mode="after")
    def _check_tones(self):
        for frequency, amplitude in self.tones:
            if frequency <= 0:
                raise ValueError(f"{self.name}: tone frequency must be positive, got {frequency}")
            if amplitude < 0:
                raise ValueError(f"{self.name}: tone amplitude must be >= 0, got {amplitude}")
        return self

    def max_frequency_hz(self) -> float:
        """Highest frequency the damaged signal can carry."""
        signature = self.fault_signature
        highest = max((f for f, _ in self.tones), default=0.0)
        if signature.sideband_amplitude > 0:
            highest += signature.sideband_spacing_hz
        if signature.impulse_amplitude > 0 and signature.impulse_rate_hz > 0:
            highest = max(highest, signature.impulse_resonance_hz)
        return highest


class RigProfile(BaseModel):
    """Drive-train speeds, sampling and the monitored components."""
    sample_rate_hz: float = Field(40000.0, gt=0)
    lss_speed_rpm: float = Field(22.09, gt=0)
    hss_speed_rpm: float = Field(1800.0, gt=0)
    transmission_ratio: float = Field(81.491, gt=0)
    components: List[ComponentProfile] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_rig(self):
        nyquist = self.sample_rate_hz / 2
        for component in self.components:
            highest = component.max_frequency_hz()
            if highest >= nyquist:
                raise ValueError(
                    f"{component.name}: content up to {highest} Hz is not below "
                    f"Nyquist {nyquist} Hz"
                )
        implied = self.hss_speed_rpm / self.lss_speed_rpm
        if abs(implied / self.transmission_ratio - 1.0) > 0.01:
            raise ValueError(
                f"Shaft speeds imply ratio {implied:.3f}, more than 1% away from "
                f"transmission_ratio {self.transmission_ratio}"
            )
        return self

    @property
    def hss_shaft_hz(self) -> float:
        return self.hss_speed_rpm / 60.0

    @property
    def lss_shaft_hz(self) -> float:
        return self.lss_speed_rpm / 60.0

    def component(self, name: str) -> ComponentProfile:
        for component in self.components:
            if component.name == name:
                return component
        raise ValueError(f"Unknown component '{name}'. Rig has: {[c.name for c in self.components]}")


def default_rig() -> RigProfile:
    """Rig profile with the three default components.

    High-speed stage mesh at 660 Hz is the 30 Hz shaft times 22 teeth;
    the ring-gear line sits at 132 Hz (6 Hz intermediate shaft, 22 teeth).
    """
    hss_hz = 1800.0 / 60.0
    components = [
        ComponentProfile(
            name=RING_GEAR,
            tones=[(132.0, 0.8), (264.0, 0.3)],
            noise_sigma=0.5,
            fault_signature=FaultSignature(
                sideband_spacing_hz=12.0,
                sideband_amplitude=0.4,
                impulse_rate_hz=5.0,
                impulse_amplitude=3.0,
                impulse_resonance_hz=420.0,
                noise_floor_gain=8.0,
            ),
        ),
        ComponentProfile(
            name=LSS_BEARING,
            tones=[(90.0, 0.4), (350.0, 0.3)],
            noise_sigma=0.5,
            fault_signature=FaultSignature(
                sideband_spacing_hz=8.0,
                sideband_amplitude=0.4,
                impulse_rate_hz=7.0,
                impulse_amplitude=3.0,
                impulse_resonance_hz=780.0,
                noise_floor_gain=8.0,
            ),
        ),
        ComponentProfile(
            name=HSS_BEARING,
            tones=[(hss_hz, 0.5), (hss_hz * 22, 1.0)],
            noise_sigma=0.5,
            fault_signature=FaultSignature(
                sideband_spacing_hz=hss_hz,
                sideband_amplitude=0.4,
                impulse_rate_hz=106.0,
                impulse_amplitude=2.0,
                impulse_resonance_hz=900.0,
                noise_floor_gain=8.0,
            ),
        ),
    ]
    return RigProfile(components=components)


def load_rig_profile(path: Union[str, Path]) -> RigProfile:
    """Load a rig profile from a JSON file.

    Raises:
        DataFormatError: File missing or not JSON
        ConfigError: Content violates the profile schema
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataFormatError(f"Rig profile not found: {path}", path=str(path))
    except json.JSONDecodeError as e:
        raise DataFormatError(f"Rig profile {path} is not valid JSON at byte {e.pos}: {e.msg}",
                              path=str(path), offset=e.pos)
    try:
        return RigProfile.model_validate(raw)
    except ValidationError as e:
        fields = [".".join(str(p) for p in err["loc"]) + f": {err['msg']}" for err in e.errors()]
        raise ConfigError(f"Invalid rig profile {path}: " + "; ".join(fields), fields=fields)


def save_rig_profile(rig: RigProfile, path: Union[str, Path]) -> Path:
    """Write a rig profile as JSON."""
    return atomic_write_text(path, rig.model_dump_json(indent=2) + "\n")
