"""
Synthetic accelerometer signals for healthy and damaged components.

Healthy: sum of tones plus white Gaussian noise.
Damaged: the same tones amplitude-modulated at the sideband spacing,
decaying resonance bursts at the impulse rate, and the noise floor scaled
by noise_floor_gain.
"""

import math
import time
from typing import Dict, Tuple

import numpy as np
from scipy import signal as sps

from logging_config import signal_logger
from .profiles import COMPONENT_ORDER, ComponentProfile, Health, RigProfile
from .timeseries import TimeSeries


def sample_count(duration_s: float, sample_rate_hz: float) -> int:
    """Exact sample count for a duration, rejecting fractional counts."""
    if not duration_s > 0:
        raise ValueError(f"duration_s must be positive, got {duration_s}")
    exact = duration_s * sample_rate_hz
    count = round(exact)
    if count < 1 or abs(exact - count) > 1e-6:
        raise ValueError(
            f"duration_s={duration_s} at {sample_rate_hz} Hz gives {exact} samples; "
            "the count must be an integer"
        )
    return count


def synthesize_samples(
    profile: ComponentProfile,
    rig: RigProfile,
    health: Health,
    duration_s: float,
    seed: int,
) -> np.ndarray:
    """Float64 samples of one channel of synthetic vibration.

    Pure function of its arguments: the random stream is drawn in the same
    order for both health states, so a damaged realization shares tone
    phases and noise shape with the healthy one of the same seed.

    Args:
        profile: Component spectral content and fault signature
        rig: Sampling rate and drive-train context
        health: Health state to synthesize
        duration_s: Signal length in seconds
        seed: Random seed

    Returns:
        Array of exactly duration_s * sample_rate_hz samples

    Raises:
        ValueError: Non-positive or fractional duration, or content at or above Nyquist
    """
    health = Health(health)
    fs = rig.sample_rate_hz
    n = sample_count(duration_s, fs)
    nyquist = fs / 2
    highest = profile.max_frequency_hz()
    if highest >= nyquist:
        raise ValueError(
            f"{profile.name}: content up to {highest} Hz is not below Nyquist {nyquist} Hz "
            f"at sample rate {fs} Hz"
        )

    rng = np.random.default_rng(seed)
    signature = profile.fault_signature
    damaged = health == Health.DAMAGED

    tone_phases = rng.uniform(0.0, 2 * math.pi, size=len(profile.tones))
    modulation_phase = rng.uniform(0.0, 2 * math.pi)
    impulse_phase = rng.uniform(0.0, 1.0)

    t = np.arange(n, dtype=np.float64) / fs
    samples = np.zeros(n, dtype=np.float64)

    modulation = None
    if damaged and signature.sideband_amplitude > 0:
        modulation = 1.0 + signature.sideband_amplitude * np.cos(
            2 * math.pi * signature.sideband_spacing_hz * t + modulation_phase
        )

    for (frequency, amplitude), phase in zip(profile.tones, tone_phases):
        tone = amplitude * np.sin(2 * math.pi * frequency * t + phase)
        if modulation is not None:
            tone *= modulation
        samples += tone

    if profile.noise_sigma > 0:
        sigma = profile.noise_sigma * (signature.noise_floor_gain if damaged else 1.0)
        samples += rng.normal(0.0, sigma, size=n)

    if damaged and signature.impulse_amplitude > 0 and signature.impulse_rate_hz > 0:
        samples += _impulse_bursts(n, fs, signature.impulse_rate_hz, impulse_phase,
                                   signature.impulse_amplitude, signature.impulse_resonance_hz,
                                   signature.impulse_decay_s)

    return samples


def generate_signal(
    profile: ComponentProfile,
    rig: RigProfile,
    health: Health,
    duration_s: float,
    seed: int,
) -> TimeSeries:
    """Generate one channel of synthetic vibration.

    Samples are snapped to float32-representable values, so a raw-f32-le
    file written from the series loads back bit-identical. See
    synthesize_samples for the arguments and errors.
    """
    health = Health(health)
    samples = synthesize_samples(profile, rig, health, duration_s, seed)
    samples = samples.astype(np.float32).astype(np.float64)
    return TimeSeries(samples=samples, sample_rate_hz=rig.sample_rate_hz, channel=profile.name,
                      health=health, seed=seed)


def _impulse_bursts(n: int, fs: float, rate_hz: float, phase: float, amplitude: float,
                    resonance_hz: float, decay_s: float) -> np.ndarray:
    """Periodic exponentially decaying resonance bursts."""
    period = 1.0 / rate_hz
    onsets = np.arange(phase * period, n / fs, period)
    indices = np.round(onsets * fs).astype(np.int64)
    indices = indices[indices < n]
    train = np.zeros(n, dtype=np.float64)
    train[indices] = 1.0

    kernel_len = max(1, int(math.ceil(5 * decay_s * fs)))
    tau = np.arange(kernel_len, dtype=np.float64) / fs
    kernel = amplitude * np.exp(-tau / decay_s) * np.sin(2 * math.pi * resonance_hz * tau)
    return sps.oaconvolve(train, kernel)[:n]


def generate_rig_signals(
    rig: RigProfile,
    duration_s: float,
    seed: int,
) -> Dict[Tuple[str, Health], TimeSeries]:
    """Generate every (component, health) channel of a rig.

    Each channel gets its own seed derived from `seed` and its position, so
    channels are independent and may be produced in any order.
    """
    signal_logger.started(
        "generate_rig_signals", components=len(rig.components), duration_s=duration_s, seed=seed,
    )
    start_time = time.time()

    children = np.random.SeedSequence(seed).spawn(len(rig.components) * 2)
    signals = {}
    ordered = sorted(rig.components, key=lambda c: _component_rank(c.name))
    for i, component in enumerate(ordered):
        for j, health in enumerate((Health.HEALTHY, Health.DAMAGED)):
            child_seed = int(children[2 * i + j].generate_state(1, dtype=np.uint64)[0] >> 1)
            signals[(component.name, health)] = generate_signal(
                component, rig, health, duration_s, child_seed
            )

    signal_logger.finished("generate_rig_signals", elapsed_s=time.time() - start_time, channels=len(signals))
    return signals


def _component_rank(name: str) -> int:
    try:
        return COMPONENT_ORDER.index(name)
    except ValueError:
        return len(COMPONENT_ORDER)
