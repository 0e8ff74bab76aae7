"""Synthesis of the raw complex receiver-array echo.

The received frame is the superposition of the direct wall return, the
two-bounce target return routed via the wall, and circular complex white
noise.  Echoes are built in the dechirped fast-time domain of a linear FMCW
chirp: a scatterer reached with total propagation delay tau contributes

    exp(j pi a tau^2) * exp(-j 2 pi a tau (T0/N) n),   n = 0..N-1

with chirp slope a, so its beat lands at fast-time frequency a*tau.  Delays
count one way per path segment, R / c; a wall point at range R therefore
returns with delay 2R/c, and the symmetric two-bounce path through the
specular point with delay 2(R1+R2)/c.  With the range axis calibrated as
c*delay/2 the wall peaks at its true range and the target return appears at
apparent range R1 + R2.

Amplitudes are calibrated against the configured post-processing SNRs: with
noise variance sigma_n^2, a per-sample signal amplitude A yields a post-2D-FFT
SNR of 10*log10(A^2/sigma_n^2) + 10*log10(Mt*Mr*N).  Free-space loss (1/R per
one-way segment) shapes only the relative weighting across scatterers; the
absolute scale is pinned by the SNR spec at a reference scatterer (the wall
center for the surface echo, the strongest specular pair for the target echo).
"""

from __future__ import annotations

import json
import math
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import (
    RadarConfig,
    ReflectiveSurface,
    SurfacePointSet,
    SPEED_OF_LIGHT,
    discretize_surface,
    effective_reflectors,
    solve_prp,
    xy_to_polar,
)
from .scenario import SceneClass, ScenarioSpec, SnrSpec


class OutOfWindowError(ValueError):
    """A scatterer's apparent range exceeds the unambiguous window N*dr."""


@dataclass(frozen=True)
class WaveformConfig:
    """Linear FMCW chirp, s(t) = exp(j pi a t^2)."""

    chirp_duration: float = 40e-6
    chirp_slope: float = 1e13

    @property
    def bandwidth_hz(self) -> float:
        return self.chirp_slope * self.chirp_duration

    @classmethod
    def from_bandwidth(cls, bandwidth_hz: float,
                       chirp_duration: float = 40e-6) -> "WaveformConfig":
        return cls(chirp_duration=chirp_duration,
                   chirp_slope=bandwidth_hz / chirp_duration)


@dataclass
class ScatterDraw:
    """Per-trial random scattering coefficients.

    Wall reflector coefficients and the target coefficient are unit-mean-power
    complex Rayleigh draws (Rayleigh magnitude, uniform phase).
    """

    surface_coeffs: np.ndarray      # (K,) complex
    target_coeff: complex
    noise_variance: float = 1.0

    @classmethod
    def draw(cls, num_reflectors: int, seed: int,
             noise_variance: float = 1.0) -> "ScatterDraw":
        rng = np.random.default_rng(seed)
        z = (rng.standard_normal(num_reflectors + 1)
             + 1j * rng.standard_normal(num_reflectors + 1)) / math.sqrt(2.0)
        return cls(surface_coeffs=z[:-1], target_coeff=complex(z[-1]),
                   noise_variance=noise_variance)

    @classmethod
    def unit(cls, num_reflectors: int,
             noise_variance: float = 1.0) -> "ScatterDraw":
        """Deterministic draw with unit coefficients, for calibration checks."""
        return cls(surface_coeffs=np.ones(num_reflectors, dtype=complex),
                   target_coeff=1.0 + 0.0j, noise_variance=noise_variance)


@dataclass
class RadarEcho:
    """Raw receiver frame, receivers x fast-time samples.

    When components are retained, ``samples`` equals their element-wise sum.
    """

    samples: np.ndarray                       # (M_r, N) complex
    components: dict[str, np.ndarray] | None = None
    target_illuminated: bool = True


def steering_vector(angle_deg: float, num_elements: int, spacing: float,
                    wavelength: float) -> np.ndarray:
    """ULA steering vector; element m carries phase 2*pi*(m*d/lambda)*sin(angle)."""
    u = math.sin(math.radians(angle_deg))
    m = np.arange(num_elements)
    return np.exp(2j * np.pi * (m * spacing / wavelength) * u)


def _steering_matrix(angles_deg: np.ndarray, radar: RadarConfig) -> np.ndarray:
    """(M_r, K) matrix of receive steering vectors."""
    u = np.sin(np.radians(np.asarray(angles_deg, dtype=float)))
    m = np.arange(radar.num_rx)[:, None]
    return np.exp(2j * np.pi * (radar.element_spacing / radar.carrier_wavelength)
                  * m * u[None, :])


def scattering_gain(incidence_angle_deg, scatter_direction_deg, theta_w_deg,
                    lambda_ratio: float, psi: float):
    """Amplitude gain of the forward-scatter lobe, between 0 and lambda_ratio.

    ``incidence_angle_deg`` is the bearing of the illuminating ray from the
    radar; ``scatter_direction_deg`` is the departure angle of the outgoing
    ray (see geometry.departure_angle_deg).  The lobe is centered on the
    specular departure direction incidence + 2*theta_w:

        gain^2 = lambda^2 * ((1 + cos(delta)) / 2) ** psi

    with delta the deviation from specular, so gain == lambda_ratio exactly
    on the specular direction and decays monotonically away from it.
    """
    if psi < 0:
        raise ValueError("psi must be non-negative")
    delta = np.radians(np.asarray(incidence_angle_deg, dtype=float)
                       + 2.0 * theta_w_deg
                       - np.asarray(scatter_direction_deg, dtype=float))
    base = (1.0 + np.cos(delta)) / 2.0
    g2 = lambda_ratio**2 * base**psi
    out = np.sqrt(g2)
    return float(out) if np.ndim(out) == 0 else out


def _beat(taus: np.ndarray, waveform: WaveformConfig, num_samples: int) -> np.ndarray:
    """Dechirped fast-time samples for delays ``taus``; output (..., N)."""
    a = waveform.chirp_slope
    t = (waveform.chirp_duration / num_samples) * np.arange(num_samples)
    taus = np.asarray(taus, dtype=float)
    rvp = np.exp(1j * np.pi * a * taus**2)
    return rvp[..., None] * np.exp(-2j * np.pi * a * taus[..., None] * t)


def calibrate_noise(snr: SnrSpec, radar: RadarConfig,
                    wall_amplitude: float = 1.0) -> float:
    """Noise variance that realizes the surface post-processing SNR.

    Solves  snr.surface_snr_db = 10*log10(A^2 / sigma_n^2) + 10*log10(Mt*Mr*N)
    for sigma_n^2, for a wall reflector of per-sample amplitude A.
    """
    if not math.isfinite(snr.surface_snr_db):
        raise ValueError("surface SNR must be finite")
    gain = radar.num_tx * radar.num_rx * radar.num_samples
    return wall_amplitude**2 * gain * 10.0 ** (-snr.surface_snr_db / 10.0)


def amplitude_for_snr(snr_db: float, radar: RadarConfig,
                      noise_variance: float) -> float:
    """Per-sample amplitude whose post-processing SNR equals ``snr_db``."""
    gain = radar.num_tx * radar.num_rx * radar.num_samples
    return math.sqrt(noise_variance * 10.0 ** (snr_db / 10.0) / gain)


def synthesize_surface_echo(reflectors: SurfacePointSet, radar: RadarConfig,
                            surface: ReflectiveSurface, draw: ScatterDraw,
                            waveform: WaveformConfig,
                            amplitude: float = 1.0) -> np.ndarray:
    """Direct wall return: sum of per-reflector dechirped echoes.

    Reflector k at range R_k, bearing phi_k, contributes its Rayleigh
    coefficient times the backscatter fraction (1 - lambda) and the two-way
    free-space weight 1/R_k^2, on receive steering a_r(phi_k) and delay
    2 R_k / c.  The echo is scaled so the per-sample amplitude of a unit
    coefficient reflector at the wall-center range equals ``amplitude``.
    """
    if len(reflectors) == 0:
        raise ValueError("empty reflector set")
    if len(draw.surface_coeffs) != len(reflectors):
        raise ValueError("draw size does not match reflector count")
    if np.max(reflectors.ranges) >= radar.max_range_m:
        raise OutOfWindowError("wall reflector beyond the unambiguous range")

    back = 1.0 - surface.backscatter_ratio
    if back <= 0.0:
        return np.zeros((radar.num_rx, radar.num_samples), dtype=complex)

    r_ref, _ = xy_to_polar(surface.center)
    loss = (r_ref / reflectors.ranges) ** 2        # relative two-way amplitude
    weights = amplitude * draw.surface_coeffs * loss
    taus = 2.0 * reflectors.ranges / SPEED_OF_LIGHT
    beats = _beat(taus, waveform, radar.num_samples)       # (K, N)
    steer = _steering_matrix(reflectors.angles_deg, radar)  # (M_r, K)
    return steer @ (weights[:, None] * beats)


def synthesize_target_echo(reflectors: SurfacePointSet, radar: RadarConfig,
                           surface: ReflectiveSurface, target_xy,
                           draw: ScatterDraw, waveform: WaveformConfig,
                           amplitude: float = 1.0) -> np.ndarray:
    """Two-bounce target return routed via the wall, summed over all
    (outbound, inbound) reflector pairs.

    The illuminated subsets are the reflectors within four range bins of
    the specular point: the wall cell containing the specular point and its
    immediate neighbors carry the forward-scattered energy (one directive
    element per range cell, cells processed independently), so the return
    aggregates into a compact blob at the specular cell rather than a
    glistening streak spanning the whole wall.  Each leg through reflector
    k carries the forward-scatter lobe gain, the reflector's Rayleigh
    coefficient and the 1/(R_radar_k * R_k_target) free-space weight; the
    pair (k', k~) arrives with the one-way-per-segment delay
    (R_rk' + R_k't + R_tk~ + R_k~r)/c on receive steering a_r(phi_k~).

    Calibration: every pair contributes a matched-filter response at the
    specular cell (steering and beat vectors of (phi_Ko, R1 + R2)); since
    the pair coefficients are independent unit-power draws, the expected
    peak power there is the sum of the squared per-pair responses.  The
    echo is scaled so the root of that expected power corresponds to an
    effective per-sample amplitude of ``amplitude``, then multiplied by the
    target's Rayleigh coefficient, so per-trial fading is preserved around
    the calibrated level.

    When the specular point misses the finite segment the target is not
    illuminated: a zero matrix is returned under a warning.
    """
    prp = solve_prp(surface, (0.0, 0.0), np.asarray(target_xy, dtype=float))
    if not prp.on_segment:
        warnings.warn("specular point off the finite surface; target not "
                      "illuminated", stacklevel=2)
        return np.zeros((radar.num_rx, radar.num_samples), dtype=complex)
    if prp.r_radar_prp + prp.r_prp_target >= radar.max_range_m:
        raise OutOfWindowError("two-bounce path beyond the unambiguous range")
    if len(draw.surface_coeffs) != len(reflectors):
        raise ValueError("draw size does not match reflector count")

    du = np.abs(np.sin(np.radians(reflectors.angles_deg))
                - math.sin(math.radians(prp.angle_deg)))
    near_specular = (np.abs(reflectors.ranges - prp.r_radar_prp)
                     <= 4.0 * radar.range_bin_m) & (du <= 1.0 / radar.num_rx)
    if not near_specular.any():
        near_specular = np.abs(reflectors.ranges - prp.r_radar_prp).argmin() \
            == np.arange(len(reflectors))
    coeffs = draw.surface_coeffs[near_specular]

    tgt = np.asarray(target_xy, dtype=float)
    r_rk = reflectors.ranges[near_specular]
    angles = reflectors.angles_deg[near_specular]
    d = tgt[None, :] - reflectors.xy[near_specular]
    r_kt = np.hypot(d[:, 0], d[:, 1])
    scatter_dirs = np.degrees(np.arctan2(d[:, 0], -d[:, 1]))
    gains = scattering_gain(angles, scatter_dirs,
                            surface.orientation_deg, surface.backscatter_ratio,
                            surface.beamwidth_exponent)

    leg_det = gains / (r_rk * r_kt)               # deterministic leg weight
    if float(np.max(leg_det)) <= 0.0:
        return np.zeros((radar.num_rx, radar.num_samples), dtype=complex)

    s = r_rk + r_kt
    taus = (s[:, None] + s[None, :]) / SPEED_OF_LIGHT
    beats = _beat(taus, waveform, radar.num_samples)        # (K, K, N)
    steer = _steering_matrix(angles, radar)

    leg = coeffs * leg_det
    pair_w = np.outer(leg, leg)                   # (K', K~) -> (k_out, k_in)
    echo = steer @ np.einsum("ab,abn->bn", pair_w, beats)

    # expected peak power at the specular cell under unit-power draws:
    # sum of squared per-pair matched-filter responses
    a_spec = steering_vector(prp.angle_deg, radar.num_rx,
                             radar.element_spacing, radar.carrier_wavelength)
    b_spec = _beat(np.array(2.0 * (prp.r_radar_prp + prp.r_prp_target)
                            / SPEED_OF_LIGHT), waveform, radar.num_samples)
    angle_resp = np.conj(a_spec) @ steer                     # (K~,)
    range_resp = np.einsum("abn,n->ab", beats, np.conj(b_spec.ravel()))
    pair_resp = np.outer(leg_det, leg_det) * range_resp * angle_resp[None, :]
    agg = math.sqrt(float(np.sum(np.abs(pair_resp) ** 2)))
    agg /= radar.num_rx * radar.num_samples
    if agg <= 0.0:
        return np.zeros((radar.num_rx, radar.num_samples), dtype=complex)
    return draw.target_coeff * (amplitude / agg) * echo


def synthesize_direct_echo(target_xy, radar: RadarConfig,
                           waveform: WaveformConfig, amplitude: float = 1.0,
                           coeff: complex = 1.0 + 0.0j) -> np.ndarray:
    """Single-scatterer direct return at the target's own polar cell."""
    r, ang = xy_to_polar(target_xy)
    if r >= radar.max_range_m:
        raise OutOfWindowError("target beyond the unambiguous range")
    beat = _beat(np.array(2.0 * r / SPEED_OF_LIGHT), waveform, radar.num_samples)
    steer = steering_vector(ang, radar.num_rx, radar.element_spacing,
                            radar.carrier_wavelength)
    return amplitude * coeff * np.outer(steer, beat)


def _noise(radar: RadarConfig, variance: float, rng: np.random.Generator) -> np.ndarray:
    shape = (radar.num_rx, radar.num_samples)
    return math.sqrt(variance / 2.0) * (rng.standard_normal(shape)
                                        + 1j * rng.standard_normal(shape))


def suppress_point_returns(samples: np.ndarray, radar: RadarConfig,
                           max_components: int = 6,
                           stop_db: float = 18.0) -> np.ndarray:
    """Successively cancel dominant point returns from a frame.

    Finds the strongest cell of a coarsely padded transform, subtracts the
    least-squares matched rank-one response (steering vector times beat
    vector) at that cell, and repeats while the residual peak stays
    ``stop_db`` above the median map magnitude, up to ``max_components``
    times.  Removing a return this way removes its entire sidelobe
    structure, which lets the distributed surface ridge be searched behind
    a much stronger point reflection.  Operates on a copy.
    """
    waveform = WaveformConfig.from_bandwidth(radar.bandwidth_hz)
    m_r, n = samples.shape
    pad = 256
    du = radar.element_spacing / radar.carrier_wavelength
    work = samples.astype(complex).copy()
    t_gate = 10.0 ** (stop_db / 20.0)
    for _ in range(max_components):
        padded = np.zeros((pad, pad), dtype=complex)
        padded[:m_r, :n] = work
        z = np.fft.fftshift(np.fft.ifft(np.fft.fft(padded, axis=0), axis=1)
                            * pad, axes=0)
        mag = np.abs(z)
        if float(mag.max()) < float(np.median(mag)) * t_gate:
            break
        p, q = np.unravel_index(int(np.argmax(mag)), mag.shape)
        u = (p - pad // 2) / (pad * du)
        if abs(u) > 1.0:
            break
        r = q * radar.max_range_m / pad
        a = steering_vector(math.degrees(math.asin(u)), m_r,
                            radar.element_spacing, radar.carrier_wavelength)
        b = _beat(np.array(2.0 * r / SPEED_OF_LIGHT), waveform, n).ravel()
        sig = np.outer(a, b)
        amp = np.vdot(sig, work) / (m_r * n)
        work -= amp * sig
    return work


def synthesize(spec: ScenarioSpec, keep_components: bool = False,
               include_noise: bool = True,
               ghost_suppression_db: float = 15.0) -> RadarEcho:
    """Build the full receiver frame for a scenario.

    Components by scene class:

        nlos                    wall + two-bounce target + noise
        los_no_surface          direct target + noise
        los_with_surface_no_mp  wall + direct target + noise
        los_with_surface_mp     wall + direct target + two-bounce ghost + noise

    The ghost return of a visible target reuses the two-bounce synthesizer at
    ``ghost_suppression_db`` below the target SNR.  Deterministic under
    spec.seed; sub-streams for the surface jitter, coefficient draws and
    noise are split from it so components can be reproduced in isolation.
    """
    radar = spec.radar
    waveform = WaveformConfig.from_bandwidth(radar.bandwidth_hz)
    ss = np.random.SeedSequence(spec.seed)
    seed_surface, seed_draw, seed_noise = (int(c.generate_state(1)[0])
                                           for c in ss.spawn(3))

    noise_var = calibrate_noise(spec.snr, radar)
    target_amp = amplitude_for_snr(spec.snr.target_snr_db, radar, noise_var)

    components: dict[str, np.ndarray] = {}
    illuminated = True

    if spec.surface is not None:
        points = discretize_surface(spec.surface, radar, rng_seed=seed_surface)
        reflectors = effective_reflectors(points, radar)
        draw = ScatterDraw.draw(len(reflectors), seed_draw,
                                noise_variance=noise_var)
        components["surface"] = synthesize_surface_echo(
            reflectors, radar, spec.surface, draw, waveform, amplitude=1.0)
    else:
        draw = ScatterDraw.draw(0, seed_draw, noise_variance=noise_var)

    if spec.scene_class is SceneClass.NLOS:
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            try:
                components["target"] = synthesize_target_echo(
                    reflectors, radar, spec.surface, spec.target.xy, draw,
                    waveform, amplitude=target_amp)
            except UserWarning:
                components["target"] = np.zeros(
                    (radar.num_rx, radar.num_samples), dtype=complex)
                illuminated = False
    elif spec.target is not None and spec.scene_class in (
            SceneClass.LOS_NO_SURFACE, SceneClass.LOS_SURFACE_NO_MP,
            SceneClass.LOS_SURFACE_MP):
        components["target"] = synthesize_direct_echo(
            spec.target.xy, radar, waveform, amplitude=target_amp,
            coeff=draw.target_coeff)
        if spec.scene_class is SceneClass.LOS_SURFACE_MP:
            ghost_amp = amplitude_for_snr(
                spec.snr.target_snr_db - ghost_suppression_db, radar, noise_var)
            ghost_draw = ScatterDraw(surface_coeffs=draw.surface_coeffs,
                                     target_coeff=draw.target_coeff,
                                     noise_variance=noise_var)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                components["ghost"] = synthesize_target_echo(
                    reflectors, radar, spec.surface, spec.target.xy,
                    ghost_draw, waveform, amplitude=ghost_amp)

    if include_noise:
        components["noise"] = _noise(radar, noise_var,
                                     np.random.default_rng(seed_noise))

    samples = np.zeros((radar.num_rx, radar.num_samples), dtype=complex)
    for part in components.values():
        samples = samples + part
    return RadarEcho(samples=samples,
                     components=components if keep_components else None,
                     target_illuminated=illuminated)


# ---------------------------------------------------------------------------
# binary echo export: 32-byte little-endian header + row-major complex64

_MAGIC = b"NLRE"
_HEADER = struct.Struct("<4sHHIIdQ")     # magic, version, pad, M_r, N, dr, seed
_VERSION = 1


def write_echo(path, echo: RadarEcho, radar: RadarConfig, seed: int = 0,
               metadata: dict | None = None) -> None:
    """Dump a frame to ``path`` and a JSON sidecar to ``path + '.json'``."""
    m_r, n = echo.samples.shape
    header = _HEADER.pack(_MAGIC, _VERSION, 0, m_r, n, radar.range_bin_m,
                          seed & 0xFFFFFFFFFFFFFFFF)
    assert len(header) == 32
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(echo.samples.astype(np.complex64)).tobytes())
    side = {"num_rx": m_r, "num_samples": n, "range_bin_m": radar.range_bin_m,
            "seed": seed, "dtype": "complex64", "layout": "row-major"}
    if metadata:
        side.update(metadata)
    with open(str(path) + ".json", "w", encoding="utf-8") as f:
        json.dump(side, f, indent=2, sort_keys=True)
        f.write("\n")


def read_echo(path) -> tuple[np.ndarray, dict]:
    """Load a frame written by write_echo; returns (samples, header fields)."""
    with open(path, "rb") as f:
        magic, version, _, m_r, n, dr, seed = _HEADER.unpack(f.read(32))
        if magic != _MAGIC:
            raise ValueError("not an echo file (bad magic)")
        data = np.frombuffer(f.read(), dtype=np.complex64).reshape(m_r, n)
    return data, {"version": version, "num_rx": m_r, "num_samples": n,
                  "range_bin_m": dr, "seed": seed}
