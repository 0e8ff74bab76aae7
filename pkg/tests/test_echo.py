import math
import warnings

import numpy as np
import pytest

from nlosradar import (
    OutOfWindowError,
    PointTarget,
    RadarConfig,
    ReflectiveSurface,
    SceneClass,
    ScenarioSpec,
    SnrSpec,
    amplitude_for_snr,
    calibrate_noise,
    compute_ra_map,
    polar_to_xy,
    read_echo,
    scattering_gain,
    solve_prp,
    steering_vector,
    synthesize,
    synthesize_direct_echo,
    synthesize_surface_echo,
    synthesize_target_echo,
    target_from_prp,
    write_echo,
)
from nlosradar.echo import ScatterDraw, WaveformConfig, suppress_point_returns
from nlosradar.geometry import discretize_surface, effective_reflectors


@pytest.fixture
def waveform(radar):
    return WaveformConfig.from_bandwidth(radar.bandwidth_hz)


def test_waveform_product(radar):
    wf = WaveformConfig.from_bandwidth(radar.bandwidth_hz, chirp_duration=40e-6)
    assert wf.bandwidth_hz == pytest.approx(radar.bandwidth_hz, rel=1e-15)


def test_steering_boresight_all_ones(radar):
    v = steering_vector(0.0, radar.num_rx, radar.element_spacing,
                        radar.carrier_wavelength)
    assert np.allclose(v, 1.0)


def test_steering_conjugate_symmetry(radar):
    v_pos = steering_vector(17.0, radar.num_rx, radar.element_spacing,
                            radar.carrier_wavelength)
    v_neg = steering_vector(-17.0, radar.num_rx, radar.element_spacing,
                            radar.carrier_wavelength)
    assert np.allclose(v_neg, np.conj(v_pos))
    assert np.allclose(np.abs(v_pos), 1.0)


def test_steering_30deg_half_wavelength_phases():
    lam = 4e-3
    v = steering_vector(30.0, 4, lam / 2, lam)
    phases = np.angle(v)
    expected = np.array([0.0, np.pi / 2, np.pi, -np.pi / 2])  # 3pi/2 wrapped
    assert np.allclose(np.exp(1j * phases), np.exp(1j * expected), atol=1e-12)


def test_scattering_gain_specular_and_null():
    # on the specular direction the lobe carries the full forward ratio
    g = scattering_gain(6.3, 2 * 25.0 + 6.3, 25.0, 0.846, 14.0)
    assert g**2 == pytest.approx(0.846**2, abs=1e-12)
    assert g**2 == pytest.approx(0.7157159999999999, abs=1e-6)
    # reversed direction is the null
    g180 = scattering_gain(0.0, 180.0, 0.0, 0.846, 14.0)
    assert g180 == pytest.approx(0.0, abs=1e-12)


def test_scattering_gain_90deg_deviation():
    g = scattering_gain(0.0, 90.0, 0.0, 0.846, 14.0)
    assert g**2 == pytest.approx(4.3683837890624994e-05, rel=1e-9)


def test_scattering_gain_monotone_decay():
    devs = np.arange(0.0, 181.0, 5.0)
    g = scattering_gain(0.0, devs, 0.0, 0.846, 14.0)
    assert np.all(np.diff(g) <= 1e-12)
    assert np.all(g <= 0.846 + 1e-12)


def test_calibrate_noise_processing_gain(radar):
    # unit per-sample amplitude at 0 dB raw gives 10 log10(M_r N) after gain
    snr = SnrSpec(surface_snr_db=10 * math.log10(16 * 128), target_snr_db=50.0)
    assert calibrate_noise(snr, radar) == pytest.approx(1.0, rel=1e-12)
    amp = amplitude_for_snr(snr.surface_snr_db, radar, noise_variance=1.0)
    assert amp == pytest.approx(1.0, rel=1e-12)


def test_delta_snr_is_difference():
    snr = SnrSpec(surface_snr_db=30.0, target_snr_db=55.0)
    assert snr.delta_snr_db == pytest.approx(25.0)


def test_single_reflector_peak_bins(radar, waveform):
    surf = ReflectiveSurface(center_x=0.0, center_y=15.0, length=0.05,
                             orientation_deg=0.0)
    pts = discretize_surface(surf, radar)
    refl = effective_reflectors(pts, radar)
    assert len(refl) == 1
    echo = synthesize_surface_echo(refl, radar, surf, ScatterDraw.unit(1),
                                   waveform)
    m = compute_ra_map(echo, radar)
    i, j = np.unravel_index(np.argmax(m.magnitude), m.magnitude.shape)
    assert (i, j) == (160, 256)            # padded bin of 15 m at boresight
    assert m.range_axis_m[i] == pytest.approx(15.0)


def test_full_forward_scatter_zeroes_surface_echo(radar, waveform):
    surf = ReflectiveSurface(center_x=0.0, center_y=15.0, length=4.0,
                             orientation_deg=0.0, backscatter_ratio=1.0)
    pts = discretize_surface(surf, radar)
    refl = effective_reflectors(pts, radar)
    echo = synthesize_surface_echo(refl, radar, surf,
                                   ScatterDraw.unit(len(refl)), waveform)
    assert np.all(echo == 0)


def test_two_symmetric_reflectors_symmetric_map(radar, waveform):
    from nlosradar.geometry import SurfacePointSet, polar_to_xy as p2x
    surf = ReflectiveSurface(center_x=0.0, center_y=15.0, length=8.0,
                             orientation_deg=0.0)
    xy = np.array([p2x(15.0, -20.0), p2x(15.0, 20.0)])
    r = np.hypot(xy[:, 0], xy[:, 1])
    ang = np.degrees(np.arctan2(xy[:, 0], xy[:, 1]))
    pts = SurfacePointSet(xy=xy, ranges=r, angles_deg=ang,
                          range_bins=np.round(r / radar.range_bin_m).astype(int))
    echo = synthesize_surface_echo(pts, radar, surf, ScatterDraw.unit(2),
                                   waveform)
    m = compute_ra_map(echo, radar)
    left = m.magnitude[:, 1:256]
    right = m.magnitude[:, 257:]
    assert np.allclose(left, right[:, ::-1], atol=1e-6 * m.magnitude.max())


def test_surface_echo_out_of_window(radar, waveform):
    surf = ReflectiveSurface(center_x=0.0, center_y=49.0, length=1.0,
                             orientation_deg=0.0)
    pts = discretize_surface(
        surf, RadarConfig(num_samples=256))          # wider window to build it
    with pytest.raises(OutOfWindowError):
        synthesize_surface_echo(pts, radar, surf,
                                ScatterDraw.unit(len(pts)), waveform)


def test_two_bounce_peak_at_apparent_range(radar, waveform, far_surface):
    target = target_from_prp(far_surface, 6.3, 11.9)
    prp = solve_prp(far_surface, (0.0, 0.0), target.xy)
    app = prp.r_radar_prp + prp.r_prp_target
    assert app == pytest.approx(34.9816634794964, abs=1e-9)

    pts = discretize_surface(far_surface, radar, rng_seed=1)
    refl = effective_reflectors(pts, radar)
    echo = synthesize_target_echo(refl, radar, far_surface, target.xy,
                                  ScatterDraw.unit(len(refl)), waveform)
    m = compute_ra_map(echo, radar)
    i, j = np.unravel_index(np.argmax(m.magnitude), m.magnitude.shape)
    assert abs(m.range_axis_m[i] - app) <= radar.range_bin_m
    u_err = abs(math.sin(math.radians(m.angle_axis_deg[j]))
                - math.sin(math.radians(prp.angle_deg)))
    assert u_err <= 2.0 / radar.num_rx


def test_zero_forward_scatter_zeroes_target_echo(radar, waveform):
    surf = ReflectiveSurface(center_x=0.0, center_y=15.0, length=8.0,
                             orientation_deg=0.0, backscatter_ratio=0.0)
    pts = discretize_surface(surf, radar)
    refl = effective_reflectors(pts, radar)
    echo = synthesize_target_echo(refl, radar, surf, (3.0, 8.0),
                                  ScatterDraw.unit(len(refl)), waveform)
    assert np.all(echo == 0)


def test_wider_lobe_does_not_lose_energy(radar, waveform):
    base = dict(center_x=2.0, center_y=18.0, length=8.0, orientation_deg=25.0)
    target = target_from_prp(ReflectiveSurface(**base), 6.3, 11.9)
    energies = []
    for psi in (20.0, 14.0, 8.0, 4.0):
        surf = ReflectiveSurface(**base, beamwidth_exponent=psi)
        pts = discretize_surface(surf, radar, rng_seed=0)
        refl = effective_reflectors(pts, radar)
        echo = synthesize_target_echo(refl, radar, surf, target.xy,
                                      ScatterDraw.draw(len(refl), seed=1),
                                      waveform)
        energies.append(float(np.sum(np.abs(echo)**2)))
    assert all(a <= b * (1 + 1e-9) for a, b in zip(energies, energies[1:]))


def test_off_segment_prp_returns_zeros_with_warning(radar, waveform):
    surf = ReflectiveSurface(center_x=0.0, center_y=10.0, length=1.0,
                             orientation_deg=0.0)
    pts = discretize_surface(surf, radar)
    refl = effective_reflectors(pts, radar)
    with pytest.warns(UserWarning):
        echo = synthesize_target_echo(refl, radar, surf, (9.0, 5.0),
                                      ScatterDraw.unit(len(refl)), waveform)
    assert np.all(echo == 0)


def test_direct_echo_out_of_window(radar, waveform):
    with pytest.raises(OutOfWindowError):
        synthesize_direct_echo((0.0, 49.0), radar, waveform)


def _nlos_spec(radar, seed=0, snr=SnrSpec(30.0, 50.0)):
    surf = ReflectiveSurface(center_x=3.3, center_y=23.3, length=8.8,
                             orientation_deg=25.0)
    target = target_from_prp(surf, 6.3, 11.9)
    return ScenarioSpec(radar=radar, surface=surf, target=target, snr=snr,
                        scene_class=SceneClass.NLOS, seed=seed)


def test_synthesize_component_sum_identity(radar):
    spec = _nlos_spec(radar, seed=5)
    echo = synthesize(spec, keep_components=True)
    total = sum(echo.components.values())
    assert np.array_equal(echo.samples, total)
    assert set(echo.components) == {"surface", "target", "noise"}
    quiet = synthesize(spec, keep_components=True, include_noise=False)
    assert "noise" not in quiet.components
    assert np.array_equal(quiet.samples,
                          quiet.components["surface"] + quiet.components["target"])


def test_synthesize_deterministic(radar):
    spec = _nlos_spec(radar, seed=11)
    a = synthesize(spec)
    b = synthesize(spec)
    assert np.array_equal(a.samples, b.samples)
    c = synthesize(spec.with_seed(12))
    assert not np.array_equal(a.samples, c.samples)


def test_wall_only_scene(radar):
    surf = ReflectiveSurface(center_x=2.0, center_y=18.0, length=8.0,
                             orientation_deg=25.0)
    spec = ScenarioSpec(radar=radar, surface=surf, target=None,
                        snr=SnrSpec(30.0, 0.0),
                        scene_class=SceneClass.LOS_SURFACE_NO_MP, seed=0)
    echo = synthesize(spec, keep_components=True)
    assert set(echo.components) == {"surface", "noise"}


def test_ghost_component_for_visible_target(radar):
    surf = ReflectiveSurface(center_x=2.0, center_y=18.0, length=8.0,
                             orientation_deg=25.0)
    spec = ScenarioSpec(radar=radar, surface=surf,
                        target=PointTarget(*polar_to_xy(10.0, 30.0)),
                        snr=SnrSpec(30.0, 50.0),
                        scene_class=SceneClass.LOS_SURFACE_MP, seed=3)
    echo = synthesize(spec, keep_components=True)
    assert {"surface", "target", "ghost", "noise"} <= set(echo.components)
    # the ghost is suppressed relative to the direct return
    g = float(np.abs(echo.components["ghost"]).max())
    d = float(np.abs(echo.components["target"]).max())
    assert g < d


def test_noise_power_calibration(radar):
    var = 2.5
    total, count = 0.0, 0
    for seed in range(100):
        spec = _nlos_spec(radar, seed=seed,
                          snr=SnrSpec(10 * math.log10(16 * 128) - 10
                                      * math.log10(var), 0.0))
        echo = synthesize(spec, keep_components=True)
        n = echo.components["noise"]
        total += float(np.sum(np.abs(n)**2))
        count += n.size
    assert total / count == pytest.approx(var, rel=0.03)


def test_linear_amplitude_scaling_preserves_argmax(radar, waveform):
    echo = synthesize_direct_echo(polar_to_xy(12.0, 15.0), radar, waveform,
                                  amplitude=1.0)
    m1 = compute_ra_map(echo, radar)
    m2 = compute_ra_map(7.5 * echo, radar)
    assert np.argmax(m1.magnitude) == np.argmax(m2.magnitude)
    assert np.allclose(m2.magnitude, 7.5 * m1.magnitude, rtol=1e-9)


def test_echo_binary_round_trip(tmp_path, radar):
    spec = _nlos_spec(radar, seed=2)
    echo = synthesize(spec)
    path = tmp_path / "frame.bin"
    write_echo(path, echo, radar, seed=2, metadata={"scene_class": "nlos"})
    data, header = read_echo(path)
    assert header["num_rx"] == radar.num_rx
    assert header["num_samples"] == radar.num_samples
    assert header["range_bin_m"] == pytest.approx(radar.range_bin_m)
    assert header["seed"] == 2
    assert data.shape == echo.samples.shape
    assert np.allclose(data, echo.samples.astype(np.complex64))
    assert (tmp_path / "frame.bin.json").exists()
    assert path.stat().st_size == 32 + radar.num_rx * radar.num_samples * 8


def test_suppress_point_returns_removes_dominant(radar, waveform):
    strong = synthesize_direct_echo(polar_to_xy(30.0, 10.0), radar, waveform,
                                    amplitude=100.0)
    weak = synthesize_direct_echo(polar_to_xy(15.0, -20.0), radar, waveform,
                                  amplitude=1.0)
    cleaned = suppress_point_returns(strong + weak, radar, max_components=3,
                                     stop_db=6.0)
    m = compute_ra_map(cleaned, radar)
    i, j = np.unravel_index(np.argmax(m.magnitude), m.magnitude.shape)
    assert abs(m.range_axis_m[i] - 15.0) < 1.0
    assert abs(m.angle_axis_deg[j] + 20.0) < 2.0
