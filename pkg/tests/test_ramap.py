import numpy as np
import pytest

from nlosradar import (
    MAP_SIZE,
    RangeAngleMap,
    compute_ra_map,
    extract_peaks,
    polar_to_xy,
    refine_peak_quadratic,
    synthesize_direct_echo,
    to_cartesian,
    write_magnitude_csv,
    write_map_binary,
)
from nlosradar.echo import WaveformConfig
from nlosradar.ramap import Peak


@pytest.fixture
def waveform(radar):
    return WaveformConfig.from_bandwidth(radar.bandwidth_hz)


def _impulse_map(radar, cells):
    values = np.zeros((MAP_SIZE, MAP_SIZE), dtype=complex)
    for (i, j), mag in cells.items():
        values[i, j] = mag
    return RangeAngleMap(values, radar)


def test_zero_echo_zero_map(radar):
    m = compute_ra_map(np.zeros((16, 128), dtype=complex), radar)
    assert np.all(m.values == 0)


def test_dimension_overflow(radar):
    with pytest.raises(ValueError):
        compute_ra_map(np.zeros((600, 128), dtype=complex), radar)


def test_boresight_scatterer_bins(radar, waveform):
    echo = synthesize_direct_echo((0.0, 15.0), radar, waveform)
    m = compute_ra_map(echo, radar)
    i, j = np.unravel_index(np.argmax(m.magnitude), m.magnitude.shape)
    assert (i, j) == (160, 256)
    assert m.magnitude[i, j] == pytest.approx(radar.num_rx * radar.num_samples,
                                              rel=1e-9)


def test_axes(radar):
    m = compute_ra_map(np.zeros((16, 128), dtype=complex), radar)
    assert m.range_axis_m[0] == 0.0
    assert np.all(np.diff(m.range_axis_m) > 0)
    assert m.range_axis_m[-1] < radar.max_range_m
    assert m.angle_axis_deg[MAP_SIZE // 2] == pytest.approx(0.0)
    assert m.angle_axis_deg[0] == pytest.approx(-90.0)


def test_parseval(radar):
    rng = np.random.default_rng(3)
    x = rng.standard_normal((16, 128)) + 1j * rng.standard_normal((16, 128))
    m = compute_ra_map(x, radar)
    lhs = np.sum(np.abs(m.values)**2)
    rhs = MAP_SIZE**2 * np.sum(np.abs(x)**2)
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_extract_two_impulses_in_order(radar):
    m = _impulse_map(radar, {(100, 256): 5.0, (300, 200): 3.0})
    peaks = extract_peaks(m, k=5)
    assert [(p.range_bin, p.angle_bin) for p in peaks] == [(100, 256), (300, 200)]
    assert peaks[0].magnitude == 5.0
    mags = [p.magnitude for p in peaks]
    assert mags == sorted(mags, reverse=True)


def test_extract_floor_gate_stops_early(radar):
    m = _impulse_map(radar, {(100, 256): 5.0})
    peaks = extract_peaks(m, k=3)
    assert len(peaks) == 1


def test_extract_exclusion_radius(radar):
    m = _impulse_map(radar, {(100, 256): 5.0, (103, 256): 4.0, (150, 256): 3.0})
    peaks = extract_peaks(m, k=5, exclusion_radius_bins=8)
    bins = [(p.range_bin, p.angle_bin) for p in peaks]
    assert (100, 256) in bins and (150, 256) in bins
    assert (103, 256) not in bins
    for a in range(len(peaks)):
        for b in range(a + 1, len(peaks)):
            d = np.hypot(peaks[a].range_bin - peaks[b].range_bin,
                         peaks[a].angle_bin - peaks[b].angle_bin)
            assert d > 8


def test_extract_peaks_are_local_maxima(radar, waveform):
    rng = np.random.default_rng(0)
    echo = sum(synthesize_direct_echo(polar_to_xy(r, a), radar, waveform)
               for r, a in [(10.0, -20.0), (20.0, 5.0), (30.0, 25.0)])
    echo = echo + 0.01 * (rng.standard_normal((16, 128))
                          + 1j * rng.standard_normal((16, 128)))
    m = compute_ra_map(echo, radar)
    mag = m.magnitude
    for p in extract_peaks(m, k=6):
        i, j = p.range_bin, p.angle_bin
        patch = mag[i - 1:i + 2, j - 1:j + 2]
        assert mag[i, j] >= patch.max()


def test_extract_validation(radar):
    m = _impulse_map(radar, {(100, 256): 5.0})
    with pytest.raises(ValueError):
        extract_peaks(m, k=0)
    with pytest.raises(ValueError):
        extract_peaks(m, k=MAP_SIZE * MAP_SIZE + 1)


def test_to_cartesian_examples():
    peaks = [Peak(0, 0, 1.0, 10.0, 0.0), Peak(0, 0, 1.0, 10.0, 90.0),
             Peak(0, 0, 1.0, 22.9, 6.3)]
    xy = to_cartesian(peaks)
    assert xy[0] == pytest.approx([0.0, 10.0], abs=1e-12)
    assert xy[1] == pytest.approx([10.0, 0.0], abs=1e-12)
    assert xy[2] == pytest.approx([2.5129157239849365, 22.761705879923614],
                                  abs=1e-9)
    assert to_cartesian([]).shape == (0, 2)


def test_polar_round_trip(radar, waveform):
    echo = synthesize_direct_echo(polar_to_xy(21.0, -33.0), radar, waveform)
    m = compute_ra_map(echo, radar)
    peaks = extract_peaks(m, k=1)
    xy = to_cartesian(peaks)[0]
    r = np.hypot(*xy)
    ang = np.degrees(np.arctan2(xy[0], xy[1]))
    assert r == pytest.approx(peaks[0].range_m, abs=1e-9)
    assert ang == pytest.approx(peaks[0].angle_deg, abs=1e-9)


def test_scaling_invariance_of_extraction(radar, waveform):
    echo = synthesize_direct_echo(polar_to_xy(12.0, 8.0), radar, waveform) \
        + synthesize_direct_echo(polar_to_xy(25.0, -15.0), radar, waveform) * 0.5
    a = extract_peaks(compute_ra_map(echo, radar), k=4)
    b = extract_peaks(compute_ra_map(echo * 3.0, radar), k=4)
    assert [(p.range_bin, p.angle_bin) for p in a] \
        == [(p.range_bin, p.angle_bin) for p in b]


def test_window_preserves_on_bin_peak(radar, waveform):
    echo = synthesize_direct_echo((0.0, 15.0), radar, waveform)
    m = compute_ra_map(echo, radar, window="hann")
    i, j = np.unravel_index(np.argmax(m.magnitude), m.magnitude.shape)
    assert (i, j) == (160, 256)
    m2 = compute_ra_map(echo, radar, window="hann2d")
    i2, j2 = np.unravel_index(np.argmax(m2.magnitude), m2.magnitude.shape)
    assert (i2, j2) == (160, 256)
    with pytest.raises(ValueError):
        compute_ra_map(echo, radar, window="hamming")


def test_refine_peak_quadratic_improves_off_bin(radar, waveform):
    echo = synthesize_direct_echo((0.0, 15.05), radar, waveform)
    m = compute_ra_map(echo, radar)
    i, j = np.unravel_index(np.argmax(m.magnitude), m.magnitude.shape)
    refined_r, refined_a = refine_peak_quadratic(m, int(i), int(j))
    assert abs(refined_r - 15.05) < abs(m.range_axis_m[i] - 15.05) + 1e-12
    assert abs(refined_a) < 0.3


def test_eight_reflector_recovery(radar, waveform):
    # eight isolated scatterers across the map, moderate noise
    rng = np.random.default_rng(9)
    truths = [(8.0 + 4.0 * n, -35.0 + 10.0 * n) for n in range(8)]
    echo = sum(synthesize_direct_echo(polar_to_xy(r, a), radar, waveform)
               for r, a in truths)
    noise = (rng.standard_normal((16, 128)) + 1j * rng.standard_normal((16, 128)))
    echo = echo + noise * (10 ** (-30.0 / 20.0) * np.sqrt(16 * 128 / 2))
    m = compute_ra_map(echo, radar)
    peaks = extract_peaks(m, k=8)
    recovered = 0
    for r, a in truths:
        u = np.sin(np.radians(a))
        for p in peaks:
            du = abs(np.sin(np.radians(p.angle_deg)) - u)
            if abs(p.range_m - r) <= radar.range_bin_m and du <= 2.0 / radar.num_rx:
                recovered += 1
                break
    assert recovered >= 6


def test_map_exports(tmp_path, radar, waveform):
    echo = synthesize_direct_echo((0.0, 15.0), radar, waveform)
    m = compute_ra_map(echo, radar)
    csv_path = tmp_path / "map.csv"
    write_magnitude_csv(m, csv_path)
    lines = csv_path.read_text().strip().split("\n")
    assert len(lines) == MAP_SIZE
    assert len(lines[0].split(",")) == MAP_SIZE

    bin_path = tmp_path / "map.bin"
    write_map_binary(m, bin_path, seed=4)
    assert bin_path.stat().st_size == 32 + MAP_SIZE * MAP_SIZE * 8
    assert (tmp_path / "map.bin.json").exists()
