import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radcomsim import SPEED_OF_LIGHT
from radcomsim.channel import bistatic_doppler, bistatic_range, synthesize_all
from radcomsim.clocksync import clock_scenario, sample_clocks
from radcomsim.errors import (GridTooLargeError, InsufficientResolutionError, MissingLinkError,
                              NoDetectionError, UndefinedSidelobeError, UnobservableVelocityError,
                              WidthUnboundedError)
from radcomsim.fusion import (PSL_FLOOR_DB, AmbiguityMap, ContextReport, Detection, GridSpec,
                              estimate_position, fit_velocity, mainlobe_width_3db, noise_threshold,
                              peak_sidelobe_level, radio_to_context, spatial_ambiguity)
from radcomsim.linkproc import ChannelEstimate, estimate_channel_ls, extract_peaks, range_doppler_map
from radcomsim.scene import Scene, Target, build_fig3_network
from radcomsim.waveform import OfdmConfig, generate_frame

T0 = (6.0, 6.0)


def estimates(scene, frame, cfg, clocks=None, snr=None, seed=1):
    obs = synthesize_all(scene, frame, cfg, clocks, snr, seed)
    return {k: estimate_channel_ls(o, frame) for k, o in obs.items()}


def brute_force_map(est, scene, cfg, grid, mode, velocity=(0.0, 0.0)):
    """Direct evaluation of the per-link double sum at every cell."""
    N, M = cfg.shape
    f = cfg.frequencies[:, None]
    n = np.arange(M)[None, :]
    out = np.zeros((grid.ny, grid.nx))
    for iy, y in enumerate(grid.ys):
        for ix, x in enumerate(grid.xs):
            total, mags = 0j, 0.0
            for (p, q), e in est.items():
                tx, rx = scene.transmitters[p].position, scene.receivers[q].position
                tau = bistatic_range(tx, rx, (x, y)) / SPEED_OF_LIGHT
                fd = bistatic_doppler(tx, rx, (x, y), velocity, cfg.carrier)
                s = np.sum(e.H * np.exp(2j * np.pi * f * tau)
                           * np.exp(-2j * np.pi * fd * n * cfg.symbol_duration)) / (N * M)
                total += s
                mags += abs(s)
            out[iy, ix] = abs(total) if mode == "coherent" else mags
    return out


@pytest.fixture(scope="module")
def small():
    cfg = OfdmConfig(n_symbols=8)
    scene = build_fig3_network(3, 2).with_targets([Target((3.0, 2.0), (40.0, -25.0))])
    frame = generate_frame(cfg, 3)
    clocks = sample_clocks(clock_scenario("free-running", 30e-12), scene.node_ids, 2)
    return cfg, scene, frame, estimates(scene, frame, cfg, clocks, 20.0)


@pytest.mark.parametrize("mode", ["coherent", "noncoherent"])
def test_map_matches_brute_force(small, mode):
    cfg, scene, frame, est = small
    grid = GridSpec.around((3.0, 2.0), 0.3, 7)
    fast = spatial_ambiguity(est, scene, cfg, grid, mode).values
    assert np.allclose(fast, brute_force_map(est, scene, cfg, grid, mode), rtol=1e-9, atol=1e-12)


def test_doppler_slice_matches_brute_force(small):
    cfg, scene, frame, est = small
    grid = GridSpec.around((3.0, 2.0), 0.02, 5)
    v = (40.0, -25.0)
    fast = spatial_ambiguity(est, scene, cfg, grid, "noncoherent", velocity=v).values
    assert np.allclose(fast, brute_force_map(est, scene, cfg, grid, "noncoherent", v), rtol=1e-9)


def test_matched_velocity_slice_recovers_gain(cfg, frame):
    scene = build_fig3_network().with_targets([Target(T0, (1000.0, 0.0))])
    est = estimates(scene, frame, cfg)
    grid = GridSpec.around(T0, 0.001, 3)
    still = spatial_ambiguity(est, scene, cfg, grid, "coherent")
    moving = spatial_ambiguity(est, scene, cfg, grid, "coherent", velocity=(1000.0, 0.0))
    assert estimate_position(moving)[1] == pytest.approx(64.0, rel=1e-9)
    assert estimate_position(still)[1] < 0.9 * 64.0


def test_coherent_peak_at_true_cell(fig3_scene, frame, cfg):
    est = estimates(fig3_scene, frame, cfg)
    amap = spatial_ambiguity(est, fig3_scene, cfg, GridSpec.around(T0, 0.03, 61), "coherent")
    pos, top = estimate_position(amap)
    assert pos == pytest.approx(T0, abs=1e-12)
    assert top == pytest.approx(64.0, rel=1e-12)


def test_noncoherent_ignores_phase_offsets(fig3_scene, frame, cfg):
    grid = GridSpec.around(T0, 1.0, 41)
    a = spatial_ambiguity(estimates(fig3_scene, frame, cfg), fig3_scene, cfg, grid, "noncoherent")
    clocks = sample_clocks(clock_scenario("time-only"), fig3_scene.node_ids, 5)
    b = spatial_ambiguity(estimates(fig3_scene, frame, cfg, clocks), fig3_scene, cfg, grid,
                          "noncoherent")
    assert np.allclose(a.values, b.values, rtol=1e-13, atol=0)


def test_workers_do_not_change_map(fig3_scene, frame, cfg):
    est = estimates(fig3_scene, frame, cfg, snr=30.0)
    grid = GridSpec.around(T0, 0.05, 75)
    a = spatial_ambiguity(est, fig3_scene, cfg, grid, "coherent", workers=1)
    b = spatial_ambiguity(est, fig3_scene, cfg, grid, "coherent", workers=3)
    assert a.values.tobytes() == b.values.tobytes()


def test_estimates_accepted_as_list(fig3_scene, frame, cfg):
    est = estimates(fig3_scene, frame, cfg)
    grid = GridSpec.around(T0, 0.01, 5)
    a = spatial_ambiguity(est, fig3_scene, cfg, grid)
    b = spatial_ambiguity(list(reversed(list(est.values()))), fig3_scene, cfg, grid)
    assert np.array_equal(a.values, b.values)


def test_missing_link(fig3_scene, frame, cfg):
    est = estimates(fig3_scene, frame, cfg)
    est.pop((3, 3))
    with pytest.raises(MissingLinkError):
        spatial_ambiguity(est, fig3_scene, cfg, GridSpec.around(T0, 0.01, 5))


def test_grid_guard():
    with pytest.raises(GridTooLargeError):
        GridSpec(0, 100, 0, 100, 0.01)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-6, 1e6))
def test_scaling_invariance(scale):
    cfg = OfdmConfig(n_symbols=4)
    frame = generate_frame(cfg, 1)
    scene = build_fig3_network(4, 4).with_targets([Target((4.0, 4.0))])
    est = estimates(scene, frame, cfg, snr=25.0, seed=3)
    scaled = {k: ChannelEstimate(e.tx_id, e.rx_id, e.H * scale) for k, e in est.items()}
    grid = GridSpec.around((4.0, 4.0), 0.03, 61)
    a = spatial_ambiguity(est, scene, cfg, grid)
    b = spatial_ambiguity(scaled, scene, cfg, grid)
    pa, _ = estimate_position(a)
    assert estimate_position(b)[0] == pa
    assert mainlobe_width_3db(b, pa) == pytest.approx(mainlobe_width_3db(a, pa), rel=1e-9)
    assert peak_sidelobe_level(b, pa, 0.01) == pytest.approx(peak_sidelobe_level(a, pa, 0.01), abs=1e-9)


def synthetic(values, cell=1.0):
    values = np.asarray(values, dtype=float)
    ny, nx = values.shape
    return AmbiguityMap(GridSpec(0, (nx - 1) * cell, 0, (ny - 1) * cell, cell), values, "coherent")


def test_position_tie_break():
    amap = synthetic([[0, 1, 0], [1, 0, 0]])
    assert estimate_position(amap)[0] == (0.0, 1.0)


def test_position_zero_map():
    with pytest.raises(NoDetectionError):
        estimate_position(synthetic(np.zeros((3, 3))))


def test_gaussian_width_oracle():
    sigma_x, sigma_y, cell = 0.30, 0.45, 0.01
    xs = np.arange(-200, 201) * cell
    X, Y = np.meshgrid(xs, xs)
    values = np.exp(-X ** 2 / (2 * sigma_x ** 2) - Y ** 2 / (2 * sigma_y ** 2))
    amap = AmbiguityMap(GridSpec(xs[0], xs[-1], xs[0], xs[-1], cell), values, "coherent")
    wx, wy = mainlobe_width_3db(amap)
    # |exp(-x^2 / 2 s^2)| = 1/sqrt(2) at x = s sqrt(ln 2).
    assert wx == pytest.approx(2 * sigma_x * math.sqrt(math.log(2)), rel=0.02)
    assert wy == pytest.approx(2 * sigma_y * math.sqrt(math.log(2)), rel=0.02)


def test_width_unbounded():
    with pytest.raises(WidthUnboundedError):
        mainlobe_width_3db(synthetic(np.ones((5, 5))))


def test_width_insufficient_resolution():
    v = np.zeros((7, 7))
    v[3, 3] = 1.0
    v[3, 2] = v[3, 4] = v[2, 3] = v[4, 3] = 0.8
    with pytest.raises(InsufficientResolutionError):
        mainlobe_width_3db(synthetic(v))


def test_psl_single_cell():
    v = np.zeros((5, 5))
    v[2, 2] = 3.0
    assert peak_sidelobe_level(synthetic(v), (2.0, 2.0), 1.0) == PSL_FLOOR_DB


def test_psl_arithmetic():
    v = np.zeros((5, 9))
    v[2, 2] = 1.0
    v[2, 7] = 0.5
    assert peak_sidelobe_level(synthetic(v), (2.0, 2.0), 1.5) == pytest.approx(-6.0206, abs=1e-4)


def test_psl_disc_covers_grid():
    with pytest.raises(UndefinedSidelobeError):
        peak_sidelobe_level(synthetic(np.eye(3)), (0.0, 0.0), 10.0)


def test_fit_velocity_zero(fig3_scene):
    d = {lk: 0.0 for lk in fig3_scene.links()[:4]}
    assert fit_velocity(d, T0, fig3_scene, 26e9) == pytest.approx((0.0, 0.0), abs=1e-12)


def test_fit_velocity_exact_inverse(fig3_scene):
    v = (3.5, -7.25)
    links = [(0, 0), (7, 0), (0, 7), (4, 4)]
    d = {(p, q): bistatic_doppler(fig3_scene.transmitters[p].position,
                                  fig3_scene.receivers[q].position, T0, v, 26e9) for p, q in links}
    assert fit_velocity(d, T0, fig3_scene, 26e9) == pytest.approx(v, abs=1e-6)


def test_fit_velocity_rank_deficient():
    scene = build_fig3_network(2, 1)
    with pytest.raises(UnobservableVelocityError):
        fit_velocity({(0, 0): 10.0}, (3, 3), scene, 26e9)
    # Target on the line through all nodes: every bistatic direction is parallel.
    txs = build_fig3_network(3, 1).transmitters
    from radcomsim.scene import AccessPoint
    line = Scene(txs, (AccessPoint(9, (-2.0, 0.0), "receiver"),))
    with pytest.raises(UnobservableVelocityError):
        fit_velocity({(0, 0): 1.0, (1, 0): 2.0, (2, 0): 3.0}, (20.0, 0.0), line, 26e9)


def test_velocity_round_trip(cfg, frame):
    v = (5.0, 0.0)
    scene = build_fig3_network().with_targets([Target(T0, v)])
    est = estimates(scene, frame, cfg)
    peaks = {lk: extract_peaks(range_doppler_map(e, cfg), 1) for lk, e in est.items()}
    dop = {lk: p[0].doppler for lk, p in peaks.items()}
    v_hat = fit_velocity(dop, T0, scene, cfg.carrier)
    bin_velocity = range_doppler_map(est[(0, 0)], cfg).doppler_bin * SPEED_OF_LIGHT / (2 * cfg.carrier)
    assert math.hypot(v_hat[0] - v[0], v_hat[1] - v[1]) <= bin_velocity


def test_coherent_width_not_wider_than_single_links(fig3_scene, frame, cfg):
    est = estimates(fig3_scene, frame, cfg)
    full = spatial_ambiguity(est, fig3_scene, cfg, GridSpec.around(T0, 0.02, 81), "coherent")
    wx, wy = mainlobe_width_3db(full, T0)
    wide = GridSpec.around(T0, 3.0, 151)
    for p, q in fig3_scene.links():
        single = Scene((fig3_scene.transmitters[p],), (fig3_scene.receivers[q],), fig3_scene.targets)
        amap = spatial_ambiguity([est[(p, q)]], single, cfg, wide, "coherent")
        try:
            sx, sy = mainlobe_width_3db(amap, T0)
        except WidthUnboundedError:
            continue
        assert wx <= sx and wy <= sy


def test_grid_refinement_stability(fig3_scene, frame, cfg):
    est = estimates(fig3_scene, frame, cfg)
    coarse = spatial_ambiguity(est, fig3_scene, cfg, GridSpec.around(T0, 0.02, 81), "coherent")
    fine = spatial_ambiguity(est, fig3_scene, cfg, GridSpec.around(T0, 0.02, 161), "coherent")
    wc, wf = mainlobe_width_3db(coarse, T0), mainlobe_width_3db(fine, T0)
    assert coarse.grid.cell <= min(wc) / 8
    for a, b in zip(wc, wf):
        assert abs(a - b) / b < 0.05


def test_time_only_noncoherent_position_error(fig3_scene, cfg):
    errors = []
    grid = GridSpec.around(T0, 3.0, 121)
    for seed in range(20):
        frame = generate_frame(cfg, seed)
        clocks = sample_clocks(clock_scenario("time-only"), fig3_scene.node_ids, seed)
        amap = spatial_ambiguity(estimates(fig3_scene, frame, cfg, clocks, 30.0, seed),
                                 fig3_scene, cfg, grid, "noncoherent")
        pos, _ = estimate_position(amap)
        errors.append(math.hypot(pos[0] - T0[0], pos[1] - T0[1]))
    assert np.percentile(errors, 90) <= 2 * SPEED_OF_LIGHT / cfg.bandwidth


def test_context_single_target(fig3_scene, frame, cfg):
    est = estimates(fig3_scene, frame, cfg)
    amap = spatial_ambiguity(est, fig3_scene, cfg, GridSpec.around(T0, 0.03, 121), "coherent")
    peaks = {lk: extract_peaks(range_doppler_map(e, cfg), 1) for lk, e in est.items()}
    rep = radio_to_context(amap, fig3_scene, cfg, peaks, metadata={"seed": 1})
    assert len(rep.detections) == 1
    det = rep.detections[0]
    assert det.position == pytest.approx(T0, abs=1e-12)
    assert det.widths[0] > 0 and det.widths[1] > 0
    assert det.velocity == pytest.approx((0.0, 0.0), abs=1e-9)
    assert det.errors == []
    assert ContextReport.from_json(rep.to_json()) == rep


def test_context_records_metric_errors(fig3_scene, frame, cfg):
    est = estimates(fig3_scene, frame, cfg)
    amap = spatial_ambiguity(est, fig3_scene, cfg, GridSpec.around(T0, 0.002, 5), "coherent")
    rep = radio_to_context(amap, fig3_scene, cfg)
    assert len(rep.detections) == 1
    assert rep.detections[0].widths is None
    assert any(e.startswith("widths:") for e in rep.detections[0].errors)


def test_context_zero_target_threshold(fig3_scene, cfg):
    empty = fig3_scene.with_targets([])
    grid = GridSpec.around(T0, 0.03, 61)

    def amap(scene, seed):
        frame = generate_frame(cfg, seed)
        return spatial_ambiguity(estimates(scene, frame, cfg, None, 30.0, seed), scene, cfg, grid)

    threshold = noise_threshold([amap(empty, s) for s in range(100, 105)])
    assert radio_to_context(amap(empty, 7), empty, cfg, threshold=threshold).detections == []
    assert len(radio_to_context(amap(fig3_scene, 7), fig3_scene, cfg, threshold=threshold).detections) == 1


def test_report_round_trip_with_none():
    rep = ContextReport([Detection((1.0, 2.0), 3.0, None, None, None, ["x"])], {"a": 1})
    assert ContextReport.from_json(rep.to_json()) == rep
