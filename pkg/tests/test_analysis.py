import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from tiltx.analysis import (
    LogFormatError,
    PoseLog,
    compare_runs,
    compare_to_model,
    load_pose_log,
    orientation_error_stats,
    parse_pose_log,
    pose_log_text,
    position_error_stats,
    read_targets_csv,
    rest_window,
    synthetic_log,
    write_pose_log,
)
from tiltx.se3core import UnitQuaternion, geodesic_angle, matrix_to_quat, rot_z
from tiltx.workspace import export_targets, slice_targets

HEADER = "t_s,target_id,frame_id,x_mm,y_mm,z_mm,qx,qy,qz,qw\n"


def _refs(n=3, rng=None):
    rng = rng or np.random.default_rng(1)
    out = {}
    for k in range(1, n + 1):
        axis = rng.normal(size=3)
        out[f"P{k}"] = (rng.uniform(-500, 500, 3), UnitQuaternion.from_axis_angle(axis, rng.uniform(0, 3)))
    return out


# --- ingest ------------------------------------------------------------------


def test_empty_body():
    assert len(parse_pose_log(HEADER)) == 0


def test_one_row_is_normalized():
    log = parse_pose_log(HEADER + "0.0,P1,E,1,2,3,0,0,0,1.0005\n")
    assert len(log) == 1
    np.testing.assert_allclose(log.quat[0], [1, 0, 0, 0], atol=1e-15)
    np.testing.assert_array_equal(log.position[0], [1, 2, 3])


def test_write_read_is_bit_exact(tmp_path, rng):
    log = synthetic_log(_refs(rng=rng), duration_s=1.0, noise_mm=0.3, rng=rng)
    p = tmp_path / "log.csv"
    write_pose_log(log, p)
    back = load_pose_log(p)
    np.testing.assert_array_equal(back.t, log.t)
    np.testing.assert_array_equal(back.position, log.position)
    np.testing.assert_array_equal(back.quat, log.quat)
    assert list(back.target_id) == list(log.target_id)
    assert pose_log_text(back) == p.read_text()


def test_renamed_column_is_format_error():
    with pytest.raises(LogFormatError, match="header"):
        parse_pose_log(HEADER.replace("qw", "q_w") + "0,P1,E,0,0,0,0,0,0,1\n")
    with pytest.raises(LogFormatError):
        parse_pose_log("")


def test_bad_rows_reported_with_line_numbers():
    good = "".join(f"{i}.0,P1,E,0,0,0,0,0,0,1\n" for i in range(20))
    bad = "20.0,P1,E,0,0,0,0,0,0,1.1\n"  # norm off by 0.1
    log = parse_pose_log(HEADER + good + bad)
    assert len(log) == 20
    assert log.rejected[0][0] == 22
    assert "norm" in log.rejected[0][1]


def test_backwards_time_and_bad_frame_rejected():
    rows = [f"{i}.0,P1,E,0,0,0,0,0,0,1\n" for i in range(20)]
    rows.insert(5, "1.0,P1,E,0,0,0,0,0,0,1\n")
    rows.append("30.0,P1,Q,0,0,0,0,0,0,1\n")
    log = parse_pose_log(HEADER + "".join(rows))
    assert [ln for ln, _ in log.rejected] == [7, 23]


def test_too_many_rejections_is_hard_error():
    good = "".join(f"{i}.0,P1,E,0,0,0,0,0,0,1\n" for i in range(9))
    bad = "x,P1,E,0,0,0,0,0,0,1\n"
    # 1 of 10 rejected sits exactly at the limit and is tolerated
    assert len(parse_pose_log(HEADER + good + bad)) == 9
    with pytest.raises(LogFormatError, match="2 of 10 rows rejected"):
        parse_pose_log(HEADER + good[: good.index("8.0")] + bad * 2)


def test_missing_file(tmp_path):
    with pytest.raises(OSError, match="cannot read"):
        load_pose_log(tmp_path / "nope.csv")


# --- rest window -------------------------------------------------------------


def _still_log(duration, rate=10.0):
    n = int(round(duration * rate)) + 1
    return PoseLog.from_records([(i / rate, "P1", "E", [0, 0, 0], [1, 0, 0, 0]) for i in range(n)])


def test_rest_window_takes_trailing_half():
    log = _still_log(20.0)
    win = rest_window(log, "P1")
    assert not win.short
    assert win.t[0] == pytest.approx(10.0) and win.t[-1] == pytest.approx(20.0)
    assert len(win) == 101


def test_rest_window_exact_length_keeps_all():
    log = _still_log(10.0)
    assert len(rest_window(log, "P1")) == len(log)


def test_rest_window_short_warns():
    log = _still_log(5.0)
    with pytest.warns(UserWarning, match="5.000 s"):
        win = rest_window(log, "P1")
    assert win.short and len(win) == len(log)


def test_rest_window_missing_group():
    with pytest.raises(ValueError):
        rest_window(_still_log(1.0), "P2")


# --- statistics --------------------------------------------------------------


def test_position_stats_trivial():
    ref = np.array([1.0, 2.0, 3.0])
    assert position_error_stats([ref, ref], ref) == (0.0, 0.0)
    mu, sd = position_error_stats([ref + [3, 4, 0], ref - [3, 4, 0]], ref)
    assert mu == pytest.approx(5.0, abs=1e-12) and sd == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        position_error_stats(np.zeros((0, 3)), ref)


def test_population_and_sample_sigma():
    ref = np.zeros(3)
    samples = [[1, 0, 0], [3, 0, 0]]
    assert position_error_stats(samples, ref)[1] == pytest.approx(1.0)
    assert position_error_stats(samples, ref, ddof=1)[1] == pytest.approx(math.sqrt(2))


def test_position_stats_chi3_mean(rng):
    samples = rng.normal(size=(100_000, 3))
    mu, _ = position_error_stats(samples, np.zeros(3))
    oracle = sps.chi(3).mean()
    assert oracle == pytest.approx(1.5958, abs=1e-4)
    assert abs(mu - oracle) / oracle < 0.02


def test_orientation_stats_trivial():
    ident = UnitQuaternion.identity()
    mean, mu, sd = orientation_error_stats([ident, ident], ident)
    assert mu == 0 and sd == 0
    qs = [matrix_to_quat(rot_z(math.radians(5))), matrix_to_quat(rot_z(math.radians(-5)))]
    mean, mu, sd = orientation_error_stats(qs, ident)
    assert math.degrees(mu) == pytest.approx(5.0, abs=1e-9)
    assert sd == pytest.approx(0.0, abs=1e-9)
    assert geodesic_angle(mean, ident) < 1e-9
    with pytest.raises(ValueError):
        orientation_error_stats([], ident)


def test_orientation_sign_flip_invariance(rng):
    ref = UnitQuaternion.from_axis_angle([0, 1, 0], 0.3)
    qs = [UnitQuaternion.from_axis_angle(rng.normal(size=3), rng.uniform(0, 0.5)) for _ in range(50)]
    a = orientation_error_stats(qs, ref)
    b = orientation_error_stats([-q for q in qs], ref)
    assert a[1] == pytest.approx(b[1], abs=1e-12) and a[2] == pytest.approx(b[2], abs=1e-12)
    assert geodesic_angle(a[0], b[0]) < 1e-9


def test_sigma_zero_iff_equal_errors(rng):
    ref = np.zeros(3)
    dirs = rng.normal(size=(20, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    assert position_error_stats(2.5 * dirs, ref)[1] == pytest.approx(0.0, abs=1e-12)
    dirs[0] *= 2
    assert position_error_stats(2.5 * dirs, ref)[1] > 0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3), st.integers(0, 2**31))
def test_translation_equivariance(shift, seed):
    r = np.random.default_rng(seed)
    samples = r.normal(size=(30, 3)) * 5
    ref = r.normal(size=3)
    a = position_error_stats(samples, ref)
    b = position_error_stats(samples + shift, ref + shift)
    np.testing.assert_allclose(a, b, atol=1e-12 * max(1.0, np.max(np.abs(shift))))


def test_rotation_equivariance(rng):
    for _ in range(20):
        ref = UnitQuaternion.from_axis_angle(rng.normal(size=3), rng.uniform(0, 3))
        qs = [UnitQuaternion.from_axis_angle(rng.normal(size=3), rng.uniform(0, 3)) for _ in range(20)]
        g = UnitQuaternion.from_axis_angle(rng.normal(size=3), rng.uniform(0, 3))
        from tiltx.se3core import quat_multiply

        rot = lambda q: UnitQuaternion.from_array(quat_multiply(g.as_array(), q.as_array()), normalize=True)
        _, mu_a, sd_a = orientation_error_stats(qs, ref)
        _, mu_b, sd_b = orientation_error_stats([rot(q) for q in qs], rot(ref))
        assert abs(mu_a - mu_b) < 1e-9 and abs(sd_a - sd_b) < 1e-9


# --- run comparison ----------------------------------------------------------


def test_identical_runs_have_zero_error(rng):
    base = synthetic_log(_refs(4, rng), noise_mm=0.2, rng=rng)
    table = compare_runs(base, base)
    assert [r.target_id for r in table.rows] == ["P1", "P2", "P3", "P4"]
    for r in table.rows:
        # against its own mean the error is the noise spread, centred near chi3 * 0.2
        assert r.mu_pos < 0.5
        assert r.mu_ang < 1e-12


def test_noise_free_identical_runs():
    base = synthetic_log(_refs(3))
    for r in compare_runs(base, base).rows:
        assert r.mu_pos < 1e-9 and r.sigma_pos < 1e-9


def test_uniform_shift_gives_sqrt3(rng):
    base = synthetic_log(_refs(3, rng), noise_mm=0.0)
    test = base.transformed(shift=[1, 1, 1])
    for r in compare_runs(base, test).rows:
        assert r.mu_pos == pytest.approx(math.sqrt(3), abs=1e-9)
        assert r.sigma_pos == pytest.approx(0.0, abs=1e-9)


def test_injected_offsets_recovered(rng):
    refs = _refs(6, rng)
    offsets = {tid: rng.normal(size=3) * 4 for tid in refs}
    base = synthetic_log(refs)
    test = synthetic_log(refs, offsets=offsets)
    table = compare_runs(base, test).by_id()
    for tid, off in offsets.items():
        assert abs(table[tid].mu_pos - np.linalg.norm(off)) < 1e-6


def test_injected_rotation_recovered(rng):
    refs = _refs(3, rng)
    rots = {tid: UnitQuaternion.from_axis_angle(rng.normal(size=3), 0.1 * (k + 1)) for k, tid in enumerate(refs)}
    base = synthetic_log(refs)
    test = synthetic_log(refs, rotations=rots)
    table = compare_runs(base, test).by_id()
    for k, tid in enumerate(refs):
        assert table[tid].mu_ang == pytest.approx(0.1 * (k + 1), abs=1e-9)


def test_gap_report():
    refs = _refs(4)
    base = synthetic_log({k: refs[k] for k in ("P1", "P2", "P3")})
    test = synthetic_log({k: refs[k] for k in ("P2", "P3", "P4")})
    table = compare_runs(base, test)
    assert [r.target_id for r in table.rows] == ["P2", "P3"]
    assert table.gaps == ["P1", "P4"]


def test_record_order_independence(rng):
    refs = _refs(3, rng)
    base = synthetic_log(refs, noise_mm=0.5, rng=rng)
    test = synthetic_log(refs, noise_mm=0.5, rng=rng)
    perm = rng.permutation(len(test))
    shuffled = PoseLog(test.t[perm], test.target_id[perm], test.frame_id[perm], test.position[perm], test.quat[perm])
    a, b = compare_runs(base, test), compare_runs(base, shuffled)
    for ra, rb in zip(a.rows, b.rows):
        assert ra.mu_pos == pytest.approx(rb.mu_pos, abs=1e-12)
        assert ra.sigma_pos == pytest.approx(rb.sigma_pos, abs=1e-12)
        assert ra.mu_ang == pytest.approx(rb.mu_ang, abs=1e-12)


def test_short_windows_collected():
    base = synthetic_log(_refs(2), duration_s=4.0)
    table = compare_runs(base, base)
    assert table.short_windows == ["P1", "P2"]


def test_stats_csv_header(tmp_path):
    base = synthetic_log(_refs(2))
    p = tmp_path / "stats.csv"
    compare_runs(base, base).write_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "target_id,n,mu_pos_mm,sigma_pos_mm,mu_ang_deg,sigma_ang_deg"
    assert lines[1].startswith("P1,1001,0.000000,")


def test_model_mode(tmp_path, g):
    targets = slice_targets(g)
    path = tmp_path / "targets.csv"
    export_targets(targets, path)
    model = read_targets_csv(path, g)
    assert len(model) == 48
    for m, t in zip(model, targets):
        assert m.id == t.id
        assert geodesic_angle(matrix_to_quat(m.pose.rotation), matrix_to_quat(t.pose.rotation)) < 1e-6
    refs = {t.id: (t.pose.translation, matrix_to_quat(t.pose.rotation)) for t in targets[:5]}
    offsets = {tid: [0.0, 0.0, 2.0] for tid in refs}
    table = compare_to_model(synthetic_log(refs, offsets=offsets), model)
    assert len(table.rows) == 5
    assert table.gaps == [f"P{i}" for i in range(6, 49)]
    for r in table.rows:
        assert r.mu_pos == pytest.approx(2.0, abs=1e-6)
        assert r.mu_ang < 1e-6
