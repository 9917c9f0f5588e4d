from __future__ import annotations

import numpy as np
import pytest

from dynpanel import (
    DomainError,
    GapPolicyViolation,
    IndividualRecord,
    PanelDataset,
    ParseError,
    SchemaError,
    extract_windows,
    read_csv,
    validate,
    write_csv,
)
from dynpanel.dgp import design1, simulate
from dynpanel.objective import TrimSpec, qn


def _toy_record(**kw):
    base = dict(id=1, y0=0, t=[1, 2, 3], y=[0, 1, 1], x=[[1.0], [2.0], [3.0]], z=[0.5, 2.0, 0.1])
    base.update(kw)
    return IndividualRecord(**base)


def _random_record(rng, rid, T, p=1):
    return IndividualRecord(
        id=rid,
        y0=int(rng.integers(0, 2)),
        t=np.arange(1, T + 1),
        y=rng.integers(0, 2, T),
        x=rng.normal(size=(T, p)),
        z=rng.normal(size=T),
    )


def test_hand_evaluated_window():
    ws = extract_windows(PanelDataset.from_records([_toy_record()]))
    assert len(ws) == 1
    w = ws[0]
    assert w.z_mid == 2.0
    assert w.y_mid == 1
    assert w.d_switch == 1
    np.testing.assert_allclose(w.chi_bar, [1.0, 2.0, -0.4])
    assert ws.names == ("y_lag", "x1", "z")


def test_minimal_panel_has_one_window():
    rep = validate(PanelDataset.from_records([_toy_record()]))
    assert rep.ok
    assert rep.n_windows == 1


def test_all_zero_choices_have_no_switchers():
    recs = [_toy_record(id=k, y=[0, 0, 0]) for k in range(5)]
    rep = validate(PanelDataset.from_records(recs))
    assert rep.switcher_fraction == 0.0
    assert rep.n_windows == 5


def test_unbalanced_window_count():
    rng = np.random.default_rng(3)
    T = rng.integers(3, 10, 40)
    ds = PanelDataset.from_records([_random_record(rng, k, int(t)) for k, t in enumerate(T)])
    assert validate(ds).n_windows == int((T - 2).sum())
    assert len(extract_windows(ds)) == int((T - 2).sum())


def test_nine_periods_give_seven_windows():
    rng = np.random.default_rng(0)
    ws = extract_windows(PanelDataset.from_records([_random_record(rng, 1, 9)]))
    assert len(ws) == 7
    assert list(ws.t) == list(range(2, 9))


def test_windows_match_direct_enumeration():
    rng = np.random.default_rng(11)
    rec = _random_record(rng, "a", 6, p=2)
    ws = extract_windows(PanelDataset.from_records([rec]))
    y = np.concatenate([[rec.y0], rec.y])
    x = np.vstack([np.full((1, 2), np.nan), rec.x])
    z = np.concatenate([[np.nan], rec.z])
    for k, w in enumerate(ws):
        t = k + 2  # position in the y0-prefixed arrays
        assert w.y_mid == y[t]
        assert w.d_switch == y[t + 1] - y[t - 1]
        assert w.z_mid == z[t]
        expect = [y[t] - y[t - 2], *(x[t + 1] - x[t - 1]), z[t + 1] - z[t - 1]]
        np.testing.assert_allclose(w.chi_bar, expect)


def test_balanced_panel_windows():
    ds = simulate(design1(n=300, seed=4))
    ws = extract_windows(ds)
    assert len(ws) == 300
    assert set(np.unique(ws.chi_bar[:, 0])) <= {-1.0, 0.0, 1.0}
    assert ws.chi_bar.shape[1] == ds.p + 2
    assert np.all((ws.d_switch == 0) | (np.abs(ws.d_switch) == 1))


def test_extract_is_pure():
    ds = simulate(design1(n=50, seed=1))
    a, b = extract_windows(ds), extract_windows(ds)
    for k in ("owner", "t", "z_mid", "y_mid", "d_switch", "chi_bar"):
        np.testing.assert_array_equal(getattr(a, k), getattr(b, k))


def test_permuting_individuals_leaves_objective_unchanged():
    ds = simulate(design1(n=400, seed=2))
    perm = np.random.default_rng(0).permutation(ds.n)
    a, b = extract_windows(ds), extract_windows(ds.take(perm))
    trim = TrimSpec(0.8)
    th = design1().theta_true
    assert qn(a, th, trim) == qn(b, th, trim)
    order = np.argsort(perm)
    np.testing.assert_array_equal(b.chi_bar[order], a.chi_bar)


def test_gap_skips_windows_and_strict_mode_raises():
    rec = _toy_record(t=[1, 2, 4, 5], y=[0, 1, 1, 0], x=[[1.0], [2.0], [3.0], [4.0]], z=[0.1, 0.2, 0.3, 0.4])
    ds = PanelDataset.from_records([rec])
    # t=2 needs t=0..3, t=4 needs t=2..5: both broken by the missing t=3
    assert len(extract_windows(ds)) == 0
    with pytest.raises(GapPolicyViolation):
        extract_windows(ds, strict=True)


def test_invalid_y_reported_not_raised():
    ds = PanelDataset.from_records([_toy_record(y=[0, 2, 1])])
    rep = validate(ds)
    assert not rep.ok
    assert any("y=2" in s for s in rep.issues)
    with pytest.raises(DomainError):
        extract_windows(ds)


def test_nonincreasing_time_reported():
    ds = PanelDataset.from_records([_toy_record(t=[1, 3, 2])])
    assert any("strictly increasing" in s for s in validate(ds).issues)


# -- CSV ------------------------------------------------------------------

HEADER = "id,t,y,z,x1\n"


def test_csv_earliest_row_is_initial_status(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text(HEADER + "7,0,0,0.3,0.0\n7,1,0,0.5,1\n7,2,1,2.0,2\n7,3,1,0.1,3\n")
    ds = read_csv(f)
    assert ds.n == 1
    assert ds.y0[0] == 0 and ds.t0[0] == 0
    np.testing.assert_array_equal(ds.t, [1, 2, 3])
    np.testing.assert_allclose(extract_windows(ds).chi_bar[0], [1.0, 2.0, -0.4])


def test_csv_explicit_y0_column(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("id,t,y,y0,z,x1\n1,1,0,0,0.5,1\n1,2,1,0,2.0,2\n1,3,1,0,0.1,3\n")
    ds = read_csv(f)
    assert ds.y0[0] == 0
    assert len(ds.t) == 3


def test_csv_bad_y_names_row(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text(HEADER + "1,0,0,0.3,0.0\n1,1,2,0.5,1\n")
    with pytest.raises(DomainError, match="row 3"):
        read_csv(f)


def test_csv_missing_column(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("id,t,y,x1\n1,0,0,0.0\n")
    with pytest.raises(SchemaError, match="z"):
        read_csv(f)


def test_csv_malformed_row(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text(HEADER + "1,0,0,abc,0.0\n")
    with pytest.raises(ParseError, match=":2"):
        read_csv(f)
    f.write_text(HEADER + "1,0,0\n")
    with pytest.raises(ParseError):
        read_csv(f)


def test_csv_duplicate_period(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text(HEADER + "1,0,0,0.3,0.0\n1,0,1,0.5,1\n")
    with pytest.raises(SchemaError):
        read_csv(f)


def test_csv_shuffled_equals_sorted(tmp_path):
    ds = simulate(design1(n=30, seed=5))
    f = write_csv(ds, tmp_path / "sorted.csv")
    lines = f.read_text().splitlines()
    body = lines[1:]
    np.random.default_rng(0).shuffle(body)
    g = tmp_path / "shuffled.csv"
    g.write_text("\n".join([lines[0], *body]) + "\n")
    assert read_csv(f).equals(read_csv(g))


def test_csv_round_trip(tmp_path):
    ds = simulate(design1(n=40, seed=6))
    back = read_csv(write_csv(ds, tmp_path / "p.csv"))
    assert back.equals(ds)
    a, b = extract_windows(ds), extract_windows(back)
    np.testing.assert_array_equal(a.chi_bar, b.chi_bar)
