import datetime as dt
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from churnlag.dataset import (
    DataError,
    DownloadSeries,
    DuplicateKeyError,
    ParseError,
    RawDataset,
    SynthConfig,
    anonymize,
    generate_synthetic,
    parse_long_csv,
    read_ground_truth_csv,
    write_ground_truth_csv,
    write_long_csv,
)

D0 = dt.date(2020, 1, 1)


def test_gap_fill():
    ds = parse_long_csv("customer_id,date,ftd\nA,2020-01-01,3\nA,2020-01-03,1\n")
    s = ds.series["A"]
    assert s.start_date == D0
    assert s.counts.tolist() == [3, 0, 1]
    assert ds.observation_end == dt.date(2020, 1, 3)


def test_header_only_is_empty():
    ds = parse_long_csv("customer_id,date,ftd\n")
    assert len(ds) == 0


def test_duplicate_key():
    with pytest.raises(DuplicateKeyError):
        parse_long_csv("customer_id,date,ftd\nA,2020-01-01,2\nA,2020-01-01,5\n")


def test_negative_ftd():
    with pytest.raises(DataError, match="negative"):
        parse_long_csv("customer_id,date,ftd\nA,2020-01-01,-1\n")


@pytest.mark.parametrize(
    "body, line",
    [
        ("A,2020-01-01\n", 2),
        ("A,2020-01-01,1\nB,2020-13-01,1\n", 3),
        ("A,2020-01-01,x\n", 2),
    ],
)
def test_malformed_row_reports_line(body, line):
    with pytest.raises(ParseError) as info:
        parse_long_csv("customer_id,date,ftd\n" + body)
    assert info.value.line == line


def test_crlf_and_bom():
    text = "\ufeffcustomer_id,date,ftd\r\nA,2020-01-01,1\r\nB,2020-01-02,2\r\n"
    ds = parse_long_csv(io.StringIO(text, newline=""))
    assert sorted(ds.series) == ["A", "B"]
    assert ds.observation_end == dt.date(2020, 1, 2)


def test_bad_header():
    with pytest.raises(ParseError):
        parse_long_csv("id,date,value\n")


def test_series_invariants():
    with pytest.raises(DataError):
        DownloadSeries("A", D0, [])
    with pytest.raises(DataError):
        DownloadSeries("A", D0, [1.0, np.nan])
    s = DownloadSeries("A", D0, [1, 2])
    with pytest.raises(ValueError):
        s.counts[0] = 5


def test_observation_end_must_cover_series():
    with pytest.raises(DataError):
        RawDataset.from_series([DownloadSeries("A", D0, [1, 2, 3])], observation_end=D0)


series_strategy = st.lists(
    st.tuples(
        st.integers(0, 30),
        st.lists(st.one_of(st.integers(0, 50).map(float), st.floats(0, 100, allow_nan=False)), min_size=1, max_size=40),
    ),
    max_size=6,
)


@settings(max_examples=60, deadline=None)
@given(series_strategy)
def test_round_trip(raw):
    series = [
        DownloadSeries(f"c{i}", D0 + dt.timedelta(days=offset), counts)
        for i, (offset, counts) in enumerate(raw)
    ]
    ds = RawDataset.from_series(series)
    buf = io.StringIO()
    write_long_csv(ds, buf)
    again = parse_long_csv(buf.getvalue())
    assert again.observation_end == ds.observation_end
    assert list(again.series) == list(ds.series)
    for cid in ds.series:
        assert again.series[cid] == ds.series[cid]


def test_anonymize_pure_rescale():
    s = DownloadSeries("A", D0, [0, 5, 10])
    assert anonymize(s, 0.0).counts.tolist() == [0, 0.5, 1.0]
    assert anonymize(DownloadSeries("B", D0, [4]), 0.0).counts.tolist() == [1.0]


def test_anonymize_jitter_matches_redraw():
    s = DownloadSeries("A", D0, [0, 5, 10])
    out = anonymize(s, 0.01, seed=42).counts
    base = np.array([0, 0.5, 1.0])
    assert np.all(out >= base) and np.all(out <= base + 0.01)
    redraw = base + np.random.default_rng(42).uniform(0.0, 0.01, size=3)
    assert np.array_equal(out, redraw)
    assert np.array_equal(anonymize(s, 0.01, seed=42).counts, out)


def test_anonymize_all_zero():
    with pytest.raises(DataError):
        anonymize(DownloadSeries("A", D0, [0, 0]), 0.0)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.one_of(st.just(0.0), st.floats(1e-6, 1e6)), min_size=1, max_size=50).filter(lambda v: max(v) > 0)
)
def test_anonymize_preserves_ratios(values):
    s = DownloadSeries("A", D0, values)
    out = anonymize(s, 0.0).counts
    src = np.asarray(values)
    assert np.argmax(out) == np.argmax(src)
    assert out.max() == 1.0
    np.testing.assert_allclose(out * src.max(), src, rtol=1e-12, atol=0)


def test_synth_churn_count_and_zero_tail():
    data = generate_synthetic(SynthConfig(n_customers=10, churn_fraction=0.5, horizon_days=400, seed=3))
    churned = {cid: d for cid, d in data.churn_dates.items() if d is not None}
    assert len(churned) == 5
    for cid, day in churned.items():
        s = data.dataset.series[cid]
        idx = (day - s.start_date).days
        assert np.all(s.counts[idx:] == 0)


def test_synth_no_churners():
    cfg = SynthConfig(n_customers=50, churn_fraction=0.0, horizon_days=200, size_mu=2.0, size_sigma=0.5, seed=1)
    data = generate_synthetic(cfg)
    assert all(d is None for d in data.churn_dates.values())
    late = [s.counts[-30:].sum() > 0 for s in data.dataset]
    assert all(late)


def test_synth_shape_and_reproducibility():
    cfg = SynthConfig(n_customers=20, horizon_days=300, seed=11)
    a, b = generate_synthetic(cfg), generate_synthetic(cfg)
    assert len(a.dataset) == 20
    for cid in a.dataset.series:
        assert len(a.dataset.series[cid]) == 300
        assert np.array_equal(a.dataset.series[cid].counts, b.dataset.series[cid].counts)
    assert a.churn_dates == b.churn_dates
    c = generate_synthetic(SynthConfig(n_customers=20, horizon_days=300, seed=12))
    assert any(
        not np.array_equal(a.dataset.series[k].counts, c.dataset.series[k].counts) for k in a.dataset.series
    )


def test_synth_wednesday_beats_saturday():
    cfg = SynthConfig(n_customers=1000, horizon_days=364, churn_fraction=0.0, seed=5)
    data = generate_synthetic(cfg)
    counts = np.stack([s.counts for s in data.dataset])
    weekday = np.array([(cfg.start_date + dt.timedelta(days=d)).weekday() for d in range(cfg.horizon_days)])
    assert counts[:, weekday == 2].mean() > counts[:, weekday == 5].mean()


def test_synth_fat_tail():
    cfg = SynthConfig(n_customers=500, horizon_days=120, churn_fraction=0.0, churn_decay_days=30, size_sigma=1.5, seed=9)
    totals = np.array([s.counts.sum() for s in generate_synthetic(cfg).dataset])
    nz = totals[totals > 0]
    assert nz.max() / nz.min() > 100


@pytest.mark.parametrize(
    "kwargs",
    [
        {"churn_fraction": 1.5},
        {"weekly_profile": (1, 1, 1)},
        {"weekly_profile": (0,) * 7},
        {"churn_decay_days": 500, "horizon_days": 400},
        {"n_customers": 0},
        {"noise_dispersion": 0},
    ],
)
def test_synth_config_validation(kwargs):
    with pytest.raises(ValueError):
        SynthConfig(**kwargs)


def test_ground_truth_csv_round_trip():
    data = generate_synthetic(SynthConfig(n_customers=8, horizon_days=200, churn_fraction=0.5, seed=2))
    buf = io.StringIO()
    write_ground_truth_csv(data.churn_dates, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "customer_id,churn_date"
    assert sum(line.endswith(",") for line in lines[1:]) == 4
    buf.seek(0)
    assert read_ground_truth_csv(buf) == data.churn_dates
