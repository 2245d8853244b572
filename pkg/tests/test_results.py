import math

import pytest

from regioncert import ResultRow, read_results, summarize, write_results
from regioncert.results import COLUMNS


def row(i, **kw):
    base = dict(point_index=i, true_label=0, predicted=0, clean_correct=1,
                status="CERTIFIED_LB", d_B=0.3, d_D=0.25, lower_bound=0.25,
                is_exact=0, upper_bound=0.4, regions_explored=1, p=2.0,
                used_box=0)
    base.update(kw)
    return ResultRow(**base)


def test_round_trip_bitwise(tmp_path):
    rows = [
        row(0, lower_bound=1 / 3, upper_bound=0.1 + 0.2),
        row(1, status="EXACT", is_exact=1, lower_bound=0.25, upper_bound=0.25),
        row(2, status="MISCLASSIFIED", clean_correct=0, lower_bound=0.0,
            upper_bound=0.0),
        row(3, upper_bound=math.inf),
        row(4, d_B=math.nan),
    ]
    path = tmp_path / "r.csv"
    write_results(path, rows, summary={"eps": 0.3, "n": 5, "tag": "demo"})
    back, summary = read_results(path)
    assert summary == {"eps": 0.3, "n": 5, "tag": "demo"}
    assert len(back) == 5
    assert back[0].lower_bound == 1 / 3  # 17 significant digits round-trip
    assert back[0].upper_bound == 0.1 + 0.2
    assert back[3].upper_bound == math.inf
    assert math.isnan(back[4].d_B)
    for a, b in zip(rows, back):
        for c in COLUMNS:
            va, vb = getattr(a, c), getattr(b, c)
            if isinstance(va, float) and math.isnan(va):
                assert math.isnan(vb)
            else:
                assert va == vb


def test_header_is_checked(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="header"):
        read_results(path)


def test_empty_rows(tmp_path):
    path = tmp_path / "r.csv"
    write_results(path, [], summary={"k": 1})
    back, summary = read_results(path)
    assert back == [] and summary == {"k": 1}
    assert summarize([]) == {"n_points": 0}
    path.write_text("")
    back, summary = read_results(path)
    assert back == [] and summary == {}


def test_summary_comments_precede_header(tmp_path):
    path = tmp_path / "r.csv"
    write_results(path, [row(0)], summary={"eps": 0.1})
    lines = path.read_text().splitlines()
    assert lines[0] == "# eps=0.10000000000000001"
    assert lines[1] == ",".join(COLUMNS)


def test_summarize_semantics():
    rows = [
        row(0, lower_bound=0.4, upper_bound=0.5),                  # robust at 0.3
        row(1, lower_bound=0.1, upper_bound=0.2),                  # attackable
        row(2, status="MISCLASSIFIED", clean_correct=0,
            lower_bound=0.0, upper_bound=0.0),                     # clean error
        row(3, status="EXACT", is_exact=1, lower_bound=0.35,
            upper_bound=0.35),                                     # robust, exact
    ]
    out = summarize(rows, eps=0.3)
    assert out["n_points"] == 4
    assert out["test_error"] == pytest.approx(0.25)
    assert out["pct_exact"] == pytest.approx(25.0)
    assert out["median_lower_bound"] == pytest.approx((0.1 + 0.35) / 2)
    assert out["certified_robust_error"] == pytest.approx(0.5)
    assert out["empirical_robust_error"] == pytest.approx(0.5)
    assert out["sandwich_violations"] == 0
    # medians ignore infinite upper bounds
    out = summarize([row(0, upper_bound=math.inf), row(1, upper_bound=0.4)])
    assert out["median_upper_bound"] == pytest.approx(0.4)
    out = summarize([row(0, upper_bound=math.inf)])
    assert out["median_upper_bound"] == math.inf


def test_summarize_flags_violations():
    bad = [row(0, lower_bound=0.5, upper_bound=0.4)]
    assert summarize(bad)["sandwich_violations"] == 1
    edge = [row(0, lower_bound=0.4, upper_bound=0.4)]
    assert summarize(edge)["sandwich_violations"] == 0
