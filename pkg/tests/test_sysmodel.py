"""Queueing formulas, MVA recursion, dataset lookup, external solver protocol."""

import math
import sys

import numpy as np
import pytest

from pceperf.errors import (
    ConfigError,
    DatasetFormatError,
    DatasetLookupError,
    DomainError,
    EvaluationError,
    InstabilityError,
)
from pceperf.report import format_float
from pceperf.sysmodel import (
    ClosedNetworkSpec,
    Dataset,
    DatasetSpec,
    Station,
    dataset_eval,
    external_eval,
    external_eval_batch,
    load_dataset,
    mm1_metrics,
    mva_solve,
    round_half_even,
)


# ---------------------------------------------------------------- M/M/1


def test_mm1_exact_values():
    m = mm1_metrics(0.5, 1.0)
    assert m.utilization == 0.5
    assert m.response_time == 2.0
    assert m.throughput == 0.5
    m = mm1_metrics(99.0, 0.01)
    assert m.utilization == pytest.approx(0.99)
    assert m.response_time == pytest.approx(1.0)
    assert m.throughput == 99.0


def test_mm1_saturation_and_domain():
    with pytest.raises(InstabilityError):
        mm1_metrics(1.0, 1.0)
    with pytest.raises(InstabilityError):
        mm1_metrics(2.0, 0.6)
    for lam, s in ((0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -0.5), (math.nan, 1.0)):
        with pytest.raises(DomainError):
            mm1_metrics(lam, s)


def test_mm1_response_grows_with_load():
    times = [mm1_metrics(lam, 0.1).response_time for lam in np.linspace(0.5, 9.5, 19)]
    assert all(b > a for a, b in zip(times, times[1:]))


# ---------------------------------------------------------------- MVA


def net(demands, think=0.0, pop=1):
    stations = tuple(Station(f"s{i}", d) for i, d in enumerate(demands))
    return ClosedNetworkSpec(stations, think_time=think, population=pop)


def test_mva_single_customer():
    r = mva_solve(net([0.1]))
    assert r.response_time == pytest.approx(0.1)
    assert r.throughput == pytest.approx(10.0)
    assert r.queue_lengths["s0"] == pytest.approx(1.0)
    assert r.utilizations["s0"] == pytest.approx(1.0)


def test_mva_two_customers_two_stations():
    # hand-unrolled recursion for D=[0.1, 0.2], N=2
    r = mva_solve(net([0.1, 0.2], pop=2))
    assert r.residence_times["s0"] == pytest.approx(2.0 / 15.0)
    assert r.residence_times["s1"] == pytest.approx(1.0 / 3.0)
    assert r.response_time == pytest.approx(7.0 / 15.0)
    assert r.throughput == pytest.approx(30.0 / 7.0)
    assert r.queue_lengths["s0"] == pytest.approx(4.0 / 7.0)
    assert r.queue_lengths["s1"] == pytest.approx(10.0 / 7.0)
    assert r.utilizations["s1"] == pytest.approx(6.0 / 7.0)


def test_mva_think_time():
    r = mva_solve(net([1.0], think=1.0))
    assert r.throughput == pytest.approx(0.5)
    assert r.queue_lengths["s0"] == pytest.approx(0.5)


def test_mva_population_conservation():
    # queued customers plus customers thinking must add up to N
    for pop in (1, 3, 17, 60):
        r = mva_solve(net([0.12, 0.3, 0.07], think=0.5, pop=pop))
        total = sum(r.queue_lengths.values()) + r.throughput * 0.5
        assert total == pytest.approx(pop, rel=1e-12)


def test_mva_bottleneck_saturation():
    r = mva_solve(net([0.2, 0.05], pop=200))
    assert r.throughput <= 5.0
    assert r.throughput > 4.95
    assert r.utilizations["s0"] > 0.99
    for u in r.utilizations.values():
        assert u <= 1.0 + 1e-12


def test_mva_throughput_monotone_and_bounded():
    demands = [0.1, 0.25, 0.05]
    think = 2.0
    prev = 0.0
    for pop in range(1, 60):
        r = mva_solve(net(demands, think=think, pop=pop))
        assert r.throughput >= prev - 1e-12
        assert r.throughput <= min(pop / (think + sum(demands)), 1.0 / max(demands)) + 1e-12
        prev = r.throughput


def test_mva_validation():
    with pytest.raises(ConfigError):
        ClosedNetworkSpec((Station("a", 0.1), Station("a", 0.2)))
    with pytest.raises(ConfigError):
        ClosedNetworkSpec(())
    with pytest.raises(DomainError):
        Station("a", 0.0)
    with pytest.raises(ConfigError):
        Station("", 0.1)
    with pytest.raises(DomainError):
        net([0.1], think=-1.0)
    with pytest.raises(DomainError):
        net([0.1], pop=0)
    with pytest.raises(DomainError):
        ClosedNetworkSpec((Station("a", 0.1),), population=2.5)


# ---------------------------------------------------------------- dataset


TABLE = """\
# measured on the lab rig
arrival,cores,latency,throughput
1.0,2,0.50,1.9
2.0,2,0.75,3.6
1.0,4,0.30,2.0
2.0,4,0.40,3.9
"""


def write_table(tmp_path, text=TABLE, name="runs.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_dataset_exact_lookup(tmp_path):
    spec = DatasetSpec(
        str(write_table(tmp_path)), ("arrival", "cores"), ("latency", "throughput")
    )
    ds = load_dataset(spec)
    assert ds.inputs.shape == (4, 2)
    assert ds.lines == (3, 4, 5, 6)  # line 1 is a comment, line 2 the header
    out = dataset_eval(ds, [2.0, 4.0])
    assert out.tolist() == [0.40, 3.9]
    # every stored input row must round-trip to its own outputs
    for r in range(4):
        assert dataset_eval(ds, ds.inputs[r]).tolist() == ds.outputs[r].tolist()
    # tiny relative perturbations still count as the same point
    assert dataset_eval(ds, [2.0 * (1 + 1e-12), 4.0]).tolist() == [0.40, 3.9]


def test_dataset_miss_reports_nearest(tmp_path):
    spec = DatasetSpec(str(write_table(tmp_path)), ("arrival", "cores"), ("latency",))
    ds = load_dataset(spec)
    with pytest.raises(DatasetLookupError) as err:
        dataset_eval(ds, [1.5, 3.0])
    msg = str(err.value)
    assert "nearest rows" in msg
    assert msg.count("line ") == 3


def test_dataset_ambiguity(tmp_path):
    text = "a,y\n1.0,5.0\n2.0,6.0\n1.0,7.0\n"
    spec = DatasetSpec(str(write_table(tmp_path, text)), ("a",), ("y",))
    ds = load_dataset(spec)
    with pytest.raises(DatasetLookupError) as err:
        dataset_eval(ds, [1.0])
    assert "matches 2 rows" in str(err.value)
    assert "line 2" in str(err.value) and "line 4" in str(err.value)


def test_dataset_nearest_mode(tmp_path):
    text = "a,y\n0.0,10.0\n2.0,20.0\n5.0,50.0\n"
    spec = DatasetSpec(str(write_table(tmp_path, text)), ("a",), ("y",), match="nearest")
    ds = load_dataset(spec)
    assert dataset_eval(ds, [4.6])[0] == 50.0
    assert dataset_eval(ds, [1.0])[0] == 10.0  # exact tie goes to the earlier row
    assert dataset_eval(ds, [-100.0])[0] == 10.0


def test_dataset_format_errors(tmp_path):
    spec = lambda text: DatasetSpec(str(write_table(tmp_path, text)), ("a",), ("y",))
    with pytest.raises(DatasetFormatError, match="line 3.*column 'y'.*'fast'"):
        load_dataset(spec("a,y\n1.0,2.0\n3.0,fast\n"))
    with pytest.raises(DatasetFormatError, match="line 2: 3 cells"):
        load_dataset(spec("a,y\n1.0,2.0,9.9\n"))
    with pytest.raises(DatasetFormatError, match="duplicate column"):
        load_dataset(spec("a,a,y\n1.0,2.0,3.0\n"))
    with pytest.raises(DatasetFormatError, match="missing columns"):
        load_dataset(spec("a,z\n1.0,2.0\n"))
    with pytest.raises(DatasetFormatError, match="no data rows"):
        load_dataset(spec("a,y\n# just a comment\n"))
    with pytest.raises(DatasetFormatError, match="no header"):
        load_dataset(spec(""))
    with pytest.raises(DatasetFormatError, match="non-finite"):
        load_dataset(spec("a,y\n1.0,inf\n"))
    with pytest.raises(DatasetFormatError, match="cannot read"):
        load_dataset(DatasetSpec(str(tmp_path / "absent.csv"), ("a",), ("y",)))


def test_dataset_spec_validation():
    with pytest.raises(ConfigError):
        DatasetSpec("x.csv", (), ("y",))
    with pytest.raises(ConfigError):
        DatasetSpec("x.csv", ("a",), ("y",), match="fuzzy")


def test_dataset_full_grid(tmp_path):
    # a dense factorial table: every grid point must resolve exactly
    levels_a = np.linspace(1.0, 13.0, 13)
    levels_b = np.linspace(0.5, 3.0, 6)
    levels_c = np.linspace(10.0, 180.0, 18)
    rows = ["a,b,c,y"]
    for a in levels_a.tolist():
        for b in levels_b.tolist():
            for c in levels_c.tolist():
                rows.append(f"{a!r},{b!r},{c!r},{a * b + c!r}")
    spec = DatasetSpec(
        str(write_table(tmp_path, "\n".join(rows) + "\n")), ("a", "b", "c"), ("y",)
    )
    ds = load_dataset(spec)
    assert ds.inputs.shape == (13 * 6 * 18, 3)
    rng = np.random.default_rng(1)
    for _ in range(25):
        a = levels_a[rng.integers(13)]
        b = levels_b[rng.integers(6)]
        c = levels_c[rng.integers(18)]
        assert dataset_eval(ds, [a, b, c])[0] == a * b + c


# ---------------------------------------------------------------- external


ECHO = [sys.executable, "-c", "import sys; print(sys.stdin.readline().strip())"]

MM1_SCRIPT = [
    sys.executable,
    "-c",
    (
        "import sys\n"
        "lam, s = map(float, sys.stdin.readline().split(','))\n"
        "u = lam * s\n"
        "print(f'{u!r},{s / (1 - u)!r},{lam!r}')\n"
    ),
]


def test_external_echo_round_trips_bitwise():
    x = np.array([0.1, 2.0 / 3.0, 1e-17, 12345.6789])
    out = external_eval(ECHO, x)
    assert np.array_equal(out, x)


def test_external_matches_inline_formula():
    out = external_eval(MM1_SCRIPT, [0.8, 0.9], expected_outputs=3)
    m = mm1_metrics(0.8, 0.9)
    assert out[0] == pytest.approx(m.utilization, rel=1e-12)
    assert out[1] == pytest.approx(m.response_time, rel=1e-12)
    assert out[2] == 0.8


def test_external_failure_modes():
    fail = [sys.executable, "-c", "import sys; sys.stderr.write('broken pipe\\n'); sys.exit(1)"]
    with pytest.raises(EvaluationError, match="exited with 1.*broken pipe"):
        external_eval(fail, [1.0])
    chatty = [sys.executable, "-c", "print('1.0'); print('2.0')"]
    with pytest.raises(EvaluationError, match="2 output lines"):
        external_eval(chatty, [1.0])
    words = [sys.executable, "-c", "print('fast,slow')"]
    with pytest.raises(EvaluationError, match="non-numeric"):
        external_eval(words, [1.0])
    with pytest.raises(EvaluationError, match="returned 1 values, expected 2"):
        external_eval(ECHO, [1.0], expected_outputs=2)
    naninf = [sys.executable, "-c", "print('nan')"]
    with pytest.raises(EvaluationError, match="non-finite"):
        external_eval(naninf, [1.0])
    with pytest.raises(EvaluationError, match="cannot run"):
        external_eval(["/no/such/binary"], [1.0])


def test_external_timeout():
    sleepy = [sys.executable, "-c", "import time; time.sleep(30)"]
    with pytest.raises(EvaluationError, match="timed out"):
        external_eval(sleepy, [1.0], timeout=0.5)


SUM_PROD = [
    sys.executable,
    "-c",
    (
        "import sys\n"
        "a, b = map(float, sys.stdin.readline().split(','))\n"
        "print(f'{a + b!r},{a * b!r}')\n"
    ),
]


def test_external_batch_preserves_order():
    rows = np.array([[float(i), float(i + 1)] for i in range(8)])
    out = external_eval_batch(SUM_PROD, rows, expected_outputs=2, threads=4)
    assert out.shape == (8, 2)
    for i in range(8):
        assert out[i, 0] == 2 * i + 1
        assert out[i, 1] == i * (i + 1)


def test_external_batch_failure_carries_row_index():
    picky = [
        sys.executable,
        "-c",
        (
            "import sys\n"
            "x = float(sys.stdin.readline())\n"
            "sys.exit(2) if x < 0 else print(f'{x!r}')\n"
        ),
    ]
    rows = np.array([[1.0], [2.0], [3.0], [-1.0], [5.0]])
    with pytest.raises(EvaluationError, match="row 3") as err:
        external_eval_batch(picky, rows, threads=1)
    assert err.value.index == 3


def test_external_batch_thread_settings(monkeypatch):
    rows = np.array([[1.0, 2.0]])
    with pytest.raises(ConfigError):
        external_eval_batch(SUM_PROD, rows, threads=0)
    monkeypatch.setenv("PCEPERF_THREADS", "abc")
    with pytest.raises(ConfigError, match="PCEPERF_THREADS"):
        external_eval_batch(SUM_PROD, rows)
    monkeypatch.setenv("PCEPERF_THREADS", "2")
    assert external_eval_batch(SUM_PROD, rows).shape == (1, 2)


def test_format_float_round_trip():
    for v in (1 / 3, 1e-300, -2.5e17, 0.1 + 0.2):
        assert float(format_float(v)) == v


# ---------------------------------------------------------------- rounding


def test_round_half_even():
    assert round_half_even(0.5) == 0
    assert round_half_even(1.5) == 2
    assert round_half_even(2.5) == 2
    assert round_half_even(-0.5) == 0
    assert round_half_even(-1.5) == -2
    assert round_half_even(3.0) == 3
    assert round_half_even(73.5) == 74
    assert round_half_even(73.4999) == 73
    with pytest.raises(DomainError):
        round_half_even(math.nan)
