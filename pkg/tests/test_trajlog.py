"""Trajectory log format tests: round trips and schema guards."""

import numpy as np
import pytest

from gaitkit.errors import SchemaVersionError
from gaitkit.trajlog import COLUMN_NAMES, ROW_WIDTH, LogBuilder, TrajectoryLog


def make_log(n=50, dt=0.01):
    rng = np.random.default_rng(0)
    data = rng.standard_normal((n, ROW_WIDTH))
    data[:, 0] = np.arange(n) * dt
    return TrajectoryLog(data, {"log_dt": dt, "mass": 12.0}, ["trot"])


class TestRoundTrip:
    def test_csv_bit_exact(self, tmp_path):
        log = make_log()
        path = tmp_path / "log.csv"
        log.to_csv(path)
        back = TrajectoryLog.from_csv(path)
        assert np.array_equal(back.data, log.data)
        assert back.meta["mass"] == 12.0
        assert back.gait_names == ["trot"]

    def test_rejects_other_schema(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("# not-a-log/9\n# meta: {}\n" + ",".join(COLUMN_NAMES) + "\n")
        with pytest.raises(SchemaVersionError):
            TrajectoryLog.from_csv(path)


class TestAccess:
    def test_column_groups(self):
        log = make_log()
        assert log["q"].shape == (50, 12)
        assert log.column("t").shape == (50,)
        assert log["base_pos"].shape == (50, 3)

    def test_tail_window(self):
        log = make_log(n=100, dt=0.01)
        tail = log.tail(0.25)
        assert len(tail) == 25
        assert tail.column("t")[0] >= 0.74

    def test_builder_growth(self):
        builder = LogBuilder(4, {"log_dt": 0.01}, ["trot"])
        for i in range(10):
            builder.append(t=i * 0.01, q=np.zeros(12))
        log = builder.finalize(termination="open")
        assert len(log) == 10
        assert log.meta["termination"] == "open"
