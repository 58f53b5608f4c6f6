import struct

import numpy as np
import pytest

from fracbsq import io
from fracbsq.integrator import NormSeries, evolve, series_columns
from fracbsq.spectral import random_divfree_state


@pytest.fixture
def state(grid8):
    return random_divfree_state(42, grid8).at_time(0.125)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path, state):
        path = tmp_path / "x.bsqg"
        io.write_checkpoint(state, path)
        back = io.read_checkpoint(path)
        assert back.time == 0.125
        assert back.as_array().tobytes() == state.as_array().tobytes()

    def test_layout(self, tmp_path, state):
        path = tmp_path / "x.bsqg"
        io.write_checkpoint(state, path)
        raw = path.read_bytes()
        assert raw[:4] == b"BSQG"
        assert struct.unpack("<IId", raw[4:20]) == (1, 8, 0.125)
        assert len(raw) == 20 + 4 * 8**3 * 16
        # first payload value is Re(u1) at mode (0,0,0); the next pair is mode (0,0,1)
        arr = state.as_array()
        assert struct.unpack("<dd", raw[20 + 16 : 36 + 16]) == (arr[0, 0, 0, 1].real, arr[0, 0, 0, 1].imag)
        theta_off = 20 + 3 * 8**3 * 16
        assert struct.unpack("<d", raw[theta_off + 16 : theta_off + 24])[0] == arr[3, 0, 0, 1].real

    def test_bad_magic(self, tmp_path, state):
        path = tmp_path / "x.bsqg"
        io.write_checkpoint(state, path)
        raw = bytearray(path.read_bytes())
        raw[0:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(io.CheckpointFormatError, match="magic"):
            io.read_checkpoint(path)

    def test_future_version(self, tmp_path, state):
        path = tmp_path / "x.bsqg"
        io.write_checkpoint(state, path)
        raw = bytearray(path.read_bytes())
        raw[4:8] = struct.pack("<I", io.FORMAT_VERSION + 1)
        path.write_bytes(bytes(raw))
        with pytest.raises(io.UnsupportedVersionError, match="version 2"):
            io.read_checkpoint(path)

    @pytest.mark.parametrize("cut", [3, 19, 21, 1000])
    def test_truncated(self, tmp_path, state, cut):
        path = tmp_path / "x.bsqg"
        io.write_checkpoint(state, path)
        path.write_bytes(path.read_bytes()[:cut])
        with pytest.raises(io.CheckpointFormatError, match="truncated"):
            io.read_checkpoint(path)

    def test_grid_mismatch(self, tmp_path, state):
        path = tmp_path / "x.bsqg"
        io.write_checkpoint(state, path)
        with pytest.raises(io.CheckpointFormatError, match="does not match"):
            io.read_checkpoint(path, expected_n=16)

    def test_trajectory_file(self, tmp_path, state):
        states = [state, state.scaled(2.0).at_time(0.5)]
        path = tmp_path / "t.bsqg"
        io.write_trajectory(states, path)
        back = io.read_trajectory(path)
        assert [s.time for s in back] == [0.125, 0.5]
        assert back[1].as_array().tobytes() == states[1].as_array().tobytes()
        with pytest.raises(io.CheckpointFormatError, match="trailing"):
            io.read_checkpoint(path)


class TestSeries:
    def test_empty_is_header_only(self, tmp_path):
        path = tmp_path / "s.csv"
        io.write_series(NormSeries(4), path)
        assert path.read_text() == ",".join(series_columns(4)) + "\n"

    def test_one_record_two_lines(self, tmp_path):
        s = NormSeries(1)
        s.append([0.1] * len(series_columns(1)))
        path = tmp_path / "s.csv"
        io.write_series(s, path)
        lines = path.read_bytes().split(b"\n")
        assert len(lines) == 3 and lines[-1] == b""
        assert lines[1].split(b",")[0] == b"0.10000000000000001"

    def test_deterministic_and_round_trip(self, tmp_path, grid8, params, diss):
        res = evolve(random_divfree_state(0, grid8), 0.05, 0.01, params, diss, ladder_nmax=2)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        io.write_series(res.series, a)
        io.write_series(res.series, b)
        assert a.read_bytes() == b.read_bytes()
        back = io.read_series(a)
        assert back.rows == res.series.rows

    def test_nonfinite_rendering(self):
        assert [io.format_float(v) for v in (np.nan, np.inf, -np.inf, 1.0)] == ["nan", "inf", "-inf", "1"]


class TestKeyValue:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "r.txt"
        io.write_keyvalue([("a.b", 0.1), ("flag", True), ("n", 3), ("x", float("nan"))], path, comment="hello")
        kv = io.read_keyvalue(path)
        assert kv == {"a.b": "0.1", "flag": "true", "n": "3", "x": "nan"}
        assert float(kv["a.b"]) == 0.1
