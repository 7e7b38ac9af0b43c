from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitsentinel import featurize as fz
from splitsentinel.errors import ParseError, SchemaError
from splitsentinel.schema import FeatureMatrix, FeatureSchema

T0 = 1_599_999_980  # 20 s into a minute


def flow(t, src="10.0.0.1", dst="10.0.0.2", proto="tcp", port=443, pkts=10, byts=500):
    return fz.FlowRecord(t, src, dst, proto, port, pkts, byts)


class TestTime:
    def test_to_epoch_forms(self):
        dt = datetime(2020, 9, 13, 12, 26, 40, tzinfo=timezone.utc)
        assert fz.to_epoch(dt) == 1_600_000_000.0
        assert fz.to_epoch("2020-09-13T12:26:40Z") == 1_600_000_000.0
        assert fz.to_epoch(dt.replace(tzinfo=None)) == 1_600_000_000.0
        assert fz.to_epoch("1600000000") == 1_600_000_000.0

    def test_bin_start(self):
        assert fz.bin_start(T0, 60) == T0 - 20
        assert fz.bin_start(T0 - 20, 60) == T0 - 20


class TestFlows:
    def test_single_flow(self):
        fm = fz.featurize_flows([flow(T0)])
        assert fm.schema.names == ["10.0.0.1_10.0.0.2_tcp_443_count",
                                   "10.0.0.1_10.0.0.2_tcp_443_ipkt",
                                   "10.0.0.1_10.0.0.2_tcp_443_ibyt"]
        np.testing.assert_array_equal(fm.values, [[1, 10, 500]])
        assert fm.row_keys == [T0 - 20]

    def test_missing_bin_zero(self):
        fm = fz.featurize_flows([flow(T0), flow(T0 + 120, dst="10.0.0.3")])
        assert fm.n_rows == 3 and fm.n_dims == 6
        np.testing.assert_array_equal(fm.values[1], 0)
        np.testing.assert_array_equal(fm.values[0], [1, 10, 500, 0, 0, 0])

    def test_client_port_collapses(self):
        # two flows that differ only in client port share the (src, dst, proto, server port) key
        fm = fz.featurize_flows([flow(T0, pkts=1, byts=2), flow(T0 + 5, pkts=3, byts=4)])
        np.testing.assert_array_equal(fm.values, [[2, 4, 6]])

    def test_empty(self):
        fm = fz.featurize_flows([])
        assert fm.values.shape == (0, 0)

    def test_explicit_grid(self):
        fm = fz.featurize_flows([flow(T0)], start=T0 - 60, end=T0 + 60)
        assert fm.n_rows == 3
        np.testing.assert_array_equal(fm.values[:, 0], [0, 1, 0])

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 600), st.integers(0, 2), st.integers(0, 50),
                              st.integers(0, 5000)), min_size=1, max_size=30),
           st.randoms(use_true_random=False))
    def test_permutation_invariant_and_totals(self, items, rnd):
        records = [flow(T0 + dt, dst=f"10.0.0.{d}", pkts=p, byts=b) for dt, d, p, b in items]
        base = fz.featurize_flows(records)
        shuffled = list(records)
        rnd.shuffle(shuffled)
        other = fz.featurize_flows(shuffled)
        assert other.schema == base.schema
        np.testing.assert_array_equal(other.values, base.values)
        stats = np.array([n.rsplit("_", 1)[1] for n in base.schema.names])
        assert base.values[:, stats == "count"].sum() == len(records)
        assert base.values[:, stats == "ipkt"].sum() == sum(p for _, _, p, _ in items)
        assert base.values[:, stats == "ibyt"].sum() == sum(b for *_, b in items)


class TestSyslog:
    def test_counts(self):
        events = [{"timestamp": T0, "host": "r1", "template_id": 7}] * 3
        events += [{"timestamp": T0 + 60, "host": "r1", "template_id": 2}]
        fm = fz.featurize_syslog(events)
        assert fm.schema.names == ["r1_log2_count", "r1_log7_count"]
        np.testing.assert_array_equal(fm.values, [[0, 3], [1, 0]])


class TestMib:
    def test_last_value(self):
        samples = [{"timestamp": T0 + 30, "host": "sw", "metric_name": "cpu", "value": 5.0},
                   {"timestamp": T0, "host": "sw", "metric_name": "cpu", "value": 9.0}]
        fm = fz.featurize_mib(samples)
        np.testing.assert_array_equal(fm.values, [[5.0]])
        assert fm.schema.names == ["sw_cpu"]

    def test_tie_order_free(self):
        a = {"timestamp": T0, "host": "sw", "metric_name": "cpu", "value": 1.0}
        b = dict(a, value=4.0)
        assert fz.featurize_mib([a, b]).values[0, 0] == fz.featurize_mib([b, a]).values[0, 0] == 4.0


class TestJoin:
    def part(self, prefix, width, keys, value=1.0):
        schema = FeatureSchema.from_names([f"{prefix}{i}" for i in range(width)])
        return FeatureMatrix(schema, np.full((len(keys), width), value), row_keys=list(keys))

    def test_widths_add(self):
        keys = [0, 60, 120]
        fm = fz.join_features([self.part("f", 36, keys), self.part("m", 180, keys), self.part("s", 43, keys)])
        assert fm.n_dims == 259 and fm.n_rows == 3

    def test_disjoint_keys_zero_fill(self):
        fm = fz.join_features([self.part("a", 2, [0], 1.0), self.part("b", 1, [60], 2.0)])
        assert fm.row_keys == [0, 60]
        np.testing.assert_array_equal(fm.values, [[1, 1, 0], [0, 0, 2]])

    def test_duplicate_names(self):
        with pytest.raises(SchemaError):
            fz.join_features([self.part("a", 2, [0]), self.part("a", 1, [0])])

    def test_empty(self):
        assert fz.join_features([]).values.shape == (0, 0)


class TestReaders:
    def test_flows_round_trip(self, tmp_path):
        path = tmp_path / "flows.csv"
        path.write_text("timestamp,src_ip,dst_ip,protocol,server_port,packets,bytes\n"
                        f"{T0},a,b,udp,53,2,100\n")
        assert fz.read_flows(path) == [fz.FlowRecord(str(T0), "a", "b", "udp", 53, 2, 100)]

    def test_flows_bad_line(self, tmp_path):
        path = tmp_path / "flows.csv"
        path.write_text("timestamp,src_ip,dst_ip,protocol,server_port,packets,bytes\n"
                        f"{T0},a,b,udp,53,2,100\n{T0},a,b,udp,53,x,100\n")
        with pytest.raises(ParseError) as err:
            fz.read_flows(path)
        assert err.value.line == 3

    def test_missing_column(self, tmp_path):
        path = tmp_path / "syslog.csv"
        path.write_text("timestamp,host\n1,a\n")
        with pytest.raises(ParseError):
            fz.read_syslog(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "mib.csv"
        path.write_text("")
        assert fz.read_mib(path) == []
