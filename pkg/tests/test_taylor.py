import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taskrt import DynamicChunkSize, StaticChunkSize, TaskError, seq
from taskrt.taylor import (
    PARADIGMS,
    TaylorParams,
    partition,
    range_sum,
    reference_sum,
    run_paradigm,
    seq_sum,
    sndrcv_pipeline,
    taylor_await,
    taylor_futures,
    taylor_paralg,
    taylor_sndrcv,
    taylor_term,
    taylor_terms,
)

LN_1_1 = math.log1p(0.1)


class TestTerms:
    def test_first_three(self):
        assert taylor_term(1, 0.1) == pytest.approx(0.1, rel=1e-15)
        assert taylor_term(2, 0.1) == pytest.approx(-0.005, rel=1e-15)
        assert taylor_term(3, 0.1) == pytest.approx(0.001 / 3, rel=1e-15)

    def test_sign_alternates(self):
        k = np.arange(1, 20, dtype=np.float64)
        signs = np.sign(taylor_terms(k, 0.5))
        assert list(signs) == [1.0, -1.0] * 9 + [1.0]

    def test_scalar_matches_array(self):
        k = np.arange(1, 500, dtype=np.float64)
        arr = taylor_terms(k, -0.37)
        assert [taylor_term(int(i), -0.37) for i in k] == list(arr)

    def test_seq_sum_is_left_to_right(self):
        values = np.array([1e16, 1.0, -1e16, 1.0])
        # pairwise would give 2.0; left to right loses the first 1.0
        assert seq_sum(values) == ((1e16 + 1.0) - 1e16) + 1.0
        assert seq_sum(np.array([]), 3.0) == 3.0


class TestPartition:
    @pytest.mark.parametrize(
        "n, p, expected",
        [
            (10, 3, [(0, 3), (3, 6), (6, 10)]),
            (9, 3, [(0, 3), (3, 6), (6, 9)]),
            (5, 1, [(0, 5)]),
        ],
    )
    def test_examples(self, n, p, expected):
        assert list(partition(n, p)) == expected

    @pytest.mark.parametrize("n, p", [(5, 0), (5, 6), (1, 2)])
    def test_rejects(self, n, p):
        with pytest.raises(TaskError):
            partition(n, p)

    @staticmethod
    def check_sound(n, p):
        plan = partition(n, p)
        assert len(plan) == p
        assert plan.ranges[0][0] == 0 and plan.ranges[-1][1] == n
        for (b0, e0), (b1, _) in zip(plan.ranges, plan.ranges[1:]):
            assert b0 < e0 == b1
        size = n // p
        assert all(e - b == size for b, e in plan.ranges[:-1])

    def test_exhaustive_small(self):
        for n in range(1, 121):
            for p in range(1, n + 1):
                self.check_sound(n, p)

    @settings(max_examples=300, deadline=None)
    @given(st.integers(1, 10_000).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n))))
    def test_random_large(self, np_):
        self.check_sound(*np_)


class TestReference:
    def test_three_terms(self):
        assert reference_sum(TaylorParams(3, 1, 0.1)) == pytest.approx(0.1 - 0.005 + 0.001 / 3, rel=1e-15)

    def test_fifty_terms(self):
        assert abs(reference_sum(TaylorParams(50, 1, 0.1)) - 0.09531017980432486) <= 1e-14

    @pytest.mark.parametrize("n", [1, 7, 1000])
    def test_zero_argument(self, n):
        assert reference_sum(TaylorParams(n, 1, 0.0)) == 0.0

    def test_convergence_non_increasing(self):
        errs = [abs(reference_sum(TaylorParams(n, 1, 0.1)) - LN_1_1) for n in range(1, 61)]
        assert all(b <= a for a, b in zip(errs, errs[1:]))
        assert all(e <= 1e-14 for e in errs[49:])

    def test_blocks_do_not_change_order(self):
        # crossing block boundaries must match one long left-to-right sum
        n = 200_000
        k = np.arange(1, n + 1, dtype=np.float64)
        assert range_sum(0, n, 0.3) == seq_sum(taylor_terms(k, 0.3))

    def test_range_sum_matches_scalar_loop(self):
        acc = 0.0
        for k in range(1, 301):
            acc += taylor_term(k, -0.8)
        assert range_sum(0, 300, -0.8) == acc


class TestParams:
    @pytest.mark.parametrize("x", [1.0, -1.0, 1.5, math.inf, math.nan])
    def test_rejects_divergent_x(self, x):
        with pytest.raises(TaskError, match="diverges"):
            TaylorParams(10, 1, x)

    @pytest.mark.parametrize("n, p", [(0, 1), (5, 0), (5, 6), (True, 1)])
    def test_rejects_bad_counts(self, n, p):
        with pytest.raises(TaskError):
            TaylorParams(n, p)


class TestFutures:
    def test_thousand_terms_ten_partitions(self, pool4):
        value = taylor_futures(pool4, TaylorParams(1000, 10, 0.1)).value
        assert abs(value - LN_1_1) <= 1e-12

    def test_single_partition_is_exact(self, pool4):
        params = TaylorParams(12_345, 1, 0.4)
        assert taylor_futures(pool4, params).value == reference_sum(params)

    def test_negative_half(self, pool4):
        value = taylor_futures(pool4, TaylorParams(10**6, 8, -0.5)).value
        assert value == pytest.approx(math.log(0.5), rel=1e-12)

    def test_result_fields(self, pool4):
        r = taylor_futures(pool4, TaylorParams(100, 2))
        assert r.paradigm == "futures" and r.elapsed >= 0 and math.isfinite(r.value)


class TestAwait:
    @pytest.mark.parametrize("n, p, x", [(1000, 10, 0.1), (777, 13, -0.6), (20, 1, 0.9)])
    def test_identical_to_futures(self, pool4, n, p, x):
        params = TaylorParams(n, p, x)
        assert taylor_await(pool4, params).value == taylor_futures(pool4, params).value

    def test_one_worker_completes(self, pool1):
        value = taylor_await(pool1, TaylorParams(10_000, 8, 0.1)).value
        assert abs(value - LN_1_1) <= 1e-12

    def test_partition_per_term(self, pool4):
        params = TaylorParams(8, 8, 0.1)
        assert taylor_await(pool4, params).value == pytest.approx(reference_sum(params), rel=1e-15)


class TestParalg:
    def test_static_chunk_ten(self, pool4):
        value = taylor_paralg(pool4, TaylorParams(1000, 1, 0.1), StaticChunkSize(10)).value
        assert abs(value - LN_1_1) <= 1e-12

    def test_seq_is_exact(self, pool4):
        params = TaylorParams(70_001, 1, -0.7)
        assert taylor_paralg(pool4, params, policy=seq).value == reference_sum(params)

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(1, 10_000), chunk=st.integers(1, 500), x=st.floats(-0.9, 0.9))
    def test_dynamic_matches_reference(self, pools, n, chunk, x):
        params = TaylorParams(n, 1, x)
        value = taylor_paralg(pools(4), params, DynamicChunkSize(chunk)).value
        assert value == pytest.approx(reference_sum(params), rel=1e-12, abs=1e-300)

    def test_default_chunker(self, pool4):
        params = TaylorParams(50_000, 1, 0.2)
        assert taylor_paralg(pool4, params).value == pytest.approx(reference_sum(params), rel=1e-12)


class TestSndrcv:
    def test_ten_thousand_terms_ten_partitions(self, pool4):
        value = taylor_sndrcv(pool4, TaylorParams(10_000, 10, 0.1)).value
        assert abs(value - LN_1_1) <= 1e-12

    def test_single_partition_is_exact(self, pool4):
        params = TaylorParams(9_999, 1, 0.55)
        assert taylor_sndrcv(pool4, params).value == reference_sum(params)

    def test_unstarted_pipeline_writes_nothing(self, pool4):
        partials = [None] * 5
        sndrcv_pipeline(pool4, TaylorParams(100, 5), partials)
        pool4.wait_idle()
        assert partials == [None] * 5


class TestCrossParadigm:
    @settings(max_examples=25, deadline=None)
    @given(
        n=st.integers(1, 10**5),
        p=st.integers(1, 64),
        x=st.floats(-0.9, 0.9, exclude_min=True, exclude_max=True),
    )
    def test_all_agree_with_reference(self, pools, n, p, x):
        params = TaylorParams(n, min(p, n), x)
        expected = reference_sum(params)
        for paradigm in PARADIGMS:
            value = run_paradigm(paradigm, pools(4), params).value
            assert value == pytest.approx(expected, rel=1e-12, abs=1e-300), paradigm

    @pytest.mark.parametrize("paradigm", PARADIGMS)
    def test_deterministic_per_plan(self, pool4, paradigm):
        params = TaylorParams(30_000, 7, -0.45)
        values = {run_paradigm(paradigm, pool4, params, StaticChunkSize(997)).value for _ in range(5)}
        assert len(values) == 1

    def test_unknown_paradigm(self, pool4):
        with pytest.raises(TaskError, match="unknown paradigm"):
            run_paradigm("openmp", pool4, TaylorParams(10))


def test_random_worker_counts_agree(pools):
    rng = random.Random(3)
    params = TaylorParams(4321, 9, 0.33)
    expected = taylor_futures(pools(1), params).value
    for _ in range(5):
        assert taylor_futures(pools(rng.randint(1, 6)), params).value == expected
