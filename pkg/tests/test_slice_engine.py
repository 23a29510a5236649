"""Streaming slice detection: successes, bookkeeping, logs, coverage."""

from __future__ import annotations

import numpy as np
import pytest

from slicekit import (
    AssumptionViolated,
    Params,
    RowBoundInput,
    SliceEventKind,
    SliceState,
    beta4,
    combined_row_bound,
    identity_step,
    inf_norm,
    informed_rows,
    is_success,
    push,
    random_product_sequence,
    read_slice_log,
    row_update,
    run_sequence,
    write_event_log,
    write_slice_log,
)

PARAMS = Params(beta1=0.05, beta2=0.7)
LOOSE = Params(beta1=0.3, beta2=0.5)


def sub_update(n, row, total, spread_to=None):
    """Sub-stochastic single-row update with the given row sum."""
    p_row = np.zeros(n)
    p_row[row] = total if spread_to is None else total / 2
    if spread_to is not None:
        p_row[spread_to] = total / 2
    return row_update(n, row, p_row)


def stoch_update(n, row, weights):
    return row_update(n, row, weights)


class TestInformedRows:
    def test_identity_has_none(self):
        assert informed_rows(np.eye(3), PARAMS) == set()

    def test_single_informed_row(self):
        # [DERIVED] row sums 0.5 and 1.0; only the first is informed
        assert informed_rows(np.array([[0.3, 0.2], [0.0, 1.0]]), PARAMS) == {0}

    def test_both_rows_informed(self):
        # [DERIVED] row sums 0.5 and 0.3
        assert informed_rows(np.array([[0.3, 0.2], [0.1, 0.2]]), PARAMS) == {0, 1}


class TestIsSuccess:
    def test_substochastic_update_at_uninformed_row(self):
        state = SliceState(n=2)
        m = sub_update(2, 0, 0.5)
        assert is_success(m, state, PARAMS) == 0

    def test_stochastic_update_with_no_informed_weight(self):
        state = SliceState(n=2)
        state.informed = set()
        m = stoch_update(2, 0, [0.5, 0.5])
        assert is_success(m, state, PARAMS) is None

    def test_stochastic_update_weighting_informed_row(self):
        state = SliceState(n=2)
        state.informed = {1}
        m = stoch_update(2, 0, [0.5, 0.5])
        assert is_success(m, state, PARAMS) == 0

    def test_identity_is_never_a_success(self):
        state = SliceState(n=2)
        assert is_success(identity_step(2), state, PARAMS) is None

    def test_already_informed_row_cannot_succeed_again(self):
        state = SliceState(n=2)
        state.informed = {0}
        assert is_success(sub_update(2, 0, 0.4), state, PARAMS) is None

    @pytest.mark.parametrize("seed", range(6))
    def test_prediction_matches_push(self, seed):
        rng = np.random.default_rng(seed)
        params = LOOSE
        mats = random_product_sequence(3, params, 40, rng=rng)
        state = SliceState(n=3)
        for m in mats:
            predicted = is_success(m, state, params)
            state, events = push(state, m, params)
            succeeded = [
                ev.row for ev in events if ev.kind is SliceEventKind.SUCCESS
            ]
            if predicted is None:
                assert succeeded == []
            else:
                assert succeeded == [predicted]


class TestPush:
    def test_identity_is_skipped(self):
        state = SliceState(n=2)
        state, events = push(state, identity_step(2), PARAMS, k=7)
        assert [ev.kind for ev in events] == [SliceEventKind.SKIPPED]
        assert state.k_local == 0
        assert state.next_k == 0

    def test_first_success_opens_the_slice(self):
        state = SliceState(n=2)
        state, events = push(state, sub_update(2, 0, 0.5), PARAMS)
        kinds = [ev.kind for ev in events]
        assert kinds == [SliceEventKind.STARTED, SliceEventKind.SUCCESS]
        assert state.informed == {0}
        assert state.h == {0: 1}
        assert state.g == {0: 1}

    def test_indirect_success_stamps_h_but_not_g(self):
        state = SliceState(n=2)
        push(state, sub_update(2, 1, 0.5), PARAMS)
        state, events = push(state, stoch_update(2, 0, [0.5, 0.5]), PARAMS)
        assert any(ev.kind is SliceEventKind.SUCCESS for ev in events)
        assert state.completed == 1  # both rows informed -> finalized

    def test_stochastic_update_without_informed_weight_is_absorbed(self):
        state = SliceState(n=2)
        state, events = push(state, stoch_update(2, 0, [0.5, 0.5]), PARAMS)
        assert [ev.kind for ev in events] == [SliceEventKind.ABSORBED]
        assert state.informed == set()
        assert state.k_local == 1  # buffered into the next window

    def test_completion_resets_the_window(self):
        state = SliceState(n=2)
        push(state, sub_update(2, 0, 0.5), PARAMS)
        state, events = push(state, sub_update(2, 1, 0.6), PARAMS)
        assert events[-1].kind is SliceEventKind.COMPLETED
        done = events[-1].slice
        assert done.length == 2
        assert done.norm <= done.bound + 1e-12
        assert state.informed == set()
        assert state.k_local == 0
        assert state.completed == 1

    def test_strict_mode_rejects_floor_violation(self):
        state = SliceState(n=2)
        with pytest.raises(AssumptionViolated) as excinfo:
            push(state, stoch_update(2, 0, [0.99, 0.01]), PARAMS)
        assert excinfo.value.report is not None

    def test_permissive_mode_accepts_rule_violations(self):
        state = SliceState(n=2)
        state, events = push(
            state, stoch_update(2, 0, [0.99, 0.01]), PARAMS, strict=False
        )
        assert state.k_local == 1

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(AssumptionViolated):
            push(SliceState(n=3), sub_update(2, 0, 0.5), PARAMS)

    def test_self_weight_zero_can_shrink_informed_set_permissively(self):
        """With the weight floor disabled, a stochastic update that parks
        all mass on uninformed rows re-inflates an informed row's sum."""
        state = SliceState(n=2)
        push(state, sub_update(2, 0, 0.5), PARAMS)
        assert state.informed == {0}
        takeover = stoch_update(2, 0, [0.0, 1.0])
        state, _ = push(state, takeover, PARAMS, strict=False)
        assert state.informed == set()  # row 0 lost its discount


class TestRunSequence:
    def test_single_sensor_completes_immediately(self):
        # [DERIVED] n=1: the first success is also the n-th
        slices, events, state = run_sequence(
            [row_update(1, 0, [0.5])], Params(beta1=0.3, beta2=0.6)
        )
        assert len(slices) == 1
        assert slices[0].length == 1
        assert slices[0].norm == pytest.approx(0.5)

    def test_all_stochastic_sequence_never_completes(self):
        mats = [stoch_update(2, k % 2, [0.5, 0.5]) for k in range(10)]
        slices, events, state = run_sequence(mats, LOOSE)
        assert slices == []
        assert state.completed == 0

    def test_events_carry_raw_positions(self):
        mats = [identity_step(2), sub_update(2, 0, 0.5), identity_step(2)]
        _, events, _ = run_sequence(mats, PARAMS)
        assert [ev.k for ev in events] == [0, 1, 1, 2]

    def test_buffered_prefix_counts_toward_the_slice(self):
        """Stochastic steps arriving before the first success belong to the
        slice they precede, so lengths keep covering the sequence."""
        mats = [
            stoch_update(2, 0, [0.5, 0.5]),
            stoch_update(2, 1, [0.5, 0.5]),
            sub_update(2, 0, 0.5),
            sub_update(2, 1, 0.4),
        ]
        slices, _, _ = run_sequence(mats, LOOSE)
        assert len(slices) == 1
        assert slices[0].start_k == 0
        assert slices[0].end_k == 3
        assert slices[0].length == 4

    def test_slices_partition_the_nonidentity_prefix(self):
        rng = np.random.default_rng(11)
        mats = random_product_sequence(3, LOOSE, 80, rng=rng)
        slices, _, _ = run_sequence(mats, LOOSE)
        assert len(slices) >= 2
        assert slices[0].start_k == 0
        for prev, cur in zip(slices, slices[1:]):
            assert cur.start_k == prev.end_k + 1

    def test_completed_slices_are_fully_substochastic(self):
        rng = np.random.default_rng(5)
        mats = random_product_sequence(4, LOOSE, 120, rng=rng)
        slices, _, _ = run_sequence(mats, LOOSE)
        assert slices
        for s in slices:
            assert np.all(s.product.sum(axis=1) < 1.0 - LOOSE.tol)
            assert s.length >= 4  # every row needs at least one success

    def test_coverage_of_nonidentity_product(self):
        rng = np.random.default_rng(23)
        mats = random_product_sequence(3, LOOSE, 100, rng=rng)
        slices, _, _ = run_sequence(mats, LOOSE)
        assert slices
        non_identity = [m for m in mats if not m.is_identity()]
        concat = np.eye(3)
        for s in slices:
            concat = s.product @ concat
        direct = np.eye(3)
        for m in non_identity[: slices[-1].end_k + 1]:
            direct = m.p @ direct
        assert np.max(np.abs(concat - direct)) <= 3 * len(mats) * 1e-12


class TestRowBoundsAgainstRealizedSums:
    """Replay completed slices and check each product row against the
    closed-form row bound built from the recorded h, g, and beta4 values."""

    @pytest.mark.parametrize("seed", range(10))
    def test_row_bounds_dominate(self, seed):
        rng = np.random.default_rng(seed)
        params = LOOSE
        mats = random_product_sequence(4, params, 150, rng=rng)
        non_identity = [m for m in mats if not m.is_identity()]

        state = SliceState(n=4)
        window: list = []
        for m in non_identity:
            window.append(m)
            h_snapshot: dict[int, int] = dict(state.h)
            state, events = push(state, m, params)
            r = m.updated_row
            if r is not None and m.p[r].sum() < 1.0 - params.tol:
                # a direct discount caps the product row at beta2 right away
                row_sum_now = (
                    events[-1].slice.product[r].sum()
                    if events[-1].slice is not None
                    else state.j[r].sum()
                )
                assert row_sum_now <= params.beta2 + 1e-12
            done = [ev.slice for ev in events if ev.slice is not None]
            if not done:
                continue
            s = done[0]
            h_all = {**h_snapshot}
            # recover h for rows that succeeded on the closing push
            for ev in events:
                if ev.kind is SliceEventKind.SUCCESS:
                    h_all.setdefault(ev.row, s.length)
            # replay the window to recover beta4 just before each h
            prefixes = [np.eye(4)]
            for w in window:
                prefixes.append(w.p @ prefixes[-1])
            g_all: dict[int, int] = {}
            for idx, w in enumerate(window, start=1):
                r = w.updated_row
                if r is not None and w.p[r].sum() < 1.0 - params.tol:
                    g_all[r] = idx
            sums = s.product.sum(axis=1)
            row_bounds = []
            for row in range(4):
                if row in g_all:
                    inp = RowBoundInput(slice_len=s.length, g=g_all[row])
                else:
                    b4 = beta4(prefixes[h_all[row] - 1], params)
                    inp = RowBoundInput(
                        slice_len=s.length, h=h_all[row], beta4=b4
                    )
                bound = combined_row_bound(inp, params)
                assert sums[row] <= bound + 1e-9
                row_bounds.append(bound)
            # the full chain: norm <= max row bound <= slice-level bound
            assert s.norm <= max(row_bounds) + 1e-9
            assert max(row_bounds) <= s.bound + 1e-9
            window = []


class TestLogs:
    def test_slice_log_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        mats = random_product_sequence(3, LOOSE, 60, rng=rng)
        slices, events, _ = run_sequence(mats, LOOSE)
        assert slices
        path = tmp_path / "slices.csv"
        write_slice_log(slices, path)
        rows = read_slice_log(path)
        assert len(rows) == len(slices)
        for s, row in zip(slices, rows):
            assert row["slice_index"] == s.index
            assert row["length"] == s.length
            assert row["norm"] == pytest.approx(s.norm, abs=1e-15)

    def test_event_log_header(self, tmp_path):
        mats = [identity_step(2), sub_update(2, 0, 0.5)]
        _, events, _ = run_sequence(mats, PARAMS)
        path = tmp_path / "events.csv"
        write_event_log(events, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "k,event,row,row_sum_after"
        assert len(lines) == 1 + len(events)
