import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpcorrupt.metrics import (
    CLEAN_LABEL,
    LP_GRID_LABELS,
    NOISE_CORRUPTIONS,
    REAL_WORLD_CORRUPTIONS,
    ErrorCell,
    ErrorTable,
    compute_report,
    errors_from_log,
    imperceptible_corruption_error,
    mean_corruption_error,
    mean_corruption_error_ex_noise,
    mean_corruption_error_lp,
    noise_corruption_error,
    parse_prediction_log,
    parse_table_file,
)


def brute_force_mean(rates: dict) -> Fraction:
    """Independent oracle: literal double sum over all (corruption, severity) cells."""
    labels = sorted({c for c, _ in rates})
    severities = sorted({s for _, s in rates})
    total = Fraction(0)
    for s in severities:
        for c in labels:
            total += Fraction(rates[(c, s)])
    return total / (len(labels) * len(severities))


def random_rates(labels, n_sev, rng) -> dict:
    return {(c, s): Fraction(rng.randrange(0, 1001), 1000) for c in labels for s in range(1, n_sev + 1)}


class TestMeanCorruptionError:
    def test_constant_table(self):
        rates = {(c, s): Fraction(1, 2) for c in REAL_WORLD_CORRUPTIONS for s in range(1, 6)}
        assert mean_corruption_error(ErrorTable.from_rates(rates)) == Fraction(1, 2)

    def test_matches_brute_force(self):
        rng = random.Random(1)
        rates = random_rates(REAL_WORLD_CORRUPTIONS, 5, rng)
        table = ErrorTable.from_rates(rates)
        assert mean_corruption_error(table) == brute_force_mean(rates)

    def test_missing_cell_named(self):
        rates = random_rates(REAL_WORLD_CORRUPTIONS, 5, random.Random(2))
        del rates[("fog", 5)]
        with pytest.raises(ValueError, match="contiguous|fog"):
            mean_corruption_error(ErrorTable.from_rates(rates))

    def test_short_severity_range_named(self):
        rates = random_rates(REAL_WORLD_CORRUPTIONS, 5, random.Random(3))
        del rates[("fog", 5)], rates[("fog", 4)]
        with pytest.raises(ValueError, match=r"\('fog', 4\)"):
            mean_corruption_error(ErrorTable.from_rates(rates))

    def test_extra_label_rejected(self):
        rates = random_rates(REAL_WORLD_CORRUPTIONS + ("bonus",), 5, random.Random(3))
        with pytest.raises(ValueError, match="expected 19"):
            mean_corruption_error(ErrorTable.from_rates(rates))


class TestExNoise:
    def test_exclusion(self):
        rates = {
            (c, s): Fraction(1) if c in NOISE_CORRUPTIONS else Fraction(1, 5)
            for c in REAL_WORLD_CORRUPTIONS
            for s in range(1, 6)
        }
        assert mean_corruption_error_ex_noise(ErrorTable.from_rates(rates)) == Fraction(1, 5)

    def test_matches_brute_force(self):
        rng = random.Random(4)
        rates = random_rates(REAL_WORLD_CORRUPTIONS, 5, rng)
        table = ErrorTable.from_rates(rates)
        non_noise = {k: v for k, v in rates.items() if k[0] not in NOISE_CORRUPTIONS}
        assert mean_corruption_error_ex_noise(table) == brute_force_mean(non_noise)

    def test_wrong_flag_count(self):
        rates = random_rates(REAL_WORLD_CORRUPTIONS, 5, random.Random(5))
        flags = {c: c in NOISE_CORRUPTIONS[:3] for c in REAL_WORLD_CORRUPTIONS}
        table = ErrorTable.from_rates(rates, noise_flags=flags)
        with pytest.raises(ValueError, match="expected 4"):
            mean_corruption_error_ex_noise(table)
        # overridable for custom profiles
        assert mean_corruption_error_ex_noise(table, expected_noise=3) > 0

    def test_weighted_decomposition(self):
        rng = random.Random(6)
        rates = random_rates(REAL_WORLD_CORRUPTIONS, 5, rng)
        table = ErrorTable.from_rates(rates)
        mce = mean_corruption_error(table)
        xn = mean_corruption_error_ex_noise(table)
        noise = noise_corruption_error(table)
        assert mce == Fraction(4, 19) * noise + Fraction(15, 19) * xn


class TestLpMean:
    def test_zero_table(self):
        rates = {(c, s): Fraction(0) for c in LP_GRID_LABELS for s in range(1, 11)}
        assert mean_corruption_error_lp(ErrorTable.from_rates(rates)) == 0

    def test_matches_brute_force(self):
        rates = random_rates(LP_GRID_LABELS, 10, random.Random(7))
        assert mean_corruption_error_lp(ErrorTable.from_rates(rates)) == brute_force_mean(rates)

    def test_nine_by_nine_rejected(self):
        rates = random_rates(LP_GRID_LABELS, 9, random.Random(8))
        with pytest.raises(ValueError, match=r"\('L0', 10\)"):
            mean_corruption_error_lp(ErrorTable.from_rates(rates))

    def test_wrong_labels_rejected(self):
        rates = random_rates(("L3",) + LP_GRID_LABELS[1:], 10, random.Random(9))
        with pytest.raises(ValueError, match="L3"):
            mean_corruption_error_lp(ErrorTable.from_rates(rates))


class TestICE:
    def test_no_change(self):
        assert imperceptible_corruption_error(0.1, [0.1, 0.1, 0.1]) == 0

    def test_direct_evaluation(self):
        # (0.02 + 0.04) / (2 * 0.10) = 0.30 -> +30%
        got = imperceptible_corruption_error(Fraction(1, 10), [Fraction(3, 25), Fraction(7, 50)])
        assert got == Fraction(30)

    def test_negative(self):
        got = imperceptible_corruption_error(Fraction(1, 10), [Fraction(9, 100)] * 6)
        assert got == Fraction(-10)

    def test_zero_clean_rejected(self):
        with pytest.raises(ValueError):
            imperceptible_corruption_error(0, [0.1])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            imperceptible_corruption_error(0.1, [])

    def test_sign_matches_mean_comparison(self):
        rng = random.Random(10)
        for _ in range(200):
            clean = Fraction(rng.randrange(1, 1000), 1000)
            errs = [Fraction(rng.randrange(0, 1001), 1000) for _ in range(6)]
            ice = imperceptible_corruption_error(clean, errs)
            mean_err = sum(errs) / len(errs)
            assert (ice < 0) == (mean_err < clean)


class TestErrorsFromLog:
    def test_single_cell_counts(self):
        records = [("fog", 1, "cat", "cat")] * 7 + [("fog", 1, "cat", "dog")] * 3
        table = errors_from_log(records)
        assert table.rate("fog", 1) == Fraction(3, 10)
        cell = table.cells[("fog", 1)]
        assert (cell.n_total, cell.n_wrong) == (10, 3)

    def test_order_independence(self):
        records = [("fog", 1, "a", "b"), ("fog", 1, "a", "a"), ("snow", 1, "c", "c"), (CLEAN_LABEL, 0, "x", "x")]
        t1 = errors_from_log(records)
        t2 = errors_from_log(list(reversed(records)))
        assert t1.cells == t2.cells and t1.clean_error == t2.clean_error

    def test_multi_cell_brute_force(self):
        rng = random.Random(11)
        records = []
        expected: dict[tuple[str, int], list[int]] = {}
        for c in ("fog", "snow", "frost"):
            for s in (1, 2, 3):
                n = rng.randrange(5, 40)
                wrong = rng.randrange(0, n + 1)
                expected[(c, s)] = [wrong, n]
                records += [(c, s, "t", "f")] * wrong + [(c, s, "t", "t")] * (n - wrong)
        rng.shuffle(records)
        table = errors_from_log(records)
        for key, (wrong, n) in expected.items():
            assert table.rate(*key) == Fraction(wrong, n)

    def test_clean_rows(self):
        records = [(CLEAN_LABEL, 0, "a", "a")] * 9 + [(CLEAN_LABEL, 0, "a", "b")]
        records += [("fog", 1, "a", "a")]
        table = errors_from_log(records)
        assert table.clean_error == Fraction(1, 10)

    def test_clean_severity_must_be_zero(self):
        with pytest.raises(ValueError):
            errors_from_log([(CLEAN_LABEL, 1, "a", "a")])

    def test_empty_log(self):
        with pytest.raises(ValueError):
            errors_from_log([])

    def test_merge_equals_concatenation(self):
        rng = random.Random(12)
        recs1 = [("fog", 1, "a", rng.choice("ab")) for _ in range(50)]
        recs2 = [("fog", 1, "a", rng.choice("ab")) for _ in range(70)]
        merged = errors_from_log(recs1).merged(errors_from_log(recs2))
        combined = errors_from_log(recs1 + recs2)
        assert merged.cells == combined.cells


class TestParsers:
    def test_prediction_log_format(self):
        text = "corruption,severity,true,pred\nclean,0,3,3\nfog,1,3,5\nfog,1,2,2\n"
        table = errors_from_log(parse_prediction_log(text))
        assert table.clean_error == 0
        assert table.rate("fog", 1) == Fraction(1, 2)

    def test_prediction_log_bad_header(self):
        with pytest.raises(ValueError, match="header"):
            parse_prediction_log("corruption,severity,label,pred\n")

    def test_prediction_log_bad_fields(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_prediction_log("corruption,severity,true,pred\nfog,1,3\n")
        with pytest.raises(ValueError, match="line 2"):
            parse_prediction_log("corruption,severity,true,pred\nfog,x,3,4\n")

    def test_table_file_counts(self):
        text = "corruption,severity,n_total,n_wrong\nclean,0,100,10\nfog,1,50,5\n"
        table = parse_table_file(text)
        assert table.clean_error == Fraction(1, 10)
        assert table.rate("fog", 1) == Fraction(1, 10)

    def test_table_file_rates(self):
        text = "corruption,severity,rate\nclean,0,0.25\nfog,1,0.5\n"
        table = parse_table_file(text)
        assert table.clean_error == Fraction(1, 4)
        assert table.rate("fog", 1) == Fraction(1, 2)

    def test_table_file_duplicate_cell(self):
        text = "corruption,severity,rate\nfog,1,0.5\nfog,1,0.25\n"
        with pytest.raises(ValueError, match="duplicate"):
            parse_table_file(text)


class TestInvariants:
    def test_permutation_invariance(self):
        rng = random.Random(13)
        rates = random_rates(REAL_WORLD_CORRUPTIONS, 5, rng)
        items = list(rates.items())
        rng.shuffle(items)
        t1 = ErrorTable.from_rates(rates)
        t2 = ErrorTable.from_rates(dict(items))
        assert mean_corruption_error(t1) == mean_corruption_error(t2)
        assert mean_corruption_error_ex_noise(t1) == mean_corruption_error_ex_noise(t2)

    @given(st.fractions(min_value=0, max_value=1))
    @settings(max_examples=30, deadline=None)
    def test_constant_table_identity(self, rate):
        rates = {(c, s): rate for c in LP_GRID_LABELS for s in range(1, 11)}
        got = mean_corruption_error_lp(ErrorTable.from_rates(rates))
        assert got == rate
        assert 0 <= got <= 1

    def test_cell_validation(self):
        with pytest.raises(ValueError):
            ErrorCell.from_counts(5, 4)
        with pytest.raises(ValueError):
            ErrorCell.from_rate(1.5)
        with pytest.raises(ValueError):
            ErrorCell(10, 2, Fraction(1, 2))  # rate inconsistent with counts

    def test_severities_contiguous_from_one(self):
        with pytest.raises(ValueError, match="contiguous"):
            ErrorTable.from_rates({("fog", 2): Fraction(1, 2)})


class TestReport:
    def test_full_report(self):
        rng = random.Random(14)
        rates = random_rates(REAL_WORLD_CORRUPTIONS, 5, rng)
        rates.update(random_rates(LP_GRID_LABELS, 10, rng))
        rates.update(random_rates(("imperceptible",), 6, rng))
        table = ErrorTable.from_rates(rates, clean_error=Fraction(1, 5))
        report = compute_report(table)
        assert report.mCE is not None and report.mCE_xN is not None
        assert report.mCE_Lp is not None and report.iCE is not None
        assert report.clean_error == 0.2
        assert set(report.per_corruption) == set(table.labels())
        d = report.as_dict()
        assert set(d) == {"clean_error", "mCE", "mCE_xN", "mCE_Lp", "iCE", "per_corruption"}

    def test_partial_report(self):
        rates = random_rates(LP_GRID_LABELS, 10, random.Random(15))
        report = compute_report(ErrorTable.from_rates(rates))
        assert report.mCE is None and report.iCE is None
        assert report.mCE_Lp is not None
