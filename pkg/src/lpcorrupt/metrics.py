"""Corruption-robustness metrics computed from error tables or prediction logs.

Four metrics, all "lower is better":

* mCE     — unweighted mean error rate over a corruption x severity grid
            (19 corruptions x 5 severities in the standard real-world profile).
* mCE_xN  — the same mean excluding the 4 pixel-wise-noise corruptions.
* mCE_Lp  — the mean over the 9-norm x 10-severity random corruption grid.
* iCE     — mean relative error increase under the quasi-imperceptible set,
            in percent; negative when corruption helps.

All rates are exact rationals internally (``fractions.Fraction``); integer
prediction counts therefore aggregate without rounding, and metric functions
return Fractions that callers convert to float at report time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .norms import PNorm
from .sets import IMPERCEPTIBLE_LABEL, LP_TEST_NORMS

__all__ = [
    "REAL_WORLD_CORRUPTIONS",
    "NOISE_CORRUPTIONS",
    "LP_GRID_LABELS",
    "CLEAN_LABEL",
    "ErrorCell",
    "ErrorTable",
    "LogRecord",
    "MetricReport",
    "mean_corruption_error",
    "mean_corruption_error_ex_noise",
    "mean_corruption_error_lp",
    "noise_corruption_error",
    "imperceptible_corruption_error",
    "errors_from_log",
    "parse_prediction_log",
    "parse_table_file",
    "compute_report",
]

# The 19-corruption real-world benchmark profile and its 4 pixel-wise-noise members.
REAL_WORLD_CORRUPTIONS = (
    "brightness",
    "contrast",
    "defocus_blur",
    "elastic_transform",
    "fog",
    "frost",
    "gaussian_blur",
    "gaussian_noise",
    "glass_blur",
    "impulse_noise",
    "jpeg_compression",
    "motion_blur",
    "pixelate",
    "saturate",
    "shot_noise",
    "snow",
    "spatter",
    "speckle_noise",
    "zoom_blur",
)
NOISE_CORRUPTIONS = ("gaussian_noise", "shot_noise", "impulse_noise", "speckle_noise")

# Labels of the 9-norm test grid, severity-table order.
LP_GRID_LABELS = tuple(PNorm(p).label for p in LP_TEST_NORMS)

CLEAN_LABEL = "clean"


def as_rate(value) -> Fraction:
    """Exact rate: Fractions pass through, floats convert exactly, strings parse as decimals."""
    if isinstance(value, Fraction):
        rate = value
    elif isinstance(value, int):
        rate = Fraction(value)
    else:
        rate = Fraction(str(value)) if isinstance(value, str) else Fraction(value)
    if not (0 <= rate <= 1):
        raise ValueError(f"error rate must lie in [0, 1], got {value!r}")
    return rate


@dataclass(frozen=True)
class ErrorCell:
    """Error rate of one (corruption, severity) cell, with counts when known."""

    n_total: int
    n_wrong: int
    rate: Fraction

    def __post_init__(self) -> None:
        if self.n_total < 0 or self.n_wrong < 0:
            raise ValueError("counts must be nonnegative")
        if self.n_total > 0:
            if self.n_wrong > self.n_total:
                raise ValueError(f"n_wrong {self.n_wrong} exceeds n_total {self.n_total}")
            if self.rate != Fraction(self.n_wrong, self.n_total):
                raise ValueError("rate inconsistent with counts")
        if not (0 <= self.rate <= 1):
            raise ValueError(f"rate must lie in [0, 1], got {self.rate}")

    @classmethod
    def from_counts(cls, n_wrong: int, n_total: int) -> "ErrorCell":
        if n_total <= 0:
            raise ValueError("from_counts requires n_total > 0")
        return cls(n_total, n_wrong, Fraction(n_wrong, n_total))

    @classmethod
    def from_rate(cls, rate) -> "ErrorCell":
        return cls(0, 0, as_rate(rate))

    @property
    def has_counts(self) -> bool:
        return self.n_total > 0

    def merged(self, other: "ErrorCell") -> "ErrorCell":
        if not (self.has_counts and other.has_counts):
            raise ValueError("can only merge cells backed by integer counts")
        return ErrorCell.from_counts(self.n_wrong + other.n_wrong, self.n_total + other.n_total)


class ErrorTable:
    """Error rates keyed by (corruption label, severity), plus a clean error.

    Severity indices per corruption must form a contiguous range starting at 1.
    Clean error may be absent (``clean_error is None``), in which case iCE is
    unavailable but the grid means still compute.
    """

    def __init__(
        self,
        cells: Mapping[tuple[str, int], ErrorCell],
        clean: ErrorCell | None = None,
        noise_flags: Mapping[str, bool] | None = None,
    ):
        self.cells: dict[tuple[str, int], ErrorCell] = dict(cells)
        self.clean_cell = clean
        if not self.cells:
            raise ValueError("error table has no cells")
        by_label: dict[str, list[int]] = {}
        for (label, severity), cell in self.cells.items():
            if not isinstance(severity, int) or severity < 1:
                raise ValueError(f"severity must be a positive integer, got {severity!r} for {label!r}")
            by_label.setdefault(label, []).append(severity)
        for label, sevs in by_label.items():
            sevs.sort()
            if sevs != list(range(1, len(sevs) + 1)):
                raise ValueError(
                    f"severities for {label!r} must be contiguous from 1, got {sevs}"
                )
        self._severities = {label: len(sevs) for label, sevs in by_label.items()}
        if noise_flags is None:
            noise_flags = {label: label in NOISE_CORRUPTIONS for label in by_label}
        self.noise_flags = {label: bool(noise_flags.get(label, False)) for label in by_label}

    @classmethod
    def from_rates(
        cls,
        rates: Mapping[tuple[str, int], object],
        clean_error=None,
        noise_flags: Mapping[str, bool] | None = None,
    ) -> "ErrorTable":
        cells = {key: ErrorCell.from_rate(rate) for key, rate in rates.items()}
        clean = None if clean_error is None else ErrorCell.from_rate(clean_error)
        return cls(cells, clean, noise_flags)

    @property
    def clean_error(self) -> Fraction | None:
        return None if self.clean_cell is None else self.clean_cell.rate

    def labels(self) -> tuple[str, ...]:
        return tuple(self._severities)

    def n_severities(self, label: str) -> int:
        return self._severities[label]

    def rate(self, label: str, severity: int) -> Fraction:
        return self.cells[(label, severity)].rate

    def mean_rate(self, label: str) -> Fraction:
        n = self._severities[label]
        return sum(self.rate(label, s) for s in range(1, n + 1)) / n

    def restrict(self, labels: Iterable[str]) -> "ErrorTable":
        keep = set(labels)
        cells = {k: c for k, c in self.cells.items() if k[0] in keep}
        if not cells:
            raise ValueError("restriction leaves no cells")
        return ErrorTable(cells, self.clean_cell, self.noise_flags)

    def merged(self, other: "ErrorTable") -> "ErrorTable":
        """Count-wise merge; exact, and equal to rebuilding from concatenated logs."""
        cells = dict(self.cells)
        for key, cell in other.cells.items():
            cells[key] = cells[key].merged(cell) if key in cells else cell
        if self.clean_cell is not None and other.clean_cell is not None:
            clean = self.clean_cell.merged(other.clean_cell)
        else:
            clean = self.clean_cell or other.clean_cell
        flags = dict(self.noise_flags)
        flags.update(other.noise_flags)
        return ErrorTable(cells, clean, flags)


def _require_grid(table: ErrorTable, n_corruptions: int, n_severities: int, expected_labels=None) -> None:
    labels = table.labels()
    if expected_labels is not None:
        expected = set(expected_labels)
        extra = sorted(set(labels) - expected)
        if extra:
            raise ValueError(f"unexpected corruption labels {extra}")
        missing = sorted(expected - set(labels))
        if missing:
            raise ValueError(f"missing corruption labels {missing}")
    elif len(labels) != n_corruptions:
        raise ValueError(f"expected {n_corruptions} corruption labels, found {len(labels)}")
    for label in labels:
        have = table.n_severities(label)
        if have != n_severities:
            missing_cell = (label, have + 1) if have < n_severities else None
            if missing_cell:
                raise ValueError(f"missing cell {missing_cell!r}: expected {n_severities} severities")
            raise ValueError(f"label {label!r} has {have} severities, expected {n_severities}")


def _grid_mean(table: ErrorTable) -> Fraction:
    total = sum(cell.rate for cell in table.cells.values())
    return total / len(table.cells)


def mean_corruption_error(
    table: ErrorTable, expected_corruptions: int = 19, expected_severities: int = 5
) -> Fraction:
    """Unweighted mean of all cell rates over an exact corruption x severity grid."""
    _require_grid(table, expected_corruptions, expected_severities)
    return _grid_mean(table)


def mean_corruption_error_ex_noise(
    table: ErrorTable,
    expected_corruptions: int = 19,
    expected_severities: int = 5,
    expected_noise: int | None = 4,
) -> Fraction:
    """Mean over the corruptions not flagged as pixel-wise noise.

    The standard profile flags exactly 4 of 19 corruptions as noise; pass
    ``expected_noise=None`` to lift that check for custom profiles.
    """
    _require_grid(table, expected_corruptions, expected_severities)
    noise = [label for label in table.labels() if table.noise_flags.get(label)]
    if expected_noise is not None and len(noise) != expected_noise:
        raise ValueError(f"expected {expected_noise} noise-flagged corruptions, found {len(noise)}")
    rest = [label for label in table.labels() if not table.noise_flags.get(label)]
    rates = [table.rate(label, s) for label in rest for s in range(1, expected_severities + 1)]
    return sum(rates) / len(rates)


def noise_corruption_error(table: ErrorTable, expected_severities: int = 5) -> Fraction:
    """Mean over the noise-flagged corruptions only."""
    noise = [label for label in table.labels() if table.noise_flags.get(label)]
    if not noise:
        raise ValueError("no noise-flagged corruptions in table")
    rates = [table.rate(label, s) for label in noise for s in range(1, expected_severities + 1)]
    return sum(rates) / len(rates)


def mean_corruption_error_lp(table: ErrorTable) -> Fraction:
    """Mean over the 9-norm x 10-severity random corruption grid."""
    _require_grid(table, 9, 10, expected_labels=LP_GRID_LABELS)
    return _grid_mean(table)


def imperceptible_corruption_error(clean_error, imperceptible_errors: Sequence) -> Fraction:
    """Mean relative error increase under imperceptible corruptions, in percent.

    Computes sum_i (E_i - E_clean) / (n * E_clean) * 100. Negative whenever the
    mean corrupted error is below the clean error.
    """
    clean = as_rate(clean_error)
    if clean == 0:
        raise ValueError("clean error of 0 leaves relative increase undefined")
    errors = [as_rate(e) for e in imperceptible_errors]
    if not errors:
        raise ValueError("need at least one imperceptible error rate")
    n = len(errors)
    return sum(e - clean for e in errors) / (n * clean) * 100


@dataclass(frozen=True)
class LogRecord:
    corruption: str
    severity: int
    true_label: str
    predicted_label: str


def errors_from_log(records: Iterable[LogRecord | tuple]) -> ErrorTable:
    """Count prediction records into an error table.

    Records under the ``clean`` pseudo-corruption (severity 0) define the clean
    error. Order of records is irrelevant.
    """
    totals: dict[tuple[str, int], int] = {}
    wrongs: dict[tuple[str, int], int] = {}
    clean_total = clean_wrong = 0
    count = 0
    for rec in records:
        if not isinstance(rec, LogRecord):
            rec = LogRecord(*rec)
        count += 1
        wrong = rec.true_label != rec.predicted_label
        if rec.corruption == CLEAN_LABEL:
            if rec.severity != 0:
                raise ValueError(f"clean records carry severity 0, got {rec.severity}")
            clean_total += 1
            clean_wrong += int(wrong)
            continue
        key = (rec.corruption, int(rec.severity))
        totals[key] = totals.get(key, 0) + 1
        wrongs[key] = wrongs.get(key, 0) + int(wrong)
    if count == 0:
        raise ValueError("prediction log is empty")
    if not totals and clean_total == 0:
        raise ValueError("prediction log has no usable records")
    cells = {key: ErrorCell.from_counts(wrongs[key], totals[key]) for key in totals}
    clean = ErrorCell.from_counts(clean_wrong, clean_total) if clean_total else None
    if not cells:
        raise ValueError("prediction log contains only clean records")
    return ErrorTable(cells, clean)


_LOG_HEADER = "corruption,severity,true,pred"


def parse_prediction_log(text: str) -> list[LogRecord]:
    """Parse the delimiter-separated prediction log format."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("prediction log is empty")
    if lines[0].replace(" ", "") != _LOG_HEADER:
        raise ValueError(f"line 1: expected header {_LOG_HEADER!r}, got {lines[0]!r}")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 4 fields, got {len(parts)}")
        corruption, severity, true_label, predicted = parts
        try:
            sev = int(severity)
        except ValueError:
            raise ValueError(f"line {lineno}: severity must be an integer, got {severity!r}") from None
        records.append(LogRecord(corruption, sev, true_label, predicted))
    return records


def parse_table_file(text: str) -> ErrorTable:
    """Parse an error-table file.

    Header is either ``corruption,severity,n_total,n_wrong`` or
    ``corruption,severity,rate``; a ``clean,0,...`` row supplies the clean error.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("error-table file is empty")
    header = [h.strip() for h in lines[0].split(",")]
    if header == ["corruption", "severity", "n_total", "n_wrong"]:
        counted = True
    elif header == ["corruption", "severity", "rate"]:
        counted = False
    else:
        raise ValueError(f"line 1: unrecognized header {lines[0]!r}")
    cells: dict[tuple[str, int], ErrorCell] = {}
    clean: ErrorCell | None = None
    for lineno, line in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != len(header):
            raise ValueError(f"line {lineno}: expected {len(header)} fields, got {len(parts)}")
        label = parts[0]
        try:
            severity = int(parts[1])
        except ValueError:
            raise ValueError(f"line {lineno}: severity must be an integer") from None
        try:
            if counted:
                cell = ErrorCell.from_counts(int(parts[3]), int(parts[2]))
            else:
                cell = ErrorCell.from_rate(parts[2])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if label == CLEAN_LABEL:
            if severity != 0:
                raise ValueError(f"line {lineno}: clean rows carry severity 0")
            if clean is not None:
                raise ValueError(f"line {lineno}: duplicate clean row")
            clean = cell
            continue
        key = (label, severity)
        if key in cells:
            raise ValueError(f"line {lineno}: duplicate cell {key!r}")
        cells[key] = cell
    return ErrorTable(cells, clean)


@dataclass
class MetricReport:
    """All computable metrics for one error table, as floats."""

    clean_error: float | None = None
    mCE: float | None = None
    mCE_xN: float | None = None
    mCE_Lp: float | None = None
    iCE: float | None = None
    per_corruption: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "clean_error": self.clean_error,
            "mCE": self.mCE,
            "mCE_xN": self.mCE_xN,
            "mCE_Lp": self.mCE_Lp,
            "iCE": self.iCE,
            "per_corruption": dict(self.per_corruption),
        }


def compute_report(table: ErrorTable) -> MetricReport:
    """Compute every metric the table's labels support; absent metrics stay None."""
    report = MetricReport()
    if table.clean_error is not None:
        report.clean_error = float(table.clean_error)
    labels = set(table.labels())

    if set(REAL_WORLD_CORRUPTIONS) <= labels:
        rw = table.restrict(REAL_WORLD_CORRUPTIONS)
        report.mCE = float(mean_corruption_error(rw))
        report.mCE_xN = float(mean_corruption_error_ex_noise(rw))
    if set(LP_GRID_LABELS) <= labels:
        report.mCE_Lp = float(mean_corruption_error_lp(table.restrict(LP_GRID_LABELS)))
    if IMPERCEPTIBLE_LABEL in labels and table.clean_error is not None and table.clean_error > 0:
        n = table.n_severities(IMPERCEPTIBLE_LABEL)
        errs = [table.rate(IMPERCEPTIBLE_LABEL, s) for s in range(1, n + 1)]
        report.iCE = float(imperceptible_corruption_error(table.clean_error, errs))
    report.per_corruption = {label: float(table.mean_rate(label)) for label in table.labels()}
    return report
