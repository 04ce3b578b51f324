"""CSV ingestion and serialization of estimation reports and experiment tables."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .estimators import RIEstimate
from .inference import TestResult
from .model import IVDataset, make_dataset
from .simulation import ExperimentRow

MISSING_TOKENS = ("", "NA")


def _parse_number(token: str, *, line: int, column: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ValidationError(
            f"line {line}: column {column!r}: cannot parse {token!r} as a number", row=line, field=column
        ) from None
    if not math.isfinite(value):
        raise ValidationError(
            f"line {line}: column {column!r}: non-finite value {token!r}", row=line, field=column
        )
    return value


def parse_iv_csv(text: str, outcome: str, endogenous: str, instruments: list[str]) -> IVDataset:
    """Parse CSV text with a header row into a validated dataset.

    An empty field or the literal ``NA`` marks a missing value and is only
    allowed in the endogenous column.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ValidationError("CSV is empty: a header row is required") from None
    wanted = [outcome, endogenous, *instruments]
    absent = [c for c in wanted if c not in header]
    if absent:
        raise ValidationError(f"column(s) not found in header: {', '.join(absent)}")
    if not instruments:
        raise ValidationError("at least one instrument column is required")
    pos = {c: header.index(c) for c in wanted}

    y, x, Z, missing = [], [], [], []
    for record in reader:
        line = reader.line_num
        if not record:
            continue
        if len(record) != len(header):
            raise ValidationError(f"line {line}: expected {len(header)} fields, found {len(record)}", row=line)
        row = len(y) + 1
        fields_ = {c: record[pos[c]].strip() for c in wanted}
        for c in (outcome, *instruments):
            if fields_[c] in MISSING_TOKENS:
                raise ValidationError(
                    f"missingness outside endogenous column, row {row} (line {line}, column {c!r})",
                    row=row,
                    field=c,
                )
        y.append(_parse_number(fields_[outcome], line=line, column=outcome))
        Z.append([_parse_number(fields_[c], line=line, column=c) for c in instruments])
        tok = fields_[endogenous]
        if tok in MISSING_TOKENS:
            x.append(math.nan)
            missing.append(True)
        else:
            x.append(_parse_number(tok, line=line, column=endogenous))
            missing.append(False)
    if not y:
        raise ValidationError("CSV has a header but no data rows")
    return make_dataset(np.array(y), np.array(x), np.array(Z).reshape(len(y), len(instruments)), np.array(missing))


def read_iv_csv(path: str | Path, outcome: str, endogenous: str, instruments: list[str]) -> IVDataset:
    return parse_iv_csv(Path(path).read_text(), outcome, endogenous, instruments)


@dataclass(frozen=True)
class EstimateReport:
    beta_hat: float
    se_robust_ri: float
    se_conventional: float
    ci_robust: tuple[float, float]
    t_robust: float
    p_hat: float
    n: int
    n0: int
    n1: int
    L: int
    cc_first_stage_f: float
    null_value: float
    alpha: float
    warnings: list[str] = field(default_factory=list)

    @classmethod
    def build(cls, est: RIEstimate, test: TestResult, L: int) -> "EstimateReport":
        warnings = list(est.warnings)
        if test.extreme:
            warnings.append("robust standard error is zero; t statistic reported as infinite")
        return cls(
            beta_hat=est.beta_hat,
            se_robust_ri=est.se_robust_ri,
            se_conventional=est.se_conventional,
            ci_robust=(test.ci_low, test.ci_high),
            t_robust=test.t_stat,
            p_hat=est.p_hat,
            n=est.n,
            n0=est.n0,
            n1=est.n1,
            L=L,
            cc_first_stage_f=est.first_stage.f_statistic,
            null_value=test.null_value,
            alpha=test.alpha,
            warnings=warnings,
        )

    def to_json(self) -> str:
        d = asdict(self)
        d["ci_robust"] = list(self.ci_robust)
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EstimateReport":
        d = json.loads(text)
        d["ci_robust"] = tuple(d["ci_robust"])
        return cls(**d)

    CSV_COLUMNS = (
        "beta_hat", "se_robust_ri", "se_conventional", "ci_robust_low", "ci_robust_high", "t_robust",
        "p_hat", "n", "n0", "n1", "L", "cc_first_stage_f", "null_value", "alpha", "warnings",
    )

    def to_csv(self) -> str:
        d = asdict(self)
        d["ci_robust_low"], d["ci_robust_high"] = self.ci_robust
        d["warnings"] = " | ".join(self.warnings)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        w.writerow([format_number(d[c]) if c != "warnings" else d[c] for c in self.CSV_COLUMNS])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EstimateReport":
        rows = list(csv.DictReader(io.StringIO(text)))
        if len(rows) != 1:
            raise ValidationError("report CSV must hold exactly one data row")
        r = rows[0]
        ints = {"n", "n0", "n1", "L"}
        kw = {c: (int(r[c]) if c in ints else float(r[c])) for c in cls.CSV_COLUMNS[:-1]}
        low, high = kw.pop("ci_robust_low"), kw.pop("ci_robust_high")
        return cls(ci_robust=(low, high), warnings=r["warnings"].split(" | ") if r["warnings"] else [], **kw)

    def to_text(self) -> str:
        level = 100 * (1 - self.alpha)
        rows = [
            ("beta_hat (2SLS, regression imputation)", fmt(self.beta_hat)),
            ("s.e. robust (imputation-aware)", fmt(self.se_robust_ri)),
            ("s.e. conventional", fmt(self.se_conventional)),
            (f"{level:g}% CI robust", f"[{fmt(self.ci_robust[0])}, {fmt(self.ci_robust[1])}]"),
            (f"t robust (H0: beta = {self.null_value:g})", fmt(self.t_robust)),
            ("n / complete / imputed", f"{self.n} / {self.n0} / {self.n1}"),
            ("share imputed", fmt(self.p_hat)),
            ("instruments", str(self.L)),
            ("complete-case first-stage F", fmt(self.cc_first_stage_f)),
        ]
        width = max(len(k) for k, _ in rows)
        lines = [f"{k:<{width}}  {v}" for k, v in rows]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) + "\n"


def fmt(x: float) -> str:
    return f"{x:.6g}"


def format_number(x) -> str:
    """Lossless text for a number: 17 significant digits for floats."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def rows_to_csv(rows: list[ExperimentRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ExperimentRow.COLUMNS)
    for r in rows:
        w.writerow([format_number(getattr(r, c)) for c in ExperimentRow.COLUMNS])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[ExperimentRow]:
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        kw = {c: float(r[c]) for c in ExperimentRow.COLUMNS}
        kw["replications_used"] = int(r["replications_used"])
        out.append(ExperimentRow(**kw))
    return out


def experiment_to_json(config: dict, rows: list[ExperimentRow]) -> str:
    return json.dumps({"config": config, "rows": [r.to_dict() for r in rows]}, indent=2) + "\n"
