"""Dataset ingestion, synthetic data with a controlled spectrum, and JSON run reports."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Union

import numpy as np

from . import prng


class DataError(ValueError):
    """Base class for problems with input data files."""


class EmptyFileError(DataError):
    pass


class RaggedRowError(DataError):
    def __init__(self, path, row: int, got: int, expected: int):
        super().__init__(f"{path}: row {row} has {got} fields, expected {expected}")
        self.row = row


class FieldParseError(DataError):
    def __init__(self, path, row: int, column: int, text: str, reason: str = "not a number"):
        super().__init__(f"{path}: row {row}, field {column}: {text!r} is {reason}")
        self.row = row
        self.column = column


@dataclass(frozen=True)
class LabeledDataset:
    labels: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        if len(self.labels) != self.X.shape[0]:
            raise ValueError(f"{len(self.labels)} labels for {self.X.shape[0]} rows")

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def _detect_delimiter(line: str) -> str:
    return "\t" if "\t" in line else ","


def _parse_label(text: str) -> Union[int, float, str]:
    try:
        value = float(text)
    except ValueError:
        return text
    if math.isfinite(value) and value.is_integer():
        return int(value)
    return value


def parse_delimited(path) -> LabeledDataset:
    """Read a UCR-style file: one row per line, class label first, then values.

    Tab or comma delimiters are detected from the first non-blank line.
    Labels that all look numeric become ints (or floats); otherwise strings.
    Row numbers in errors are 1-based line numbers.
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from exc
    numbered = [(n, line) for n, line in enumerate(lines, start=1) if line.strip()]
    if not numbered:
        raise EmptyFileError(f"{path}: file is empty")
    delim = _detect_delimiter(numbered[0][1])
    width = len(numbered[0][1].split(delim))
    if width < 2:
        raise RaggedRowError(path, numbered[0][0], width, 2)
    labels = []
    X = np.empty((len(numbered), width - 1))
    for r, (n, line) in enumerate(numbered):
        fields = [f.strip() for f in line.split(delim)]
        if len(fields) != width:
            raise RaggedRowError(path, n, len(fields), width)
        if not fields[0]:
            raise FieldParseError(path, n, 1, fields[0], "an empty label")
        labels.append(_parse_label(fields[0]))
        for c, text in enumerate(fields[1:], start=2):
            try:
                value = float(text)
            except ValueError:
                raise FieldParseError(path, n, c, text) from None
            if not math.isfinite(value):
                raise FieldParseError(path, n, c, text, "not finite")
            X[r, c - 2] = value
    if all(isinstance(v, int) for v in labels):
        label_arr = np.asarray(labels, dtype=np.int64)
    elif all(isinstance(v, (int, float)) for v in labels):
        label_arr = np.asarray(labels, dtype=np.float64)
    else:
        label_arr = np.asarray([str(v) for v in labels])
    return LabeledDataset(label_arr, X)


def write_delimited(path, data: LabeledDataset, delimiter: str = ",") -> None:
    """Write a dataset in the format :func:`parse_delimited` reads, at 17 significant digits."""
    rows = []
    for label, row in zip(data.labels, data.X):
        rows.append(delimiter.join([str(label)] + [format(float(v), ".17g") for v in row]))
    Path(path).write_text("\n".join(rows) + "\n")


@dataclass(frozen=True)
class Geometric:
    ratio: float

    def __post_init__(self):
        if not 0 < self.ratio < 1:
            raise ValueError("geometric ratio must be in (0, 1)")

    def values(self, r: int) -> np.ndarray:
        return self.ratio ** np.arange(r, dtype=np.float64)


@dataclass(frozen=True)
class Linear:
    def values(self, r: int) -> np.ndarray:
        return (r - np.arange(r, dtype=np.float64)) / r


@dataclass(frozen=True)
class Custom:
    singular_values: tuple[float, ...]

    def values(self, r: int) -> np.ndarray:
        if len(self.singular_values) != r:
            raise ValueError(f"custom spectrum has {len(self.singular_values)} values, need {r}")
        return np.asarray(self.singular_values, dtype=np.float64)


Spectrum = Union[Geometric, Linear, Custom]


def flat(r: int) -> Custom:
    return Custom((1.0,) * r)


@dataclass(frozen=True)
class SyntheticSpec:
    """Low-rank Gaussian data plus isotropic noise.

    Rows are ``g P + e``: ``g`` has independent normal entries scaled by the
    spectrum, ``P`` has orthonormal rows, ``e`` is N(0, noise_sigma^2).
    ``spectrum=None`` leaves ``g`` unscaled, i.e. a plain random projection
    of isotropic latent data.
    """

    m: int
    d: int
    intrinsic_dim: int
    spectrum: Optional[Spectrum] = None
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.d < 1:
            raise ValueError("m and d must be >= 1")
        if not 1 <= self.intrinsic_dim <= self.d:
            raise ValueError("intrinsic_dim must be in 1..d")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


# stream numbers of the pinned generator
_LATENT, _PROJECTION, _NOISE, _CENTERS, _LABELS = range(5)


def random_orthonormal_rows(r: int, d: int, seed: int) -> np.ndarray:
    """r x d matrix with orthonormal rows from QR of pinned normals (diag(R) > 0)."""
    A = prng.normals(seed, (d, r), _PROJECTION)
    Q, R = np.linalg.qr(A)
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return (Q * signs).T


def _latent(spec: SyntheticSpec) -> np.ndarray:
    r = spec.intrinsic_dim
    G = prng.normals(spec.seed, (spec.m, r), _LATENT)
    return G if spec.spectrum is None else G * spec.spectrum.values(r)


def _finish(spec: SyntheticSpec, G: np.ndarray) -> np.ndarray:
    X = G @ random_orthonormal_rows(spec.intrinsic_dim, spec.d, spec.seed)
    if spec.noise_sigma > 0:
        X += spec.noise_sigma * prng.normals(spec.seed, (spec.m, spec.d), _NOISE)
    return X


def generate_synthetic(spec: SyntheticSpec) -> np.ndarray:
    return _finish(spec, _latent(spec))


def generate_labeled(spec: SyntheticSpec, n_classes: int = 5, separation: float = 3.0) -> LabeledDataset:
    """Synthetic data with class structure in the latent space.

    Each class gets a center drawn as ``separation`` times a standard normal
    latent vector; rows are their class center plus spectrum-scaled noise.
    """
    if n_classes < 1:
        raise ValueError("n_classes must be >= 1")
    r = spec.intrinsic_dim
    centers = separation * prng.normals(spec.seed, (n_classes, r), _CENTERS)
    labels = np.minimum(
        (prng.uniforms(spec.seed, spec.m, _LABELS) * n_classes).astype(np.int64), n_classes - 1
    )
    G = _latent(spec) + centers[labels]
    return LabeledDataset(labels, _finish(spec, G))


def parse_synthetic(text: str) -> SyntheticSpec:
    """Parse ``m=..,d=..,intrinsic=..,spectrum=flat|linear|geo:R,noise=..,seed=..``."""
    known = {"m", "d", "intrinsic", "spectrum", "noise", "seed"}
    fields = {}
    for item in filter(None, (t.strip() for t in text.split(","))):
        if "=" not in item:
            raise ValueError(f"synthetic spec item {item!r} is not key=value")
        key, value = item.split("=", 1)
        if key not in known:
            raise ValueError(f"unknown synthetic spec key {key!r}; expected {sorted(known)}")
        fields[key] = value
    missing = {"m", "d", "intrinsic"} - set(fields)
    if missing:
        raise ValueError(f"synthetic spec is missing {sorted(missing)}")
    r = int(fields["intrinsic"])
    spec_text = fields.get("spectrum", "flat")
    spectrum: Optional[Spectrum]
    if spec_text == "flat":
        spectrum = None
    elif spec_text == "linear":
        spectrum = Linear()
    elif spec_text.startswith("geo:"):
        spectrum = Geometric(float(spec_text[4:]))
    else:
        raise ValueError(f"unknown spectrum {spec_text!r}; expected flat, linear or geo:R")
    return SyntheticSpec(int(fields["m"]), int(fields["d"]), r, spectrum,
                         float(fields.get("noise", 0.0)), int(fields.get("seed", 0)))


REPORT_FIELDS = (
    "dataset", "method", "B", "confidence", "k", "tlb_mean", "tlb_lo", "tlb_hi",
    "dr_seconds", "downstream_seconds", "iterations", "termination", "seed",
)


@dataclass
class Report:
    dataset: str
    method: str
    B: float
    confidence: float
    k: Optional[int]
    tlb_mean: Optional[float]
    tlb_lo: Optional[float]
    tlb_hi: Optional[float]
    dr_seconds: float
    downstream_seconds: Optional[float]
    iterations: list[dict]
    termination: str
    seed: int
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {name: getattr(self, name) for name in REPORT_FIELDS}
        out.update(self.extra)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Report":
        missing = [f for f in REPORT_FIELDS if f not in data]
        if missing:
            raise DataError(f"report is missing fields {missing}")
        extra = {k: v for k, v in data.items() if k not in REPORT_FIELDS}
        return cls(**{f: data[f] for f in REPORT_FIELDS}, extra=extra)


def report_from_result(result, *, dataset: str, method: str, B: float, confidence: float,
                       seed: int, downstream_seconds: float | None = None,
                       dr_seconds: float | None = None, **extra) -> Report:
    """Build a report from a DropResult or a baseline search outcome.

    Baseline outcomes carry no iteration history and need ``dr_seconds``.
    """
    history = getattr(result, "history", None)
    if history is not None:
        iterations = [{"m_i": h.m_i, "k_i": h.k_i, "r_i": h.r_i} for h in history]
        est = result.tlb
        k = result.k
        termination = result.termination.value
        dr = result.total_dr_seconds if dr_seconds is None else dr_seconds
    else:
        iterations = []
        found = getattr(result, "found", False)
        est = result.tlb if found else result.best_estimate
        k = result.k if found else None
        termination = "found" if found else "not-achievable"
        dr = dr_seconds if dr_seconds is not None else 0.0
    return Report(
        dataset=dataset, method=method, B=B, confidence=confidence, k=k,
        tlb_mean=None if est is None else est.mean,
        tlb_lo=None if est is None else est.lo,
        tlb_hi=None if est is None else est.hi,
        dr_seconds=dr, downstream_seconds=downstream_seconds, iterations=iterations,
        termination=termination, seed=seed, extra=dict(extra),
    )


def write_report(report: Report, path) -> None:
    path = Path(path)
    try:
        path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report: {exc.strerror}", str(path)) from exc


def read_report(path) -> Report:
    path = Path(path)
    try:
        return Report.from_dict(json.loads(path.read_text()))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a JSON report ({exc.msg})") from exc


def _cell(value, fmt: str) -> str:
    return "-" if value is None else format(value, fmt)


def aggregate(reports: Iterable[Report]) -> str:
    """Fixed-width table with one row per report, in the order given."""
    header = ("dataset", "method", "ratio", "k", "tlb_lo", "dr_s", "downstream_s", "total_s")
    rows = [header]
    for rep in reports:
        down = rep.downstream_seconds
        total = None if down is None else rep.dr_seconds + down
        rows.append((
            rep.dataset, rep.method, str(rep.extra.get("ratio", "-")),
            "-" if rep.k is None else str(rep.k), _cell(rep.tlb_lo, ".4f"),
            _cell(rep.dr_seconds, ".6g"), _cell(down, ".6g"), _cell(total, ".6g"),
        ))
    widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows
    ) + "\n"
