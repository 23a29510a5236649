"""Asymptotic-stability certificates from slice-length records.

A sequence of completed slices with lengths ``L_1, L_2, ...`` has product
norm at most ``prod_j (1 - alpha_j)`` with per-slice contraction margin
``alpha_j = beta1**(L_j - 1) * (1 - beta2)``.  The product vanishes, and the
system state dies out, whenever ``sum_j alpha_j`` diverges.  Three
certification routes are implemented:

* case i   - every slice length at most a constant N;
* case ii  - an infinite subfamily of slice lengths at most N1, with the
  rest finite (for a finite sample the caller must vouch that the subfamily
  is the visible part of an infinite one);
* case iii - slice lengths grow no faster than the cap
  ``ln((1 - exp(-gamma2 * i**-gamma1)) / (1 - beta2)) / ln(beta1) + 1``
  under some injective assignment of slices to positions i = 1..I, with
  gamma1 in [0, 1] and gamma2 > 0.  The cap is exactly calibrated so the
  assigned slice at position i contributes margin at least
  ``gamma2 * i**-gamma1``, a divergent series, so matching greedily
  (shortest slice to smallest cap) is optimal by an exchange argument.

Cases i and ii are the gamma1 = 0 specializations of case iii.  All traces
are accumulated in log space so verdict-relevant signs survive slice
lengths whose margins underflow as floats.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bounds import log_slice_norm_gap, slice_norm_bound
from .errors import InvalidLength, InvalidSubset, MeaninglessBound
from .matrix_core import Params

__all__ = [
    "Verdict",
    "CertificateCase",
    "BoundTrace",
    "Certificate",
    "bound_trace",
    "certify_case1",
    "certify_case2",
    "case3_length_cap",
    "certify_case3",
    "search_case3",
    "format_certificate",
    "write_certificate",
    "DEFAULT_GAMMA1_GRID",
    "DEFAULT_GAMMA2_GRID",
]

DEFAULT_GAMMA1_GRID: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
DEFAULT_GAMMA2_GRID: tuple[float, ...] = tuple(np.logspace(-3.0, 2.0, 21))


class Verdict(enum.Enum):
    CERTIFIED = "certified"
    NOT_CERTIFIED = "not_certified"


class CertificateCase(enum.Enum):
    CASE_I = "case_i"
    CASE_II = "case_ii"
    CASE_III = "case_iii"


@dataclass(frozen=True)
class BoundTrace:
    """Cumulative norm-bound trajectory over a slice-length sequence.

    ``products[t]`` is ``prod_{j<=t} (1 - alpha_j)`` and ``neg_log_sums[t]``
    the partial sum of ``-ln(1 - alpha_j)``, both computed in log space.
    """

    lengths: np.ndarray
    products: np.ndarray
    neg_log_sums: np.ndarray


def bound_trace(lengths: Sequence[int], params: Params) -> BoundTrace:
    """Trace the certified contraction along ``lengths`` in the given order."""
    arr = np.asarray(list(lengths), dtype=int)
    if arr.size and arr.min() < 1:
        raise InvalidLength(f"slice lengths must be >= 1, got min {arr.min()}")
    log_gaps = np.array(
        [log_slice_norm_gap(int(L), params) for L in arr], dtype=float
    )
    with np.errstate(divide="ignore"):
        neg_terms = -np.log1p(-np.exp(log_gaps))
    neg_log_sums = np.cumsum(neg_terms)
    products = np.exp(-neg_log_sums)
    return BoundTrace(lengths=arr, products=products, neg_log_sums=neg_log_sums)


@dataclass(frozen=True)
class Certificate:
    """Outcome of a certification attempt over a finite slice sample."""

    verdict: Verdict
    case_used: CertificateCase | None
    witnesses: dict
    trace: BoundTrace | None
    horizon: int
    notes: tuple[str, ...] = ()

    @property
    def certified(self) -> bool:
        return self.verdict is Verdict.CERTIFIED


def _not_certified(horizon: int, notes: Iterable[str]) -> Certificate:
    return Certificate(
        verdict=Verdict.NOT_CERTIFIED,
        case_used=None,
        witnesses={},
        trace=None,
        horizon=horizon,
        notes=tuple(notes),
    )


def certify_case1(
    lengths: Sequence[int], n_cap: int, params: Params
) -> Certificate:
    """Certify under a uniform slice-length cap.

    Certified iff every observed length is at most ``n_cap``; the witness is
    the uniform per-slice norm bound ``delta = 1 + beta1**(n_cap-1) *
    (beta2 - 1) < 1``.
    """
    arr = list(int(v) for v in lengths)
    if not arr:
        return _not_certified(0, ["no completed slices in the sample"])
    if min(arr) < 1:
        raise InvalidLength(f"slice lengths must be >= 1, got min {min(arr)}")
    if n_cap < 1:
        raise InvalidLength(f"cap must be >= 1, got {n_cap}")
    offenders = [(t, L) for t, L in enumerate(arr) if L > n_cap]
    if offenders:
        t, L = offenders[0]
        return _not_certified(
            len(arr),
            [f"slice {t} has length {L} above the cap {n_cap} "
             f"({len(offenders)} offender(s) total)"],
        )
    delta = slice_norm_bound(n_cap, params)
    return Certificate(
        verdict=Verdict.CERTIFIED,
        case_used=CertificateCase.CASE_I,
        witnesses={
            "N": int(n_cap),
            "delta": delta,
            # delta = 1 - exp(log_gap); kept in log space because the gap
            # underflows the direct float for large caps while still being
            # strictly positive mathematically.
            "log_gap": log_slice_norm_gap(n_cap, params),
        },
        trace=bound_trace(arr, params),
        horizon=len(arr),
    )


def certify_case2(
    lengths: Sequence[int],
    infinite_subset_cap: int,
    subset: Sequence[int],
    params: Params,
    subset_declared_infinite: bool = True,
) -> Certificate:
    """Certify from a capped subfamily of slices.

    ``subset`` indexes the slices claimed to belong to an infinite family
    whose lengths never exceed ``infinite_subset_cap``; the remaining slices
    need only be finite.  A finite sample cannot itself prove the family is
    infinite, so the caller must keep ``subset_declared_infinite`` true (the
    certificate records this proviso) or the verdict is not certified.
    """
    arr = list(int(v) for v in lengths)
    horizon = len(arr)
    if not arr:
        return _not_certified(0, ["no completed slices in the sample"])
    if min(arr) < 1:
        raise InvalidLength(f"slice lengths must be >= 1, got min {min(arr)}")
    if infinite_subset_cap < 1:
        raise InvalidLength(f"cap must be >= 1, got {infinite_subset_cap}")
    idx = list(int(t) for t in subset)
    if len(set(idx)) != len(idx):
        raise InvalidSubset("subset contains duplicate indices")
    bad = [t for t in idx if not 0 <= t < horizon]
    if bad:
        raise InvalidSubset(f"subset indices out of range: {bad}")
    if not idx:
        return _not_certified(
            horizon, ["empty subset: no infinite bounded family to certify from"]
        )
    if not subset_declared_infinite:
        return _not_certified(
            horizon,
            ["subset not declared part of an infinite family; a finite "
             "sample cannot establish that on its own"],
        )
    offenders = [t for t in idx if arr[t] > infinite_subset_cap]
    if offenders:
        t = offenders[0]
        return _not_certified(
            horizon,
            [f"subset slice {t} has length {arr[t]} above the cap "
             f"{infinite_subset_cap}"],
        )
    delta1 = slice_norm_bound(infinite_subset_cap, params)
    return Certificate(
        verdict=Verdict.CERTIFIED,
        case_used=CertificateCase.CASE_II,
        witnesses={
            "N1": int(infinite_subset_cap),
            "delta1": delta1,
            "log_gap1": log_slice_norm_gap(infinite_subset_cap, params),
            "subset": tuple(idx),
        },
        trace=bound_trace([arr[t] for t in idx], params),
        horizon=horizon,
        notes=(
            "subset declared unbounded-by-construction by the caller; the "
            "verdict is conditional on that declaration",
        ),
    )


def case3_length_cap(
    i: int, gamma1: float, gamma2: float, params: Params
) -> float:
    """Length cap at position i for the slack rate ``gamma2 * i**-gamma1``.

    Defined only while ``beta2 < exp(-gamma2 * i**-gamma1)``, i.e. while the
    requested margin stays below what a single anchor contact can deliver;
    raises :class:`MeaninglessBound` otherwise.  Nondecreasing in i, and
    constant at gamma1 = 0.
    """
    if i < 1:
        raise InvalidSubset(f"position index must be >= 1, got {i}")
    if not 0.0 <= gamma1 <= 1.0:
        raise ValueError(f"gamma1 must lie in [0, 1], got {gamma1}")
    if gamma2 <= 0.0:
        raise ValueError(f"gamma2 must be positive, got {gamma2}")
    x = gamma2 * float(i) ** (-gamma1)
    budget = -math.expm1(-x)  # 1 - exp(-x), accurate for small x
    if budget >= 1.0 - params.beta2:
        raise MeaninglessBound(
            f"requested margin 1-exp(-{x!r}) = {budget!r} is not below "
            f"1 - beta2 = {1.0 - params.beta2!r}"
        )
    return (math.log(budget) - math.log1p(-params.beta2)) / math.log(
        params.beta1
    ) + 1.0


# Caps are computed through logs, so a cap that is mathematically an exact
# integer can come back a few ulps short; feasibility comparisons allow this
# much slack.  The length generator uses the same constant so generated
# lengths always certify.
CAP_FEASIBILITY_TOL = 1e-9


def certify_case3(
    lengths: Sequence[int], gamma1: float, gamma2: float, params: Params
) -> Certificate:
    """Certify under the growing per-position length caps.

    Greedy matching: sort observed lengths and caps ascending and pair them
    rank by rank.  If any rank fails, no injective assignment exists (the
    k-th smallest cap cannot cover the k-th smallest length); if all ranks
    pass, the pairing itself is the witness assignment.
    """
    arr = np.asarray(list(lengths), dtype=int)
    horizon = int(arr.size)
    if horizon == 0:
        return _not_certified(0, ["no completed slices in the sample"])
    if arr.min() < 1:
        raise InvalidLength(f"slice lengths must be >= 1, got min {arr.min()}")
    caps = np.array(
        [case3_length_cap(i, gamma1, gamma2, params) for i in range(1, horizon + 1)]
    )
    by_length = np.argsort(arr, kind="stable")
    by_cap = np.argsort(caps, kind="stable")  # identity when caps nondecreasing
    sorted_lengths = arr[by_length]
    sorted_caps = caps[by_cap]
    failures = np.nonzero(sorted_lengths > sorted_caps + CAP_FEASIBILITY_TOL)[0]
    if failures.size:
        t = int(failures[0])
        return _not_certified(
            horizon,
            [
                f"rank {t}: {int(failures.size)} length(s) exceed their caps, "
                f"first at length {int(sorted_lengths[t])} vs cap "
                f"{float(sorted_caps[t])!r} (position i={int(by_cap[t]) + 1})"
            ],
        )
    # assignment[i-1] = slice index matched to position i
    assignment = np.empty(horizon, dtype=int)
    assignment[by_cap] = by_length
    matched = tuple(
        (i + 1, int(assignment[i]), int(arr[assignment[i]]), float(caps[i]))
        for i in range(horizon)
    )
    return Certificate(
        verdict=Verdict.CERTIFIED,
        case_used=CertificateCase.CASE_III,
        witnesses={
            "gamma1": float(gamma1),
            "gamma2": float(gamma2),
            "assignment": matched,
        },
        trace=bound_trace(arr[assignment].tolist(), params),
        horizon=horizon,
    )


def search_case3(
    lengths: Sequence[int],
    params: Params,
    gamma1_grid: Sequence[float] = DEFAULT_GAMMA1_GRID,
    gamma2_grid: Sequence[float] = DEFAULT_GAMMA2_GRID,
) -> Certificate:
    """Scan the (gamma1, gamma2) grid and return the first certifying pair.

    Grid points whose caps are undefined for some position are skipped.
    Returns a not-certified certificate when the whole grid fails.
    """
    tried = 0
    for g1 in gamma1_grid:
        for g2 in gamma2_grid:
            tried += 1
            try:
                cert = certify_case3(lengths, g1, g2, params)
            except MeaninglessBound:
                continue
            if cert.certified:
                return cert
    return _not_certified(
        len(list(lengths)),
        [f"no certifying pair among {tried} grid points"],
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def format_certificate(cert: Certificate, trace_csv: str | None = None) -> str:
    """Render a certificate as a structured text document."""
    lines = [
        f"verdict: {cert.verdict.value}",
        f"case: {cert.case_used.value if cert.case_used else 'none'}",
        f"horizon: {cert.horizon}",
    ]
    for note in cert.notes:
        lines.append(f"note: {note}")
    log_gap_for = {"delta": "log_gap", "delta1": "log_gap1"}
    for key, value in cert.witnesses.items():
        if key == "assignment":
            continue
        log_key = log_gap_for.get(key)
        if log_key in cert.witnesses and isinstance(value, float) and value >= 1.0:
            # The per-slice gap 1 - delta underflows in binary64; present the
            # contraction through its log-space witness instead of a bare "1".
            lines.append(
                f"witness {key}: 1 - exp({cert.witnesses[log_key]:.17g})"
            )
        elif isinstance(value, float):
            lines.append(f"witness {key}: {value:.17g}")
        else:
            lines.append(f"witness {key}: {value}")
    if trace_csv is not None:
        lines.append(f"trace_csv: {trace_csv}")
    assignment = cert.witnesses.get("assignment")
    if assignment:
        lines.append("assignment:")
        lines.append("i,slice_index,length,cap")
        for i, j, length, cap in assignment:
            lines.append(f"{i},{j},{length},{cap:.17g}")
    return "\n".join(lines) + "\n"


def write_certificate(
    cert: Certificate, directory: str | Path, stem: str = "certificate"
) -> Path:
    """Write the certificate text plus its trace CSV; returns the text path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    trace_name = None
    if cert.trace is not None:
        trace_name = f"{stem}_trace.csv"
        with (directory / trace_name).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "length", "cumulative_product", "neg_log_sum"])
            tr = cert.trace
            for t in range(tr.lengths.size):
                writer.writerow(
                    [
                        t,
                        int(tr.lengths[t]),
                        f"{tr.products[t]:.17g}",
                        f"{tr.neg_log_sums[t]:.17g}",
                    ]
                )
    text_path = directory / f"{stem}.txt"
    text_path.write_text(format_certificate(cert, trace_csv=trace_name))
    return text_path
