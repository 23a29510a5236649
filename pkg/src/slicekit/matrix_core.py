"""Core types and operations for row-(sub)stochastic update matrices.

The systems handled here evolve as ``x(k+1) = P_k x(k) + B_k u(k)`` where
``P_k`` is a non-negative n-by-n matrix over the mobile sensors and ``B_k``
a non-negative n-by-s block over the fixed anchors.  At most one row of
``P_k`` differs from the identity at any step: the row of the single sensor
that fuses its neighborhood that step.  Rows come in three kinds:

* stochastic: the sensor fused only sensor values, the row sums to one;
* sub-stochastic: part of the mass went to anchors (or was withheld), the
  sensor row sums to strictly less than one;
* identity: the sensor kept its value.

``Params`` collects the network-wide constants: ``beta1`` the floor on any
neighbor weight in an anchor-free fusion, ``beta2`` the cap on the sensor
row sum whenever anchor mass is present, ``alpha`` the floor on each anchor
weight actually used, and ``tol`` the classification tolerance.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    NegativeEntry,
    NonConvergence,
    RowSumExceedsOne,
)

__all__ = [
    "Params",
    "RowKind",
    "SystemMatrix",
    "AssumptionCheck",
    "ValidationReport",
    "row_kind",
    "validate_update",
    "multiply",
    "inf_norm",
    "spectral_radius",
    "save_sequence",
    "load_sequence",
]


@dataclass(frozen=True)
class Params:
    """Network-wide weight constants and the numeric tolerance.

    beta1: floor on every (nonzero) weight of an anchor-free fusion row,
        self-weight included; in (0, 1).
    beta2: cap on the sensor-row sum whenever anchor weight is used; in
        [0, 1).  beta2 = 0 models a full anchor takeover.
    alpha: floor on each anchor weight actually used; in (0, 1].
    tol: absolute tolerance for row classification and validation.
    """

    beta1: float
    beta2: float
    alpha: float = 0.1
    tol: float = 1e-12

    def __post_init__(self) -> None:
        if not 0.0 < self.beta1 < 1.0:
            raise ValueError(f"beta1 must lie in (0, 1), got {self.beta1}")
        if not 0.0 <= self.beta2 < 1.0:
            raise ValueError(f"beta2 must lie in [0, 1), got {self.beta2}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.tol < 0.0:
            raise ValueError(f"tol must be non-negative, got {self.tol}")


class RowKind(enum.Enum):
    """Classification of a single update row."""

    STOCHASTIC = "stochastic"
    SUB_STOCHASTIC = "sub_stochastic"
    IDENTITY_ROW = "identity_row"


def _as_matrix(a: np.ndarray | Sequence, name: str = "matrix") -> np.ndarray:
    out = np.asarray(a, dtype=float)
    if out.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-dimensional, got shape {out.shape}")
    return out


@dataclass(frozen=True)
class SystemMatrix:
    """One update step: sensor block ``p`` (n  x n), anchor block ``b``
    (n x s), and the index of the single updated row.

    ``updated_row`` is None for identity steps.  The anchor block is carried
    even in pure product studies (all zeros there) so one type serves both
    analyses.  Instances are treated as immutable; the arrays must not be
    mutated after construction.
    """

    p: np.ndarray
    b: np.ndarray
    updated_row: int | None = None

    def __post_init__(self) -> None:
        p = _as_matrix(self.p, "p")
        n = p.shape[0]
        if p.shape != (n, n):
            raise DimensionMismatch(f"p must be square, got shape {p.shape}")
        b = _as_matrix(self.b, "b")
        if b.shape[0] != n:
            raise DimensionMismatch(
                f"b must have one row per sensor: p is {p.shape}, b is {b.shape}"
            )
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "b", b)
        if self.updated_row is not None:
            object.__setattr__(self, "updated_row", int(self.updated_row))
            if not 0 <= self.updated_row < n:
                raise DimensionMismatch(
                    f"updated_row {self.updated_row} outside range(0, {n})"
                )

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @property
    def s(self) -> int:
        return self.b.shape[1]

    def is_identity(self, tol: float = 1e-12) -> bool:
        """True when the step leaves the state untouched."""
        if self.updated_row is None:
            return _is_identity_matrix(self.p, self.b, tol)
        i = self.updated_row
        row_ok = (
            abs(self.p[i, i] - 1.0) <= tol
            and np.all(np.abs(np.delete(self.p[i], i)) <= tol)
            and np.all(np.abs(self.b[i]) <= tol)
        )
        return bool(row_ok) and _non_updated_rows_identity(self, tol)

    def structure_violations(self, tol: float = 1e-12) -> tuple[str, ...]:
        """Structural defects: negative entries, row sums above one, or
        non-identity rows other than the updated one."""
        issues: list[str] = []
        if np.any(self.p < -tol) or np.any(self.b < -tol):
            issues.append("negative entry")
        totals = self.p.sum(axis=1) + self.b.sum(axis=1)
        bad = np.nonzero(totals > 1.0 + tol)[0]
        for i in bad:
            issues.append(f"row {i} sums to {totals[i]!r} > 1 + tol")
        if self.updated_row is None:
            if not _is_identity_matrix(self.p, self.b, tol):
                issues.append("updated_row is None but the matrix is not identity")
        else:
            for i in range(self.n):
                if i == self.updated_row:
                    continue
                foreign = (
                    abs(self.p[i, i] - 1.0) > tol
                    or np.any(np.abs(np.delete(self.p[i], i)) > tol)
                    or np.any(np.abs(self.b[i]) > tol)
                )
                if foreign:
                    issues.append(
                        f"row {i} differs from the identity but the update "
                        f"is declared at row {self.updated_row}"
                    )
        return tuple(issues)


def _is_identity_matrix(p: np.ndarray, b: np.ndarray, tol: float) -> bool:
    n = p.shape[0]
    return bool(
        np.all(np.abs(p - np.eye(n)) <= tol) and np.all(np.abs(b) <= tol)
    )


def _non_updated_rows_identity(m: SystemMatrix, tol: float) -> bool:
    n = m.n
    for i in range(n):
        if i == m.updated_row:
            continue
        if abs(m.p[i, i] - 1.0) > tol:
            return False
        if np.any(np.abs(np.delete(m.p[i], i)) > tol):
            return False
        if np.any(np.abs(m.b[i]) > tol):
            return False
    return True


def identity_step(n: int, s: int = 0) -> SystemMatrix:
    """The do-nothing update on n sensors and s anchors."""
    return SystemMatrix(np.eye(n), np.zeros((n, s)), updated_row=None)


def row_update(
    n: int,
    row: int,
    p_row: Sequence[float] | np.ndarray,
    b_row: Sequence[float] | np.ndarray | None = None,
    s: int | None = None,
) -> SystemMatrix:
    """Build the update that replaces one row and leaves the rest identity."""
    p = np.eye(n)
    p[row] = np.asarray(p_row, dtype=float)
    if b_row is None:
        s = 0 if s is None else s
        b_row = np.zeros(s)
    b_row = np.asarray(b_row, dtype=float)
    b = np.zeros((n, b_row.shape[0]))
    b[row] = b_row
    return SystemMatrix(p, b, updated_row=row)


def row_kind(
    row: np.ndarray | Sequence[float],
    params: Params,
    index: int | None = None,
) -> RowKind:
    """Classify one update row (sensor and anchor entries concatenated).

    With ``index`` given, only the canonical basis vector at that position
    counts as an identity row; otherwise any basis vector does.  Raises
    :class:`NegativeEntry` or :class:`RowSumExceedsOne` on malformed rows.
    """
    r = np.asarray(row, dtype=float)
    if r.ndim != 1:
        raise DimensionMismatch(f"row must be 1-dimensional, got shape {r.shape}")
    tol = params.tol
    if np.any(r < -tol):
        raise NegativeEntry(f"row has entries below -tol: {r[r < -tol]}")
    total = float(r.sum())
    if total > 1.0 + tol:
        raise RowSumExceedsOne(f"row sums to {total!r} > 1 + tol")
    if total < 1.0 - tol:
        return RowKind.SUB_STOCHASTIC
    if index is not None:
        if abs(r[index] - 1.0) <= tol and np.all(np.abs(np.delete(r, index)) <= tol):
            return RowKind.IDENTITY_ROW
        return RowKind.STOCHASTIC
    near_one = np.abs(r - 1.0) <= tol
    if np.count_nonzero(near_one) == 1 and np.all(r[~near_one] <= tol):
        return RowKind.IDENTITY_ROW
    return RowKind.STOCHASTIC


@dataclass(frozen=True)
class AssumptionCheck:
    """Outcome of one validation rule: whether it applied and whether it
    passed, with human-readable failure details."""

    applicable: bool
    passed: bool
    failures: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return (not self.applicable) or self.passed


_NOT_APPLICABLE = AssumptionCheck(applicable=False, passed=True)


@dataclass(frozen=True)
class ValidationReport:
    """Per-assumption verdicts for a single update matrix.

    ``anchor_free_sum`` requires an anchor-free fused row to sum to one.
    ``weight_floor`` requires every nonzero weight of an anchor-free fusion,
    the (mandatory) self-weight included, to lie in [beta1, 1).
    ``anchor_discount`` requires a fused row carrying anchor mass (or
    withholding mass) to keep its sensor-row sum at or below beta2 and every
    used anchor weight at or above alpha.  ``coupling`` (optional) requires
    every full row over sensors and anchors to sum to exactly one.
    """

    updated_row: int | None
    update_kind: RowKind | None
    structure: AssumptionCheck
    anchor_free_sum: AssumptionCheck
    weight_floor: AssumptionCheck
    anchor_discount: AssumptionCheck
    coupling: AssumptionCheck

    @property
    def checks(self) -> dict[str, AssumptionCheck]:
        return {
            "structure": self.structure,
            "anchor_free_sum": self.anchor_free_sum,
            "weight_floor": self.weight_floor,
            "anchor_discount": self.anchor_discount,
            "coupling": self.coupling,
        }

    @property
    def ok(self) -> bool:
        return all(check.ok for check in self.checks.values())

    def summary(self) -> str:
        parts = []
        for name, check in self.checks.items():
            if not check.applicable:
                continue
            state = "pass" if check.passed else "FAIL"
            parts.append(f"{name}={state}")
            for f in check.failures:
                parts.append(f"  ({f})")
        return "; ".join(parts) if parts else "identity step, nothing to check"


def validate_update(
    m: SystemMatrix, params: Params, require_coupling: bool = False
) -> ValidationReport:
    """Check one update matrix against the admissibility rules.

    Never raises: every defect lands in the report.  ``require_coupling``
    additionally demands that each full row over [p | b] sums to one, as the
    leader-follower protocol guarantees by construction.
    """
    tol = params.tol
    structure_issues = m.structure_violations(tol)
    structure = AssumptionCheck(True, not structure_issues, structure_issues)

    coupling = _NOT_APPLICABLE
    if require_coupling:
        totals = m.p.sum(axis=1) + m.b.sum(axis=1)
        off = np.nonzero(np.abs(totals - 1.0) > tol)[0]
        fails = tuple(f"row {i} totals {totals[i]!r} != 1" for i in off)
        coupling = AssumptionCheck(True, not fails, fails)

    i = m.updated_row
    if i is None or m.is_identity(tol):
        return ValidationReport(
            updated_row=i,
            update_kind=RowKind.IDENTITY_ROW if i is not None else None,
            structure=structure,
            anchor_free_sum=_NOT_APPLICABLE,
            weight_floor=_NOT_APPLICABLE,
            anchor_discount=_NOT_APPLICABLE,
            coupling=coupling,
        )

    p_row = m.p[i]
    b_row = m.b[i]
    p_sum = float(p_row.sum())
    kind = RowKind.SUB_STOCHASTIC if p_sum < 1.0 - tol else RowKind.STOCHASTIC

    anchor_free_sum = _NOT_APPLICABLE
    weight_floor = _NOT_APPLICABLE
    anchor_discount = _NOT_APPLICABLE

    if kind is RowKind.STOCHASTIC:
        fails = []
        if np.any(b_row > tol):
            fails.append("anchor weight present on a row whose sensor part sums to 1")
        if abs(p_sum - 1.0) > tol:
            fails.append(f"sensor row sum {p_sum!r} != 1")
        anchor_free_sum = AssumptionCheck(True, not fails, tuple(fails))

        fails = []
        if p_row[i] <= tol:
            fails.append("self-weight is zero")
        nz = np.nonzero(p_row > tol)[0]
        for j in nz:
            w = p_row[j]
            if w < params.beta1 - tol:
                fails.append(f"weight {w!r} at column {j} below beta1={params.beta1}")
            if w >= 1.0 - tol:
                fails.append(f"weight {w!r} at column {j} reaches 1")
        weight_floor = AssumptionCheck(True, not fails, tuple(fails))
    else:
        fails = []
        if p_sum > params.beta2 + tol:
            fails.append(
                f"sensor row sum {p_sum!r} exceeds beta2={params.beta2}"
            )
        used = np.nonzero(b_row > tol)[0]
        for j in used:
            if b_row[j] < params.alpha - tol:
                fails.append(
                    f"anchor weight {b_row[j]!r} at column {j} below alpha={params.alpha}"
                )
        anchor_discount = AssumptionCheck(True, not fails, tuple(fails))

    return ValidationReport(
        updated_row=i,
        update_kind=kind,
        structure=structure,
        anchor_free_sum=anchor_free_sum,
        weight_floor=weight_floor,
        anchor_discount=anchor_discount,
        coupling=coupling,
    )


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with shape checking."""
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(
            f"cannot multiply shapes {a.shape} and {b.shape}"
        )
    return a @ b


def inf_norm(a: np.ndarray) -> float:
    """Maximum absolute row sum."""
    a = _as_matrix(a, "a")
    if a.size == 0:
        return 0.0
    return float(np.abs(a).sum(axis=1).max())


def spectral_radius(
    a: np.ndarray,
    iter_tol: float = 1e-10,
    max_iter: int = 100_000,
    shift: float = 1e-9,
) -> float:
    """Largest eigenvalue magnitude of a non-negative matrix.

    Power iteration on ``a + shift*I``; the diagonal shift breaks pure
    cycles so the dominant eigenvalue of the shifted matrix is the one with
    the largest real part, which for non-negative ``a`` is the one sought.
    Intended for (products of) update matrices, where the iteration settles
    quickly; raises :class:`NonConvergence` past ``max_iter``.  The result
    is clamped into [0, inf_norm(a)].
    """
    a = _as_matrix(a, "a")
    n = a.shape[0]
    if a.shape != (n, n):
        raise DimensionMismatch(f"spectral radius needs a square matrix, got {a.shape}")
    if np.any(a < 0):
        raise NegativeEntry("spectral_radius expects a non-negative matrix")
    if n == 0:
        return 0.0
    ceiling = inf_norm(a)
    if ceiling == 0.0:
        return 0.0
    shifted = a + shift * np.eye(n)
    v = np.full(n, 1.0 / n)
    est = 0.0
    for _ in range(max_iter):
        w = shifted @ v
        total = float(w.sum())
        if total <= 1e-300:
            return 0.0
        new_est = total / float(v.sum())
        v = w / total
        if abs(new_est - est) <= iter_tol * max(1.0, abs(new_est)):
            return float(min(max(new_est - shift, 0.0), ceiling))
        est = new_est
    raise NonConvergence(
        f"power iteration did not settle within {max_iter} iterations"
    )


# ---------------------------------------------------------------------------
# Sequence I/O: one CSV per matrix block plus a JSON manifest.
# ---------------------------------------------------------------------------

def _write_block(path: Path, a: np.ndarray) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "value"])
        for (r, c), v in np.ndenumerate(a):
            if v != 0.0:
                writer.writerow([r, c, f"{v:.17g}"])


def _read_block(path: Path, shape: tuple[int, int]) -> np.ndarray:
    a = np.zeros(shape)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            a[int(rec["row"]), int(rec["col"])] = float(rec["value"])
    return a


def save_sequence(
    matrices: Iterable[SystemMatrix], directory: str | Path
) -> Path:
    """Persist a matrix sequence: sparse row/col/value CSVs plus a manifest
    recording n, s, and the step order.  Returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    steps = []
    n = s = None
    for k, m in enumerate(matrices):
        if n is None:
            n, s = m.n, m.s
        elif (m.n, m.s) != (n, s):
            raise DimensionMismatch(
                f"step {k} has shape ({m.n}, {m.s}), expected ({n}, {s})"
            )
        p_name = f"p_{k:06d}.csv"
        b_name = f"b_{k:06d}.csv"
        _write_block(directory / p_name, m.p)
        _write_block(directory / b_name, m.b)
        steps.append(
            {"k": k, "p": p_name, "b": b_name, "updated_row": m.updated_row}
        )
    manifest = {
        "n": n if n is not None else 0,
        "s": s if s is not None else 0,
        "count": len(steps),
        "steps": steps,
    }
    manifest_path = directory / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest_path


def load_sequence(directory: str | Path) -> list[SystemMatrix]:
    """Load a sequence previously written by :func:`save_sequence`."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    n, s = manifest["n"], manifest["s"]
    out = []
    for step in manifest["steps"]:
        p = _read_block(directory / step["p"], (n, n))
        b = _read_block(directory / step["b"], (n, s))
        out.append(SystemMatrix(p, b, updated_row=step["updated_row"]))
    return out
