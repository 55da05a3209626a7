"""Dense two-phase simplex for small linear programs.

Problems are stated as

    maximize    c @ x
    subject to  A_ub @ x <= b_ub,  A_eq @ x == b_eq,  lb <= x <= ub

and reduced internally to ``min c' x', A' x' = b', x' >= 0``. Every optimal
answer is certified by recomputing the basic solution and its dual from the
original data. A failed certificate is reported as ``NUMERICAL_FAILURE``
rather than returned as a wrong optimum.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
OPT_TOL = 1e-9
# Degenerate pivots in a row before switching from Dantzig's rule to Bland's.
STALL_LIMIT = 50


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


class LPError(RuntimeError):
    """A solve that was required to succeed did not."""

    def __init__(self, status: Status, message: str = ""):
        super().__init__(message or f"LP solve failed with status {status.value}")
        self.status = status


@dataclass
class LinearProgram:
    """``max c @ x`` over ``A_ub x <= b_ub``, ``A_eq x = b_eq`` and the box ``[lb, ub]``.

    Missing bounds default to ``0 <= x < inf``. ``lb`` may be ``-inf``
    (the variable is split) and ``ub`` may be ``inf``.
    """

    c: np.ndarray
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, n, "ub")
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n, "eq")
        self.lb = np.zeros(n) if self.lb is None else np.asarray(self.lb, dtype=float).reshape(-1)
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).reshape(-1)
        if self.lb.size != n or self.ub.size != n:
            raise ValueError("bounds must have one entry per variable")
        for name, arr in (("c", self.c), ("A_ub", self.A_ub), ("b_ub", self.b_ub),
                          ("A_eq", self.A_eq), ("b_eq", self.b_eq)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)) or np.any(self.lb == np.inf) \
                or np.any(self.ub == -np.inf):
            raise ValueError("invalid variable bounds")

    @property
    def n(self) -> int:
        return self.c.size


def _rows(A, b, n, name):
    if A is None:
        return np.zeros((0, n)), np.zeros(0)
    A = np.asarray(A, dtype=float).reshape(-1, n)
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape[0] != b.size:
        raise ValueError(f"A_{name} and b_{name} disagree in row count")
    return A, b


@dataclass
class LPResult:
    status: Status
    value: float = float("nan")
    x: Optional[np.ndarray] = None
    iterations: int = 0
    message: str = ""
    tableau: Optional[str] = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


class _Tableau:
    """Standard-form tableau ``min c x, A x = b, x >= 0`` with the objective as last row."""

    def __init__(self, A, b, c, basis):
        m, n = A.shape
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = A
        self.T[:m, n] = b
        self.T[m, :n] = c
        self.basis = np.array(basis, dtype=np.int64)
        self.iterations = 0
        # price out the basic columns
        for r, j in enumerate(self.basis):
            if self.T[m, j] != 0.0:
                self.T[m] -= self.T[m, j] * self.T[r]

    @property
    def m(self):
        return self.T.shape[0] - 1

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j
        self.iterations += 1

    def run(self, allowed: np.ndarray, max_iter: int) -> Status:
        """Iterate to optimality over columns where ``allowed`` is True."""
        T = self.T
        m = self.m
        stall = 0
        bland = False
        while self.iterations < max_iter:
            red = T[m, :-1]
            cand = np.flatnonzero(allowed & (red < -OPT_TOL))
            if cand.size == 0:
                return Status.OPTIMAL
            j = int(cand[0]) if bland else int(cand[np.argmin(red[cand])])
            col = T[:m, j]
            pos = col > PIVOT_TOL
            if not pos.any():
                return Status.UNBOUNDED
            rhs = np.maximum(T[:m, -1], 0.0)
            ratios = np.full(m, np.inf)
            ratios[pos] = rhs[pos] / col[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + PIVOT_TOL * max(1.0, abs(best)))
            r = int(ties[np.argmin(self.basis[ties])])
            if best <= PIVOT_TOL:
                stall += 1
                if stall >= STALL_LIMIT:
                    bland = True
            else:
                stall = 0
            self.pivot(r, j)
        return Status.NUMERICAL_FAILURE

    def text(self) -> str:
        buf = io.StringIO()
        buf.write(f"basis: {self.basis.tolist()}\n")
        np.savetxt(buf, self.T, fmt="%.6g")
        return buf.getvalue()


@dataclass
class _StandardForm:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    # x = shift + recover @ x_std[:n_struct]
    recover: np.ndarray
    shift: np.ndarray
    n_struct: int
    const: float


def _standardize(lp: LinearProgram) -> _StandardForm:
    """Shift and split variables to ``x' >= 0``; add upper bounds and slacks as rows."""
    n = lp.n
    cols = []  # (original var, sign)
    shift = np.zeros(n)
    for k in range(n):
        if np.isfinite(lp.lb[k]):
            shift[k] = lp.lb[k]
            cols.append((k, 1.0))
        elif np.isfinite(lp.ub[k]):
            shift[k] = lp.ub[k]
            cols.append((k, -1.0))
        else:
            cols.append((k, 1.0))
            cols.append((k, -1.0))
    ns = len(cols)
    recover = np.zeros((n, ns))
    for j, (k, s) in enumerate(cols):
        recover[k, j] = s
    A_ub = lp.A_ub @ recover
    b_ub = lp.b_ub - lp.A_ub @ shift
    A_eq = lp.A_eq @ recover
    b_eq = lp.b_eq - lp.A_eq @ shift
    extra_A, extra_b = [], []
    for j, (k, s) in enumerate(cols):
        if s > 0 and np.isfinite(lp.lb[k]) and np.isfinite(lp.ub[k]):
            row = np.zeros(ns)
            row[j] = 1.0
            extra_A.append(row)
            extra_b.append(lp.ub[k] - lp.lb[k])
    if extra_A:
        A_ub = np.vstack([A_ub, np.array(extra_A)])
        b_ub = np.concatenate([b_ub, extra_b])
    n_ub, n_eq = A_ub.shape[0], A_eq.shape[0]
    A = np.zeros((n_ub + n_eq, ns + n_ub))
    A[:n_ub, :ns] = A_ub
    A[:n_ub, ns:] = np.eye(n_ub)
    A[n_ub:, :ns] = A_eq
    b = np.concatenate([b_ub, b_eq])
    c = np.zeros(ns + n_ub)
    c[:ns] = -(lp.c @ recover)  # maximize -> minimize
    return _StandardForm(A, b, c, recover, shift, ns, float(lp.c @ shift))


def _certify(sf: _StandardForm, rows: np.ndarray, basis: np.ndarray):
    """Recompute the basic solution and duals from the original data; return (x, ok, msg)."""
    A = sf.A[rows]
    b = sf.b[rows]
    B = A[:, basis]
    try:
        xB = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, sf.c[basis])
    except np.linalg.LinAlgError:
        return None, False, "singular final basis"
    x = np.zeros(sf.A.shape[1])
    x[basis] = xB
    scale = 1.0 + np.abs(b).max(initial=0.0)
    if x.min(initial=0.0) < -FEAS_TOL * scale:
        return x, False, f"primal bound violation {x.min():.3g}"
    resid = np.abs(sf.A @ x - sf.b).max(initial=0.0)
    if resid > FEAS_TOL * scale:
        return x, False, f"primal residual {resid:.3g}"
    red = sf.c - A.T @ y
    if red.min(initial=0.0) < -OPT_TOL * (1.0 + np.abs(sf.c).max(initial=0.0)):
        return x, False, f"dual infeasibility {red.min():.3g}"
    primal = sf.c @ x
    gap = abs(primal - b @ y)
    if gap > OPT_TOL * (1.0 + abs(primal)):
        return x, False, f"duality gap {gap:.3g}"
    return x, True, ""


def solve(lp: LinearProgram, max_iter: Optional[int] = None, debug: bool = False) -> LPResult:
    """Solve ``lp`` (a maximization). See :class:`Status` for outcomes."""
    if np.any(lp.lb > lp.ub):
        return LPResult(Status.INFEASIBLE, message="empty variable box")
    sf = _standardize(lp)
    A, b = sf.A.copy(), sf.b.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    m, n = A.shape
    n_ub = n - sf.n_struct
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000

    # rows whose slack is +1 with b >= 0 start with the slack basic
    basis = np.full(m, -1, dtype=np.int64)
    for r in range(min(m, n_ub)):
        if not neg[r]:
            basis[r] = sf.n_struct + r
    need = np.flatnonzero(basis < 0)
    n_art = need.size
    A1 = np.hstack([A, np.zeros((m, n_art))])
    for k, r in enumerate(need):
        A1[r, n + k] = 1.0
        basis[r] = n + k

    iters = 0
    if n_art:
        c1 = np.zeros(n + n_art)
        c1[n:] = 1.0
        tab = _Tableau(A1, b, c1, basis)
        status = tab.run(np.ones(n + n_art, dtype=bool), max_iter)
        iters = tab.iterations
        if status is not Status.OPTIMAL:
            return LPResult(Status.NUMERICAL_FAILURE, iterations=iters, message="phase 1 did not converge")
        if -tab.T[-1, -1] > FEAS_TOL * (1.0 + np.abs(b).max(initial=0.0)):
            return LPResult(Status.INFEASIBLE, iterations=iters)
        # drive artificials out of the basis; drop redundant rows
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if tab.basis[r] >= n:
                row = tab.T[r, :n]
                nz = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if nz.size:
                    tab.pivot(r, int(nz[0]))
                else:
                    keep[r] = False
        rows = np.flatnonzero(keep)
        T2 = tab.T[np.append(rows, m)][:, list(range(n)) + [n + n_art]]
        basis2 = tab.basis[rows]
        tab2 = _Tableau.__new__(_Tableau)
        tab2.T = T2.copy()
        tab2.basis = basis2.copy()
        tab2.iterations = tab.iterations
        tab2.T[-1] = 0.0
        tab2.T[-1, :n] = sf.c
        for r, j in enumerate(tab2.basis):
            if tab2.T[-1, j] != 0.0:
                tab2.T[-1] -= tab2.T[-1, j] * tab2.T[r]
        tab = tab2
    else:
        rows = np.arange(m)
        tab = _Tableau(A, b, sf.c, basis)

    status = tab.run(np.ones(n, dtype=bool), max_iter)
    iters = tab.iterations
    dump = tab.text() if debug else None
    if status is Status.UNBOUNDED:
        return LPResult(Status.UNBOUNDED, iterations=iters, tableau=dump)
    if status is not Status.OPTIMAL:
        return LPResult(Status.NUMERICAL_FAILURE, iterations=iters, message="iteration limit", tableau=dump)

    sf_signed = _StandardForm(A, b, sf.c, sf.recover, sf.shift, sf.n_struct, sf.const)
    xs, ok, msg = _certify(sf_signed, rows, tab.basis)
    if not ok:
        return LPResult(Status.NUMERICAL_FAILURE, iterations=iters, message=msg, tableau=dump)
    x = sf.shift + sf.recover @ xs[: sf.n_struct]
    value = float(lp.c @ x)
    # final check against the caller's constraints
    viol = 0.0
    if lp.A_ub.size:
        viol = max(viol, float((lp.A_ub @ x - lp.b_ub).max()))
    if lp.A_eq.size:
        viol = max(viol, float(np.abs(lp.A_eq @ x - lp.b_eq).max()))
    viol = max(viol, float((lp.lb - x).max()), float((x - lp.ub).max()))
    if viol > FEAS_TOL:
        return LPResult(Status.NUMERICAL_FAILURE, iterations=iters, message=f"constraint violation {viol:.3g}",
                        tableau=dump)
    return LPResult(Status.OPTIMAL, value=value, x=x, iterations=iters, tableau=dump)


def solve_or_raise(lp: LinearProgram, **kwargs) -> LPResult:
    res = solve(lp, **kwargs)
    if not res.ok:
        raise LPError(res.status, res.message)
    return res
