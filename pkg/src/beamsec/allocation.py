"""Time allocation across beam pairs: uniform, LP max-min, and a grid oracle."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np


class SolverError(RuntimeError):
    def __init__(self, message: str, residuals: Optional[dict] = None):
        super().__init__(message if not residuals else f"{message} (residuals: {residuals})")
        self.residuals = residuals or {}


class UnboundedError(SolverError):
    pass


@dataclass(frozen=True, eq=False)
class TimeAllocation:
    fractions: np.ndarray
    objective: float = 0.0

    def __post_init__(self):
        f = np.asarray(self.fractions, dtype=float)
        object.__setattr__(self, "fractions", f)
        if f.ndim != 1 or len(f) == 0:
            raise ValueError("allocation needs at least one fraction")
        if np.any(f < 0) or np.any(f > 1):
            raise ValueError(f"fractions must lie in [0, 1]: {f}")
        if abs(f.sum() - 1.0) > 1e-9:
            raise ValueError(f"fractions must sum to 1, got {f.sum()!r}")

    def __len__(self):
        return len(self.fractions)

    def value(self, csl) -> float:
        """Max-min objective min_rows (csl @ T) for this allocation."""
        return float(np.min(np.asarray(csl, dtype=float) @ self.fractions))


@dataclass
class LPResult:
    x: np.ndarray
    objective: float
    reduced_costs: np.ndarray  # phase-2 reduced costs over structural + slack columns
    basis: list
    iterations: int


def uniform(n_paths: int) -> TimeAllocation:
    if n_paths < 1:
        raise ValueError("need at least one beam pair")
    return TimeAllocation(np.full(n_paths, 1.0 / n_paths))


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]


def _iterate(T, basis, allowed, tol, max_iter, it):
    """Bland's rule pivoting on a maximization tableau (last row = reduced costs)."""
    while True:
        obj = T[-1, :-1]
        entering = next((j for j in allowed if obj[j] < -tol), None)
        if entering is None:
            return it
        if it >= max_iter:
            raise SolverError(f"simplex exceeded {max_iter} iterations")
        col = T[:-1, entering]
        rows = np.nonzero(col > tol)[0]
        if len(rows) == 0:
            raise UnboundedError("objective is unbounded")
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        leave = min(ties, key=lambda r: basis[r])
        _pivot(T, leave, entering)
        basis[leave] = entering
        it += 1


def simplex(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, tol: float = 1e-11,
            max_iter: int = 10_000) -> LPResult:
    """Maximize c @ x s.t. A_ub x <= b_ub, A_eq x == b_eq, x >= 0.

    Dense two-phase tableau method with Bland's rule for entering and leaving
    variables, so pivoting is deterministic and cannot cycle.
    """
    c = np.asarray(c, dtype=float)
    n = len(c)
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = len(A_ub), len(A_eq)
    m = m_ub + m_eq

    # columns: structural | slacks (one per ub row) | artificials
    flip_ub = b_ub < 0
    needs_art = np.concatenate([flip_ub, np.ones(m_eq, dtype=bool)])
    n_art = int(needs_art.sum())
    n_cols = n + m_ub + n_art
    T = np.zeros((m + 1, n_cols + 1))
    basis = [-1] * m
    art = n + m_ub
    for i in range(m_ub):
        sign = -1.0 if flip_ub[i] else 1.0
        T[i, :n] = sign * A_ub[i]
        T[i, n + i] = sign
        T[i, -1] = sign * b_ub[i]
    for k in range(m_eq):
        i = m_ub + k
        sign = -1.0 if b_eq[k] < 0 else 1.0
        T[i, :n] = sign * A_eq[k]
        T[i, -1] = sign * b_eq[k]
    for i in range(m):
        if needs_art[i]:
            T[i, art] = 1.0
            basis[i] = art
            art += 1
        else:
            basis[i] = n + i

    it = 0
    if n_art:
        # phase 1: maximize -sum(artificials)
        T[-1, n + m_ub:n_cols] = 1.0
        for i in range(m):
            if basis[i] >= n + m_ub:
                T[-1] -= T[i]
        it = _iterate(T, basis, range(n_cols), tol, max_iter, it)
        infeasibility = -T[-1, -1]
        if infeasibility > 1e-9:
            raise SolverError("problem is infeasible", {"phase1": float(infeasibility)})
        for i in range(m - 1, -1, -1):
            if basis[i] < n + m_ub:
                continue
            j = next((j for j in range(n + m_ub) if abs(T[i, j]) > tol), None)
            if j is None:
                T = np.delete(T, i, axis=0)
                del basis[i]
            else:
                _pivot(T, i, j)
                basis[i] = j
        T = np.delete(T, np.s_[n + m_ub:n_cols], axis=1)
        n_cols = n + m_ub

    T[-1, :] = 0.0
    T[-1, :n] = -c
    for i, b in enumerate(basis):
        if b < n and c[b] != 0.0:
            T[-1] += c[b] * T[i]
    it = _iterate(T, basis, range(n_cols), tol, max_iter, it)

    x_full = np.zeros(n_cols)
    for i, b in enumerate(basis):
        x_full[b] = T[i, -1]
    x = x_full[:n]
    return LPResult(x=x, objective=float(c @ x), reduced_costs=T[-1, :-1].copy(),
                    basis=list(basis), iterations=it)


def max_min_lp(csl) -> LPResult:
    """Epigraph LP: maximize t s.t. csl @ T >= t per row, 0 <= T <= 1, sum(T) = 1.

    Variables are (T_1..T_L, t); t >= 0 is implied since csl >= 0. The program has
    rows + L + 1 constraints.
    """
    C = np.asarray(csl, dtype=float)
    rows, L = C.shape
    c = np.zeros(L + 1)
    c[-1] = 1.0
    A_ub = np.zeros((rows + L, L + 1))
    A_ub[:rows, :L] = -C
    A_ub[:rows, L] = 1.0
    A_ub[rows:, :L] = np.eye(L)
    b_ub = np.concatenate([np.zeros(rows), np.ones(L)])
    A_eq = np.concatenate([np.ones(L), [0.0]])[None, :]
    return simplex(c, A_ub, b_ub, A_eq, [1.0])


def residuals(csl, alloc: TimeAllocation) -> dict:
    C = np.asarray(csl, dtype=float)
    T = alloc.fractions
    return {
        "sum": float(abs(T.sum() - 1.0)),
        "nonneg": float(max(0.0, -T.min())),
        "upper": float(max(0.0, T.max() - 1.0)),
        "epigraph": float(max(0.0, np.max(alloc.objective - C @ T))),
    }


def _mean_at_floor(C: np.ndarray, floor: float) -> Optional[np.ndarray]:
    """Maximize the mean row value subject to every row staying >= floor."""
    rows, L = C.shape
    A_ub = np.concatenate([-C, np.eye(L)])
    b_ub = np.concatenate([np.full(rows, -floor), np.ones(L)])
    try:
        res = simplex(C.mean(axis=0), A_ub, b_ub, np.ones((1, L)), [1.0])
    except SolverError:
        return None
    return res.x


def optimize(csl, tol: float = 1e-9, tie_break: bool = True) -> TimeAllocation:
    """Max-min secrecy time allocation via the epigraph LP.

    With `tie_break`, a second LP picks, among allocations within 1e-12 (relative)
    of the max-min value, one that maximizes the mean row value. The result is
    never worse than uniform allocation on the max-min objective.
    """
    C = np.asarray(csl, dtype=float)
    if C.ndim != 2 or C.shape[0] < 1 or C.shape[1] < 1:
        raise ValueError(f"csl must be a non-empty matrix, got shape {C.shape}")
    if not np.all(np.isfinite(C)) or np.any(C < 0):
        raise ValueError("csl entries must be finite and >= 0")
    L = C.shape[1]
    if not np.any(C):
        return TimeAllocation(np.full(L, 1.0 / L), 0.0)
    res = max_min_lp(C)
    raw = res.x[:L]
    fr = np.clip(raw, 0.0, 1.0)
    r = residuals(C, TimeAllocation(fr, float(res.x[L])))
    r["clip"] = float(np.max(np.abs(fr - raw)))
    if max(r.values()) > tol:
        raise SolverError("simplex solution violates constraints", r)

    def value(T):
        return float(np.min(C @ T))

    flat = np.full(L, 1.0 / L)
    best = fr if value(fr) >= value(flat) else flat
    if tie_break:
        floor = value(best) - 1e-12 * max(1.0, float(C.max()))
        alt = _mean_at_floor(C, floor)
        if alt is not None:
            alt = np.clip(alt, 0.0, 1.0)
            ok = abs(alt.sum() - 1.0) <= tol and value(alt) >= floor
            if ok and value(alt) >= value(flat) and C.mean(axis=0) @ alt > C.mean(axis=0) @ best:
                best = alt
    return TimeAllocation(best, value(best))


def _compositions(total: int, parts: int) -> np.ndarray:
    """All nonnegative integer vectors of length `parts` summing to `total`, lexicographic."""
    if parts == 1:
        return np.array([[total]])
    bars = np.array(list(itertools.combinations(range(total + parts - 1), parts - 1)))
    edges = np.concatenate([np.full((len(bars), 1), -1), bars,
                            np.full((len(bars), 1), total + parts - 1)], axis=1)
    return np.diff(edges, axis=1) - 1


def brute_force(csl, grid_step: float = 0.01, max_paths: int = 4) -> TimeAllocation:
    """Exhaustive max-min search over the simplex grid with spacing `grid_step`."""
    C = np.asarray(csl, dtype=float)
    L = C.shape[1]
    if L > max_paths:
        raise ValueError(f"grid enumeration limited to {max_paths} paths, got {L}")
    total = int(round(1.0 / grid_step))
    if total < 1 or abs(total * grid_step - 1.0) > 1e-9:
        raise ValueError(f"grid_step {grid_step} must divide 1")
    grid = _compositions(total, L) / total
    values = np.min(grid @ C.T, axis=1)
    best = int(np.argmax(values))
    return TimeAllocation(grid[best], float(values[best]))
