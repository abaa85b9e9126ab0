"""Chart-local Riemannian geometry driven by jet arithmetic.

Everything at a point is assembled from expression-defined metric components
evaluated on jet seeds, so Christoffel symbols, curvature tensors, Hessians
and Laplacians come out with exact derivatives.

Index conventions, fixed once for the whole package:

* Christoffel symbols:  Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij).
* Fully covariant curvature:

      R_ijks = g_km (d_i Gamma^m_js - d_j Gamma^m_is
                     + Gamma^m_ip Gamma^p_js - Gamma^m_jp Gamma^p_is)

  With this sign the round unit sphere has Ric = (n-1) g (positive), the
  symmetries R_ijks = -R_jiks = -R_ijsk = R_ksij hold, and the curvature
  decomposition

      R_ijks = -R/((n-1)(n-2)) (g_ik g_js - g_is g_jk)
               + 1/(n-2) (R_ik g_js - R_is g_jk + g_ik R_js - g_is R_jk)
               + W_ijks

  defines the Weyl tensor.  The Bochner residual test pins this choice: the
  commutator rule it encodes is d_i d_j T - d_j d_i T acting through
  +R_ij.s contractions.
* Ricci contracts slots 1 and 3:  R_js = g^ik R_ijks;  scalar R = g^js R_js.
* Divergences contract the derivative slot first:  (div T)_k = g^ij grad_i T_jk.
* Squared norms contract every slot with the inverse metric, e.g.
  |grad P|^2 = g^ia g^jb g^kc grad_i P_jk grad_a P_bc.

All evaluation objects here are immutable after construction and safe to use
concurrently over point grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import NonPositiveDefiniteError
from .expr import Expr, ParamSet, chart_variables, evaluate, parse, to_source
from .jets import (
    DEFAULT_ORDER,
    Jet,
    finite_difference_oracle,
    partial_derivative,
    seed_variables,
)

_PD_TOLERANCE = 1e-12


@dataclass(frozen=True)
class IndexConvention:
    """Documentation-level record of the sign and contraction choices."""

    riemann: str = (
        "R_ijks = g_km (d_i Gamma^m_js - d_j Gamma^m_is"
        " + Gamma^m_ip Gamma^p_js - Gamma^m_jp Gamma^p_is)"
    )
    ricci: str = "R_js = g^ik R_ijks (round unit sphere: Ric = (n-1) g)"
    divergence: str = "(div P)_k = g^ij grad_i P_jk (first-slot contraction)"
    norms: str = "squared norms fully contracted with the inverse metric"


INDEX_CONVENTION = IndexConvention()


# -- expression-defined fields -------------------------------------------------


@dataclass(frozen=True)
class ScalarField:
    """A scalar chart function given by an expression plus parameter values."""

    dim: int
    expr: Expr
    params: ParamSet = field(default_factory=dict)

    @classmethod
    def parse(cls, source: str, dim: int, params: ParamSet | None = None) -> "ScalarField":
        params = dict(params or {})
        e = parse(source, variables=chart_variables(dim), params=tuple(params))
        return cls(dim, e, params)

    def jet(self, point: Sequence[float], order: int = DEFAULT_ORDER) -> Jet:
        seeds = seed_variables(point, self.dim, order)
        out = evaluate(self.expr, seeds, self.params)
        if isinstance(out, Jet):
            return out
        return Jet.constant(float(out), self.dim, order)

    def __call__(self, point: Sequence[float]) -> float:
        pt = [float(x) for x in point]
        if len(pt) != self.dim:
            raise ValueError(f"point has {len(pt)} coordinates, field has {self.dim}")
        return float(evaluate(self.expr, pt, self.params))

    def source(self) -> str:
        return to_source(self.expr)


class MetricField:
    """Symmetric matrix of expressions defining g_ij on a chart.

    Positive definiteness is enforced at every evaluation point via leading
    principal minors; a violation raises instead of silently propagating.
    """

    def __init__(self, dim: int, exprs: Sequence[Sequence[Expr]], params: ParamSet | None = None):
        self.dim = dim
        self.params = dict(params or {})
        rows = tuple(tuple(row) for row in exprs)
        if len(rows) != dim or any(len(r) != dim for r in rows):
            raise ValueError(f"metric expression array must be {dim}x{dim}")
        for i in range(dim):
            for j in range(i):
                if rows[i][j] != rows[j][i]:
                    raise ValueError(f"metric expressions not symmetric at ({i},{j})")
        self.exprs = rows

    @classmethod
    def parse(cls, rows: Sequence[Sequence[str]], params: ParamSet | None = None) -> "MetricField":
        dim = len(rows)
        params = dict(params or {})
        names = chart_variables(dim)
        parsed = [[parse(src, variables=names, params=tuple(params)) for src in row] for row in rows]
        return cls(dim, parsed, params)

    def component_jets(self, point: Sequence[float], order: int = DEFAULT_ORDER) -> np.ndarray:
        seeds = seed_variables(point, self.dim, order)
        g = np.empty((self.dim, self.dim), dtype=object)
        for i in range(self.dim):
            for j in range(i, self.dim):
                out = evaluate(self.exprs[i][j], seeds, self.params)
                if not isinstance(out, Jet):
                    out = Jet.constant(float(out), self.dim, order)
                g[i, j] = out
                g[j, i] = out
        self._check_positive_definite(jet_values(g), point)
        return g

    def component_values(self, point: Sequence[float]) -> np.ndarray:
        pt = [float(x) for x in point]
        vals = np.empty((self.dim, self.dim))
        for i in range(self.dim):
            for j in range(i, self.dim):
                v = float(evaluate(self.exprs[i][j], pt, self.params))
                vals[i, j] = vals[j, i] = v
        self._check_positive_definite(vals, point)
        return vals

    def _check_positive_definite(self, vals: np.ndarray, point) -> None:
        for k in range(1, self.dim + 1):
            minor = float(np.linalg.det(vals[:k, :k]))
            if minor <= _PD_TOLERANCE:
                raise NonPositiveDefiniteError(
                    f"metric is not positive definite at {tuple(float(x) for x in point)}: "
                    f"leading {k}x{k} minor = {minor!r}"
                )

    def sources(self) -> list[list[str]]:
        return [[to_source(e) for e in row] for row in self.exprs]


# -- jet-tensor helpers --------------------------------------------------------


def jet_values(T: np.ndarray) -> np.ndarray:
    """Value part of an object array of jets."""
    out = np.empty(T.shape)
    for idx in np.ndindex(T.shape):
        out[idx] = T[idx].value
    return out


def jet_d1(T: np.ndarray) -> np.ndarray:
    """First coordinate derivatives of a jet tensor; leading axis is d_a."""
    n = next(iter(T.flat)).nvars
    out = np.empty((n,) + T.shape)
    for idx in np.ndindex(T.shape):
        out[(slice(None),) + idx] = T[idx].first_derivatives()
    return out


def trunc_tensor(T: np.ndarray, order: int) -> np.ndarray:
    out = np.empty(T.shape, dtype=object)
    for idx in np.ndindex(T.shape):
        out[idx] = T[idx].truncate(order)
    return out


def invert_jet_matrix(g: np.ndarray) -> np.ndarray:
    """Inverse of a jet-valued matrix by Gauss-Jordan with value pivoting."""
    n = g.shape[0]
    a = [[g[i, j] for j in range(n)] for i in range(n)]
    nvars = a[0][0].nvars
    order = a[0][0].order
    inv = [
        [Jet.constant(1.0 if i == j else 0.0, nvars, order) for j in range(n)]
        for i in range(n)
    ]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(a[r][col].value))
        if abs(a[pivot][col].value) == 0.0:
            raise NonPositiveDefiniteError("metric matrix is singular")
        a[col], a[pivot] = a[pivot], a[col]
        inv[col], inv[pivot] = inv[pivot], inv[col]
        scale = a[col][col]._reciprocal()
        a[col] = [x * scale for x in a[col]]
        inv[col] = [x * scale for x in inv[col]]
        for r in range(n):
            if r == col:
                continue
            factor = a[r][col]
            if factor.is_constant() and factor.value == 0.0:
                continue
            a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
            inv[r] = [x - factor * y for x, y in zip(inv[r], inv[col])]
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i, j] = inv[i][j]
    return out


# -- per-point geometry bundle ---------------------------------------------------


class MetricJets:
    """Jet-valued metric data at one point, with cached derived tensors."""

    def __init__(self, metric: MetricField, point: Sequence[float], order: int = DEFAULT_ORDER):
        self.metric = metric
        self.point = tuple(float(x) for x in point)
        self.order = order
        self.dim = metric.dim
        self.g = metric.component_jets(self.point, order)

    @cached_property
    def ginv(self) -> np.ndarray:
        return invert_jet_matrix(self.g)

    @cached_property
    def gamma(self) -> np.ndarray:
        n = self.dim
        dg = np.empty((n, n, n), dtype=object)  # dg[l,i,j] = d_l g_ij
        for l in range(n):
            for i in range(n):
                for j in range(i, n):
                    d = partial_derivative(self.g[i, j], l)
                    dg[l, i, j] = d
                    dg[l, j, i] = d
        gamma = np.empty((n, n, n), dtype=object)  # gamma[k,i,j] = Gamma^k_ij
        for k in range(n):
            for i in range(n):
                for j in range(i, n):
                    acc = None
                    for l in range(n):
                        term = self.ginv[k, l] * (dg[i, j, l] + dg[j, i, l] - dg[l, i, j])
                        acc = term if acc is None else acc + term
                    val = acc * 0.5
                    gamma[k, i, j] = val
                    gamma[k, j, i] = val
        return gamma

    @cached_property
    def g_val(self) -> np.ndarray:
        return jet_values(self.g)

    @cached_property
    def ginv_val(self) -> np.ndarray:
        return jet_values(self.ginv)

    @cached_property
    def gamma_val(self) -> np.ndarray:
        return jet_values(self.gamma)

    @cached_property
    def dgamma_val(self) -> np.ndarray:
        return jet_d1(self.gamma)  # [a,k,i,j] = d_a Gamma^k_ij

    @cached_property
    def curvature(self) -> "CurvatureEval":
        n = self.dim
        G = self.gamma_val
        dG = self.dgamma_val
        quad = np.einsum("mip,pjs->mijs", G, G)
        rup = (
            dG.transpose(1, 0, 2, 3)  # [m,i,j,s] = d_i Gamma^m_js
            - dG.transpose(1, 2, 0, 3)
            + quad
            - quad.transpose(0, 2, 1, 3)
        )
        riem = np.einsum("km,mijs->ijks", self.g_val, rup)
        ricci = np.einsum("ik,ijks->js", self.ginv_val, riem)
        scal = float(np.einsum("js,js->", self.ginv_val, ricci))
        z = ricci - (scal / n) * self.g_val
        if n >= 3:
            gg = np.einsum("ik,js->ijks", self.g_val, self.g_val)
            rg = np.einsum("ik,js->ijks", ricci, self.g_val)
            gr = np.einsum("ik,js->ijks", self.g_val, ricci)
            weyl = (
                riem
                + scal / ((n - 1) * (n - 2)) * (gg - gg.transpose(0, 1, 3, 2))
                - (rg - rg.transpose(0, 1, 3, 2) + gr - gr.transpose(0, 1, 3, 2))
                / (n - 2)
            )
        else:
            weyl = np.zeros_like(riem)
        return CurvatureEval(
            point=self.point,
            g=self.g,
            ginv=self.ginv,
            gamma=self.gamma,
            riemann=riem,
            ricci=ricci,
            scalar=scal,
            traceless_ricci=z,
            weyl=weyl,
        )


@dataclass(frozen=True)
class CurvatureEval:
    """Full local geometry at a point.

    ``g``, ``ginv`` and ``gamma`` remain jet-valued (so downstream covariant
    derivatives stay exact); the curvature tensors are plain arrays.
    """

    point: tuple
    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    traceless_ricci: np.ndarray
    weyl: np.ndarray


# -- public operations -----------------------------------------------------------


def christoffel(metric: MetricField, point, order: int = DEFAULT_ORDER) -> np.ndarray:
    """Jet-valued Christoffel symbols Gamma^k_ij at ``point`` (index order k,i,j)."""
    return MetricJets(metric, point, order).gamma


def riemann(metric: MetricField, point, order: int = DEFAULT_ORDER) -> CurvatureEval:
    """All curvature tensors at ``point`` under the package conventions."""
    return MetricJets(metric, point, order).curvature


def hessian(f: ScalarField, metric: MetricField, point, order: int = DEFAULT_ORDER) -> np.ndarray:
    """Covariant Hessian grad^2_ij f as a symmetric jet-valued matrix."""
    mj = MetricJets(metric, point, order)
    return _hessian_jets(f.jet(point, order), mj)


def _hessian_jets(fjet: Jet, mj: MetricJets) -> np.ndarray:
    n = mj.dim
    df = [partial_derivative(fjet, a) for a in range(n)]
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(i, n):
            acc = partial_derivative(df[i], j)
            for k in range(n):
                acc = acc - mj.gamma[k, i, j] * df[k]
            out[i, j] = acc
            out[j, i] = acc
    return out


def laplacian(f: ScalarField, metric: MetricField, point, order: int = DEFAULT_ORDER) -> float:
    """Laplace-Beltrami value g^ij grad^2_ij f at ``point``."""
    mj = MetricJets(metric, point, order)
    hess = jet_values(_hessian_jets(f.jet(point, order), mj))
    return float(np.einsum("ij,ij->", mj.ginv_val, hess))


def covariant_derivative(T: np.ndarray, metric: MetricField, point, order: int = DEFAULT_ORDER) -> np.ndarray:
    """Covariant derivative of a covariant jet tensor of rank <= 2.

    ``T`` must hold the tensor's component jets at ``point`` (a scalar may be
    passed as a bare Jet).  The result gains a leading derivative slot:
    grad_i T_j... = d_i T_j... minus one Gamma correction per slot.
    """
    mj = MetricJets(metric, point, order)
    return _cov_derivative(T, mj.gamma)


def _cov_derivative(T, gamma: np.ndarray) -> np.ndarray:
    n = gamma.shape[0]
    if isinstance(T, Jet):
        out = np.empty((n,), dtype=object)
        for i in range(n):
            out[i] = partial_derivative(T, i)
        return out
    rank = T.ndim
    if rank == 0:
        return _cov_derivative(T.item(), gamma)
    if rank == 1:
        out = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                acc = partial_derivative(T[j], i)
                for l in range(n):
                    acc = acc - gamma[l, i, j] * T[l]
                out[i, j] = acc
        return out
    if rank == 2:
        out = np.empty((n, n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    acc = partial_derivative(T[j, k], i)
                    for l in range(n):
                        acc = acc - gamma[l, i, j] * T[l, k] - gamma[l, i, k] * T[j, l]
                    out[i, j, k] = acc
        return out
    raise ValueError("covariant_derivative supports rank <= 2")


def norm_sq(T, metric: MetricField, point) -> float:
    """Fully metric-contracted squared norm of a covariant tensor at ``point``.

    Accepts jet-valued or plain-float component arrays of rank 1..3 (rank 0
    returns the squared value).
    """
    vals = T if isinstance(T, np.ndarray) and T.dtype != object else None
    if vals is None:
        vals = jet_values(T) if isinstance(T, np.ndarray) else None
    if vals is None:
        return float(T.value) ** 2 if isinstance(T, Jet) else float(T) ** 2
    ginv = MetricJets(metric, point, order=1).ginv_val
    return _norm_sq_val(vals, ginv)


def _norm_sq_val(vals: np.ndarray, ginv: np.ndarray) -> float:
    rank = vals.ndim
    if rank == 0:
        return float(vals) ** 2
    if rank == 1:
        return float(np.einsum("ia,i,a->", ginv, vals, vals))
    if rank == 2:
        return float(np.einsum("ia,jb,ij,ab->", ginv, ginv, vals, vals))
    if rank == 3:
        return float(np.einsum("ia,jb,kc,ijk,abc->", ginv, ginv, ginv, vals, vals))
    raise ValueError("norm_sq supports rank <= 3")


def second_bianchi_residual(metric: MetricField, point, order: int = DEFAULT_ORDER) -> float:
    """Max-norm residual of the contracted second Bianchi identity.

    div Ric = (1/2) dR holds for every Levi-Civita connection; a nonzero
    residual beyond rounding indicates a convention or implementation bug.
    Normalized by max(1, |dR|).
    """
    mj = MetricJets(metric, point, order)
    n = mj.dim
    # Ricci jets by direct contraction of the curvature operator.
    dgamma = np.empty((n, n, n, n), dtype=object)  # [a,k,i,j] = d_a Gamma^k_ij
    for k in range(n):
        for i in range(n):
            for j in range(i, n):
                for a in range(n):
                    d = partial_derivative(mj.gamma[k, i, j], a)
                    dgamma[a, k, i, j] = d
                    dgamma[a, k, j, i] = d
    gtr = trunc_tensor(mj.gamma, order - 2)
    ric = np.empty((n, n), dtype=object)
    for j in range(n):
        for s in range(n):
            acc = None
            for i in range(n):
                term = dgamma[i, i, j, s] - dgamma[j, i, i, s]
                for p in range(n):
                    term = term + gtr[i, i, p] * gtr[p, j, s] - gtr[i, j, p] * gtr[p, i, s]
                acc = term if acc is None else acc + term
            ric[j, s] = acc
    ginv_tr = trunc_tensor(mj.ginv, order - 2)
    scal = None
    for j in range(n):
        for s in range(n):
            term = ginv_tr[j, s] * ric[j, s]
            scal = term if scal is None else scal + term
    dscal = scal.first_derivatives()
    ric_val = jet_values(ric)
    dric = jet_d1(ric)  # [a,j,s]
    gamma_val = mj.gamma_val
    ginv_val = mj.ginv_val
    divric = np.zeros(n)
    for k in range(n):
        total = 0.0
        for i in range(n):
            for j in range(n):
                term = dric[i, j, k]
                for l in range(n):
                    term -= gamma_val[l, i, j] * ric_val[l, k]
                    term -= gamma_val[l, i, k] * ric_val[j, l]
                total += ginv_val[i, j] * term
        divric[k] = total
    scale = max(1.0, float(np.max(np.abs(dscal))))
    return float(np.max(np.abs(divric - 0.5 * dscal))) / scale


# -- finite-difference oracles ----------------------------------------------------
#
# The same algebraic assembly as the jet path, but every metric derivative is
# a central difference of plain component evaluations.  These are the
# independent cross-checks for the differentiation engine.


def christoffel_fd(metric: MetricField, point, step: float = 1e-4) -> np.ndarray:
    n = metric.dim
    g = metric.component_values(point)
    ginv = np.linalg.inv(g)
    dg = _dg_fd(metric, point, step)
    out = np.empty((n, n, n))
    for k in range(n):
        for i in range(n):
            for j in range(n):
                out[k, i, j] = 0.5 * sum(
                    ginv[k, l] * (dg[i, j, l] + dg[j, i, l] - dg[l, i, j])
                    for l in range(n)
                )
    return out


def riemann_fd(metric: MetricField, point, step: float = 1e-4) -> np.ndarray:
    """Fully covariant curvature from finite differences of the metric alone."""
    n = metric.dim
    g = metric.component_values(point)
    ginv = np.linalg.inv(g)
    dg = _dg_fd(metric, point, step)  # [a,i,j]
    d2g = _d2g_fd(metric, point, step)  # [a,b,i,j]
    dginv = -np.einsum("km,aml,ls->aks", ginv, dg, ginv)  # d_a g^ks
    dgamma = np.empty((n, n, n, n))  # [a,k,i,j] = d_a Gamma^k_ij
    for a in range(n):
        for k in range(n):
            for i in range(n):
                for j in range(n):
                    total = 0.0
                    for l in range(n):
                        first = dginv[a, k, l] * (dg[i, j, l] + dg[j, i, l] - dg[l, i, j])
                        second = ginv[k, l] * (
                            d2g[a, i, j, l] + d2g[a, j, i, l] - d2g[a, l, i, j]
                        )
                        total += first + second
                    dgamma[a, k, i, j] = 0.5 * total
    gamma = christoffel_fd(metric, point, step)
    quad = np.einsum("mip,pjs->mijs", gamma, gamma)
    rup = (
        dgamma.transpose(1, 0, 2, 3)
        - dgamma.transpose(1, 2, 0, 3)
        + quad
        - quad.transpose(0, 2, 1, 3)
    )
    return np.einsum("km,mijs->ijks", g, rup)


def _component_field(metric: MetricField, i: int, j: int):
    expr = metric.exprs[i][j]
    params = metric.params

    def f(q):
        return float(evaluate(expr, [float(x) for x in q], params))

    return f


def _dg_fd(metric: MetricField, point, step: float) -> np.ndarray:
    n = metric.dim
    dg = np.empty((n, n, n))  # [a,i,j] = d_a g_ij
    for i in range(n):
        for j in range(i, n):
            f = _component_field(metric, i, j)
            for a in range(n):
                alpha = [0] * n
                alpha[a] = 1
                v = finite_difference_oracle(f, point, alpha, step)
                dg[a, i, j] = v
                dg[a, j, i] = v
    return dg


def _d2g_fd(metric: MetricField, point, step: float) -> np.ndarray:
    n = metric.dim
    d2g = np.empty((n, n, n, n))  # [a,b,i,j] = d_a d_b g_ij
    for i in range(n):
        for j in range(i, n):
            f = _component_field(metric, i, j)
            for a in range(n):
                for b in range(a, n):
                    alpha = [0] * n
                    alpha[a] += 1
                    alpha[b] += 1
                    v = finite_difference_oracle(f, point, alpha, step)
                    d2g[a, b, i, j] = d2g[b, a, i, j] = v
                    d2g[a, b, j, i] = d2g[b, a, j, i] = v
    return d2g
