"""The skew-symmetric 2-tensor P, its derivatives, divergence and frames.

Given a scalar potential f, a metric g and a univariate profile lambda, set
h = grad^2 f(grad f, .) (which equals half of d|grad f|^2) and

    P_jk = lambda(f) (d_j f  h_k - d_k f  h_j),

the tensor counterpart of the 2-form lambda(f) df ^ d|grad f|^2 up to the
constant absorbed into lambda.  This module computes
P, its covariant derivative, the divergence (div P)_k = g^ij grad_i P_jk, the
fully contracted norms, and the two derived margins

    violation    = |grad P|^2 - 2 |div P|^2
    sharp_margin = |grad P|^2 - 2/(n-1) |div P|^2

The factor-2 inequality fails on suitable warped products while the
2/(n-1) bound holds pointwise; both are reported for every analyzed point.

It also constructs the orthonormal frame adapted to P (E_1 along grad f, E_2
along A grad f where A raises one P slot), expresses div P in that frame both
through the full connection-coefficient formula and through the bracket-free
shortcut that drops the [E_i, E_j] terms, and reports their discrepancy.

Dictionary to the differential-form picture (norm conventions differ on
forms vs tensors): the associated 2-form has squared gradient norm
|grad P|^2 / 2 and codifferential -div P, so the factor-2 statement for P
and the factor-1 statement for the form are the same inequality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DegeneratePError, FrameConsistencyError
from .expr import Expr, ParamSet, evaluate
from .geometry import (
    MetricField,
    MetricJets,
    ScalarField,
    jet_d1,
    jet_values,
    trunc_tensor,
)
from .jets import DEFAULT_ORDER, Jet, extract_derivative, partial_derivative

DEGENERATE_P_TOLERANCE = 1e-10
FRAME_MATCH_TOLERANCE = 1e-10

#: Conversion constants between the tensor P and the corresponding 2-form.
FORM_DICTIONARY = {
    "form_gradient_norm_sq": "0.5 * |grad P|^2",
    "codifferential": "-div P",
}


@dataclass(frozen=True)
class PTensorSpec:
    """Ingredients of P: profile lambda (univariate, applied to f), f, and g."""

    lam: Expr
    f: ScalarField
    metric: MetricField
    lam_params: ParamSet = field(default_factory=dict)

    def __post_init__(self):
        if self.f.dim != self.metric.dim:
            raise ValueError(
                f"f is defined on a {self.f.dim}-chart, metric on {self.metric.dim}"
            )

    @property
    def dim(self) -> int:
        return self.metric.dim


@dataclass(frozen=True)
class PTensorEval:
    """Value-level analysis of P at one point."""

    point: tuple
    P: np.ndarray
    nabla_P: np.ndarray
    div_P: np.ndarray
    p_norm_sq: float
    nabla_p_norm_sq: float
    div_p_norm_sq: float
    violation: float
    sharp_margin: float


class PointAnalysis:
    """Lazy, cached jet pipeline for one spec at one point.

    Every derived quantity is the exact Taylor data of the corresponding
    field, so repeated covariant differentiation stays truncation-error free.
    Instances are read-only after construction and safe to share.
    """

    def __init__(self, spec: PTensorSpec, point: Sequence[float], order: int = DEFAULT_ORDER):
        self.spec = spec
        self.point = tuple(float(x) for x in point)
        self.order = order
        self.mj = MetricJets(spec.metric, self.point, order)

    @property
    def dim(self) -> int:
        return self.mj.dim

    @cached_property
    def fjet(self) -> Jet:
        return self.spec.f.jet(self.point, self.order)

    @cached_property
    def df(self) -> list[Jet]:
        return [partial_derivative(self.fjet, a) for a in range(self.dim)]

    @cached_property
    def w(self) -> Jet:
        """|grad f|^2 as a jet."""
        acc = None
        for a in range(self.dim):
            for b in range(self.dim):
                term = self.mj.ginv[a, b] * self.df[a] * self.df[b]
                acc = term if acc is None else acc + term
        return acc

    @cached_property
    def lam_f(self) -> Jet:
        out = evaluate(self.spec.lam, [self.fjet], self.spec.lam_params)
        if not isinstance(out, Jet):
            out = Jet.constant(float(out), self.dim, self.order)
        return out

    @cached_property
    def P(self) -> np.ndarray:
        n = self.dim
        # h_k = grad^2 f(grad f, .)_k = (1/2) d_k |grad f|^2.  The Hessian
        # pairing fixes the normalization: d|grad f|^2 itself is twice this,
        # and the factor would otherwise just be absorbed into lambda.
        h = [partial_derivative(self.w, k) * 0.5 for k in range(n)]
        out = np.empty((n, n), dtype=object)
        zero = None
        for j in range(n):
            for k in range(j, n):
                if j == k:
                    if zero is None:
                        zero = Jet.constant(0.0, n, max(self.order - 2, 0))
                    out[j, k] = zero
                    continue
                pjk = self.lam_f * (self.df[j] * h[k] - self.df[k] * h[j])
                out[j, k] = pjk
                out[k, j] = -pjk
        return out

    @cached_property
    def nabla_P(self) -> np.ndarray:
        n = self.dim
        target = max(self.order - 3, 0)
        gm = trunc_tensor(self.mj.gamma, target)
        pt = trunc_tensor(self.P, target)
        out = np.empty((n, n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                for k in range(j, n):
                    if j == k:
                        out[i, j, k] = Jet.constant(0.0, n, target)
                        continue
                    acc = partial_derivative(self.P[j, k], i)
                    for l in range(n):
                        acc = acc - gm[l, i, j] * pt[l, k] - gm[l, i, k] * pt[j, l]
                    out[i, j, k] = acc
                    out[i, k, j] = -acc
        return out

    @cached_property
    def div_P(self) -> np.ndarray:
        n = self.dim
        target = max(self.order - 3, 0)
        ginv = trunc_tensor(self.mj.ginv, target)
        out = np.empty((n,), dtype=object)
        for k in range(n):
            acc = None
            for i in range(n):
                for j in range(n):
                    term = ginv[i, j] * self.nabla_P[i, j, k]
                    acc = term if acc is None else acc + term
            out[k] = acc
        return out

    # -- value-level pieces ------------------------------------------------

    @cached_property
    def P_val(self) -> np.ndarray:
        return jet_values(self.P)

    @cached_property
    def nabla_P_val(self) -> np.ndarray:
        return jet_values(self.nabla_P)

    @cached_property
    def div_P_val(self) -> np.ndarray:
        return jet_values(self.div_P)

    @cached_property
    def P_up(self) -> np.ndarray:
        """P with both slots raised, P^ab = g^aj g^bk P_jk (values)."""
        gi = self.mj.ginv_val
        return np.einsum("aj,bk,jk->ab", gi, gi, self.P_val)

    @cached_property
    def p_norm_sq(self) -> float:
        return float(np.einsum("ab,ab->", self.P_up, self.P_val))

    @cached_property
    def nabla_p_norm_sq(self) -> float:
        gi = self.mj.ginv_val
        return float(
            np.einsum(
                "ia,jb,kc,ijk,abc->", gi, gi, gi, self.nabla_P_val, self.nabla_P_val
            )
        )

    @cached_property
    def div_p_norm_sq(self) -> float:
        gi = self.mj.ginv_val
        return float(np.einsum("ka,k,a->", gi, self.div_P_val, self.div_P_val))

    @cached_property
    def p_norm_sq_jet(self) -> Jet:
        """|P|^2 as a jet (order-2 data; enough for its Laplacian)."""
        n = self.dim
        target = max(self.order - 2, 0)
        ginv = trunc_tensor(self.mj.ginv, target)
        P = self.P
        # N_jk = (g^-1 P g^-1)_jk so that |P|^2 = sum P_jk N_jk.
        acc = None
        for j in range(n):
            for k in range(n):
                if j == k:
                    continue
                njk = None
                for a in range(n):
                    for b in range(n):
                        if a == b:
                            continue
                        term = ginv[j, a] * P[a, b] * ginv[b, k]
                        njk = term if njk is None else njk + term
                term = P[j, k] * njk
                acc = term if acc is None else acc + term
        if acc is None:
            acc = Jet.constant(0.0, n, target)
        return acc

    @cached_property
    def laplacian_p_norm_sq(self) -> float:
        s = self.p_norm_sq_jet
        n = self.dim
        ds = s.first_derivatives()
        gi = self.mj.ginv_val
        gam = self.mj.gamma_val
        total = 0.0
        for i in range(n):
            for j in range(n):
                alpha = [0] * n
                alpha[i] += 1
                alpha[j] += 1
                hess = extract_derivative(s, alpha)
                hess -= float(np.dot(gam[:, i, j], ds))
                total += gi[i, j] * hess
        return total

    @cached_property
    def grad_p_norm_sq_val(self) -> np.ndarray:
        return self.p_norm_sq_jet.first_derivatives()

    @cached_property
    def nabla_div_P_val(self) -> np.ndarray:
        """grad_j (div P)_k values."""
        n = self.dim
        ddiv = jet_d1(self.div_P)  # [j,k]
        gam = self.mj.gamma_val
        out = np.empty((n, n))
        for j in range(n):
            for k in range(n):
                out[j, k] = ddiv[j, k] - float(np.dot(gam[:, j, k], self.div_P_val))
        return out

    @cached_property
    def grad_f_val(self) -> np.ndarray:
        dfv = np.array([d.value for d in self.df])
        return self.mj.ginv_val @ dfv

    @cached_property
    def violation(self) -> float:
        return self.nabla_p_norm_sq - 2.0 * self.div_p_norm_sq

    @cached_property
    def sharp_margin(self) -> float:
        return self.nabla_p_norm_sq - (2.0 / (self.dim - 1)) * self.div_p_norm_sq

    def result(self) -> PTensorEval:
        return PTensorEval(
            point=self.point,
            P=self.P_val,
            nabla_P=self.nabla_P_val,
            div_P=self.div_P_val,
            p_norm_sq=self.p_norm_sq,
            nabla_p_norm_sq=self.nabla_p_norm_sq,
            div_p_norm_sq=self.div_p_norm_sq,
            violation=self.violation,
            sharp_margin=self.sharp_margin,
        )


# -- module operations ---------------------------------------------------------


def build_P(spec: PTensorSpec, point, order: int = DEFAULT_ORDER) -> np.ndarray:
    """Jet-valued components of P at ``point`` (skew by construction)."""
    return PointAnalysis(spec, point, order).P


def nabla_P(spec: PTensorSpec, point, order: int = DEFAULT_ORDER) -> np.ndarray:
    return PointAnalysis(spec, point, order).nabla_P


def div_P(spec: PTensorSpec, point, order: int = DEFAULT_ORDER) -> np.ndarray:
    return PointAnalysis(spec, point, order).div_P


def analyze(spec: PTensorSpec, point, order: int = DEFAULT_ORDER) -> PTensorEval:
    """Value-level P report at ``point``: components, norms, both margins."""
    return PointAnalysis(spec, point, order).result()


def cyclic_residual(spec: PTensorSpec, point, order: int = DEFAULT_ORDER) -> float:
    """Max over index triples of |grad_i P_jk + grad_j P_ki + grad_k P_ij|.

    Vanishes identically for every P of this module's form, whatever the
    metric: the underlying 2-form is closed because the profile depends on f
    alone.
    """
    an = PointAnalysis(spec, point, order)
    T = an.nabla_P_val
    cyc = T + T.transpose(1, 2, 0) + T.transpose(2, 0, 1)
    return float(np.max(np.abs(cyc)))


# -- adapted orthonormal frame ---------------------------------------------------


@dataclass(frozen=True)
class FrameEval:
    """Adapted orthonormal frame and the two frame divergence formulas.

    ``vectors[i]`` holds the chart components of E_i (rows).  ``div_true``
    uses the connection-coefficient formula; ``div_false`` is the
    bracket-free shortcut -E_2(u) theta^1 + E_1(u) theta^2.  Frame covector
    components convert to chart components through :meth:`covector_to_chart`.
    """

    point: tuple
    vectors: np.ndarray
    vector_jets: np.ndarray
    u: float
    u_jet: Jet
    frame_derivatives_of_u: np.ndarray
    connection: np.ndarray  # connection[i,j,k] = <nabla_{E_i} E_j, E_k>
    brackets: np.ndarray  # brackets[i,j] = chart components of [E_i, E_j]
    bracket_frame: np.ndarray  # bracket_frame[i,j,k] = <E_k, [E_i, E_j]>
    gram_residual: float
    p_frame: np.ndarray
    div_true: np.ndarray
    div_false: np.ndarray
    discrepancy: np.ndarray
    div_coord: np.ndarray
    div_coord_in_frame: np.ndarray
    metric_values: np.ndarray

    def covector_to_chart(self, frame_components: np.ndarray) -> np.ndarray:
        """theta^i components -> dx^k components (theta^i_k = g_kl E_i^l)."""
        theta = np.einsum("kl,il->ik", self.metric_values, self.vectors)
        return np.einsum("i,ik->k", np.asarray(frame_components), theta)


def build_frame(spec: PTensorSpec, point, order: int = DEFAULT_ORDER) -> FrameEval:
    """Construct the adapted orthonormal frame at a point with |P| != 0.

    E_1 = grad f / |grad f| and E_2 = A E_1 / |A E_1| with A^j_i = g^jm P_im;
    the remaining vectors come from Gram-Schmidt over the coordinate basis,
    always absorbing the candidate with the largest residual norm (ties broken
    by lowest coordinate index), which makes the completion deterministic.
    """
    an = PointAnalysis(spec, point, order)
    n = an.dim
    p_norm = float(np.sqrt(max(an.p_norm_sq, 0.0)))
    if p_norm < DEGENERATE_P_TOLERANCE:
        raise DegeneratePError(
            f"|P| = {p_norm!r} < {DEGENERATE_P_TOLERANCE} at {an.point}; "
            "the adapted frame requires a nonvanishing P"
        )

    g = an.mj.g
    ginv = an.mj.ginv

    def dot(u_vec, v_vec):
        acc = None
        for a in range(n):
            for b in range(n):
                term = g[a, b] * u_vec[a] * v_vec[b]
                acc = term if acc is None else acc + term
        return acc

    # E_1 along grad f.
    grad_f = [None] * n
    for a in range(n):
        acc = None
        for b in range(n):
            term = ginv[a, b] * an.df[b]
            acc = term if acc is None else acc + term
        grad_f[a] = acc
    inv_len = 1.0 / an.w.sqrt()
    E = [[c * inv_len for c in grad_f]]

    # E_2 along A E_1.
    ae1 = [None] * n
    for j in range(n):
        acc = None
        for i in range(n):
            for m in range(n):
                term = ginv[j, m] * an.P[i, m] * E[0][i]
                acc = term if acc is None else acc + term
        ae1[j] = acc
    ae1_len = dot(ae1, ae1).sqrt()
    inv_ae1 = 1.0 / ae1_len
    E.append([c * inv_ae1 for c in ae1])

    # Deterministic Gram-Schmidt completion over coordinate vectors.
    basis = []
    for c in range(n):
        vec = [Jet.constant(1.0 if a == c else 0.0, n, order) for a in range(n)]
        basis.append(vec)
    while len(E) < n:
        residuals = []
        for c in range(n):
            r = list(basis[c])
            for built in E:
                coef = dot(basis[c], built)
                r = [ra - coef * ba for ra, ba in zip(r, built)]
            residuals.append((r, dot(r, r).value))
        best = max(range(n), key=lambda c: (residuals[c][1], -c))
        r, norm2 = residuals[best]
        if norm2 <= 0.0:
            raise FrameConsistencyError("Gram-Schmidt completion degenerated")
        inv = 1.0 / dot(r, r).sqrt()
        E.append([c * inv for c in r])

    vector_jets = np.empty((n, n), dtype=object)
    for i in range(n):
        for a in range(n):
            vector_jets[i, a] = E[i][a]
    vectors = jet_values(vector_jets)
    dE = jet_d1(vector_jets)  # [a, i, c] = d_a E_i^c

    g_val = an.mj.g_val
    gram = np.einsum("ab,ia,jb->ij", g_val, vectors, vectors)
    gram_residual = float(np.max(np.abs(gram - np.eye(n))))

    u_jet = _p_pairing(an.P, E[0], E[1], n)
    u = u_jet.value
    du = u_jet.first_derivatives()
    eu = vectors @ du

    gamma_val = an.mj.gamma_val
    # nabla_{E_i} E_j chart components, then frame projections.
    nab = np.einsum("ia,ajc->ijc", vectors, dE) + np.einsum(
        "ia,cab,jb->ijc", vectors, gamma_val, vectors
    )
    connection = np.einsum("ijc,cd,kd->ijk", nab, g_val, vectors)

    brackets = np.einsum("ia,ajc->ijc", vectors, dE) - np.einsum(
        "ja,aic->ijc", vectors, dE
    )
    bracket_frame = np.einsum("ijc,cd,kd->ijk", brackets, g_val, vectors)

    p_frame = np.einsum("ab,ia,jb->ij", an.P_val, vectors, vectors)

    div_true = np.zeros(n)
    div_true[0] = -eu[1] + u * sum(connection[i, i, 1] for i in range(2, n))
    div_true[1] = eu[0] - u * sum(connection[i, i, 0] for i in range(2, n))
    for k in range(2, n):
        div_true[k] = u * (-connection[0, k, 1] + connection[1, k, 0])

    div_false = np.zeros(n)
    div_false[0] = -eu[1]
    div_false[1] = eu[0]

    div_coord = an.div_P_val
    div_coord_in_frame = vectors @ div_coord

    return FrameEval(
        point=an.point,
        vectors=vectors,
        vector_jets=vector_jets,
        u=u,
        u_jet=u_jet,
        frame_derivatives_of_u=eu,
        connection=connection,
        brackets=brackets,
        bracket_frame=bracket_frame,
        gram_residual=gram_residual,
        p_frame=p_frame,
        div_true=div_true,
        div_false=div_false,
        discrepancy=div_true - div_false,
        div_coord=div_coord,
        div_coord_in_frame=div_coord_in_frame,
        metric_values=g_val,
    )


def _p_pairing(P: np.ndarray, x: list, y: list, n: int) -> Jet:
    """P(X, Y) for jet vectors X, Y."""
    acc = None
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            term = P[a, b] * x[a] * y[b]
            acc = term if acc is None else acc + term
    return acc


def div_true_vs_false(frame: FrameEval) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Both frame divergence formulas and their gap.

    Verifies that the connection-coefficient formula reproduces the
    coordinate-level div P expressed in the frame; a mismatch beyond
    tolerance means the frame data is inconsistent and raises.
    """
    scale = max(1.0, float(np.max(np.abs(frame.div_coord_in_frame))))
    err = float(np.max(np.abs(frame.div_true - frame.div_coord_in_frame)))
    if err > FRAME_MATCH_TOLERANCE * scale:
        raise FrameConsistencyError(
            f"frame divergence deviates from coordinate divergence by {err!r}"
        )
    return frame.div_true, frame.div_false, frame.discrepancy
