"""Pointwise physics: residual functions f0, f1 and their Jacobian blocks.

All callables are evaluated on batches.  With ``c`` components in ``dim``
dimensions and an arbitrary batch shape ``...``:

=========  ======================
f0         ``(..., c)``
f1         ``(..., c, dim)``
f00        ``(..., c, c)``             d f0_k / d u_l
f01        ``(..., c, c, dim)``        d f0_k / d (grad u)_{l f}
f10        ``(..., c, dim, c)``        d f1_{k e} / d u_l
f11        ``(..., c, dim, c, dim)``   d f1_{k e} / d (grad u)_{l f}
=========  ======================

A block left as ``None`` is identically zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Forcing = Callable[[np.ndarray], np.ndarray]
BLOCKS = ("f00", "f01", "f10", "f11")


@dataclass(frozen=True, eq=False)
class PointValues:
    x: np.ndarray  # (..., dim)
    u: np.ndarray  # (..., c)
    grad_u: np.ndarray  # (..., c, dim)
    a: Optional[np.ndarray] = None  # (..., na)
    grad_a: Optional[np.ndarray] = None  # (..., na, dim)

    @property
    def dim(self) -> int:
        return self.x.shape[-1]


@dataclass(frozen=True, eq=False)
class PointwiseModel:
    """User physics at a point.

    ``residual_flops`` and ``jacobian_flops`` are the per-point operation
    counts of ``f0 + f1`` and of the Jacobian blocks, used by the perf
    counters; calls to the user forcing are not counted.
    """

    name: str
    n_components: int
    f0: Callable[[PointValues], np.ndarray]
    f1: Callable[[PointValues], np.ndarray]
    f00: Optional[Callable[[PointValues], np.ndarray]] = None
    f01: Optional[Callable[[PointValues], np.ndarray]] = None
    f10: Optional[Callable[[PointValues], np.ndarray]] = None
    f11: Optional[Callable[[PointValues], np.ndarray]] = None
    exact_solution: Optional[Forcing] = None
    spd: bool = False
    n_aux: int = 0
    residual_flops: int = 0
    jacobian_flops: int = 0
    params: dict = field(default_factory=dict)

    @property
    def has_jacobian(self) -> bool:
        return any(getattr(self, b) is not None for b in BLOCKS)

    def block(self, name: str, pv: PointValues) -> Optional[np.ndarray]:
        fn = getattr(self, name)
        return None if fn is None else fn(pv)


def _forcing_values(forcing, x, c):
    """Forcing as a ``(..., c)`` array; scalars and ``(...)`` shapes broadcast."""
    batch = x.shape[:-1]
    if forcing is None:
        return np.zeros(batch + (c,))
    g = np.asarray(forcing(x), dtype=float)
    if g.shape == batch and c == 1:
        g = g[..., None]
    return np.broadcast_to(g, batch + (c,))


def _identity_f11(pv: PointValues, scale=None):
    c, dim = pv.grad_u.shape[-2:]
    eye = np.einsum("kl,ef->kelf", np.eye(c), np.eye(dim))
    batch = pv.u.shape[:-1]
    if scale is None:
        return np.broadcast_to(eye, batch + eye.shape)
    return scale[..., None, None, None, None] * eye


def model_poisson(forcing: Forcing | None = None, n_components: int = 1, exact=None) -> PointwiseModel:
    """-lap u = g, weak form: f0 = -g(x), f1 = grad u."""

    def f0(pv):
        return -_forcing_values(forcing, pv.x, n_components)

    def f1(pv):
        return pv.grad_u.copy()

    return PointwiseModel(
        name="poisson",
        n_components=n_components,
        f0=f0,
        f1=f1,
        f11=_identity_f11,
        exact_solution=exact,
        spd=True,
        residual_flops=n_components,
    )


def model_mass_reaction(c: float = 1.0, forcing: Forcing | None = None, exact=None) -> PointwiseModel:
    """Reaction term alone: f0 = c u - g(x), f1 = 0."""

    def f0(pv):
        return c * pv.u - _forcing_values(forcing, pv.x, 1)

    def f1(pv):
        return np.zeros_like(pv.grad_u)

    def f00(pv):
        return np.full(pv.u.shape[:-1] + (1, 1), float(c))

    return PointwiseModel(
        name="mass",
        n_components=1,
        f0=f0,
        f1=f1,
        f00=f00,
        exact_solution=exact,
        spd=c > 0,
        residual_flops=2,
        params={"c": c},
    )


def model_bratu(lam: float) -> PointwiseModel:
    """-lap u - lam exp(u) = 0."""

    def f0(pv):
        return -lam * np.exp(pv.u)

    def f1(pv):
        return pv.grad_u.copy()

    def f00(pv):
        return (-lam * np.exp(pv.u))[..., None]

    return PointwiseModel(
        name="bratu",
        n_components=1,
        f0=f0,
        f1=f1,
        f00=f00,
        f11=_identity_f11,
        spd=False,
        residual_flops=2,
        jacobian_flops=2,
        params={"lambda": lam},
    )


def model_variable_poisson(forcing: Forcing | None = None, exact=None) -> PointwiseModel:
    """-div(a grad u) = g with ``a`` supplied as auxiliary field 0."""

    def f0(pv):
        return -_forcing_values(forcing, pv.x, 1)

    def f1(pv):
        return pv.a[..., 0, None, None] * pv.grad_u

    def f11(pv):
        return _identity_f11(pv, scale=pv.a[..., 0])

    return PointwiseModel(
        name="variable-poisson",
        n_components=1,
        f0=f0,
        f1=f1,
        f11=f11,
        exact_solution=exact,
        spd=True,
        n_aux=1,
        residual_flops=1 + 2,
        jacobian_flops=2,
    )


# ---------------------------------------------------------------------------
# derivative verification
# ---------------------------------------------------------------------------

@dataclass
class DerivativeReport:
    errors: dict[str, float]
    tolerance: float
    samples: int

    @property
    def failed(self) -> list[str]:
        return [b for b, e in self.errors.items() if not e <= self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failed

    @property
    def max_error(self) -> float:
        return max(self.errors.values())


def _block_or_zero(model, name, pv, shape):
    val = model.block(name, pv)
    return np.zeros(shape) if val is None else np.broadcast_to(val, shape)


def _rel_err(analytic, fd):
    return float(np.max(np.abs(analytic - fd) / np.maximum(np.abs(analytic), 1.0), initial=0.0))


def verify_model_derivatives(
    model: PointwiseModel,
    samples: int = 100,
    seed: int = 0,
    dim: int = 2,
    step: float = 2.0**-20,
    rtol: float = 1e-6,
) -> DerivativeReport:
    """Compare every Jacobian block with central differences of f0/f1.

    The error of a block is ``max |J - J_fd| / max(|J|, 1)`` over all
    samples and entries.  States are drawn on a dyadic grid and the default
    step is a power of two, so blocks of affine terms are reproduced exactly.
    """
    rng = np.random.default_rng(seed)
    c = model.n_components

    def dyadic(lo, hi, shape):
        return np.round(rng.uniform(lo, hi, shape) * 2.0**20) / 2.0**20

    pv = PointValues(
        x=rng.uniform(0.0, 1.0, (samples, dim)),
        u=dyadic(-1.0, 1.0, (samples, c)),
        grad_u=dyadic(-1.0, 1.0, (samples, c, dim)),
        a=rng.uniform(0.5, 2.0, (samples, model.n_aux)) if model.n_aux else None,
        grad_a=rng.uniform(-1.0, 1.0, (samples, model.n_aux, dim)) if model.n_aux else None,
    )
    S = (samples,)
    analytic = {
        "f00": _block_or_zero(model, "f00", pv, S + (c, c)),
        "f01": _block_or_zero(model, "f01", pv, S + (c, c, dim)),
        "f10": _block_or_zero(model, "f10", pv, S + (c, dim, c)),
        "f11": _block_or_zero(model, "f11", pv, S + (c, dim, c, dim)),
    }
    fd = {k: np.zeros_like(v) for k, v in analytic.items()}

    def shifted(du=None, dg=None):
        return PointValues(
            x=pv.x,
            u=pv.u if du is None else pv.u + du,
            grad_u=pv.grad_u if dg is None else pv.grad_u + dg,
            a=pv.a,
            grad_a=pv.grad_a,
        )

    for l in range(c):
        du = np.zeros_like(pv.u)
        du[:, l] = step
        p, m = shifted(du=du), shifted(du=-du)
        fd["f00"][:, :, l] = (model.f0(p) - model.f0(m)) / (2 * step)
        fd["f10"][:, :, :, l] = (model.f1(p) - model.f1(m)) / (2 * step)
        for f in range(dim):
            dg = np.zeros_like(pv.grad_u)
            dg[:, l, f] = step
            p, m = shifted(dg=dg), shifted(dg=-dg)
            fd["f01"][:, :, l, f] = (model.f0(p) - model.f0(m)) / (2 * step)
            fd["f11"][:, :, :, l, f] = (model.f1(p) - model.f1(m)) / (2 * step)

    errors = {k: _rel_err(analytic[k], fd[k]) for k in BLOCKS}
    return DerivativeReport(errors=errors, tolerance=rtol, samples=samples)


MODELS = {
    "poisson": lambda **kw: model_poisson(kw.get("forcing")),
    "mass": lambda **kw: model_mass_reaction(kw.get("coefficient", 1.0), kw.get("forcing")),
    "bratu": lambda **kw: model_bratu(kw.get("lam", 2.0)),
}
