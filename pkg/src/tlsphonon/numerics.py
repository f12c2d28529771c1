"""Shared special functions and quadrature engines.

These exist to serve as *independent* numerical routes against the
closed-form dissipation expressions elsewhere in the package: the digamma
function entering the sound-velocity shift, numerically stable hyperbolics
for thermal factors at millikelvin temperatures, and adaptive 1-D/2-D
quadrature used to evaluate the ensemble integrals that the closed forms
approximate.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Optional

from scipy.integrate import quad as _scipy_quad


class QuadratureError(RuntimeError):
    """Raised when an adaptive quadrature fails to converge.

    Carries the best available estimate so callers can report it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class QuadratureResult:
    """Outcome of an adaptive quadrature.

    value           integral estimate, in the caller's units
    error_estimate  absolute error estimate (>= 0)
    evaluations     number of integrand evaluations
    rtol, atol      tolerances the convergence test uses
    message         integrator diagnostic when convergence was not reached
    """

    value: float
    error_estimate: float
    evaluations: int
    rtol: float
    atol: float
    message: Optional[str] = None

    @property
    def converged(self) -> bool:
        if self.message is not None:
            return False
        return self.error_estimate <= self.rtol * abs(self.value) + self.atol


# ---------------------------------------------------------------------------
# stable hyperbolics
# ---------------------------------------------------------------------------

def coth(x: float) -> float:
    """Hyperbolic cotangent, safe over the full float range.

    math.tanh saturates to +-1 for |x| > ~19 without overflow, so 1/tanh
    needs no clamping; for |x| down to ~1e-300 the 1/x growth stays finite.
    """
    if x == 0.0:
        raise ValueError("coth(0) diverges")
    return 1.0 / math.tanh(x)


def sech_squared(x: float) -> float:
    """sech(x)**2 without overflowing cosh at |x| > ~710."""
    ax = abs(x)
    if ax > 350.0:
        # 4 e^{-2x} / (1 + e^{-2x})^2, denominator ~ 1
        e = math.exp(-2.0 * ax)
        return 4.0 * e
    c = math.cosh(ax)
    return 1.0 / (c * c)


def bose_occupation(x: float) -> float:
    """Mean thermal occupation 1/(e^x - 1) for x = E/kT > 0."""
    if x <= 0.0:
        raise ValueError("occupation needs a positive E/kT argument")
    if x > 700.0:
        return 0.0
    return 1.0 / math.expm1(x)


# ---------------------------------------------------------------------------
# digamma
# ---------------------------------------------------------------------------

# - Sum_{k>=1} B_{2k} / (2k z^{2k}), coefficients of the Stirling-type tail
_ASYMPTOTIC_COEFFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)

_ASYMPTOTIC_RADIUS = 10.0  # |z| beyond which the truncated series is ~1e-15


def digamma_complex(z: complex) -> complex:
    """Digamma function psi(z) for complex z off the nonpositive integers.

    Uses the recurrence psi(z) = psi(z+1) - 1/z to push |z| beyond the
    asymptotic radius, then the standard large-|z| expansion
    psi(z) ~ ln z - 1/(2z) - sum B_2k/(2k z^2k).
    """
    z = complex(z)
    if z.imag == 0.0 and z.real <= 0.0 and z.real == int(z.real):
        raise ValueError(f"digamma pole at z={z}")
    shift = 0.0 + 0.0j
    while abs(z) < _ASYMPTOTIC_RADIUS:
        shift -= 1.0 / z
        z += 1.0
    w = 1.0 / (z * z)
    tail = 0.0 + 0.0j
    for c in reversed(_ASYMPTOTIC_COEFFS):
        tail = w * (c + tail)
    return shift + cmath.log(z) - 0.5 / z - tail


def digamma_half_plus_imag(x: float) -> float:
    """Re psi(1/2 + i x), the thermal kernel of the TLS sound-velocity shift.

    Even in x; equals psi(1/2) = -euler_gamma - 2 ln 2 at x = 0 and grows
    like ln|x| for large |x|.
    """
    return digamma_complex(complex(0.5, abs(float(x)))).real


# ---------------------------------------------------------------------------
# adaptive quadrature
# ---------------------------------------------------------------------------

def quad_adaptive(
    integrand: Callable[[float], float],
    a: float,
    b: float,
    *,
    rtol: float = 1e-8,
    atol: float = 0.0,
    points=None,
    limit: int = 200,
) -> QuadratureResult:
    """Adaptive Gauss-Kronrod integration of ``integrand`` over [a, b].

    Semi-infinite intervals are mapped onto [0, 1) with x = a + t/(1-t)
    (mirrored for a lower-infinite endpoint) so the subdivision policy stays
    deterministic and truncation is explicit in the caller's hands.

    ``points`` lists interior break points (in x space) where the integrand
    is sharply peaked; without them the subdivision can step over a spike
    much narrower than the interval.

    Returns a :class:`QuadratureResult`; inspect ``converged`` rather than
    expecting an exception. Non-convergence is never silent: the result
    carries the integrator's message.
    """
    if rtol <= 0.0:
        raise ValueError("rtol must be positive")
    a = float(a)
    b = float(b)

    fn = integrand
    lo, hi = a, b
    mapped_points = points

    if math.isinf(a) and math.isinf(b):
        raise ValueError("doubly infinite intervals are not supported; split at a finite point")
    if math.isinf(b) and not math.isinf(a):
        def fn(t, _f=integrand, _a=a):  # x = a + t/(1-t), dx = dt/(1-t)^2
            u = 1.0 - t
            x = _a + t / u
            if not math.isfinite(x):
                return 0.0
            return _f(x) / (u * u)

        lo, hi = 0.0, 1.0
        if points is not None:
            mapped_points = [(p - a) / (1.0 + (p - a)) for p in points]
    elif math.isinf(a) and not math.isinf(b):
        def fn(t, _f=integrand, _b=b):  # x = b - t/(1-t)
            u = 1.0 - t
            x = _b - t / u
            if not math.isfinite(x):
                return 0.0
            return _f(x) / (u * u)

        lo, hi = 0.0, 1.0
        if points is not None:
            mapped_points = [(b - p) / (1.0 + (b - p)) for p in points]

    # epsabs=0 would make QUADPACK chase pure relative error on integrals
    # that may legitimately be 0; keep a tiny floor instead.
    epsabs = atol if atol > 0.0 else 1e-300
    out = _scipy_quad(
        fn, lo, hi,
        epsabs=epsabs, epsrel=rtol, limit=limit,
        points=mapped_points, full_output=1,
    )
    value, abserr, info = out[0], out[1], out[2]
    message = out[3] if len(out) > 3 else None
    return QuadratureResult(
        value=float(value),
        error_estimate=float(abserr),
        evaluations=int(info["neval"]),
        rtol=rtol,
        atol=atol,
        message=message,
    )


def quad2d_adaptive(
    integrand: Callable[[float, float], float],
    outer,
    inner,
    *,
    rtol: float = 1e-8,
    atol: float = 0.0,
) -> QuadratureResult:
    """Nested adaptive quadrature of ``integrand(u, v)``.

    ``outer`` is the (u_lo, u_hi) interval for the first argument; ``inner``
    is either a fixed (v_lo, v_hi) pair or a callable u -> (v_lo, v_hi).
    The inner stage runs at 10x tighter relative tolerance so the outer
    error estimate dominates. Any inner-stage non-convergence aborts with
    :class:`QuadratureError` carrying the partial result.
    """
    count = [0]
    inner_rtol = rtol * 0.1

    def outer_integrand(u: float) -> float:
        v_lo, v_hi = inner(u) if callable(inner) else inner

        def f(v: float) -> float:
            count[0] += 1
            return integrand(u, v)

        res = quad_adaptive(f, v_lo, v_hi, rtol=inner_rtol, atol=atol)
        if not res.converged:
            raise QuadratureError(
                f"inner quadrature stalled at u={u!r}: {res.message} "
                f"(estimate {res.value!r} +- {res.error_estimate!r})",
                result=res,
            )
        return res.value

    out = quad_adaptive(outer_integrand, outer[0], outer[1], rtol=rtol, atol=atol)
    return QuadratureResult(
        value=out.value,
        error_estimate=out.error_estimate,
        evaluations=count[0],
        rtol=rtol,
        atol=atol,
        message=out.message,
    )
