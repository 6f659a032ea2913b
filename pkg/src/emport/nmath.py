"""Scalar normal / truncated-normal primitives shared by the hot kernels.

Everything here is plain scalar math (``math`` module plus module-level
constant arrays) so the functions compile under numba and run unchanged as
ordinary Python when the numpy backend is selected.

Accuracy notes, double precision:
  * ``norm_cdf`` evaluates 0.5*erfc(-x/sqrt(2)); absolute error below 1e-15
    and relative error preserved far into the lower tail.
  * ``norm_ppf`` is the Wichura PPND16 rational approximation; absolute
    error below 1e-14 on (0, 1), far inside the 1e-9 budget.
  * ``tn_lnz`` (log of the truncated-normal normalizer) is exact to roughly
    1e-13 relative over the whole parameter range, including intervals many
    standard deviations into one tail, via anchored Gauss-Legendre panels
    for narrow intervals and complementary-cdf log differences for wide
    ones.
"""
from __future__ import annotations

import math

import numpy as np

from .backend import maybe_njit

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
SQRT2 = math.sqrt(2.0)

# Gauss-Legendre nodes/weights on [0, 1]; read-only module constants so the
# jitted functions can close over them.
_gl_x, _gl_w = np.polynomial.legendre.leggauss(24)
GL_X01 = np.ascontiguousarray((_gl_x + 1.0) / 2.0)
GL_W01 = np.ascontiguousarray(_gl_w / 2.0)

# Interval width below which the normalizer integral is evaluated by
# quadrature anchored at the endpoint nearest the mode.
_NARROW_WIDTH = 1.0
# Standardized distance beyond which truncated moments switch to the
# one-sided tail quadrature (Mills-ratio regime).
TAIL_SWITCH = 40.0


@maybe_njit
def norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x - LOG_SQRT_2PI)


@maybe_njit
def log_norm_pdf(x: float) -> float:
    return -0.5 * x * x - LOG_SQRT_2PI


@maybe_njit
def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / SQRT2)


@maybe_njit
def mills_ratio(x: float) -> float:
    """Phi-bar(x)/phi(x) for x > 0, by backward continued fraction."""
    t = x
    for k in range(60, 0, -1):
        t = x + k / t
    return 1.0 / t


@maybe_njit
def log_norm_cdf(x: float) -> float:
    """ln Phi(x), stable over the whole real line."""
    if x > -36.0:
        return math.log(0.5 * math.erfc(-x / SQRT2))
    return log_norm_pdf(x) + math.log(mills_ratio(-x))


@maybe_njit
def log_norm_sf(x: float) -> float:
    """ln(1 - Phi(x))."""
    return log_norm_cdf(-x)


@maybe_njit
def norm_ppf(p: float) -> float:
    """Inverse standard-normal cdf (Wichura's PPND16)."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r -= 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    x = num / den
    return -x if q < 0.0 else x


@maybe_njit
def _ln_seg(c: float, w: float) -> float:
    """ln of int_0^w exp(-c*t - t^2/2) dt for c >= 0, w > 0."""
    s = 0.0
    for i in range(GL_X01.shape[0]):
        t = w * GL_X01[i]
        s += GL_W01[i] * math.exp(-c * t - 0.5 * t * t)
    return math.log(s * w)


@maybe_njit
def tn_lnz(A: float, B: float) -> float:
    """ln(Phi(B) - Phi(A)) for A < B, stable for any placement of [A, B]."""
    if A + B > 0.0:
        A, B = -B, -A
    w = B - A
    if w <= _NARROW_WIDTH:
        if A >= 0.0:
            return log_norm_pdf(A) + _ln_seg(A, w)
        if B <= 0.0:
            return log_norm_pdf(-B) + _ln_seg(-B, w)
        la = log_norm_pdf(0.0) + _ln_seg(0.0, -A)
        lb = log_norm_pdf(0.0) + _ln_seg(0.0, B)
        hi = la if la > lb else lb
        return hi + math.log(math.exp(la - hi) + math.exp(lb - hi))
    if B <= 0.0:
        # both in the lower tail: Phi(B) - Phi(A) = Phibar(-B) - Phibar(-A)
        lb = log_norm_sf(-B)
        la = log_norm_sf(-A)
        return lb + math.log1p(-math.exp(la - lb))
    # wide interval straddling 0: direct difference is well conditioned
    return math.log(norm_cdf(B) - norm_cdf(A))


@maybe_njit
def _tn_tail_tkmoments(A: float, W: float):
    """E[t], E[t^2] and ln of the normalizer for density prop. to
    exp(-A*t - t^2/2) on [0, W], A >= TAIL_SWITCH.  t is the standardized
    offset from the near bound; effective support is O(1/A)."""
    hi = 45.0 / A
    if W < hi:
        hi = W
    s0 = 0.0
    s1 = 0.0
    s2 = 0.0
    for i in range(GL_X01.shape[0]):
        t = hi * GL_X01[i]
        f = GL_W01[i] * math.exp(-A * t - 0.5 * t * t)
        s0 += f
        s1 += f * t
        s2 += f * t * t
    m1 = s1 / s0
    m2 = s2 / s0
    return m1, m2, math.log(s0 * hi)


@maybe_njit
def tn_stats(alpha: float, beta: float, a: float, b: float):
    """Mean, variance, differential entropy and ln-normalizer of a normal
    with location ``alpha`` and scale ``beta`` truncated to [a, b].

    Returns (mean, var, entropy, lnz) where lnz = ln(Phi(B) - Phi(A)) with
    A = (a-alpha)/beta, B = (b-alpha)/beta.
    """
    A = (a - alpha) / beta
    B = (b - alpha) / beta
    if A >= TAIL_SWITCH:
        # parent mode far below the support: anchor at a
        m1, m2, lseg = _tn_tail_tkmoments(A, B - A)
        mean = a + beta * m1
        var = beta * beta * (m2 - m1 * m1)
        lnz = log_norm_pdf(A) + lseg
        # entropy of beta * t with p(t) = exp(-A t - t^2/2)/I on [0, W]
        ent = math.log(beta) + lseg + A * m1 + 0.5 * m2
        return mean, var, ent, lnz
    if B <= -TAIL_SWITCH:
        # mirror image: anchor at b
        m1, m2, lseg = _tn_tail_tkmoments(-B, B - A)
        mean = b - beta * m1
        var = beta * beta * (m2 - m1 * m1)
        lnz = log_norm_pdf(B) + lseg
        ent = math.log(beta) + lseg - B * m1 + 0.5 * m2
        return mean, var, ent, lnz
    lnz = tn_lnz(A, B)
    ra = math.exp(log_norm_pdf(A) - lnz)
    rb = math.exp(log_norm_pdf(B) - lnz)
    d = ra - rb
    mean = alpha + beta * d
    var = beta * beta * (1.0 + A * ra - B * rb - d * d)
    ent = LOG_SQRT_2PI + 0.5 + math.log(beta) + lnz + 0.5 * (A * ra - B * rb)
    return mean, var, ent, lnz


@maybe_njit
def tn_entropy_dmu(alpha: float, beta: float, a: float, b: float) -> float:
    """Derivative of the truncated-normal entropy in the location alpha."""
    A = (a - alpha) / beta
    B = (b - alpha) / beta
    lnz = tn_lnz(A, B)
    ra = math.exp(log_norm_pdf(A) - lnz)
    rb = math.exp(log_norm_pdf(B) - lnz)
    d = ra - rb
    return (d + 0.5 * (rb * (1.0 - B * B) - ra * (1.0 - A * A))
            - 0.5 * (A * ra - B * rb) * d) / beta


@maybe_njit
def tn_logpdf_dmu(x: float, alpha: float, beta: float, a: float, b: float) -> float:
    """d/d(alpha) of ln pdf at x for the truncated normal on [a, b]."""
    A = (a - alpha) / beta
    B = (b - alpha) / beta
    lnz = tn_lnz(A, B)
    ra = math.exp(log_norm_pdf(A) - lnz)
    rb = math.exp(log_norm_pdf(B) - lnz)
    return (x - alpha) / (beta * beta) + (rb - ra) / beta


@maybe_njit
def tn_ppf(u: float, alpha: float, beta: float, a: float, b: float) -> float:
    """Inverse-cdf draw: the u-quantile of the truncated normal on [a, b]."""
    A = (a - alpha) / beta
    B = (b - alpha) / beta
    flip = False
    if A + B > 0.0:
        # work in the lower tail for accuracy, mirror back at the end
        A, B = -B, -A
        u = 1.0 - u
        flip = True
    pa = norm_cdf(A)
    z = math.exp(tn_lnz(A, B))
    p = pa + u * z
    if p <= 0.0:
        p = 5e-324
    elif p >= 1.0:
        p = 1.0 - 1e-16
    x = norm_ppf(p)
    if flip:
        x = -x
    y = alpha + beta * x
    if y < a:
        y = a
    elif y > b:
        y = b
    return y
