"""Closed-form scalar kernels of the random dual and their Gaussian averages.

Plain kernels
    ``fq1_plain``  E min_z [(g - z)^2/(4 gb) + h max(z,0) + gamma max(z,0)^2]
    ``fq2_plain``  E min_s [(g - s)^2 + nu1 sign(s)]

Lifted kernels are the matching exponential moments ``E exp(-c * kernel)``.
The h-average is done analytically, the g-average on a split quadrature grid.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from .special_math import SQRT2, default_grid, erfc, norm_cdf, norm_pdf


class DomainError(ValueError):
    """Kernel arguments outside the region where the average is finite."""


@dataclass(frozen=True)
class Fq2Breakdown:
    a_bar: float
    f_x: float
    f21: float
    f22: float
    f23: float
    total: float

    @property
    def fq2(self):
        return 1.0 + self.total


def fq2_breakdown(nu1):
    """Components of the plain last-layer average at ``nu1 >= 0``."""
    if nu1 < 0:
        raise DomainError(f"nu1 must be nonnegative, got {nu1}")
    a = np.sqrt(2.0 * nu1)
    tail = erfc(a / SQRT2)
    f_x = -(np.exp(-0.5 * a * a) * a / np.sqrt(2.0 * np.pi) + 0.5 * tail)
    f21 = -0.5 - 0.5 * nu1
    f22 = f_x + 0.5 * nu1 * tail
    f23 = -nu1 * (0.5 - 0.5 * tail)
    return Fq2Breakdown(float(a), float(f_x), float(f21), float(f22), float(f23),
                        float(f21 + f22 + f23))


def fq2_plain(nu1):
    """Plain last-layer average, ``1 + f21 + f22 + f23``; zero at ``nu1 = 0``."""
    return fq2_breakdown(nu1).fq2


def fq1_pointwise(g, h, gamma_bar, gamma):
    """Inner-minimised hidden-layer kernel at a single (g, h) draw.

    Vectorised over ``g`` and ``h``.  For ``g <= 0`` the branch ``z <= 0``
    attains 0, hence the clamp.
    """
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    shrink = np.maximum(g - 2.0 * h * gamma_bar, 0.0)
    val = g * g / (4.0 * gamma_bar) - shrink**2 / (4.0 * gamma_bar * (1.0 + 4.0 * gamma * gamma_bar))
    return np.where(g <= 0.0, np.minimum(0.0, val), val)


def _check_plain(gamma_bar, gamma):
    if not gamma_bar > 0:
        raise DomainError(f"gamma_bar must be positive, got {gamma_bar}")
    if not 1.0 + 4.0 * gamma * gamma_bar > 0:
        raise DomainError(f"1 + 4*gamma*gamma_bar must be positive (gamma={gamma}, gamma_bar={gamma_bar})")


def _cut_points(g, gamma_bar, gamma):
    # h below C makes the z > 0 branch active (and, for g <= 0, negative)
    a = g / (2.0 * gamma_bar)
    root = np.sqrt(1.0 + 4.0 * gamma * gamma_bar)
    c = np.where(g > 0.0, a, (g + g * root) / (2.0 * gamma_bar))
    return a, c


def fq1_plain(gamma_bar, gamma, grid=None):
    """Gaussian average of :func:`fq1_pointwise` over (g, h)."""
    _check_plain(gamma_bar, gamma)
    grid = grid or default_grid()
    g, w = grid.nodes, grid.weights
    b = gamma_bar / (1.0 + 4.0 * gamma * gamma_bar)
    a, c = _cut_points(g, gamma_bar, gamma)
    cdf_c = norm_cdf(c)
    # E[(a - h)^2 ; h < c]
    i11 = b * ((a * a + 1.0) * cdf_c + norm_pdf(c) * (2.0 * a - c))
    lead = g * g / (4.0 * gamma_bar)
    vals = np.where(g > 0.0, lead - i11, lead * cdf_c - i11)
    return float(np.dot(w, vals))


def _scaled_erfc_exp(y, logscale):
    """exp(logscale) * erfc(y) without overflow for large positive ``y``."""
    pos = y > 0.0
    out = np.empty_like(y)
    out[pos] = special.erfcx(y[pos]) * np.exp(logscale[pos] - y[pos] ** 2)
    out[~pos] = special.erfc(y[~pos]) * np.exp(logscale[~pos])
    return out


def lifted_b(c3, gamma_bar, gamma):
    return c3 * gamma_bar / (1.0 + 4.0 * gamma * gamma_bar)


def lifted_growth(c3, gamma_bar, gamma):
    """Coefficient of g^2 in the log of the h-integrated lifted integrand for g > 0.

    The exponential moment is finite iff ``1 - 2B > 0`` and this is negative.
    """
    b = lifted_b(c3, gamma_bar, gamma)
    return -c3 / (4.0 * gamma_bar) + b / (4.0 * gamma_bar**2 * (1.0 - 2.0 * b)) - 0.5


def fq1_lifted(c3, gamma_bar, gamma, grid=None):
    """E exp(-c3 * kernel) for the hidden-layer kernel.

    Finite only when ``1 - 2B > 0`` and :func:`lifted_growth` is negative;
    otherwise :class:`DomainError`.

    ``c3`` is the effective inverse temperature of the layer (``c3 * r_prev``
    inside a deep network).
    """
    _check_plain(gamma_bar, gamma)
    if not c3 > 0:
        raise DomainError(f"c3 must be positive, got {c3}")
    b = lifted_b(c3, gamma_bar, gamma)
    if not 1.0 - 2.0 * b > 0:
        raise DomainError(f"exponential moment diverges: 1 - 2B = {1.0 - 2.0 * b:.3g}")
    rate = lifted_growth(c3, gamma_bar, gamma)
    if not rate < 0:
        raise DomainError(f"exponential moment diverges along g > 0: growth rate {rate:.3g}")
    grid = grid or default_grid()
    g, w = grid.nodes, grid.weights
    a, c = _cut_points(g, gamma_bar, gamma)
    s = 1.0 - 2.0 * b
    damp = -c3 * g * g / (4.0 * gamma_bar)
    y = -(2.0 * b * a + s * c) / np.sqrt(2.0 * s)
    # exp(damp) * I11 with the Gaussian h-integral completed analytically
    inner = _scaled_erfc_exp(y, damp + b * a * a / s) / (2.0 * np.sqrt(s))
    tail = 1.0 - norm_cdf(c)
    vals = np.where(g > 0.0, np.exp(damp) * tail + inner, inner + tail)
    return float(np.dot(w, vals))


def fq2_lifted(c3, r, gamma_bar, nu1):
    """E exp(-k * min_s[(g - s)^2 + nu1 sign(s)]) with ``k = c3 r^2 / (4 gamma_bar)``."""
    if not (c3 > 0 and r > 0 and gamma_bar > 0):
        raise DomainError(f"c3, r, gamma_bar must be positive (got {c3}, {r}, {gamma_bar})")
    if nu1 < 0:
        raise DomainError(f"nu1 must be nonnegative, got {nu1}")
    k = c3 * r * r / (4.0 * gamma_bar)
    a = np.sqrt(2.0 * nu1)
    widen = np.sqrt(1.0 + 2.0 * k)
    f21 = 0.5 * np.exp(k * nu1)
    f22 = 0.5 * np.exp(-k * nu1) * erfc(a / SQRT2)
    f23 = np.exp(k * nu1) / widen * 0.5 * special.erf(a * widen / SQRT2)
    return float(f21 + f22 + f23)


def gamma_sph_hat(c3, printed=False):
    """Stationary point of the spherical term.

    The default is the positive root of ``4 x^2 - 2 c3 x - 1 = 0``.
    ``printed=True`` evaluates ``(c3 + sqrt(c3 + 4)) / 4`` for comparison.
    """
    if not c3 > 0:
        raise DomainError(f"c3 must be positive, got {c3}")
    if printed:
        return (c3 + np.sqrt(c3 + 4.0)) / 4.0
    return (c3 + np.sqrt(c3 * c3 + 4.0)) / 4.0


def spherical_term(c3, gamma_sph):
    """-gamma_sph + log(1 - c3 / (2 gamma_sph)) / (2 c3)."""
    arg = 1.0 - c3 / (2.0 * gamma_sph)
    if not arg > 0:
        raise DomainError(f"spherical term undefined: 1 - c3/(2 gamma_sph) = {arg:.3g}")
    return -gamma_sph + np.log(arg) / (2.0 * c3)
