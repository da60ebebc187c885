"""Plain and lifted random-dual objectives for an l-layer ReLU network.

The objective is a sum of independent per-layer pieces.  Hidden layer ``i``
(1 <= i < l) owns ``gamma_bar[i-1]`` and ``gamma[i-1]`` and sees the radii
``r_{i-1}, r_i`` (with ``r_0 = 1``); the last layer owns ``gamma_bar[-1]``
and ``nu``.  The solver exploits this split, so the per-layer functions are
public.
"""

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

from .kernels import (DomainError, fq1_lifted, fq1_plain, fq2_lifted, fq2_plain,
                      gamma_sph_hat, lifted_b, lifted_growth, spherical_term)


class InjectivityMode(enum.Enum):
    WEAK = "weak"
    STRONG = "strong"

    @property
    def kappa(self):
        return 2 if self is InjectivityMode.WEAK else 4

    @property
    def threshold_factor(self):
        """Positive-count threshold in units of the input dimension n."""
        return 1 if self is InjectivityMode.WEAK else 2

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"mode must be 'weak' or 'strong', got {value!r}") from None


class Method(enum.Enum):
    PLAIN = "plain"
    LIFTED = "lifted"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"method must be 'plain' or 'lifted', got {value!r}") from None


@dataclass(frozen=True)
class NetworkProfile:
    """Absolute expansion coefficients alpha_1..alpha_l and the injectivity mode."""

    alphas: Tuple[float, ...]
    mode: InjectivityMode = InjectivityMode.WEAK

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas:
            raise ValueError("profile needs at least one layer")
        for a in alphas:
            if not (math.isfinite(a) and a > 0):
                raise ValueError(f"expansion coefficients must be positive and finite, got {a}")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "mode", InjectivityMode.parse(self.mode))

    @property
    def layers(self):
        return len(self.alphas)

    @property
    def expansions(self):
        """Relative expansions alpha_i / alpha_{i-1} with alpha_0 = 1."""
        prev = (1.0,) + self.alphas[:-1]
        return tuple(a / p for a, p in zip(self.alphas, prev))


@dataclass(frozen=True)
class SaddleVariables:
    r: Tuple[float, ...]
    gamma_bar: Tuple[float, ...]
    gamma: Tuple[float, ...]
    nu: float
    c3: Optional[float] = None

    def __post_init__(self):
        for name in ("r", "gamma_bar", "gamma"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        object.__setattr__(self, "nu", float(self.nu))
        if self.c3 is not None:
            object.__setattr__(self, "c3", float(self.c3))
        l = len(self.gamma_bar)
        if l < 1 or len(self.r) != l - 1 or len(self.gamma) != l - 1:
            raise ValueError(
                f"inconsistent dimensions: r={len(self.r)}, gamma_bar={l}, gamma={len(self.gamma)}")
        if any(not v > 0 for v in self.r + self.gamma_bar):
            raise ValueError("radii and gamma_bar entries must be positive")
        if self.nu < 0:
            raise ValueError(f"nu must be nonnegative, got {self.nu}")
        if self.c3 is not None and not self.c3 > 0:
            raise ValueError(f"c3 must be positive, got {self.c3}")

    @property
    def layers(self):
        return len(self.gamma_bar)

    @property
    def radii(self):
        """(r_0, r_1, ..., r_{l-1}) with r_0 = 1."""
        return (1.0,) + self.r

    def lifted_valid(self):
        if self.c3 is None:
            return True
        radii = self.radii
        return all(1.0 + 4.0 * g * gb > 0 and 1.0 - 2.0 * lifted_b(self.c3 * radii[i], gb, g) > 0
                   and lifted_growth(self.c3 * radii[i], gb, g) < 0
                   for i, (gb, g) in enumerate(zip(self.gamma_bar, self.gamma)))

    def to_dict(self):
        d = asdict(self)
        for k in ("r", "gamma_bar", "gamma"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(r=d["r"], gamma_bar=d["gamma_bar"], gamma=d["gamma"], nu=d["nu"], c3=d.get("c3"))


@dataclass(frozen=True)
class ObjectiveBreakdown:
    layer_terms: Tuple[float, ...]
    last_layer_term: float
    nu_term: float
    constant_term: float
    total: float = field(default=float("nan"))

    @classmethod
    def assemble(cls, layer_terms, last_layer_term, nu_term, constant_term):
        parts = tuple(float(t) for t in layer_terms)
        total = math.fsum(parts + (last_layer_term, nu_term, constant_term))
        return cls(parts, float(last_layer_term), float(nu_term), float(constant_term), total)

    def to_dict(self):
        d = asdict(self)
        d["layer_terms"] = list(d["layer_terms"])
        return d


# --- per-layer pieces -------------------------------------------------------

def hidden_term_plain(alpha, r_prev, r_next, gamma_bar, gamma, grid=None):
    return r_prev * (gamma_bar + alpha * fq1_plain(gamma_bar, gamma, grid)
                     - gamma * (r_next / r_prev) ** 2)


def last_term_plain(alpha, r_prev, gamma_bar, nu):
    nu1 = 4.0 * gamma_bar * nu / r_prev**2
    return gamma_bar + alpha * r_prev**2 * fq2_plain(nu1) / (4.0 * gamma_bar)


def hidden_term_lifted(alpha, r_prev, r_next, gamma_bar, gamma, c3, grid=None):
    moment = fq1_lifted(c3 * r_prev, gamma_bar, gamma, grid)
    return (0.5 * c3 * r_prev**2 + gamma_bar * r_prev - alpha / c3 * math.log(moment)
            - gamma * r_next**2 / r_prev)


def last_term_lifted(alpha, r_prev, gamma_bar, nu, c3):
    nu1 = 4.0 * gamma_bar * nu / r_prev**2
    moment = fq2_lifted(c3, r_prev, gamma_bar, nu1)
    return 0.5 * c3 * r_prev**2 + gamma_bar - alpha / c3 * math.log(moment)


def nu_term(nu, alpha_last, mode):
    return -nu * (mode.kappa - alpha_last)


def lifted_constant(c3, printed=False):
    return spherical_term(c3, gamma_sph_hat(c3, printed=printed))


# --- full objectives ----------------------------------------------------------

def _check_dims(profile, vars):
    if vars.layers != profile.layers:
        raise ValueError(f"variables describe {vars.layers} layers, profile has {profile.layers}")


def phi0_plain(profile, vars, grid=None):
    """Plain objective at fixed saddle variables."""
    _check_dims(profile, vars)
    if vars.c3 is not None:
        raise ValueError("plain objective takes no c3")
    radii = vars.radii
    alphas = profile.alphas
    hidden = [hidden_term_plain(alphas[i], radii[i], radii[i + 1], vars.gamma_bar[i], vars.gamma[i], grid)
              for i in range(profile.layers - 1)]
    last = last_term_plain(alphas[-1], radii[-1], vars.gamma_bar[-1], vars.nu)
    return ObjectiveBreakdown.assemble(hidden, last, nu_term(vars.nu, alphas[-1], profile.mode), -1.0)


def phi0_lifted(profile, vars, grid=None, printed_gamma_sph=False):
    """Partially lifted objective at fixed saddle variables (``vars.c3`` required)."""
    _check_dims(profile, vars)
    if vars.c3 is None:
        raise ValueError("lifted objective requires c3")
    c3 = vars.c3
    radii = vars.radii
    alphas = profile.alphas
    hidden = [hidden_term_lifted(alphas[i], radii[i], radii[i + 1], vars.gamma_bar[i], vars.gamma[i], c3, grid)
              for i in range(profile.layers - 1)]
    last = last_term_lifted(alphas[-1], radii[-1], vars.gamma_bar[-1], vars.nu, c3)
    return ObjectiveBreakdown.assemble(hidden, last, nu_term(vars.nu, alphas[-1], profile.mode),
                                       lifted_constant(c3, printed_gamma_sph))


def evaluate(profile, vars, grid=None, printed_gamma_sph=False):
    if vars.c3 is None:
        return phi0_plain(profile, vars, grid)
    return phi0_lifted(profile, vars, grid, printed_gamma_sph)


__all__ = [
    "DomainError", "InjectivityMode", "Method", "NetworkProfile", "SaddleVariables",
    "ObjectiveBreakdown", "phi0_plain", "phi0_lifted", "evaluate",
]
