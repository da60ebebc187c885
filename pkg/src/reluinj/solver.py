"""Min-max saddle solving and capacity root finding.

Given the radii ``r_1..r_{l-1}``, the objective splits into independent layer
problems ``min over gamma_bar, max over (gamma or nu)``.  Each layer problem
is solved by Newton iteration on its stationarity equations (finite-difference
derivatives, checked for the min-max signature) with a nested Brent fallback.
The radii are then minimised by a multistart Nelder-Mead simplex in log
space, and for the lifted objective an outer bounded Brent search maximises
over the inverse temperature ``c3``.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
from scipy import optimize

from . import objective as obj
from .kernels import DomainError
from .objective import InjectivityMode, Method, NetworkProfile, SaddleVariables

log = logging.getLogger(__name__)

GAMMA_BAR_RANGE = (1e-6, 1e7)
NU_MAX = 50.0
# far above the boundary minimisers seen for large alpha_l (radius -> 0)
R_RANGE = (1e-2, 1e3)
C3_RANGE = (1e-4, 4.0)
# root probes only need the sign once the value is this negative
PROBE_FLOOR = -1.0
LIFTED_MARGIN = 1.02


class SolverError(RuntimeError):
    """Raised when the solver cannot produce a usable answer."""


class NoSignChange(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    objective_tol: float = 1e-7
    var_tol: float = 1e-6
    max_iters: int = 4000
    multistarts: int = 8
    rng_seed: int = 0
    alpha_bracket_factor: float = 5.0
    c3_tol: float = 1e-4

    def __post_init__(self):
        if not (self.objective_tol > 0 and self.var_tol > 0 and self.c3_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.multistarts < 1:
            raise ValueError("multistarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.alpha_bracket_factor > 1:
            raise ValueError("alpha_bracket_factor must exceed 1")


@dataclass
class SaddleReport:
    """Saddle variables plus diagnostics from :func:`saddle_solve`."""

    vars: SaddleVariables
    breakdown: obj.ObjectiveBreakdown
    converged: bool
    stationarity: float
    evaluations: int = 0

    @property
    def value(self):
        return self.breakdown.total


@dataclass
class CapacityResult:
    alpha_bound: float
    vars_at_opt: SaddleVariables
    residual: float
    mode: InjectivityMode
    method: Method
    relative_expansion: float
    prefix: Tuple[float, ...] = ()
    breakdown: Optional[obj.ObjectiveBreakdown] = None
    converged: bool = True
    probes: int = 0
    certificate: Tuple[float, float] = field(default=(float("nan"), float("nan")))

    @property
    def alphas(self):
        return tuple(self.prefix) + (self.alpha_bound,)

    def to_dict(self):
        return {
            "alphas": list(self.alphas),
            "alpha_bound": self.alpha_bound,
            "relative_expansion": self.relative_expansion,
            "mode": self.mode.value,
            "method": self.method.value,
            "residual": self.residual,
            "converged": self.converged,
            "probes": self.probes,
            "certificate": list(self.certificate),
            "vars": self.vars_at_opt.to_dict(),
            "breakdown": self.breakdown.to_dict() if self.breakdown else None,
        }


# --- single layer min-max -----------------------------------------------------

def _safe(func):
    def wrapped(u, y):
        try:
            val = func(u, y)
        except (DomainError, ValueError, OverflowError, ZeroDivisionError):
            return math.nan
        return val if math.isfinite(val) else math.nan
    return wrapped


def _newton_saddle(F, u0, y0, y_lower, h=1e-4, tol=1e-10, max_iter=40):
    """Newton iteration on grad F = 0 for min over u, max over y.

    Returns ``(u, y)`` or ``None`` when the iteration fails or lands on a
    point without the min-max signature.
    """
    u, y = float(u0), float(y0)

    def derivs(u, y):
        f = np.array([[F(u + i * h, y + j * h) for j in (-1, 0, 1)] for i in (-1, 0, 1)])
        if not np.all(np.isfinite(f)):
            return None
        gu = (f[2, 1] - f[0, 1]) / (2 * h)
        gy = (f[1, 2] - f[1, 0]) / (2 * h)
        huu = (f[2, 1] - 2 * f[1, 1] + f[0, 1]) / h**2
        hyy = (f[1, 2] - 2 * f[1, 1] + f[1, 0]) / h**2
        huy = (f[2, 2] - f[2, 0] - f[0, 2] + f[0, 0]) / (4 * h**2)
        return np.array([gu, gy]), np.array([[huu, huy], [huy, hyy]])

    if y - h <= y_lower:
        return None
    d = derivs(u, y)
    if d is None:
        return None
    for _ in range(max_iter):
        grad, hess = d
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            return None
        gnorm = np.hypot(*grad)
        t = 1.0
        for _ in range(12):
            un, yn = u + t * step[0], y + t * step[1]
            if yn - h > y_lower:
                dn = derivs(un, yn)
                if dn is not None and np.hypot(*dn[0]) < max(gnorm, 1e-13) * (1 - 1e-4 * t) + 1e-13:
                    break
            t *= 0.5
        else:
            return None
        u, y, d = un, yn, dn
        if t * np.hypot(*step) < tol:
            hess = d[1]
            if hess[1, 1] < 0 and hess[0, 0] - hess[0, 1] ** 2 / hess[1, 1] > 0:
                return u, y
            return None
    return None


def _nested_saddle(F, y_lower_of, y_upper):
    """Robust fallback: bounded Brent on u of bounded Brent on y."""
    inner = {}

    def value(u):
        lo = y_lower_of(u)
        res = optimize.minimize_scalar(lambda y: -F(u, y) if math.isfinite(F(u, y)) else 1e300,
                                       bounds=(lo, max(lo + 1.0, y_upper)), method="bounded",
                                       options={"xatol": 1e-10, "maxiter": 500})
        inner[u] = res.x
        return -res.fun
    res = optimize.minimize_scalar(value, bounds=tuple(np.log(GAMMA_BAR_RANGE)), method="bounded",
                                   options={"xatol": 1e-10, "maxiter": 500})
    if res.x not in inner:
        value(res.x)
    return res.x, inner[res.x]


class _LayerProblem:
    """One layer's min over log(gamma_bar), max over gamma (hidden) or nu (last)."""

    def __init__(self, func, y_lower_of, y_upper, start):
        self.F = _safe(func)
        self.y_lower_of = y_lower_of
        self.y_upper = y_upper
        self.start = start

    def solve(self):
        u0, y0 = self.start
        lo = self.y_lower_of(u0)
        if not y0 > lo + 1e-6:
            y0 = lo + 0.1
        hit = _newton_saddle(self.F, u0, y0, self.y_lower_of(u0))
        if hit is not None and hit[1] > self.y_lower_of(hit[0]):
            return hit, self.F(*hit)
        hit = _nested_saddle(self.F, self.y_lower_of, self.y_upper)
        return hit, self.F(*hit)


def _gamma_lower(c_eff):
    # plain: 1 + 4 gamma gb > 0; lifted adds 1 - 2 c gb / (1 + 4 gamma gb) > 0
    if c_eff is None:
        return lambda u: -0.25 * math.exp(-u) + 1e-12
    return lambda u: 0.5 * c_eff - 0.25 * math.exp(-u) + 1e-12


class _Assembler:
    """Evaluates min over (gamma_bar) max over (gamma, nu) for fixed radii."""

    def __init__(self, profile, c3=None, grid=None, printed_gamma_sph=False):
        self.profile = profile
        self.c3 = c3
        self.grid = grid
        self.printed = printed_gamma_sph
        self.warm = {}
        self.evaluations = 0

    def layer(self, i, radii):
        p = self.profile
        alphas, c3, grid = p.alphas, self.c3, self.grid
        l = p.layers
        if i < l - 1:
            r_prev, r_next = radii[i], radii[i + 1]
            if c3 is None:
                func = lambda u, g: obj.hidden_term_plain(alphas[i], r_prev, r_next, math.exp(u), g, grid)
                lower = _gamma_lower(None)
            else:
                func = lambda u, g: obj.hidden_term_lifted(alphas[i], r_prev, r_next, math.exp(u), g, c3, grid)
                lower = _gamma_lower(c3 * r_prev)
            start = self.warm.get(i, (math.log(0.9), 0.3))
            # gamma scales like (r_prev / r_next)^2
            prob = _LayerProblem(func, lower, 20.0 * max(1.0, (r_prev / r_next) ** 2), start)
        else:
            r_prev = radii[-1]
            a = alphas[-1]
            if c3 is None:
                func = lambda u, nu: (obj.last_term_plain(a, r_prev, math.exp(u), nu)
                                      + obj.nu_term(nu, a, p.mode))
            else:
                func = lambda u, nu: (obj.last_term_lifted(a, r_prev, math.exp(u), nu, c3)
                                      + obj.nu_term(nu, a, p.mode))
            start = self.warm.get(i, (math.log(max(0.5 * r_prev, 0.1)), 0.5))
            prob = _LayerProblem(func, lambda u: 0.0, NU_MAX * max(1.0, r_prev**2), start)
        (u, y), val = prob.solve()
        self.warm[i] = (u, y)
        return val, math.exp(u), y

    def value(self, radii):
        self.evaluations += 1
        parts = [self.layer(i, radii) for i in range(self.profile.layers)]
        total = sum(p[0] for p in parts)
        return total, parts

    def constant(self):
        if self.c3 is None:
            return -1.0
        return obj.lifted_constant(self.c3, self.printed)

    def variables(self, radii, parts):
        l = self.profile.layers
        return SaddleVariables(r=tuple(radii[1:]), gamma_bar=tuple(p[1] for p in parts),
                               gamma=tuple(p[2] for p in parts[:l - 1]), nu=max(parts[-1][2], 0.0),
                               c3=self.c3)


def _default_radii(l):
    # table optima sit near r_1 = 1.77 with roughly doubling radii
    return [1.77 * 2.0**k for k in range(l - 1)]


class _BelowFloor(Exception):
    def __init__(self, logr):
        self.logr = logr


def _minimise_radii(asm, start_logr, config, rng, floor=None):
    """Multistart Nelder-Mead over log radii.

    With ``floor`` set, the search stops at the first radii whose value is
    below it; the minimum is then known to be below ``floor`` too.
    """
    l = asm.profile.layers
    if l == 1:
        total, parts = asm.value((1.0,))
        return (1.0,), total + asm.constant(), parts, True
    shift = asm.constant()

    def f(logr):
        total, _ = asm.value((1.0,) + tuple(np.exp(logr)))
        if floor is not None and total + shift < floor:
            raise _BelowFloor(np.array(logr))
        return total if math.isfinite(total) else 1e300

    starts = [np.asarray(start_logr, float)]
    for _ in range(config.multistarts - 1):
        starts.append(starts[0] + rng.normal(scale=0.25, size=l - 1))
    bounds = [tuple(np.log(R_RANGE))] * (l - 1)
    best = None
    warm0 = dict(asm.warm)
    for s in starts:
        asm.warm = dict(warm0)
        try:
            res = optimize.minimize(f, np.clip(s, *bounds[0]), method="Nelder-Mead", bounds=bounds,
                                    options={"xatol": config.var_tol * 0.1, "fatol": config.objective_tol * 1e-4,
                                             "maxiter": config.max_iters, "maxfev": 2 * config.max_iters})
        except _BelowFloor as hit:
            radii = (1.0,) + tuple(np.exp(hit.logr))
            total, parts = asm.value(radii)
            return radii, total + shift, parts, True
        # ties broken by start order (lowest replica index wins)
        if best is None or res.fun < best[0].fun - 1e-13:
            best = (res, dict(asm.warm))
    res, asm.warm = best
    radii = (1.0,) + tuple(np.exp(res.x))
    total, parts = asm.value(radii)
    return radii, total + asm.constant(), parts, bool(res.success)


def _breakdown(profile, vars, grid, printed):
    return obj.evaluate(profile, vars, grid, printed)


def _stationarity(profile, vars, grid, printed, h=1e-5):
    """Largest |partial derivative| of the objective over the free variables.

    Steps are relative for the positive variables.  ``nu`` pinned at zero is
    only checked for a nonpositive slope.
    """
    base = dict(r=list(vars.r), gamma_bar=list(vars.gamma_bar), gamma=list(vars.gamma), nu=vars.nu, c3=vars.c3)

    def at(key, j, value):
        d = {k: (list(v) if isinstance(v, list) else v) for k, v in base.items()}
        if key == "nu":
            d["nu"] = value
        else:
            d[key][j] = value
        return obj.evaluate(profile, SaddleVariables(**d), grid, printed).total

    worst = 0.0
    try:
        for key in ("r", "gamma_bar", "gamma", "nu"):
            for j in range(1 if key == "nu" else len(base[key])):
                x = base[key] if key == "nu" else base[key][j]
                step = h * max(abs(x), 1e-3) if key in ("r", "gamma_bar") else h
                if key == "nu" and x < step:
                    slope = (at(key, j, x + step) - at(key, j, x)) / step
                    worst = max(worst, slope)
                    continue
                worst = max(worst, abs(at(key, j, x + step) - at(key, j, x - step)) / (2 * step))
    except (DomainError, ValueError):
        return math.nan
    return worst


def _solve_fixed_c3(profile, c3, config, start_logr, grid, printed, rng, warm=None, floor=None):
    asm = _Assembler(profile, c3=c3, grid=grid, printed_gamma_sph=printed)
    if warm:
        asm.warm.update(warm)
    radii, value, parts, ok = _minimise_radii(asm, start_logr, config, rng, floor)
    return asm, radii, value, parts, ok


def saddle_solve(profile, method=Method.PLAIN, config=None, start=None, grid=None,
                 printed_gamma_sph=False, c3=None, floor=None):
    """Approximate the min-max saddle of the objective for a fixed profile.

    Parameters
    ----------
    profile : NetworkProfile
    method : Method or str
        ``plain`` or ``lifted``.  Lifted runs an outer maximisation over c3
        unless ``c3`` is given.
    start : SaddleVariables, optional
        Warm start; its radii seed the simplex and its (gamma_bar, gamma, nu)
        seed the layer Newton solves.
    floor : float, optional
        Stop as soon as the value drops below ``floor``.  Only the sign is
        then meaningful, which is all a root search needs far from the root.
    """
    method = Method.parse(method)
    config = config or SolverConfig()
    rng = np.random.default_rng(config.rng_seed)
    l = profile.layers
    start_logr = np.log(start.r) if start is not None and start.r else np.log(_default_radii(l))
    warm = None
    if start is not None and start.layers == l:
        ys = list(start.gamma) + [start.nu]
        warm = {i: (math.log(gb), y) for i, (gb, y) in enumerate(zip(start.gamma_bar, ys))}

    if method is Method.PLAIN:
        asm, radii, value, parts, ok = _solve_fixed_c3(profile, None, config, start_logr, grid,
                                                       printed_gamma_sph, rng, warm, floor)
        evals = asm.evaluations
    else:
        evals = 0
        cache = {}

        def inner(c):
            nonlocal evals, start_logr, warm
            sub = replace(config, multistarts=1) if cache else config
            out = _solve_fixed_c3(profile, c, sub, start_logr, grid, printed_gamma_sph,
                                  np.random.default_rng(config.rng_seed), warm)
            evals += out[0].evaluations
            cache[c] = out
            start_logr = np.log(out[1][1:]) if l > 1 else start_logr
            warm = dict(out[0].warm)
            return out[2]

        if c3 is not None:
            best_c3 = float(c3)
            inner(best_c3)
        else:
            lo, hi = C3_RANGE
            if start is not None and start.c3:
                # a warm c3 narrows the search; fall back to the full range if it lands on an edge
                lo, hi = max(lo, start.c3 / 3.0), min(hi, start.c3 * 3.0)

            def search(lo, hi):
                res = optimize.minimize_scalar(lambda c: -inner(c), bounds=(lo, hi), method="bounded",
                                               options={"xatol": config.c3_tol, "maxiter": 200})
                c = float(res.x)
                if c not in cache:
                    inner(c)
                return c

            best_c3 = search(lo, hi)
            edge = 2 * config.c3_tol
            if (lo > C3_RANGE[0] and best_c3 - lo < edge) or (hi < C3_RANGE[1] and hi - best_c3 < edge):
                best_c3 = search(*C3_RANGE)
        asm, radii, value, parts, ok = cache[best_c3]

    vars = asm.variables(radii, parts)
    bd = _breakdown(profile, vars, grid, printed_gamma_sph)
    stat = _stationarity(profile, vars, grid, printed_gamma_sph)
    return SaddleReport(vars=vars, breakdown=bd, converged=ok, stationarity=stat, evaluations=evals)


# --- capacity root finding ------------------------------------------------------

def _interior(vars, margin=1.01):
    lo, hi = R_RANGE
    return all(lo * margin < r < hi / margin for r in vars.r)


def _nearest_start(history, alpha):
    if not history:
        return None
    return min(history, key=lambda item: abs(item[0] - alpha))[1]


def _extend_start(vars, l):
    """Extend a (l-1)-layer optimum to l layers: new radius doubles, gamma_bar repeats."""
    if vars is None or vars.layers == l:
        return vars
    r = list(vars.r)
    gb = list(vars.gamma_bar)
    gam = list(vars.gamma)
    while len(gb) < l:
        r.append(2.0 * (r[-1] if r else 1.77 / 2.0))
        gam.append(gam[-1] if gam else 0.3)
        gb.append(gb[-1])
    return SaddleVariables(r=r, gamma_bar=gb, gamma=gam, nu=vars.nu, c3=vars.c3)


def capacity_root(prefix_alphas, mode=InjectivityMode.WEAK, method=Method.PLAIN, config=None,
                  start=None, grid=None, printed_gamma_sph=False):
    """Locate the last-layer expansion where the saddle value crosses zero.

    The saddle value is negative below the bound and positive above it.  The
    bracket starts at ``[a, factor * a]`` with ``a = max(prefix[-1], 1)`` and
    is widened once if no sign change is found; Brent's method then refines
    the crossing, re-solving the saddle at every probe from the nearest
    previously solved probe.
    """
    mode = InjectivityMode.parse(mode)
    method = Method.parse(method)
    config = config or SolverConfig()
    prefix = tuple(float(a) for a in prefix_alphas)
    l = len(prefix) + 1
    history = []
    if start is not None:
        history.append((float("nan"), _extend_start(start, l)))
    probe_config = replace(config, multistarts=1)
    count = 0

    def phi(alpha, cfg=probe_config, floor=PROBE_FLOOR):
        nonlocal count
        count += 1
        guess = _nearest_start([h for h in history if math.isfinite(h[0])], alpha) or (history[0][1] if history else None)
        rep = saddle_solve(NetworkProfile(prefix + (alpha,), mode), method, cfg, start=guess, grid=grid,
                           printed_gamma_sph=printed_gamma_sph, floor=floor)
        # optima pinned to the radius box are poor warm starts
        if _interior(rep.vars):
            history.append((alpha, rep.vars))
        log.debug("probe alpha=%.10g value=%.3e", alpha, rep.value)
        return rep

    lo = max(prefix[-1] if prefix else 1.0, 1.0)
    hi = config.alpha_bracket_factor * lo
    if method is Method.LIFTED:
        # the lifted value dominates the plain one (its c3 -> 0 limit), so any
        # alpha above the plain root is already on the positive side
        plain = capacity_root(prefix, mode, Method.PLAIN, probe_config, start=start, grid=grid)
        count += plain.probes
        hi = min(hi, LIFTED_MARGIN * plain.alpha_bound)
        lo = max(lo, plain.alpha_bound / 1.05)
        if start is None:
            history.append((float("nan"), plain.vars_at_opt))
    f_lo = phi(lo).value
    f_hi = phi(hi).value
    if not (f_lo < 0 < f_hi):
        log.info("no sign change on [%g, %g] (%.3g, %.3g); widening once", lo, hi, f_lo, f_hi)
        if f_lo >= 0:
            lo = lo / config.alpha_bracket_factor
            f_lo = phi(lo).value
        if f_hi <= 0:
            hi = hi * config.alpha_bracket_factor
            f_hi = phi(hi).value
        if not (f_lo < 0 < f_hi):
            raise NoSignChange(f"saddle value has no sign change on [{lo}, {hi}]: ({f_lo:.4g}, {f_hi:.4g})")

    xtol = min(config.var_tol, config.objective_tol)
    root = optimize.brentq(lambda a: phi(a).value, lo, hi, xtol=xtol, rtol=1e-14, maxiter=200)
    final = phi(root, config, None)
    delta = 10.0 * config.var_tol
    cert = (phi(root - delta).value, phi(root + delta).value)
    converged = final.converged and abs(final.value) <= max(config.objective_tol, 1e-3 * delta) and cert[0] < 0 < cert[1]
    last_prev = prefix[-1] if prefix else 1.0
    return CapacityResult(alpha_bound=float(root), vars_at_opt=final.vars, residual=abs(final.value), mode=mode,
                          method=method, relative_expansion=float(root) / last_prev, prefix=prefix,
                          breakdown=final.breakdown, converged=converged, probes=count, certificate=cert)


def minimal_sequence(max_layers, alpha1, mode=InjectivityMode.WEAK, method=Method.PLAIN, config=None,
                     grid=None, printed_gamma_sph=False):
    """Minimally admissible expansions: each layer's bound becomes the next prefix entry.

    ``alpha1`` (the single-layer capacity) is an input; layer 1 is reported as
    supplied, with no saddle variables.
    """
    mode = InjectivityMode.parse(mode)
    method = Method.parse(method)
    if max_layers < 1:
        raise ValueError("max_layers must be >= 1")
    alpha1 = float(alpha1)
    results = [CapacityResult(alpha_bound=alpha1, vars_at_opt=None, residual=0.0, mode=mode, method=method,
                              relative_expansion=alpha1)]
    prefix = [alpha1]
    start = None
    for l in range(2, max_layers + 1):
        res = capacity_root(prefix, mode, method, config, start=start, grid=grid,
                            printed_gamma_sph=printed_gamma_sph)
        log.info("layer %d: alpha=%.6g expansion=%.6g", l, res.alpha_bound, res.relative_expansion)
        results.append(res)
        prefix.append(res.alpha_bound)
        start = res.vars_at_opt
    return results
