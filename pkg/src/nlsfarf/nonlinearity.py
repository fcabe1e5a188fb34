"""Catalog of nonlinear potentials ``f`` with ``f(1) = 0``.

Each member provides ``f``, ``f'`` and the potential ``F(rho) = int_1^rho f``
in closed form.  Analyzers check the Kato growth bounds, the defocusing sign
``f'(1) > 0`` and the root / sign structure of ``F``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "NonlinearitySpec",
    "KatoReport",
    "PotentialStructure",
    "gp",
    "power",
    "competing",
    "cubic_quintic",
    "saturated",
    "exponential",
    "transiting",
    "logarithmic",
    "zero",
    "eval_f",
    "eval_f_prime",
    "eval_F",
    "eval_F_quad",
    "check_kato",
    "analyze_potential",
    "nonlinear_phase",
    "spec_from_mapping",
    "CATALOG_PARAMS",
]

# kind -> ordered parameter names with defaults (None = required)
CATALOG_PARAMS: dict[str, dict[str, float | None]] = {
    "gp": {},
    "power": {"lam": 1.0, "alpha": None},
    "competing": {"a1": 1.0, "a2": None, "alpha1": None, "alpha2": None},
    "cubic_quintic": {"alpha1": None, "alpha3": None, "alpha5": None},
    "saturated": {"gamma": None},
    "exponential": {"gamma": None},
    "transiting": {"a": None, "gamma": None},
    "logarithmic": {},
    "zero": {},
}


@dataclass(frozen=True)
class NonlinearitySpec:
    kind: str
    params: tuple[tuple[str, float], ...] = ()
    rho0: float = 1.0

    def __post_init__(self):
        if self.kind not in CATALOG_PARAMS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.rho0 != 1.0:
            raise ValueError("rho0 is fixed at 1")
        names = {n for n, _ in self.params}
        allowed = set(CATALOG_PARAMS[self.kind])
        if names - allowed:
            raise ValueError(f"{self.kind}: unknown parameters {sorted(names - allowed)}")
        if self.kind == "power":
            if self["lam"] not in (-1.0, 1.0):
                raise ValueError("power: lam must be +1 or -1")
            if self["alpha"] <= 0:
                raise ValueError("power: alpha must be positive")
        if self.kind in ("competing",):
            if self["alpha1"] <= 0 or self["alpha2"] <= 0:
                raise ValueError("competing: exponents must be positive")
        if self.kind in ("saturated", "exponential", "transiting") and self["gamma"] <= 0:
            raise ValueError(f"{self.kind}: gamma must be positive")
        f1 = float(eval_f(self, 1.0))
        if abs(f1) > 1e-12:
            raise ValueError(f"{self.kind}: f(1) = {f1!r}, the far-field density must be a root")

    def __getitem__(self, name: str) -> float:
        for n, v in self.params:
            if n == name:
                return v
        default = CATALOG_PARAMS[self.kind].get(name)
        if default is None:
            raise KeyError(name)
        return default

    @property
    def alpha_growth(self) -> float:
        """Natural growth exponent for the Kato bound."""
        k = self.kind
        if k == "power":
            return self["alpha"]
        if k == "competing":
            return max(self["alpha1"], self["alpha2"])
        if k == "cubic_quintic":
            return 2.0 if self["alpha5"] != 0 else 1.0
        if k == "logarithmic":
            return 1.5
        return 1.0

    def is_subcritical(self, dim: int) -> bool:
        """Energy-subcritical growth: any alpha in 2D, alpha < 2 in 3D."""
        return dim != 3 or self.alpha_growth < 2.0

    def to_text(self) -> str:
        lines = [f"kind = {self.kind}"]
        lines += [f"{n} = {v!r}" for n, v in self.params]
        return "\n".join(lines)

    def label(self) -> str:
        if not self.params:
            return self.kind
        inner = ", ".join(f"{n}={v:g}" for n, v in self.params)
        return f"{self.kind}({inner})"


def _make(kind: str, **params) -> NonlinearitySpec:
    table = CATALOG_PARAMS[kind]
    unknown = sorted(set(params) - set(table))
    if unknown:
        raise ValueError(f"{kind}: unknown parameters {unknown}")
    # defaults are filled in so that equal specs compare and hash equal
    items = tuple(
        (n, float(params[n] if params.get(n) is not None else d))
        for n, d in table.items()
        if params.get(n) is not None or d is not None
    )
    return NonlinearitySpec(kind, items)


def gp() -> NonlinearitySpec:
    return _make("gp")


def power(lam: float, alpha: float) -> NonlinearitySpec:
    return _make("power", lam=lam, alpha=alpha)


def competing(a1: float, a2: float, alpha1: float, alpha2: float) -> NonlinearitySpec:
    return _make("competing", a1=a1, a2=a2, alpha1=alpha1, alpha2=alpha2)


def cubic_quintic(alpha1: float, alpha3: float, alpha5: float) -> NonlinearitySpec:
    return _make("cubic_quintic", alpha1=alpha1, alpha3=alpha3, alpha5=alpha5)


def saturated(gamma: float) -> NonlinearitySpec:
    return _make("saturated", gamma=gamma)


def exponential(gamma: float) -> NonlinearitySpec:
    return _make("exponential", gamma=gamma)


def transiting(a: float, gamma: float) -> NonlinearitySpec:
    return _make("transiting", a=a, gamma=gamma)


def logarithmic() -> NonlinearitySpec:
    return _make("logarithmic")


def zero() -> NonlinearitySpec:
    """``f = 0``: the free equation, kept for testing integrators."""
    return _make("zero")


def spec_from_mapping(kind: str, params: Mapping[str, float]) -> NonlinearitySpec:
    if kind not in CATALOG_PARAMS:
        raise ValueError(f"unknown nonlinearity kind {kind!r}")
    missing = [n for n, d in CATALOG_PARAMS[kind].items() if d is None and n not in params]
    if missing:
        raise ValueError(f"{kind}: missing parameters {missing}")
    return _make(kind, **params)


def _rho(rho, allow_zero=True):
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0):
        raise ValueError("density must be non-negative")
    if not allow_zero and np.any(r == 0):
        raise ValueError("density must be positive")
    return r


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


def eval_f(spec: NonlinearitySpec, rho):
    k = spec.kind
    r = _rho(rho, allow_zero=(k != "logarithmic"))
    if k == "gp":
        out = r - 1.0
    elif k == "power":
        out = spec["lam"] * (r ** spec["alpha"] - 1.0)
    elif k == "competing":
        out = spec["a1"] * (r ** spec["alpha1"] - 1.0) - spec["a2"] * (r ** spec["alpha2"] - 1.0)
    elif k == "cubic_quintic":
        out = spec["alpha5"] * r**2 - spec["alpha3"] * r + spec["alpha1"]
    elif k == "saturated":
        g = spec["gamma"]
        out = r / (1.0 + g * r) - 1.0 / (1.0 + g)
    elif k == "exponential":
        g = spec["gamma"]
        out = math.exp(-g) - np.exp(-g * r)
    elif k == "transiting":
        # recentred so that f(1) = 0
        a, g = spec["a"], spec["gamma"]
        out = 2.0 * r * (1.0 + a * np.tanh(g * (r**2 - 1.0))) - 2.0
    elif k == "logarithmic":
        out = r * np.log(r)
    else:
        out = np.zeros_like(r)
    return _out(out, rho)


def eval_f_prime(spec: NonlinearitySpec, rho):
    k = spec.kind
    r = _rho(rho, allow_zero=False)
    if k == "gp":
        out = np.ones_like(r)
    elif k == "power":
        a = spec["alpha"]
        out = spec["lam"] * a * r ** (a - 1.0)
    elif k == "competing":
        a1, a2 = spec["alpha1"], spec["alpha2"]
        out = spec["a1"] * a1 * r ** (a1 - 1.0) - spec["a2"] * a2 * r ** (a2 - 1.0)
    elif k == "cubic_quintic":
        out = 2.0 * spec["alpha5"] * r - spec["alpha3"]
    elif k == "saturated":
        out = 1.0 / (1.0 + spec["gamma"] * r) ** 2
    elif k == "exponential":
        g = spec["gamma"]
        out = g * np.exp(-g * r)
    elif k == "transiting":
        a, g = spec["a"], spec["gamma"]
        u = g * (r**2 - 1.0)
        out = 2.0 * (1.0 + a * np.tanh(u)) + 4.0 * a * g * r**2 / np.cosh(u) ** 2
    elif k == "logarithmic":
        out = np.log(r) + 1.0
    else:
        out = np.zeros_like(r)
    return _out(out, rho)


def _power_potential(r, a):
    # int_1^r (s^a - 1) ds
    return (r ** (a + 1.0) - 1.0) / (a + 1.0) - (r - 1.0)


def eval_F(spec: NonlinearitySpec, rho):
    """Closed-form ``F(rho) = int_1^rho f(r) dr``."""
    k = spec.kind
    r = _rho(rho)
    if k == "gp":
        out = 0.5 * (r - 1.0) ** 2
    elif k == "power":
        out = spec["lam"] * _power_potential(r, spec["alpha"])
    elif k == "competing":
        out = spec["a1"] * _power_potential(r, spec["alpha1"]) - spec["a2"] * _power_potential(
            r, spec["alpha2"]
        )
    elif k == "cubic_quintic":
        out = (
            spec["alpha5"] * (r**3 - 1.0) / 3.0
            - spec["alpha3"] * (r**2 - 1.0) / 2.0
            + spec["alpha1"] * (r - 1.0)
        )
    elif k == "saturated":
        g = spec["gamma"]
        out = (r - 1.0) / g - np.log((1.0 + g * r) / (1.0 + g)) / g**2 - (r - 1.0) / (1.0 + g)
    elif k == "exponential":
        g = spec["gamma"]
        out = math.exp(-g) * (r - 1.0) + (np.exp(-g * r) - math.exp(-g)) / g
    elif k == "transiting":
        a, g = spec["a"], spec["gamma"]
        u = g * (r**2 - 1.0)
        # log cosh without overflow
        lc = np.abs(u) + np.log1p(np.exp(-2.0 * np.abs(u))) - math.log(2.0)
        out = (r**2 - 1.0) + a * lc / g - 2.0 * (r - 1.0)
    elif k == "logarithmic":
        with np.errstate(divide="ignore", invalid="ignore"):
            rlog = np.where(r > 0, r**2 * np.log(np.where(r > 0, r, 1.0)), 0.0)
        out = 0.5 * rlog - 0.25 * r**2 + 0.25
    else:
        out = np.zeros_like(r)
    return _out(out, rho)


def eval_F_quad(spec: NonlinearitySpec, rho: float) -> float:
    """Adaptive Gauss-Kronrod evaluation of ``int_1^rho f``; the independent
    route used to cross-check :func:`eval_F`."""
    rho = float(_rho(rho))
    if rho == 1.0:
        return 0.0
    lo = rho
    if spec.kind == "logarithmic" and rho == 0.0:
        lo = 0.0

    def integrand(r):
        if r == 0.0 and spec.kind == "logarithmic":
            return 0.0
        return eval_f(spec, r)

    val, err = integrate.quad(integrand, 1.0, lo, epsabs=1e-13, epsrel=1e-13, limit=200)
    if not np.isfinite(val) or err > 1e-9 * max(1.0, abs(val)):
        raise ArithmeticError(f"quadrature of F did not converge (err={err:g})")
    return float(val)


@dataclass
class KatoReport:
    alpha_used: float
    max_ratio_f: float
    max_ratio_rho_fprime: float
    passed: bool
    growth_f: float = 0.0
    growth_rho_fprime: float = 0.0
    notes: list[str] = field(default_factory=list)


def _tail_slope(rho, ratio):
    # log10 growth of the ratio over the last decade of the sample range
    top = ratio[-1]
    j = int(np.searchsorted(rho, rho[-1] / 10.0))
    base = ratio[min(j, len(ratio) - 1)]
    if base <= 0 or top <= 0:
        return 0.0
    return float(np.log10(top / base) / np.log10(rho[-1] / rho[min(j, len(rho) - 1)]))


def check_kato(
    spec: NonlinearitySpec,
    alpha: float | None = None,
    rho_max: float = 1e4,
    n_samples: int = 4000,
    growth_slope: float = 0.5,
) -> KatoReport:
    """Sample ``|f|/(1+rho^alpha)`` and ``|rho f'|/(1+rho^alpha)`` on a log grid.

    The bound is existential, so the sup ratios are reported as evidence.
    ``passed`` is false when a ratio is non-finite or still grows over the
    last decade with log-slope above ``growth_slope``.
    """
    if rho_max <= 1.0:
        raise ValueError("rho_max must exceed 1")
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    a = spec.alpha_growth if alpha is None else float(alpha)
    rho = np.geomspace(1e-8, rho_max, n_samples)
    with np.errstate(over="ignore", invalid="ignore"):
        rf = np.abs(eval_f(spec, rho)) / (1.0 + rho**a)
        rfp = np.abs(rho * eval_f_prime(spec, rho)) / (1.0 + rho**a)
    notes = []
    if spec.kind == "logarithmic":
        notes.append("f'(rho) = log(rho)+1 is unbounded as rho -> 0; f(0) = 0 by the limit convention")
    if spec.kind == "power" and spec["alpha"] < 1.0:
        notes.append("f' is singular at rho = 0 (alpha < 1); rho f' stays bounded")
    finite = bool(np.all(np.isfinite(rf)) and np.all(np.isfinite(rfp)))
    gf = _tail_slope(rho, rf) if finite else float("inf")
    gfp = _tail_slope(rho, rfp) if finite else float("inf")
    passed = finite and gf <= growth_slope and gfp <= growth_slope
    return KatoReport(
        alpha_used=a,
        max_ratio_f=float(np.max(rf)),
        max_ratio_rho_fprime=float(np.max(rfp)),
        passed=passed,
        growth_f=gf,
        growth_rho_fprime=gfp,
        notes=notes,
    )


@dataclass
class PotentialStructure:
    spec: NonlinearitySpec
    rho_max: float
    f_prime_one: float
    defocusing: bool
    roots_of_f: list[float]
    tangential_roots: list[float]
    rho2: float | None
    F_positive_above_one: bool
    convexity_window_delta: float | None
    C1: float | None


def _roots(func, lo, hi, n=10_000):
    grid = np.concatenate([[0.0], np.geomspace(max(lo, 1e-10), hi, n)]) if lo == 0 else np.geomspace(lo, hi, n)
    vals = func(grid)
    roots, tangential = [], []
    for i in range(len(grid) - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(float(grid[i]))
        elif a * b < 0:
            roots.append(float(optimize.brentq(func, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-15)))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    # near-zero local minima of |f| without a sign change
    av = np.abs(vals)
    for i in range(1, len(grid) - 1):
        if av[i] < 1e-10 and av[i] <= av[i - 1] and av[i] <= av[i + 1]:
            if not any(abs(grid[i] - r) < 1e-6 * max(1.0, r) for r in roots):
                tangential.append(float(grid[i]))
    return sorted(roots), tangential


def analyze_potential(spec: NonlinearitySpec, rho_max: float = 16.0) -> PotentialStructure:
    if rho_max < 4.0:
        raise ValueError("rho_max must be at least 4")
    fp1 = float(eval_f_prime(spec, 1.0))
    if abs(fp1) < 1e-10:
        raise ValueError("f'(1) = 0: the quadratic window around rho = 1 is degenerate")

    def f_safe(r):
        r = np.asarray(r, dtype=float)
        if spec.kind == "logarithmic":
            return np.where(r > 0, eval_f(spec, np.where(r > 0, r, 1.0)), 0.0)
        return eval_f(spec, r)

    roots, tangential = _roots(f_safe, 0.0, rho_max)

    below = np.linspace(0.0, 1.0, 20_001)[:-1]
    Fb = eval_F(spec, below)
    neg = np.nonzero(Fb < 0)[0]
    rho2 = None
    # a sign change inside [0, 1) is needed; F < 0 all the way up to 1 has no such root
    if neg.size and neg[-1] < len(below) - 1:
        i = neg[-1]
        rho2 = float(optimize.brentq(lambda r: eval_F(spec, r), below[i], below[i + 1] if i + 1 < len(below) else 1.0 - 1e-12))
        if rho2 >= 1.0:
            rho2 = None

    above = np.linspace(1.0, rho_max, 20_001)[1:]
    F_pos = bool(np.all(eval_F(spec, above) > 0))

    delta, C1 = None, None
    if fp1 > 0:
        cap = max(4.0 / fp1, fp1)
        for d in np.arange(0.5, 0.0005, -0.001):
            # closed interval, so the constant also covers the edges
            r = np.linspace(1.0 - d, 1.0 + d, 2 * int(round(d / 1e-3)) + 1)
            r = r[np.abs(r - 1.0) > 1e-9]
            if r.size == 0:
                continue
            q = eval_F(spec, r) / (r - 1.0) ** 2
            if np.any(q <= 0):
                continue
            c = float(max(np.max(q), np.max(1.0 / q)))
            if c <= cap:
                delta, C1 = float(round(d, 6)), c
                break

    return PotentialStructure(
        spec=spec,
        rho_max=rho_max,
        f_prime_one=fp1,
        defocusing=fp1 > 0,
        roots_of_f=roots,
        tangential_roots=tangential,
        rho2=rho2,
        F_positive_above_one=F_pos,
        convexity_window_delta=delta,
        C1=C1,
    )


def nonlinear_phase(spec: NonlinearitySpec, rho, dt: float):
    """``exp(-i f(rho) dt)``: exact flow of ``i psi_t = f(|psi|^2) psi``."""
    return np.exp(-1j * dt * eval_f(spec, rho))


def _warn_supercritical(spec: NonlinearitySpec, dim: int):
    if not spec.is_subcritical(dim):
        warnings.warn(f"{spec.label()} is not energy-subcritical in {dim}D", stacklevel=3)
