"""Rod activities, normalized renewal weights and the 1D convergence bounds.

The lattice model gives every rod of length ``2 <= k <= N`` activity ``q`` and
every vacancy activity ``2q``.  Once vacancies are split into a horizontal and
a vertical species, a 1D segment of length ``n`` carries the partition function

    Z(n) = sum over compositions (k_1, ..., k_m) of n of q**m,   k_i <= N.

Tilting by ``s**n`` with ``q * sum_{k<=N} s**k = 1`` turns the per-part weights
into a probability law ``f_k = q s**k`` and ``Z(n) = g_n / s**n`` where ``g`` is
the renewal sequence of ``f``.  Everything in this module works with the tilted
(normalized) weights.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any

import mpmath
import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp


class Unbounded(enum.Enum):
    INFINITE = "inf"

    def __str__(self) -> str:
        return self.value


INFINITE = Unbounded.INFINITE

def parse_max_length(text: str | int | Unbounded) -> int | Unbounded:
    """Parse ``"inf"`` or an integer rod-length cap."""
    if isinstance(text, Unbounded):
        return text
    if isinstance(text, str) and text.strip().lower() in ("inf", "infinite", "infinity"):
        return INFINITE
    return int(text)


class DomainError(ValueError):
    """A generating function was evaluated outside its disc of analyticity."""


@dataclass(frozen=True)
class ActivityProfile:
    """Rod activities of the lattice model: w(1) = 2q, w(k) = q for 2 <= k <= N."""

    q: float
    N: int | Unbounded = INFINITE

    def __post_init__(self):
        if not (self.q > 0 and math.isfinite(self.q)):
            raise ValueError(f"fugacity must be positive and finite, got {self.q}")
        if not isinstance(self.N, Unbounded):
            if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 2:
                raise ValueError(f"N must be an integer >= 2 or INFINITE, got {self.N}")
            object.__setattr__(self, "N", int(self.N))

    @property
    def bounded(self) -> bool:
        return not isinstance(self.N, Unbounded)

    def max_length(self, cap: int | None = None) -> int | None:
        """Largest admissible rod length once a geometric cap is applied."""
        if self.bounded:
            return self.N if cap is None else min(self.N, cap)
        return cap

    def model_weight(self, k: int) -> float:
        if k < 1:
            raise ValueError("rod length must be >= 1")
        if k == 1:
            return 2.0 * self.q
        if self.bounded and k > self.N:
            return 0.0
        return self.q

    def log_model_weights(self, kmax: int) -> np.ndarray:
        """log w(k) for k = 0..kmax; entry 0 and inadmissible lengths are -inf."""
        out = np.full(kmax + 1, -np.inf)
        if kmax >= 1:
            out[1] = math.log(2.0 * self.q)
        top = kmax if not self.bounded else min(kmax, self.N)
        out[2 : top + 1] = math.log(self.q)
        return out

    def label(self) -> str:
        return f"q={self.q:g}, N={self.N}"


def _log_geometric_mass(p: float, n: int) -> float:
    """log sum_{j=0}^{n-1} p**j for p > 0."""
    if p == 1.0:
        return math.log(n)
    if p < 1.0:
        return math.log1p(-p**n) - math.log1p(-p)
    return n * math.log(p) + math.log1p(-(p ** (-n))) - math.log(p - 1.0)


@dataclass(frozen=True, eq=False)
class NormalizedWeights:
    """Probability weights f_1, f_2, ... together with their reference geometric law.

    Two shapes are supported.  With ``values`` unset the weights are the
    truncated, renormalized geometric law ``f_k = p**(k-1) / sum_{j<N} p**j``
    (``support=None`` meaning the untruncated law ``q p**(k-1)``); this is the
    form taken by the lattice model and admits closed forms for everything
    below.  With ``values`` set, ``f`` is an explicit finite vector and ``p`` only
    fixes the reference geometric law used for the perturbation ``eps``.
    """

    p: float
    support: int | None = None
    values: np.ndarray | None = None
    tilt: float | None = field(default=None)

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("geometric ratio must be positive")
        if self.values is not None:
            vals = np.asarray(self.values, dtype=float)
            if vals.ndim != 1 or vals.size == 0:
                raise ValueError("explicit weights must be a non-empty vector")
            if np.any(vals < 0):
                raise ValueError("weights must be non-negative")
            if abs(vals.sum() - 1.0) > 1e-12:
                raise ValueError(f"weights must sum to 1, got {vals.sum()!r}")
            if not self.p < 1:
                raise ValueError("reference ratio must lie in (0, 1)")
            object.__setattr__(self, "values", vals)
            object.__setattr__(self, "support", int(vals.size))
        elif self.support is None:
            if not self.p < 1:
                raise ValueError("an unbounded geometric law needs p < 1")
        elif self.support < 1:
            raise ValueError("support must be >= 1")

    @property
    def q(self) -> float:
        """Success probability of the reference geometric law (1 - p)."""
        return 1.0 - self.p

    @property
    def has_reference(self) -> bool:
        return 0.0 < self.p < 1.0

    @property
    def is_geometric(self) -> bool:
        return self.values is None and self.support is None

    def f_array(self, n: int) -> np.ndarray:
        """f_0..f_n with f_0 = 0."""
        k = np.arange(n + 1)
        if self.values is not None:
            out = np.zeros(n + 1)
            m = min(n, self.support)
            out[1 : m + 1] = self.values[:m]
            return out
        if self.support is None:
            out = self.q * self.p ** np.maximum(k - 1, 0).astype(float)
        else:
            lognorm = _log_geometric_mass(self.p, self.support)
            out = np.exp((k - 1) * math.log(self.p) - lognorm)
            out[k > self.support] = 0.0
        out[0] = 0.0
        return out

    def log_abs_eps(self, k: np.ndarray) -> np.ndarray:
        """log |eps_k| for k >= 1, in closed form where available (-inf for zero)."""
        k = np.asarray(k, dtype=float)
        if not self.has_reference:
            raise ValueError("no reference geometric law (p >= 1)")
        logq, logp = math.log(self.q), math.log(self.p)
        if self.values is not None:
            eps = self.eps_array(int(k.max()))[k.astype(int)]
            with np.errstate(divide="ignore"):
                return np.log(np.abs(eps))
        if self.support is None:
            return np.full(k.shape, -np.inf)
        N = self.support
        inside = logq + (k - 1) * logp + N * logp - math.log1p(-self.p**N)
        outside = logq + (k - 1) * logp
        return np.where(k <= N, inside, outside)

    def eps_array(self, n: int) -> np.ndarray:
        """eps_0..eps_n, eps_k = f_k - q p**(k-1) (eps_0 = 0)."""
        k = np.arange(n + 1)
        geo = self.q * self.p ** np.maximum(k - 1, 0).astype(float)
        geo[0] = 0.0
        if self.values is not None:
            return self.f_array(n) - geo
        if self.support is None:
            return np.zeros(n + 1)
        sign = np.where(k <= self.support, 1.0, -1.0)
        out = sign * np.exp(self.log_abs_eps(np.maximum(k, 1)))
        out[0] = 0.0
        return out

    def tail_array(self, n: int) -> np.ndarray:
        """T_j = sum_{k > j} f_k for j = 0..n."""
        j = np.arange(n + 1, dtype=float)
        if self.values is not None:
            full = np.concatenate([[0.0], self.values])
            tails = np.concatenate([full[::-1].cumsum()[::-1][1:], [0.0]])
            out = np.zeros(n + 1)
            m = min(n, tails.size - 1)
            out[: m + 1] = tails[: m + 1]
            return out
        if self.support is None:
            return self.p**j
        N = self.support
        if self.p == 1.0:
            return np.clip((N - j) / N, 0.0, None)
        if self.p < 1.0:
            out = (self.p**j - self.p**N) / (1.0 - self.p**N)
        else:
            out = (self.p**N - self.p**j) / (self.p**N - 1.0)
        out[j >= N] = 0.0
        return out

    def mean(self) -> float:
        """F'(1) = sum_k k f_k."""
        if self.values is not None:
            return float(np.dot(np.arange(1, self.support + 1), self.values))
        if self.support is None:
            return 1.0 / self.q
        N = self.support
        if 0.0 < self.p < 1.0:
            pn = self.p**N
            return 1.0 / self.q - N * pn / (1.0 - pn)
        f = self.f_array(N)
        return float(np.dot(np.arange(N + 1), f))

    def mp_f(self, n: int) -> list:
        """f_0..f_n as mpf at the current mpmath precision."""
        if self.values is not None:
            vals = [mpmath.mpf(v) for v in self.values]
            total = mpmath.fsum(vals)
            vals = [v / total for v in vals]
            return [mpmath.mpf(0)] + [vals[k - 1] if k <= self.support else mpmath.mpf(0) for k in range(1, n + 1)]
        p = mpmath.mpf(self.p)
        if self.support is None:
            q = 1 - p
            return [mpmath.mpf(0)] + [q * p ** (k - 1) for k in range(1, n + 1)]
        N = self.support
        norm = N if p == 1 else (1 - p**N) / (1 - p)
        return [mpmath.mpf(0)] + [p ** (k - 1) / norm if k <= N else mpmath.mpf(0) for k in range(1, n + 1)]

    def describe(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "q_geo": self.q,
            "support": "inf" if self.support is None else self.support,
            "explicit": self.values is not None,
        }


def truncated_geometric(q_geo: float, N: int | Unbounded | None = None) -> NormalizedWeights:
    """Uniform-rod weights: geometric law with parameter q_geo truncated at N and renormalized."""
    if not 0.0 < q_geo < 1.0:
        raise ValueError(f"geometric parameter must lie in (0, 1), got {q_geo}")
    if N is None or isinstance(N, Unbounded):
        return NormalizedWeights(p=1.0 - q_geo)
    if N < 1:
        raise ValueError("N must be >= 1")
    return NormalizedWeights(p=1.0 - q_geo, support=int(N))


def from_probabilities(f, p: float) -> NormalizedWeights:
    """Explicit finite weight vector f_1..f_K with reference geometric ratio p."""
    return NormalizedWeights(p=p, values=np.asarray(f, dtype=float))


def tilt(profile: ActivityProfile) -> float:
    """The ratio s with q * sum_{k<=N} s**k = 1."""
    q = profile.q
    if not profile.bounded:
        return 1.0 / (1.0 + q)
    N = profile.N
    ks = np.arange(1, N + 1, dtype=float)

    def excess(s):
        return math.log(q) + logsumexp(ks * math.log(s))

    lo = 1.0 / (1.0 + q)
    if excess(lo) >= 0.0:
        # q * sum s**k differs from 1 only below double precision
        return lo
    return brentq(excess, lo, 1.0 / q, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def normalized_weights(profile: ActivityProfile) -> NormalizedWeights:
    """Tilted per-part weights of the vacancy-split 1D segments of a lattice profile.

    For N = inf this is the geometric law with p = 1/(1+q); for finite N it is
    the geometric law with the tilt ratio, truncated at N and renormalized.
    """
    s = tilt(profile)
    if not profile.bounded:
        return NormalizedWeights(p=s, tilt=s)
    return NormalizedWeights(p=s, support=profile.N, tilt=s)


@dataclass(frozen=True, eq=False)
class RenewalSequence:
    weights: NormalizedWeights
    g: np.ndarray
    g_limit: float
    exact: tuple | None = None
    dps: int | None = None

    @property
    def n_max(self) -> int:
        return self.g.size - 1

    @property
    def residuals(self) -> np.ndarray:
        if self.exact is not None:
            g_lim, values = self.exact
            return np.array([float(v - g_lim) for v in values])
        return self.g - self.g_limit

    def residuals_mp(self) -> list:
        if self.exact is None:
            return [mpmath.mpf(float(r)) for r in self.residuals]
        g_lim, values = self.exact
        return [v - g_lim for v in values]


def renewal_sequence(weights: NormalizedWeights, n_max: int = 512, dps: int | None = None) -> RenewalSequence:
    """g_0 = 1, g_n = sum_{k=1}^n f_k g_{n-k}; limit 1/F'(1).

    With ``dps`` set the recursion also runs in mpmath at that many digits and
    the residuals are taken from the high-precision values.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    f = weights.f_array(n_max)
    g = np.empty(n_max + 1)
    g[0] = 1.0
    for n in range(1, n_max + 1):
        g[n] = np.dot(f[1 : n + 1], g[n - 1 :: -1])
    g_limit = 1.0 / weights.mean()
    exact = None
    if dps is not None:
        with mpmath.workdps(dps):
            fm = weights.mp_f(n_max)
            gm = [mpmath.mpf(1)]
            K = n_max if weights.support is None else min(n_max, weights.support)
            for n in range(1, n_max + 1):
                top = min(n, K)
                gm.append(mpmath.fdot(fm[1 : top + 1], [gm[n - k] for k in range(1, top + 1)]))
            if weights.support is None:
                mean = 1 / (1 - mpmath.mpf(weights.p))
            else:
                fs = weights.mp_f(weights.support)
                mean = mpmath.fsum(k * fs[k] for k in range(1, weights.support + 1))
            g_lim = 1 / mean
            exact = (g_lim, tuple(gm))
            g_limit = float(g_lim)
    return RenewalSequence(weights=weights, g=g, g_limit=g_limit, exact=exact, dps=dps)


MAX_ENUMERATION = 24


def composition_oracle(weights: NormalizedWeights, n: int, max_n: int = MAX_ENUMERATION) -> float:
    """Brute-force sum over all 2**(n-1) compositions of n of prod f(k_i).

    Compositions are enumerated as subsets of the n-1 internal cut points.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > max_n:
        raise ValueError(f"n={n} too large to enumerate (limit {max_n})")
    if n == 0:
        return 1.0
    f = weights.f_array(n)
    masks = np.arange(2 ** (n - 1), dtype=np.int64)
    run = np.ones(masks.size, dtype=np.int64)
    prod = np.ones(masks.size)
    for i in range(n - 1):
        cut = ((masks >> i) & 1).astype(bool)
        prod[cut] *= f[run[cut]]
        run[cut] = 1
        run[~cut] += 1
    prod *= f[run]
    return float(prod.sum())


@dataclass(frozen=True)
class GeneratingValues:
    F: complex
    Q: complex
    E: complex
    V: complex


def _domain_radius(weights: NormalizedWeights) -> float:
    return 1.0 / weights.p if weights.has_reference else math.inf


def denominator_ratio(weights: NormalizedWeights, xi) -> np.ndarray:
    """(F(xi) - 1)/(xi - 1) = sum_j T_j xi**j, analytic through xi = 1."""
    xi = np.asarray(xi, dtype=complex)
    if weights.support is None and weights.values is None:
        return 1.0 / (1.0 - weights.p * xi)
    tails = weights.tail_array(weights.support - 1)
    nz = np.nonzero(tails)[0]
    tails = tails[: nz[-1] + 1] if nz.size else tails[:1]
    return np.polyval(tails[::-1], xi)


def eval_generating(weights: NormalizedWeights, xi: complex, rho: float | None = None) -> GeneratingValues:
    """F = sum f_k xi**k, Q = q xi/(1 - p xi), E = F - Q and V = E/(xi - 1) at one point.

    ``rho`` is the radius of the disc on which the values are requested; it
    defaults to 1/p, where the reference geometric generating function has its pole.
    """
    radius = _domain_radius(weights) if rho is None else rho
    xi = complex(xi)
    if not abs(xi) < radius:
        raise DomainError(f"|xi| = {abs(xi):.6g} outside the disc of radius {radius:.6g}")
    p, q = weights.p, weights.q
    Q = q * xi / (1.0 - p * xi)
    if weights.is_geometric:
        return GeneratingValues(F=Q, Q=Q, E=0j, V=0j)
    if weights.values is not None:
        F = complex(np.polyval(np.concatenate([weights.values[::-1], [0.0]]), xi))
        E = F - Q
    else:
        N = weights.support
        pxn = (p * xi) ** N
        c = p**N / (1.0 - p**N)
        F = Q * (1.0 - pxn) / (1.0 - p**N)
        E = c * Q * (1.0 - pxn) - Q * pxn
    V = complex(denominator_ratio(weights, xi)) - 1.0 / (1.0 - p * xi)
    return GeneratingValues(F=complex(F), Q=complex(Q), E=complex(E), V=V)


@dataclass(frozen=True)
class PerturbationParams:
    """A1: |eps_k| <= delta rho**-k;  A2: delta < alpha (rho - 1)**2."""

    rho: float
    delta: float
    alpha: float = 0.01

    def __post_init__(self):
        if not self.rho > 1:
            raise ValueError("rho must exceed 1")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")

    @property
    def R(self) -> float:
        return (1.0 + self.rho) / 2.0

    @property
    def nu(self) -> float:
        return (self.rho - 1.0) / 4.0


def uniform_rod_params(q_geo: float, N: int, alpha: float = 0.01) -> PerturbationParams:
    """rho = 1 + q/(2(1-q)) and delta_N = (1 - q/2)**N."""
    rho = 1.0 + q_geo / (2.0 * (1.0 - q_geo))
    return PerturbationParams(rho=rho, delta=(1.0 - q_geo / 2.0) ** N, alpha=alpha)


def geometric_params(q_geo: float, rho: float | None = None) -> PerturbationParams:
    p = 1.0 - q_geo
    return PerturbationParams(rho=(1.0 + 1.0 / p) / 2.0 if rho is None else rho, delta=0.0)


@dataclass
class Certificate:
    name: str
    params: dict
    observed: float | None
    bound: float | None
    passed: bool
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "params": self.params,
            "observed": self.observed,
            "bound": self.bound,
            "pass": self.passed,
        }
        if self.details:
            out["details"] = self.details
        return out


def c1_constant(q: float, p: float, rho: float) -> float:
    return 12.0 * q * rho * (2.0 + p) / (p * (rho - 1.0) ** 3)


def c2_constant(p: float, rho: float) -> float:
    return 48.0 * rho * (2.0 + p) * (1.0 + p) / (p * (rho - 1.0) ** 4)


def check_a1(weights: NormalizedWeights, params: PerturbationParams) -> Certificate:
    """max_k |eps_k| rho**k / delta <= 1, checked on the full range of k.

    Beyond the support, |eps_k| rho**k is proportional to (p rho)**k, which is
    non-increasing once rho <= 1/p, so k <= support + 1 decides the supremum.
    """
    p_desc = {"rho": params.rho, "delta": params.delta, **weights.describe()}
    if not weights.has_reference:
        return Certificate("A1", p_desc, None, 1.0, False, {"reason": "no reference geometric law"})
    if params.rho > 1.0 / weights.p * (1 + 1e-12):
        return Certificate("A1", p_desc, None, 1.0, False, {"reason": "rho exceeds 1/p"})
    if weights.is_geometric:
        return Certificate("A1", p_desc, 0.0, 1.0, True)
    kmax = weights.support + 1
    k = np.arange(1, kmax + 1)
    log_eps = weights.log_abs_eps(k)
    if params.delta == 0.0:
        worst = float(np.max(log_eps))
        ok = worst == -np.inf
        return Certificate("A1", p_desc, 0.0 if ok else math.inf, 1.0, ok)
    log_ratio = log_eps + k * math.log(params.rho) - math.log(params.delta)
    worst = float(np.max(log_ratio))
    observed = math.exp(min(worst, 700.0))
    return Certificate("A1", p_desc, observed, 1.0, bool(worst <= 1e-12), {"argmax_k": int(k[np.argmax(log_ratio)])})


def check_a2(params: PerturbationParams) -> Certificate:
    """delta < alpha (rho-1)**2, plus the working form 2 delta (1+rho)/(rho-1)**2 < 1/6."""
    rho, delta = params.rho, params.delta
    working = 2.0 * delta * (1.0 + rho) / (rho - 1.0) ** 2
    ok = delta < params.alpha * (rho - 1.0) ** 2 and working < 1.0 / 6.0
    return Certificate(
        "A2",
        {"rho": rho, "delta": delta, "alpha": params.alpha},
        delta,
        params.alpha * (rho - 1.0) ** 2,
        bool(ok),
        {"working_criterion": working, "working_bound": 1.0 / 6.0},
    )


def check_denominator_bound(
    weights: NormalizedWeights,
    params: PerturbationParams,
    samples: int = 4096,
    radii: int = 8,
) -> Certificate:
    """Sampled minimum of |(F(xi)-1)/(xi-1)| over circles of radius up to (1+rho)/2.

    Numerical, not rigorous: the minimum is taken over ``radii`` circles of
    ``samples`` equispaced points each.
    """
    a1, a2 = check_a1(weights, params), check_a2(params)
    desc = {"rho": params.rho, "delta": params.delta, "R": params.R, "samples": samples, "radii": radii}
    if not (a1.passed and a2.passed):
        failed = [c.name for c in (a1, a2) if not c.passed]
        return Certificate("denominator", desc, None, 1.0 / 3.0, False, {"reason": f"precondition failed: {failed}", "kind": "numerical"})
    theta = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    r = params.R * np.arange(1, radii + 1) / radii
    xi = (r[:, None] * np.exp(1j * theta[None, :])).ravel()
    vals = np.abs(denominator_ratio(weights, xi))
    observed = float(vals.min())
    return Certificate("denominator", desc, observed, 1.0 / 3.0, observed >= 1.0 / 3.0, {"kind": "numerical"})


def required_dps(weights: NormalizedWeights, params: PerturbationParams, n_max: int) -> int:
    """Decimal digits needed so rounding stays far below the smallest residual bound."""
    if params.delta == 0.0 or not weights.has_reference:
        return 30
    c1 = c1_constant(weights.q, weights.p, params.rho)
    log10_min = math.log10(c1) + math.log10(params.delta) - n_max * math.log10(params.R)
    return max(30, int(math.ceil(-log10_min)) + 25)


def bound_residuals(seq: RenewalSequence, params: PerturbationParams) -> Certificate:
    """|r_n| <= c1 delta R**-n for 1 <= n <= n_max and sum |r_n| (1+nu)**n <= c2 delta g.

    n = 0 is excluded (r_0 = 1 - g is the boundary term of the recursion).
    The weighted sum is truncated at n_max.
    """
    w = seq.weights
    desc = {"rho": params.rho, "delta": params.delta, "n_max": seq.n_max, "dps": seq.dps}
    if not w.has_reference:
        return Certificate("residuals", desc, None, None, False, {"reason": "no reference geometric law"})
    q, p, rho, delta = w.q, w.p, params.rho, params.delta
    c1, c2 = c1_constant(q, p, rho), c2_constant(p, rho)
    desc.update({"q_geo": q, "p": p, "c1": c1, "c2": c2, "nu": params.nu})
    prec = seq.dps if seq.dps is not None else 30
    with mpmath.workdps(prec):
        r = seq.residuals_mp()[1:]
        R = mpmath.mpf(params.R)
        d = mpmath.mpf(delta)
        first_bad = None
        worst = mpmath.mpf(0)
        for n, rn in enumerate(r, start=1):
            bound = mpmath.mpf(c1) * d * R ** (-n)
            if bound == 0:
                ratio = mpmath.inf if rn != 0 else mpmath.mpf(0)
            else:
                ratio = abs(rn) / bound
            worst = max(worst, ratio)
            if ratio > 1 and first_bad is None:
                first_bad = n
        nu = mpmath.mpf(params.nu)
        wsum = mpmath.fsum(abs(rn) * (1 + nu) ** n for n, rn in enumerate(r, start=1))
        g_lim = seq.exact[0] if seq.exact is not None else mpmath.mpf(seq.g_limit)
        sum_bound = mpmath.mpf(c2) * d * g_lim
        sum_ok = wsum <= sum_bound
    passed = first_bad is None and bool(sum_ok)
    details = {
        "max_ratio": float(worst),
        "first_violation": first_bad,
        "weighted_sum": float(wsum),
        "weighted_sum_bound": float(sum_bound),
        "sum_pass": bool(sum_ok),
    }
    return Certificate("residuals", desc, float(worst), 1.0, passed, details)


def residual_table(seq: RenewalSequence, params: PerturbationParams | None) -> list[dict[str, Any]]:
    """Rows n, g_n, g, r_n, per-n bound c1 delta R**-n and its verdict (n >= 1)."""
    w = seq.weights
    r = seq.residuals_mp() if seq.exact is not None else list(seq.residuals)
    c1 = c1_constant(w.q, w.p, params.rho) if (params is not None and w.has_reference) else None
    rows = []
    for n in range(seq.n_max + 1):
        row: dict[str, Any] = {"n": n, "g_n": float(seq.g[n]), "g": float(seq.g_limit), "r_n": float(r[n])}
        if n == 0 or c1 is None:
            row["bound"], row["pass"] = None, None
        else:
            with mpmath.workdps(seq.dps or 30):
                bound = mpmath.mpf(c1) * mpmath.mpf(params.delta) * mpmath.mpf(params.R) ** (-n)
                row["bound"] = float(bound)
                row["pass"] = bool(abs(r[n]) <= bound)
        rows.append(row)
    return rows


def certify_uniform(q_geo: float, N: int, n_max: int = 200, alpha: float = 0.01, samples: int = 4096, radii: int = 8) -> dict[str, Certificate]:
    """All certificates for the uniform-rod weights with the standard (rho, delta_N) choice."""
    weights = truncated_geometric(q_geo, N)
    params = uniform_rod_params(q_geo, N, alpha)
    a1, a2 = check_a1(weights, params), check_a2(params)
    out = {"A1": a1, "A2": a2}
    out["denominator"] = check_denominator_bound(weights, params, samples, radii)
    seq = renewal_sequence(weights, n_max, dps=required_dps(weights, params, n_max))
    out["residuals"] = bound_residuals(seq, params)
    return out


def find_certified_N(q_geo: float, n_max: int = 200, N_limit: int = 2000, alpha: float = 0.01) -> tuple[int | None, dict[str, Certificate] | None]:
    """Smallest N <= N_limit for which A1, A2 and both residual bounds hold."""
    for N in range(1, N_limit + 1):
        weights = truncated_geometric(q_geo, N)
        params = uniform_rod_params(q_geo, N, alpha)
        if not (check_a2(params).passed and check_a1(weights, params).passed):
            continue
        seq = renewal_sequence(weights, n_max, dps=required_dps(weights, params, n_max))
        cert = bound_residuals(seq, params)
        if cert.passed:
            return N, {"A1": check_a1(weights, params), "A2": check_a2(params), "residuals": cert}
    return None, None
