"""Binary entropy, Hoeffding-type sampling bounds and finite-key security bounds.

All bound terms are assembled from their exponents, so very large blocks do not
overflow; a term that underflows double precision is reported as 0.0 and one
that overflows as inf, with the exponent kept alongside in both cases.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from statistics import NormalDist
from typing import Callable, Iterable

import numpy as np

LN2 = math.log(2.0)
INTEGRALITY_TOL = 1e-9
LOG_MAX_DOUBLE = math.log(np.finfo(float).max)


class Variant(str, enum.Enum):
    BB84_INFO_Z = "bb84-info-z"
    BB84 = "bb84"
    EFFICIENT = "efficient"
    MODIFIED_EFFICIENT = "modified-efficient"

    @classmethod
    def parse(cls, value: str | Variant) -> Variant:
        if isinstance(value, Variant):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for v in cls:
            if v.value == key:
                return v
        raise ValueError(f"unknown variant {value!r}")


def h2(x: float) -> float:
    """Binary entropy in bits, with h2(0) = h2(1) = 0."""
    if not 0.0 <= x <= 1.0 or math.isnan(x):
        raise ValueError(f"h2 argument {x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def wilson_interval(successes: int, trials: int, confidence: float = 0.99) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


# -- Hoeffding-type sampling bounds ------------------------------------------------


def _log_hoeffding_partition(n: float, n_prime: float, eps: float) -> float:
    return -2.0 * (n_prime / (n + n_prime)) ** 2 * n * eps * eps


def hoeffding_partition_bound(n: int, n_prime: int, eps: float) -> float:
    """exp(-2 (n'/(n+n'))^2 n eps^2): tail for a random split into n and n' positions."""
    if n < 1 or n_prime < 1:
        raise ValueError("partition sizes must be at least 1")
    return math.exp(_log_hoeffding_partition(n, n_prime, eps))


def hoeffding_basis_count_bounds(N: int, p: float) -> tuple[float, float]:
    """Tail bounds (Pr[|b| <= (1-p)N/2], Pr[|b-bar| <= pN/2]) when each b_i = 0 w.p. p."""
    if not 0.0 < p <= 0.5:
        raise ValueError("p must lie in (0, 1/2]")
    if N < 0:
        raise ValueError("N must be non-negative")
    return math.exp(-0.5 * N * (1 - p) ** 2), math.exp(-0.5 * N * p * p)


@dataclass(frozen=True)
class TailEstimate:
    estimate: float
    ci_low: float
    ci_high: float
    trials: int
    hits: int
    bound: float
    weight: int | None = None

    @property
    def within_bound(self) -> bool:
        return self.ci_low <= self.bound


def mc_partition_tail(
    n: int,
    n_prime: int,
    p: float,
    eps: float,
    trials: int,
    rng: np.random.Generator,
    weights: Iterable[int] | None = None,
) -> TailEstimate:
    """Estimate Pr[(|C_A|/n >= p+eps) and (|C_B|/n' <= p)] for a uniform split of a fixed string.

    The split is a uniformly random choice of n positions (without replacement)
    out of n+n'. The string weight is swept over ``weights`` (default: every
    weight from 0 to n+n') and the largest estimate is returned.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    total = n + n_prime
    bound = hoeffding_partition_bound(n, n_prime, eps)
    candidates = range(total + 1) if weights is None else weights
    best: TailEstimate | None = None
    thr_a = n * (p + eps)
    thr_b = n_prime * p
    for w in candidates:
        if not 0 <= w <= total:
            raise ValueError(f"weight {w} outside [0, {total}]")
        # |C_A| is hypergeometric: w ones among `total` positions, n of them drawn.
        a_count = rng.hypergeometric(w, total - w, n, size=trials)
        b_count = w - a_count
        hits = int(np.count_nonzero((a_count >= thr_a - INTEGRALITY_TOL) & (b_count <= thr_b + INTEGRALITY_TOL)))
        lo, hi = wilson_interval(hits, trials)
        est = TailEstimate(hits / trials, lo, hi, trials, hits, bound, w)
        if best is None or est.estimate > best.estimate:
            best = est
    assert best is not None
    return best


# -- protocol parameters ----------------------------------------------------------


def _is_integral(x: float) -> bool:
    return abs(x - round(x)) <= INTEGRALITY_TOL * max(1.0, abs(x))


def nudge_eps(n: int, threshold: float, eps: float) -> float:
    """Smallest eps' >= eps making n*(threshold + eps') an integer."""
    target = n * (threshold + eps)
    if _is_integral(target):
        return eps
    return math.ceil(target) / n - threshold


@dataclass(frozen=True)
class ProtocolParams:
    """Configuration of one protocol variant.

    Construct through the variant helpers (``ProtocolParams.bb84`` and friends),
    which fill in the derived sizes. ``check_integrality`` can be switched off to
    evaluate bound terms at a non-integral threshold n(p_a+eps).
    """

    variant: Variant
    N: int
    n: int
    r: int
    m: int
    n_z: int = 0
    n_x: int = 0
    t_z: int = 0
    t_x: int = 0
    p: float = 0.5
    p_a: float = 0.0
    p_az: float = 0.0
    p_ax: float = 0.0
    eps_sec: float = 0.0
    eps_rel: float = 0.0
    check_integrality: bool = True

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        self.validate()

    # constructors -----------------------------------------------------------
    @classmethod
    def bb84(cls, n, r, m, p_a, eps_sec, eps_rel, **kw) -> ProtocolParams:
        return cls(Variant.BB84, N=2 * n, n=n, r=r, m=m, p_a=p_a, eps_sec=eps_sec, eps_rel=eps_rel, **kw)

    @classmethod
    def bb84_info_z(cls, n, n_z, n_x, r, m, p_az, p_ax, eps_sec, eps_rel, **kw) -> ProtocolParams:
        return cls(Variant.BB84_INFO_Z, N=n + n_z + n_x, n=n, n_z=n_z, n_x=n_x, r=r, m=m,
                   p_az=p_az, p_ax=p_ax, eps_sec=eps_sec, eps_rel=eps_rel, **kw)

    @classmethod
    def efficient(cls, n, n_z, n_x, p, r, m, p_a, eps_sec, eps_rel, **kw) -> ProtocolParams:
        return cls(Variant.EFFICIENT, N=n + n_z + n_x, n=n, n_z=n_z, n_x=n_x, p=p, r=r, m=m,
                   p_a=p_a, eps_sec=eps_sec, eps_rel=eps_rel, **kw)

    @classmethod
    def modified_efficient(cls, t_z, t_x, n_z, n_x, r, m, p_a, eps_sec, eps_rel, **kw) -> ProtocolParams:
        n = t_z + t_x
        return cls(Variant.MODIFIED_EFFICIENT, N=n + n_z + n_x, n=n, t_z=t_z, t_x=t_x, n_z=n_z, n_x=n_x,
                   r=r, m=m, p_a=p_a, eps_sec=eps_sec, eps_rel=eps_rel, **kw)

    def with_(self, **changes) -> ProtocolParams:
        return replace(self, **changes)

    # derived --------------------------------------------------------------
    @property
    def sec_threshold(self) -> float:
        """Error-rate threshold governing the secrecy term (p_ax for INFO-Z, else p_a)."""
        return self.p_ax if self.variant is Variant.BB84_INFO_Z else self.p_a

    @property
    def rel_threshold(self) -> float:
        return self.p_az if self.variant is Variant.BB84_INFO_Z else self.p_a

    @property
    def t_sec(self) -> float:
        return self.n * (self.sec_threshold + self.eps_sec)

    @property
    def t_rel(self) -> float:
        return self.n * (self.rel_threshold + self.eps_rel)

    @property
    def key_rate(self) -> float:
        return self.m / self.n

    # validation -----------------------------------------------------------
    def validate(self) -> None:
        v = self.variant
        ints = dict(N=self.N, n=self.n, r=self.r, m=self.m, n_z=self.n_z, n_x=self.n_x, t_z=self.t_z, t_x=self.t_x)
        for name, val in ints.items():
            if int(val) != val or val < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {val}")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.r + self.m > self.n:
            raise ValueError(f"r + m = {self.r + self.m} exceeds n = {self.n}")
        if v is Variant.BB84:
            if self.N != 2 * self.n:
                raise ValueError("BB84 requires N = 2n")
        else:
            if self.N != self.n + self.n_z + self.n_x:
                raise ValueError("N must equal n + n_z + n_x")
        if v is Variant.BB84_INFO_Z:
            thresholds = {"p_az": self.p_az, "p_ax": self.p_ax}
        else:
            thresholds = {"p_a": self.p_a}
        for name, val in {**thresholds, "eps_sec": self.eps_sec, "eps_rel": self.eps_rel}.items():
            if not 0.0 < val <= 0.5:
                raise ValueError(f"{name} must lie in (0, 1/2], got {val}")
        if v is Variant.BB84_INFO_Z and (self.n_z < 1 or self.n_x < 1):
            raise ValueError("BB84-INFO-Z requires n_z, n_x >= 1")
        if v is Variant.EFFICIENT:
            if not 0.0 < self.p <= 0.5:
                raise ValueError("p must lie in (0, 1/2]")
            if not 0 < self.n_z < self.p * self.N / 2:
                raise ValueError("EFFICIENT requires 0 < n_z < pN/2")
            if not 0 < self.n_x < (1 - self.p) * self.N / 2:
                raise ValueError("EFFICIENT requires 0 < n_x < (1-p)N/2")
        if v is Variant.MODIFIED_EFFICIENT:
            if self.t_z < 1 or self.t_x < 1:
                raise ValueError("MODIFIED-EFFICIENT requires t_z, t_x >= 1")
            if self.n != self.t_z + self.t_x:
                raise ValueError("MODIFIED-EFFICIENT requires n = t_z + t_x")
            if self.n_z < 1 or self.n_x < 1:
                raise ValueError("MODIFIED-EFFICIENT requires n_z, n_x >= 1")
        if self.sec_threshold + self.eps_sec > 0.5:
            raise ValueError("threshold + eps_sec must not exceed 1/2")
        if self.rel_threshold + self.eps_rel > 0.5:
            raise ValueError("threshold + eps_rel must not exceed 1/2")
        if self.check_integrality:
            for label, t in (("eps_sec", self.t_sec), ("eps_rel", self.t_rel)):
                if not _is_integral(t):
                    raise ValueError(
                        f"n*(threshold + {label}) = {t!r} is not an integer; "
                        f"use nudge_eps to move {label} to the next valid value"
                    )

    def nudged(self) -> ProtocolParams:
        """Copy with eps_sec and eps_rel raised to the nearest values meeting integrality."""
        return replace(
            self,
            eps_sec=nudge_eps(self.n, self.sec_threshold, self.eps_sec),
            eps_rel=nudge_eps(self.n, self.rel_threshold, self.eps_rel),
        )


def params_unchecked(**fields_) -> ProtocolParams:
    """Build params with integrality checking disabled (other invariants still enforced)."""
    fields_.setdefault("check_integrality", False)
    return ProtocolParams(**fields_)


# -- security bounds ----------------------------------------------------------------


@dataclass(frozen=True)
class SecurityBound:
    """Itemized trace-distance bound.

    ``log_*`` hold natural-log values of each term, kept so that callers can
    compare terms that underflow in linear scale.
    """

    variant: Variant
    reliability_terms: list[tuple[str, float]]
    secrecy_terms_under_radical: list[tuple[str, float]]
    m: int
    n: int
    include_m_factor: bool = True
    log_reliability_terms: list[tuple[str, float]] = field(default_factory=list)
    log_secrecy_terms: list[tuple[str, float]] = field(default_factory=list)

    @property
    def reliability(self) -> float:
        return math.fsum(v for _, v in self.reliability_terms)

    @property
    def secrecy(self) -> float:
        if self.m == 0:
            return 0.0
        prefactor = 2 * self.m if self.include_m_factor else 2
        return prefactor * math.sqrt(math.fsum(v for _, v in self.secrecy_terms_under_radical))

    @property
    def total(self) -> float:
        return self.reliability + self.secrecy

    @property
    def key_rate(self) -> float:
        return self.m / self.n


def _exp_term(label: str, log_value: float) -> tuple[tuple[str, float], tuple[str, float]]:
    # Terms past the double range are vacuous; report them as inf rather than raising.
    value = math.inf if log_value > LOG_MAX_DOUBLE else math.exp(log_value)
    return (label, value), (label, log_value)


def _log_code_term(n: int, threshold: float, eps: float, k: int) -> float:
    """ln of 2^{n[H2(threshold + eps) - k/n]}.

    Evaluated in extended precision: n*H2 can reach 10^4 or more while the
    difference with k is much smaller, and double rounding there would cost
    several digits of the final term.
    """
    q = np.longdouble(threshold) + np.longdouble(eps)
    if not 0 <= q <= 1:
        raise ValueError(f"H2 argument {q} outside [0, 1]")
    h = np.longdouble(0) if q in (0, 1) else -(q * np.log2(q) + (1 - q) * np.log2(1 - q))
    return float((np.longdouble(n) * h - np.longdouble(k)) * np.log(np.longdouble(2)))


def _assemble(params: ProtocolParams, rel: list[tuple[str, float]], sec: list[tuple[str, float]],
              include_m_factor: bool) -> SecurityBound:
    rel_pairs = [_exp_term(lbl, lv) for lbl, lv in rel]
    sec_pairs = [_exp_term(lbl, lv) for lbl, lv in sec]
    return SecurityBound(
        variant=params.variant,
        reliability_terms=[a for a, _ in rel_pairs],
        secrecy_terms_under_radical=[a for a, _ in sec_pairs],
        m=params.m,
        n=params.n,
        include_m_factor=include_m_factor,
        log_reliability_terms=[b for _, b in rel_pairs],
        log_secrecy_terms=[b for _, b in sec_pairs],
    )


def _require(params: ProtocolParams, variant: Variant) -> None:
    if params.variant is not variant:
        raise ValueError(f"expected {variant.value} parameters, got {params.variant.value}")


def bound_bb84_info_z(params: ProtocolParams, include_m_factor: bool = True) -> SecurityBound:
    _require(params, Variant.BB84_INFO_Z)
    P = params
    rel = [
        ("hoeffding_rel_z", _log_hoeffding_partition(P.n, P.n_z, P.eps_rel)),
        ("code_rel", _log_code_term(P.n, P.p_az, P.eps_rel, P.r)),
    ]
    sec = [
        ("hoeffding_sec_x", _log_hoeffding_partition(P.n, P.n_x, P.eps_sec)),
        ("code_sec", _log_code_term(P.n, P.p_ax, P.eps_sec, P.n - P.r - P.m)),
    ]
    return _assemble(P, rel, sec, include_m_factor)


def bound_bb84(params: ProtocolParams, include_m_factor: bool = True) -> SecurityBound:
    _require(params, Variant.BB84)
    P = params
    rel = [
        ("hoeffding_rel", -0.5 * P.n * P.eps_rel ** 2),
        ("code_rel", _log_code_term(P.n, P.p_a, P.eps_rel, P.r)),
    ]
    sec = [
        ("hoeffding_sec", -0.5 * P.n * P.eps_sec ** 2),
        ("code_sec", _log_code_term(P.n, P.p_a, P.eps_sec, P.n - P.r - P.m)),
    ]
    return _assemble(P, rel, sec, include_m_factor)


def bound_efficient(params: ProtocolParams, include_m_factor: bool = True) -> SecurityBound:
    """The z/x pairings inside the secrecy radical follow the published display verbatim."""
    _require(params, Variant.EFFICIENT)
    P = params
    N, n, p = P.N, P.n, P.p
    eff_z = p * N / 2 - P.n_z
    eff_x = (1 - p) * N / 2 - P.n_x
    count_z = -0.5 * N * p * p
    count_x = -0.5 * N * (1 - p) ** 2
    rel = [
        ("basis_count_z", count_z),
        ("hoeffding_rel_z", -2.0 * (P.n_z / (n + P.n_z)) ** 2 * eff_z * P.eps_rel ** 2),
        ("basis_count_x", count_x),
        ("hoeffding_rel_x", -2.0 * (P.n_x / (n + P.n_x)) ** 2 * eff_x * P.eps_rel ** 2),
        ("code_rel", _log_code_term(n, P.p_a, P.eps_rel, P.r)),
    ]
    sec = [
        ("basis_count_z", count_z),
        ("hoeffding_sec_z", -2.0 * (P.n_x / (n + P.n_x)) ** 2 * eff_z * P.eps_sec ** 2),
        ("basis_count_x", count_x),
        ("hoeffding_sec_x", -2.0 * (P.n_z / (n + P.n_z)) ** 2 * eff_x * P.eps_sec ** 2),
        ("code_sec", _log_code_term(n, P.p_a, P.eps_sec, n - P.r - P.m)),
    ]
    return _assemble(P, rel, sec, include_m_factor)


def bound_modified_efficient(params: ProtocolParams, include_m_factor: bool = True) -> SecurityBound:
    _require(params, Variant.MODIFIED_EFFICIENT)
    P = params
    n = P.n
    rel = [
        ("hoeffding_rel_z", _log_hoeffding_partition(P.t_z, P.n_z, P.eps_rel)),
        ("hoeffding_rel_x", _log_hoeffding_partition(P.t_x, P.n_x, P.eps_rel)),
        ("code_rel", _log_code_term(n, P.p_a, P.eps_rel, P.r)),
    ]
    sec = [
        ("hoeffding_sec_z", -2.0 * (P.n_x / (P.t_z + P.n_x)) ** 2 * P.t_z * P.eps_sec ** 2),
        ("hoeffding_sec_x", -2.0 * (P.n_z / (P.t_x + P.n_z)) ** 2 * P.t_x * P.eps_sec ** 2),
        ("code_sec", _log_code_term(n, P.p_a, P.eps_sec, n - P.r - P.m)),
    ]
    return _assemble(P, rel, sec, include_m_factor)


BOUND_FUNCTIONS: dict[Variant, Callable[..., SecurityBound]] = {
    Variant.BB84_INFO_Z: bound_bb84_info_z,
    Variant.BB84: bound_bb84,
    Variant.EFFICIENT: bound_efficient,
    Variant.MODIFIED_EFFICIENT: bound_modified_efficient,
}


def security_bound(params: ProtocolParams, include_m_factor: bool = True) -> SecurityBound:
    return BOUND_FUNCTIONS[params.variant](params, include_m_factor=include_m_factor)


def code_failure_bound(n: int, t: float, r: int) -> float:
    """2^{n[H2(t/n) - r/n]}: random-code decoding failure bound for errors of weight <= t."""
    return 2.0 ** (n * (h2(t / n) - r / n))


# -- asymptotics --------------------------------------------------------------------


def _bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-9) -> float:
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ValueError("no sign change on the bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def asymptotic_threshold(variant: Variant | str, p_az: float | None = None, tol: float = 1e-12) -> float:
    """Largest asymptotically tolerable error rate.

    For BB84-INFO-Z this is the p_ax solving H2(p_ax) = 1 - H2(p_az); otherwise
    the root of 2 H2(p) = 1 on (0, 1/2).
    """
    variant = Variant.parse(variant)
    if variant is Variant.BB84_INFO_Z:
        if p_az is None:
            raise ValueError("BB84-INFO-Z needs p_az")
        if not 0.0 <= p_az < 0.5:
            raise ValueError("p_az must lie in [0, 1/2)")
        return _info_z_partner(p_az, tol)
    return _bisect(lambda x: 2.0 * h2(x) - 1.0, 1e-15, 0.5, tol)


def max_key_rate(variant: Variant | str, p_a: float | tuple[float, float], eps_sec: float, eps_rel: float) -> float:
    """Upper limit on m/n: 1 - H2(sec threshold + eps_sec) - H2(rel threshold + eps_rel), floored at 0.

    For BB84-INFO-Z pass ``p_a`` as the pair (p_az, p_ax).
    """
    variant = Variant.parse(variant)
    if variant is Variant.BB84_INFO_Z:
        if not isinstance(p_a, tuple):
            p_az = p_ax = float(p_a)
        else:
            p_az, p_ax = p_a
        rate = 1.0 - h2(p_ax + eps_sec) - h2(p_az + eps_rel)
    else:
        if isinstance(p_a, tuple):
            raise ValueError("only BB84-INFO-Z takes a threshold pair")
        rate = 1.0 - h2(p_a + eps_sec) - h2(p_a + eps_rel)
    return max(0.0, rate)


def _info_z_partner(p_az: float, tol: float = 1e-12) -> float:
    target = 1.0 - h2(p_az)
    if target >= 1.0:
        return 0.5
    return _bisect(lambda x: h2(x) - target, 0.0, 0.5, tol)


def info_z_curve(steps: int) -> list[tuple[float, float]]:
    """Points (p_az, p_ax) on H2(p_ax) + H2(p_az) = 1 with p_az evenly spaced on [0, 1/2]."""
    if steps < 2:
        raise ValueError("steps must be at least 2")
    pts = []
    for idx in range(steps):
        p_az = 0.5 * idx / (steps - 1)
        pts.append((p_az, _info_z_partner(p_az)))
    return pts


def min_redundancy_fraction(params: ProtocolParams, grid: int = 1000) -> float | None:
    """Smallest r/n on a grid of step 1/grid with H2(rel threshold + eps_rel) < r/n, or None."""
    need = h2(params.rel_threshold + params.eps_rel)
    for step in range(grid + 1):
        frac = step / grid
        if frac > need:
            return frac
    return None


def rate_table_rows(base: ProtocolParams, r_fracs: Iterable[float], m_fracs: Iterable[float]) -> list[dict]:
    """Evaluate the variant's bound over a grid of (r/n, m/n)."""
    rows = []
    for rf in r_fracs:
        for mf in m_fracs:
            r = int(round(rf * base.n))
            m = int(round(mf * base.n))
            if r + m > base.n:
                continue
            params = base.with_(r=r, m=m)
            b = security_bound(params)
            rows.append({
                "n": params.n,
                "p_a": params.sec_threshold,
                "eps_sec": params.eps_sec,
                "eps_rel": params.eps_rel,
                "r_over_n": r / params.n,
                "m_over_n": m / params.n,
                "total_bound": b.total,
                "key_rate": b.key_rate,
            })
    return rows
