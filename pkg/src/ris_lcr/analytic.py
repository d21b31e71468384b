"""Closed-form level-crossing rates of the uplink SNR processes.

Crossing rates are reported *normalized by the relevant Doppler frequency*
(crossings per fade cycle rather than per second) throughout the package.

Three analytic routes live here:

* the reflected-path-only rate ``lcr_ris`` -- a two-moment gamma fit to the
  element-envelope sum, driven by the envelope-sum derivative variance
  ``omega_sq`` and the moment pair ``y_moments``;
* the direct-path rate for a correlated multi-antenna combiner, in two forms:
  ``lcr_direct_exact`` (one term per eigenvalue; catastrophically
  ill-conditioned beyond ~10 antennas, which it reports through a condition
  estimate) and ``lcr_direct_stable`` (leading eigenvalues kept individually,
  the near-equal trailing bulk replaced by its average, evaluated entirely in
  signed log-magnitude arithmetic);
* ``lcr_direct_numeric_cf`` -- an adaptive-quadrature inversion of the joint
  characteristic function of (SNR, dSNR/dt).  It shares no algebra with the
  closed forms and serves as their independent numerical oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate

from .channel import CorrelationMatrix
from .errors import DomainError, NumericError
from .special import elliptic_E, elliptic_K, hyp1f1_ln, hyp2f1_corr, ln_gamma

__all__ = [
    "omega_sq",
    "y_moments",
    "RisLcrParams",
    "ris_lcr_params",
    "lcr_ris",
    "lcr_ris_exact_form",
    "lcr_ris_mode",
    "GroupedSpectrum",
    "group_eigenvalues",
    "DirectExactResult",
    "lcr_direct_exact",
    "lcr_direct_stable",
    "lcr_direct_numeric_cf",
    "mean_snr_speed_direct",
    "mean_snr_speed_ris",
]


# ---------------------------------------------------------------------------
# reflected path: envelope-sum moments and gamma-fit crossing rate
# ---------------------------------------------------------------------------


def _envelope_speed_kernel(rho: float) -> float:
    """E(rho) - (1 - rho^2) K(rho) for |rho| in [0, 1]: the contribution of a
    correlated element pair to the envelope-sum derivative variance."""
    if rho >= 1.0:
        return 1.0  # limit value; the (1 - rho^2) K(rho) product vanishes
    return elliptic_E(rho) - (1.0 - rho) * (1.0 + rho) * elliptic_K(rho)


def omega_sq(corr: CorrelationMatrix, beta: float, f_ur: float) -> float:
    """Variance of d/dt of the envelope sum Y = sum_k |h_k|.

    Pairs enter through the elliptic kernel at the *magnitude* of the spatial
    correlation entry; an identity matrix collapses to pi^2 f^2 beta N.
    """
    if beta < 0.0:
        raise DomainError("beta must be nonnegative")
    mags = np.abs(corr.entries)
    uniq, counts = np.unique(mags.ravel(), return_counts=True)
    total = sum(c * _envelope_speed_kernel(float(u)) for u, c in zip(uniq, counts))
    return math.pi**2 * f_ur**2 * beta * total


def y_moments(corr: CorrelationMatrix, beta: float) -> tuple[float, float]:
    """Mean and variance of the envelope sum Y = sum_k |h_k| for jointly
    Rayleigh elements with per-element power beta and spatial correlation R.

    The cross-covariance of two envelopes with squared correlation x is the
    Gauss-series kernel 2F1(-1/2,-1/2;1;x), summed over all ordered pairs.
    """
    if beta < 0.0:
        raise DomainError("beta must be nonnegative")
    n = corr.n
    off = ~np.eye(n, dtype=bool)
    sq = np.abs(corr.entries[off]) ** 2
    uniq, counts = np.unique(sq, return_counts=True)
    pair_sum = sum(c * hyp2f1_corr(float(u)) for u, c in zip(uniq, counts))
    mean = 0.5 * n * math.sqrt(math.pi * beta)
    var = beta * (n + 0.25 * math.pi * pair_sum) - mean * mean
    if not var > 0.0:
        raise NumericError(f"envelope-sum variance came out nonpositive ({var:.3e})")
    return mean, var


@dataclass(frozen=True)
class RisLcrParams:
    """Inputs of the reflected-path crossing-rate formula.

    ``c`` maps the squared envelope sum to SNR (SNR = c Y^2); ``theta`` and
    ``r`` are the rate and shape of the gamma fit to Y.
    """

    c: float
    omega2: float
    mean_y: float
    var_y: float
    f_ur: float

    @property
    def theta(self) -> float:
        return self.mean_y / self.var_y

    @property
    def shape(self) -> float:
        return self.theta * self.mean_y


def ris_lcr_params(
    corr: CorrelationMatrix,
    beta_ur: float,
    f_ur: float,
    m_bs: int,
    beta_rb: float,
    snr_scale: float,
) -> RisLcrParams:
    mean, var = y_moments(corr, beta_ur)
    return RisLcrParams(
        c=snr_scale * m_bs * beta_rb,
        omega2=omega_sq(corr, beta_ur, f_ur),
        mean_y=mean,
        var_y=var,
        f_ur=f_ur,
    )


def lcr_ris(threshold: float, params: RisLcrParams) -> float:
    """Doppler-normalized crossing rate of the reflected-path SNR at a linear
    threshold, under the gamma fit to the envelope sum.

    Evaluated in log space: the shape parameter grows with the surface size
    and theta^r / Gamma(r) overflows long before the result does.
    """
    if threshold < 0.0:
        raise DomainError("threshold must be nonnegative")
    if threshold == 0.0:
        return 0.0
    th = params.theta
    r = params.shape
    y = math.sqrt(threshold / params.c)  # envelope level hit by the threshold
    log_val = (
        -ln_gamma(r)
        + 0.5 * (math.log(params.omega2) - math.log(2.0 * math.pi))
        + r * math.log(th)
        + (r - 1.0) * math.log(y)
        - th * y
        - math.log(params.f_ur)
    )
    return math.exp(log_val)


def lcr_ris_exact_form(
    threshold: float, c: float, omega2: float, pdf_value: float, f_ur: float
) -> float:
    """Doppler-normalized reflected-path crossing rate with the SNR density
    supplied externally (exact density, empirical histogram, ...):
    sqrt((2/pi) c T omega2) * f_SNR(T) / f_ur."""
    if threshold < 0.0 or pdf_value < 0.0:
        raise DomainError("threshold and pdf_value must be nonnegative")
    return math.sqrt((2.0 / math.pi) * c * threshold * omega2) * pdf_value / f_ur


def lcr_ris_mode(params: RisLcrParams) -> float:
    """Threshold at which the gamma-fit crossing rate peaks (shape > 1)."""
    r = params.shape
    if r <= 1.0:
        raise DomainError("crossing-rate mode undefined for shape <= 1")
    return params.c * ((r - 1.0) / params.theta) ** 2


# ---------------------------------------------------------------------------
# eigenvalue grouping for the direct path
# ---------------------------------------------------------------------------

_DISTINCT_RTOL = 1e-9  # closer than this (relatively) counts as coincident
_PERTURB = 1e-7  # multiplicative nudge applied to coincident lead values

# residue-route digit-loss budget: beyond this the combination has fewer
# than ~8 significant digits left and the tilt-integral route takes over
_RESIDUE_LOSS_LIMIT = math.log(1e7)


@dataclass(frozen=True)
class GroupedSpectrum:
    """SNR eigenvalue spectrum split into distinct leads plus an averaged tail.

    ``lead`` holds the L largest eigenvalues individually (descending,
    pairwise distinct, each distinct from the tail); the remaining S = M - L
    eigenvalues are represented by their common average ``tail_value``.  The
    trace of the source spectrum is preserved exactly.
    """

    lead: np.ndarray
    tail_value: float
    tail_count: int

    def __post_init__(self):
        lead = np.asarray(self.lead, dtype=float)
        object.__setattr__(self, "lead", lead)
        if self.tail_count < 1:
            raise DomainError("grouped spectrum needs at least one tail eigenvalue")
        if not self.tail_value > 0.0:
            raise DomainError("tail_value must be positive")
        if lead.size and (np.any(lead <= 0.0) or np.any(np.diff(lead) >= 0.0)):
            raise DomainError("lead eigenvalues must be positive and strictly descending")
        vals = np.concatenate([lead, [self.tail_value]])
        gaps = -np.diff(np.sort(vals)[::-1])
        if vals.size > 1 and np.any(gaps / np.max(vals) < 0.5 * _DISTINCT_RTOL):
            raise DomainError("lead/tail eigenvalues must be pairwise distinct")

    @property
    def n_lead(self) -> int:
        return int(self.lead.size)

    @property
    def n_total(self) -> int:
        return self.n_lead + self.tail_count

    @property
    def trace(self) -> float:
        return float(self.lead.sum() + self.tail_count * self.tail_value)


def group_eigenvalues(
    eigenvalues: Sequence[float],
    n_lead: Optional[int] = None,
    *,
    lead_fraction: float = 0.05,
    max_lead: int = 8,
) -> GroupedSpectrum:
    """Partition an SNR spectrum into lead values and an averaged tail.

    With ``n_lead=None`` the split keeps every eigenvalue above
    ``lead_fraction`` of the largest (capped at ``max_lead`` and at M - 1 so
    the tail is never empty).  Leads that coincide with each other or with the
    tail average are separated by +-1e-7 multiplicative nudges, with the tail
    re-averaged so the trace is preserved exactly.
    """
    theta = np.sort(np.asarray(eigenvalues, dtype=float))[::-1]
    if theta.size < 2:
        raise DomainError("grouping needs at least two eigenvalues")
    if np.any(theta < 0.0) or not theta[0] > 0.0:
        raise DomainError("eigenvalues must be nonnegative with at least one positive")
    m = theta.size
    if n_lead is None:
        n_lead = int(np.count_nonzero(theta > lead_fraction * theta[0]))
        n_lead = min(n_lead, max_lead, m - 1)
        # a candidate lead indistinguishable from the remaining average
        # belongs in the tail; a fully degenerate spectrum collapses to the
        # exact pure-tail (chi-squared) representation
        while n_lead > 0:
            tail_avg = theta[n_lead:].mean()
            if theta[n_lead - 1] - tail_avg > _DISTINCT_RTOL * theta[0]:
                break
            n_lead -= 1
    if not 0 <= n_lead < m:
        raise DomainError(f"n_lead must satisfy 0 <= n_lead < {m}, got {n_lead}")

    trace = float(theta.sum())
    lead = theta[:n_lead].copy()
    if n_lead and not lead[-1] > 0.0:
        raise DomainError("lead eigenvalues must be strictly positive")

    # separate coincident leads: walk the descending list and push any value
    # that crowds its predecessor down by a fixed relative nudge
    for i in range(1, n_lead):
        ceiling = lead[i - 1] * (1.0 - _PERTURB)
        if lead[i] > ceiling or (lead[i - 1] - lead[i]) < _DISTINCT_RTOL * lead[0]:
            lead[i] = min(ceiling, lead[i - 1] - _DISTINCT_RTOL * lead[0])

    s = m - n_lead
    for _ in range(8):
        tail_value = (trace - lead.sum()) / s
        if not tail_value > 0.0:
            raise DomainError("tail average must be positive; reduce n_lead")
        if n_lead == 0 or (lead[-1] - tail_value) > _DISTINCT_RTOL * theta[0]:
            break
        # scale the whole lead block up a notch: ratios (and hence strict
        # descent) are preserved while the re-averaged tail drops away
        lead *= 1.0 + 2.0 * _PERTURB
    else:
        raise NumericError("could not separate lead eigenvalues from the tail average")
    return GroupedSpectrum(lead=lead, tail_value=float(tail_value), tail_count=s)


# ---------------------------------------------------------------------------
# signed log-magnitude accumulation
# ---------------------------------------------------------------------------


class _SignedLogSum:
    """Accumulates sum of s_i * exp(l_i) without leaving log scale until the
    final combination."""

    def __init__(self):
        self.signs: list[float] = []
        self.logs: list[float] = []

    def add(self, sign: float, log_mag: float):
        if sign != 0.0 and log_mag > -math.inf:
            self.signs.append(sign)
            self.logs.append(log_mag)

    def __iter__(self):
        return iter(zip(self.signs, self.logs))

    @property
    def max_log(self) -> float:
        return max(self.logs, default=-math.inf)

    def total(self) -> float:
        if not self.logs:
            return 0.0
        m = self.max_log
        acc = math.fsum(s * math.exp(l - m) for s, l in zip(self.signs, self.logs))
        return acc * math.exp(m)

    def signed_log(self) -> tuple[float, float]:
        """Collapse to a single (sign, log-magnitude) pair."""
        if not self.logs:
            return 0.0, -math.inf
        m = self.max_log
        acc = math.fsum(s * math.exp(l - m) for s, l in zip(self.signs, self.logs))
        if acc == 0.0:
            return 0.0, -math.inf
        return math.copysign(1.0, acc), m + math.log(abs(acc))


# ---------------------------------------------------------------------------
# direct path, exact per-eigenvalue form
# ---------------------------------------------------------------------------


class DirectExactResult(NamedTuple):
    value: float
    condition: float  # largest summand magnitude over the result magnitude


def lcr_direct_exact(
    threshold: float, eigenvalues: Sequence[float], f_d: float
) -> DirectExactResult:
    """Doppler-normalized crossing rate of a correlated maximum-ratio SNR,
    one residue term per eigenvalue.

    The alternating sum over eigenvalue pairs cancels violently once the
    spectrum holds more than ~10 clustered values; the returned ``condition``
    (max summand magnitude / result magnitude) measures how many digits were
    lost.  Summands are evaluated in signed log space so the *inputs* to the
    cancellation are as accurate as double precision allows; the cancellation
    itself is intrinsic to this form.  Use the grouped stable form instead
    when the condition is large.
    """
    theta = np.sort(np.asarray(eigenvalues, dtype=float))[::-1]
    m = theta.size
    if m < 2:
        raise DomainError("the per-eigenvalue form needs at least two eigenvalues")
    if np.any(theta <= 0.0):
        raise DomainError("eigenvalues must be strictly positive")
    if np.unique(theta).size != m:
        raise DomainError(
            "repeated eigenvalues make the per-eigenvalue form singular; "
            "group the spectrum and use the stable form"
        )
    if not threshold > 0.0:
        raise DomainError("threshold must be positive")

    ln_theta = np.log(theta)
    diff = theta[:, None] - theta[None, :]
    with np.errstate(divide="ignore"):
        ln_diff = np.where(np.eye(m, dtype=bool), 0.0, np.log(np.abs(diff)))
    sign_diff = np.sign(diff)
    row_log = ln_diff.sum(axis=1)  # sum_m' != i of ln|theta_i - theta_m'|
    row_sign = np.prod(np.where(np.eye(m, dtype=bool), 1.0, sign_diff), axis=1)

    ln_f1 = np.array([hyp1f1_ln(1.0, 2.5, -threshold / t) for t in theta])
    prefactor = 0.5 * math.log(math.pi) - math.log(3.0) + 1.5 * math.log(2.0 * threshold)

    terms = _SignedLogSum()
    for n in range(m):
        for l in range(m):
            if l == n:
                continue
            # product over the other eigenvalues of
            # theta_l theta_n / ((theta_l - theta_m)(theta_n - theta_m))
            log_prod = (m - 2) * (ln_theta[l] + ln_theta[n])
            log_prod -= row_log[l] - ln_diff[l, n]
            log_prod -= row_log[n] - ln_diff[n, l]
            sign_prod = row_sign[l] * sign_diff[l, n] * row_sign[n] * sign_diff[n, l]
            log_term = (
                prefactor
                - threshold / theta[n]
                + 0.5 * ln_theta[n]
                - ln_theta[l]
                - ln_diff[n, l]
                + ln_f1[l]
                + log_prod
            )
            terms.add(sign_prod * sign_diff[n, l], log_term)

    value = terms.total()
    if not math.isfinite(value) or value <= 0.0:
        return DirectExactResult(value, math.inf)
    return DirectExactResult(value, math.exp(terms.max_log - math.log(value)))


# ---------------------------------------------------------------------------
# direct path, grouped stable form
# ---------------------------------------------------------------------------


def _tail_combinatorial_constants(s: int) -> np.ndarray:
    """c_k = sum_{n=0}^{k-1} binom(2n, n) / 4^n for k = 1..s (index k-1)."""
    c = np.empty(s)
    acc = 0.0
    binom_term = 1.0
    for n in range(s):
        acc += binom_term
        c[n] = acc
        binom_term *= (2 * n + 1) / (2.0 * (n + 1))  # binom(2n,n)/4^n recurrence
    return c


def _pole_terms(
    r: int,
    p: int,
    inv_s: float,
    k: int,
    threshold: float,
    a_col: np.ndarray,
    n_lead: int,
    out: _SignedLogSum,
    base_sign: float,
    base_log: float,
):
    """Accumulate the inverse-transform terms of one partially-fractioned
    rational block: simple poles at the lead combinations A[j] (j != r) plus
    the order-p pole at the tail combination A[n_lead].

    ``a_col`` holds A[i] = 1/lam_i + 1/lam_r for i = 0..n_lead (tail last);
    each term carries exp(-A T) T^power 1F1(k+1/2; .; (A - inv_s) T) weights.
    """
    log2pi = math.log(2.0 * math.pi)
    a_tail = a_col[n_lead]
    others = [j for j in range(n_lead) if j != r]

    # simple lead poles
    for j in others:
        log_c = -p * math.log(abs(a_tail - a_col[j]))
        sign_c = math.copysign(1.0, a_tail - a_col[j]) if p % 2 else 1.0
        for q in others:
            if q == j:
                continue
            d = a_col[q] - a_col[j]
            log_c -= math.log(abs(d))
            sign_c *= math.copysign(1.0, d)
        log_t = (
            log2pi
            + (k + 0.5) * math.log(threshold)
            - a_col[j] * threshold
            + hyp1f1_ln(k + 0.5, k + 1.5, (a_col[j] - inv_s) * threshold)
            - ln_gamma(k + 1.5)
            + log_c
        )
        out.add(base_sign * sign_c, base_log + log_t)

    # order-p tail pole: the (A_tail - u)^-m coefficients for m = 1..p are,
    # up to a fixed sign, the Taylor coefficients of prod_j (A_j - u)^-1 at
    # u = A_tail.  Expanding in w = A_tail - u turns every gap positive
    # (the tail rate exceeds all lead rates), so the log-derivative recursion
    # below has no cancelling terms -- unlike the textbook partial-fraction
    # sum over j, which loses all digits once the leads cluster.
    gaps = np.array([a_tail - a_col[j] for j in others])  # all positive
    b_sign = -1.0 if len(others) % 2 else 1.0  # (-1)^(number of lead factors)
    if others:
        scale = float(np.sum(1.0 / gaps))  # bounds the scaled power sums by 1
        log_pi0 = -float(np.log(gaps).sum())
        sig = 1.0 / (gaps * scale)
        powsums = np.array([np.sum(sig ** (k + 1)) for k in range(max(p - 1, 1))])
        coef = np.empty(p)  # coef[n] = pi_n / (pi_0 scale^n), all >= 0
        coef[0] = 1.0
        for n in range(p - 1):
            coef[n + 1] = float(np.dot(coef[: n + 1], powsums[: n + 1][::-1])) / (n + 1)
        log_b_base = log_pi0
    for mm in range(1, p + 1):
        if not others:
            if mm != p:
                continue  # empty lead product: only the order-p coefficient
            b_log = 0.0
        else:
            c = coef[p - mm]
            if c == 0.0:
                continue
            b_log = log_b_base + (p - mm) * math.log(scale) + math.log(c)
        log_t = (
            log2pi
            + (mm + k - 0.5) * math.log(threshold)
            - a_tail * threshold
            + hyp1f1_ln(k + 0.5, mm + k + 0.5, (a_tail - inv_s) * threshold)
            - ln_gamma(mm + k + 0.5)
            + b_log
        )
        out.add(base_sign * b_sign, base_log + log_t)


def _gamma_mix_logpdf(x: float, scales: np.ndarray, alphas: np.ndarray) -> float:
    """Log density at x > 0 of a sum of independent gamma variables with the
    given scales and shape counts.

    Single-gamma expansion about the smallest scale: every series
    coefficient is nonnegative (the mixing ratios 1 - b_min/b_i lie in
    [0, 1)), so the evaluation keeps full relative precision no matter how
    the scales cluster -- the property the crossing-rate fallback relies on.
    """
    b1 = float(scales.min())
    ratios = 1.0 - b1 / scales
    rho = float(alphas.sum())
    log_c = float(np.dot(alphas, np.log1p(-ratios)))
    base = -x / b1 - rho * math.log(b1) + (rho - 1.0) * math.log(x) + log_c

    # delta coefficients by the convolution recursion (vectorized: each new
    # coefficient is a dot product against the reversed history).  delta can
    # overflow for huge shape totals, so carry an explicit log offset.
    cap = 256
    deltas = np.zeros(cap)
    weights = np.zeros(cap)  # weights[i] = i * gamma_i
    deltas[0] = 1.0
    delta_log_shift = 0.0
    pows = ratios.copy()
    lt_prev = -ln_gamma(rho)  # k = 0 term relative to base
    m = lt_prev  # running max of relative term logs
    acc = 1.0  # running sum of exp(lt - m)
    log_x_b1 = math.log(x) - math.log(b1)
    for k in range(1, 200_000):
        if k >= cap:
            cap *= 2
            deltas = np.concatenate([deltas, np.zeros(cap - deltas.size)])
            weights = np.concatenate([weights, np.zeros(cap - weights.size)])
        weights[k] = float(np.dot(alphas, pows))  # = k * gamma_k
        pows *= ratios
        new = float(np.dot(weights[1 : k + 1], deltas[k - 1 :: -1])) / k
        deltas[k] = new
        if new > 1e250:
            deltas[: k + 1] *= 1e-200
            delta_log_shift += math.log(1e200)
            new = deltas[k]
        lt = (
            (math.log(new) if new > 0.0 else -math.inf)
            + delta_log_shift
            + k * log_x_b1
            - ln_gamma(rho + k)
        )
        if lt > m:
            acc *= math.exp(m - lt)
            m = lt
        acc += math.exp(lt - m)
        # terms rise to a single peak then decay factorially; stop well past it
        if lt < lt_prev and lt - m < -40.0:
            break
        lt_prev = lt
    else:  # pragma: no cover
        raise NumericError("gamma-mixture density series did not converge")
    return base + m + math.log(acc)


def _lcr_grouped_positive(threshold: float, spectrum: GroupedSpectrum) -> float:
    """Doppler-normalized grouped crossing rate through the conditional-slope
    representation LCR/f = sqrt(2 pi) E[sqrt(W) | SNR = T] f_SNR(T), with
    W the square-weighted branch sum.

    sqrt(W) is opened up with the Bernstein identity
    sqrt(w) = (2 sqrt(pi))^-1 Int v^(-3/2) (1 - e^(-v w)) dv; the tilted
    expectation under e^(-vW) is again a gamma mixture with shrunk scales, so
    the integrand is a difference of two positive gamma-mixture densities and
    is nonnegative by construction.  No residues, no alternating sums: this
    route stays accurate where the residue form has cancelled to noise.
    """
    lams = np.concatenate([spectrum.lead, [spectrum.tail_value]])
    alphas = np.concatenate([np.ones(spectrum.n_lead), [spectrum.tail_count]])
    log_f0 = _gamma_mix_logpdf(threshold, lams, alphas)
    if log_f0 < -700.0:
        return 0.0  # density underflows: the crossing rate is zero to double precision
    f0 = math.exp(log_f0)

    def tilted_term(v: float) -> float:
        # E[e^(-vW) delta(SNR - T)]: the tilted gamma mixture, decreasing in v
        log_c = -float(np.dot(alphas, np.log1p(v * lams * lams)))
        tilted = lams / (1.0 + v * lams * lams)
        log_ft = _gamma_mix_logpdf(threshold, tilted, alphas)
        arg = log_c + log_ft - log_f0
        return 0.0 if arg < -745.0 else f0 * math.exp(arg)

    # the tilted term decays like e^(-v E[W | SNR=T]); find a cutoff where it
    # stops mattering, integrate up to it, and close with the exact tail
    # integral of the constant part
    v_cut = 1.0 / (1.0 + threshold * float(lams.max()))
    for _ in range(60):
        if tilted_term(v_cut) <= 1e-17 * f0:
            break
        v_cut *= 4.0
    else:  # pragma: no cover
        raise NumericError("tilted crossing-rate term did not decay; cutoff search failed")

    def integrand(w: float) -> float:
        v = w * w
        return 2.0 * (f0 - tilted_term(v)) / v

    val, _err = integrate.quad(
        integrand, 0.0, math.sqrt(v_cut), epsabs=1e-300, epsrel=1e-10, limit=300
    )
    return (val + 2.0 * f0 / math.sqrt(v_cut)) / math.sqrt(2.0)


def lcr_direct_stable(
    threshold: float, spectrum: GroupedSpectrum, f_d: float, *, method: str = "auto"
) -> float:
    """Doppler-normalized crossing rate of the grouped direct-path SNR.

    Residue form over the lead eigenvalues plus the order-S tail pole; every
    product, power, and Gamma ratio is carried as a (sign, log-magnitude)
    pair and the additive terms are combined exactly once at the end.  The
    branch constants of the underlying contour integral are resolved
    analytically, so each term is real by construction and the result of the
    combination must be nonnegative up to roundoff.

    The residue combination still cancels when many near-equal eigenvalues
    are grouped and the threshold sits far from the bulk of the
    distribution, so every evaluation tracks its own digit loss.  With
    ``method="auto"`` (default) the residue value is returned while the loss
    stays below ~7 digits and the evaluation silently switches to the
    equivalent all-positive tilt-integral route otherwise; ``"residue"`` and
    ``"series"`` force one route (the forced residue route raises if the
    combination goes meaningfully negative).
    """
    if method not in ("auto", "residue", "series"):
        raise DomainError("method must be 'auto', 'residue', or 'series'")
    if not threshold > 0.0:
        raise DomainError("threshold must be positive")
    lead = spectrum.lead
    big_l = spectrum.n_lead
    s = spectrum.tail_count
    lam_t = spectrum.tail_value
    ln_c2 = math.log(2.0 * math.pi**2 * f_d**2)

    if big_l == 0:
        # pure averaged spectrum: chi-squared SNR, single closed term
        c_s = float(_tail_combinatorial_constants(s)[-1])
        log_val = (
            math.log(0.5 * c_s)
            + 0.5 * ln_c2
            + (0.5 - s) * math.log(lam_t)
            + (s - 0.5) * math.log(threshold)
            - threshold / lam_t
            - ln_gamma(s + 0.5)
            - math.log(f_d)
        )
        return math.exp(log_val)

    if method == "series":
        return _lcr_grouped_positive(threshold, spectrum)

    ln_lead = np.log(lead)
    sum_ln_lead = float(ln_lead.sum())
    ln_tail = math.log(lam_t)
    inv = np.concatenate([1.0 / lead, [1.0 / lam_t]])
    c_tail = _tail_combinatorial_constants(s)
    log_kappa0 = -((big_l + s) * ln_c2 + 2.0 * sum_ln_lead + 2.0 * s * ln_tail)
    log_pref = log_kappa0 - math.log(4.0 * math.pi) - math.log(f_d)

    terms = _SignedLogSum()
    for r in range(big_l):
        a_col = inv + inv[r]  # A[i] = 1/lam_i + 1/lam_r, tail entry last
        log_gaps = 0.0
        sign_gaps = 1.0
        for i in range(big_l):
            if i == r:
                continue
            d = lead[r] - lead[i]
            log_gaps += math.log(abs(d))
            sign_gaps *= math.copysign(1.0, d)
        d_tail = lead[r] - lam_t  # positive: every lead exceeds the tail average
        log_shared = (big_l + s + 0.5) * ln_c2 + (sum_ln_lead - ln_lead[r]) - log_gaps

        # lead-pole block (the sqrt singularity sits at this lead's own rate)
        log_b = (
            log_shared
            + (big_l + s + 0.5) * ln_lead[r]
            + s * ln_tail
            - s * math.log(d_tail)
        )
        _pole_terms(
            r, s, inv[r], 1, threshold, a_col, big_l, terms, sign_gaps, log_pref + log_b
        )

        # tail-pole blocks (sqrt singularity at the tail rate), one per order
        for k in range(1, s + 1):
            log_d = (
                log_shared
                + (big_l + s - k) * ln_lead[r]
                + (s + 1.5) * ln_tail
                - (s - k + 1) * math.log(d_tail)
                + math.log(c_tail[k - 1])
            )
            _pole_terms(
                r,
                s - k + 1,
                inv[big_l],
                k,
                threshold,
                a_col,
                big_l,
                terms,
                -sign_gaps,
                log_pref + log_d,
            )

    value = terms.total()
    if method == "residue":
        if not math.isfinite(value):
            raise NumericError(
                "grouped crossing-rate combination produced a non-finite value"
            )
        if value < 0.0:
            if abs(value) <= 1e-10 * math.exp(terms.max_log):
                return 0.0  # below the cancellation floor of the combination
            raise NumericError(
                f"grouped crossing-rate combination went negative ({value:.3e}) "
                f"well above its cancellation floor"
            )
        return value
    if math.isfinite(value) and value > 0.0:
        lost = terms.max_log - math.log(value)
        if lost < _RESIDUE_LOSS_LIMIT:
            return value
    return _lcr_grouped_positive(threshold, spectrum)


# ---------------------------------------------------------------------------
# characteristic-function quadrature oracle
# ---------------------------------------------------------------------------


def _clog1p(z: complex) -> complex:
    """log(1 + z), accurate for small |z|."""
    re, im = z.real, z.imag
    return complex(0.5 * math.log1p(2.0 * re + re * re + im * im), math.atan2(im, 1.0 + re))


def _cexpm1(z: complex) -> complex:
    """exp(z) - 1, accurate for small |z|."""
    re, im = z.real, z.imag
    em = math.expm1(re)
    return complex(em * math.cos(im) - 2.0 * math.sin(0.5 * im) ** 2, (em + 1.0) * math.sin(im))


def lcr_direct_numeric_cf(
    threshold: float,
    spectrum: GroupedSpectrum,
    f_d: float,
    *,
    outer_epsabs: float = 1e-9,
) -> float:
    """Crossing rate of the grouped direct-path SNR by direct numerical
    inversion of the joint characteristic function of (SNR, dSNR/dt).

    The rate equals ``-1/(4 pi^2)`` times the double integral of
    ``(Phi(w1, w2) - Phi(w1, 0)) / w2^2 * exp(-j w1 T)``.  The inner integral
    is evaluated with adaptive quadrature (difference quotient normalized by
    ``Phi(w1, 0)`` to keep it conditioned), the outer one with a
    Fourier-weighted quadrature rule.  No partial fractions, residues, or
    hypergeometric series are involved, so this path is independent of the
    closed forms it validates.  Intended for desk-scale spectra (M <= 8).
    """
    if not threshold > 0.0:
        raise DomainError("threshold must be positive")
    lams = np.concatenate([spectrum.lead, [spectrum.tail_value]])
    mults = np.concatenate([np.ones(spectrum.n_lead), [spectrum.tail_count]])
    c2 = 2.0 * math.pi**2 * f_d**2

    def inner(w1: float) -> complex:
        denoms = 1.0 - 1j * w1 * lams  # per-factor CF denominators at w2 = 0

        def quotient(w2: float, part: int) -> float:
            # (Phi(w1, w2)/Phi(w1, 0) - 1) / w2^2, stable as w2 -> 0
            acc = 0.0 + 0.0j
            for lam, mult, den in zip(lams, mults, denoms):
                acc += mult * _clog1p(c2 * w2 * w2 * lam * lam / den)
            val = _cexpm1(-acc) / (w2 * w2)
            return val.real if part == 0 else val.imag

        re, re_err = integrate.quad(
            quotient, 0.0, np.inf, args=(0,), epsabs=1e-13, epsrel=1e-11, limit=300
        )
        im, im_err = integrate.quad(
            quotient, 0.0, np.inf, args=(1,), epsabs=1e-13, epsrel=1e-11, limit=300
        )
        phi0 = 1.0 / complex(np.prod(denoms**mults))
        return 2.0 * phi0 * complex(re, im)

    def j_re(w1: float) -> float:
        return inner(w1).real

    def j_im(w1: float) -> float:
        return inner(w1).imag

    with np.errstate(over="ignore"):
        cos_part = integrate.quad(
            j_re, 0.0, np.inf, weight="cos", wvar=threshold, epsabs=outer_epsabs,
            limlst=80, limit=300, full_output=1,
        )
        sin_part = integrate.quad(
            j_im, 0.0, np.inf, weight="sin", wvar=threshold, epsabs=outer_epsabs,
            limlst=80, limit=300, full_output=1,
        )
    for res in (cos_part, sin_part):
        # on failure QUADPACK appends an explanation and leaves a sentinel value
        if len(res) > 3 or not math.isfinite(res[0]):
            detail = res[3].splitlines()[0] if len(res) > 3 else f"value {res[0]!r}"
            raise NumericError(f"Fourier-weighted quadrature did not converge: {detail}")
    value = -(cos_part[0] + sin_part[0]) / (2.0 * math.pi**2) / f_d
    return value


# ---------------------------------------------------------------------------
# mean absolute SNR slopes
# ---------------------------------------------------------------------------


def mean_snr_speed_direct(
    m: int, beta_d: float, snr_scale: float, f_d: float, *, asymptotic: bool = False
) -> float:
    """Mean |d SNR/dt| of the direct link (independent equal-power antennas).

    The exact form carries Gamma(M + 1/2)/Gamma(M); the asymptotic variant
    replaces the ratio by sqrt(M), exact in the large-array limit.
    """
    if m < 1:
        raise DomainError("antenna count must be at least one")
    scale = math.pi * f_d * beta_d * snr_scale
    if asymptotic:
        return scale * math.sqrt(8.0 * m / math.pi)
    ratio = math.exp(ln_gamma(m + 0.5) - ln_gamma(m))
    return scale * ratio * 2.0 * math.sqrt(2.0) / math.sqrt(math.pi)


def mean_snr_speed_ris(
    m: int,
    n: int,
    beta_rb: float,
    beta_ur: float,
    snr_scale: float,
    f_ur: float,
    *,
    asymptotic: bool = False,
) -> float:
    """Mean |d SNR/dt| of the phase-aligned reflected path (independent
    surface elements).  The large-surface regrouping coincides with the exact
    expression, so both variants return pi f M sqrt(2) N^(3/2) beta_rb
    beta_ur E_s/sigma^2."""
    if m < 1 or n < 1:
        raise DomainError("array sizes must be at least one")
    scale = math.pi * f_ur * beta_rb * beta_ur * snr_scale
    if asymptotic:
        return scale * math.sqrt(2.0 * m) * math.sqrt(m) * n**1.5
    return scale * m * n**1.5 * math.sqrt(2.0)
