"""Closed-form rates, optimizers and combinatorics for the distillation link.

Everything here is analytic or semi-analytic: no density matrices are
evolved except inside the dark-count region classifier, which reuses the
exact protocol engine point by point.  The closed forms are pinned
against the exact engine by the test suite, so the two layers act as
independent oracles for each other.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .constants import SERIES_TAIL_TOL, TRACE_EPSILON
from .errors import DegenerateParameterError, NonConvergenceError
from .photonics import (
    ApparatusParams,
    ExcitationAngle,
    eta_weight,
    heralded_state_with_dark_counts,
    p_click,
)
from .protocol import CLIENT_LABELS, StrategyConfig, run_strategy_exact
from .qstate import plus_state

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0

# Success fidelities below 1 - this cutoff make distilled pairs useless
# for the repeater application regardless of rate.
DARK_FIDELITY_CUTOFF = 1e-3


def _sin_sq(theta) -> float:
    if isinstance(theta, ExcitationAngle):
        return theta.sin_sq
    return ExcitationAngle(float(theta)).sin_sq


# ---------------------------------------------------------------------------
# Bell-pair rates


@dataclass(frozen=True)
class RateComparison:
    """Distilled rate next to the two-photon reference scheme."""

    rate: float
    reference_rate: float

    @property
    def ratio(self) -> float:
        return self.rate / self.reference_rate


def rate_bell(params: ApparatusParams, theta) -> float:
    """Distilled Bell pairs per unit time for the two-iterate strategy.

    Closed form T cos^2(2 phi) s (1 - s)^2 / ((2 - T s cos^2(2 phi)) tau)
    with s = sin^2(theta); algebraically identical to half the two-pair
    success probability times the click rate.
    """
    s = _sin_sq(theta)
    t = params.mean_transmission
    c2 = params.cos_sq_two_phi
    return t * c2 * s * (1.0 - s) ** 2 / ((2.0 - t * s * c2) * params.tau)


def two_photon_reference_rate(transmission: float, tau: float = 1.0) -> float:
    """Rate of a scheme that needs both photons to survive one window."""
    if not 0.0 <= transmission <= 1.0:
        raise DegenerateParameterError(f"transmission must lie in [0, 1], got {transmission}")
    if not tau > 0.0:
        raise DegenerateParameterError(f"tau must be positive, got {tau}")
    return transmission**2 / (2.0 * tau)


def rate_comparison(params: ApparatusParams, theta) -> RateComparison:
    return RateComparison(
        rate=rate_bell(params, theta),
        reference_rate=two_photon_reference_rate(params.mean_transmission, params.tau),
    )


def crossover_transmission(tol: float = 1e-12) -> float:
    """Mean transmission where the distilled and reference rates meet.

    Solved by bisection at the loss-limit operating point
    sin^2(theta) = 1/3 on a balanced link; below the root the distilled
    scheme wins, above it the two-photon scheme does.
    """
    theta = ExcitationAngle.from_sin_sq(1.0 / 3.0)

    def gap(t: float) -> float:
        params = ApparatusParams(t1=t, t2=t)
        return rate_bell(params, theta) - two_photon_reference_rate(t)

    lo, hi = 1e-9, 1.0
    glo = gap(lo)
    if not glo > 0.0:
        raise NonConvergenceError("no sign change bracketed for the crossover")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < tol:
            return mid
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    raise NonConvergenceError("crossover bisection failed to converge")


# ---------------------------------------------------------------------------
# Excitation-angle optimization


class Objective(Enum):
    BELL_RATE = "bell_rate"
    CHAIN_RATE = "chain_rate"


@dataclass(frozen=True)
class RateResult:
    """Optimized rate with the angle achieving it and the parameter echo."""

    rate: float
    optimal_theta: float
    objective: Objective
    params: ApparatusParams

    @property
    def sin_sq_theta(self) -> float:
        return math.sin(self.optimal_theta) ** 2


def golden_section_max(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-8
) -> float:
    """Derivative-free maximizer for a unimodal objective on [lo, hi]."""
    if not hi > lo:
        raise ValueError("need hi > lo")
    width = hi - lo
    c = lo + _INV_PHI_SQ * width
    d = lo + _INV_PHI * width
    fc, fd = f(c), f(d)
    for _ in range(300):
        if width <= tol:
            return 0.5 * (lo + hi)
        if fc >= fd:
            hi, d, fd = d, c, fc
            width = hi - lo
            c = lo + _INV_PHI_SQ * width
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            width = hi - lo
            d = lo + _INV_PHI * width
            fd = f(d)
    raise NonConvergenceError(f"golden section did not reach width {tol:.1e}")


def optimize_theta(
    params: ApparatusParams,
    objective: Objective,
    *,
    k_max: int = 64,
    tol: float = 1e-8,
) -> RateResult:
    """Best excitation angle for a rate objective at fixed apparatus.

    The interior of [0, pi/2] is searched; both objectives vanish
    identically when either path is dark, which is rejected rather than
    returning an arbitrary angle.
    """
    if params.t1 * params.t2 <= 0.0:
        raise DegenerateParameterError(
            "objective is identically zero when a path is dark"
        )
    if objective is Objective.BELL_RATE:
        def f(theta: float) -> float:
            return rate_bell(params, theta)
    elif objective is Objective.CHAIN_RATE:
        def f(theta: float) -> float:
            return chain_growth_rate(params, theta, k_max=k_max).growth_rate
    else:
        raise ValueError(f"unknown objective {objective!r}")
    theta = golden_section_max(f, 0.0, math.pi / 2.0, tol)
    return RateResult(rate=f(theta), optimal_theta=theta, objective=objective, params=params)


# ---------------------------------------------------------------------------
# Loop-strategy interval combinatorics and series


@dataclass(frozen=True)
class SequenceCountVector:
    """Signature-imbalance walk counts for histories of a given length.

    ``v[i]`` counts the length-(k-1) outcome prefixes whose two
    signature counts differ by i + 1 and never balanced early.  Exact
    integers; the vector spans imbalances 1 through k - 1.
    """

    k: int
    v: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError("histories classify at the second iterate or later")
        if len(self.v) != self.k - 1 or any(c < 0 for c in self.v):
            raise ValueError("malformed count vector")

    @property
    def n_success(self) -> int:
        """Prefixes one step from balance: distinct successes at iterate k."""
        return self.v[0]

    @property
    def n_failure(self) -> int:
        """Prefixes at imbalance two or more, still live at iterate k."""
        return sum(self.v[1:])

    @property
    def n_live(self) -> int:
        return sum(self.v)


def sequence_counts(k: int) -> SequenceCountVector:
    """Count loop histories of length k by walk combinatorics.

    A history is tracked by the difference of its two signature counts,
    a positive walk that steps by one per iterate and must not touch
    zero before the end.  The single length-1 prefix sits at imbalance
    one; each iterate convolves with a step up or down.
    """
    if k < 2:
        raise ValueError("histories classify at the second iterate or later")
    v = [1]  # single length-1 prefix, imbalance 1
    for _ in range(k - 2):
        grown = [0] * (len(v) + 1)
        for i, count in enumerate(v):
            if i > 0:
                grown[i - 1] += count
            grown[i + 1] += count
        v = grown
    return SequenceCountVector(k=k, v=tuple(v))


def loop_interval_probabilities(eta: float, k_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Success and failure probability of a loop run ending at each iterate.

    Returns arrays (p_success, p_failure) indexed by iterate count k,
    zero below k = 2.  The walk-count recursion is carried with weights
    ((1 - eta)/2)^k folded in, which keeps every term bounded however
    large k_max grows.
    """
    if not 0.0 <= eta < 1.0:
        raise DegenerateParameterError(f"eta must lie in [0, 1), got {eta}")
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    x = (1.0 - eta) / 2.0
    ps = np.zeros(k_max + 1)
    pf = np.zeros(k_max + 1)
    u = np.zeros(k_max + 2)
    u[0] = x * x  # single length-1 prefix, weighted by x^2
    for k in range(2, k_max + 1):
        ps[k] = 2.0 * u[0]
        pf[k] = 2.0 * eta * u.sum() / x + (1.0 - eta) * eta ** (k - 1)
        w = np.zeros_like(u)
        w[:-1] += u[1:]
        w[1:] += u[:-1]
        u = w * x
    return ps, pf


def loop_success_probability_closed_form(eta: float) -> float:
    """Infinite-series total success probability, 1 - sqrt(eta (2 - eta))."""
    if not 0.0 <= eta <= 1.0:
        raise DegenerateParameterError(f"eta must lie in [0, 1], got {eta}")
    return 1.0 - math.sqrt(eta * (2.0 - eta))


@dataclass(frozen=True)
class ChainGrowthResult:
    """Truncated-series evaluation of the repeater-chain growth rate."""

    growth_rate: float
    p_loop: float
    p_fail: float
    mean_iterates: float
    p_click: float
    eta: float
    k_max: int
    tail_bound: float

    @property
    def converged(self) -> bool:
        return self.tail_bound <= SERIES_TAIL_TOL


def chain_growth_rate(
    params: ApparatusParams, theta, k_max: int = 64
) -> ChainGrowthResult:
    """Net qubit-pair growth rate of a chain fed by loop distillation.

    A success extends the chain by two pairs, anything else costs the
    one pair under construction; runs average <I> iterates of expected
    duration 1/p_click windows each.  The series over run lengths is
    truncated at ``k_max``; the neglected mass is bounded by a geometric
    envelope and reported through ``tail_bound`` and ``converged``.
    """
    if k_max < 4:
        raise ValueError("k_max below 4 cannot resolve the series")
    if params.sin_two_phi != 0.0:
        raise DegenerateParameterError(
            "the run-length series assumes a balanced link (t1 == t2)"
        )
    pc = p_click(params, theta)
    if pc < TRACE_EPSILON:
        raise DegenerateParameterError("click probability vanishes")
    eta = eta_weight(params, theta)
    if not 0.0 < eta < 1.0:
        raise DegenerateParameterError(
            f"series needs contamination weight strictly inside (0, 1), got {eta}"
        )
    ps, pf = loop_interval_probabilities(eta, k_max + 2)
    ks = np.arange(k_max + 3)
    p_loop = float(ps[: k_max + 1].sum())
    p_fail = float(pf[: k_max + 1].sum())
    mean_iterates = float((ks[: k_max + 1] * (ps + pf)[: k_max + 1]).sum())
    # Two extra terms plus a geometric envelope bound the neglected mass.
    ratio = max(eta, 1.0 - eta)
    tail_bound = float(ps[k_max + 1] + pf[k_max + 1] + ps[k_max + 2] + pf[k_max + 2])
    tail_bound /= 1.0 - ratio**2
    growth = (3.0 * p_loop - 1.0) * pc / (mean_iterates * params.tau)
    return ChainGrowthResult(
        growth_rate=growth,
        p_loop=p_loop,
        p_fail=p_fail,
        mean_iterates=mean_iterates,
        p_click=pc,
        eta=eta,
        k_max=k_max,
        tail_bound=tail_bound,
    )


# ---------------------------------------------------------------------------
# Slow parameter drift between the two iterates


@dataclass(frozen=True)
class DriftParams:
    """Relative drift of the link between consecutive heralds.

    ``d_x`` is the change of the path-length difference in wavelengths;
    ``d_t`` the relative drift of the transmittance ratio,
    1 - sqrt((t1' t2)/(t2' t1)).
    """

    d_x: float
    d_t: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.d_x) and math.isfinite(self.d_t)):
            raise DegenerateParameterError("drift components must be finite")
        if abs(2.0 - self.d_t) < 1e-14:
            raise DegenerateParameterError("transmission drift hits the d_t = 2 pole")

    @property
    def delta_delta(self) -> float:
        """Detuning angle change between the two heralds."""
        return -math.pi * self.d_x

    @property
    def delta_phi(self) -> float:
        """Imbalance angle change on a balanced baseline."""
        return -math.atan(self.d_t / (2.0 - self.d_t))

    @classmethod
    def from_angles(cls, delta_phi: float, delta_delta: float) -> "DriftParams":
        tan = math.tan(delta_phi)
        if abs(1.0 - tan) < 1e-12:
            raise DegenerateParameterError(
                "imbalance drift of pi/4 has no finite transmission-drift preimage"
            )
        return cls(d_x=-delta_delta / math.pi, d_t=-2.0 * tan / (1.0 - tan))


def drift_infidelity_exact(phi: float, delta_phi: float, delta_delta: float) -> float:
    """Infidelity of the distilled state when the link drifts mid-run.

    The first iterate consumes a pair at (phi, delta), the second a pair
    at (phi + delta_phi, delta + delta_delta); returned is the delivered
    success-leaf infidelity against the ideal Bell state, identical for
    all four success histories and independent of the baseline detuning.
    Only at phi = 0 does it coincide with the raw overlap infidelity of
    the two pairs themselves.  The denominator vanishes only where the
    delivered state itself vanishes; that direction is rejected.
    """
    c = math.cos(2.0 * phi + delta_phi)
    s = math.sin(delta_phi)
    num = c * c * math.sin(delta_delta) ** 2 + s * s * math.cos(delta_delta) ** 2
    den = c * c + s * s
    if den < 1e-14:
        raise DegenerateParameterError("drift direction annihilates the pair state")
    return num / den


def drift_infidelity_physical(drift: DriftParams) -> float:
    """Delivered-state drift infidelity from the physical drift pair.

    Balanced baseline; equal to ``drift_infidelity_exact`` at phi = 0
    with the drift mapped through its angle properties.
    """
    t = drift.d_t / (2.0 - drift.d_t)
    dx = math.pi * drift.d_x
    return (math.sin(dx) ** 2 + math.cos(dx) ** 2 * t * t) / (1.0 + t * t)


def drift_infidelity_quadratic(drift: DriftParams) -> float:
    """Leading-order drift infidelity (pi d_x)^2 + (d_t / 2)^2."""
    return (math.pi * drift.d_x) ** 2 + (drift.d_t / 2.0) ** 2


# ---------------------------------------------------------------------------
# Dark-count operating regions


class RegionLabel(Enum):
    OURS_BETTER = "ours_better"
    REFERENCE_BETTER = "reference_better"
    NO_GO = "no_go"


@dataclass(frozen=True)
class RegionPoint:
    transmission: float
    p_dark: float
    herald_probability: float
    success_probability: float
    fidelity: float
    rate: float
    reference_rate: float
    label: RegionLabel


def dark_count_fidelity_region(
    transmissions: Sequence[float],
    dark_probabilities: Sequence[float],
    *,
    tau: float = 1.0,
    sin_sq_theta: float = 1.0 / 3.0,
    csv_path=None,
) -> tuple[RegionPoint, ...]:
    """Classify a (transmission, dark-count) grid of operating points.

    Each point runs the exact two-iterate strategy on the dark-count
    contaminated source.  Points whose delivered fidelity falls below
    1 - DARK_FIDELITY_CUTOFF are no-go; the rest are labelled by whether
    the distilled rate beats the two-photon reference.  Ties and
    undefined fidelities classify conservatively (reference, no-go).
    """
    theta = ExcitationAngle.from_sin_sq(sin_sq_theta)
    cfg = StrategyConfig.two_iterates_only()
    clients = plus_state(CLIENT_LABELS)
    points: list[RegionPoint] = []
    for t in transmissions:
        for p in dark_probabilities:
            params = ApparatusParams(t1=t, t2=t, p_dark=p, tau=tau)
            broker, p_herald = heralded_state_with_dark_counts(params, theta)
            tree = run_strategy_exact(clients, broker, cfg)
            p_two = tree.success_probability
            fid = tree.mean_success_fidelity()
            rate = 0.5 * p_two * p_herald / tau
            reference = two_photon_reference_rate(t, tau)
            if not fid >= 1.0 - DARK_FIDELITY_CUTOFF:
                label = RegionLabel.NO_GO
            elif rate > reference:
                label = RegionLabel.OURS_BETTER
            else:
                label = RegionLabel.REFERENCE_BETTER
            points.append(
                RegionPoint(t, p, p_herald, p_two, fid, rate, reference, label)
            )
    result = tuple(points)
    if csv_path is not None:
        _write_region_csv(result, csv_path)
    return result


def _write_region_csv(points: Sequence[RegionPoint], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "t",
                "p_dark",
                "p_herald",
                "p_success",
                "fidelity",
                "rate",
                "reference_rate",
                "region",
            ]
        )
        for pt in points:
            writer.writerow(
                [
                    repr(pt.transmission),
                    repr(pt.p_dark),
                    repr(pt.herald_probability),
                    repr(pt.success_probability),
                    repr(pt.fidelity),
                    repr(pt.rate),
                    repr(pt.reference_rate),
                    pt.label.value,
                ]
            )
