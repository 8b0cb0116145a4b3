"""
Constructive protocol synthesis.

- ``search_gain_k`` / ``search_gain_g``: seeded derivative-free searches for
  a simultaneously stabilizing control gain and a stabilizing observer gain.
- ``synthesize_protocol``: the explicit scaling, level-count and bound
  constants that make the quantizers provably never saturate.
- ``empirical_level_search``: a simulation-based heuristic for the smallest
  level counts that avoid saturation on sampled initial conditions.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize
from scipy.signal import place_poles

from quantcoop.analysis import (
    LtiPlant,
    a1_prime_infimum,
    check_a1,
    check_detectability,
    closed_loop_block,
    coupling_matrix,
    disagreement_matrix,
    nonzero_laplacian_eigenvalues,
    observer_error_matrix,
    output_inf_norm,
)
from quantcoop.codec import CommParams
from quantcoop.config import (
    DEFAULT_RESTARTS,
    DEFAULT_SEARCH_BUDGET,
    EPSILON_GRID,
    LEVEL_OVERFLOW,
    LEVEL_SEARCH_CAP,
    UNSTABLE_TOL,
)
from quantcoop.graph import Network, NetworkSpectrum, laplacian_split, spectrum
from quantcoop.models import ConfigError, InfeasibleError
from quantcoop.numerics import GuoBound, guo_power_bound, kron, spectral_radius, two_norm
from quantcoop.protocol import ControlLaw
from quantcoop.simulator import InitialConditions, SimConfig, simulate_primitive

Levels = int | Literal["overflow"]


# ---------------------------------------------------------------------------
# Gain searches
# ---------------------------------------------------------------------------


@dataclass
class GainSearchResult:
    """Outcome of a gain search; ``gain`` is the best point found even on failure."""

    gain: np.ndarray
    radius: float
    """Objective at ``gain``: worst closed-loop spectral radius."""

    success: bool
    evaluations: int = 0
    start: str = ""
    """Label of the starting point that produced the best gain."""

    message: str = ""


def _schur_unstable_gain(a: np.ndarray, b: np.ndarray, poles_at: float = 0.1) -> np.ndarray | None:
    """Gain that places the unstable part of ``(a, b)`` and leaves the stable part alone.

    An ordered real Schur form puts the modes inside the unit circle first;
    in those coordinates the closed loop is block triangular, so pole
    placement on the trailing block is enough.
    """
    n = a.shape[0]
    t, z, sdim = sla.schur(a, output="real", sort="iuc")
    if sdim == n:
        return np.zeros((b.shape[1], n))
    a_u = t[sdim:, sdim:]
    b_u = (z.T @ b)[sdim:]
    k = a_u.shape[0]
    poles = np.linspace(poles_at / 2, poles_at, k) if k > 1 else np.array([poles_at])
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            k_u = place_poles(a_u, b_u, poles).gain_matrix
    except (ValueError, np.linalg.LinAlgError):
        return None
    return k_u @ z[:, sdim:].T


def _powell(
    objective: Callable[[np.ndarray], float],
    x0: np.ndarray,
    maxfev: int,
) -> tuple[np.ndarray, float, int]:
    res = minimize(objective, x0.ravel(), method="Powell", options={"maxfev": maxfev, "xtol": 1e-8, "ftol": 1e-10})
    value = float(res.fun)
    x = np.asarray(res.x, dtype=float)
    start_value = objective(x0.ravel())
    if start_value <= value:
        return x0.ravel(), start_value, int(res.nfev) + 1
    return x, value, int(res.nfev) + 1


def _search(
    objective: Callable[[np.ndarray], float],
    shape: tuple[int, int],
    starts: Sequence[tuple[str, np.ndarray]],
    budget: int,
    restarts: int,
    seed: int,
    scale: float,
) -> tuple[np.ndarray, float, int, str]:
    rng = np.random.default_rng(seed)
    candidates = list(starts)
    for r in range(restarts):
        candidates.append((f"random-{r}", rng.normal(scale=scale, size=shape)))
    per_start = max(50, budget // max(1, len(candidates)))
    results: list[tuple[float, int, np.ndarray, str]] = []
    used = 0
    for order, (label, x0) in enumerate(candidates):
        if used >= budget:
            break
        x, value, nfev = _powell(objective, np.asarray(x0, dtype=float), min(per_start, budget - used))
        used += nfev
        results.append((value, order, x.reshape(shape), label))
        if value < 1e-12:
            break
    value, _, best, label = min(results, key=lambda item: (item[0], item[1]))
    return best, value, used, label


def search_gain_k(
    plant: LtiPlant,
    spec: NetworkSpectrum,
    budget: int = DEFAULT_SEARCH_BUDGET,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
) -> GainSearchResult:
    """Look for K with ``max_{i >= 2} rho(A - lambda_i B K) < 1``.

    A stable A returns ``K = 0`` immediately. Otherwise Powell searches run
    from structured warm starts (unstable-block pole placement scaled by
    several candidate omegas) and from seeded random points, and the best
    result is re-verified with ``check_a1`` before success is reported.
    """
    if budget <= 0:
        raise ConfigError(f"search budget must be positive, got {budget}")
    m, n = plant.m, plant.n
    zero = np.zeros((m, n))
    rho_a = spectral_radius(plant.a)
    lams = nonzero_laplacian_eigenvalues(spec)
    if rho_a < 1.0 - UNSTABLE_TOL or lams.size == 0:
        worst = check_a1(plant, spec, zero).worst_radius
        return GainSearchResult(gain=zero, radius=worst, success=True, start="zero", message="open loop already stable")
    if not spec.lambda2_nonzero:
        return GainSearchResult(
            gain=zero,
            radius=rho_a,
            success=False,
            message="lambda_2 = 0: A - lambda_2 B K = A for every K, so no gain can help",
        )

    bk = plant.b

    def objective(vec: np.ndarray) -> float:
        k = vec.reshape(m, n)
        return max(spectral_radius(plant.a - lam * (bk @ k)) for lam in lams)

    starts: list[tuple[str, np.ndarray]] = [("zero", zero)]
    base = _schur_unstable_gain(plant.a, plant.b)
    if base is not None:
        _, omega = a1_prime_infimum(lams)
        omegas = {"omega*": omega} if omega > 0 else {}
        omegas["1/mean"] = 1.0 / float(np.mean(lams.real))
        omegas["1/max"] = 1.0 / float(np.max(np.abs(lams)))
        omegas["1/min"] = 1.0 / float(np.min(np.abs(lams)))
        for label, w in omegas.items():
            starts.append((f"placement*{label}", w * base))
    scale = max(1.0, float(np.linalg.norm(base))) if base is not None else 1.0
    gain, radius, used, label = _search(objective, (m, n), starts, budget, restarts, seed, scale)
    verdict = check_a1(plant, spec, gain)
    return GainSearchResult(
        gain=gain,
        radius=verdict.worst_radius,
        success=verdict.holds,
        evaluations=used,
        start=label,
        message="" if verdict.holds else f"best radius {verdict.worst_radius:.6g} after {used} evaluations",
    )


def search_gain_g(
    plant: LtiPlant,
    budget: int = DEFAULT_SEARCH_BUDGET,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
) -> GainSearchResult:
    """Look for G with ``rho(A - G C) < 1``, searching the dual pair ``(A^T, C^T)``."""
    if budget <= 0:
        raise ConfigError(f"search budget must be positive, got {budget}")
    n, p = plant.n, plant.p
    zero = np.zeros((n, p))
    rho_a = spectral_radius(plant.a)
    if rho_a < 1.0 - UNSTABLE_TOL:
        return GainSearchResult(gain=zero, radius=rho_a, success=True, start="zero", message="open loop already stable")
    if not check_detectability(plant).holds:
        return GainSearchResult(
            gain=zero, radius=rho_a, success=False, message="(A, C) is not detectable: no observer gain exists"
        )

    def objective(vec: np.ndarray) -> float:
        return spectral_radius(plant.a - vec.reshape(n, p) @ plant.c)

    starts: list[tuple[str, np.ndarray]] = [("zero", zero), ("A pinv(C)", plant.a @ np.linalg.pinv(plant.c))]
    dual = plant.transpose()
    dual_gain = _schur_unstable_gain(dual.a, dual.b)
    if dual_gain is not None:
        starts.append(("dual placement", dual_gain.T))
    gain, radius, used, label = _search(objective, (n, p), starts, budget, restarts, seed, 1.0)
    ok = radius < 1.0
    return GainSearchResult(
        gain=gain,
        radius=radius,
        success=ok,
        evaluations=used,
        start=label,
        message="" if ok else f"best radius {radius:.6g} after {used} evaluations",
    )


# ---------------------------------------------------------------------------
# Level sizing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SizingInputs:
    """Initial-condition radii, power-bound epsilons and the scaling factor.

    ``None`` for an epsilon means "pick from the grid"; ``None`` for gamma
    means the midpoint of the admissible interval.
    """

    c_x: float
    c_xhat: float
    c_uhat: float
    epsilon: float | None = None
    epsilon_bar1: float | None = None
    gamma: float | None = None

    def __post_init__(self) -> None:
        for name in ("c_x", "c_xhat", "c_uhat"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigError(f"sizing.{name} must be a positive number, got {value}")
        for name in ("epsilon", "epsilon_bar1"):
            value = getattr(self, name)
            if value is not None and not (np.isfinite(value) and value > 0):
                raise ConfigError(f"sizing.{name} must be positive, got {value}")
        if self.gamma is not None and not (0.0 < self.gamma < 1.0):
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")


@dataclass
class SizingResult:
    """Synthesized scaling, level counts and bound constants with a per-term breakdown."""

    case: Literal["i", "ii"]
    """``"ii"`` when A is stable and both gains are zero, else ``"i"``."""

    gamma: float
    alpha: float
    alpha_u: float
    epsilon: float
    epsilon_bar1: float | None
    eta: float
    eta_bar1: float | None
    m_const: float
    m_bar1: float | None
    r_const: float
    e_bound: float
    """``||E(t)|| <= e_bound * gamma^t``."""

    gamma_const: float | None
    delta_bound: float | None
    """``||delta(t)|| <= delta_bound * gamma^t``; ``None`` without a block split."""

    l_threshold: float
    l_u_threshold: float
    levels_y: Levels
    levels_u: Levels
    diagnostics: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def overflow(self) -> bool:
        return self.levels_y == "overflow" or self.levels_u == "overflow"

    def comm_params(self, observer_gain: np.ndarray, gain_bound: float = float("inf")) -> CommParams:
        """Protocol parameters realising this sizing.

        Raises
        ------
        InfeasibleError:
            If a level count overflowed.
        """
        if self.overflow:
            raise InfeasibleError("synthesized level counts overflow; no finite protocol can be emitted")
        return CommParams(
            gamma=self.gamma,
            alpha=self.alpha,
            alpha_u=self.alpha_u,
            levels_y=int(self.levels_y),
            levels_u=int(self.levels_u),
            observer_gain=observer_gain,
            gain_bound=gain_bound,
        )

    def to_dict(self) -> dict:
        def num(value):
            if value is None:
                return None
            value = float(value)
            return value if math.isfinite(value) else ("inf" if value > 0 else "-inf")

        return {
            "case": self.case,
            "gamma": self.gamma,
            "alpha": self.alpha,
            "alpha_u": self.alpha_u,
            "epsilon": self.epsilon,
            "epsilon_bar1": self.epsilon_bar1,
            "eta": self.eta,
            "eta_bar1": self.eta_bar1,
            "M": num(self.m_const),
            "M_bar1": num(self.m_bar1),
            "R": num(self.r_const),
            "e_bound": num(self.e_bound),
            "Gamma": num(self.gamma_const),
            "delta_bound": num(self.delta_bound),
            "L_threshold": num(self.l_threshold),
            "L_u_threshold": num(self.l_u_threshold),
            "levels_y": self.levels_y,
            "levels_u": self.levels_u,
            "diagnostics": {key: num(value) for key, value in self.diagnostics.items()},
            "warnings": list(self.warnings),
        }


def level_count(threshold: float, step: float) -> Levels:
    """Smallest integer strictly above ``threshold/step - 1/2``, at least 1.

    Examples
    --------
    >>> level_count(20.0, 1.0)
    20
    >>> level_count(0.1, 1.0)
    1
    >>> level_count(float("inf"), 1.0)
    'overflow'
    """
    bound = threshold / step - 0.5
    if not math.isfinite(bound) or bound >= LEVEL_OVERFLOW:
        return "overflow"
    return max(1, math.floor(bound) + 1)


def feasible_epsilons(m: np.ndarray, grid: Sequence[float] = EPSILON_GRID) -> list[GuoBound]:
    """Power bounds of ``m`` for every grid epsilon giving ``eta < 1``."""
    if m.shape[0] == 0:
        return []
    return [b for b in (guo_power_bound(m, eps) for eps in grid) if b.eta < 1.0]


def _size(
    plant: LtiPlant,
    net: Network,
    k: np.ndarray,
    g: np.ndarray,
    inputs: SizingInputs,
    alpha: float,
    alpha_u: float,
    observer: GuoBound,
    disagreement: GuoBound | None,
    split,
    case: str,
) -> SizingResult:
    n, m, p, size = plant.n, plant.m, plant.p, net.n_agents
    lap = net.laplacian
    cx, cxh, cuh = inputs.c_x, inputs.c_xhat, inputs.c_uhat
    eta = observer.eta
    eta_bar1 = disagreement.eta if disagreement is not None else 0.0
    m_big = observer.m_const
    m_bar1 = disagreement.m_const if disagreement is not None else 0.0
    floor = max(eta, eta_bar1)
    if floor >= 1.0:
        raise InfeasibleError(f"max(eta, eta_bar1) = {floor:.6g} >= 1: no admissible gamma")
    if inputs.gamma is None:
        gamma = (floor + 1.0) / 2.0
    elif inputs.gamma <= floor:
        raise InfeasibleError(f"gamma = {inputs.gamma} must exceed max(eta, eta_bar1) = {floor:.6g}")
    else:
        gamma = inputs.gamma

    sqrt_nn = math.sqrt(n * size)
    sqrt_pn = math.sqrt(p * size)
    sqrt_mn = math.sqrt(m * size)
    norm_b = two_norm(plant.b)
    norm_g = two_norm(g)
    lk = kron(lap, k)
    lap2 = lap @ lap
    kbk = k @ plant.b @ k
    f_delta = lk - kron(lap, k @ plant.a) + kron(lap2, kbk)
    f_error = kron(lap, k @ (plant.a - g @ plant.c)) - kron(lap2, kbk) - lk
    f_hold = np.eye(m * size) + kron(lap, k @ plant.b)
    f_quant = kron(lap, k @ g)
    nf_delta, nf_error, nf_hold, nf_quant, n_lk = (
        two_norm(f_delta),
        two_norm(f_error),
        two_norm(f_hold),
        two_norm(f_quant),
        two_norm(lk),
    )

    warns: list[str] = []
    d: dict[str, float] = {}
    with np.errstate(over="ignore", invalid="ignore"):
        d["R.initial"] = sqrt_nn * m_big * (cx + cxh)
        d["R.quantization"] = alpha * sqrt_pn * m_big * norm_g / (2.0 * (gamma - eta))
        r_const = max(d["R.initial"], d["R.quantization"])
        d["E.control_quantization"] = alpha_u * sqrt_mn * m_big * norm_b / (2.0 * gamma * (gamma - eta))
        initial_inputs = sqrt_nn * n_lk * cxh + sqrt_mn * cuh
        d["E.initial_control"] = m_big * norm_b * initial_inputs / gamma
        e_bound = r_const + d["E.control_quantization"] + d["E.initial_control"]
        l_threshold = output_inf_norm(plant) * e_bound

        gamma_const = delta_bound = None
        cond = None
        if split is not None:
            norm_w = two_norm(coupling_matrix(plant, split, k)) if size > 1 else 0.0
            d["Gamma.initial"] = 2.0 * cx * m_bar1 * sqrt_nn
            d["Gamma.coupling"] = m_bar1 * norm_w * e_bound / (gamma - eta_bar1) if norm_w > 0 else 0.0
            gamma_const = max(d["Gamma.initial"], d["Gamma.coupling"])
            cond = two_norm(split.phi) * two_norm(split.phi_inv)
            delta_bound = cond * gamma_const
            d["norm.W"] = norm_w
            d["norm.Phi*norm.Phi_inv"] = cond
        else:
            warns.append("no block split of the Laplacian (lambda_2 = 0): disagreement bound not available")

        d["Lu.initial"] = (
            2.0 * cx * sqrt_nn * nf_delta
            + sqrt_nn * nf_error * (cx + cxh)
            + alpha * sqrt_pn * nf_quant / 2.0
            + nf_hold * initial_inputs
        )
        if nf_delta == 0.0:
            coupled = 0.0
        elif cond is None:
            raise InfeasibleError("the control threshold needs the Laplacian block split, which does not exist")
        else:
            coupled = cond * nf_delta * gamma_const
        d["Lu.steady"] = (
            coupled + nf_error * e_bound + alpha_u * sqrt_mn * nf_hold / (2.0 * gamma) + alpha * sqrt_pn * nf_quant / 2.0
        )
        l_u_threshold = max(d["Lu.initial"], d["Lu.steady"])

    d.update(
        {
            "norm.f_delta": nf_delta,
            "norm.f_error": nf_error,
            "norm.f_hold": nf_hold,
            "norm.f_quant": nf_quant,
            "norm.LxK": n_lk,
            "norm.B": norm_b,
            "norm.G": norm_g,
            "norm.C_inf": output_inf_norm(plant),
        }
    )
    levels_y = level_count(l_threshold, alpha)
    levels_u = level_count(l_u_threshold, alpha_u)
    if "overflow" in (levels_y, levels_u):
        warns.append("level count overflow: the power-bound constants exceed the representable range")
    return SizingResult(
        case=case,
        gamma=float(gamma),
        alpha=alpha,
        alpha_u=alpha_u,
        epsilon=observer.epsilon,
        epsilon_bar1=disagreement.epsilon if disagreement is not None else None,
        eta=float(eta),
        eta_bar1=float(eta_bar1) if disagreement is not None else None,
        m_const=float(m_big),
        m_bar1=float(m_bar1) if disagreement is not None else None,
        r_const=float(r_const),
        e_bound=float(e_bound),
        gamma_const=None if gamma_const is None else float(gamma_const),
        delta_bound=None if delta_bound is None else float(delta_bound),
        l_threshold=float(l_threshold),
        l_u_threshold=float(l_u_threshold),
        levels_y=levels_y,
        levels_u=levels_u,
        diagnostics=d,
        warnings=warns,
    )


def _ranking(result: SizingResult) -> tuple[float, float]:
    def log_or_inf(value: float, step: float) -> float:
        return math.log(value / step) if math.isfinite(value) and value > 0 else float("inf")

    return (
        max(log_or_inf(result.l_threshold, result.alpha), log_or_inf(result.l_u_threshold, result.alpha_u)),
        result.epsilon,
    )


def synthesize_protocol(
    plant: LtiPlant,
    net: Network,
    k: np.ndarray,
    g: np.ndarray,
    inputs: SizingInputs,
    alpha: float = 1.0,
    alpha_u: float = 1.0,
) -> SizingResult:
    """Scaling factor, level counts and bound constants for the given gains.

    Parameters
    ----------
    k, g:
        Control gain (``m x n``) and observer gain (``n x p``).
    inputs:
        Initial-condition radii and optional epsilons / gamma. Missing
        epsilons are taken from ``EPSILON_GRID``; every feasible pair is
        sized and the one with the smallest level thresholds is kept.
    alpha, alpha_u:
        Quantizer steps in ``(0, 1]``.

    Returns
    -------
    SizingResult with ``levels_*`` set to ``"overflow"`` when the thresholds
    are not representable.

    Raises
    ------
    InfeasibleError:
        If the gains do not stabilize (``rho(A - G C) >= 1`` or the A1 check
        fails) or no gamma is admissible.
    """
    for name, step in (("alpha", alpha), ("alpha_u", alpha_u)):
        if not (0.0 < step <= 1.0):
            raise ConfigError(f"{name} must lie in (0, 1], got {step}")
    k = plant.gain(k)
    g = plant.observer_gain(g)
    spec = spectrum(net)
    a1 = check_a1(plant, spec, k)
    if not a1.holds:
        raise InfeasibleError(f"K does not satisfy the simultaneous stabilizability check (worst radius {a1.worst_radius:.6g})")
    size = net.n_agents
    observer = observer_error_matrix(plant, g, size)
    if spectral_radius(observer) >= 1.0:
        raise InfeasibleError(f"rho(A - G C) = {spectral_radius(observer):.6g} >= 1")
    split = laplacian_split(net, spec) if spec.lambda2_nonzero else None
    disagreement = disagreement_matrix(plant, split, k) if split is not None and size > 1 else None

    obs_options = (
        [guo_power_bound(observer, inputs.epsilon)] if inputs.epsilon is not None else feasible_epsilons(observer)
    )
    if disagreement is None:
        dis_options: list[GuoBound | None] = [None]
    elif inputs.epsilon_bar1 is not None:
        dis_options = [guo_power_bound(disagreement, inputs.epsilon_bar1)]
    else:
        dis_options = feasible_epsilons(disagreement)
    if not obs_options or not dis_options:
        raise InfeasibleError("no epsilon on the grid gives a power-bound rate below one")

    case = "ii" if spectral_radius(plant.a) < 1.0 - UNSTABLE_TOL and not k.any() and not g.any() else "i"
    results: list[SizingResult] = []
    errors: list[str] = []
    for obs in obs_options:
        for dis in dis_options:
            try:
                results.append(_size(plant, net, k, g, inputs, alpha, alpha_u, obs, dis, split, case))
            except InfeasibleError as exc:
                errors.append(str(exc))
    if not results:
        raise InfeasibleError(errors[0])
    best = min(results, key=_ranking)
    best.warnings.extend(spec.warnings)
    return best


def block_spectral_radius(plant: LtiPlant, net: Network, k: np.ndarray, g: np.ndarray) -> float:
    """``rho(A(K, G))`` of the stacked observer-error / disagreement block matrix."""
    split = laplacian_split(net)
    return spectral_radius(closed_loop_block(plant, net.laplacian, split, plant.gain(k), plant.observer_gain(g)))


# ---------------------------------------------------------------------------
# Empirical level search
# ---------------------------------------------------------------------------


@dataclass
class LevelSearchResult:
    """Smallest saturation-free level counts found on the sampled trials."""

    levels_y: int
    levels_u: int
    joint: int
    """Smallest common level count before per-quantizer refinement."""

    trials: int
    horizon: int
    simulations: int = 0
    warnings: list[str] = field(
        default_factory=lambda: ["heuristic: no saturation on the sampled trials only, not a guarantee"]
    )


def _bisect(predicate: Callable[[int], bool], lo: int, hi: int) -> int:
    """Smallest value in ``[lo, hi]`` satisfying a monotone predicate known to hold at ``hi``."""
    while lo < hi:
        mid = (lo + hi) // 2
        if predicate(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def empirical_level_search(
    plant: LtiPlant,
    net: Network,
    law: ControlLaw,
    comm: CommParams,
    sampler: Callable[[np.random.Generator], InitialConditions],
    horizon: int,
    trials: int,
    seed: int = 0,
    cap: int = LEVEL_SEARCH_CAP,
    mode: str = "quantized",
) -> LevelSearchResult:
    """Bisect level counts until no sampled trial saturates.

    The common count is bisected first, then each quantizer is refined with
    the other held at the common value; the pair is re-checked at the end.

    Raises
    ------
    InfeasibleError:
        If some trial saturates even with ``cap`` levels.
    """
    if trials < 1:
        raise ConfigError(f"trials must be positive, got {trials}")
    rng = np.random.default_rng(seed)
    initials = [sampler(rng) for _ in range(trials)]
    cache: dict[tuple[int, int], tuple[bool, bool]] = {}
    runs = 0

    def saturates(levels_y: int, levels_u: int) -> tuple[bool, bool]:
        nonlocal runs
        key = (levels_y, levels_u)
        if key not in cache:
            state = control = False
            params = comm.with_levels(levels_y, levels_u)
            for ic in initials:
                runs += 1
                cfg = SimConfig(plant, net, law, params, ic, horizon, mode=mode)
                kinds = {ev.kind for ev in simulate_primitive(cfg).saturations}
                state = state or "state" in kinds
                control = control or "control" in kinds
                if state and control:
                    break
            cache[key] = (state, control)
        return cache[key]

    if any(saturates(cap, cap)):
        raise InfeasibleError(f"saturation persists with {cap} levels on the sampled trials")
    joint = _bisect(lambda lv: not any(saturates(lv, lv)), 1, cap)
    levels_y = _bisect(lambda lv: not saturates(lv, joint)[0], 1, joint)
    levels_u = _bisect(lambda lv: not saturates(joint, lv)[1], 1, joint)
    result = LevelSearchResult(
        levels_y=levels_y, levels_u=levels_u, joint=joint, trials=trials, horizon=horizon
    )
    if any(saturates(levels_y, levels_u)):
        result.levels_y = result.levels_u = joint
        result.warnings.append("refined pair saturates; falling back to the common level count")
    result.simulations = runs
    return result
