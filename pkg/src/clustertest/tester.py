"""Cluster-structure testers: parameter schedule, Estimate and PartitionTest.

Two constant profiles are supported.  ``"paper"`` evaluates the closed forms
of the algorithms literally.  ``"calibrated"`` keeps their structure (walk
length proportional to ``ln vol / phi_in^2``, threshold between the YES and
NO bounds) but scales ``s``, ``t``, ``R`` and ``r`` down so that runs
finish at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import spectral
from .generators import add_self_loops_to_degree
from .graph import Graph, GraphOracle, QueryLedger
from .rng import as_generator, split, stream
from .walks import estimate_gram, l2_norm_tests

INF = math.inf
DEFAULT_WALK_BUDGET = 2e8

PROFILES = ("paper", "calibrated")
CALIBRATED_SCALES = {"s_scale": 1e-3, "t_scale": 0.2, "R_scale": 1.0, "r_scale": 1e-2}
_OVERRIDE_KEYS = {"s", "t", "R", "r", "sigma", "mu_thres", "mu_err"} | set(CALIBRATED_SCALES)


class ParameterError(ValueError):
    """Parameters outside the range the algorithms are stated for."""


class BudgetExceeded(RuntimeError):
    """A query-mode run would need more walk steps than the configured budget."""


@dataclass(frozen=True)
class TesterParams:
    k: int
    phi_in: float
    phi_out: float
    beta: float
    eta: float
    vol: int
    s: int
    c: float
    t: int
    sigma: float
    mu_thres: float
    mu_err: float
    R: int
    r: int
    profile: str
    s_exact: float
    t_exact: float
    R_exact: float
    r_exact: float
    yes_bound: float
    no_bound: float
    precondition_ok: bool
    overrides: dict = field(default_factory=dict)

    @property
    def norm_delta(self) -> float:
        """Failure budget of the norm tester implied by ``r``."""
        return 16.0 * math.sqrt(self.vol) / self.r

    def walk_steps(self, mode: str) -> float:
        if mode == "oracle":
            return 0.0
        return float(self.s) * self.t * (self.R + 2.0 * self.r)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TestVerdict:
    __test__ = False  # not a pytest class

    decision: str
    statistic: float
    threshold: float
    queries: dict
    seed: int
    mode: str
    statistics: tuple = ()

    @property
    def accept(self) -> bool:
        return self.decision == "accept"


def decide(statistic: float, threshold: float) -> str:
    """Accept iff the statistic is at most the threshold (ties accept)."""
    return "accept" if statistic <= threshold else "reject"


def _log_term(k: int) -> float:
    return (k + 1) * math.log(12 * (k + 1))


def yes_bound(s: float, phi_in: float, t: float) -> float:
    """Upper bound ``s (1 - phi_in^2/4)^{2t}`` on Estimate for clusterable graphs."""
    return s * (1.0 - phi_in**2 / 4.0) ** (2 * t)


def no_bound(k: int, beta: float, eta: float, vol: float, phi_out: float, t: float) -> float:
    """Lower bound on Estimate that holds w.p. 2/3 for unclusterable graphs."""
    return 8.0 * _log_term(k) / (beta * (1.0 - eta) * vol) * (1.0 - 30.0 * phi_out) ** (2 * t)


def compute_params(
    g,
    k: int,
    phi_in: float,
    phi_out: float,
    beta: float,
    profile: str = "paper",
    overrides: dict | None = None,
    eta: float = 0.5,
) -> TesterParams:
    """Parameter schedule for ``partition_test``.

    ``g`` is a graph or its volume.  ``overrides`` may fix any of
    ``s, t, R, r, sigma, mu_thres, mu_err`` directly or, in the calibrated
    profile, change the scale factors ``s_scale, t_scale, R_scale, r_scale``.
    Integer counts are the ceilings of the real formulas; the formulas
    downstream of ``s`` use the integer ``s`` the algorithm actually samples.
    """
    vol = g.vol if isinstance(g, Graph) else int(g)
    overrides = dict(overrides or {})
    unknown = set(overrides) - _OVERRIDE_KEYS
    if unknown:
        raise ParameterError(f"unknown overrides {sorted(unknown)}")
    if profile not in PROFILES:
        raise ParameterError(f"unknown profile {profile!r}")
    if k < 1:
        raise ParameterError("k must be at least 1")
    if not 0.0 < phi_in <= 1.0:
        raise ParameterError("phi_in must lie in (0, 1]")
    if not 0.0 < beta <= 1.0:
        raise ParameterError("beta must lie in (0, 1]")
    if not 0.0 <= phi_out < 1.0 / 30.0:
        raise ParameterError("phi_out must lie in [0, 1/30)")
    if not 0.0 <= eta < 1.0:
        raise ParameterError("eta must lie in [0, 1)")
    if vol < 2:
        raise ParameterError("graph volume must be at least 2")
    precondition_ok = phi_in**2 > 480.0 * phi_out
    if profile == "paper" and not precondition_ok:
        raise ParameterError(f"need phi_in^2 > 480 phi_out, got {phi_in**2:.6g} <= {480 * phi_out:.6g}")
    if profile == "paper" and set(overrides) & set(CALIBRATED_SCALES):
        raise ParameterError("scale factors apply to the calibrated profile only")

    ln_vol = math.log(vol)
    c = 20 / phi_in**2
    s_exact = 1600 * (k + 1) ** 2 * math.log(12 * (k + 1)) * ln_vol / (beta * (1 - eta))
    t_exact = c * ln_vol
    scales = {**CALIBRATED_SCALES, **{key: overrides[key] for key in CALIBRATED_SCALES if key in overrides}}
    if profile == "paper":
        s = math.ceil(s_exact)
        t = math.ceil(t_exact)
    else:
        s = max(1, math.ceil(scales["s_scale"] * s_exact))
        t = max(1, math.ceil(scales["t_scale"] * t_exact))
    s = int(overrides.get("s", s))
    t = int(overrides.get("t", t))
    if s < 1 or t < 0:
        raise ParameterError("need s >= 1 and t >= 0")

    sigma = float(overrides.get("sigma", 192 * s * k * (1 + eta) / vol))
    yb = yes_bound(s, phi_in, t)
    nb = no_bound(k, beta, eta, vol, phi_out, t)
    if profile == "paper":
        mu_thres = (1 / 2) * (8 * (k + 1) * math.log(12 * (k + 1))) / (beta * (1 - eta)) * vol ** (-1 - 120 * c * phi_out)
        mu_err = (1 / 3) * (8 * (k + 1) * math.log(12 * (k + 1))) / (beta * (1 - eta)) * vol ** (-1 - 120 * c * phi_out)
    else:
        mu_thres = math.sqrt(yb * nb)
        mu_err = max(mu_thres - yb, 0.0)
    mu_thres = float(overrides.get("mu_thres", mu_thres))
    mu_err = float(overrides.get("mu_err", mu_err))

    if mu_err > 0:
        R_exact = max(100 * s**2 * sigma ** (1 / 2) / mu_err, 200 * s**4 * sigma ** (3 / 2) / mu_err**2)
    else:
        R_exact = INF
    r_exact = 192 * s * vol ** (1 / 2)
    if profile == "paper":
        R = R_exact
        r = r_exact
    else:
        R = scales["R_scale"] * R_exact
        r = scales["r_scale"] * r_exact
    R = int(overrides["R"]) if "R" in overrides else (math.ceil(R) if math.isfinite(R) else -1)
    r = int(overrides.get("r", math.ceil(r)))
    if "R" in overrides and R < 1:
        raise ParameterError("R must be at least 1")
    return TesterParams(
        k=k, phi_in=phi_in, phi_out=phi_out, beta=beta, eta=eta, vol=vol,
        s=s, c=c, t=t, sigma=sigma, mu_thres=mu_thres, mu_err=mu_err, R=R, r=r,
        profile=profile, s_exact=s_exact, t_exact=t_exact, R_exact=R_exact, r_exact=r_exact,
        yes_bound=yb, no_bound=nb, precondition_ok=precondition_ok, overrides=overrides,
    )


def sample_sources(g: Graph, s: int, eta: float, rng, ledger: QueryLedger | None = None) -> np.ndarray:
    """``s`` independent degree-proportional samples (with ``eta``-bounded bias)."""
    return GraphOracle(g, as_generator(rng), ledger).sample_many(s, eta)


def oracle_statistic(g: Graph, sources, k: int, t: int, method: str = "auto") -> float:
    """``mu_{k+1}`` of the exact walk Gram matrix of the multiset ``sources``.

    The Gram matrix is formed over distinct sources only and expanded by
    multiplicity, which leaves its nonzero spectrum unchanged.  A multiset of
    at most ``k`` elements has no ``(k+1)``-st eigenvalue; the statistic is 0.
    """
    sources = np.asarray(sources, dtype=np.int64)
    if len(sources) <= k:
        return 0.0
    unique, counts = np.unique(sources, return_counts=True)
    if len(unique) == len(sources):
        return spectral.kth_largest_eigenvalue(spectral.exact_gram(g, sources, t, method), k + 1)
    return spectral.multiset_kth_eigenvalue(spectral.exact_gram(g, unique, t, method), counts, k + 1)


def estimate_oracle(
    g: Graph, k: int, s: int, t: int, eta: float, rng, ledger: QueryLedger | None = None, method: str = "auto"
) -> float:
    """Estimate with exact walk distributions (oracle mode)."""
    return oracle_statistic(g, sample_sources(g, s, eta, rng, ledger), k, t, method)


def query_statistic(
    g: Graph, sources, k: int, t: int, sigma: float, R: int, r: int, rng, ledger: QueryLedger | None = None
) -> float:
    """EstimateWithoutOracle on a given multiset; returns ``INF`` if a source fails the norm test."""
    sources = np.asarray(sources, dtype=np.int64)
    norm_rng, walk_rng = split(rng, 2)
    delta = 16.0 * math.sqrt(g.vol) / r
    if np.any(l2_norm_tests(g, sources, sigma, r, t, norm_rng, delta=delta, ledger=ledger) > sigma / 2.0):
        return INF
    if len(sources) <= k:
        return 0.0
    est = estimate_gram(g, sources, t, R, walk_rng, ledger)
    return spectral.kth_largest_eigenvalue(est, k + 1)


def estimate_query(
    g: Graph,
    k: int,
    s: int,
    t: int,
    sigma: float,
    R: int,
    eta: float,
    rng,
    r: int | None = None,
    ledger: QueryLedger | None = None,
) -> float:
    """EstimateWithoutOracle: sample, norm-test every source, estimate the Gram matrix by walks."""
    if r is None:
        r = math.ceil(192.0 * s * math.sqrt(g.vol))
    sample_rng, rest = split(rng, 2)
    sources = sample_sources(g, s, eta, sample_rng, ledger)
    return query_statistic(g, sources, k, t, sigma, R, r, rest, ledger)


def _check_budget(params: TesterParams, mode: str, walk_budget: float) -> None:
    if mode != "query":
        return
    if params.R < 1:
        raise BudgetExceeded("R is unbounded (mu_err = 0)")
    steps = params.walk_steps(mode)
    if steps > walk_budget:
        raise BudgetExceeded(f"query mode needs {steps:.3g} walk steps, budget is {walk_budget:.3g}")


def partition_test(
    g: Graph,
    k: int,
    phi_in: float,
    phi_out: float,
    beta: float,
    mode: str = "oracle",
    profile: str = "calibrated",
    seed: int = 0,
    eta: float = 0.5,
    overrides: dict | None = None,
    repetitions: int = 1,
    walk_budget: float = DEFAULT_WALK_BUDGET,
    params: TesterParams | None = None,
    ledger: QueryLedger | None = None,
) -> TestVerdict:
    """Accept iff Estimate is at most ``mu_thres``.

    With ``repetitions = Q`` (odd) the test runs ``Q`` independent times and
    takes the majority; the reported statistic is the median, so the
    decision is still ``median <= threshold``.
    """
    if mode not in ("oracle", "query"):
        raise ParameterError(f"unknown mode {mode!r}")
    if repetitions < 1 or repetitions % 2 == 0:
        raise ParameterError("repetitions must be a positive odd number")
    if params is None:
        params = compute_params(g, k, phi_in, phi_out, beta, profile, overrides, eta)
    _check_budget(params, mode, walk_budget)
    ledger = ledger if ledger is not None else QueryLedger()
    stats = []
    for rep in range(repetitions):
        rng = stream(seed, "partition_test", rep)
        if mode == "oracle":
            stats.append(estimate_oracle(g, params.k, params.s, params.t, params.eta, rng, ledger))
        else:
            stats.append(
                estimate_query(g, params.k, params.s, params.t, params.sigma, params.R, params.eta, rng, params.r, ledger)
            )
    statistic = float(np.median(stats))
    return TestVerdict(
        decision=decide(statistic, params.mu_thres),
        statistic=statistic,
        threshold=params.mu_thres,
        queries=ledger.as_dict(),
        seed=seed,
        mode=mode,
        statistics=tuple(stats),
    )


def clusterability_mapping(k: int, phi_prime: float, eps: float, variant: str, c: float = 1.0, c_exp: float = 1.0):
    """``(beta, phi_out)`` for testing the self-loop regularized graph.

    ``k_k``: ``phi_out = c k^2 phi' / eps^2``.  ``k_2k``:
    ``phi_out = (4 * 1152 / eps^2) (700 / c_exp) phi' ln(32k/eps)``.
    Both use ``beta = eps^2 / 1152``.  ``c`` and ``c_exp`` are unspecified
    constants and default to 1.
    """
    if not 0.0 < eps <= 1.0:
        raise ParameterError("eps must lie in (0, 1]")
    beta = eps**2 / 1152.0
    if variant == "k_k":
        phi_out = c * k**2 * phi_prime / eps**2
    elif variant == "k_2k":
        phi_out = (4.0 * 1152.0 / eps**2) * (700.0 / c_exp) * phi_prime * math.log(32.0 * k / eps)
    else:
        raise ParameterError(f"unknown variant {variant!r}")
    return beta, phi_out


def clusterability_test(
    g: Graph,
    k: int,
    phi: float,
    phi_prime: float,
    eps: float,
    d: int,
    variant: str = "k_k",
    seed: int = 0,
    mode: str = "oracle",
    profile: str = "calibrated",
    c: float = 1.0,
    c_exp: float = 1.0,
    **kwargs,
) -> TestVerdict:
    """Bounded-degree clusterability via PartitionTest on the regularized graph.

    Self-loops bring every degree up to ``d``; conductances of the result
    equal the bounded-degree conductances of ``g``.  Both variants test with
    ``k`` on the regularized graph.
    """
    if g.deg.max(initial=0) > d:
        raise ParameterError(f"max degree {int(g.deg.max())} exceeds d={d}")
    beta, phi_out = clusterability_mapping(k, phi_prime, eps, variant, c, c_exp)
    regular = add_self_loops_to_degree(g, d)
    return partition_test(regular, k, phi, phi_out, beta, mode=mode, profile=profile, seed=seed, **kwargs)
