"""Parameter estimation and information criteria.

Three routes with one result type:

* ``fit_mple`` — logistic regression of tie indicators on change scores at the
  observed network (IRLS).  Fast screen; exact likelihood for
  dyad-independent models.
* ``fit_mcmle`` — Monte-Carlo Newton iterations on the likelihood gradient
  ``s(y) - E_theta[s(Y)]``, Fisher information estimated from the sampled
  statistic covariance, with step-halving damping.  The final log-likelihood
  comes from ``log_lik_mc`` (path sampling against a Bernoulli reference).
* ``exact_fit`` — full enumeration of all graphs (dyad count <= 21); test
  oracle for the normalizing constant and the true MLE.

``bic = -2 * log_lik + k * log(n_d)`` throughout, with ``n_d`` ordered dyads
for directed networks and unordered for undirected.  Failed MPLE fits report
the pseudolikelihood at the coefficients they stopped at (separation keeps
its drifted estimate, flagged); failed simulation-based fits carry
``log_lik = -inf`` so the identity still holds and they sort last.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .network import Network
from .sampler import SampleBatch, SimControls, default_controls, derive_seed, simulate
from .terms import ModelSpec, TermSpec, change_vector, model_statistics

SEPARATION_BOUND = 15.0
MCMLE_MAX_ITER = 20
MCMLE_GRAD_TOL = 0.05
MCMLE_MAX_STEP = 2.0   # trust region: near-degenerate batches give wild Newton directions
BRIDGE_POINTS = 10
EXACT_MAX_DYADS = 21


class EstimationError(RuntimeError):
    pass


class BridgeError(EstimationError):
    """A path-sampling batch was unusable (frozen chain)."""


def bic_value(log_lik: float, k: int, n_d: int) -> float:
    return -2.0 * log_lik + k * math.log(n_d)


@dataclass(frozen=True)
class FitResult:
    spec: ModelSpec
    theta: np.ndarray
    method: str                      # mple | mcmle | exact
    converged: bool
    log_lik: float
    bic: float
    iterations: int = 0
    controls: Optional[SimControls] = None
    failure: Optional[str] = None
    seed_schedule: tuple = field(default_factory=tuple)

    def coefficients(self) -> dict:
        return {t.canonical_name: float(v)
                for t, v in zip(self.spec.terms, self.theta)}

    def to_dict(self) -> dict:
        d = {
            "terms": self.spec.term_names(),
            "coefficients": _jsonable_floats(self.coefficients()),
            "method": self.method,
            "converged": self.converged,
            "log_lik": _jsonable(self.log_lik),
            "bic": _jsonable(self.bic),
            "iterations": self.iterations,
        }
        if self.controls is not None:
            d["controls"] = self.controls.to_dict()
        if self.failure is not None:
            d["failure"] = self.failure
        if self.seed_schedule:
            d["seed_schedule"] = [
                [v if isinstance(v, str) else int(v) for v in entry]
                for entry in self.seed_schedule]
        return d


def _jsonable(x: float):
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _jsonable_floats(d: dict) -> dict:
    return {k: _jsonable(v) for k, v in d.items()}


def _failed_fit(spec: ModelSpec, method: str, reason: str,
                theta: Optional[np.ndarray] = None, iterations: int = 0,
                controls: Optional[SimControls] = None) -> FitResult:
    if theta is None:
        theta = np.zeros(len(spec.terms))
    return FitResult(spec=spec, theta=theta, method=method, converged=False,
                     log_lik=-math.inf, bic=math.inf, iterations=iterations,
                     controls=controls, failure=reason)


# ---------------------------------------------------------------------------
# MPLE
# ---------------------------------------------------------------------------


def pseudolikelihood_design(spec: ModelSpec, net: Network
                            ) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix of change-score vectors at the observed network and the
    binary tie response, one row per dyad."""
    dyads = net.dyads()
    X = np.empty((len(dyads), len(spec.terms)))
    t = np.empty(len(dyads))
    for r, (i, j) in enumerate(dyads):
        X[r, :] = change_vector(spec, net, i, j)
        t[r] = 1.0 if net.has_edge(i, j) else 0.0
    return X, t


def _pl_log_lik(X: np.ndarray, t: np.ndarray, theta: np.ndarray) -> float:
    eta = np.clip(X @ theta, -500, 500)
    # log sigmoid(eta) for ties, log sigmoid(-eta) for non-ties
    return float(np.sum(t * -np.logaddexp(0.0, -eta)
                        + (1.0 - t) * -np.logaddexp(0.0, eta)))


def fit_mple(spec: ModelSpec, net: Network, max_iter: int = 50,
             tol: float = 1e-10) -> FitResult:
    """Maximum pseudolikelihood via iteratively reweighted least squares.

    Separation (coefficient max-norm drifting past ``SEPARATION_BOUND``) and
    rank-deficient designs are reported as failed fits rather than raised, so
    screening can discard them with a reason.
    """
    X, t = pseudolikelihood_design(spec, net)
    k = X.shape[1]
    n_d = X.shape[0]
    if np.linalg.matrix_rank(X) < k:
        theta0 = np.zeros(k)
        ll = _pl_log_lik(X, t, theta0)
        return FitResult(spec=spec, theta=theta0, method="mple",
                         converged=False, log_lik=ll,
                         bic=bic_value(ll, k, n_d), failure="rank_deficient")

    theta = np.zeros(k)
    converged = False
    failure = None
    it = 0
    for it in range(1, max_iter + 1):
        eta = np.clip(X @ theta, -30, 30)
        p = expit(eta)
        w = p * (1.0 - p)
        H = X.T @ (X * w[:, None])
        grad = X.T @ (t - p)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            failure = "rank_deficient"
            break
        theta = theta + step
        if np.max(np.abs(theta)) > SEPARATION_BOUND:
            failure = "separation"
            break
        if np.max(np.abs(step)) < tol:
            converged = True
            break
    if not converged and failure is None:
        failure = "no_convergence"

    ll = _pl_log_lik(X, t, theta)
    return FitResult(spec=spec, theta=theta, method="mple",
                     converged=converged, log_lik=ll,
                     bic=bic_value(ll, k, n_d), iterations=it,
                     failure=failure)


# ---------------------------------------------------------------------------
# MCMLE
# ---------------------------------------------------------------------------


def _mc_loglik_ratio(dtheta: np.ndarray, s_obs: np.ndarray,
                     stats: np.ndarray) -> float:
    """Estimate of l(theta + dtheta) - l(theta) from a batch drawn at theta."""
    shifts = stats @ dtheta
    return float(dtheta @ s_obs - (logsumexp(shifts) - math.log(len(shifts))))


def fit_mcmle(spec: ModelSpec, net: Network,
              init: Optional[Sequence[float]] = None,
              controls: Optional[SimControls] = None,
              compute_log_lik: bool = True,
              bridge_points: int = BRIDGE_POINTS) -> FitResult:
    """Monte-Carlo maximum likelihood by damped Newton steps.

    Each outer iteration simulates a fresh batch at the current estimate,
    takes the Newton direction from the sampled-statistic covariance, and
    halves the step until the Monte-Carlo log-likelihood-ratio estimate is
    non-decreasing.  Converged when every coordinate of the gradient is
    within ``MCMLE_GRAD_TOL`` sampled standard deviations of zero; the batch
    that certifies convergence also supplies a last Newton polish, so the
    reported estimate carries Monte-Carlo noise rather than the full width
    of the stopping region.
    """
    controls = controls or default_controls(net, seed=0)
    k = len(spec.terms)
    if init is None:
        mple = fit_mple(spec, net)
        if mple.failure == "rank_deficient":
            return _failed_fit(spec, "mcmle", "rank_deficient_init",
                               controls=controls)
        init = mple.theta
    theta = np.asarray(init, dtype=float).copy()
    if theta.shape != (k,):
        raise EstimationError(f"init has shape {theta.shape}, expected ({k},)")
    if not np.all(np.isfinite(theta)):
        raise EstimationError("init must be finite")

    s_obs = model_statistics(spec, net)
    seeds = []
    converged = False
    it = 0
    for it in range(1, MCMLE_MAX_ITER + 1):
        seed_m = derive_seed(controls.seed, 1, it)
        seeds.append(("mcmle_batch", it, seed_m))
        batch = simulate(spec, theta, net, replace(controls, seed=seed_m))
        stats = batch.statistics
        mu = stats.mean(axis=0)
        sd = stats.std(axis=0, ddof=1)
        grad = s_obs - mu
        scale = np.where(sd > 0, sd, 1.0)
        if np.max(np.abs(grad) / scale) <= MCMLE_GRAD_TOL:
            converged = True
            if np.all(sd > 0):
                try:
                    fisher = np.cov(stats.T).reshape(k, k)
                    polish = np.linalg.solve(fisher, grad)
                    if (np.all(np.isfinite(polish))
                            and np.max(np.abs(polish)) <= MCMLE_MAX_STEP
                            and _mc_loglik_ratio(polish, s_obs, stats) >= 0.0):
                        theta = theta + polish
                except np.linalg.LinAlgError:
                    pass
            break
        if np.any(sd == 0):
            return _failed_fit(spec, "mcmle", "singular_fisher",
                               theta=theta, iterations=it, controls=controls)
        fisher = np.cov(stats.T).reshape(k, k)
        try:
            direction = np.linalg.solve(fisher, grad)
        except np.linalg.LinAlgError:
            return _failed_fit(spec, "mcmle", "singular_fisher",
                               theta=theta, iterations=it, controls=controls)
        widest = np.max(np.abs(direction))
        if widest > MCMLE_MAX_STEP:
            direction = direction * (MCMLE_MAX_STEP / widest)
        step = None
        alpha = 1.0
        while alpha >= 1.0 / 1024:
            cand = alpha * direction
            if _mc_loglik_ratio(cand, s_obs, stats) >= 0.0:
                step = cand
                break
            alpha /= 2.0
        if step is None:
            return _failed_fit(spec, "mcmle", "step_halving_stalled",
                               theta=theta, iterations=it, controls=controls)
        theta = theta + step
        if not np.all(np.isfinite(theta)):
            return _failed_fit(spec, "mcmle", "non_finite_trajectory",
                               iterations=it, controls=controls)

    if not converged:
        return _failed_fit(spec, "mcmle", "max_iterations",
                           theta=theta, iterations=it, controls=controls)

    if compute_log_lik:
        try:
            ll = log_lik_mc(spec, theta, net, controls,
                            bridge_points=bridge_points)
        except BridgeError as exc:
            return _failed_fit(spec, "mcmle", f"bridge: {exc}",
                               theta=theta, iterations=it, controls=controls)
    else:
        ll = -math.inf
    return FitResult(spec=spec, theta=theta, method="mcmle", converged=True,
                     log_lik=ll, bic=bic_value(ll, k, net.dyad_count),
                     iterations=it, controls=controls,
                     seed_schedule=tuple(seeds))


# ---------------------------------------------------------------------------
# Monte-Carlo log-likelihood via path sampling
# ---------------------------------------------------------------------------


def bernoulli_log_lik(theta_edges: float, edge_count: int, n_d: int) -> float:
    """Closed-form log-likelihood of the edges-only model."""
    # log(1 + e^t) computed stably for either sign of t
    log1pexp = theta_edges + math.log1p(math.exp(-theta_edges)) \
        if theta_edges > 0 else math.log1p(math.exp(theta_edges))
    return theta_edges * edge_count - n_d * log1pexp


def _reference_theta(spec: ModelSpec, net: Network) -> tuple[np.ndarray, float]:
    """Bernoulli reference point: edges coefficient at the logit of density
    (clamped away from empty/complete), zero elsewhere."""
    k = len(spec.terms)
    ref = np.zeros(k)
    n_d = net.dyad_count
    m = net.edge_count
    idx = next((c for c, t in enumerate(spec.terms) if t.family == "edges"), None)
    if idx is None:
        return ref, -n_d * math.log(2.0)
    if 0 < m < n_d:
        p = m / n_d
    else:
        p = (m + 0.5) / (n_d + 1.0)
    ref[idx] = math.log(p / (1.0 - p))
    return ref, bernoulli_log_lik(ref[idx], m, n_d)


def bridge_controls(net: Network, seed: int, draws: int = 250) -> SimControls:
    nd = max(net.dyad_count, 1)
    return SimControls(burn_in=10 * nd, thin=nd, draws=draws, seed=seed)


def log_lik_mc(spec: ModelSpec, theta_hat: Sequence[float], net: Network,
               controls: Optional[SimControls] = None,
               bridge_points: int = BRIDGE_POINTS) -> float:
    """Monte-Carlo log-likelihood at ``theta_hat``.

    Thermodynamic integration along a linear bridge from the Bernoulli
    reference: the normalizing-constant difference is the path integral of
    ``(theta_hat - theta_ref) . E_u[s(Y)]``, estimated by the midpoint rule
    with a fresh batch per bridge point.  Edges-only specs short-circuit to
    the closed form (a bridge of length zero).
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    n_d = net.dyad_count
    m = net.edge_count
    if len(spec.terms) == 1 and spec.terms[0].family == "edges":
        return bernoulli_log_lik(float(theta_hat[0]), m, n_d)

    base = controls.seed if controls is not None else 0
    ref, ll_ref = _reference_theta(spec, net)
    dtheta = theta_hat - ref
    s_obs = model_statistics(spec, net)
    draws = controls.draws if controls is not None else 250

    psi_delta = 0.0
    for q in range(1, bridge_points + 1):
        u = (q - 0.5) / bridge_points
        seed_q = derive_seed(base, 2, q)
        batch = simulate(spec, ref + u * dtheta, net,
                         bridge_controls(net, seed_q, draws=draws))
        if batch.draws > 1 and float(batch.statistics.std()) == 0.0:
            raise BridgeError(f"frozen chain at bridge point {q}")
        psi_delta += float(dtheta @ batch.statistics.mean(axis=0)) / bridge_points
    return ll_ref + float(dtheta @ s_obs) - psi_delta


# ---------------------------------------------------------------------------
# exact small-graph oracle
# ---------------------------------------------------------------------------


def _all_graph_statistics(spec: ModelSpec, net: Network) -> np.ndarray:
    dyads = net.dyads()
    n_d = len(dyads)
    if n_d > EXACT_MAX_DYADS:
        raise EstimationError(
            f"exact enumeration needs dyad count <= {EXACT_MAX_DYADS}, got {n_d}")
    S = np.empty((2 ** n_d, len(spec.terms)))
    for mask in range(2 ** n_d):
        edges = [dyads[b] for b in range(n_d) if mask >> b & 1]
        y = Network(net.node_count, net.directed, edges, net.attributes)
        S[mask, :] = model_statistics(spec, y)
    return S


def exact_psi(spec: ModelSpec, net: Network, theta: Sequence[float],
              _S: Optional[np.ndarray] = None) -> float:
    """log of the normalizing constant by full enumeration."""
    S = _all_graph_statistics(spec, net) if _S is None else _S
    return float(logsumexp(S @ np.asarray(theta, dtype=float)))


def exact_log_lik(spec: ModelSpec, net: Network, theta: Sequence[float]) -> float:
    theta = np.asarray(theta, dtype=float)
    s_obs = model_statistics(spec, net)
    return float(theta @ s_obs) - exact_psi(spec, net, theta)


def exact_fit(spec: ModelSpec, net: Network, tol: float = 1e-10,
              max_iter: int = 100) -> FitResult:
    """Exact MLE by Newton on the enumerated log-likelihood (test oracle)."""
    S = _all_graph_statistics(spec, net)
    s_obs = model_statistics(spec, net)
    k = len(spec.terms)
    theta = np.zeros(k)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        logw = S @ theta
        logZ = logsumexp(logw)
        w = np.exp(logw - logZ)
        mean = w @ S
        grad = s_obs - mean
        if np.max(np.abs(grad)) <= tol:
            converged = True
            break
        centered = S - mean
        cov = centered.T @ (centered * w[:, None])
        try:
            theta = theta + np.linalg.solve(cov, grad)
        except np.linalg.LinAlgError:
            return _failed_fit(spec, "exact", "singular_information",
                               theta=theta, iterations=it)
        if np.max(np.abs(theta)) > 50:
            return _failed_fit(spec, "exact", "no_finite_mle",
                               theta=theta, iterations=it)
    ll = float(theta @ s_obs) - exact_psi(spec, net, theta, _S=S)
    return FitResult(spec=spec, theta=theta, method="exact",
                     converged=converged, log_lik=ll,
                     bic=bic_value(ll, k, net.dyad_count), iterations=it,
                     failure=None if converged else "max_iterations")
