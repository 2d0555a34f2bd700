"""Hyperparameter estimation and the Bayesian likelihood ratio.

Under the defense hypothesis the trace joins the suspect's singleton block
with probability (1 - alpha)/(n + 1 + theta), under the prosecution hypothesis
with probability one. Averaging over the posterior of (alpha, theta) given the
database plus suspect gives LR = n / E(Phi | pi_[n+1]) with
Phi = n (1 - alpha)/(n + 1 + theta).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Any, NamedTuple

import numpy as np
from scipy import optimize, stats
from scipy.special import expit, logit, logsumexp

from .partitions import (
    IntegerPartition,
    NotRareTypeError,
    SetPartition,
    is_rare_type,
    to_integer_partition,
)
from .pyp import HyperParams, log_eppf_arrays, log_k_alpha_estimate

if TYPE_CHECKING:
    from collections.abc import Callable, Iterator, Sequence

    import numpy.typing as npt

logger = logging.getLogger(__name__)

DEFAULT_THETA_RATE = 1 / 500
MAX_LOG_SHIFT = 700.0


class BoundaryEstimateError(ValueError):
    """A plug-in value was requested from a flagged maximum likelihood fit."""


def phi(
    alpha: npt.ArrayLike,
    theta: npt.ArrayLike,
    n: int,
) -> Any:  # noqa: ANN401
    """n (1 - alpha)/(n + 1 + theta), elementwise for arrays."""
    a = np.asarray(alpha, dtype=np.float64)
    t = np.asarray(theta, dtype=np.float64)
    out = n * (1.0 - a) / (n + 1.0 + t)
    return float(out) if out.ndim == 0 else out


class PriorKind(str, Enum):
    """How the hyperprior is put together."""

    PRODUCT_UNIFORM = "uniform"
    PRODUCT_INDEPENDENT = "independent"
    POINT_MASS = "point"


_THETA_DENSITIES: dict[str, int] = {"exponential": 1, "gamma": 2, "uniform": 2}


@dataclass(frozen=True)
class Hyperprior:
    """A prior over (alpha, theta).

    alpha is uniform on alpha_range. theta independently follows a named
    density: exponential(rate), gamma(shape, rate) or uniform(lo, hi). A
    product-uniform prior is the independent prior with a uniform theta.
    """

    kind: PriorKind = PriorKind.PRODUCT_INDEPENDENT
    alpha_range: tuple[float, float] = (0.0, 1.0)
    theta_density: str = "exponential"
    theta_params: tuple[float, ...] = (DEFAULT_THETA_RATE,)
    point: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        """Checks that the prior lives inside the PD parameter space.

        Raises:
            ValueError: If the prior has mass outside 0 <= alpha < 1, theta > -alpha.
        """
        if self.kind == PriorKind.POINT_MASS:
            if self.point is None:
                msg = "A point-mass prior needs a point."
                raise ValueError(msg)
            HyperParams(*self.point)
            return

        lo, hi = self.alpha_range
        if not (0.0 <= lo < hi <= 1.0):
            msg = f"alpha range {self.alpha_range} is outside [0, 1]."
            raise ValueError(msg)
        if self.kind == PriorKind.PRODUCT_UNIFORM and self.theta_density != "uniform":
            msg = "A product-uniform prior needs a uniform theta density."
            raise ValueError(msg)
        if self.theta_density not in _THETA_DENSITIES:
            msg = f"Unknown theta density {self.theta_density!r}."
            raise ValueError(msg)
        if len(self.theta_params) != _THETA_DENSITIES[self.theta_density]:
            msg = f"Wrong number of parameters for {self.theta_density}: {self.theta_params}."
            raise ValueError(msg)
        if self.theta_density == "uniform" and not (
            0.0 <= self.theta_params[0] < self.theta_params[1]
        ):
            msg = f"theta range {self.theta_params} must lie in [0, inf)."
            raise ValueError(msg)
        if self.theta_density != "uniform" and any(v <= 0 for v in self.theta_params):
            msg = f"{self.theta_density} parameters must be positive."
            raise ValueError(msg)

    @staticmethod
    def point_mass(alpha: float, theta: float) -> Hyperprior:
        """All prior mass on (alpha, theta)."""
        return Hyperprior(kind=PriorKind.POINT_MASS, point=(alpha, theta))

    @staticmethod
    def parse(spec: str) -> Hyperprior:
        """Reads a short prior description.

        Accepted forms are `default`, `point:A,T`, `uniform:ALO,AHI:TLO,THI` and
        `independent:ALO,AHI:DENSITY:P1[,P2]`.

        Raises:
            ValueError: If the description is malformed.
        """
        parts = spec.strip().split(":")
        try:
            kind = parts[0].lower()
            if kind == "default" and len(parts) == 1:
                return Hyperprior()
            if kind == PriorKind.POINT_MASS.value and len(parts) == 2:  # noqa: PLR2004
                a, t = _floats(parts[1], 2)
                return Hyperprior.point_mass(a, t)
            if kind == PriorKind.PRODUCT_UNIFORM.value and len(parts) == 3:  # noqa: PLR2004
                return Hyperprior(
                    kind=PriorKind.PRODUCT_UNIFORM,
                    alpha_range=_floats(parts[1], 2),  # type: ignore[arg-type]
                    theta_density="uniform",
                    theta_params=_floats(parts[2], 2),
                )
            if kind == PriorKind.PRODUCT_INDEPENDENT.value and len(parts) == 4:  # noqa: PLR2004
                return Hyperprior(
                    kind=PriorKind.PRODUCT_INDEPENDENT,
                    alpha_range=_floats(parts[1], 2),  # type: ignore[arg-type]
                    theta_density=parts[2].lower(),
                    theta_params=_floats(parts[3], None),
                )
        except ValueError as e:
            msg = f"Malformed prior {spec!r}: {e}"
            raise ValueError(msg) from e

        msg = f"Malformed prior {spec!r}."
        raise ValueError(msg)

    def describe(self) -> str:
        """The inverse of parse."""
        if self.kind == PriorKind.POINT_MASS and self.point is not None:
            return f"point:{self.point[0]},{self.point[1]}"
        a = f"{self.alpha_range[0]},{self.alpha_range[1]}"
        t = ",".join(str(v) for v in self.theta_params)
        if self.kind == PriorKind.PRODUCT_UNIFORM:
            return f"uniform:{a}:{t}"
        return f"independent:{a}:{self.theta_density}:{t}"

    def theta_distribution(self) -> Any:  # noqa: ANN401
        """The scipy frozen distribution of theta."""
        p = self.theta_params
        if self.theta_density == "exponential":
            return stats.expon(scale=1 / p[0])
        if self.theta_density == "gamma":
            return stats.gamma(a=p[0], scale=1 / p[1])
        return stats.uniform(loc=p[0], scale=p[1] - p[0])

    def theta_support(self) -> tuple[float, float]:
        """The interval theta lives on."""
        lo, hi = self.theta_distribution().support()
        return (float(lo), float(hi))

    def log_density(
        self,
        alpha: npt.ArrayLike,
        theta: npt.ArrayLike,
    ) -> npt.NDArray[np.float64]:
        """The joint log density, -inf outside the support."""
        a = np.asarray(alpha, dtype=np.float64)
        lo, hi = self.alpha_range
        in_range = (a > lo) & (a < hi)
        with np.errstate(divide="ignore"):
            la = np.where(in_range, -math.log(hi - lo), -np.inf)
            lt = self.theta_distribution().logpdf(theta)
        return np.asarray(la + lt, dtype=np.float64)


def _floats(text: str, count: int | None) -> tuple[float, ...]:
    values = tuple(float(v) for v in text.split(","))
    if count is not None and len(values) != count:
        msg = f"expected {count} numbers in {text!r}"
        raise ValueError(msg)
    return values


@dataclass(frozen=True)
class OptimizerOptions:
    """Settings for the multi-start maximum likelihood search."""

    starts: tuple[tuple[float, float], ...] = (
        (0.5, 1.0),
        (0.2, 10.0),
        (0.8, 10.0),
        (0.5, 100.0),
        (0.5, 1000.0),
    )
    xatol: float = 1e-8
    fatol: float = 1e-9
    maxiter: int = 4000
    boundary_tolerance: float = 1e-3
    theta_max: float = 1e7
    fd_step: float = 1e-4


@dataclass(frozen=True)
class MleResult:
    """The maximum likelihood estimate of (alpha, theta) for one partition."""

    n: int
    alpha_hat: float
    theta_hat: float
    loglik_at_max: float
    """Negated Hessian of the log-likelihood at the estimate, in (alpha, theta)."""
    observed_fisher: tuple[tuple[float, float], tuple[float, float]]
    converged: bool
    n_restarts_used: int
    at_boundary: bool = False
    alpha_log_ratio: float = math.nan

    @property
    def flagged(self) -> bool:
        """Whether the estimate shouldn't be used as a plug-in value."""
        return self.at_boundary or not self.converged

    def fisher(self) -> npt.NDArray[np.float64]:
        """observed_fisher as an array."""
        return np.array(self.observed_fisher, dtype=np.float64)

    def to_json(self) -> dict[str, Any]:
        """A JSON compatible form."""
        d = asdict(self)
        d["observed_fisher"] = [list(r) for r in self.observed_fisher]
        return d


def _loglik(ip: IntegerPartition) -> Callable[[float, float], float]:
    def f(alpha: float, theta: float) -> float:
        return float(log_eppf_arrays(ip, alpha, theta))

    return f


def _hessian(
    f: Callable[[npt.NDArray[np.float64]], float],
    x: npt.NDArray[np.float64],
    h: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """Central difference Hessian, symmetric by construction."""
    d = len(x)
    out = np.zeros((d, d))
    f0 = f(x)
    e = np.eye(d) * h
    for i in range(d):
        out[i, i] = (f(x + e[i]) - 2 * f0 + f(x - e[i])) / h[i] ** 2
        for j in range(i):
            out[i, j] = (
                f(x + e[i] + e[j])
                - f(x + e[i] - e[j])
                - f(x - e[i] + e[j])
                + f(x - e[i] - e[j])
            ) / (4 * h[i] * h[j])
            out[j, i] = out[i, j]
    return out


def observed_fisher(
    p: SetPartition | IntegerPartition,
    alpha: float,
    theta: float,
    fd_step: float = 1e-4,
) -> npt.NDArray[np.float64]:
    """Negated finite-difference Hessian of the log-likelihood at (alpha, theta)."""
    ip = to_integer_partition(p)
    ll = _loglik(ip)
    h_alpha = min(fd_step, alpha / 2, (1 - alpha) / 2)
    h_theta = min(fd_step * max(1.0, abs(theta)), (theta + alpha) / 4)
    if h_alpha <= 0 or h_theta <= 0:
        return np.full((2, 2), np.nan)
    with np.errstate(all="ignore"):
        hess = _hessian(
            lambda x: ll(float(x[0]), float(x[1])),
            np.array([alpha, theta]),
            np.array([h_alpha, h_theta]),
        )
    return np.asarray(-hess, dtype=np.float64)


def _to_free(alpha: float, theta: float) -> npt.NDArray[np.float64]:
    return np.array([logit(alpha), math.log(theta + alpha)])


def _from_free(u: npt.NDArray[np.float64]) -> tuple[float, float]:
    alpha = float(expit(u[0]))
    theta = math.exp(min(float(u[1]), MAX_LOG_SHIFT)) - alpha
    return (alpha, theta)


def mle_fit(
    p: SetPartition | IntegerPartition,
    options: OptimizerOptions | None = None,
) -> MleResult:
    """Maximizes the Pitman sampling formula over 0 < alpha < 1, theta > -alpha.

    The search runs Nelder-Mead in (logit alpha, log(theta + alpha)) from each
    configured start and keeps the best end point. Partitions with a single
    block or only singletons have no interior maximum and are flagged as
    boundary estimates, as are fits drifting to alpha in {0, 1} or huge theta.

    Raises:
        ValueError: If the partition has fewer than two elements.
    """
    options = options or OptimizerOptions()
    ip = to_integer_partition(p)
    if ip.n < 2:  # noqa: PLR2004
        msg = f"Maximum likelihood needs at least two observations, got {ip.n}."
        raise ValueError(msg)

    ll = _loglik(ip)

    def objective(u: npt.NDArray[np.float64]) -> float:
        alpha, theta = _from_free(u)
        if not (0 < alpha < 1) or theta <= -alpha:
            return math.inf
        v = ll(alpha, theta)
        return -v if math.isfinite(v) else math.inf

    best: Any = None
    converged = False
    for a0, t0 in options.starts:
        res = optimize.minimize(
            objective,
            _to_free(a0, t0),
            method="Nelder-Mead",
            options={"xatol": options.xatol, "fatol": options.fatol, "maxiter": options.maxiter},
        )
        if best is None or res.fun < best.fun:
            best = res
            converged = bool(res.success)

    alpha_hat, theta_hat = _from_free(best.x)
    degenerate = ip.k in (1, ip.n)
    at_boundary = (
        degenerate
        or alpha_hat < options.boundary_tolerance
        or alpha_hat > 1 - options.boundary_tolerance
        or theta_hat > options.theta_max
    )
    if not converged:
        logger.warning("Maximum likelihood search did not converge for n=%d", ip.n)
    if at_boundary:
        logger.warning(
            "Maximum likelihood estimate (%.4g, %.4g) is at the boundary for n=%d, k=%d",
            alpha_hat,
            theta_hat,
            ip.n,
            ip.k,
        )

    fisher = observed_fisher(ip, alpha_hat, theta_hat, options.fd_step)
    return MleResult(
        n=ip.n,
        alpha_hat=alpha_hat,
        theta_hat=theta_hat,
        loglik_at_max=-float(best.fun),
        observed_fisher=(
            (float(fisher[0, 0]), float(fisher[0, 1])),
            (float(fisher[1, 0]), float(fisher[1, 1])),
        ),
        converged=converged,
        n_restarts_used=len(options.starts),
        at_boundary=at_boundary,
        alpha_log_ratio=log_k_alpha_estimate(ip),
    )


def lr_plugin(n: int, m: MleResult) -> float:
    """(n + 1 + theta_hat)/(1 - alpha_hat).

    Raises:
        BoundaryEstimateError: If the estimate is flagged.
    """
    if m.flagged:
        msg = (
            f"Cannot plug in the estimate ({m.alpha_hat:.4g}, {m.theta_hat:.4g}), "
            "it is flagged as boundary or non-converged."
        )
        raise BoundaryEstimateError(msg)
    return (n + 1 + m.theta_hat) / (1 - m.alpha_hat)


@dataclass(frozen=True)
class QuadratureOptions:
    """Settings for the posterior expectation of Phi."""

    orders: tuple[int, ...] = (8, 16, 32, 64, 128)
    tolerance: float = 1e-6
    fd_step: float = 1e-3
    optimizer: OptimizerOptions = field(default_factory=OptimizerOptions)


class PosteriorMean(NamedTuple):
    """E(Phi | pi_[n+1]) with the change over the last refinement."""

    value: float
    error_estimate: float
    converged: bool


class _SupportMap:
    """Maps the plane onto the prior's support.

    Bounded intervals use a scaled logistic, half lines an exponential, so
    every quadrature node lands inside the support.
    """

    def __init__(self, prior: Hyperprior):
        self.a_lo, self.a_hi = prior.alpha_range
        self.t_lo, self.t_hi = prior.theta_support()

    def to_params(
        self,
        u: npt.NDArray[np.float64],
    ) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], npt.NDArray[np.float64]]:
        u1, u2 = u[..., 0], u[..., 1]
        a_width = self.a_hi - self.a_lo
        alpha = self.a_lo + a_width * expit(u1)
        log_jac = math.log(a_width) - np.logaddexp(0, u1) - np.logaddexp(0, -u1)
        if math.isinf(self.t_hi):
            u2c = np.minimum(u2, MAX_LOG_SHIFT)
            theta = self.t_lo + np.exp(u2c)
            log_jac = log_jac + u2c
        else:
            t_width = self.t_hi - self.t_lo
            theta = self.t_lo + t_width * expit(u2)
            log_jac = log_jac + math.log(t_width) - np.logaddexp(0, u2) - np.logaddexp(0, -u2)
        return (alpha, theta, log_jac)

    def to_free(self, alpha: float, theta: float) -> npt.NDArray[np.float64]:
        eps = 1e-6
        a = min(max(alpha, self.a_lo + eps), self.a_hi - eps)
        u1 = logit((a - self.a_lo) / (self.a_hi - self.a_lo))
        if math.isinf(self.t_hi):
            u2 = math.log(max(theta - self.t_lo, eps))
        else:
            t = min(max(theta, self.t_lo + eps), self.t_hi - eps)
            u2 = logit((t - self.t_lo) / (self.t_hi - self.t_lo))
        return np.array([u1, u2], dtype=np.float64)


def _rare_type_n(p_plus: SetPartition) -> int:
    if p_plus.n < 2 or not is_rare_type(p_plus):  # noqa: PLR2004
        msg = "not a rare-type configuration"
        raise NotRareTypeError(msg)
    return p_plus.n - 1


def posterior_mean_phi(
    p_plus: SetPartition,
    prior: Hyperprior,
    options: QuadratureOptions | None = None,
    mle: MleResult | None = None,
) -> PosteriorMean:
    """E(Phi | pi_[n+1]) under the hyperprior.

    The posterior is integrated with tensor Gauss-Hermite rules in coordinates
    mapping the plane onto the prior's support, centered at the posterior mode
    and scaled by the observed information there. Orders double until both the
    normalizing mass and the mean move by less than the tolerance.

    Raises:
        NotRareTypeError: If the suspect is not the last singleton block.
    """
    options = options or QuadratureOptions()
    n = _rare_type_n(p_plus)

    if prior.kind == PriorKind.POINT_MASS and prior.point is not None:
        return PosteriorMean(phi(prior.point[0], prior.point[1], n), 0.0, True)

    ip = to_integer_partition(p_plus)
    smap = _SupportMap(prior)

    def log_post(u: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        alpha, theta, log_jac = smap.to_params(u)
        with np.errstate(all="ignore"):
            lp = log_eppf_arrays(ip, alpha, theta) + prior.log_density(alpha, theta) + log_jac
        return np.asarray(np.where(np.isfinite(lp), lp, -np.inf), dtype=np.float64)

    def objective(u: npt.NDArray[np.float64]) -> float:
        v = float(log_post(u))
        return -v if math.isfinite(v) else math.inf

    mle = mle or mle_fit(ip, options.optimizer)
    mode: Any = None
    for start in (smap.to_free(mle.alpha_hat, mle.theta_hat), np.zeros(2)):
        res = optimize.minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 4000},
        )
        if mode is None or res.fun < mode.fun:
            mode = res
    if not math.isfinite(mode.fun):
        msg = "The prior puts no mass where the likelihood is positive."
        raise ValueError(msg)

    center = np.asarray(mode.x, dtype=np.float64)
    with np.errstate(all="ignore"):
        info = -_hessian(
            lambda x: float(log_post(x)),
            center,
            np.full(2, options.fd_step),
        )
    try:
        chol = np.linalg.cholesky(np.linalg.inv(info))
    except np.linalg.LinAlgError:
        logger.warning("Posterior curvature is not positive definite, using unit scale")
        chol = np.eye(2)
    if not np.all(np.isfinite(chol)):
        chol = np.eye(2)

    value, prev_value, prev_mass = math.nan, math.nan, math.nan
    error, converged = math.inf, False
    for order in options.orders:
        z, w = np.polynomial.hermite.hermgauss(order)
        z1, z2 = np.meshgrid(z, z, indexing="ij")
        zz = np.stack([z1.ravel(), z2.ravel()], axis=-1)
        log_w = np.add.outer(np.log(w), np.log(w)).ravel() + (zz**2).sum(axis=1)
        u = center + math.sqrt(2) * zz @ chol.T

        alpha, theta, _ = smap.to_params(u)
        lg = log_w + log_post(u)
        mass = float(logsumexp(lg))
        value = float(np.exp(logsumexp(lg + np.log(phi(alpha, theta, n))) - mass))

        if math.isfinite(prev_value):
            error = abs(value - prev_value)
            if error <= options.tolerance * value and abs(mass - prev_mass) <= options.tolerance:
                converged = True
                break
        prev_value, prev_mass = value, mass

    if not converged:
        logger.warning(
            "Posterior quadrature did not converge: E(Phi)=%.6g, last change %.3g",
            value,
            error,
        )
    return PosteriorMean(value, error, converged)


@dataclass(frozen=True)
class LrReport:
    """The Bayesian likelihood ratio for a rare type match."""

    n: int
    lr_bayes: float
    """(n+1+theta)/(1-alpha) at the estimate, None if the estimate is flagged."""
    lr_plugin: float | None
    posterior_mean_phi: float
    quadrature_error_estimate: float
    converged: bool = True
    prior: str = ""

    def to_json(self) -> dict[str, Any]:
        """A JSON compatible form."""
        return asdict(self)


def lr_bayes(
    p_plus: SetPartition,
    prior: Hyperprior,
    options: QuadratureOptions | None = None,
) -> LrReport:
    """n / E(Phi | pi_[n+1]) together with the plug-in approximation.

    Under a point-mass prior the plug-in uses the point itself.

    Raises:
        NotRareTypeError: If the suspect is not the last singleton block.
    """
    options = options or QuadratureOptions()
    n = _rare_type_n(p_plus)

    plugin: float | None
    if prior.kind == PriorKind.POINT_MASS and prior.point is not None:
        pm = posterior_mean_phi(p_plus, prior, options)
        plugin = (n + 1 + prior.point[1]) / (1 - prior.point[0])
    else:
        mle = mle_fit(p_plus, options.optimizer)
        pm = posterior_mean_phi(p_plus, prior, options, mle)
        try:
            plugin = lr_plugin(n, mle)
        except BoundaryEstimateError:
            logger.info("No plug-in likelihood ratio, the MLE is flagged")
            plugin = None

    return LrReport(
        n=n,
        lr_bayes=n / pm.value,
        lr_plugin=plugin,
        posterior_mean_phi=pm.value,
        quadrature_error_estimate=pm.error_estimate,
        converged=pm.converged,
        prior=prior.describe(),
    )


class Parametrization(str, Enum):
    """Coordinates of a log-likelihood surface."""

    ALPHA_THETA = "alpha_theta"
    PHI_THETA = "phi_theta"


def to_alpha_theta(
    param1: npt.ArrayLike,
    theta: npt.ArrayLike,
    n: int,
    parametrization: Parametrization,
) -> npt.NDArray[np.float64]:
    """alpha for surface coordinates, inverting phi when needed."""
    p1 = np.asarray(param1, dtype=np.float64)
    if parametrization == Parametrization.ALPHA_THETA:
        return p1
    return np.asarray(1.0 - p1 * (n + 1.0 + np.asarray(theta)) / n, dtype=np.float64)


def fisher_in(
    m: MleResult,
    n: int,
    parametrization: Parametrization,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """The estimate and observed information in the given coordinates."""
    fisher = m.fisher()
    if parametrization == Parametrization.ALPHA_THETA:
        return (np.array([m.alpha_hat, m.theta_hat]), fisher)

    phi_hat = phi(m.alpha_hat, m.theta_hat, n)
    jac = np.array([[-(n + 1 + m.theta_hat) / n, -phi_hat / n], [0.0, 1.0]])
    return (np.array([phi_hat, m.theta_hat]), jac.T @ fisher @ jac)


def tensor_grid(axis1: Sequence[float], axis2: Sequence[float]) -> npt.NDArray[np.float64]:
    """All (axis1, axis2) pairs, axis2 varying fastest."""
    g1, g2 = np.meshgrid(np.asarray(axis1), np.asarray(axis2), indexing="ij")
    return np.stack([g1.ravel(), g2.ravel()], axis=-1)


def mle_centered_grid(
    m: MleResult,
    n: int,
    parametrization: Parametrization,
    half_width: float = 3.0,
    points: int = 41,
) -> npt.NDArray[np.float64]:
    """A square grid of +- half_width standard errors around the estimate.

    An odd number of points puts the estimate itself on a node.
    """
    center, info = fisher_in(m, n, parametrization)
    sd = np.sqrt(np.diag(np.linalg.inv(info)))
    offsets = np.linspace(-half_width, half_width, points)
    return tensor_grid(center[0] + offsets * sd[0], center[1] + offsets * sd[1])


@dataclass(frozen=True)
class SurfaceTable:
    """Relative log-likelihood at grid nodes with its Gaussian approximation."""

    parametrization: Parametrization
    param1: npt.NDArray[np.float64]
    param2: npt.NDArray[np.float64]
    rel_loglik: npt.NDArray[np.float64]
    gaussian_rel_loglik: npt.NDArray[np.float64]

    def rows(self) -> Iterator[tuple[float, float, float, float]]:
        """(param1, param2, rel_loglik, gaussian_rel_loglik) per node."""
        for row in zip(
            self.param1.tolist(),
            self.param2.tolist(),
            self.rel_loglik.tolist(),
            self.gaussian_rel_loglik.tolist(),
        ):
            yield row

    def write_csv(self, path: str | Path) -> None:
        """Writes the table with a header row."""
        with Path(path).open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["param1", "param2", "rel_loglik", "gaussian_rel_loglik"])
            w.writerows(self.rows())


def loglik_surface(
    p: SetPartition | IntegerPartition,
    nodes: npt.ArrayLike,
    parametrization: Parametrization = Parametrization.ALPHA_THETA,
    mle: MleResult | None = None,
) -> SurfaceTable:
    """The log-likelihood at (param1, theta) nodes relative to its grid maximum.

    In the (phi, theta) parametrization phi uses n = (partition size - 1), the
    partition being the database plus suspect. Nodes outside the parameter
    space get NaN.
    """
    ip = to_integer_partition(p)
    n = ip.n - 1
    mle = mle or mle_fit(ip)
    xy = np.asarray(nodes, dtype=np.float64).reshape(-1, 2)
    p1, theta = xy[:, 0], xy[:, 1]

    alpha = to_alpha_theta(p1, theta, n, parametrization)
    valid = (alpha > 0) & (alpha < 1) & (theta > -alpha)
    ll = np.full(len(xy), np.nan)
    ll[valid] = log_eppf_arrays(ip, alpha[valid], theta[valid])
    if np.any(valid):
        ll -= np.nanmax(ll)
    if not np.all(valid):
        logger.info("%d surface nodes lie outside the parameter space", int((~valid).sum()))

    center, info = fisher_in(mle, n, parametrization)
    d = xy - center
    gauss = -0.5 * np.einsum("ij,jk,ik->i", d, info, d)
    gauss[~valid] = np.nan

    return SurfaceTable(parametrization, p1.copy(), theta.copy(), ll, gauss)


def contour_levels(levels: Sequence[float] = (0.95, 0.99)) -> dict[float, float]:
    """Relative log-likelihood thresholds bounding Gaussian confidence regions."""
    return {lv: -0.5 * float(stats.chi2.ppf(lv, df=2)) for lv in levels}
