"""Synthetic panel generators with a common factor structure.

All generators produce panels of the form::

    x[t, i] = r**-0.5 * sum_j loadings[i, j] * factors[t, j]
              + sqrt(phi) * eps[t, i]

where the factors follow independent AR(1) processes and the idiosyncratic
component ``eps`` follows one of three noise designs:

* ``Model1`` — AR(1) series driven by innovations that average a circular
  neighborhood of iid shocks, giving short-range cross-correlation;
* ``Model2`` — AR(1) series driven by innovations whose covariance adds a
  low-rank block, supported on a fraction of the series, to the identity;
* ``SparseSpike`` — iid draws whose covariance is a sparse rank-one spike
  plus a spherical floor.

Randomness is fully reproducible: every generator derives independent
child streams from ``config.seed`` with a counter-based bit generator, so
the same configuration always yields bit-identical output and replications
can be generated in any order.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .linalg import SymMatrix, sym_eigen

__all__ = [
    "Model1",
    "Model2",
    "SparseSpike",
    "SimConfig",
    "SimulatedPanel",
    "factor_ar_coefficients",
    "gen_factors",
    "gen_model1",
    "gen_model2",
    "gen_sparse_spike",
    "generate",
    "save_csv",
    "save_bundle",
    "load_bundle",
]

#: Laws for drawing the per-series noise parameters.
TWO_POINT = "two-point"
CONTINUOUS_UNIFORM = "continuous-uniform"
_LAWS = (TWO_POINT, CONTINUOUS_UNIFORM)

# child-stream ids under config.seed; fixed so that gen_factors run alone
# produces the same factor block that the full panel generators embed
_STREAM_FACTORS = 0
_STREAM_LOADINGS = 1
_STREAM_PARAMS = 2
_STREAM_NOISE = 3


@dataclass(frozen=True)
class Model1:
    """Circular moving-average idiosyncratic design.

    Attributes
    ----------
    h : int
        Neighborhood half-width of the moving average.
    truncate : bool
        Use hard boundaries instead of circular wrap-around.  The
        normalisation constant is unchanged, so boundary series then have
        slightly smaller variance.
    """

    h: int = 10
    truncate: bool = False

    kind = "model1"


@dataclass(frozen=True)
class Model2:
    """Low-rank-plus-identity idiosyncratic design.

    Attributes
    ----------
    varrho : float
        Fraction of series carrying the low-rank block, in ``(0, 1]``.
    delta_max, delta_min : float
        The block eigenvalues are ``r`` equidistant values from
        ``delta_max`` down to ``delta_min``.
    """

    varrho: float = 0.2
    delta_max: float = 20.0
    delta_min: float = 10.0

    kind = "model2"


@dataclass(frozen=True)
class SparseSpike:
    """Sparse rank-one spike idiosyncratic design.

    The idiosyncratic covariance is ``delta_n * v v' + sigma2 * I`` with a
    unit vector ``v`` supported on ``ceil(n**alpha)`` coordinates and
    ``delta_n = n**nu`` unless overridden.

    Attributes
    ----------
    alpha : float
        Support-size exponent, in ``[0, 1)``.
    nu : float
        Spike-size exponent.
    sigma2 : float
        Spherical variance floor, positive.
    delta : float, optional
        Direct override for the spike size ``delta_n``.
    """

    alpha: float = 0.5
    nu: float = 0.8
    sigma2: float = 1.0
    delta: float | None = None

    kind = "sparse-spike"


@dataclass(frozen=True)
class SimConfig:
    """Full description of one synthetic panel.

    Attributes
    ----------
    n_series : int
        Cross-section size ``n``.
    n_obs : int
        Number of time observations ``T``.
    r : int
        True number of factors.
    phi : float
        Noise-to-signal ratio multiplying the idiosyncratic part.
    rho_f : float
        Base factor AR coefficient; column ``j`` (0-based) uses
        ``rho_f - 0.05 * j``.
    model : Model1 | Model2 | SparseSpike
        Idiosyncratic design.
    seed : int
        Non-negative seed for the reproducible stream tree.
    beta_law, rho_eps_law : str
        ``"two-point"`` (symmetric two-point, the default) or
        ``"continuous-uniform"`` on the symmetric interval.
    beta_magnitude : float
        Half-width of the moving-average weight law (Model 1).
    rho_eps_magnitude : float
        Half-width of the idiosyncratic AR-coefficient law.
    unit_factor_variance : bool
        If True, scale factor innovations so each factor has unit
        stationary variance; by default the innovation variance is
        ``1 / (1 - rho**2)`` verbatim.
    """

    n_series: int
    n_obs: int
    phi: float
    model: Model1 | Model2 | SparseSpike
    seed: int
    r: int = 5
    rho_f: float = 0.5
    beta_law: str = TWO_POINT
    rho_eps_law: str = TWO_POINT
    beta_magnitude: float = 0.15
    rho_eps_magnitude: float = 0.2
    unit_factor_variance: bool = False


@dataclass(frozen=True)
class SimulatedPanel:
    """A generated panel together with its latent ground truth.

    Attributes
    ----------
    x : (T, n) ndarray
        Observed panel, ``chi + sqrt(phi) * eps``.
    chi : (T, n) ndarray
        True common component.
    eps : (T, n) ndarray
        True idiosyncratic component (before the ``sqrt(phi)`` scaling).
    loadings : (n, r) ndarray
    factors : (T, r) ndarray
    config : SimConfig
    truth : dict
        Model-specific population quantities (AR coefficients, low-rank
        bases, spike direction, ...) for diagnostics and tests.
    """

    x: np.ndarray
    chi: np.ndarray
    eps: np.ndarray
    loadings: np.ndarray
    factors: np.ndarray
    config: SimConfig
    truth: dict = field(default_factory=dict)


def _freeze(*arrays: np.ndarray) -> None:
    for arr in arrays:
        arr.setflags(write=False)


def validate_config(config: SimConfig) -> None:
    """Raise :class:`InvalidInput` if the configuration is unusable."""
    n, t, r = config.n_series, config.n_obs, config.r
    if r < 1:
        raise InvalidInput(f"r must be at least 1, got {r}")
    if n < r:
        raise InvalidInput(f"n_series must be at least r={r}, got {n}")
    if t < 2:
        raise InvalidInput(f"n_obs must be at least 2, got {t}")
    if not (config.phi > 0 and math.isfinite(config.phi)):
        raise InvalidInput(f"phi must be positive, got {config.phi}")
    if not isinstance(config.seed, (int, np.integer)) or config.seed < 0:
        raise InvalidInput(f"seed must be a non-negative integer, got {config.seed}")
    rho = factor_ar_coefficients(config)
    if np.any(np.abs(rho) >= 1.0):
        raise InvalidInput(
            f"factor AR coefficients {rho} must lie strictly inside (-1, 1)"
        )
    for law in (config.beta_law, config.rho_eps_law):
        if law not in _LAWS:
            raise InvalidInput(f"unknown law {law!r}; expected one of {_LAWS}")
    if not 0.0 <= config.rho_eps_magnitude < 1.0:
        raise InvalidInput("rho_eps_magnitude must lie in [0, 1)")
    model = config.model
    if isinstance(model, Model1):
        if model.h < 1:
            raise InvalidInput(f"neighborhood half-width must be >= 1, got {model.h}")
        if n <= 2 * model.h:
            raise InvalidInput(
                f"Model1 requires n_series > 2h, got n={n} with h={model.h}"
            )
    elif isinstance(model, Model2):
        if not 0.0 < model.varrho <= 1.0:
            raise InvalidInput(f"varrho must lie in (0, 1], got {model.varrho}")
        if math.floor(model.varrho * n) < r:
            raise InvalidInput(
                f"Model2 support floor(varrho*n)={math.floor(model.varrho * n)} "
                f"must be at least r={r}"
            )
    elif isinstance(model, SparseSpike):
        if not 0.0 <= model.alpha < 1.0:
            raise InvalidInput(f"alpha must lie in [0, 1), got {model.alpha}")
        if not math.isfinite(model.nu):
            raise InvalidInput(f"nu must be finite, got {model.nu}")
        if not (model.sigma2 > 0 and math.isfinite(model.sigma2)):
            raise InvalidInput(f"sigma2 must be positive, got {model.sigma2}")
        if model.delta is not None and not (
            model.delta >= 0 and math.isfinite(model.delta)
        ):
            raise InvalidInput(f"delta override must be >= 0, got {model.delta}")
    else:
        raise InvalidInput(f"unknown model {model!r}")


def _stream(seed: int, key: int) -> np.random.Generator:
    """Independent child generator ``key`` under ``seed`` (counter-based)."""
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(key),))
    return np.random.Generator(np.random.Philox(seq))


def replication_seed(base_seed: int, *path: int) -> int:
    """Derive a per-replication seed from a base seed and an index path.

    Forms an independent stream for each ``path`` (for example
    ``(setting, replication)``) so parallel Monte Carlo draws are
    order-independent.
    """
    seq = np.random.SeedSequence(
        int(base_seed), spawn_key=tuple(int(p) for p in path)
    )
    return int(seq.generate_state(2, np.uint64)[0])


def factor_ar_coefficients(config: SimConfig) -> np.ndarray:
    """Per-factor AR coefficients ``rho_f - 0.05 * j`` for ``j = 0..r-1``."""
    return config.rho_f - 0.05 * np.arange(config.r)


def _draw_law(rng: np.random.Generator, law: str, magnitude: float, n: int) -> np.ndarray:
    """Draw ``n`` values from the symmetric two-point or uniform law."""
    if magnitude == 0.0:
        return np.zeros(n)
    if law == TWO_POINT:
        return magnitude * rng.choice(np.array([-1.0, 1.0]), size=n)
    return rng.uniform(-magnitude, magnitude, size=n)


def _ar1_paths(
    coeffs: np.ndarray,
    innovations: np.ndarray,
    init: np.ndarray,
) -> np.ndarray:
    """Run ``y[t] = coeffs * y[t-1] + innovations[t]`` from ``y[0] = init``.

    ``innovations[0]`` is ignored; the first row is the initial state.
    """
    out = np.empty_like(innovations)
    out[0] = init
    prev = init
    for t in range(1, out.shape[0]):
        prev = coeffs * prev + innovations[t]
        out[t] = prev
    return out


def gen_factors(config: SimConfig) -> np.ndarray:
    """Generate the (T, r) factor matrix of independent AR(1) columns.

    Innovations are ``N(0, 1 / (1 - rho_j**2))`` verbatim, or
    ``N(0, 1 - rho_j**2)`` under ``unit_factor_variance``; the initial row
    is drawn from the implied stationary law.
    """
    validate_config(config)
    rho = factor_ar_coefficients(config)
    if config.unit_factor_variance:
        innov_sd = np.sqrt(1.0 - rho**2)
    else:
        innov_sd = np.sqrt(1.0 / (1.0 - rho**2))
    stat_sd = innov_sd / np.sqrt(1.0 - rho**2)

    rng = _stream(config.seed, _STREAM_FACTORS)
    init = rng.standard_normal(config.r) * stat_sd
    z = rng.standard_normal((config.n_obs, config.r))
    factors = _ar1_paths(rho, z * innov_sd, init)
    _freeze(factors)
    return factors


def _assemble(
    config: SimConfig,
    loadings: np.ndarray,
    factors: np.ndarray,
    eps: np.ndarray,
    truth: dict,
) -> SimulatedPanel:
    chi = (factors @ loadings.T) / math.sqrt(config.r)
    x = chi + math.sqrt(config.phi) * eps
    _freeze(x, chi, eps, loadings, factors)
    for value in truth.values():
        if isinstance(value, np.ndarray):
            value.setflags(write=False)
    return SimulatedPanel(
        x=x,
        chi=chi,
        eps=eps,
        loadings=loadings,
        factors=factors,
        config=config,
        truth=truth,
    )


def _neighbor_sums(e: np.ndarray, h: int, truncate: bool) -> np.ndarray:
    """Sum of each column's ``2h`` neighbors (wrap-around or truncated)."""
    if truncate:
        t, n = e.shape
        padded = np.zeros((t, n + 2 * h))
        padded[:, h : h + n] = e
        total = np.zeros_like(e)
        for d in range(-h, h + 1):
            if d != 0:
                total += padded[:, h + d : h + d + n]
        return total
    total = np.zeros_like(e)
    for d in range(-h, h + 1):
        if d != 0:
            total += np.roll(e, -d, axis=1)
    return total


def gen_model1(config: SimConfig) -> SimulatedPanel:
    """Generate a panel with circular moving-average idiosyncratic noise.

    Each idiosyncratic series is an AR(1) with coefficient drawn from the
    ``rho_eps`` law, driven by innovations
    ``(1 + 2 beta_i**2 h)**-0.5 * (e[t, i] + beta_i * sum of 2h neighbors)``
    where ``e[t, i] ~ N(0, 1 - rho_eps_i**2)`` iid.
    """
    validate_config(config)
    model = config.model
    if not isinstance(model, Model1):
        raise InvalidInput(f"gen_model1 needs a Model1 config, got {model!r}")
    n, t = config.n_series, config.n_obs

    loadings = _stream(config.seed, _STREAM_LOADINGS).standard_normal((n, config.r))
    params = _stream(config.seed, _STREAM_PARAMS)
    rho_eps = _draw_law(params, config.rho_eps_law, config.rho_eps_magnitude, n)
    beta = _draw_law(params, config.beta_law, config.beta_magnitude, n)

    noise = _stream(config.seed, _STREAM_NOISE)
    init_z = noise.standard_normal(n)
    e = noise.standard_normal((t, n)) * np.sqrt(1.0 - rho_eps**2)

    norm = 1.0 / np.sqrt(1.0 + 2.0 * beta**2 * model.h)
    v = norm * (e + beta * _neighbor_sums(e, model.h, model.truncate))

    # exact stationary marginal variance of the AR(1) driven by v
    weight_sq = norm**2 * (
        (1.0 - rho_eps**2)
        + beta**2 * _neighbor_sums((1.0 - rho_eps**2)[None, :], model.h, model.truncate)[0]
    )
    stat_sd = np.sqrt(weight_sq / (1.0 - rho_eps**2))
    eps = _ar1_paths(rho_eps, v, init_z * stat_sd)

    factors = gen_factors(config)
    truth = {"rho_eps": rho_eps, "beta": beta, "innovation_variance": weight_sq}
    return _assemble(config, loadings, np.asarray(factors), eps, truth)


def gen_model2(config: SimConfig) -> SimulatedPanel:
    """Generate a panel whose idiosyncratic innovations have a low-rank block.

    A random (n, r) matrix supported on the first ``floor(varrho * n)``
    rows defines ``r`` orthonormal directions ``V``; innovations have
    covariance ``V diag(delta) V' + I`` applied to per-series shocks of
    variance ``1 - rho_eps_i**2``, and feed per-series AR(1) recursions.
    """
    validate_config(config)
    model = config.model
    if not isinstance(model, Model2):
        raise InvalidInput(f"gen_model2 needs a Model2 config, got {model!r}")
    n, t, r = config.n_series, config.n_obs, config.r
    support = math.floor(model.varrho * n)

    loadings = _stream(config.seed, _STREAM_LOADINGS).standard_normal((n, r))
    params = _stream(config.seed, _STREAM_PARAMS)
    rho_eps = _draw_law(params, config.rho_eps_law, config.rho_eps_magnitude, n)
    m_block = params.standard_normal((support, r))

    # leading left singular vectors of the supported block
    gram = SymMatrix.from_array(m_block @ m_block.T)
    system = sym_eigen(gram)
    v_basis = np.zeros((n, r))
    v_basis[:support] = system.eigenvectors[:, :r]
    delta = np.linspace(model.delta_max, model.delta_min, r)

    gamma_v = v_basis @ (delta[:, None] * v_basis.T) + np.eye(n)
    root_sys = sym_eigen(SymMatrix.from_array(gamma_v))
    root = (root_sys.eigenvectors * np.sqrt(np.maximum(root_sys.eigenvalues, 0.0))) @ root_sys.eigenvectors.T

    noise = _stream(config.seed, _STREAM_NOISE)
    init_z = noise.standard_normal(n)
    shocks = noise.standard_normal((t, n)) * np.sqrt(1.0 - rho_eps**2)
    v = shocks @ root  # root is symmetric, so rows are root @ shock_t

    innov_var = np.einsum("ij,j,ij->i", root, 1.0 - rho_eps**2, root)
    stat_sd = np.sqrt(innov_var / (1.0 - rho_eps**2))
    eps = _ar1_paths(rho_eps, v, init_z * stat_sd)

    factors = gen_factors(config)
    truth = {
        "rho_eps": rho_eps,
        "v_basis": v_basis,
        "delta": delta,
        "innovation_variance": innov_var,
    }
    return _assemble(config, loadings, np.asarray(factors), eps, truth)


def gen_sparse_spike(config: SimConfig) -> SimulatedPanel:
    """Generate a panel whose idiosyncratic covariance is a sparse spike.

    The idiosyncratic draws are iid over time with covariance
    ``delta_n * v v' + sigma2 * I`` where ``v`` is a unit vector on
    ``ceil(n**alpha)`` uniformly placed coordinates, orthogonalised
    against the loading columns when the support allows it.  Factors are
    iid standard normal, so the panel is iid Gaussian over time.
    """
    validate_config(config)
    model = config.model
    if not isinstance(model, SparseSpike):
        raise InvalidInput(
            f"gen_sparse_spike needs a SparseSpike config, got {model!r}"
        )
    n, t, r = config.n_series, config.n_obs, config.r

    loadings = _stream(config.seed, _STREAM_LOADINGS).standard_normal((n, r))
    params = _stream(config.seed, _STREAM_PARAMS)
    support_size = math.ceil(n**model.alpha)
    support = np.sort(params.choice(n, size=support_size, replace=False))
    direction = params.standard_normal(support_size)
    if support_size > r:
        # orthogonalise against the loadings restricted to the support so
        # the spike is not aligned with the factor space (modified
        # Gram-Schmidt with one re-orthogonalisation pass)
        basis: list[np.ndarray] = []
        for col in loadings[support].T:
            w = col.copy()
            for b in basis:
                w -= (b @ w) * b
            w_norm = float(np.linalg.norm(w))
            if w_norm > 1e-12:
                basis.append(w / w_norm)
        for _ in range(2):
            for b in basis:
                direction = direction - (b @ direction) * b
    norm = float(np.linalg.norm(direction))
    if norm <= 1e-12:
        raise InvalidInput(
            "spike direction degenerated to zero after orthogonalisation"
        )
    spike = np.zeros(n)
    spike[support] = direction / norm

    delta_n = float(n**model.nu if model.delta is None else model.delta)
    sigma = math.sqrt(model.sigma2)
    # closed-form square root of delta_n * v v' + sigma2 * I
    root_gap = math.sqrt(delta_n + model.sigma2) - sigma

    noise = _stream(config.seed, _STREAM_NOISE)
    z = noise.standard_normal((t, n))
    eps = sigma * z + root_gap * np.outer(z @ spike, spike)

    rng_f = _stream(config.seed, _STREAM_FACTORS)
    factors = rng_f.standard_normal((t, r))
    truth = {
        "support": support,
        "spike_vector": spike,
        "delta_n": delta_n,
        "sigma2": float(model.sigma2),
    }
    return _assemble(config, loadings, factors, eps, truth)


def generate(config: SimConfig) -> SimulatedPanel:
    """Dispatch to the generator matching ``config.model``."""
    validate_config(config)
    if isinstance(config.model, Model1):
        return gen_model1(config)
    if isinstance(config.model, Model2):
        return gen_model2(config)
    return gen_sparse_spike(config)


# ---------------------------------------------------------------------------
# serialization

_MODEL_KINDS = {"model1": Model1, "model2": Model2, "sparse-spike": SparseSpike}


def _config_to_dict(config: SimConfig) -> dict:
    data = asdict(config)
    data["model"] = {"kind": config.model.kind, **asdict(config.model)}
    return data


def _config_from_dict(data: dict) -> SimConfig:
    payload = dict(data)
    model_data = dict(payload.pop("model"))
    kind = model_data.pop("kind")
    try:
        model_cls = _MODEL_KINDS[kind]
    except KeyError:
        raise InvalidInput(f"unknown model kind {kind!r}") from None
    return SimConfig(model=model_cls(**model_data), **payload)


def save_csv(panel: SimulatedPanel | np.ndarray, path: str | Path) -> None:
    """Write the observed panel to CSV with full float precision."""
    x = panel.x if isinstance(panel, SimulatedPanel) else np.asarray(panel)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"series_{i}" for i in range(x.shape[1])])
        for row in x:
            writer.writerow([f"{value:.17g}" for value in row])


def save_bundle(panel: SimulatedPanel, path: str | Path) -> None:
    """Write observations, latent components, and config to a JSON bundle."""
    payload = {
        "schema_version": 1,
        "config": _config_to_dict(panel.config),
        "x": panel.x.tolist(),
        "chi": panel.chi.tolist(),
        "eps": panel.eps.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_bundle(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray, SimConfig]:
    """Read back a JSON bundle written by :func:`save_bundle`."""
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("schema_version") != 1:
        raise InvalidInput(
            f"unsupported bundle schema {payload.get('schema_version')!r}"
        )
    config = _config_from_dict(payload["config"])
    arrays = tuple(
        np.asarray(payload[key], dtype=float) for key in ("x", "chi", "eps")
    )
    for arr in arrays:
        arr.setflags(write=False)
    return arrays[0], arrays[1], arrays[2], config
