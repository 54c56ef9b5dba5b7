"""Centralized SSFN: layer-wise training of a fixed-size ReLU network.

Each layer ``l`` learns a readout ``O_l`` by regularized least squares on the
current features and then grows the network with

    W_{l+1} = [ V_Q O_l ; R_{l+1} ],   V_Q = [I_Q ; -I_Q]

where ``R_{l+1}`` is a seeded random block shared by every node. Because
``relu(V_Q z)`` keeps both signs of ``z``, the next layer can always reproduce
the previous layer's output, which is what makes the training cost
non-increasing with depth.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .linalg import GramSystem, NotPositiveDefiniteError, SeededRng, ShapeError, mat_mul, random_matrix
from .projection import project_frobenius

__all__ = [
    "SolverError",
    "SsfnConfig",
    "LayerStack",
    "relu",
    "build_vq",
    "assemble_weight",
    "forward_layer",
    "layer_random_block",
    "centralized_layer_solve",
    "constrained_ls_admm",
    "training_cost",
    "train_centralized",
    "predict",
    "accuracy",
    "MODEL_FORMAT_VERSION",
]

MODEL_FORMAT_VERSION = 1
LAYER_SOLVERS = ("admm", "ridge")


class SolverError(RuntimeError):
    """A layer solve failed; ``layer`` is set when raised during training."""

    def __init__(self, message: str, layer: int | None = None):
        self.layer = layer
        super().__init__(message if layer is None else f"layer {layer}: {message}")


@dataclass(frozen=True)
class SsfnConfig:
    """Network size and regularization.

    ``hidden_width`` and ``eps`` default to ``2Q + width_extra`` and ``2Q``
    once the class count is known (see :meth:`resolve`). ``rand_scale`` of
    None draws the random block uniform on ``±rand_gain/sqrt(fan_in)``.
    ``input_bias`` appends a constant row of that value to every input, which
    gives the first hidden layer an offset per unit; None leaves inputs as is.

    ``solver`` picks the pooled layer solve: ``"admm"`` runs ``admm_iters``
    iterations of the constrained least-squares ADMM with ``mu`` as the inverse
    penalty, ``"ridge"`` treats ``mu`` as a ridge weight and projects. The
    decentralized trainer always reads ``mu`` as a ridge weight.
    """

    max_layers: int = 20
    hidden_width: int | None = None
    width_extra: int = 1000
    eps: float | None = None
    mu_first: float = 1.0
    mu_rest: float = 1.0
    seed: int = 0
    rand_scale: float | None = None
    rand_gain: float = 1.0
    input_bias: float | None = None
    solver: str = "admm"
    admm_iters: int = 100

    def __post_init__(self):
        if self.max_layers < 1:
            raise ValueError(f"max_layers must be at least 1, got {self.max_layers}")
        if self.eps is not None and not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.mu_first < 0 or self.mu_rest < 0:
            raise ValueError("mu must be non-negative")
        if self.rand_scale is not None and not self.rand_scale > 0:
            raise ValueError(f"rand_scale must be positive, got {self.rand_scale}")
        if not self.rand_gain > 0:
            raise ValueError(f"rand_gain must be positive, got {self.rand_gain}")
        if self.input_bias is not None and not np.isfinite(self.input_bias):
            raise ValueError("input_bias must be finite")
        if self.solver not in LAYER_SOLVERS:
            raise ValueError(f"solver must be one of {LAYER_SOLVERS}, got {self.solver!r}")
        if self.admm_iters < 1:
            raise ValueError(f"admm_iters must be at least 1, got {self.admm_iters}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def width(self, q: int) -> int:
        n = self.hidden_width if self.hidden_width is not None else 2 * q + self.width_extra
        if n <= 2 * q:
            raise ValueError(f"hidden width {n} must exceed 2Q = {2 * q}")
        return n

    def epsilon(self, q: int) -> float:
        return float(self.eps) if self.eps is not None else 2.0 * q

    def augment(self, x: np.ndarray) -> np.ndarray:
        """Append the constant bias row when ``input_bias`` is set."""
        if self.input_bias is None:
            return x
        return np.vstack([x, np.full((1, x.shape[1]), float(self.input_bias))])

    def mu(self, layer: int) -> float:
        return self.mu_first if layer == 0 else self.mu_rest

    def resolve(self, q: int) -> "SsfnConfig":
        """Copy with width and eps filled in for ``q`` classes."""
        return replace(self, hidden_width=self.width(q), eps=self.epsilon(q))


def relu(a: np.ndarray) -> np.ndarray:
    return np.maximum(a, 0.0)


def build_vq(q: int) -> np.ndarray:
    """``2Q x Q`` matrix stacking ``I_Q`` over ``-I_Q``."""
    if q < 1:
        raise ValueError(f"Q must be positive, got {q}")
    eye = np.eye(q)
    return np.vstack([eye, -eye])


def assemble_weight(o_star: np.ndarray, r_next: np.ndarray, q: int) -> np.ndarray:
    """Stack ``[V_Q o_star ; r_next]``."""
    if o_star.shape[0] != q:
        raise ShapeError(f"readout must have Q={q} rows, got {o_star.shape[0]}")
    if o_star.shape[1] != r_next.shape[1]:
        raise ShapeError(f"readout has {o_star.shape[1]} columns but random block has {r_next.shape[1]}")
    # V_Q o is [o; -o]; negation is exact, so this equals mat_mul(build_vq(q), o_star) bit for bit
    return np.vstack([o_star, -o_star, r_next])


def forward_layer(w: np.ndarray, y_prev: np.ndarray) -> np.ndarray:
    return relu(mat_mul(w, y_prev))


def layer_random_block(cfg: SsfnConfig, layer: int, fan_in: int, q: int) -> np.ndarray:
    """Random block ``R_layer`` of shape ``(n - 2Q) x fan_in``.

    Drawn from the sub-stream ``(seed, layer)``, so any party holding the seed
    regenerates the same matrix.
    """
    n = cfg.width(q)
    scale = cfg.rand_scale if cfg.rand_scale is not None else cfg.rand_gain / np.sqrt(fan_in)
    return random_matrix(SeededRng(cfg.seed, (layer,)), n - 2 * q, fan_in, scale)


def centralized_layer_solve(
    y: np.ndarray,
    t: np.ndarray,
    mu: float,
    eps: float,
    *,
    method: str = "ridge",
    iters: int = 100,
) -> np.ndarray:
    """Readout for one layer on pooled data, always inside ``||O||_F^2 <= eps``.

    ``method="ridge"``: ridge solution ``t yᵀ (y yᵀ + mu I)^-1`` followed by
    the norm-ball projection. ``method="admm"``: ``iters`` ADMM iterations on
    the constrained least-squares problem with ``mu`` as the inverse penalty
    (see :func:`constrained_ls_admm`).
    """
    if y.shape[1] != t.shape[1]:
        raise ShapeError(f"features have {y.shape[1]} samples but targets have {t.shape[1]}")
    if mu < 0:
        raise ValueError(f"mu must be non-negative, got {mu}")
    if method == "admm":
        return constrained_ls_admm(y, t, mu, eps, iters)
    if method != "ridge":
        raise ValueError(f"unknown layer solver {method!r}")
    try:
        o = GramSystem(y, mu).ridge(t)
    except NotPositiveDefiniteError as exc:
        raise SolverError(f"regularized Gram matrix is singular (pivot {exc.pivot}); use mu > 0") from exc
    return project_frobenius(o, eps)


def constrained_ls_admm(y: np.ndarray, t: np.ndarray, mu: float, eps: float, iters: int = 100) -> np.ndarray:
    """Approximate ``argmin ||t - O y||_F^2  s.t.  ||O||_F^2 <= eps`` by ADMM.

    Splits ``O = Q`` with ``Q`` confined to the ball and iterates, from
    ``Q = U = 0``,

        O <- (t yᵀ + (Q - U) / mu) (y yᵀ + I / mu)^-1
        Q <- P_eps(O + U)
        U <- U + O - Q

    returning the feasible ``Q``. Small ``mu`` keeps ``O`` close to the ball,
    large ``mu`` close to the least-squares solution; with a finite iteration
    budget ``mu`` therefore acts as a regularization knob.
    """
    if not mu > 0:
        raise ValueError(f"ADMM layer solve needs mu > 0, got {mu}")
    if iters < 1:
        raise ValueError(f"iters must be at least 1, got {iters}")
    rho = 1.0 / mu
    try:
        system = GramSystem(y, rho)
    except NotPositiveDefiniteError as exc:
        raise SolverError(f"ADMM system is not positive definite (pivot {exc.pivot}); use a smaller mu") from exc
    base = system.ridge(t)
    q = np.zeros_like(base)
    u = np.zeros_like(base)
    for _ in range(iters):
        o = base + system.apply_inverse(rho * (q - u))
        q = project_frobenius(o + u, eps)
        u += o - q
    return q


def training_cost(o: np.ndarray, y: np.ndarray, t: np.ndarray) -> float:
    """Sum of squared errors ``||t - o y||_F^2``."""
    r = t - o @ y
    return float(np.vdot(r, r))


@dataclass
class LayerStack:
    """Trained network: weights ``W_1..W_L`` and readouts ``O_0..O_L``."""

    input_dim: int
    target_dim: int
    weights: list[np.ndarray]
    readouts: list[np.ndarray]
    config: SsfnConfig
    train_costs: list[float] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.weights)

    def features(self, x: np.ndarray, layer: int | None = None) -> np.ndarray:
        layer = self.depth if layer is None else layer
        if not 0 <= layer <= self.depth:
            raise IndexError(f"layer {layer} out of range 0..{self.depth}")
        if x.shape[0] != self.input_dim:
            raise ShapeError(f"expected {self.input_dim} input features, got {x.shape[0]}")
        y = self.config.augment(x)
        for w in self.weights[:layer]:
            y = forward_layer(w, y)
        return y

    def layer_scores(self, x: np.ndarray) -> list[np.ndarray]:
        """Scores ``O_l y_l`` for every layer in one forward pass."""
        if x.shape[0] != self.input_dim:
            raise ShapeError(f"expected {self.input_dim} input features, got {x.shape[0]}")
        y = self.config.augment(x)
        out = [self.readouts[0] @ y]
        for w, o in zip(self.weights, self.readouts[1:]):
            y = forward_layer(w, y)
            out.append(o @ y)
        return out

    def save(self, path: str | Path) -> None:
        arrays = {f"W{i + 1}": w for i, w in enumerate(self.weights)}
        arrays.update({f"O{i}": o for i, o in enumerate(self.readouts)})
        meta = {
            "format_version": MODEL_FORMAT_VERSION,
            "input_dim": self.input_dim,
            "target_dim": self.target_dim,
            "depth": self.depth,
            "config": asdict(self.config),
        }
        with open(path, "wb") as fh:
            np.savez(
                fh,
                meta=np.array(json.dumps(meta, sort_keys=True)),
                train_costs=np.asarray(self.train_costs, dtype=np.float64),
                **arrays,
            )

    @classmethod
    def load(cls, path: str | Path) -> "LayerStack":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("format_version") != MODEL_FORMAT_VERSION:
                raise ValueError(f"unsupported model format version {meta.get('format_version')}")
            depth = meta["depth"]
            weights = [z[f"W{i + 1}"] for i in range(depth)]
            readouts = [z[f"O{i}"] for i in range(depth + 1)]
            costs = z["train_costs"].tolist()
        return cls(meta["input_dim"], meta["target_dim"], weights, readouts, SsfnConfig(**meta["config"]), costs)


def train_centralized(x: np.ndarray, t: np.ndarray, cfg: SsfnConfig) -> LayerStack:
    """Grow the network layer by layer on pooled data ``x`` (P x J), ``t`` (Q x J)."""
    if x.shape[1] != t.shape[1]:
        raise ShapeError(f"x has {x.shape[1]} samples but t has {t.shape[1]}")
    if x.shape[1] < 1:
        raise ShapeError("need at least one sample")
    p, q = x.shape[0], t.shape[0]
    cfg = cfg.resolve(q)
    eps = cfg.epsilon(q)
    weights, readouts, costs = [], [], []
    y = cfg.augment(x)
    for layer in range(cfg.max_layers + 1):
        try:
            o = centralized_layer_solve(y, t, cfg.mu(layer), eps, method=cfg.solver, iters=cfg.admm_iters)
        except SolverError as exc:
            raise SolverError(str(exc), layer) from exc
        readouts.append(o)
        costs.append(training_cost(o, y, t))
        if layer == cfg.max_layers:
            break
        w = assemble_weight(o, layer_random_block(cfg, layer + 1, y.shape[0], q), q)
        weights.append(w)
        y = forward_layer(w, y)
    return LayerStack(p, q, weights, readouts, cfg, costs)


def predict(stack: LayerStack, x: np.ndarray, layer: int | None = None) -> np.ndarray:
    """Score matrix ``O_l y_l(x)`` (Q x J); ``layer`` defaults to the last."""
    layer = stack.depth if layer is None else layer
    if not 0 <= layer <= stack.depth:
        raise IndexError(f"layer {layer} out of range 0..{stack.depth}")
    return stack.readouts[layer] @ stack.features(x, layer)


def accuracy(scores: np.ndarray, targets: np.ndarray) -> float:
    """Fraction of columns whose argmax matches; ties go to the lowest class index."""
    return float(np.mean(np.argmax(scores, axis=0) == np.argmax(targets, axis=0)))
