"""Penalized fair regression: predictor variants, MMD unfairness, training.

The trainable model is a one-hidden-layer tanh network fitted by full-batch
gradient descent with momentum. The training objective is mean squared error
on observational data plus ``lambda`` times the squared maximum mean
discrepancy between the model's predictions on generated interventional
datasets, averaged over sensitive-level pairs (and over intervention
contexts and candidate-graph groups where present). Unfairness at evaluation
time is the same MMD^2 average computed on ground-truth interventional data.
"""
from __future__ import annotations

import enum
import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from itertools import combinations, groupby

import numpy as np
from scipy.special import expit

from .ancestry import definite_nondescendants
from .graph_core import Pdag
from .scm_lab import Dataset, child_rng


class Variant(enum.Enum):
    FULL = "full"
    UNAWARE = "unaware"
    IFAIR = "ifair"
    EPS_IFAIR = "eps_ifair"


class EmptyFeatureSetError(ValueError):
    """The variant's feature set is empty (no definite non-descendants)."""


@dataclass(frozen=True)
class TrainConfig:
    hidden_width: int = 32
    lr: float = 1e-2
    momentum: float = 0.9
    epochs: int = 2000
    patience: int = 100
    lambda_grid: tuple[float, ...] = (0.0, 0.5, 5.0, 20.0, 60.0, 100.0)
    seeds: tuple[int, ...] = (0,)
    bandwidth_mode: str | float = "median"
    binary_outcome: bool = False

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        raw = json.loads(text)
        known = {k: v for k, v in raw.items() if k in cls.__dataclass_fields__}
        for key in ("lambda_grid", "seeds"):
            if key in known:
                known[key] = tuple(known[key])
        return cls(**known)


@dataclass(frozen=True)
class InterventionalSet:
    """One generated or ground-truth dataset for a single intervention.

    ``context`` carries the admissible-vertex assignment the dataset was
    generated under; ``group`` separates candidate-graph model sets in the
    unidentifiable mode.
    """

    data: Dataset
    sensitive_value: float
    context: tuple[tuple[str, float], ...] = ()
    group: int = 0


@dataclass(frozen=True)
class EvalRecord:
    rmse: float
    mmd2: float
    lam: float
    seed: int


@dataclass
class FairPredictor:
    variant: Variant
    features: tuple[str, ...]
    admissible: tuple[str, ...]
    weights: dict[str, np.ndarray]
    lam: float
    seed: int
    binary_outcome: bool = False
    best_epoch: int = 0

    def predict_matrix(self, x: np.ndarray) -> np.ndarray:
        hidden = np.tanh(x @ self.weights["w1"] + self.weights["b1"])
        raw = (hidden @ self.weights["w2"] + self.weights["b2"]).ravel()
        return expit(raw) if self.binary_outcome else raw

    def predict(self, data: Dataset) -> np.ndarray:
        return self.predict_matrix(data.matrix(self.features))

    def to_json(self) -> str:
        return json.dumps(
            {
                "variant": self.variant.value,
                "features": list(self.features),
                "admissible": list(self.admissible),
                "lambda": self.lam,
                "seed": self.seed,
                "binary_outcome": self.binary_outcome,
                "best_epoch": self.best_epoch,
                "weights": {k: v.tolist() for k, v in self.weights.items()},
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "FairPredictor":
        raw = json.loads(text)
        return cls(
            variant=Variant(raw["variant"]),
            features=tuple(raw["features"]),
            admissible=tuple(raw["admissible"]),
            weights={k: np.asarray(v, dtype=float) for k, v in raw["weights"].items()},
            lam=raw["lambda"],
            seed=raw["seed"],
            binary_outcome=raw["binary_outcome"],
            best_epoch=raw["best_epoch"],
        )


# -- MMD -----------------------------------------------------------------------


def mmd2(ya: Iterable[float], yb: Iterable[float], bandwidth: float) -> float:
    """Biased squared maximum mean discrepancy with kernel exp(-d^2/bandwidth)."""
    pa = np.asarray(ya, dtype=float).ravel()
    pb = np.asarray(yb, dtype=float).ravel()
    if len(pa) == 0 or len(pb) == 0:
        raise ValueError("samples must be nonempty")
    kaa = np.exp(-((pa[:, None] - pa[None, :]) ** 2) / bandwidth)
    kbb = np.exp(-((pb[:, None] - pb[None, :]) ** 2) / bandwidth)
    kab = np.exp(-((pa[:, None] - pb[None, :]) ** 2) / bandwidth)
    return float(kaa.mean() + kbb.mean() - 2.0 * kab.mean())


def _mmd2_value_grad(pa: np.ndarray, pb: np.ndarray, sigma: float):
    """MMD^2 and its gradients with respect to both prediction vectors.

    Large kernel matrices are evaluated in float32: the training loop only
    needs gradient direction, and halving the memory traffic roughly doubles
    throughput. Small inputs stay in float64 so the estimator itself is
    full precision.
    """
    dtype = np.float32 if len(pa) * len(pb) > 65536 else np.float64
    pa32 = pa.astype(dtype, copy=False)
    pb32 = pb.astype(dtype, copy=False)
    inv = dtype(1.0 / sigma)
    daa = pa32[:, None] - pa32[None, :]
    dbb = pb32[:, None] - pb32[None, :]
    dab = pa32[:, None] - pb32[None, :]
    kaa = np.exp(-(daa * daa) * inv)
    kbb = np.exp(-(dbb * dbb) * inv)
    kab = np.exp(-(dab * dab) * inv)
    na, nb = len(pa), len(pb)
    value = float(kaa.mean()) + float(kbb.mean()) - 2.0 * float(kab.mean())
    grad_ab = (dab * kab).sum(axis=1).astype(np.float64)
    ga = (-4.0 / (sigma * na * na)) * (daa * kaa).sum(axis=1).astype(np.float64) + (
        4.0 / (sigma * na * nb)
    ) * grad_ab
    gb = (-4.0 / (sigma * nb * nb)) * (dbb * kbb).sum(axis=1).astype(np.float64) - (
        4.0 / (sigma * na * nb)
    ) * (dab * kab).sum(axis=0).astype(np.float64)
    return value, ga, gb


def median_bandwidth(values: np.ndarray, cap: int = 512) -> float:
    """Median pairwise squared distance, on an even subsample past ``cap``."""
    v = np.asarray(values, dtype=float).ravel()
    if len(v) > cap:
        v = v[np.linspace(0, len(v) - 1, cap).astype(int)]
    if len(v) < 2:
        return 1.0
    d2 = (v[:, None] - v[None, :]) ** 2
    upper = d2[np.triu_indices(len(v), k=1)]
    med = float(np.median(upper))
    if med > 0:
        return med
    mean = float(upper.mean())
    return mean if mean > 0 else 1.0


def permutation_null_quantile(
    ya: np.ndarray,
    yb: np.ndarray,
    *,
    n_permutations: int = 200,
    q: float = 0.95,
    seed: int = 0,
    bandwidth: float | None = None,
) -> float:
    """Null quantile of MMD^2 under random reassignment of the pooled sample.

    The pooled kernel matrix does not depend on the assignment, so it is
    built once and each permutation reduces to two matrix-vector products.
    """
    pooled = np.concatenate([np.ravel(ya), np.ravel(yb)])
    sigma = bandwidth if bandwidth is not None else median_bandwidth(pooled)
    na = len(np.ravel(ya))
    n = len(pooled)
    nb = n - na
    kernel = np.exp(-((pooled[:, None] - pooled[None, :]) ** 2) / sigma)
    rng = child_rng(seed, 7)
    draws = np.empty(n_permutations)
    for k in range(n_permutations):
        u = np.zeros(n)
        u[rng.permutation(n)[:na]] = 1.0
        ku = kernel @ u
        saa = u @ ku
        sab = ku.sum() - saa
        sbb = kernel.sum() - saa - 2 * sab
        draws[k] = saa / na**2 + sbb / nb**2 - 2 * sab / (na * nb)
    return float(np.quantile(draws, q))


# -- feature selection ----------------------------------------------------------


def feature_set(
    variant: Variant, g: Pdag, sensitive: str, admissible: Iterable[str] = ()
) -> tuple[str, ...]:
    """Predictor inputs for a variant, ordered by graph index."""
    admissible = tuple(admissible)
    if variant in (Variant.FULL, Variant.EPS_IFAIR):
        return tuple(g.names)
    if variant is Variant.UNAWARE:
        return tuple(v for v in g.names if v != sensitive)
    feats = set(definite_nondescendants(g, sensitive)) | set(admissible)
    feats.discard(sensitive)
    if not feats:
        raise EmptyFeatureSetError(
            f"no definite non-descendants of {sensitive!r} and no admissible vertices"
        )
    return g.sort_vertices(feats)


def admissible_intervention_values(
    data: Dataset, admissible: Iterable[str]
) -> dict[str, float]:
    """Clamp values for the admissible vertices: training-split column means."""
    rows = data.subset("train") if "train" in set(data.split) else data
    return {v: float(rows.columns[v].mean()) for v in admissible}


# -- network ---------------------------------------------------------------------


def _init_params(n_in: int, hidden: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    return {
        "w1": rng.standard_normal((n_in, hidden)) / np.sqrt(max(n_in, 1)),
        "b1": np.zeros(hidden),
        "w2": rng.standard_normal((hidden, 1)) / np.sqrt(hidden),
        "b2": np.zeros(1),
    }


def _forward(params, x, binary: bool):
    hidden = np.tanh(x @ params["w1"] + params["b1"])
    raw = (hidden @ params["w2"] + params["b2"]).ravel()
    out = expit(raw) if binary else raw
    return out, hidden


def _backward(params, x, hidden, out, dout, binary: bool):
    """Parameter gradients given dL/d(output); returns a grad dict."""
    draw = dout * out * (1.0 - out) if binary else dout
    dz2 = draw[:, None]
    dhidden = dz2 @ params["w2"].T * (1.0 - hidden**2)
    return {
        "w1": x.T @ dhidden,
        "b1": dhidden.sum(axis=0),
        "w2": hidden.T @ dz2,
        "b2": dz2.sum(axis=0),
    }


def _zeros_like_params(params):
    return {k: np.zeros_like(v) for k, v in params.items()}


@dataclass(frozen=True)
class _Context:
    """Prediction inputs for one (group, admissible-assignment) cell."""

    sets: tuple[tuple[float, np.ndarray], ...]  # (sensitive value, feature matrix)


def _prepare_contexts(
    interventional: Sequence[InterventionalSet], features: Sequence[str], tag: str
) -> list[_Context]:
    keyed = sorted(
        interventional, key=lambda s: (s.group, s.context, s.sensitive_value)
    )
    contexts = []
    for _, members in groupby(keyed, key=lambda s: (s.group, s.context)):
        sets = []
        for s in members:
            rows = s.data.subset(tag) if tag in set(s.data.split) else s.data
            sets.append((s.sensitive_value, rows.matrix(features)))
        if len(sets) >= 2:
            contexts.append(_Context(tuple(sets)))
    return contexts


def _bandwidth(mode: str | float, pooled: np.ndarray) -> float:
    if mode == "median":
        return median_bandwidth(pooled)
    return float(mode)


def _penalty_and_grads(params, contexts, binary, bandwidth_mode, want_grads):
    """Mean MMD^2 over level pairs, contexts and groups, plus parameter grads."""
    if not contexts:
        return 0.0, None
    total = 0.0
    grads = _zeros_like_params(params) if want_grads else None
    for ctx in contexts:
        preds, hiddens = [], []
        for _, x in ctx.sets:
            out, hidden = _forward(params, x, binary)
            preds.append(out)
            hiddens.append(hidden)
        sigma = _bandwidth(bandwidth_mode, np.concatenate(preds))
        pairs = list(combinations(range(len(ctx.sets)), 2))
        weight = 1.0 / (len(contexts) * len(pairs))
        dpred = [np.zeros_like(p) for p in preds]
        for i, j in pairs:
            value, gi, gj = _mmd2_value_grad(preds[i], preds[j], sigma)
            total += weight * value
            if want_grads:
                dpred[i] += weight * gi
                dpred[j] += weight * gj
        if want_grads:
            for (_, x), hidden, out, dout in zip(ctx.sets, hiddens, preds, dpred):
                g = _backward(params, x, hidden, out, dout, binary)
                for k in grads:
                    grads[k] += g[k]
    return total, grads


def _mean_diff_penalty_and_grads(params, contexts, binary, want_grads):
    """Absolute mean-difference penalty used in the binary-outcome mode."""
    if not contexts:
        return 0.0, None
    total = 0.0
    grads = _zeros_like_params(params) if want_grads else None
    for ctx in contexts:
        preds, hiddens = [], []
        for _, x in ctx.sets:
            out, hidden = _forward(params, x, binary)
            preds.append(out)
            hiddens.append(hidden)
        pairs = list(combinations(range(len(ctx.sets)), 2))
        weight = 1.0 / (len(contexts) * len(pairs))
        dpred = [np.zeros_like(p) for p in preds]
        for i, j in pairs:
            delta = preds[i].mean() - preds[j].mean()
            total += weight * abs(delta)
            if want_grads:
                sign = np.sign(delta)
                dpred[i] += weight * sign / len(preds[i])
                dpred[j] -= weight * sign / len(preds[j])
        if want_grads:
            for (_, x), hidden, out, dout in zip(ctx.sets, hiddens, preds, dpred):
                g = _backward(params, x, hidden, out, dout, binary)
                for k in grads:
                    grads[k] += g[k]
    return total, grads


def _objective_and_grads(
    params, x, y, contexts, lam, bandwidth_mode, binary, want_grads=True
):
    out, hidden = _forward(params, x, binary)
    resid = out - y
    value = float((resid**2).mean())
    grads = None
    if want_grads:
        grads = _backward(params, x, hidden, out, 2.0 * resid / len(y), binary)
    if lam > 0 and contexts:
        if binary:
            pen, pen_grads = _mean_diff_penalty_and_grads(
                params, contexts, binary, want_grads
            )
        else:
            pen, pen_grads = _penalty_and_grads(
                params, contexts, binary, bandwidth_mode, want_grads
            )
        value += lam * pen
        if want_grads:
            for k in grads:
                grads[k] += lam * pen_grads[k]
    return value, grads


def train_predictor(
    variant: Variant,
    lam: float,
    obs: Dataset,
    interventional: Sequence[InterventionalSet],
    *,
    graph: Pdag,
    sensitive: str,
    outcome: str,
    admissible: Iterable[str] = (),
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
) -> FairPredictor:
    """Fit one predictor by momentum gradient descent with early stopping.

    Model selection tracks the validation objective (validation MSE plus the
    penalty on the validation rows of each interventional dataset); training
    stops after ``config.patience`` epochs without improvement and the best
    parameters are returned. Deterministic for a fixed seed.
    """
    admissible = tuple(admissible)
    features = feature_set(variant, graph, sensitive, admissible)
    obs_train = obs.subset("train") if "train" in set(obs.split) else obs
    obs_val = obs.subset("val")
    if obs_val.n == 0:
        obs_val = obs_train
    x_train = obs_train.matrix(features)
    y_train = obs_train.columns[outcome]
    x_val = obs_val.matrix(features)
    y_val = obs_val.columns[outcome]
    penalized = lam > 0 and len(interventional) > 0
    train_ctx = _prepare_contexts(interventional, features, "train") if penalized else []
    val_ctx = _prepare_contexts(interventional, features, "val") if penalized else []

    rng = child_rng(seed, 8)
    params = _init_params(len(features), config.hidden_width, rng)
    velocity = _zeros_like_params(params)
    best = {k: v.copy() for k, v in params.items()}
    best_val = np.inf
    best_epoch = 0
    stale = 0
    for epoch in range(config.epochs):
        _, grads = _objective_and_grads(
            params, x_train, y_train, train_ctx, lam, config.bandwidth_mode,
            config.binary_outcome,
        )
        for k in params:
            velocity[k] = config.momentum * velocity[k] - config.lr * grads[k]
            params[k] = params[k] + velocity[k]
        val_value, _ = _objective_and_grads(
            params, x_val, y_val, val_ctx, lam, config.bandwidth_mode,
            config.binary_outcome, want_grads=False,
        )
        if val_value < best_val - 1e-12:
            best_val = val_value
            best = {k: v.copy() for k, v in params.items()}
            best_epoch = epoch + 1
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break
    return FairPredictor(
        variant=variant,
        features=features,
        admissible=admissible,
        weights=best,
        lam=lam,
        seed=seed,
        binary_outcome=config.binary_outcome,
        best_epoch=best_epoch,
    )


def evaluate(
    model: FairPredictor,
    obs_test: Dataset,
    truth_interventional: Sequence[InterventionalSet],
    *,
    outcome: str,
    bandwidth_mode: str | float = "median",
) -> EvalRecord:
    """RMSE on held-out observational rows plus MMD^2 unfairness.

    Unfairness is the squared MMD between the model's predictions across the
    ground-truth interventional datasets, averaged over unordered
    sensitive-level pairs and over intervention contexts and groups.
    """
    pred = model.predict(obs_test)
    rmse = float(np.sqrt(((pred - obs_test.columns[outcome]) ** 2).mean()))
    contexts = _prepare_contexts(truth_interventional, model.features, "test")
    total = 0.0
    for ctx in contexts:
        preds = [model.predict_matrix(x) for _, x in ctx.sets]
        sigma = _bandwidth(bandwidth_mode, np.concatenate(preds))
        pairs = list(combinations(range(len(preds)), 2))
        for i, j in pairs:
            total += mmd2(preds[i], preds[j], sigma) / (len(contexts) * len(pairs))
    return EvalRecord(rmse=rmse, mmd2=total, lam=model.lam, seed=model.seed)
