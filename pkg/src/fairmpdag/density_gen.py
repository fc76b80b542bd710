"""Bucket-wise conditional Gaussians and Monte-Carlo interventional data.

Each bucket of the partial causal ordering gets an ordinary-least-squares
multivariate Gaussian conditional on its graph parents, fitted from
observational data. Interventional samples then follow the identification
formula: clamp the intervened vertices and draw the remaining buckets in
causal order from the fitted conditionals.
"""
from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .causal_ident import CausalOrdering, IdentificationFormula, identification_formula
from .graph_core import Pdag, parents
from .scm_lab import SPLIT_82, Dataset, child_rng, split_tags

RIDGE_SCALE = 1e-6


@dataclass(frozen=True)
class BucketConditional:
    """Linear-Gaussian conditional of a bucket given its parents."""

    bucket: tuple[str, ...]
    parents: tuple[str, ...]
    coef: np.ndarray
    intercept: np.ndarray
    residual_cov: np.ndarray


def fit_bucket_conditionals(
    data: Dataset, ordering: CausalOrdering, g: Pdag
) -> list[BucketConditional]:
    """OLS fit of every bucket on its graph parents.

    A rank-deficient design falls back to ridge with penalty
    ``RIDGE_SCALE * trace(X'X)``. The residual covariance is the
    maximum-likelihood estimate, symmetrized with negative eigenvalues
    clipped to zero.
    """
    models = []
    for bucket in ordering.buckets:
        members = g.sort_vertices(bucket)
        pa = parents(g, bucket)
        y = data.matrix(members)
        n = y.shape[0]
        design = np.column_stack([np.ones(n)] + [data.columns[p] for p in pa])
        beta, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
        if rank < design.shape[1]:
            gram = design.T @ design
            penalty = RIDGE_SCALE * np.trace(gram)
            beta = np.linalg.solve(
                gram + penalty * np.eye(design.shape[1]), design.T @ y
            )
        resid = y - design @ beta
        cov = resid.T @ resid / n
        cov = (cov + cov.T) / 2
        eigvals, eigvecs = np.linalg.eigh(cov)
        if eigvals.min(initial=0.0) < -1e-9:
            raise ValueError("residual covariance is not numerically PSD")
        cov = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
        models.append(
            BucketConditional(
                bucket=members,
                parents=pa,
                coef=beta[1:].T.copy(),
                intercept=beta[0].copy(),
                residual_cov=cov,
            )
        )
    return models


def _model_map(models: Sequence[BucketConditional]) -> dict[frozenset, BucketConditional]:
    return {frozenset(m.bucket): m for m in models}


def generate_interventional(
    models: Sequence[BucketConditional],
    formula: IdentificationFormula,
    assignments: Mapping[str, float],
    n: int,
    seed: int,
    split=SPLIT_82,
) -> Dataset:
    """Sample the identification formula with the intervened vertices clamped.

    Buckets are drawn sequentially in causal order, each from its fitted
    conditional given already-sampled or clamped parent values. Deterministic
    for a fixed seed and model set.
    """
    missing = [v for v in formula.fixed if v not in assignments]
    if missing:
        raise ValueError(f"missing assignment for {missing}")
    by_bucket = _model_map(models)
    rng = child_rng(seed, 6)
    columns: dict[str, np.ndarray] = {
        v: np.full(n, float(assignments[v])) for v in formula.fixed
    }
    for bucket, conditioning in reversed(formula.factors):
        model = by_bucket.get(frozenset(bucket))
        if model is None or model.parents != conditioning:
            raise ValueError(f"no fitted conditional matching bucket {bucket}")
        mean = np.tile(model.intercept, (n, 1))
        if model.parents:
            pa_vals = np.column_stack([columns[p] for p in model.parents])
            mean = mean + pa_vals @ model.coef.T
        eigvals, eigvecs = np.linalg.eigh(model.residual_cov)
        factor = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
        noise = rng.standard_normal((n, len(bucket))) @ factor.T
        values = mean + noise
        for k, v in enumerate(bucket):
            columns[v] = values[:, k]
    return Dataset(columns, split_tags(n, split))


def generate_for_unidentifiable(
    models_per_mpdag: Sequence[Sequence[BucketConditional]],
    mpdags: Sequence[Pdag],
    assignments: Mapping[str, float],
    n: int,
    seed: int,
    split=SPLIT_82,
) -> list[Dataset]:
    """One interventional dataset per candidate graph, common seed discipline."""
    if len(models_per_mpdag) != len(mpdags):
        raise ValueError("need one model set per candidate graph")
    out = []
    for models, g in zip(models_per_mpdag, mpdags):
        formula = identification_formula(g, assignments.keys())
        out.append(generate_interventional(models, formula, assignments, n, seed, split))
    return out


# -- serialization -------------------------------------------------------------


def models_to_json(models: Sequence[BucketConditional]) -> str:
    payload = [
        {
            "bucket": list(m.bucket),
            "parents": list(m.parents),
            "coef": m.coef.tolist(),
            "intercept": m.intercept.tolist(),
            "residual_cov": m.residual_cov.tolist(),
        }
        for m in models
    ]
    return json.dumps({"bucket_conditionals": payload}, indent=2)


def models_from_json(text: str) -> list[BucketConditional]:
    payload = json.loads(text)["bucket_conditionals"]
    return [
        BucketConditional(
            bucket=tuple(item["bucket"]),
            parents=tuple(item["parents"]),
            coef=np.asarray(item["coef"], dtype=float).reshape(
                len(item["bucket"]), len(item["parents"])
            ),
            intercept=np.asarray(item["intercept"], dtype=float),
            residual_cov=np.asarray(item["residual_cov"], dtype=float),
        )
        for item in payload
    ]
