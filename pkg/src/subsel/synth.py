"""Gaussian-mixture pools with optional near-duplicate redundancy."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .data import STREAM_HOLDOUT, STREAM_SYNTH, FeatureDataset, make_rng
from .errors import BadSpec

CLASS_RULES = ("alternate", "block")
LAYOUTS = ("random", "circle")


@dataclass(frozen=True)
class SyntheticSpec:
    clusters: int = 2
    per_cluster: int = 50
    dim: int = 2
    sigma: float = 1.0
    n_classes: int = 2
    class_rule: str = "alternate"
    redundancy: int = 1
    center_scale: float = 5.0
    layout: str = "random"

    def validate(self):
        problems = []
        if self.clusters < 1:
            problems.append("clusters must be >= 1")
        if self.per_cluster < 1:
            problems.append("per_cluster must be >= 1")
        if self.dim < 1:
            problems.append("dim must be >= 1")
        if not self.sigma > 0:
            problems.append(f"sigma must be > 0, got {self.sigma}")
        if self.redundancy < 1:
            problems.append(f"redundancy must be >= 1, got {self.redundancy}")
        if self.class_rule not in CLASS_RULES:
            problems.append(f"class_rule must be one of {CLASS_RULES}")
        if self.layout not in LAYOUTS:
            problems.append(f"layout must be one of {LAYOUTS}")
        if self.layout == "circle" and self.dim < 2:
            problems.append("circle layout needs dim >= 2")
        if not 1 <= self.n_classes <= self.clusters:
            problems.append("need 1 <= n_classes <= clusters so every class is populated")
        if problems:
            raise BadSpec("; ".join(problems))

    def cluster_labels(self):
        c = np.arange(self.clusters)
        if self.class_rule == "alternate":
            return c % self.n_classes
        return c * self.n_classes // self.clusters

    def to_dict(self):
        return asdict(self)


def _centers(spec, rng):
    """Cluster centers. ``circle`` spaces them evenly on a circle of radius
    ``center_scale`` in the first two coordinates."""
    if spec.layout == "circle":
        angles = 2 * np.pi * np.arange(spec.clusters) / spec.clusters
        centers = np.zeros((spec.clusters, spec.dim))
        centers[:, 0] = spec.center_scale * np.cos(angles)
        centers[:, 1] = spec.center_scale * np.sin(angles)
        return centers
    return rng.uniform(-spec.center_scale, spec.center_scale, size=(spec.clusters, spec.dim))


def _sample(spec, centers, per_cluster, redundancy, rng, prefix):
    labels_of = spec.cluster_labels()
    rows, labels = [], []
    for c in range(spec.clusters):
        base = centers[c] + spec.sigma * rng.standard_normal((per_cluster, spec.dim))
        for x in base:
            if redundancy == 1:
                rows.append(x[None, :])
            else:
                jitter = (spec.sigma / 10) * rng.standard_normal((redundancy, spec.dim))
                rows.append(x + jitter)
            labels += [labels_of[c]] * redundancy
    X = np.vstack(rows)
    ids = [f"{prefix}{i:06d}" for i in range(X.shape[0])]
    return FeatureDataset(X, np.asarray(labels), ids, spec.n_classes)


def generate(spec: SyntheticSpec, seed: int) -> FeatureDataset:
    spec.validate()
    rng = make_rng(seed, STREAM_SYNTH)
    centers = _centers(spec, rng)
    return _sample(spec, centers, spec.per_cluster, spec.redundancy, rng, "x")


def generate_with_holdout(spec: SyntheticSpec, seed: int, holdout_per_cluster: int):
    """Pool plus an independent non-redundant holdout from the same mixture."""
    if holdout_per_cluster < 1:
        raise BadSpec("holdout_per_cluster must be >= 1")
    pool = generate(spec, seed)
    centers = _centers(spec, make_rng(seed, STREAM_SYNTH))
    holdout = _sample(
        spec, centers, holdout_per_cluster, 1, make_rng(seed, STREAM_HOLDOUT), "h"
    )
    return pool, holdout
