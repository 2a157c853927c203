"""Randomized instance generators shared across the test modules."""

import numpy as np

from osrb_lab.measures import Channel, JointPmf, Pmf


def random_joint(rng, nx, nz, marginal_floor=1e-3):
    """Random joint pmf with every marginal entry at least the floor."""
    while True:
        probs = rng.uniform(0.0, 1.0, size=(nx, nz))
        probs /= probs.sum()
        if probs.sum(axis=1).min() >= marginal_floor and probs.sum(axis=0).min() >= marginal_floor:
            rows = tuple(f"x{i}" for i in range(nx))
            cols = tuple(f"z{i}" for i in range(nz))
            return JointPmf(rows, cols, probs)


def random_pmf(rng, k, floor=0.0, prefix="s"):
    while True:
        v = rng.uniform(0.0, 1.0, size=k)
        v /= v.sum()
        if v.min() >= floor:
            return Pmf(tuple(f"{prefix}{i}" for i in range(k)), v)


def random_channel(rng, in_labels, out_labels, floor=0.0):
    rows = []
    for _ in in_labels:
        while True:
            v = rng.uniform(0.0, 1.0, size=len(out_labels))
            v /= v.sum()
            if v.min() >= floor:
                rows.append(v)
                break
    return Channel(tuple(in_labels), tuple(out_labels), np.array(rows))
