"""Shared synthetic problem builders used across the test suite."""

import numpy as np

from tiltweigh import make_discrete_spec
from tiltweigh.synthetic import WATERBIRDS_GROUP_TO_CLASS, waterbirds_analog_means


def anchored_instance(i):
    """Two-class one-dimensional discrete problem with per-class anchors.

    The class-conditional probabilities on the shared atoms follow a logistic
    curve (slope 6) so the fitted source classifier can match them exactly;
    the two extreme atoms on each side carry exact zeros for the other class,
    giving each class an anchor pair whose extended statistics (1, x) have
    full rank. Instance i draws its tilt from seed 200 + i.
    """
    rng = np.random.default_rng(200 + i)
    atoms = np.array([[-2.2], [-1.6], [-0.4], [0.4], [1.6], [2.2]])
    marg = np.array([0.14, 0.14, 0.22, 0.22, 0.14, 0.14])
    cond1 = 1.0 / (1.0 + np.exp(-6.0 * atoms[:, 0]))
    cond1[0] = cond1[1] = 0.0
    cond1[-1] = cond1[-2] = 1.0
    joint = np.stack([marg * (1 - cond1), marg * cond1], axis=1)
    theta = rng.uniform(-0.3, 0.3, (2, 1))
    alpha = rng.uniform(-0.15, 0.15, 2)
    return make_discrete_spec(atoms, joint, theta, alpha)


def anchored_three_class():
    """Three-class variant; the side classes sit away from the origin, so the
    intercept-slope split is intrinsically noisier than the two-class case."""
    rng = np.random.default_rng(77)
    atoms = np.array(
        [[-4.0], [-2.2], [-1.0], [-0.8], [-0.3], [0.3], [0.8], [1.0], [2.2], [4.0]]
    )
    w, b1 = 12.0, 10.8
    logits = np.stack([-w * atoms[:, 0], np.full(len(atoms), b1), w * atoms[:, 0]], 1)
    e = np.exp(logits - logits.max(1, keepdims=True))
    cond = e / e.sum(1, keepdims=True)
    cond[0] = [1, 0, 0]
    cond[1] = [1, 0, 0]
    cond[4] = [0, 1, 0]
    cond[5] = [0, 1, 0]
    cond[8] = [0, 0, 1]
    cond[9] = [0, 0, 1]
    joint = np.full(10, 0.1)[:, None] * cond
    theta = rng.uniform(-0.25, 0.25, (3, 1))
    alpha = rng.uniform(-0.15, 0.15, 3)
    return make_discrete_spec(atoms, joint, theta, alpha)


def rank_deficient_anchor_instance():
    """Class 0 is supported on a single atom, so its anchor statistics
    (1, x) have rank 1 = d rather than d+1: the intercept-slope split for
    that class is a one-parameter optimum family."""
    atoms = np.array([[-1.0], [0.0], [1.0]])
    joint = np.array([[0.5, 0.0], [0.0, 0.2], [0.0, 0.3]])
    theta = np.array([[0.2], [-0.1]])
    alpha = np.array([0.05, -0.02])
    return make_discrete_spec(atoms, joint, theta, alpha)


SPURIOUS_SRC_PROPS = (0.45, 0.05, 0.05, 0.45)
MINORITY_TGT_PROPS = (0.0, 0.5, 0.5, 0.0)


def spurious_group_means(p=8):
    return waterbirds_analog_means(p)


GROUP_TO_CLASS = WATERBIRDS_GROUP_TO_CLASS
