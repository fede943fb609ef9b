"""Ground-truth machinery: synthetic shift generators with analytic tilts and
a brute-force oracle that solves the discrete matching problem exactly.

The discrete oracle works on finite atom spaces (at most 64 atom-class
cells), maximizing the matching objective by damped Newton ascent from many
seeded restarts; non-identifiable instances surface as multiple optima with
equal KL. Every generator also emits a labeled target draw for evaluation
only, kept out of all estimation paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, SufficientStatistic, UnlabeledDataset
from .errors import ConfigError, InfeasibleSpec
from .tilt import TiltModel
from .numerics import substream

ORACLE_CELL_CAP = 64


# ---------------------------------------------------------------------------
# Gaussian class-conditional drift (shared priors, identity covariance)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianLdaSpec:
    """Per-class unit Gaussians whose means drift between domains.

    The exact tilt for this family is linear in x:
    theta_k = mu_Q,k - mu_P,k and alpha_k = (|mu_P,k|^2 - |mu_Q,k|^2) / 2.
    """

    priors: np.ndarray  # (K,)
    mu_p: np.ndarray  # (K, p)
    mu_q: np.ndarray  # (K, p)

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=np.float64)
        mu_p = np.asarray(self.mu_p, dtype=np.float64)
        mu_q = np.asarray(self.mu_q, dtype=np.float64)
        if priors.ndim != 1 or np.any(priors <= 0) or abs(priors.sum() - 1.0) > 1e-9:
            raise ConfigError("priors must be a positive vector summing to 1")
        if mu_p.shape != mu_q.shape or mu_p.shape[0] != priors.shape[0]:
            raise ConfigError("mean matrices must be (K, p) for K priors")
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "mu_p", mu_p)
        object.__setattr__(self, "mu_q", mu_q)

    @property
    def n_classes(self):
        return self.priors.shape[0]

    @property
    def dim(self):
        return self.mu_p.shape[1]

    def true_tilt(self):
        theta = self.mu_q - self.mu_p
        alpha = 0.5 * (np.sum(self.mu_p**2, axis=1) - np.sum(self.mu_q**2, axis=1))
        return TiltModel(SufficientStatistic(), theta, alpha, alpha.copy(), 1.0)

    def to_json(self):
        return {
            "priors": self.priors.tolist(),
            "mu_p": self.mu_p.tolist(),
            "mu_q": self.mu_q.tolist(),
        }

    @staticmethod
    def from_json(obj):
        return GaussianLdaSpec(
            np.asarray(obj["priors"]), np.asarray(obj["mu_p"]), np.asarray(obj["mu_q"])
        )


def _sample_gaussian_mixture(priors, means, n, rng):
    comp = rng.choice(len(priors), size=n, p=priors)
    x = means[comp] + rng.standard_normal((n, means.shape[1]))
    return x, comp


def gen_lda(spec, n_p, n_q, seed):
    """Draw source/target samples from the drifting-Gaussian family.

    Returns (source, target, truth, target_labeled); the labeled target draw
    is independent of the unlabeled one and is for evaluation only.
    """
    rng = substream(seed, 0xA11)
    xs, ys = _sample_gaussian_mixture(spec.priors, spec.mu_p, n_p, rng)
    xq, _ = _sample_gaussian_mixture(spec.priors, spec.mu_q, n_q, rng)
    xql, yql = _sample_gaussian_mixture(spec.priors, spec.mu_q, n_q, rng)
    k = spec.n_classes
    return (
        LabeledDataset(xs, ys, None, k),
        UnlabeledDataset(xq),
        spec.true_tilt(),
        LabeledDataset(xql, yql, None, k),
    )


def gen_label_shift(means, src_priors, tgt_priors, n_p, n_q, seed):
    """Pure label shift: shared class conditionals, different priors.

    The exact tilt has theta = 0 and alpha_k = log(q_k / p_k).
    """
    means = np.asarray(means, dtype=np.float64)
    src_priors = np.asarray(src_priors, dtype=np.float64)
    tgt_priors = np.asarray(tgt_priors, dtype=np.float64)
    k = means.shape[0]
    rng = substream(seed, 0x1AB)
    xs, ys = _sample_gaussian_mixture(src_priors, means, n_p, rng)
    xq, _ = _sample_gaussian_mixture(tgt_priors, means, n_q, rng)
    xql, yql = _sample_gaussian_mixture(tgt_priors, means, n_q, rng)
    alpha = np.log(tgt_priors / src_priors)
    truth = TiltModel(
        SufficientStatistic(), np.zeros((k, means.shape[1])), alpha, alpha.copy(), 1.0
    )
    return (
        LabeledDataset(xs, ys, None, k),
        UnlabeledDataset(xq),
        truth,
        LabeledDataset(xql, yql, None, k),
    )


# ---------------------------------------------------------------------------
# Subpopulation (group proportion) shift
# ---------------------------------------------------------------------------

WATERBIRDS_GROUP_SIZES = {0: 3498, 1: 184, 2: 56, 3: 1057}
WATERBIRDS_TEST_SIZES = {0: 3189, 1: 3187, 2: 908, 3: 908}
WATERBIRDS_SRC_PROPS = tuple(
    c / sum(WATERBIRDS_GROUP_SIZES.values()) for c in WATERBIRDS_GROUP_SIZES.values()
)
WATERBIRDS_GROUP_TO_CLASS = (0, 0, 1, 1)


def waterbirds_analog_means(p=8, class_sep=1.5, context_sep=2.5):
    """Group mean layout for the four-group analog benchmark.

    Axis 0 carries the class signal, axis 1 a context signal that correlates
    with the class in the source but not under minority-group targets;
    remaining axes are noise.
    """
    means = np.zeros((4, p))
    for g, cls in enumerate(WATERBIRDS_GROUP_TO_CLASS):
        context = g in (1, 3)  # groups 1 and 3 share the second context
        means[g, 0] = class_sep * (1.0 if cls == 1 else -1.0)
        means[g, 1] = context_sep * (1.0 if context else -1.0)
    return means


def gen_group_shift(group_means, group_to_class, src_props, tgt_props, n_p, n_q, seed):
    """Gaussian blob per group; source and target differ only in proportions.

    Returns (source, target, target_labeled); the labeled sets carry group
    annotations for precision/recall evaluation.
    """
    group_means = np.asarray(group_means, dtype=np.float64)
    group_to_class = np.asarray(group_to_class, dtype=np.int64)
    src_props = np.asarray(src_props, dtype=np.float64)
    tgt_props = np.asarray(tgt_props, dtype=np.float64)
    g = group_means.shape[0]
    for props in (src_props, tgt_props):
        if props.shape != (g,) or np.any(props < 0) or abs(props.sum() - 1.0) > 1e-9:
            raise ConfigError("group proportions must be a simplex over the groups")
    rng = substream(seed, 0x6E0)
    k = int(group_to_class.max()) + 1

    def draw(props, n):
        grp = rng.choice(g, size=n, p=props)
        x = group_means[grp] + rng.standard_normal((n, group_means.shape[1]))
        return x, group_to_class[grp], grp

    xs, ys, gs = draw(src_props, n_p)
    xq, _, _ = draw(tgt_props, n_q)
    xql, yql, gql = draw(tgt_props, n_q)
    return (
        LabeledDataset(xs, ys, gs, k),
        UnlabeledDataset(xq),
        LabeledDataset(xql, yql, gql, k),
    )


# ---------------------------------------------------------------------------
# Finite discrete problems with an exact oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteShiftSpec:
    """Finite sample space: m atoms, a source joint over (atom, class), and a
    true tilt whose intercepts are renormalized so the implied target joint
    sums to one (use make_discrete_spec to build from raw intercepts)."""

    atoms: np.ndarray  # (m, p)
    source_joint: np.ndarray  # (m, K)
    theta_star: np.ndarray  # (K, d)
    alpha_star: np.ndarray  # (K,)
    stat: SufficientStatistic

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=np.float64)
        joint = np.asarray(self.source_joint, dtype=np.float64)
        if atoms.ndim != 2 or joint.ndim != 2 or joint.shape[0] != atoms.shape[0]:
            raise ConfigError("atoms (m, p) and source_joint (m, K) must align")
        if np.any(joint < 0) or abs(joint.sum() - 1.0) > 1e-9:
            raise ConfigError("source joint must be non-negative and sum to 1")
        if np.any(joint.sum(axis=1) <= 0):
            raise ConfigError("every atom must carry positive source mass")
        if len({tuple(a) for a in atoms}) != atoms.shape[0]:
            raise ConfigError("atoms must be distinct")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "source_joint", joint)
        object.__setattr__(self, "theta_star", np.asarray(self.theta_star, dtype=np.float64))
        object.__setattr__(self, "alpha_star", np.asarray(self.alpha_star, dtype=np.float64))

    @property
    def n_atoms(self):
        return self.atoms.shape[0]

    @property
    def n_classes(self):
        return self.source_joint.shape[1]

    def true_tilt(self):
        return TiltModel(
            self.stat, self.theta_star, self.alpha_star, self.alpha_star.copy(), 1.0
        )

    def target_joint(self):
        t = self.stat.apply(self.atoms)
        s = t @ self.theta_star.T + self.alpha_star
        return self.source_joint * np.exp(s)

    def target_marginal(self):
        return self.target_joint().sum(axis=1)

    def sample_source(self, n, rng):
        flat = self.source_joint.ravel()
        idx = rng.choice(flat.size, size=n, p=flat / flat.sum())
        ai, ki = np.unravel_index(idx, self.source_joint.shape)
        return LabeledDataset(self.atoms[ai], ki, None, self.n_classes)

    def sample_target(self, n, rng, labeled=False):
        q = self.target_joint().ravel()
        idx = rng.choice(q.size, size=n, p=q / q.sum())
        ai, ki = np.unravel_index(idx, self.source_joint.shape)
        if labeled:
            return LabeledDataset(self.atoms[ai], ki, None, self.n_classes)
        return UnlabeledDataset(self.atoms[ai])

    def to_json(self):
        return {
            "atoms": self.atoms.tolist(),
            "source_joint": self.source_joint.tolist(),
            "theta_star": self.theta_star.tolist(),
            "alpha_star": self.alpha_star.tolist(),
            "stat": self.stat.to_json(),
        }

    @staticmethod
    def from_json(obj):
        return DiscreteShiftSpec(
            np.asarray(obj["atoms"]),
            np.asarray(obj["source_joint"]),
            np.asarray(obj["theta_star"]),
            np.asarray(obj["alpha_star"]),
            SufficientStatistic.from_json(obj["stat"]),
        )


def make_discrete_spec(atoms, source_joint, theta, alpha_raw, stat=None):
    """Build a DiscreteShiftSpec, renormalizing the intercepts so the implied
    target joint sums to one (the same correction the estimator applies)."""
    stat = stat or SufficientStatistic()
    atoms = np.asarray(atoms, dtype=np.float64)
    source_joint = np.asarray(source_joint, dtype=np.float64)
    source_joint = source_joint / source_joint.sum()
    theta = np.asarray(theta, dtype=np.float64)
    alpha_raw = np.asarray(alpha_raw, dtype=np.float64)
    t = stat.apply(atoms)
    s = t @ theta.T + alpha_raw
    n = float(np.sum(source_joint * np.exp(s)))
    return DiscreteShiftSpec(atoms, source_joint, theta, alpha_raw - math.log(n), stat)


def label_switch_twin_spec(grid_lo=-5.0, grid_hi=5.0, m=14, mu_p=(-1.0, 1.0), mu_q=(-2.0, 2.0)):
    """Discretized two-class drifting-Gaussian instance with uniform priors.

    Swapping which source class tilts to which target class reproduces the
    same target marginal, so the matching problem has (at least) two optima
    and no atom anchors any class: the canonical non-identifiable case.
    """
    atoms = np.linspace(grid_lo, grid_hi, m)[:, None]
    mu_p = np.asarray(mu_p, dtype=np.float64)
    mu_q = np.asarray(mu_q, dtype=np.float64)
    dens = np.exp(-0.5 * (atoms - mu_p[None, :]) ** 2)  # (m, 2), uniform priors
    joint = 0.5 * dens
    joint /= joint.sum()
    theta = (mu_q - mu_p)[:, None]
    alpha_raw = 0.5 * (mu_p**2 - mu_q**2)
    return make_discrete_spec(atoms, joint, theta, alpha_raw)


@dataclass(frozen=True)
class AnchorClassReport:
    atom_indices: tuple
    rank: int
    required_rank: int

    @property
    def anchored(self):
        return len(self.atom_indices) > 0

    @property
    def rank_ok(self):
        return self.rank >= self.required_rank


def check_anchor_sets(spec, stat=None):
    """Anchor atoms per class and the rank condition for uniqueness.

    An atom anchors class k when only class k has positive source mass
    there. Identifiability additionally needs the anchored extended
    statistics (1, T(x)) to span d+1 dimensions.
    """
    stat = stat or spec.stat
    t = stat.apply(spec.atoms)
    d = t.shape[1]
    s_ext = np.hstack([np.ones((spec.n_atoms, 1)), t])
    report = {}
    for k in range(spec.n_classes):
        pos = spec.source_joint[:, k] > 0
        others = np.delete(spec.source_joint, k, axis=1).sum(axis=1) > 0
        idx = np.flatnonzero(pos & ~others)
        rank = 0
        if idx.size:
            rank = int(np.linalg.matrix_rank(s_ext[idx]))
        report[k] = AnchorClassReport(tuple(int(i) for i in idx), rank, d + 1)
    return report


@dataclass(frozen=True)
class OracleReport:
    """Distinct local optima of the exact matching problem, sorted by KL."""

    thetas: tuple  # of (K, d) arrays
    alphas: tuple  # of (K,) arrays
    kls: tuple  # of floats
    restarts: int

    @property
    def n_optima(self):
        return len(self.kls)

    def best(self):
        return self.thetas[0], self.alphas[0]

    def to_json(self, anchor_report=None):
        out = {
            "optima": [
                {"theta": th.tolist(), "alpha": al.tolist()}
                for th, al in zip(self.thetas, self.alphas)
            ],
            "kl": list(self.kls),
            "restarts": self.restarts,
        }
        if anchor_report is not None:
            out["anchored"] = {
                str(k): {
                    "atoms": list(r.atom_indices),
                    "rank": r.rank,
                    "required_rank": r.required_rank,
                    "rank_ok": r.rank_ok,
                }
                for k, r in anchor_report.items()
            }
        return out


def _oracle_parts(xi, logp, s_ext, qx, k, dd):
    """Stable shared pieces: per-atom log mixture mass and responsibilities."""
    theta_ext = xi.reshape(k, dd)  # rows are (alpha_k, theta_k)
    a = logp + s_ext @ theta_ext.T  # (m, K)
    m_row = a.max(axis=1, keepdims=True)
    ea = np.exp(a - m_row)
    mix = ea.sum(axis=1)
    lse = m_row[:, 0] + np.log(mix)  # log mixture mass per atom
    top = lse.max()
    logn = top + math.log(float(np.sum(np.exp(lse - top))))
    return ea, mix, lse, logn


def _oracle_value(xi, logp, s_ext, qx, k, dd):
    _, _, lse, logn = _oracle_parts(xi, logp, s_ext, qx, k, dd)
    return float(qx @ lse) - logn, logn


def _oracle_value_grad_hess(xi, logp, s_ext, qx, k, dd):
    """Objective, gradient, Hessian of the gauge-free matching objective.

    Everything runs through log-sum-exp so wild restart points cannot
    overflow; returns (value, grad, hess, log_normalizer).
    """
    ea, mix, lse, logn = _oracle_parts(xi, logp, s_ext, qx, k, dd)
    value = float(qx @ lse) - logn

    v = ea / mix[:, None]  # (m, K) rows sum to 1
    u = np.exp(lse - logn)[:, None] * v  # model joint, sums to 1
    grad = ((qx[:, None] * v - u).T @ s_ext).ravel()

    outer = np.einsum("mi,mj->mij", s_ext, s_ext)  # (m, dd, dd)
    hess = np.zeros((k * dd, k * dd))
    su = np.einsum("mk,mi->ki", u, s_ext)  # (K, dd)
    for ka in range(k):
        for kb in range(k):
            blk = np.zeros((dd, dd))
            w_t = qx * v[:, ka] * ((ka == kb) - v[:, kb])
            blk += np.einsum("m,mij->ij", w_t, outer)
            if ka == kb:
                blk -= np.einsum("m,mij->ij", u[:, ka], outer)
            blk += np.outer(su[ka], su[kb])
            hess[ka * dd : (ka + 1) * dd, kb * dd : (kb + 1) * dd] = blk
    return value, grad, hess, logn


def oracle_solve(
    spec,
    stat=None,
    restarts=50,
    seed=0,
    max_iter=200,
    grad_tol=1e-11,
    dedup_tol=1e-3,
    feasibility_tol=1e-6,
):
    """Solve the exact discrete matching problem from many restarts.

    Newton ascent with positive-definite damping (the objective is a convex
    target term plus a concave normalizer term, so the raw Hessian can be
    indefinite); after every accepted step the intercepts are re-normalized
    so the source normalizer is one. Only restarts whose gradient dropped
    below grad_tol count; the distinct stationary points (parameter distance
    > dedup_tol) are returned sorted by KL. Raises InfeasibleSpec when even
    the best optimum leaves KL above feasibility_tol.
    """
    stat = stat or spec.stat
    t = stat.apply(spec.atoms)
    k = spec.n_classes
    dd = t.shape[1] + 1
    if spec.n_atoms * k > ORACLE_CELL_CAP:
        raise ConfigError(
            f"oracle capped at {ORACLE_CELL_CAP} atom-class cells, "
            f"got {spec.n_atoms * k}"
        )
    s_ext = np.hstack([np.ones((spec.n_atoms, 1)), t])
    with np.errstate(divide="ignore"):
        logp = np.log(spec.source_joint)
    qx = spec.target_marginal()
    qx = qx / qx.sum()
    eye = np.eye(k * dd)

    def regauge(xi):
        _, logn = _oracle_value(xi, logp, s_ext, qx, k, dd)
        xi = xi.reshape(k, dd).copy()
        xi[:, 0] -= logn
        return xi.ravel()

    solutions = []
    for r in range(restarts):
        rng = substream(seed, 0x07AC, r)
        xi = regauge(rng.standard_normal(k * dd))
        value, grad, hess, _ = _oracle_value_grad_hess(xi, logp, s_ext, qx, k, dd)
        converged = False
        for _ in range(max_iter):
            if np.max(np.abs(grad)) <= grad_tol:
                converged = True
                break
            # force a PD system so the direction is guaranteed ascent
            tau = 1e-9 * (1.0 + float(np.abs(np.diag(hess)).max()))
            while True:
                try:
                    np.linalg.cholesky(-hess + tau * eye)
                    break
                except np.linalg.LinAlgError:
                    tau *= 10.0
            direction = np.linalg.solve(-hess + tau * eye, grad)
            slope = float(grad @ direction)
            ls = 1.0
            accepted = False
            for _bt in range(80):
                cand = regauge(xi + ls * direction)
                cval, _ = _oracle_value(cand, logp, s_ext, qx, k, dd)
                if cval >= value + 1e-4 * ls * slope:
                    xi = cand
                    value, grad, hess, _ = _oracle_value_grad_hess(
                        xi, logp, s_ext, qx, k, dd
                    )
                    accepted = True
                    break
                ls *= 0.5
            if not accepted:
                converged = np.max(np.abs(grad)) <= 1e3 * grad_tol
                break
        if converged:
            kl = float(np.sum(qx[qx > 0] * np.log(qx[qx > 0]))) - value
            solutions.append((xi, kl))

    if not solutions:
        raise ConfigError("oracle failed to converge from any restart")
    solutions.sort(key=lambda s: s[1])
    distinct = []
    for xi, kl in solutions:
        if all(np.linalg.norm(xi - d_xi) > dedup_tol for d_xi, _ in distinct):
            distinct.append((xi, kl))
    thetas, alphas, kls = [], [], []
    for xi, kl in distinct:
        mat = xi.reshape(k, dd)
        alphas.append(mat[:, 0].copy())
        thetas.append(mat[:, 1:].copy())
        kls.append(max(kl, 0.0))
    report = OracleReport(tuple(thetas), tuple(alphas), tuple(kls), restarts)
    if report.kls[0] > feasibility_tol:
        raise InfeasibleSpec(
            f"target marginal not representable: residual KL {report.kls[0]:.3e}",
            report.kls[0],
        )
    return report
