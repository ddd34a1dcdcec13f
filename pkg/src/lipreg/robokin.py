"""Planar serial manipulators and the expert-to-learner pose correspondence data.

Joint angles are relative: each is measured from the previous link, and
their cumulative sums give the absolute link directions. The ground-truth
learner pose for an expert pose puts the learner's end effector on the
expert's and, among such poses, minimizes the summed squared distance
between points at equal arc length along the two arms.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .core import LabeledDataset

EE_TOL = 1e-6
N_ARC_SAMPLES = 20
N_STARTS = 8
EXPERT_LENGTHS = (0.6, 0.6, 0.6, 0.6, 0.6)
LEARNER_LENGTHS = (1.0, 1.0, 1.0)


class KinematicsError(ValueError):
    pass


def wrap_angle(theta):
    """Map angles to (-pi, pi]."""
    theta = np.asarray(theta, dtype=np.float64)
    out = np.mod(theta + np.pi, 2 * np.pi) - np.pi
    return np.where(out == -np.pi, np.pi, out)


@dataclass(frozen=True)
class ArmConfig:
    link_lengths: tuple
    joint_angles: tuple

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.link_lengths)
        angles = tuple(float(v) for v in wrap_angle(self.joint_angles))
        if len(lengths) != len(angles):
            raise KinematicsError('one joint angle per link is required')
        if any(v <= 0 for v in lengths):
            raise KinematicsError('link lengths must be positive')
        object.__setattr__(self, 'link_lengths', lengths)
        object.__setattr__(self, 'joint_angles', angles)

    @property
    def total_length(self):
        return sum(self.link_lengths)

    def joints(self):
        return forward_kinematics(self.link_lengths, self.joint_angles)

    def end_effector(self):
        return self.joints()[-1]


def forward_kinematics(lengths, angles):
    """Joint positions (k, 2) of a planar chain based at the origin; the last row is the end effector."""
    lengths = np.asarray(lengths, dtype=np.float64)
    heading = np.cumsum(np.asarray(angles, dtype=np.float64))
    steps = lengths[:, None] * np.column_stack([np.cos(heading), np.sin(heading)])
    return np.cumsum(steps, axis=0)


def arc_points(lengths, angles, samples=N_ARC_SAMPLES):
    """Points at arc lengths ``s_k = k * total / samples``, k = 1..samples."""
    lengths = np.asarray(lengths, dtype=np.float64)
    joints = np.vstack([[0.0, 0.0], forward_kinematics(lengths, angles)])
    cum = np.r_[0.0, np.cumsum(lengths)]
    s = cum[-1] * np.arange(1, samples + 1) / samples
    seg = np.clip(np.searchsorted(cum, s, side='right') - 1, 0, len(lengths) - 1)
    frac = (s - cum[seg]) / lengths[seg]
    return joints[seg] + frac[:, None] * (joints[seg + 1] - joints[seg])


def link_distance(expert_points, lengths, angles, samples=N_ARC_SAMPLES):
    d = arc_points(lengths, angles, samples) - expert_points
    return float(np.sum(d * d))


def _two_link_ik(base, target, l2, l3, elbow):
    """Absolute headings of a 2-link chain from ``base`` reaching ``target``, or None."""
    v = target - base
    D = math.hypot(v[0], v[1])
    if D > l2 + l3 + 1e-12 or D < abs(l2 - l3) - 1e-12:
        return None
    c = (D * D - l2 * l2 - l3 * l3) / (2 * l2 * l3)
    bend = elbow * math.acos(min(1.0, max(-1.0, c)))
    phi = math.atan2(v[1], v[0])
    beta = math.atan2(l3 * math.sin(bend), l2 + l3 * math.cos(bend))
    h2 = phi - beta
    return h2, h2 + bend


def _pose_from_free(free, target, lengths, elbow):
    """Relative angles for given absolute headings of all but the last two links."""
    free = np.atleast_1d(np.asarray(free, dtype=np.float64))
    l_free = np.asarray(lengths[:-2])
    base = np.array([np.sum(l_free * np.cos(free)), np.sum(l_free * np.sin(free))])
    heads = _two_link_ik(base, target, lengths[-2], lengths[-1], elbow)
    if heads is None:
        return None
    headings = np.r_[free, heads]
    return np.diff(np.r_[0.0, headings])


def _feasible_arcs(target, lengths):
    """Arcs of first-link headings from which the last two links reach ``target``."""
    l1, l2, l3 = lengths
    rho = float(np.hypot(*target))
    if rho == 0:
        return [(-math.pi, math.pi)] if abs(l2 - l3) <= l1 <= l2 + l3 else []
    phi = math.atan2(target[1], target[0])
    # |target - l1 u(theta)|^2 = rho^2 + l1^2 - 2 rho l1 cos(theta - phi)
    lo_c = (rho * rho + l1 * l1 - (l2 + l3) ** 2) / (2 * rho * l1)
    hi_c = (rho * rho + l1 * l1 - (l2 - l3) ** 2) / (2 * rho * l1)
    if lo_c > 1 or hi_c < -1:
        return []
    outer = math.pi if lo_c <= -1 else math.acos(lo_c)
    inner = 0.0 if hi_c >= 1 else math.acos(hi_c)
    if inner == 0.0:
        return [(phi - outer, phi + outer)]
    return [(phi - outer, phi - inner), (phi + inner, phi + outer)]


def _three_link_poses(thetas, target, lengths, elbow):
    """Vectorized IK: relative angles (G, 3) for first-link headings ``thetas``; NaN where unreachable."""
    l1, l2, l3 = lengths
    thetas = np.asarray(thetas, dtype=np.float64)
    v = target[None, :] - l1 * np.column_stack([np.cos(thetas), np.sin(thetas)])
    D2 = np.einsum('ij,ij->i', v, v)
    c = (D2 - l2 * l2 - l3 * l3) / (2 * l2 * l3)
    ok = (c >= -1 - 1e-12) & (c <= 1 + 1e-12)
    bend = elbow * np.arccos(np.clip(c, -1.0, 1.0))
    h2 = np.arctan2(v[:, 1], v[:, 0]) - np.arctan2(l3 * np.sin(bend), l2 + l3 * np.cos(bend))
    poses = np.column_stack([thetas, h2 - thetas, bend])
    poses[~ok] = np.nan
    return poses


def _arc_weights(lengths, samples):
    """Per-link interpolation data so that arc points are ``sum_k coef_k * u(heading_k)``."""
    lengths = np.asarray(lengths, dtype=np.float64)
    cum = np.r_[0.0, np.cumsum(lengths)]
    s = cum[-1] * np.arange(1, samples + 1) / samples
    # coefficient of link k's unit vector in the point at arc length s
    return np.clip(s[:, None] - cum[None, :-1], 0.0, lengths[None, :])


def _batch_link_distance(expert_pts, coef, poses):
    heads = np.cumsum(poses, axis=1)
    px = np.cos(heads) @ coef.T
    py = np.sin(heads) @ coef.T
    return np.sum((px - expert_pts[:, 0]) ** 2 + (py - expert_pts[:, 1]) ** 2, axis=1)


def _search_three_link(target, lengths, expert_pts, samples, starts, grid=16):
    coef = _arc_weights(lengths, samples)

    def f_batch(thetas, elbow):
        poses = _three_link_poses(thetas, target, lengths, elbow)
        vals = _batch_link_distance(expert_pts, coef, np.nan_to_num(poses))
        return np.where(np.isnan(poses[:, 0]), np.inf, vals)

    candidates = []
    for elbow in (1, -1):
        for lo, hi in _feasible_arcs(target, lengths):
            width = hi - lo
            # one sector per start; grid-screen it and refine its best point
            # when that point is a local minimum of the screened sequence
            thetas = lo + width * (np.arange(starts * grid) + 0.5) / (starts * grid)
            vals = f_batch(thetas, elbow)
            step = width / (starts * grid)
            for k in range(starts):
                sl = slice(k * grid, (k + 1) * grid)
                g = k * grid + int(np.argmin(vals[sl]))
                left = vals[g - 1] if g > 0 else np.inf
                right = vals[g + 1] if g + 1 < len(vals) else np.inf
                if not (vals[g] <= left and vals[g] <= right) or not np.isfinite(vals[g]):
                    continue
                a = max(lo, thetas[g] - step)
                b = min(hi, thetas[g] + step)
                res = minimize_scalar(lambda t: f_batch(np.array([t]), elbow)[0],
                                      bounds=(a, b), method='bounded',
                                      options={'xatol': 1e-12, 'maxiter': 500})
                x, fx = (res.x, res.fun) if res.fun <= vals[g] else (thetas[g], vals[g])
                pose = _pose_from_free([x], target, lengths, elbow)
                if pose is not None:
                    candidates.append((float(fx), pose))
    return candidates


def _search_general(target, lengths, expert_pts, samples, starts):
    k = len(lengths) - 2
    heading = math.atan2(target[1], target[0])
    excess_scale = 1e3
    candidates = []
    for elbow in (1, -1):
        def f(free, elbow=elbow):
            pose = _pose_from_free(free, target, lengths, elbow)
            if pose is None:
                l_free = np.asarray(lengths[:-2])
                base = np.array([np.sum(l_free * np.cos(free)), np.sum(l_free * np.sin(free))])
                gap = np.hypot(*(target - base))
                miss = max(gap - lengths[-2] - lengths[-1], abs(lengths[-2] - lengths[-1]) - gap)
                return 1e6 + excess_scale * miss
            return link_distance(expert_pts, lengths, pose, samples)

        for s in range(starts):
            x0 = np.full(k, heading + 2 * math.pi * s / starts)
            res = minimize(f, x0, method='Nelder-Mead',
                           options={'xatol': 1e-10, 'fatol': 1e-14, 'maxiter': 4000 * k})
            pose = _pose_from_free(res.x, target, lengths, elbow)
            if pose is not None:
                candidates.append((float(res.fun), pose))
    return candidates


def ground_truth_pose(expert, learner_lengths=LEARNER_LENGTHS, samples=N_ARC_SAMPLES,
                      starts=N_STARTS):
    """Learner pose matching the expert's end effector with minimal link distance.

    The two distal learner links are solved analytically given the headings
    of the others (and an elbow sign), which leaves a search over the first
    ``d - 2`` headings; for a 3-link learner that is one angle. ``starts``
    deterministic seeds per elbow branch feed a local minimizer; the lowest
    residual wins, ties going to the lexicographically smallest angles.

    Returns
    -------
    (ArmConfig, float)
        The learner configuration and its link-distance residual.
    """
    learner_lengths = tuple(float(v) for v in learner_lengths)
    if len(learner_lengths) < 3:
        raise KinematicsError('the learner arm needs at least three links')
    total = sum(learner_lengths)
    if abs(total - expert.total_length) > 1e-9 * total:
        raise KinematicsError('learner and expert total lengths differ')
    target = expert.end_effector()
    expert_pts = arc_points(expert.link_lengths, expert.joint_angles, samples)
    reach = float(np.hypot(*target))
    if reach > total * (1 + 1e-9):
        raise KinematicsError('end effector out of reach')
    if reach >= total * (1 - 1e-9):
        # only the straight pose reaches the boundary of the workspace
        angles = (math.atan2(target[1], target[0]),) + (0.0,) * (len(learner_lengths) - 1)
        cfg = ArmConfig(learner_lengths, angles)
        return cfg, link_distance(expert_pts, learner_lengths, cfg.joint_angles, samples)

    search = _search_three_link if len(learner_lengths) == 3 else _search_general
    candidates = [(v, tuple(wrap_angle(p).tolist()))
                  for v, p in search(target, learner_lengths, expert_pts, samples, starts)]
    if not candidates:
        raise KinematicsError('no learner pose reaches the end effector')
    best_val = min(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] <= best_val + 1e-12 * max(1.0, best_val)]
    val, angles = min(tied, key=lambda c: c[1])
    cfg = ArmConfig(learner_lengths, angles)
    err = np.linalg.norm(cfg.end_effector() - target)
    if err > EE_TOL:
        raise KinematicsError(f'end-effector mismatch {err:.3e}')
    return cfg, link_distance(expert_pts, learner_lengths, cfg.joint_angles, samples)


def random_expert(rng, lengths=EXPERT_LENGTHS, half_range=np.pi):
    """Angles i.i.d. uniform on (-half_range, half_range]."""
    return ArmConfig(tuple(lengths),
                     tuple(half_range - rng.uniform(0.0, 2 * half_range, len(lengths))))


def generate_samples(n, seed, expert_lengths=EXPERT_LENGTHS, learner_lengths=LEARNER_LENGTHS,
                     max_retries=10, half_range=np.pi):
    """Expert angles (n, k), learner angles (n, 3), residuals (n,) and a failure count.

    Sample ``i`` draws from a generator seeded by ``(seed, i, retry)``, so any
    sample can be regenerated independently of the others.
    """
    experts, learners, residuals = [], [], []
    failures = 0
    for i in range(n):
        for retry in range(max_retries + 1):
            rng = np.random.default_rng([seed, i, retry])
            expert = random_expert(rng, expert_lengths, half_range)
            try:
                cfg, val = ground_truth_pose(expert, learner_lengths)
            except KinematicsError:
                failures += 1
                continue
            break
        else:
            raise KinematicsError(f'sample {i}: no reachable pose after {max_retries} retries')
        experts.append(expert.joint_angles)
        learners.append(cfg.joint_angles)
        residuals.append(val)
    return np.array(experts), np.array(learners), np.array(residuals), failures


def generate_dataset(n, seed, expert_lengths=EXPERT_LENGTHS, learner_lengths=LEARNER_LENGTHS,
                     max_retries=10, half_range=np.pi):
    """Expert joint angles as inputs and ground-truth learner angles as labels.

    Returns
    -------
    (LabeledDataset, dict)
        The dataset and a metadata record (lengths, seed, solver settings,
        failure count, residual statistics).
    """
    if n < 1:
        raise ValueError('n must be at least 1')
    X, Y, res, failures = generate_samples(n, seed, expert_lengths, learner_lengths, max_retries,
                                            half_range)
    meta = {
        'n': n,
        'seed': seed,
        'expert_lengths': list(map(float, expert_lengths)),
        'learner_lengths': list(map(float, learner_lengths)),
        'angle_convention': 'relative, wrapped to (-pi, pi]',
        'expert_distribution': f'iid uniform on (-{half_range!r}, {half_range!r}]',
        'half_range': float(half_range),
        'arc_samples': N_ARC_SAMPLES,
        'starts': N_STARTS,
        'ee_tol': EE_TOL,
        'failures': failures,
        'failure_rate': failures / (n + failures),
        'residual_mean': float(np.mean(res)),
        'residual_max': float(np.max(res)),
    }
    return LabeledDataset.from_arrays(X, Y), meta
