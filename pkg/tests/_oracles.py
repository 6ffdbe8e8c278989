"""Independent reference computations used to freeze expected test values.

Everything here is written from first principles with the plain ``math``
module (no imports from the package under test) so the main implementation
can be checked against a second derivation. Run as a script to print the
frozen constants used in the test files.
"""

from __future__ import annotations

import math

FOCAL = 1.2
BASELINE = 0.06
AZIMUTH_DEG = 25.0
ELEVATION_DEG = 35.0
RADIUS = 0.35
PLANE_Z = 0.05
WORKSPACE_CENTER = (0.0, 0.0, 0.025)


def _sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def _add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _scale(a, s):
    return tuple(x * s for x in a)


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _norm(a):
    return math.sqrt(_dot(a, a))


def _unit(a):
    n = _norm(a)
    return tuple(x / n for x in a)


def camera_axes(eye, target):
    """Camera basis (x right, y down, z forward) with world +z as up hint."""
    forward = _unit(_sub(target, eye))
    up = (0.0, 0.0, 1.0)
    up_perp = _sub(up, _scale(forward, _dot(up, forward)))
    y_axis = _scale(_unit(up_perp), -1.0)
    x_axis = _cross(y_axis, forward)
    return x_axis, y_axis, forward


def project_point(eye, target, p):
    x_axis, y_axis, z_axis = camera_axes(eye, target)
    rel = _sub(p, eye)
    xc, yc, zc = _dot(rel, x_axis), _dot(rel, y_axis), _dot(rel, z_axis)
    return FOCAL * xc / zc, FOCAL * yc / zc


def canonical_rig_eyes():
    """Left/right camera origins of the fixed rig, derived independently."""
    az = math.radians(AZIMUTH_DEG)
    el = math.radians(ELEVATION_DEG)
    direction = (math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el))
    center = _add(WORKSPACE_CENTER, _scale(direction, RADIUS))
    view = _unit(_sub(WORKSPACE_CENTER, center))
    right = _unit(_cross(view, (0.0, 0.0, 1.0)))
    left_eye = _sub(center, _scale(right, BASELINE / 2.0))
    right_eye = _add(center, _scale(right, BASELINE / 2.0))
    return left_eye, right_eye


def fixed_rig_projection(p):
    left_eye, right_eye = canonical_rig_eyes()
    return (
        project_point(left_eye, WORKSPACE_CENTER, p),
        project_point(right_eye, WORKSPACE_CENTER, p),
    )


def probe_displacement(p, delta):
    """Image displacement of the controlled point for one probe move."""
    (l0, r0) = fixed_rig_projection(p)
    (l1, r1) = fixed_rig_projection(_add(p, delta))
    return _sub(l1, l0), _sub(r1, r0)


def mat2_inv(m):
    det = m[0][0] * m[1][1] - m[0][1] * m[1][0]
    return ((m[1][1] / det, -m[0][1] / det), (-m[1][0] / det, m[0][0] / det))


def mat2_vec(m, v):
    return (m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1])


def analytic_action(p_a, p_b, probe_scale, action_scale, gain):
    """One inverse-mapping controller step on the fixed rig, derived afresh."""
    p_star = (p_b[0], p_b[1], PLANE_Z)
    vl1, vr1 = probe_displacement(p_a, (probe_scale, 0.0, 0.0))
    vl2, vr2 = probe_displacement(p_a, (0.0, probe_scale, 0.0))
    (al, ar) = fixed_rig_projection(p_a)
    (bl, br) = fixed_rig_projection(p_b)
    (sl, sr) = fixed_rig_projection(p_star)
    h_l, h_r = _sub(bl, sl), _sub(br, sr)
    v_lrel = _sub(_sub(bl, al), h_l)
    v_rrel = _sub(_sub(br, ar), h_r)
    m_left = ((vl1[0], vl2[0]), (vl1[1], vl2[1]))
    m_right = ((vr1[0], vr2[0]), (vr1[1], vr2[1]))
    corr_l = mat2_vec(mat2_inv(m_left), v_lrel)
    corr_r = mat2_vec(mat2_inv(m_right), v_rrel)
    k = gain * probe_scale / action_scale * 0.5
    return (k * (corr_l[0] + corr_r[0]), k * (corr_l[1] + corr_r[1]))


def gae_reference(rewards, values, dones, bootstrap, discount, lam):
    """O(T^2) definitional advantage estimate: per-step sum of discounted deltas."""
    n = len(rewards)
    deltas = []
    for t in range(n):
        if dones[t]:
            next_v = 0.0
        elif t + 1 < n:
            next_v = values[t + 1]
        else:
            next_v = bootstrap
        deltas.append(rewards[t] + discount * next_v - values[t])
    advantages = []
    for t in range(n):
        acc = 0.0
        factor = 1.0
        for k in range(t, n):
            acc += factor * deltas[k]
            if dones[k]:
                break
            factor *= discount * lam
        advantages.append(acc)
    return advantages


def wilson_interval(successes, trials, z=1.959963984540054):
    """Textbook Wilson score interval."""
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    return center - half, center + half


if __name__ == "__main__":
    p_a = (0.02, 0.03, 0.05)
    (a_left, a_right) = fixed_rig_projection(p_a)
    print("a_left  =", a_left)
    print("a_right =", a_right)
    vl1, vr1 = probe_displacement(p_a, (0.005, 0.0, 0.0))
    print("V_L1 =", vl1)
    print("V_R1 =", vr1)
    act = analytic_action(p_a, (0.003, -0.004, 0.0), 0.005, 0.005, 0.8)
    print("analytic action (p_b=(0.003,-0.004)) =", act)
    print("wilson 46/50 =", wilson_interval(46, 50))
    print("wilson 3/10  =", wilson_interval(3, 10))
