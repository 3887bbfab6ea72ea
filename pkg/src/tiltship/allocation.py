"""Control allocation: effectiveness matrix, rate bounds, ERP, surfaces,
and nullspace actuator optimization.

Allocation works on the rate level: the inner loop demands a pseudo
control rate nu_dot (5,) and the allocator distributes it over the
eight propulsion actuator rates u_dot = [Omega_dot(4), gamma_dot(4)].

The ERP allocator scales the demand by a single factor c in [0, 1]
instead of clipping channels, so the achieved direction always matches
the demanded direction: B u_dot = c * nu_dot.  Saturated channels are
frozen and excluded from subsequent iterations; at most
p - m + 1 = 4 iterations are needed.

Per-channel rate bounds combine the physical rate limits with
phase-plane terms bw * (pos_limit - pos) that guarantee the absolute
position limits are honored by rate-level allocation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .actuators import ActuatorSuite
from .params import AirshipParams

# Singular values below this fraction of the largest are treated as rank
# deficiency throughout the allocator.
RANK_EPS = 1e-8


@dataclass
class RateBounds:
    """Admissible actuator rates this step, channel order [Omega(4), gamma(4)]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if np.any(self.lower > self.upper):
            raise ValueError("rate bounds must satisfy lower <= upper")


@dataclass
class AllocationResult:
    udot: np.ndarray                 # allocated rates (8,)
    c: float                         # achieved scale in [0, 1]
    iterations: int
    saturated: list = field(default_factory=list)   # channel indices frozen
    rank_limited: bool = False       # stopped on rank collapse with c < 1


def control_effectiveness(
    Omega: np.ndarray, gamma: np.ndarray, params: AirshipParams
) -> np.ndarray:
    """Analytic Jacobian of the propulsion pseudo controls w.r.t. u.

    Columns 0..3 are the rotor-speed partials (linear in Omega), columns
    4..7 the tilt partials (proportional to Omega^2): a stopped rotor
    contributes nothing through its tilt.
    """
    Omega = np.asarray(Omega, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    rho = params.rho_air
    kT = np.array([r.k_T for r in params.rotors])
    kN = np.array([r.k_N for r in params.rotors])
    sig = np.array([r.sigma_dir for r in params.rotors])
    pos = np.array([r.r_RP for r in params.rotors])
    x, y, z = pos[:, 0], pos[:, 1], pos[:, 2]
    sg, cg = np.sin(gamma), np.cos(gamma)
    Om2 = Omega * Omega

    B = np.zeros((5, 8))
    # L_P row
    B[0, 0:4] = -2.0 * rho * (sg * kN * sig + cg * kT * y) * Omega
    B[0, 4:8] = rho * (sg * kT * y - cg * kN * sig) * Om2
    # M_P row
    B[1, 0:4] = 2.0 * rho * kT * (z * sg + x * cg) * Omega
    B[1, 4:8] = rho * kT * (z * cg - x * sg) * Om2
    # N_P row
    B[2, 0:4] = 2.0 * rho * (cg * kN * sig - sg * kT * y) * Omega
    B[2, 4:8] = -rho * (sg * kN * sig + cg * kT * y) * Om2
    # X_P row
    B[3, 0:4] = 2.0 * rho * kT * sg * Omega
    B[3, 4:8] = rho * kT * cg * Om2
    # Z_P row
    B[4, 0:4] = -2.0 * rho * kT * cg * Omega
    B[4, 4:8] = rho * kT * sg * Om2
    return B


def pseudoinverse_alloc(B: np.ndarray, nu_dot: np.ndarray) -> np.ndarray:
    """Minimum-norm solution u_dot = B^T (B B^T)^-1 nu_dot.

    Raises ValueError when B is rank deficient.
    """
    s = np.linalg.svd(B, compute_uv=False)
    if s[-1] <= RANK_EPS * s[0]:
        raise ValueError("control effectiveness matrix is rank deficient")
    return B.T @ np.linalg.solve(B @ B.T, nu_dot)


# Allocation-side idle floor for the rotor speeds.  A rotor at
# standstill has zero effectiveness in every column (thrust ~ Omega^2),
# so the incremental allocation could never spin it up again; keeping a
# small idle speed preserves the rank of the effectiveness matrix at
# all times.  Analogous to the deliberate +-35 deg restriction on the
# control surfaces, this is tighter than the physical limit.
OMEGA_ALLOC_FLOOR = 20.0

# Allocation-side tilt ceiling.  The physical range reaches 255 deg,
# i.e. nearly the full circle; rate-level allocation is path dependent
# and can walk a tilt "over the top" into thrust-down orientations it
# then cannot leave.  Restricting the allocator to the useful envelope
# (full forward thrust at 90 deg plus margin) removes those paths.
# One-sided soft bounds keep the current position always feasible.
GAMMA_ALLOC_CEIL = math.radians(95.0)


def rate_bounds(suite: ActuatorSuite, params: AirshipParams) -> RateBounds:
    """Phase-plane rate bounds for the eight propulsion channels.

    upper = min(rate_max, bw * (pos_max - pos)) and the mirrored lower
    bound; a channel sitting at its absolute limit gets a zero-sided
    bound so the allocator cannot push it further out.  The rotor-speed
    lower bound uses the idle floor and the tilt upper bound the soft
    ceiling (see OMEGA_ALLOC_FLOOR / GAMMA_ALLOC_CEIL); the soft bounds
    never force motion by themselves.
    """
    lower = np.empty(8)
    upper = np.empty(8)
    for i, r in enumerate(params.rotors):
        floor = max(r.omega_min, OMEGA_ALLOC_FLOOR)
        ceil = min(r.gamma_max, GAMMA_ALLOC_CEIL)
        upper[i] = min(r.omega_dot_max, r.omega_bw * (r.omega_max - suite.Omega[i]))
        lower[i] = max(
            r.omega_dot_min, min(0.0, r.omega_bw * (floor - suite.Omega[i]))
        )
        upper[4 + i] = min(
            r.gamma_dot_max, max(0.0, r.tilt_bw * (ceil - suite.gamma[i]))
        )
        lower[4 + i] = max(r.gamma_dot_min, r.tilt_bw * (r.gamma_min - suite.gamma[i]))
    # Positions can sit a hair outside the limits numerically.
    upper = np.maximum(upper, lower)
    return RateBounds(lower, upper)


def _masked_pinv_apply(B: np.ndarray, active: np.ndarray, nu_dot: np.ndarray, svd=None):
    """u_dot = B_eps^+ nu_dot with excluded columns zeroed.

    Returns (u_dot, rank_ok) where rank_ok indicates the reduced matrix
    still spans all pseudo controls.  ``svd`` may carry a precomputed
    (U, s, Vt) of the active submatrix.
    """
    Ba = B[:, active]
    U, s, Vt = svd if svd is not None else np.linalg.svd(Ba, full_matrices=False)
    rank_ok = s.size >= B.shape[0] and s[-1] > RANK_EPS * s[0]
    udot = np.zeros(B.shape[1])
    if rank_ok:
        udot[active] = Vt.T @ ((U.T @ nu_dot) / s)
    return udot, rank_ok


def erp_alloc(
    B: np.ndarray,
    nu_dot_cmd: np.ndarray,
    bounds: RateBounds,
    svd0=None,
) -> AllocationResult:
    """Iteratively scaled redistribution of nu_dot_cmd within rate bounds.

    The trim part of the demand is zero for this airship, so the initial
    solution is u_dot(0) = 0 and the whole command is the scalable part.
    Each iteration solves the reduced pseudoinverse, finds the largest
    admissible step d(k) before a channel saturates, accumulates
    c(k) = sum d(j), freezes the limiting channels, and repeats until
    c = 1 or the reduced matrix loses row rank.
    """
    n = B.shape[1]
    udot = np.zeros(n)
    active = np.ones(n, dtype=bool)
    saturated: list[int] = []
    c = 0.0
    iterations = 0
    rank_limited = False

    demand_scale = float(np.max(np.abs(nu_dot_cmd))) if nu_dot_cmd.size else 0.0
    if demand_scale < 1e-14:
        return AllocationResult(udot, 1.0, 0, saturated, False)

    max_iter = n - B.shape[0] + 1
    while iterations < max_iter:
        udot_delta, rank_ok = _masked_pinv_apply(
            B, active, nu_dot_cmd, svd0 if iterations == 0 else None
        )
        if not rank_ok:
            rank_limited = True
            break
        iterations += 1

        # Per-channel admissible fraction of the remaining demand.
        d_bar = np.full(n, np.inf)
        delta_scale = np.max(np.abs(udot_delta))
        defined = np.abs(udot_delta) > 1e-12 * max(delta_scale, 1e-30)
        pos = defined & (udot_delta > 0.0)
        neg = defined & (udot_delta < 0.0)
        d_bar[pos] = (bounds.upper[pos] - udot[pos]) / udot_delta[pos]
        d_bar[neg] = (bounds.lower[neg] - udot[neg]) / udot_delta[neg]
        d_bar = np.maximum(d_bar, 0.0)  # roundoff guard: udot is within bounds

        d_max = float(np.min(d_bar)) if np.any(np.isfinite(d_bar)) else np.inf
        if d_max > 1.0 - c:
            d = 1.0 - c
            limiting = np.zeros(n, dtype=bool)
        else:
            d = d_max
            limiting = active & (d_bar <= d_max * (1.0 + 1e-12))

        udot = udot + d * udot_delta
        c += d
        if np.any(limiting):
            # Freeze the limiting channels; snap exactly onto the bound
            # only where the step actually landed there (a tied channel
            # with a larger d_bar, or a zero-length step, must keep its
            # accumulated value).
            tol = 1e-9 * (1.0 + np.abs(bounds.upper) + np.abs(bounds.lower))
            snap_hi = limiting & pos & (np.abs(udot - bounds.upper) <= tol)
            snap_lo = limiting & neg & (np.abs(udot - bounds.lower) <= tol)
            udot[snap_hi] = bounds.upper[snap_hi]
            udot[snap_lo] = bounds.lower[snap_lo]
            saturated.extend(np.nonzero(limiting)[0].tolist())
            active &= ~limiting

        if c >= 1.0 - 1e-12:
            c = 1.0
            break

    udot = np.clip(udot, bounds.lower, bounds.upper)
    if c < 1.0 and not rank_limited and iterations >= max_iter:
        rank_limited = True
    return AllocationResult(udot, c, iterations, saturated, rank_limited)


def surface_alloc(
    M_des: np.ndarray,
    airspeed: float,
    params: AirshipParams,
    eta_limit: float = math.radians(35.0),
    activation_speed: float = 3.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Allocate the desired moment to the three control surfaces.

    Below the activation airspeed the surfaces are ineffective and the
    allocation returns zeros.  Above it, the square fin effectiveness
    matrix is inverted directly and the solution scaled by a single
    factor d so no deflection exceeds ``eta_limit`` (restricted below
    the physical limit to stay in the linear effectiveness range).

    Returns (eta_cmd, M_F_achieved).
    """
    from .dynamics import surface_effectiveness

    if airspeed < activation_speed:
        return np.zeros(3), np.zeros(3)
    q_scale = 0.5 * params.rho_air * airspeed * airspeed
    q_scale *= params.fins[0].S_ref * params.fins[0].l_ref
    if q_scale < 1e-9:
        # Zero dynamic pressure with activation forced: inactive.
        return np.zeros(3), np.zeros(3)
    B_surf = q_scale * surface_effectiveness(params.fins)
    eta_delta = np.linalg.solve(B_surf, np.asarray(M_des, dtype=float))

    d_max = np.inf
    for i in range(3):
        if eta_delta[i] > 1e-15:
            d_max = min(d_max, eta_limit / eta_delta[i])
        elif eta_delta[i] < -1e-15:
            d_max = min(d_max, -eta_limit / eta_delta[i])
    d = 1.0 if d_max > 1.0 else d_max
    eta = d * eta_delta
    return eta, B_surf @ eta


def tilt_targets(airspeed: float, params: AirshipParams) -> np.ndarray:
    """Preferred tilt angles vs airspeed for the nullspace optimizer.

    Hover: +45 deg on the front rotors and -45 deg on the aft rotors
    (largest attainable moment set); cruise above 5 m/s: 85 deg on all;
    linear blend in between.  Front/aft from the sign of the rotor x
    position.
    """
    hover_front = math.radians(45.0)
    hover_aft = math.radians(-45.0)
    cruise = math.radians(85.0)
    blend = min(max(airspeed / 5.0, 0.0), 1.0)
    out = np.empty(4)
    for i, r in enumerate(params.rotors):
        hover = hover_front if r.r_RP[0] > 0.0 else hover_aft
        out[i] = (1.0 - blend) * hover + blend * cruise
    return out


# Rotor speed above which the optimizer starts pulling RPM down.  A
# pull towards zero at all speeds proved self-defeating: the speed
# error never vanishes in flight (hovering needs thrust), so it
# permanently dominates the projected objective and drags the tilts
# away from their preferred positions; with a dead band the pull acts
# only near the upper limit, which is what it is for.
OMEGA_PULLDOWN_START = 250.0


def nullspace_rates(
    B: np.ndarray,
    suite: ActuatorSuite,
    airspeed: float,
    K_act_opt: float,
    params: AirshipParams,
    svd=None,
    omega_pulldown: float = OMEGA_PULLDOWN_START,
) -> np.ndarray:
    """Actuator rates towards preferred positions, projected into null(B).

    Tilts are pulled towards :func:`tilt_targets`; rotor speeds are
    pulled down only above ``omega_pulldown``.  The projected rates
    change nothing in the achieved pseudo control rate; they only
    redistribute actuators.  Returns zeros when B is rank deficient
    (no safe projection this step).

    The projection minimizes the distance in rate-limit-normalized
    coordinates.  In raw units the tilt columns of B outweigh the speed
    columns by the thrust/speed ratio, which squeezes nearly all tilt
    motion out of the nullspace basis; normalizing by each channel's
    full-scale rate makes redistribution cost a like-for-like fraction
    of actuator capability.  B u_dot_ns = 0 holds exactly either way.
    """
    err = np.empty(8)
    err[0:4] = np.minimum(omega_pulldown - suite.Omega, 0.0)
    err[4:8] = tilt_targets(airspeed, params) - suite.gamma
    udot_des = K_act_opt * err

    scale = np.array(
        [r.omega_dot_max for r in params.rotors]
        + [r.gamma_dot_max for r in params.rotors]
    )
    B_s = B * scale  # column scaling: maps normalized rates to nu_dot
    U, s, Vt = np.linalg.svd(B_s, full_matrices=False)
    if s[-1] <= RANK_EPS * s[0]:
        return np.zeros(8)
    v = udot_des / scale
    # (I - B^+ B) v  ==  v - V V^T v  with V the right singular vectors.
    return scale * (v - Vt.T @ (Vt @ v))


def scale_into_bounds(
    udot_base: np.ndarray, udot_extra: np.ndarray, bounds: RateBounds
) -> np.ndarray:
    """Largest s in [0, 1] such that udot_base + s*udot_extra stays in bounds.

    Uniform scaling keeps nullspace contributions inside null(B).
    """
    s = 1.0
    for i in range(udot_base.size):
        if udot_extra[i] > 1e-15:
            room = bounds.upper[i] - udot_base[i]
            s = min(s, max(room, 0.0) / udot_extra[i])
        elif udot_extra[i] < -1e-15:
            room = bounds.lower[i] - udot_base[i]
            s = min(s, max(-room, 0.0) / -udot_extra[i])
    return udot_base + s * udot_extra


def add_nullspace_rates(
    udot_base: np.ndarray,
    B: np.ndarray,
    suite: ActuatorSuite,
    airspeed: float,
    K_act_opt: float,
    params: AirshipParams,
    bounds: RateBounds,
    omega_pulldown: float = OMEGA_PULLDOWN_START,
) -> np.ndarray:
    """Add budget-aware nullspace redistribution to an allocated solution.

    Like :func:`nullspace_rates` but aware of the remaining rate budget:
    channels with no headroom in their pull direction are pinned to zero
    and the projection recomputed on the free channels (still exactly in
    null(B)), so one blocked actuator does not disable redistribution
    for all the others.  The combined rates never leave ``bounds``.
    """
    err = np.empty(8)
    err[0:4] = np.minimum(omega_pulldown - suite.Omega, 0.0)
    err[4:8] = tilt_targets(airspeed, params) - suite.gamma
    scale = np.array(
        [r.omega_dot_max for r in params.rotors]
        + [r.gamma_dot_max for r in params.rotors]
    )
    v_full = K_act_opt * err / scale
    B_s = B * scale
    room_up = np.maximum(bounds.upper - udot_base, 0.0)
    room_dn = np.maximum(udot_base - bounds.lower, 0.0)

    free = np.ones(8, dtype=bool)
    for _ in range(4):
        Bf = B_s[:, free]
        if Bf.shape[1] < B.shape[0]:
            return udot_base
        U, s, Vt = np.linalg.svd(Bf, full_matrices=False)
        if s.size < B.shape[0] or s[-1] <= RANK_EPS * s[0]:
            return udot_base
        vf = v_full[free]
        xf = vf - Vt.T @ (Vt @ vf)
        ns = np.zeros(8)
        ns[free] = xf * scale[free]

        # Headroom check; pin the channels that block immediately.
        blocked = (
            ((ns > 1e-12) & (room_up < 1e-9 * scale))
            | ((ns < -1e-12) & (room_dn < 1e-9 * scale))
        )
        if not np.any(blocked & free):
            return scale_into_bounds(udot_base, ns, bounds)
        free &= ~blocked
    return scale_into_bounds(udot_base, ns, bounds)
