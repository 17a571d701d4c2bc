"""Stability verdict in the large-delay limit.

The periodic solution is asymptotically stable for all large N when three
conditions hold: the instantaneous spectrum lies strictly left of the axis,
the trivial root of the characteristic function at (mu, z) = (0, 1) is
simple in z, and the asymptotic continuous spectrum stays strictly below
the axis away from its tangency at the origin.  Instability follows from a
strongly unstable instantaneous exponent or a positive part of the
continuous spectrum.  Borderline cases are classified and flagged; phase-pi
and modulational tangencies are benign, the rest defer the decision."""

from dataclasses import dataclass, field

import numpy as np

from .charfun import char_derivatives
from .errors import DerivativeUnreliableError
from .spectra import instantaneous_spectrum

STATUS_STABLE = "stable"
STATUS_UNSTABLE = "unstable"
STATUS_DEGENERATE = "degenerate"

EXIT_CODES = {STATUS_STABLE: 0, STATUS_UNSTABLE: 2, STATUS_DEGENERATE: 3}

FLAG_AXIS_INSTANTANEOUS = "axis-instantaneous"
FLAG_TRIVIAL_DEGENERATE = "trivial-root-degenerate"
FLAG_TURING = "turing-tangency"
FLAG_PI_PHASE = "pi-phase-tangency"
FLAG_MODULATIONAL = "modulational"
FLAG_UNCLASSIFIED = "unclassified-tangency"

# flags that keep the verdict stable; everything else defers to degenerate
_BENIGN = {FLAG_PI_PHASE, FLAG_MODULATIONAL}


@dataclass
class ToleranceSet:
    axis: float = 1e-6              # margin around Re = 0 / gamma = 0
    trivial_root: float = 1e-8      # simplicity of the trivial root in z
    origin_exclusion: float = 1e-4  # ball around (0, 0, 0) ignored in sup gamma
    tangency_window: float = 0.1    # omega/phase window for classification


@dataclass
class DecayEstimate:
    """Leading nontrivial exponent estimate mu ~ -c/N^3 +- 2 pi i/(N + tau)."""

    n_delay: int
    re_mu: float
    im_mu: float


@dataclass
class Verdict:
    status: str
    flags: list
    max_re_instantaneous: float
    trivial_root_slope: float
    sup_gamma: float
    decay: list = field(default_factory=list)

    @property
    def exit_code(self):
        return EXIT_CODES[self.status]


def _gamma_curvature(acs_result):
    """Second derivative of gamma(omega) on the critical branch at omega = 0."""
    br = acs_result.critical_branch()
    if br is None:
        return None
    w, g, _ = br.arrays()
    sel = np.abs(w) < max(5 * np.diff(np.sort(w)).max(), 0.3)
    if sel.sum() < 3:
        return None
    coef = np.polyfit(w[sel], g[sel], 2)
    return 2.0 * coef[0]


def decay_estimates(acs_result, tau, n_values):
    """Exponent decay annotations for the requested delay counts."""
    curv = _gamma_curvature(acs_result)
    out = []
    if curv is None or curv >= 0:
        return out
    for n in n_values:
        theta = n + tau
        omega1 = 2 * np.pi / theta
        out.append(DecayEstimate(n_delay=int(n),
                                 re_mu=0.5 * curv * omega1**2 / theta,
                                 im_mu=omega1))
    return out


def decide(ctx, acs_result, n_values=(), tol=None):
    """Combine the three spectral conditions into a verdict with flags."""
    tol = tol or ToleranceSet()
    flags = []
    u1 = u2 = False

    inst = instantaneous_spectrum(ctx)
    mri = float(np.real(inst[0]))
    if mri > tol.axis:
        u1 = True
    elif mri >= -tol.axis:
        flags.append(FLAG_AXIS_INSTANTANEOUS)

    try:
        _, d2 = char_derivatives(ctx, 0.0 + 0.0j, 1.0 + 0.0j)
        slope = float(abs(d2))
    except DerivativeUnreliableError:
        slope = 0.0
    if slope <= tol.trivial_root:
        flags.append(FLAG_TRIVIAL_DEGENERATE)

    supg = acs_result.sup_gamma(tol.origin_exclusion)
    if supg > tol.axis:
        u2 = True
    elif supg >= -tol.axis:
        flags.extend(_classify_tangencies(acs_result, tol))

    # an instantaneous exponent on the axis invalidates the continuous
    # spectrum, so it defers the verdict even when U-2 fires
    if u1:
        status = STATUS_UNSTABLE
    elif FLAG_AXIS_INSTANTANEOUS in flags:
        status = STATUS_DEGENERATE
    elif u2:
        status = STATUS_UNSTABLE
    elif any(f not in _BENIGN for f in flags):
        status = STATUS_DEGENERATE
    else:
        status = STATUS_STABLE

    decay = decay_estimates(acs_result, ctx.tau, n_values) \
        if status == STATUS_STABLE else []
    return Verdict(status=status, flags=flags, max_re_instantaneous=mri,
                   trivial_root_slope=slope, sup_gamma=supg, decay=decay)


def _classify_tangencies(acs_result, tol):
    flags = []
    for br in acs_result.branches:
        w, g, p = br.arrays()
        for wi, gi, pi in zip(w, g, p):
            if gi < -tol.axis:
                continue
            pw = (pi + np.pi) % (2 * np.pi) - np.pi
            if np.sqrt(wi * wi + gi * gi + pw * pw) <= tol.origin_exclusion:
                continue
            if abs(pw) < tol.tangency_window:
                flag = FLAG_MODULATIONAL if abs(wi) < tol.tangency_window \
                    else FLAG_TURING
            elif abs(abs(pw) - np.pi) < tol.tangency_window:
                flag = FLAG_PI_PHASE
            else:
                flag = FLAG_UNCLASSIFIED
            if flag not in flags:
                flags.append(flag)
    return flags
