"""Companion profile construction.

Each equation family pairs the kernel profile p with a companion
profile built by some combination of matrix transpose or conjugate
transpose, an overall sign, reflection of the argument s -> -s, and
reflection of time.  The companion is always derived from the evolved
p, never evolved on its own, so the pairing conditions hold by
construction; companion_consistency_residual exists purely to certify
that numerically.
"""

import numpy as np

from .dispersion import DispersionParams, dispersion_residual, evolve
from .gridkernel import MatrixProfile, exponential_samples

COMPANION_KINDS = (
    "adjoint",
    "neg_adjoint",
    "transpose_rev_spacetime",
    "transpose_rev_time",
    "neg_transpose",
    "neg_transpose_rev_spacetime",
    "neg_adjoint_rev_spacetime",
    "neg_identity",
)

# which structural pieces each kind applies
_CONJ = {"adjoint", "neg_adjoint", "neg_adjoint_rev_spacetime"}
_NEG = {"neg_adjoint", "neg_transpose", "neg_transpose_rev_spacetime",
        "neg_adjoint_rev_spacetime"}
_SPACE_REV = {"transpose_rev_spacetime", "neg_transpose_rev_spacetime",
              "neg_adjoint_rev_spacetime"}
_TIME_REV = {"transpose_rev_spacetime", "transpose_rev_time",
             "neg_transpose_rev_spacetime", "neg_adjoint_rev_spacetime"}


def time_reversed(kind):
    """Whether the companion at time t reads p at time -t."""
    return kind in _TIME_REV


def space_reversed(kind):
    """Whether the companion reflects the profile argument s -> -s."""
    return kind in _SPACE_REV


def reflect_samples(samples):
    """Reflect master-grid samples about s = 0.

    The grid -X + h*arange(M) holds every reflected node except for the
    extreme one at -X, whose image +X is identified with -X by periodic
    wrap.  Decaying data makes that wrapped value negligible.
    """
    out = np.empty_like(samples)
    out[0] = samples[0]
    out[1:] = samples[1:][::-1]
    return out


def companion_profile(p, kind):
    """Companion profile of shape m x n built from the evolved p.

    For time-reversed kinds the caller must supply p evolved to -t; the
    returned profile carries time_stamp -p.time_stamp so that it is
    stamped with the wall-clock time it belongs to.
    """
    if kind == "neg_identity":
        raise ValueError("neg_identity has no companion profile; "
                         "the Fredholm layer forms Q = -P directly")
    if kind not in COMPANION_KINDS:
        raise ValueError("unknown companion kind %r" % (kind,))
    sign = -1.0 if kind in _NEG else 1.0
    t_out = -p.time_stamp if kind in _TIME_REV else p.time_stamp

    if p.exp_tag is not None:
        rate, amp = p.exp_tag
        amp = amp.conj().T if kind in _CONJ else amp.T
        amp = sign * amp
        rate = -rate if kind in _SPACE_REV else rate
        return MatrixProfile(grid=p.grid, rows=p.cols, cols=p.rows,
                             samples=exponential_samples(p.grid, rate, amp),
                             time_stamp=t_out, exp_tag=(rate, amp))

    vals = p.samples
    if kind in _CONJ:
        vals = np.conj(vals.transpose(0, 2, 1))
    else:
        vals = vals.transpose(0, 2, 1)
    if kind in _SPACE_REV:
        vals = reflect_samples(vals)
    return MatrixProfile(grid=p.grid, rows=p.cols, cols=p.rows,
                         samples=sign * vals, time_stamp=t_out, exp_tag=None)


def companion_parameters(kind, params):
    """Linear-flow parameters (-mu1, mu2) of the companion profile.

    Every pairing in COMPANION_KINDS leaves its companion satisfying
    dp~/dt = -mu1 p~_ss + mu2 p~_sss: conjugate-transpose kinds because
    their mu1 is imaginary and mu2 real, time-reversed kinds because
    reading p at -t negates both coefficients, and space-reversed kinds
    because s -> -s restores the sign of the odd-order term.
    """
    if kind not in COMPANION_KINDS:
        raise ValueError("unknown companion kind %r" % (kind,))
    return DispersionParams(mu1=-params.mu1, mu2=params.mu2)


def companion_at(p0, kind, params, t):
    """Companion profile at wall-clock time t, built from data p0."""
    source_t = -t if kind in _TIME_REV else t
    return companion_profile(evolve(p0, params, source_t), kind)


def companion_consistency_residual(p0, kind, params, t_samples):
    """Finite-difference residual of the companion linear flow.

    Builds the companion family over t_samples and measures how well it
    satisfies dp~/dt = -mu1 p~_ss + mu2 p~_sss (companion parameters).
    Small values certify the kind/parameter pairing.
    """
    if len(t_samples) < 3:
        raise ValueError("need at least 3 time samples, got %d" % len(t_samples))
    family = [companion_at(p0, kind, params, t) for t in t_samples]
    return dispersion_residual(family, companion_parameters(kind, params))
