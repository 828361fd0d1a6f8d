"""Exact-in-time linear evolution of profiles.

The linear flow is dp/dt = mu1 * d^2p/ds^2 + mu2 * d^3p/ds^3, solved
exactly for any t by multiplying Fourier coefficients with
e^{t*symbol(k)}.  There is no time stepping anywhere; a profile at time
t is always produced in one multiplier application from the data.
"""

from dataclasses import dataclass
import numpy as np

from .gridkernel import MatrixProfile, exponential_samples

EXP_GUARD = 700.0  # natural-log scale, past this exp() overflows doubles


class GrowthError(ValueError):
    """Raised when the requested evolution amplifies some resolved
    frequency beyond double range (anti-diffusive branch)."""


@dataclass(frozen=True)
class DispersionParams:
    mu1: complex
    mu2: complex


def symbol(params, k):
    """Multiplier exponent mu1*(2*pi*i*k)^2 + mu2*(2*pi*i*k)^3."""
    z = 2j * np.pi * np.asarray(k)
    return params.mu1 * z ** 2 + params.mu2 * z ** 3


def exp_rate_symbol(params, a):
    """Growth rate of a pure exponential e^{a*s}: mu1*a^2 + mu2*a^3."""
    return params.mu1 * a ** 2 + params.mu2 * a ** 3


def evolve(p, params, t):
    """Profile at time p.time_stamp + t under the exact linear flow."""
    if t == 0.0:
        return p
    if p.exp_tag is not None:
        rate, amp = p.exp_tag
        lam = t * exp_rate_symbol(params, rate)
        if lam.real > EXP_GUARD:
            raise GrowthError("evolution amplifies e^{%g s} data by e^%.3g; "
                              "reduce the time horizon" % (rate, lam.real))
        new_amp = amp * np.exp(lam)
        return MatrixProfile(grid=p.grid, rows=p.rows, cols=p.cols,
                             samples=exponential_samples(p.grid, rate, new_amp),
                             time_stamp=p.time_stamp + t,
                             exp_tag=(rate, new_amp))
    k = np.fft.fftfreq(p.grid.node_count, d=p.grid.spacing)
    lam = t * symbol(params, k)
    growth = lam.real.max()
    if growth > EXP_GUARD:
        raise GrowthError("evolution amplifies resolved frequencies by up to "
                          "e^%.3g; use band-limited data or a shorter horizon"
                          % growth)
    mult = np.exp(lam)
    samples = np.fft.ifft(mult[:, None, None] * np.fft.fft(p.samples, axis=0), axis=0)
    return MatrixProfile(grid=p.grid, rows=p.rows, cols=p.cols, samples=samples,
                         time_stamp=p.time_stamp + t, exp_tag=None)


def spectral_derivative(p, order=1):
    """Exact d^order/ds^order of a profile on its grid."""
    if p.exp_tag is not None:
        rate, amp = p.exp_tag
        new_amp = amp * rate ** order
        return MatrixProfile(grid=p.grid, rows=p.rows, cols=p.cols,
                             samples=exponential_samples(p.grid, rate, new_amp),
                             time_stamp=p.time_stamp, exp_tag=(rate, new_amp))
    k = np.fft.fftfreq(p.grid.node_count, d=p.grid.spacing)
    mult = (2j * np.pi * k) ** order
    samples = np.fft.ifft(mult[:, None, None] * np.fft.fft(p.samples, axis=0), axis=0)
    return MatrixProfile(grid=p.grid, rows=p.rows, cols=p.cols, samples=samples,
                         time_stamp=p.time_stamp, exp_tag=None)


def dispersion_residual(profiles, params):
    """Max norm of dp/dt - mu1 p_ss - mu2 p_sss over interior snapshots.

    Takes a family of >= 3 profiles at uniformly spaced times; the time
    derivative is a centered difference across neighbouring snapshots,
    the space derivatives are exact spectral ones, so the result decays
    like dt^2 when the family really solves the linear equation.
    """
    if len(profiles) < 3:
        raise ValueError("need at least 3 snapshots, got %d" % len(profiles))
    ts = np.array([q.time_stamp for q in profiles])
    dts = np.diff(ts)
    dt = dts[0]
    if dt <= 0 or not np.allclose(dts, dt, rtol=1e-9, atol=0.0):
        raise ValueError("snapshots must be at uniformly increasing times")
    worst = 0.0
    for j in range(1, len(profiles) - 1):
        dpdt = (profiles[j + 1].samples - profiles[j - 1].samples) / (2.0 * dt)
        rhs = (params.mu1 * spectral_derivative(profiles[j], 2).samples
               + params.mu2 * spectral_derivative(profiles[j], 3).samples)
        worst = max(worst, float(np.abs(dpdt - rhs).max()))
    return worst
