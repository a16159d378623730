"""Log-Gabor filter bank built on the frequency lattice.

Frequencies are normalized to Nyquist: a lattice coordinate of 1.0 sits at
the highest representable frequency, so the shortest-wavelength filter
(lambda0 = 1) peaks exactly at the spectrum edge. Wavelengths are the
reciprocals of these normalized frequencies.

Filters have a Gaussian profile on the log-frequency axis crossed with a
Gaussian orientation lobe, zero DC response, and two-sided (orientation,
not direction) angular symmetry.
"""

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from . import grids
from .validation import check_grid, check_complex_grid

__all__ = [
    "FilterParams",
    "FilterBank",
    "default_bank_params",
    "transfer_value",
    "build_bank",
    "apply_filter",
    "energy",
    "respond_all",
    "spatial_kernel",
    "peak_lattice_index",
    "save_bank",
]

_BANDWIDTH_GUARD = 1e-6

N_ORIENTATIONS = 5
N_WAVELENGTHS = 4
N_SIGMAS = 4
_SCALE_STEP = 1.5


@dataclass(frozen=True)
class FilterParams:
    """Center orientation/wavelength and the two Gaussian width parameters."""

    theta0: float
    lambda0: float
    sigma_f: float
    sigma_theta: float

    def __post_init__(self):
        if self.lambda0 <= 0:
            raise ValueError("lambda0 must be positive")
        if self.sigma_theta <= 0:
            raise ValueError("sigma_theta must be positive")
        if abs(math.log(self.sigma_f * self.lambda0)) < _BANDWIDTH_GUARD:
            raise ValueError("degenerate bandwidth: sigma_f too close to f0")

    @property
    def f0(self):
        return 1.0 / self.lambda0


@dataclass
class FilterBank:
    """Ordered filters held as frequency-domain transfer grids.

    grids has shape (G, H, W); row g is the transfer grid of params[g] on
    the unshifted DFT lattice.
    """

    params: list
    grids: np.ndarray

    def __len__(self):
        return len(self.params)

    @property
    def height(self):
        return self.grids.shape[1]

    @property
    def width(self):
        return self.grids.shape[2]


def default_bank_params(n_orientations=N_ORIENTATIONS, n_wavelengths=N_WAVELENGTHS,
                        n_sigmas=N_SIGMAS):
    """The default 5 orientations x 4 wavelengths x 4 widths = 80 filters.

    Orientations sample [0, pi) uniformly; wavelengths start at 1 and the
    width pairs at 0.5, both scaling by 1.5 per step.
    """
    thetas = [k * math.pi / n_orientations for k in range(n_orientations)]
    lambdas = [_SCALE_STEP ** i for i in range(n_wavelengths)]
    sigmas = [0.5 * _SCALE_STEP ** i for i in range(n_sigmas)]
    return [
        FilterParams(theta0=t, lambda0=l, sigma_f=s, sigma_theta=s)
        for t in thetas
        for l in lambdas
        for s in sigmas
    ]


def _wrapped_orientation_distance(phi, theta0):
    """Angular distance modulo pi (two-sided lobe)."""
    d = np.mod(phi - theta0, math.pi)
    return np.minimum(d, math.pi - d)


def transfer_value(p, rho, phi):
    """Transfer gain at radial frequency rho (Nyquist units) and angle phi.

    Zero at DC; 1.0 exactly at (f0, theta0).
    """
    rho = np.asarray(rho, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if np.any(rho < 0):
        raise ValueError("rho must be nonnegative")
    log_bw = math.log(p.sigma_f * p.lambda0)  # ln(sigma_f / f0)
    if abs(log_bw) < _BANDWIDTH_GUARD:
        raise ValueError("degenerate bandwidth: sigma_f too close to f0")
    dtheta = _wrapped_orientation_distance(phi, p.theta0)
    with np.errstate(divide="ignore"):
        logr = np.log(np.where(rho > 0, rho * p.lambda0, 1.0))
    radial = np.exp(-(logr ** 2) / (2.0 * log_bw ** 2))
    angular = np.exp(-(dtheta ** 2) / (2.0 * p.sigma_theta ** 2))
    out = np.where(rho > 0, radial * angular, 0.0)
    return float(out) if out.ndim == 0 else out


def _lattice(h, w):
    """Nyquist-normalized frequency lattice: (rho, phi) per DFT bin."""
    fy = np.fft.fftfreq(h)[:, np.newaxis] * 2.0
    fx = np.fft.fftfreq(w)[np.newaxis, :] * 2.0
    rho = np.hypot(fy, fx)
    phi = np.arctan2(fy, fx)
    return rho, phi


def build_bank(params, h, w):
    """Sample every filter's transfer function on the h x w DFT lattice.

    Filters stay in the frequency domain; filtering is done by spectral
    multiplication, which equals circular convolution with the centered
    spatial kernel (see spatial_kernel for the debug export).
    """
    if h < 8 or w < 8:
        raise ValueError(f"bank dims must be >= 8, got ({h}, {w})")
    rho, phi = _lattice(h, w)
    out = np.empty((len(params), h, w))
    for i, p in enumerate(params):
        out[i] = transfer_value(p, rho, phi)
    out[:, 0, 0] = 0.0
    return FilterBank(params=list(params), grids=out)


def peak_lattice_index(p, h, w):
    """Lattice bin nearest (f0, theta0) in the filter's normalized metric.

    Distance is measured in units of the filter's own widths on the
    (log-frequency, orientation) axes, which is the metric the transfer
    gain decays in.
    """
    rho, phi = _lattice(h, w)
    log_bw = math.log(p.sigma_f * p.lambda0)
    with np.errstate(divide="ignore"):
        logr = np.log(np.where(rho > 0, rho * p.lambda0, np.inf))
    d2 = (logr / log_bw) ** 2 + (
        _wrapped_orientation_distance(phi, p.theta0) / p.sigma_theta
    ) ** 2
    return np.unravel_index(int(np.argmin(d2)), d2.shape)


def apply_filter(img, bank, index):
    """Complex (even + i*odd) response of one bank filter to an image."""
    img = check_grid(img)
    if img.shape != (bank.height, bank.width):
        raise ValueError(
            f"image shape {img.shape} does not match bank "
            f"({bank.height}, {bank.width})"
        )
    return grids.idft2(grids.dft2(img) * bank.grids[index])


def energy(resp):
    """Pointwise local energy: modulus of the complex response."""
    resp = check_complex_grid(resp)
    return np.hypot(resp.real, resp.imag)


def respond_all(img, bank):
    """Energy maps of every filter in bank order, shape (G, H, W)."""
    img = check_grid(img)
    if img.shape != (bank.height, bank.width):
        raise ValueError(
            f"image shape {img.shape} does not match bank "
            f"({bank.height}, {bank.width})"
        )
    spectrum = grids.dft2(img)
    out = np.empty((len(bank), bank.height, bank.width))
    for g in range(len(bank)):
        out[g] = energy(np.fft.ifft2(spectrum * bank.grids[g]))
    return out


def spatial_kernel(bank, index):
    """Centered complex spatial-domain kernel of one filter (debug export)."""
    kern = np.fft.ifft2(bank.grids[index])
    return np.fft.fftshift(kern)


def save_bank(bank, out_dir):
    """Write one array file per transfer grid plus a JSON parameter index."""
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, p in enumerate(bank.params):
        name = f"filter_{i:03d}.npy"
        grids.save_array(bank.grids[i][np.newaxis], out_dir / name)
        entries.append({"index": i, "file": name, **asdict(p)})
    with open(out_dir / "index.json", "w") as f:
        json.dump({"height": bank.height, "width": bank.width,
                   "filters": entries}, f, indent=2)
