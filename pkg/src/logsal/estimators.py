"""Scikit-learn compatible wrappers around the filter bank and pipeline.

These expose get_params/set_params so runs can be configured and swept
with the usual sklearn tooling; the heavy lifting stays in the functional
modules.
"""

from sklearn.base import BaseEstimator, TransformerMixin

from . import loggabor
from .pipeline import PipelineConfig, run_pipeline, DEFAULT_SCALES

__all__ = ["LogGaborResponses", "SaliencyExplainer"]


class LogGaborResponses(BaseEstimator, TransformerMixin):
    """Transformer: image in, stack of log-Gabor energy maps out.

    fit() builds the transfer grids at the requested dims; transform()
    expects images at those dims and returns (n_filters, H, W) energies.
    """

    def __init__(self, height=64, width=64, n_orientations=5,
                 n_wavelengths=4, n_sigmas=4):
        self.height = height
        self.width = width
        self.n_orientations = n_orientations
        self.n_wavelengths = n_wavelengths
        self.n_sigmas = n_sigmas

    def fit(self, X=None, y=None):
        params = loggabor.default_bank_params(
            self.n_orientations, self.n_wavelengths, self.n_sigmas)
        self.bank_ = loggabor.build_bank(params, self.height, self.width)
        return self

    def transform(self, X):
        return loggabor.respond_all(X, self.bank_)


class SaliencyExplainer(BaseEstimator):
    """Predictor: (image, layer manifest) in, saliency map in [0, 1] out.

    fit() builds the filter bank; predict() runs the layer-by-layer
    reconstruction. The trace of the last run is kept on trace_.
    """

    def __init__(self, bank_height=64, bank_width=64, n_orientations=5,
                 n_wavelengths=4, n_sigmas=4, k_filters=10, k_keep=10,
                 scales=DEFAULT_SCALES, epsilon=1e-12, min_dim=8,
                 combine="mean", blur_sigma=0.0):
        self.bank_height = bank_height
        self.bank_width = bank_width
        self.n_orientations = n_orientations
        self.n_wavelengths = n_wavelengths
        self.n_sigmas = n_sigmas
        self.k_filters = k_filters
        self.k_keep = k_keep
        self.scales = scales
        self.epsilon = epsilon
        self.min_dim = min_dim
        self.combine = combine
        self.blur_sigma = blur_sigma

    def fit(self, X=None, y=None):
        params = loggabor.default_bank_params(
            self.n_orientations, self.n_wavelengths, self.n_sigmas)
        self.bank_ = loggabor.build_bank(params, self.bank_height,
                                         self.bank_width)
        return self

    def _config(self):
        return PipelineConfig(
            k_filters=self.k_filters, k_keep=self.k_keep,
            scales=tuple(self.scales), epsilon=self.epsilon,
            min_dim=self.min_dim, combine=self.combine,
            blur_sigma=self.blur_sigma)

    def predict(self, image, manifest, base_dir=None):
        sal, trace = run_pipeline(image, manifest, self.bank_,
                                  self._config(), base_dir=base_dir)
        self.trace_ = trace
        return sal
