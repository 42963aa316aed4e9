"""scikit-learn style wrappers around the pipeline.

Every estimator takes a list of images (gray arrays or contour masks) and
is stateless apart from validating its parameters in ``fit``; ``transform``
returns one result per image.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import pipeline
from ._validation import check_scalar
from .ingest import ADAPTIVE, BinaryContourImage, binarize
from .outputs import ChannelSpec, compose_channels, split_by_salience
from .salience import MEASURES, SalienceConfig


def _images(X):
    if isinstance(X, (np.ndarray, BinaryContourImage)) and np.ndim(getattr(X, "mask", X)) == 2:
        X = [X]
    return [x if isinstance(x, BinaryContourImage) else BinaryContourImage(x) for x in X]


class LineDrawingBinarizer(TransformerMixin, BaseEstimator):
    """Gray rasters to contour images (Otsu or a fixed level)."""

    def __init__(self, policy=ADAPTIVE, dark_contours=True):
        self.policy = policy
        self.dark_contours = dark_contours

    def fit(self, X=None, y=None):
        binarize(np.zeros((3, 3), dtype=np.uint8), self.policy, self.dark_contours)
        self.fitted_ = True
        return self

    def transform(self, X):
        check_is_fitted(self)
        if isinstance(X, np.ndarray) and X.ndim == 2:
            X = [X]
        return [binarize(x, self.policy, self.dark_contours) for x in X]


class _PipelineEstimator(TransformerMixin, BaseEstimator):
    # subclasses declare their own parameters; these are the shared ones
    _shared = ("tau", "window", "sigma", "radius_sigma", "radius_scale", "disk_radius",
               "sample_count", "projection", "connectivity", "frame")

    def _measures(self):
        return self.measures

    def fit(self, X=None, y=None):
        kw = {k: getattr(self, k) for k in self._shared}
        self.config_ = SalienceConfig(measures=self._measures(), **kw)
        return self


class _Measured(_PipelineEstimator):

    def __init__(self, tau=0.25, window=5, measures=MEASURES, sigma=1.0, radius_sigma=3.0,
                 radius_scale=0.4, disk_radius=1.0, sample_count=60, projection="spoke",
                 connectivity=4, frame=False):
        self.tau = tau
        self.window = window
        self.measures = measures
        self.sigma = sigma
        self.radius_sigma = radius_sigma
        self.radius_scale = radius_scale
        self.disk_radius = disk_radius
        self.sample_count = sample_count
        self.projection = projection
        self.connectivity = connectivity
        self.frame = frame


class MedialAxisSkeletonizer(_Measured):
    """Contour images to skeleton graphs (one :class:`PipelineResult` each)."""

    def transform(self, X):
        check_is_fitted(self, "config_")
        return [pipeline.skeletonize(img, self.config_) for img in _images(X)]


class ContourSalience(_Measured):
    """Contour images to per-measure contour maps.

    Each result is a float array ``(h, w, n_measures)``, ``nan`` off the
    contours, measures in ``config_.measures`` order.
    """

    def transform(self, X):
        check_is_fitted(self, "config_")
        out = []
        for img in _images(X):
            res = pipeline.run(img, self.config_)
            cv = res.salience.contour_values
            out.append(np.stack([cv[m] for m in self.config_.measures], axis=2))
        return out


class ChannelComposer(_PipelineEstimator):
    """Contour images to 3-channel compositions of contours and measures.

    Channels are built on the prepared (thinned, smoothed) contours.
    """

    def __init__(self, channels=("contours", "ribbon", "separation"), invert_polarity=False,
                 bit_depth=8, tau=0.25, window=5, sigma=1.0, radius_sigma=3.0,
                 radius_scale=0.4, disk_radius=1.0, sample_count=60, projection="spoke",
                 connectivity=4, frame=False):
        self.channels = channels
        self.invert_polarity = invert_polarity
        self.bit_depth = bit_depth
        self.tau = tau
        self.window = window
        self.sigma = sigma
        self.radius_sigma = radius_sigma
        self.radius_scale = radius_scale
        self.disk_radius = disk_radius
        self.sample_count = sample_count
        self.projection = projection
        self.connectivity = connectivity
        self.frame = frame

    def _measures(self):
        return ChannelSpec(self.channels).measures or ("separation",)

    def fit(self, X=None, y=None):
        self.spec_ = ChannelSpec(self.channels)
        return super().fit(X, y)

    def transform(self, X):
        check_is_fitted(self, "spec_")
        out = []
        for img in _images(X):
            res = pipeline.run(img, self.config_)
            out.append(compose_channels(self.spec_, res.contours, res.salience.contour_values,
                                        self.invert_polarity, self.bit_depth))
        return out


class SalienceSplitter(_PipelineEstimator):
    """Contour images to ``(top, bottom)`` splits by one measure."""

    def __init__(self, measure="ribbon", fraction=0.5, tau=0.25, window=5, sigma=1.0,
                 radius_sigma=3.0, radius_scale=0.4, disk_radius=1.0, sample_count=60,
                 projection="spoke", connectivity=4, frame=False):
        self.measure = measure
        self.fraction = fraction
        self.tau = tau
        self.window = window
        self.sigma = sigma
        self.radius_sigma = radius_sigma
        self.radius_scale = radius_scale
        self.disk_radius = disk_radius
        self.sample_count = sample_count
        self.projection = projection
        self.connectivity = connectivity
        self.frame = frame

    def _measures(self):
        return (self.measure,)

    def fit(self, X=None, y=None):
        check_scalar(self.fraction, "fraction", low=0.0, high=1.0)
        return super().fit(X, y)

    def transform(self, X):
        check_is_fitted(self, "config_")
        out = []
        for img in _images(X):
            res = pipeline.run(img, self.config_)
            cv = res.salience.contour_values[self.measure]
            out.append(split_by_salience(cv, res.contours, self.fraction, self.measure))
        return out
