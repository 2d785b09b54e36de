"""scikit-learn style wrapper: fit on a point cloud, then transform source points into samples."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_random_state

from .driftfield import DriftConfig
from .kernelops import KernelSpec
from .netcore import TimeEmbedSpec
from .sampler import TimeGrid, generate
from .synthdata import PointBatch, SourceSpec, sample_source
from .timepath import TimeSamplerSpec
from .trainer import TrainConfig, train


class DriftFlowMatching(BaseEstimator):
    """Few-step generator trained by grouped drift matching.

    ``fit(X, y=None)`` treats the rows of ``X`` as the target distribution
    (resampled with replacement every step). With ``y`` the model becomes
    class-conditional. ``transform`` pushes source points through ``nfe``
    transport steps; ``sample`` draws its own source points first.
    """

    def __init__(self, method="dfm", G=4, B=64, steps=10000, lr=1e-3, tau=1.0, sinkhorn_iters=1,
                 hidden=256, embed_mode="t_dt", fourier_features=4, base_freq=0.25,
                 time_sampler="lognorm", mu=-0.4, sigma=1.0, source="circle_uniform", source_scale=1.5,
                 nfe=1, random_state=0):
        self.method = method
        self.G = G
        self.B = B
        self.steps = steps
        self.lr = lr
        self.tau = tau
        self.sinkhorn_iters = sinkhorn_iters
        self.hidden = hidden
        self.embed_mode = embed_mode
        self.fourier_features = fourier_features
        self.base_freq = base_freq
        self.time_sampler = time_sampler
        self.mu = mu
        self.sigma = sigma
        self.source = source
        self.source_scale = source_scale
        self.nfe = nfe
        self.random_state = random_state

    def _train_config(self, conditional):
        seed = self.random_state
        if not isinstance(seed, (int, np.integer)):
            seed = check_random_state(seed).randint(2**31)
        return TrainConfig(
            method=self.method, G=self.G, B=self.B, steps=self.steps, lr=self.lr, seed=int(seed),
            drift=DriftConfig(KernelSpec(tau=self.tau), self.sinkhorn_iters),
            time_sampler=TimeSamplerSpec(self.time_sampler, self.mu, self.sigma),
            embed=TimeEmbedSpec(self.embed_mode, self.fourier_features, self.base_freq),
            hidden=self.hidden, conditional=conditional,
        )

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
        self.n_features_in_ = X.shape[1]
        self.source_spec_ = SourceSpec(self.source, self.source_scale)
        if self.source_spec_.kind == "circle_uniform" and X.shape[1] != 2:
            raise ValueError("the circular source is two-dimensional; use source='gaussian_iso'")
        if y is None:
            self.classes_ = None
            codes = None
        else:
            y = np.asarray(y)
            if y.shape != (len(X),):
                raise ValueError(f"y must have shape ({len(X)},), got {y.shape}")
            self.classes_, codes = np.unique(y, return_inverse=True)
            if len(self.classes_) < 2:
                raise ValueError("class-conditional fitting needs at least two classes")
        by_class = None if codes is None else [np.flatnonzero(codes == k) for k in range(len(self.classes_))]

        def draw_target(n, rng, labels=None):
            if labels is None:
                idx = rng.integers(0, len(X), n)
            else:
                idx = np.array([by_class[k][rng.integers(0, len(by_class[k]))] for k in labels])
            return PointBatch(X[idx], labels)

        def draw_source(n, rng, labels=None):
            return self._draw_source(n, rng)

        cfg = self._train_config(conditional=y is not None)
        n_classes = 0 if self.classes_ is None else len(self.classes_)
        report = train(cfg, draw_source, draw_target, n_classes=n_classes)
        self.net_ = report.net
        self.loss_curve_ = report.losses
        self.drift_norm_curve_ = report.drift_norms
        return self

    def _draw_source(self, n, rng):
        if self.source_spec_.kind == "circle_uniform":
            return sample_source(self.source_spec_, n, rng)
        return PointBatch(self.source_spec_.radius_or_std * rng.standard_normal((n, self.n_features_in_)))

    def _encode(self, y, n):
        if self.classes_ is None:
            if y is not None:
                raise ValueError("this model was fitted without labels")
            return None
        if y is None:
            return np.arange(n) % len(self.classes_)
        y = np.asarray(y)
        if y.shape != (n,):
            raise ValueError(f"y must have shape ({n},), got {y.shape}")
        if not np.all(np.isin(y, self.classes_)):
            raise ValueError("y contains labels not seen during fit")
        return np.searchsorted(self.classes_, y)

    def transform(self, X, y=None, nfe=None):
        """Push source points ``X`` through the learned transport."""
        check_is_fitted(self, "net_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        labels = self._encode(y, len(X))
        grid = TimeGrid.uniform(self.nfe if nfe is None else nfe)
        return generate(self.net_, X, grid, labels=labels, instantaneous=self.method == "flow_matching").data

    def sample(self, n_samples, y=None, nfe=None, random_state=None):
        """Draw ``n_samples`` fresh source points and transport them."""
        check_is_fitted(self, "net_")
        rng = np.random.default_rng(random_state)
        x0 = self._draw_source(n_samples, rng).data
        return self.transform(x0, y, nfe)
