"""scikit-learn style facade over the texture/fractal feature extractors."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .fractal import extract_fractal, fractal_feature_names
from .io import StudyConfig
from .texture import conventional_feature_names, extract_conventional


class RadiomicsExtractor(BaseEstimator, TransformerMixin):
    """Stateless transformer turning (VoxelGrid, RegionMask) pairs into
    feature rows, so extraction composes with sklearn pipelines.

    ``transform`` accepts a list of (grid, mask) pairs and returns an
    (n_samples, n_features) array ordered per
    ``get_feature_names_out()``.
    """

    def __init__(self, levels=32, displacements=(1, 2, 3), window=11,
                 scales=(1, 2, 4), include_fractal=True):
        self.levels = levels
        self.displacements = displacements
        self.window = window
        self.scales = scales
        self.include_fractal = include_fractal

    def _config(self):
        return StudyConfig(levels=self.levels, displacements=self.displacements,
                           window=self.window, scales=self.scales)

    def fit(self, X=None, y=None):
        return self

    def get_feature_names_out(self, input_features=None):
        config = self._config()
        names = conventional_feature_names(config)
        if self.include_fractal:
            names += fractal_feature_names(config)
        return np.asarray(names, dtype=object)

    def transform_one(self, grid, mask) -> dict[str, float]:
        config = self._config()
        row = extract_conventional(grid, mask, config)
        if self.include_fractal:
            row.update(extract_fractal(grid, mask, config))
        return row

    def transform(self, X):
        names = self.get_feature_names_out()
        rows = np.empty((len(X), len(names)))
        for i, (grid, mask) in enumerate(X):
            row = self.transform_one(grid, mask)
            rows[i] = [row[n] for n in names]
        return rows
