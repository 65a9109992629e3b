"""scikit-learn style front ends for lattice analysis and family optimization."""

from __future__ import annotations

from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .catalog import get_lattice
from .exact import as_exact
from .family import analyze_family, minimize_G, tensor_decomposition, validity_window
from .lattice import Lattice, ParameterError, _decode_with_relevant, _reduced_frame
from .pipeline import analyze_lattice

__all__ = ["VoronoiAnalyzer", "FamilyOptimizer", "check_lattice", "check_points", "check_rational"]


def check_lattice(lattice: Union[Lattice, str, Sequence[Sequence]]) -> Lattice:
    """Accept a ``Lattice``, a catalog name or an exact generator (rows are basis vectors)."""
    if isinstance(lattice, Lattice):
        return lattice
    if isinstance(lattice, str):
        return get_lattice(lattice)
    rows = [[as_exact(c) for c in row] for row in lattice]
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ParameterError("generator must be a non-empty square matrix")
    from .linalg import ExactMatrix

    return Lattice(generator=ExactMatrix(rows))


def check_points(X, n: int) -> np.ndarray:
    """Finite float array of shape ``(m, n)``."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != n:
        raise ValueError(f"expected {n} columns, got {X.shape[1]}")
    return X


def check_rational(x, name: str, positive: bool = False) -> Fraction:
    try:
        v = Fraction(as_exact(x))
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"{name} must be rational, got {x!r}") from exc
    if positive and v <= 0:
        raise ParameterError(f"{name} must be positive")
    return v


class VoronoiAnalyzer(BaseEstimator):
    """Exact Voronoi-cell analysis of one lattice.

    ``fit`` runs the full pipeline; ``predict`` quantizes Cartesian points to
    their nearest lattice points.
    """

    def __init__(
        self,
        streak: int = 500,
        seed: int = 0,
        budget: int = 10_000_000,
        use_subgroups: bool = True,
        check_float: bool = True,
        digits: int = 30,
    ):
        self.streak = streak
        self.seed = seed
        self.budget = budget
        self.use_subgroups = use_subgroups
        self.check_float = check_float
        self.digits = digits

    def fit(self, lattice, y=None, progress=None):
        lat = check_lattice(lattice)
        self.lattice_ = lat
        self.analysis_ = analyze_lattice(
            lat,
            streak=self.streak,
            seed=self.seed,
            budget=self.budget,
            use_subgroups=self.use_subgroups,
            check_float=self.check_float,
            digits=self.digits,
            progress=progress,
        )
        res = self.analysis_.result
        self.result_ = res
        self.G_ = res.G
        self.G_decimal_ = res.G_decimal
        self.volume_ = res.volume
        self.n_relevant_ = len(self.analysis_.relevant)
        self.class_counts_ = self.analysis_.hierarchy.class_counts()
        self.n_features_in_ = lat.n
        self._prepare_decoder()
        return self

    def _prepare_decoder(self):
        lat = self.lattice_
        b = lat.cartesian_float
        u, _, _ = _reduced_frame(lat)
        self._breduced = u.astype(float) @ b
        self._bred_inv = np.linalg.inv(self._breduced)
        self._rel = self.analysis_.relevant.vectors.astype(float) @ b
        self._rel_norm = np.einsum("ij,ij->i", self._rel, self._rel)

    def predict(self, X) -> np.ndarray:
        """Nearest lattice point (Cartesian) for each row of ``X``."""
        check_is_fitted(self, "analysis_")
        X = check_points(X, self.n_features_in_)
        centre = np.rint(X @ self._bred_inv) @ self._breduced
        err = _decode_with_relevant(X - centre, self._rel, self._rel_norm)
        return X - err

    def transform(self, X) -> np.ndarray:
        """Quantization error ``x - Q(x)``; every row lies in the Voronoi cell."""
        X = check_points(X, getattr(self, "n_features_in_", 0))
        return X - self.predict(X)

    def score(self, X, y=None) -> float:
        """Negative mean squared quantization error per dimension."""
        e = self.transform(X)
        return -float(np.mean(np.einsum("ij,ij->i", e, e))) / self.n_features_in_


class FamilyOptimizer(BaseEstimator):
    """Optimize the layer spacing of a laminated family ``[[B, 0], [h, a]]``."""

    def __init__(
        self,
        offset: Optional[Sequence] = None,
        a0=Fraction(1),
        samples: Optional[int] = None,
        spacing=None,
        streak: int = 500,
        seed: int = 0,
        dense: int = 64,
        digits: int = 20,
    ):
        self.offset = offset
        self.a0 = a0
        self.samples = samples
        self.spacing = spacing
        self.streak = streak
        self.seed = seed
        self.dense = dense
        self.digits = digits

    def fit(self, base, y=None, progress=None):
        lat = check_lattice(base)
        a0 = check_rational(self.a0, "a0", positive=True)
        offset = [as_exact(c) for c in (self.offset if self.offset is not None else [0] * lat.n)]
        if len(offset) != lat.n:
            raise ParameterError(f"offset needs {lat.n} entries")
        self.family_ = analyze_family(
            lat, offset, a0, samples=self.samples, spacing=self.spacing, streak=self.streak, seed=self.seed, progress=progress
        )
        self.window_ = validity_window(self.family_, dense=self.dense, progress=progress)
        self.result_ = minimize_G(self.family_, self.window_, digits=self.digits)
        self.U_ = self.family_.U()
        self.f_ = self.result_.f
        if self.family_.alpha is not None:
            self.alpha_, self.beta_ = tensor_decomposition(self.family_)
        else:
            self.alpha_ = self.beta_ = None
        self.a_opt_ = self.result_.a_opt
        self.G_opt_ = self.result_.G_opt
        return self

    def predict(self, a) -> np.ndarray:
        """``G(a)`` from the fitted second moment, for each spacing in ``a``."""
        check_is_fitted(self, "family_")
        a = np.atleast_1d(np.asarray(a, dtype=float))
        if np.any(a <= 0):
            raise ValueError("spacings must be positive")
        return np.array([float(self.family_.G_mp(float(x), 20)) for x in a])
