"""Numerical verification of harmonic sections and harmonic maps of differential forms.

Modules:

* ``multilinear``: alternating forms, wedge, interior product, Hodge star, metrics.
* ``gstructures``: octonions, quaternions and the canonical forms of G-structures.
* ``manifold``: charts, metrics, Christoffel symbols, curvature, covariant derivatives.
* ``harmonic``: rough Laplacian, curvature pairing, harmonic section and map residuals.
* ``models``: the catalog of example manifolds with their expected checks.
* ``oracle``: independent cross-checks (ambient projection, Gauss equation, Monte Carlo).
* ``runner`` and ``cli``: batch execution, reports and the ``harmonia`` command.
"""

from __future__ import annotations

__version__ = "0.1.0"

__all__ = ["__version__"]
