"""genus2: exact arithmetic for pairs of alternating forms over finite fields,
and isomorphism testing of finite p-groups of genus 2.

The package decides isoclinism/isomorphism of class-2 p-groups whose
commutator structure is 2-dimensional over the centroid residue field
(equivalently, pseudo-isometry of pairs of alternating bilinear forms),
and returns explicit, independently verified witnesses.

Layout:
    gf        prime/extension field contexts, polynomials, factorization
    linalg    dense exact linear algebra over a field context
    forms     systems of alternating forms: radicals, centroid, adjoint, genus
    pencil    Kronecker-Dieudonne decomposition of form pairs
    pfaffian  generalized Pfaffians and the small-field isomorphism test
    adjten    the adjoint-tensor method for sloped pairs
    groups    class-2 exponent-p group layer and end-to-end tests
    cli       command line driver (gen/test/bench/fixtures/pig)
"""

from genus2.gf import FieldCtx, Poly, field_make, poly_factor, poly_roots

__all__ = [
    "FieldCtx",
    "Poly",
    "field_make",
    "poly_factor",
    "poly_roots",
]

__version__ = "0.1.0"
