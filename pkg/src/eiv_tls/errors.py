"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the command line
front end reports in its JSON bodies.
"""


class EivTlsError(Exception):
    code = "error"


class NonFinite(EivTlsError, ValueError):
    code = "non_finite"


class NotPsd(EivTlsError, ValueError):
    code = "not_psd"


class DimensionMismatch(EivTlsError, ValueError):
    code = "dimension_mismatch"


class RankDeficient(EivTlsError, ValueError):
    code = "rank_deficient"


class InfiniteEigenvalue(EivTlsError, ValueError):
    code = "infinite_eigenvalue"


class Incompatible(EivTlsError, ValueError):
    code = "incompatible"


class NoSolution(EivTlsError):
    """The constraint set of the Frobenius problem is empty (nu_d is infinite)."""

    code = "no_solution"


class NonGeneric(EivTlsError):
    """The estimated subspace has a singular bottom block; X-hat does not exist."""

    code = "non_generic"


class GapTooSmall(EivTlsError):
    code = "gap_too_small"


class InvalidSpec(EivTlsError, ValueError):
    code = "invalid_spec"


class SingularN(EivTlsError):
    code = "singular_n"


class PreconditionViolated(EivTlsError, ValueError):
    code = "precondition_violated"
