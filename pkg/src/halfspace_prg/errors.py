"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class HalfspacePrgError(Exception):
    pass


class UsageError(HalfspacePrgError, ValueError):
    """Caller passed structurally invalid arguments (shape, degree, index)."""


class ParameterError(HalfspacePrgError, ValueError):
    """A numeric parameter lies outside its legal range."""


class CapExceededError(HalfspacePrgError):
    """An exact enumeration would exceed its configured size cap."""

    def __init__(self, what: str, size: int, cap: int):
        self.what = what
        self.size = size
        self.cap = cap
        super().__init__(f"{what}: {size} exceeds enumeration cap {cap}")


class ClassificationError(HalfspacePrgError):
    """An LTF is neither s-sparse nor tau-regular under the requested split."""

    def __init__(self, index: int, sparsity: int, tau_min: float):
        self.index = index
        self.sparsity = sparsity
        self.tau_min = tau_min
        super().__init__(
            f"LTF #{index} is neither sparse nor regular "
            f"(sparsity {sparsity}, tau_min {tau_min:.6g})"
        )


class InfeasibleError(HalfspacePrgError):
    pass
