"""Single-pass running mean/variance (Welford's algorithm)."""

from __future__ import annotations


class Welford:
    """Numerically stable one-pass accumulator for mean and sample variance.

    Safe for values with a large common offset: the update works on
    deviations from the running mean, never on raw sums of squares.
    """

    def __init__(self) -> None:
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def update(self, value: float) -> "Welford":
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (value - self.mean)
        return self

    def extend(self, values) -> "Welford":
        for v in values:
            self.update(v)
        return self

    @property
    def variance(self) -> float:
        """Sample variance (divides by count - 1)."""
        if self.count < 2:
            raise ValueError("variance needs at least two values, got %d" % self.count)
        return self.m2 / (self.count - 1)
