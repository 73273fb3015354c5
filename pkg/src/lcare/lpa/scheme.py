from __future__ import annotations

from dataclasses import dataclass, field, asdict

DEFAULT_LENGTHS = (60, 72, 86, 104, 124, 149, 179, 250)
RHO_RULES = ("per_k", "per_step")


@dataclass(frozen=True)
class IntervalScheme:
    """Nested right-end intervals I_0 < I_1 < ... < I_K given by their lengths."""

    lengths: tuple = DEFAULT_LENGTHS
    n0: int = 60
    c: float = 1.2

    def __post_init__(self):
        ls = tuple(int(v) for v in self.lengths)
        if len(ls) < 2:
            raise ValueError("scheme needs at least two intervals")
        if any(b <= a for a, b in zip(ls, ls[1:])) or ls[0] < 1:
            raise ValueError(f"interval lengths must be positive and strictly increasing: {ls}")
        object.__setattr__(self, "lengths", ls)

    @classmethod
    def geometric(cls, n0=60, c=1.2, K=7, last=250):
        """n_k = round(n0 c^k); the final length is replaced by ``last`` if given."""
        ls = [int(round(n0 * c**k)) for k in range(K + 1)]
        if last is not None:
            ls[-1] = last
        return cls(tuple(ls), n0, c)

    @property
    def K(self) -> int:
        return len(self.lengths) - 1

    @property
    def longest(self) -> int:
        return self.lengths[-1]

    def enclosing(self, k: int) -> int:
        """Length of the interval that hosts the step-k test (I_{k+1}, or I_K at k=K)."""
        if not 1 <= k <= self.K:
            raise ValueError(f"step k must lie in 1..{self.K}")
        return self.lengths[min(k + 1, self.K)]


@dataclass(frozen=True)
class LpaConfig:
    scheme: IntervalScheme = field(default_factory=IntervalScheme)
    tau: float = 0.05
    r: float = 1.0
    rho: float = 0.25
    n_paths: int = 1000
    min_window: int = 20
    split_stride: int = 1
    burn_in: int = 100
    rho_rule: str = "per_k"

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("risk power r must be positive")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")
        if self.rho_rule not in RHO_RULES:
            raise ValueError(f"rho_rule must be one of {RHO_RULES}")

    def rho_k(self, k: int) -> float:
        return self.rho * k / self.scheme.K

    def as_dict(self):
        d = asdict(self)
        d["scheme"] = {"lengths": list(self.scheme.lengths), "n0": self.scheme.n0, "c": self.scheme.c}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        s = d.pop("scheme", None)
        scheme = IntervalScheme(tuple(s["lengths"]), s.get("n0", 60), s.get("c", 1.2)) if s else IntervalScheme()
        return cls(scheme=scheme, **d)
