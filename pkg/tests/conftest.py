import numpy as np
import pytest

from stylegroup.dsl import RuleBase, parse_rulebase, default_rulebase


@pytest.fixture(scope="session")
def rb() -> RuleBase:
    return default_rulebase()


@pytest.fixture
def mini_rulebase() -> RuleBase:
    """One dimension, one input with two terms meeting at 6, two rules."""
    return parse_rulebase(
        """
        input effort dim=processing universe=[0,12] { low=(0,0,4,8) high=(4,8,12,12) }
        output processing_score dim=processing universe=[0,12] { calm=(0,0,6,8) busy=(6,8,12,12) }

        RULE r_low: IF effort IS low THEN processing_score IS calm
        RULE r_high: IF effort IS high THEN processing_score IS busy
        """
    )


def riemann_centroid(envelope, lo: float, hi: float, points: int = 1_000_000) -> float:
    """Independent midpoint-Riemann centroid oracle over [lo, hi]."""
    edges = np.linspace(lo, hi, points + 1)
    mids = (edges[:-1] + edges[1:]) / 2.0
    values = envelope(mids)
    total = values.sum()
    return float((mids * values).sum() / total)


def scaled_trap_envelope(contributions):
    """Max of strength-scaled trapezoids, written independently of the package.

    Uses the clip formulation rather than the package's masked branches.
    """

    def envelope(xs: np.ndarray) -> np.ndarray:
        env = np.zeros_like(xs, dtype=float)
        for strength, (a, b, c, d) in contributions:
            rising = np.clip((xs - a) / (b - a), 0.0, 1.0) if b > a else (xs >= a).astype(float)
            falling = np.clip((d - xs) / (d - c), 0.0, 1.0) if d > c else (xs <= d).astype(float)
            env = np.maximum(env, strength * np.minimum(rising, falling))
        return env

    return envelope
