"""Python face of the collapse-lab native core.

Closed-form evaluators and small simulation drivers; heavy ensemble work
stays in the C++ CLI, which writes CSV/JSON artifacts instead.
"""

from fractions import Fraction

try:
    from ._core import (
        RngStream,
        born_frequency,
        expected_duration,
        offdiagonal_magnitude,
        spin_up_frequency,
        spin_up_probability,
        win_probability,
        win_probability_exact,
        __version__,
    )
except ImportError:  # running against a build tree on PYTHONPATH
    from _core import (
        RngStream,
        born_frequency,
        expected_duration,
        offdiagonal_magnitude,
        spin_up_frequency,
        spin_up_probability,
        win_probability,
        win_probability_exact,
        __version__,
    )


def win_probability_fraction(k, total_quanta):
    """Exact win odds as a Fraction, from k of total_quanta wealth quanta."""
    num, den = win_probability_exact(k, total_quanta)
    return Fraction(int(num), int(den))


__all__ = [
    "RngStream",
    "born_frequency",
    "expected_duration",
    "offdiagonal_magnitude",
    "spin_up_frequency",
    "spin_up_probability",
    "win_probability",
    "win_probability_exact",
    "win_probability_fraction",
    "__version__",
]
