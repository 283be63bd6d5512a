"""User-facing numeric mode selection."""

from dataclasses import dataclass

ACTIVATION_MODES = ("rational", "fast")
SOFTMAX_EXP_MODES = ("fast", "precise")


@dataclass(frozen=True)
class ApproximationOptions:
    """Controls the transcendental implementations baked into the code.

    activation_mode: 'rational' uses the clamped Pade tanh/sigmoid,
    'fast' the bit-twiddled exponential forms.
    softmax_exp: 'fast' is the bit-twiddled exponential, 'precise' a
    range-reduced polynomial good to about 1e-7 relative.
    """
    activation_mode: str = "rational"
    softmax_exp: str = "fast"

    def __post_init__(self):
        if self.activation_mode not in ACTIVATION_MODES:
            raise ValueError(f"activation_mode must be one of "
                             f"{ACTIVATION_MODES}, got {self.activation_mode!r}")
        if self.softmax_exp not in SOFTMAX_EXP_MODES:
            raise ValueError(f"softmax_exp must be one of "
                             f"{SOFTMAX_EXP_MODES}, got {self.softmax_exp!r}")
