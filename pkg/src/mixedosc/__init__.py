"""Oscillator design with mixed positive/negative feedback."""

from .dominance import Label, RegionGrid, critical_gain, k_bar_2, region_scan, validate_rate
from .estimators import (FastSlowDesigner, HarmonicBalanceDesigner, MixedFeedbackOscillator,
                         RegionClassifier)
from .exceptions import (ConfigError, DegeneracyError, DivergenceError, InvalidInputError,
                         PoleEvaluationError)
from .fastslow import design_fs, half_cycle_map, predict_half_period, switching_distance
from .feedback import (FeedbackConfig, controller_tf, controller_zero, estimate_oscillation,
                       find_equilibria, loop_tf, realize_loop, simulate)
from .harmonic import beta_bar, describing_function, design_hb, k_bar, predict
from .lti import Polynomial, StateSpaceModel, TransferFunction

__version__ = "0.1.0"
