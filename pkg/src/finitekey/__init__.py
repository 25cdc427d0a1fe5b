"""Finite-key decoy-state BB84 key rates with McDiarmid-type fluctuation bounds."""
from .bounds import ALL_METHODS, Method, MethodBound
from .channel import ChannelModel, ObservedStats, ProtocolParams, gain_and_error, observe
from .coeffs import DecoyCoefficients, decoy_coefficients
from .keyrate import KeyRateResult, SecurityBudget, asymptotic_rate, evaluate, secure_rate

__version__ = "0.1.0"
