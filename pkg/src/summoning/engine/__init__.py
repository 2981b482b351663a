"""Protocol IR, causality-checked interpreter, builders and verifier."""

from .ir import CausalityViolation, Program, ProgramError, Unsupported
from .runtime import Transcript, run
from .verify import VerificationResult, verify

__all__ = ["CausalityViolation", "Program", "ProgramError", "Unsupported", "Transcript", "run",
           "VerificationResult", "verify"]
