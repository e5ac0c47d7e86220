"""sketchprove: draft informal proofs, autoformalize them into declarative
proof sketches, and close the remaining gaps with a tactic-cascade prover."""

__version__ = "0.1.0"
