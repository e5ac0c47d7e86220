"""`python -m sketchprove.prover`: run the reference wire-protocol server."""

from .wire import main

if __name__ == "__main__":
    raise SystemExit(main())
