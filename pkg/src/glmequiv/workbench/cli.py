"""``glmequiv`` command-line entry point.

Exit codes: 0 when the run's acceptance check passes, 2 when it fails and 1 on
configuration or numerical errors.
"""
from __future__ import annotations

import sys
import warnings

from ..errors import GlmEquivError
from .config import parse_config
from .io import write_result
from .runs import run

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_FAIL = 2


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except GlmEquivError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", category=RuntimeWarning)
            result = run(cfg)
        paths = write_result(result, cfg)
    except (GlmEquivError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    status = "PASS" if result.passed else "FAIL"
    print(f"{cfg.command} {cfg.family or ''}: {status}".replace(" :", ":"))
    for p in paths.values():
        print(f"  wrote {p}")
    return EXIT_PASS if result.passed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
