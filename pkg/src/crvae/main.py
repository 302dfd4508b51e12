import sys

import structlog

from .core.exceptions import CrvaeError, FormatError
from .core.logger import bind_run_context, setup_logging
from .core.setup import create_application
from .schemas.config import load_config

logger = structlog.get_logger(__name__)


def main(argv: list[str] | None = None) -> int:
    parser = create_application()
    args = parser.parse_args(argv)
    setup_logging(verbose=args.verbose)
    run_id = bind_run_context(args.command)
    logger.debug("Command started", argv=argv if argv is not None else sys.argv[1:], run_id=run_id)

    try:
        overrides = {"seed": str(args.seed)} if args.seed is not None else None
        config = load_config(args.config, overrides)
        return int(args.handler(args, config))
    except CrvaeError as e:
        logger.error("Command failed", error=str(e), error_type=type(e).__name__, exit_code=e.exit_code)
        return e.exit_code
    except OSError as e:
        logger.error("File system error", error=str(e), error_type=type(e).__name__, exit_code=FormatError.exit_code)
        return FormatError.exit_code
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return 130


if __name__ == "__main__":
    sys.exit(main())
