"""Console entry point: `ddcsieve <subcommand> [--config PATH] [--seed N] [--out DIR] [--threads N]`.

Configures a minimal Django environment when none is present and runs the
`ddcsieve` management command. Exit codes: 0 success, 1 usage or
configuration error, 2 numeric or convergence failure.
"""

import logging
import sys

import django
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {"plain": {"format": "%(levelname)s %(name)s: %(message)s"}},
    "handlers": {"stderr": {"class": "logging.StreamHandler", "formatter": "plain", "stream": "ext://sys.stderr"}},
    "loggers": {"ddcsieve": {"handlers": ["stderr"], "level": "WARNING"}},
}


def configure() -> None:
    if not settings.configured:
        settings.configure(INSTALLED_APPS=["ddcsieve"], LOGGING=LOGGING, USE_TZ=True)
    django.setup()


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    configure()
    try:
        call_command("ddcsieve", *argv)
    except CommandError as exc:
        logging.getLogger("ddcsieve").error("%s", exc)
        sys.stderr.write(f"ddcsieve: {exc}\n")
        return getattr(exc, "returncode", 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
