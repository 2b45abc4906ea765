import sys

from app.core.config import get_settings
from app.core.logging import setup_logging


def run_api() -> None:
    import uvicorn

    settings = get_settings()
    uvicorn.run("app.api.main:app", host=settings.host, port=settings.port, reload=False)


def run_cli() -> int:
    from app.cli import main as cli_main

    return cli_main()


def main() -> None:
    settings = get_settings()
    setup_logging(settings.log_level)

    if settings.app_mode == "api":
        run_api()
    else:
        sys.exit(run_cli())


if __name__ == "__main__":
    main()
