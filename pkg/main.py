# main.py
import logging
import sys

from cli import main as run_cli
from config import Settings


class NhkpmApplication:
    def __init__(self, argv=None):
        self.argv = sys.argv[1:] if argv is None else argv
        self.setup_logging()
        logging.getLogger(__name__).debug(f"{Settings.APP_NAME} {Settings.APP_VERSION}")

    @staticmethod
    def setup_logging():
        handlers = [logging.StreamHandler(sys.stderr)]
        if Settings.LOG_FILE:
            handlers.append(logging.FileHandler(Settings.LOG_FILE, encoding="utf-8"))
        logging.basicConfig(
            level=getattr(logging, Settings.LOG_LEVEL.upper(), logging.INFO),
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
            handlers=handlers,
        )

    def run(self):
        return run_cli(self.argv)


if __name__ == '__main__':
    app = NhkpmApplication()
    sys.exit(app.run())
