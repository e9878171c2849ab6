# Import Libraries
from src.cli import main as cli_main
import logging
import sys

# --- 1. Configure Logging ---
# Default logging until the command line has read config.yaml, which then
# replaces this setup with the level and format of its `logging` section.
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S'
)
logger = logging.getLogger(__name__)

def main() -> int:
    """Runs the analyze, simulate or calibrate command named on the command line."""
    logger.debug(f"Arguments: {sys.argv[1:]}")
    return cli_main(sys.argv[1:])

if __name__ == "__main__":
    sys.exit(main())
