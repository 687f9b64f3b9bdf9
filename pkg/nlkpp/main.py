import logging
import sys

from NonlocalKPPApp import NonlocalKPPApp

# Set up logging to console
logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")


def main():
    """
    The main entry point of the application.
    """
    app = NonlocalKPPApp(sys.argv[1:])
    sys.exit(app.exec())


if __name__ == "__main__":
    main()
